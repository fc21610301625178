"""MFCC front end: pre-emphasis, framing, Hamming window, power spectrum,
mel filterbank, log compression and the cosine transform to cepstra."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

LOG_FLOOR = 1e-10


class FrontendError(ValueError):
    """Raised for invalid audio or front-end configuration."""


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise FrontendError(f"expected mono samples, got shape {samples.shape}")
        if samples.size == 0:
            raise FrontendError("audio clip has no samples")
        if not self.sample_rate > 0:
            raise FrontendError(f"sample_rate must be positive, got {self.sample_rate}")
        bad = np.flatnonzero(~np.isfinite(samples))
        if bad.size:
            raise FrontendError(f"non-finite sample at index {bad[0]}")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class FrontendConfig:
    preemphasis_k: float = 0.97
    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    fft_size: int | None = None  # None: smallest power of two >= frame length
    num_filters: int = 26
    fmin_hz: float = 0.0
    fmax_hz: float | None = None  # None: Nyquist
    num_ceps: int = 19
    drop_c1: bool = True
    mel_log: str = "log10"  # "ln" reproduces the natural-log form literally

    def frame_len(self, sample_rate: float) -> int:
        return int(round(self.frame_len_ms * sample_rate / 1000.0))

    def hop(self, sample_rate: float) -> int:
        return int(round(self.hop_ms * sample_rate / 1000.0))

    def resolve(self, sample_rate: float) -> "FrontendConfig":
        """Fill in sample-rate dependent defaults and validate."""
        cfg = self
        if cfg.fft_size is None:
            n = cfg.frame_len(sample_rate)
            cfg = replace(cfg, fft_size=1 << max(0, (n - 1).bit_length()))
        if cfg.fmax_hz is None:
            cfg = replace(cfg, fmax_hz=sample_rate / 2.0)
        cfg.validate(sample_rate)
        return cfg

    def validate(self, sample_rate: float) -> None:
        if not 0.0 <= self.preemphasis_k <= 1.0:
            raise FrontendError(f"preemphasis_k must lie in [0, 1], got {self.preemphasis_k}")
        if not 0.0 < self.hop_ms <= self.frame_len_ms:
            raise FrontendError("need 0 < hop_ms <= frame_len_ms")
        frame_len = self.frame_len(sample_rate)
        hop = self.hop(sample_rate)
        if frame_len < 2 or hop < 1:
            raise FrontendError(f"frame of {frame_len} samples / hop of {hop} is too short")
        fft = self.fft_size
        if fft is None or fft < 1 or fft & (fft - 1):
            raise FrontendError(f"fft_size must be a power of two, got {fft}")
        if fft < frame_len:
            raise FrontendError(f"fft_size {fft} is shorter than the frame ({frame_len} samples)")
        fmax = sample_rate / 2.0 if self.fmax_hz is None else self.fmax_hz
        if not 0.0 <= self.fmin_hz < fmax <= sample_rate / 2.0:
            raise FrontendError(
                f"need 0 <= fmin_hz < fmax_hz <= {sample_rate / 2.0}, "
                f"got fmin={self.fmin_hz}, fmax={fmax}"
            )
        if self.num_filters < 1 or self.num_ceps < 1:
            raise FrontendError("num_filters and num_ceps must be positive")
        highest = self.num_ceps + (1 if self.drop_c1 else 0)
        if highest > self.num_filters:
            raise FrontendError(
                f"cepstral order {highest} exceeds the {self.num_filters} filterbank channels"
            )
        if self.mel_log not in ("log10", "ln"):
            raise FrontendError(f"mel_log must be 'log10' or 'ln', got {self.mel_log!r}")

    @property
    def first_coefficient(self) -> int:
        return 2 if self.drop_c1 else 1

    @property
    def coefficient_orders(self) -> list[int]:
        start = self.first_coefficient
        return list(range(start, start + self.num_ceps))


@dataclass
class CepstraMatrix:
    """Frames x coefficients. ``orders`` holds the cepstral index of each column."""

    values: np.ndarray
    orders: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise FrontendError(f"cepstra must be a non-empty 2-D matrix, got {self.values.shape}")
        if not self.orders:
            self.orders = list(range(1, self.values.shape[1] + 1))
        if len(self.orders) != self.values.shape[1]:
            raise FrontendError("orders do not match the number of columns")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def _check_finite(x: np.ndarray, what: str) -> None:
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise FrontendError(f"non-finite {what} at index {bad[0]}")


def preemphasize(signal, k: float = 0.97) -> np.ndarray:
    """y[0] = x[0], y[t] = x[t] - k * x[t-1]."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise FrontendError("pre-emphasis needs a non-empty 1-D signal")
    if not 0.0 <= k <= 1.0:
        raise FrontendError(f"pre-emphasis coefficient must lie in [0, 1], got {k}")
    _check_finite(x, "input sample")
    y = x.copy()
    y[1:] -= k * x[:-1]
    return y


def num_frames(length: int, frame_len: int, hop: int) -> int:
    if length <= frame_len:
        return 1
    return -(-(length - frame_len) // hop) + 1


def frame_signal(signal, frame_len: int, hop: int) -> np.ndarray:
    """Split into overlapping frames; the last frame is zero-padded.

    A signal shorter than one frame yields a single padded frame.
    """
    x = np.asarray(signal, dtype=np.float64)
    if frame_len < 1 or not 0 < hop <= frame_len:
        raise FrontendError(f"need 0 < hop <= frame_len, got hop={hop}, frame_len={frame_len}")
    n = num_frames(x.size, frame_len, hop)
    padded = np.zeros((n - 1) * hop + frame_len)
    padded[: x.size] = x
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n)[:, None]
    return padded[idx]


def hamming(n: int) -> np.ndarray:
    if n < 2:
        raise FrontendError(f"Hamming window needs at least 2 points, got {n}")
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(n) / (n - 1))


def hamming_window(frame) -> np.ndarray:
    """Apply the Hamming window along the last axis."""
    frame = np.asarray(frame, dtype=np.float64)
    return frame * hamming(frame.shape[-1])


def power_spectrum(windowed_frame, fft_size: int) -> np.ndarray:
    """|DFT|^2 of the zero-padded frame, non-redundant half (fft_size // 2 + 1 bins)."""
    frame = np.asarray(windowed_frame, dtype=np.float64)
    if fft_size < 1 or fft_size & (fft_size - 1):
        raise FrontendError(f"fft_size must be a power of two, got {fft_size}")
    if frame.shape[-1] > fft_size:
        raise FrontendError(f"frame of {frame.shape[-1]} samples exceeds fft_size {fft_size}")
    spec = np.fft.rfft(frame, n=fft_size, axis=-1)
    return spec.real**2 + spec.imag**2


def hz_to_mel(f, base: str = "log10"):
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise FrontendError("frequency must be non-negative")
    if base == "ln":
        out = 2595.0 * np.log1p(f / 700.0)
    else:
        out = 2595.0 * np.log10(1.0 + f / 700.0)
    return out if out.ndim else float(out)


def mel_to_hz(m, base: str = "log10"):
    m = np.asarray(m, dtype=np.float64)
    if base == "ln":
        out = 700.0 * np.expm1(m / 2595.0)
    else:
        out = 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    return out if out.ndim else float(out)


def filter_edges_hz(config: FrontendConfig, sample_rate: float) -> np.ndarray:
    """num_filters + 2 frequencies equally spaced in mel from fmin to fmax."""
    cfg = config.resolve(sample_rate)
    lo = hz_to_mel(cfg.fmin_hz, cfg.mel_log)
    hi = hz_to_mel(cfg.fmax_hz, cfg.mel_log)
    return mel_to_hz(np.linspace(lo, hi, cfg.num_filters + 2), cfg.mel_log)


def build_mel_filterbank(config: FrontendConfig, sample_rate: float) -> np.ndarray:
    """Triangular filters, shape (num_filters, fft_size // 2 + 1).

    Triangles are evaluated at the exact bin frequencies, so a bin that sits
    on a centre frequency receives weight 1.
    """
    cfg = config.resolve(sample_rate)
    edges = filter_edges_hz(cfg, sample_rate)
    bin_hz = sample_rate / cfg.fft_size
    centre_bins = np.round(edges[1:-1] / bin_hz).astype(int)
    clash = np.flatnonzero(np.diff(centre_bins) == 0)
    if clash.size:
        j = int(clash[0])
        raise FrontendError(
            f"{cfg.num_filters} filters is too many for fft_size {cfg.fft_size}: "
            f"filters {j} and {j + 1} are centred on the same bin ({centre_bins[j]})"
        )
    freqs = np.arange(cfg.fft_size // 2 + 1) * bin_hz
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (centre - lower)
    falling = (upper - freqs) / (upper - centre)
    return np.maximum(0.0, np.minimum(rising, falling))


def log_filterbank_energies(spectrum, filterbank, floor: float = LOG_FLOOR) -> np.ndarray:
    """log(max(filterbank @ spectrum, floor)); accepts one spectrum or a stack of them."""
    spectrum = np.asarray(spectrum, dtype=np.float64)
    filterbank = np.asarray(filterbank, dtype=np.float64)
    if spectrum.shape[-1] != filterbank.shape[1]:
        raise FrontendError(
            f"spectrum has {spectrum.shape[-1]} bins but filterbank expects {filterbank.shape[1]}"
        )
    return np.log(np.maximum(spectrum @ filterbank.T, floor))


def dct_matrix(n_channels: int, num_ceps: int, start: int = 1) -> np.ndarray:
    i = np.arange(start, start + num_ceps)[:, None]
    j = np.arange(1, n_channels + 1)[None, :]
    return math.sqrt(2.0 / n_channels) * np.cos(np.pi * i / n_channels * (j - 0.5))


def dct_cepstra(log_energies, num_ceps: int, start: int = 1) -> np.ndarray:
    """c_i = sqrt(2/N) sum_j m_j cos(pi i (j - 0.5) / N) for i = start .. start + num_ceps - 1."""
    m = np.asarray(log_energies, dtype=np.float64)
    n = m.shape[-1]
    if num_ceps < 1 or start < 1 or start + num_ceps - 1 > n:
        raise FrontendError(
            f"cepstral orders {start}..{start + num_ceps - 1} not available from {n} channels"
        )
    return m @ dct_matrix(n, num_ceps, start).T


def extract_mfcc(clip: AudioClip, config: FrontendConfig | None = None) -> CepstraMatrix:
    cfg = (config or FrontendConfig()).resolve(clip.sample_rate)
    sr = clip.sample_rate
    emphasized = preemphasize(clip.samples, cfg.preemphasis_k)
    frames = frame_signal(emphasized, cfg.frame_len(sr), cfg.hop(sr))
    spectra = power_spectrum(hamming_window(frames), cfg.fft_size)
    fbank = build_mel_filterbank(cfg, sr)
    log_e = log_filterbank_energies(spectra, fbank)
    ceps = dct_cepstra(log_e, cfg.num_ceps, start=cfg.first_coefficient)
    bad_rows = np.flatnonzero(~np.all(np.isfinite(ceps), axis=1))
    if bad_rows.size:
        raise FrontendError(f"non-finite cepstra in frame {bad_rows[0]}")
    return CepstraMatrix(ceps, cfg.coefficient_orders)
