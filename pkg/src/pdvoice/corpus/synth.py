"""Synthetic sustained vowels with controlled jitter, shimmer and HNR.

A Rosenberg glottal-flow pulse train (one pulse per cycle, period and
amplitude perturbed cycle by cycle) is differentiated for lip radiation,
passed through a cascade of formant resonators and mixed with white noise at
the requested harmonics-to-noise ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter
from scipy.stats import truncnorm

from ..frontend import AudioClip
from ..weighting import HEALTHY, PD

# Formant (centre Hz, bandwidth Hz) triples, adult averages.
FORMANTS = {
    ("male", "a"): ((730.0, 90.0), (1090.0, 110.0), (2440.0, 160.0)),
    ("male", "o"): ((570.0, 80.0), (840.0, 100.0), (2410.0, 160.0)),
    ("male", "u"): ((300.0, 60.0), (870.0, 100.0), (2240.0, 150.0)),
    ("female", "a"): ((850.0, 100.0), (1220.0, 120.0), (2810.0, 180.0)),
    ("female", "o"): ((590.0, 90.0), (920.0, 110.0), (2710.0, 180.0)),
    ("female", "u"): ((370.0, 70.0), (950.0, 110.0), (2670.0, 170.0)),
}

# Group acoustics: (mean, sd) of F0 (Hz), jitter (%), shimmer (%), HNR (dB).
GROUP_ACOUSTICS = {
    (HEALTHY, "male"): {"f0_hz": (128.4, 17.6), "jitter_pct": (0.04, 0.36),
                        "shimmer_pct": (0.26, 0.10), "hnr_db": (14.8, 4.6)},
    (HEALTHY, "female"): {"f0_hz": (205.4, 37.6), "jitter_pct": (1.16, 1.15),
                          "shimmer_pct": (0.35, 0.46), "hnr_db": (11.0, 7.1)},
    (PD, "male"): {"f0_hz": (120.5, 20.8), "jitter_pct": (0.94, 0.76),
                   "shimmer_pct": (0.37, 0.16), "hnr_db": (10.4, 3.7)},
    (PD, "female"): {"f0_hz": (193.8, 16.4), "jitter_pct": (1.94, 1.30),
                     "shimmer_pct": (0.68, 0.91), "hnr_db": (8.1, 5.1)},
}

PHYSICAL_BOUNDS = {
    "f0_hz": (60.0, 400.0),
    "jitter_pct": (0.0, 10.0),
    "shimmer_pct": (0.0, 10.0),
    "hnr_db": (0.0, 40.0),
}

PEAK = 0.9
# Mean absolute difference of two iid N(0, s^2) draws is 2 s / sqrt(pi).
_MAD_TO_SD = math.sqrt(math.pi) / 2.0
_LEAD_IN_S = 0.1


@dataclass(frozen=True)
class SynthParams:
    f0_hz: float = 128.4
    jitter_pct: float = 0.0
    shimmer_pct: float = 0.0
    hnr_db: float = math.inf  # inf disables the noise
    duration_s: float = 1.0
    sample_rate: int = 16000
    formants: tuple = FORMANTS[("male", "a")]
    seed: int = 0

    def validate(self) -> None:
        if not self.f0_hz > 0:
            raise ValueError("f0_hz must be positive")
        if self.f0_hz >= self.sample_rate / 2:
            raise ValueError("f0_hz must lie below the Nyquist frequency")
        if self.jitter_pct < 0 or self.shimmer_pct < 0:
            raise ValueError("jitter and shimmer must be non-negative")
        if not self.duration_s > 0 or self.sample_rate <= 0:
            raise ValueError("duration and sample rate must be positive")
        for freq, bw in self.formants:
            if not (0 < freq < self.sample_rate / 2 and bw > 0):
                raise ValueError(f"invalid formant ({freq}, {bw}) at {self.sample_rate} Hz")


def preset(group: str, gender: str = "male", vowel: str = "a", **overrides) -> SynthParams:
    """Group-mean acoustics as synthesis parameters."""
    stats = GROUP_ACOUSTICS[(group, gender)]
    values = {key: mean for key, (mean, _sd) in stats.items()}
    values["formants"] = FORMANTS[(gender, vowel)]
    values.update(overrides)
    return SynthParams(**values)


def rosenberg_flow(phase: np.ndarray, open_frac: float = 0.4, close_frac: float = 0.16) -> np.ndarray:
    """Glottal flow over one cycle for phase in [0, 1)."""
    opening = 0.5 * (1.0 - np.cos(np.pi * phase / open_frac))
    closing = np.cos(0.5 * np.pi * (phase - open_frac) / close_frac)
    return np.where(phase < open_frac, opening,
                    np.where(phase < open_frac + close_frac, closing, 0.0))


def _cycle_starts(p: SynthParams, total_s: float, rng):
    period = 1.0 / p.f0_hz
    n_cycles = int(math.ceil(total_s * p.f0_hz * 1.2)) + 4
    jitter_sd = p.jitter_pct / 100.0 * _MAD_TO_SD
    shimmer_sd = p.shimmer_pct / 100.0 * _MAD_TO_SD
    periods = period * np.clip(1.0 + jitter_sd * rng.standard_normal(n_cycles), 0.5, 1.5)
    amps = np.clip(1.0 + shimmer_sd * rng.standard_normal(n_cycles), 0.1, None)
    starts = np.concatenate([[0.0], np.cumsum(periods)[:-1]])
    return starts, periods, amps


def harmonic_part(p: SynthParams, rng) -> np.ndarray:
    """Noise-free voiced signal including a discarded lead-in for the filters to settle."""
    total_s = p.duration_s + _LEAD_IN_S
    n = int(round(total_s * p.sample_rate))
    t = np.arange(n) / p.sample_rate
    starts, periods, amps = _cycle_starts(p, total_s, rng)
    k = np.searchsorted(starts, t, side="right") - 1
    phase = (t - starts[k]) / periods[k]
    flow = amps[k] * rosenberg_flow(phase)
    x = np.diff(flow, prepend=0.0)
    for freq, bw in p.formants:
        r = math.exp(-math.pi * bw / p.sample_rate)
        c = 2.0 * r * math.cos(2.0 * math.pi * freq / p.sample_rate)
        x = lfilter([1.0 - c + r * r], [1.0, -c, r * r], x)
    return x[int(round(_LEAD_IN_S * p.sample_rate)):]


def synth_vowel(p: SynthParams) -> AudioClip:
    p.validate()
    rng = np.random.default_rng(p.seed)
    voiced = harmonic_part(p, rng)
    voiced = voiced - voiced.mean()
    signal = voiced
    if math.isfinite(p.hnr_db):
        noise_power = np.mean(voiced**2) / 10.0 ** (p.hnr_db / 10.0)
        signal = voiced + math.sqrt(noise_power) * rng.standard_normal(voiced.size)
    signal = PEAK * signal / np.max(np.abs(signal))
    return AudioClip(signal, p.sample_rate)



def draw_acoustics(group: str, gender: str, rng, spread: float = 1.0) -> dict:
    """Per-subject acoustics from the group's normal distributions, truncated to physical bounds."""
    out = {}
    for key, (mean, sd) in GROUP_ACOUSTICS[(group, gender)].items():
        lo, hi = PHYSICAL_BOUNDS[key]
        scale = sd * spread
        if scale == 0:
            out[key] = float(np.clip(mean, lo, hi))
            continue
        a, b = (lo - mean) / scale, (hi - mean) / scale
        out[key] = float(truncnorm.rvs(a, b, loc=mean, scale=scale, random_state=rng))
    return out
