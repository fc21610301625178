"""Entropy-weighted cepstra (WMFCC) and per-utterance voiceprints."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .frontend import CepstraMatrix

log = logging.getLogger(__name__)

PD = "PD"
HEALTHY = "HEALTHY"
UNKNOWN = "UNKNOWN"
LABELS = (PD, HEALTHY, UNKNOWN)
VOWELS = ("a", "o", "u", "other")


@dataclass
class NormalizedCepstra:
    values: np.ndarray
    degenerate: np.ndarray  # bool per column: max == min


@dataclass
class WeightVector:
    weights: np.ndarray
    entropies: np.ndarray
    uniform_fallback: bool = False


@dataclass
class Voiceprint:
    values: np.ndarray
    label: str = UNKNOWN
    source_id: str = ""
    vowel: str = "other"
    subject_id: str = ""
    orders: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if self.vowel not in VOWELS:
            raise ValueError(f"unknown vowel {self.vowel!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"voiceprint {self.source_id!r} has non-finite values")


def _values(cepstra) -> np.ndarray:
    if isinstance(cepstra, CepstraMatrix):
        return cepstra.values
    values = np.asarray(cepstra, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 1:
        raise ValueError(f"expected a frames x coefficients matrix, got shape {values.shape}")
    return values


def normalize_columns(cepstra) -> NormalizedCepstra:
    """(max_j - x_ij) / (max_j - min_j) per column; constant columns become zeros."""
    x = _values(cepstra)
    hi = x.max(axis=0)
    lo = x.min(axis=0)
    span = hi - lo
    degenerate = span == 0
    safe = np.where(degenerate, 1.0, span)
    out = np.where(degenerate, 0.0, (hi - x) / safe)
    return NormalizedCepstra(out, degenerate)


def column_entropy(normalized: NormalizedCepstra) -> np.ndarray:
    """Shannon entropy of each column's share distribution, scaled by 1/ln N into [0, 1].

    Columns carrying no information (all-zero after normalisation) get entropy 1.
    """
    y = normalized.values
    n = y.shape[0]
    totals = y.sum(axis=0)
    empty = normalized.degenerate | (totals <= 0)
    if n < 2:
        return np.ones(y.shape[1])
    p = y / np.where(empty, 1.0, totals)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p), 0.0)
    e = -plogp.sum(axis=0) / np.log(n)
    e = np.clip(e, 0.0, 1.0) + 0.0  # no negative zero
    return np.where(empty, 1.0, e)


def entropy_weights(entropies) -> WeightVector:
    e = np.asarray(entropies, dtype=np.float64)
    if np.any((e < 0) | (e > 1)):
        raise ValueError("entropies must lie in [0, 1]")
    info = 1.0 - e
    total = info.sum()
    if total <= 0:
        log.warning("all %d coefficient columns are degenerate; using uniform weights", e.size)
        return WeightVector(np.full(e.size, 1.0 / e.size), e, uniform_fallback=True)
    return WeightVector(info / total, e)


def apply_weights(cepstra, w: WeightVector) -> np.ndarray:
    """Scale the original (un-normalised) cepstra column-wise by the weights."""
    x = _values(cepstra)
    weights = np.asarray(w.weights if isinstance(w, WeightVector) else w, dtype=np.float64)
    if weights.shape != (x.shape[1],):
        raise ValueError(f"{weights.size} weights for {x.shape[1]} coefficient columns")
    return x * weights


def weights_for(cepstra) -> WeightVector:
    normalized = normalize_columns(cepstra)
    return entropy_weights(column_entropy(normalized))


def corpus_weights(matrices: Iterable) -> WeightVector:
    """Weights computed from the frames of many utterances pooled together."""
    pooled = np.vstack([_values(m) for m in matrices])
    return weights_for(pooled)


def make_voiceprint(cepstra, weights: WeightVector | None = None, **metadata) -> Voiceprint:
    """Frame-averaged weighted cepstra.

    ``weights`` defaults to the utterance's own entropy weights; pass weights
    from :func:`corpus_weights` for corpus-level weighting.
    """
    w = weights if weights is not None else weights_for(cepstra)
    weighted = apply_weights(cepstra, w)
    if isinstance(cepstra, CepstraMatrix):
        metadata.setdefault("orders", list(cepstra.orders))
    return Voiceprint(weighted.mean(axis=0), **metadata)
