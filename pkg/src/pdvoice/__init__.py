"""Entropy-weighted MFCC voiceprints and a small feed-forward network for
separating Parkinsonian from healthy sustained vowels."""

from .evaluation import ConfusionCounts, MetricsReport, make_folds, metrics, run_cross_validation
from .frontend import AudioClip, FrontendConfig, extract_mfcc
from .nn import Network, TrainConfig, fit, predict
from .weighting import HEALTHY, PD, Voiceprint, make_voiceprint

__version__ = "0.1.0"

__all__ = [
    "AudioClip", "ConfusionCounts", "FrontendConfig", "HEALTHY", "MetricsReport", "Network", "PD",
    "TrainConfig", "Voiceprint", "extract_mfcc", "fit", "make_folds", "make_voiceprint", "metrics",
    "predict", "run_cross_validation",
]
