"""Experiment configuration: defaults, a flat ``section.key = value`` file
format, and command-line overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .frontend import FrontendConfig
from .nn import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class SynthConfig:
    n_pd: int = 20
    n_healthy: int = 20
    vowels: str = "aou"
    sample_rate: int = 16000
    duration_s: float = 1.0
    genders: str = "cohort"
    spread: float = 1.0


@dataclass
class EvalConfig:
    k: int | None = None  # None: leave-one-out
    stratify: bool = True
    vowel: str | None = None  # restrict to one vowel
    coefficients: list[int] | None = None
    subsets: list[list[int]] | None = None  # sweep candidates; None: every singleton
    workers: int = 1


@dataclass
class ExperimentConfig:
    seed: int = 0
    weighting: str = "per_utterance"  # or "corpus"
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    net: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def train_config(self) -> TrainConfig:
        return replace(self.net, seed=self.seed, hidden=tuple(self.net.hidden))

    def validate(self) -> None:
        if self.weighting not in ("per_utterance", "corpus"):
            raise ConfigError(f"weighting must be per_utterance or corpus, got {self.weighting!r}")
        if self.eval.k is not None and self.eval.k < 2:
            raise ConfigError("eval.k must be at least 2")
        if self.synth.n_pd < 1:
            raise ConfigError("synth.n_pd must be at least 1")
        if self.synth.n_healthy < 0:
            raise ConfigError("synth.n_healthy must be non-negative")
        try:
            self.train_config().validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def flat(self) -> dict[str, object]:
        """Every setting as ``section.key`` -> value, sorted."""
        out: dict[str, object] = {"seed": self.seed, "weighting": self.weighting}
        for section in ("frontend", "net", "eval", "synth"):
            for key, value in asdict(getattr(self, section)).items():
                out[f"{section}.{key}"] = list(value) if isinstance(value, tuple) else value
        return dict(sorted(out.items()))

    def dumps(self) -> str:
        return "".join(f"{k} = {json.dumps(v)}\n" for k, v in self.flat().items())


def parse_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _coerce(current, value, key):
    if value is None:
        return None
    if isinstance(current, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "yes", "no", "1", "0"):
            return value.lower() in ("true", "yes", "1")
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if isinstance(current, tuple):
        return tuple(int(v) for v in value)
    if isinstance(current, int) and not isinstance(value, bool):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, int):
            return value
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if isinstance(current, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    return value


def apply_setting(cfg: ExperimentConfig, key: str, value) -> ExperimentConfig:
    if key in ("seed", "weighting"):
        return replace(cfg, **{key: _coerce(getattr(cfg, key), value, key)})
    section, _, name = key.partition(".")
    if section not in ("frontend", "net", "eval", "synth") or not name:
        raise ConfigError(f"unknown setting {key!r}")
    sub = getattr(cfg, section)
    known = {f.name for f in fields(sub)}
    if name not in known:
        raise ConfigError(f"unknown setting {key!r}")
    if key == "eval.coefficients" and isinstance(value, (str, int)):
        value = parse_indices(str(value))
    elif key == "eval.subsets" and isinstance(value, str):
        value = parse_subsets(value)
    coerced = _coerce(getattr(sub, name), value, key)
    return replace(cfg, **{section: replace(sub, **{name: coerced})})


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        try:
            cfg = apply_setting(cfg, key.strip(), parse_value(value))
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return cfg


def load_config(path: str | Path | None, overrides: dict | None = None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is not None:
        cfg = parse_config_text(Path(path).read_text(), cfg)
    for key, value in (overrides or {}).items():
        cfg = apply_setting(cfg, key, value)
    cfg.validate()
    return cfg


def parse_subsets(text: str) -> list[list[int]]:
    """'6;7,11;4-8' -> [[6], [7, 11], [4, 5, 6, 7, 8]]."""
    subsets = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if chunk:
            subsets.append(parse_indices(chunk))
    if not subsets:
        raise ConfigError(f"no coefficient subsets in {text!r}")
    return subsets


def parse_indices(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(x) for x in part.split("-", 1))
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise ConfigError(f"bad coefficient index {part!r}") from None
    if not out or min(out) < 1:
        raise ConfigError(f"coefficient indices must be positive, got {text!r}")
    return out
