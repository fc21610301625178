"""Dataset manifests and the synthetic Parkinsonian / healthy vowel corpus."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..frontend import AudioClip
from ..weighting import HEALTHY, PD
from .synth import FORMANTS, GROUP_ACOUSTICS, SynthParams, draw_acoustics, synth_vowel

MANIFEST_COLUMNS = ("subject_id", "vowel", "label", "source")
PARAM_COLUMNS = ("gender", "f0_hz", "jitter_pct", "shimmer_pct", "hnr_db", "seed")

# Share of women per group in the recorded cohort (6 of 20 PD, 10 of 20 healthy).
FEMALE_SHARE = {PD: 6 / 20, HEALTHY: 10 / 20}


class ManifestError(ValueError):
    pass


@dataclass
class ManifestEntry:
    subject_id: str
    vowel: str
    label: str
    source: str
    params: dict = field(default_factory=dict)

    def resolve(self, base: Path | None) -> Path:
        path = Path(self.source)
        return path if path.is_absolute() or base is None else base / path


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    note: str = ""

    def __len__(self) -> int:
        return len(self.entries)

    def counts(self) -> dict[tuple[str, str], int]:
        out: dict[tuple[str, str], int] = {}
        for e in self.entries:
            out[(e.label, e.vowel)] = out.get((e.label, e.vowel), 0) + 1
        return dict(sorted(out.items()))

    def subjects(self) -> list[str]:
        return sorted({e.subject_id for e in self.entries})


def _gender_counts(label: str, n: int, genders: str) -> list[str]:
    if genders == "male":
        return ["male"] * n
    if genders == "female":
        return ["female"] * n
    if genders != "cohort":
        raise ValueError(f"genders must be 'cohort', 'male' or 'female', got {genders!r}")
    n_female = int(round(FEMALE_SHARE[label] * n))
    return ["female"] * n_female + ["male"] * (n - n_female)


def build_synthetic_dataset(n_pd: int = 20, n_healthy: int = 20, vowels=("a", "o", "u"),
                            seed: int = 0, sample_rate: int = 16000, duration_s: float = 1.0,
                            genders: str = "cohort", spread: float = 1.0,
                            ) -> tuple[DatasetManifest, list[AudioClip]]:
    """Subjects drawn from the group acoustics, one clip per subject and vowel.

    ``spread`` scales the between-subject standard deviations; 0 puts every
    subject of a group on the group mean so only the seeded cycle
    perturbations and noise differ. Clips are ordered PD subjects first.
    One group may be empty, e.g. for a PD-only test set.
    """
    if n_pd < 0 or n_healthy < 0 or n_pd + n_healthy < 1:
        raise ValueError("need a non-negative count per group and at least one subject")
    if not vowels:
        raise ValueError("need at least one vowel")
    for v in vowels:
        if v not in ("a", "o", "u"):
            raise ValueError(f"unknown vowel {v!r}")
    if spread < 0:
        raise ValueError("spread must be non-negative")
    rng = np.random.default_rng(seed)
    entries, clips = [], []
    for label, count, prefix in ((PD, n_pd, "PD"), (HEALTHY, n_healthy, "HC")):
        for i, gender in enumerate(_gender_counts(label, count, genders), start=1):
            subject = f"{prefix}{i:02d}"
            acoustics = draw_acoustics(label, gender, rng, spread)
            for vowel in vowels:
                clip_seed = int(rng.integers(0, 2**31 - 1))
                params = SynthParams(
                    duration_s=duration_s, sample_rate=sample_rate,
                    formants=FORMANTS[(gender, vowel)], seed=clip_seed, **acoustics,
                )
                clips.append(synth_vowel(params))
                entries.append(ManifestEntry(
                    subject, vowel, label, f"synth:{clip_seed}",
                    {"gender": gender, **acoustics, "seed": clip_seed},
                ))
    note = (f"synthetic corpus: seed={seed} pd={n_pd} healthy={n_healthy} vowels={''.join(vowels)} "
            f"genders={genders} spread={spread!r} sample_rate={sample_rate} duration_s={duration_s!r}")
    return DatasetManifest(entries, note), clips


def synth_params_for(entry: ManifestEntry, sample_rate: int, duration_s: float) -> SynthParams:
    """Rebuild the synthesis parameters recorded in a manifest row."""
    p = entry.params
    return SynthParams(
        f0_hz=float(p["f0_hz"]), jitter_pct=float(p["jitter_pct"]),
        shimmer_pct=float(p["shimmer_pct"]), hnr_db=float(p["hnr_db"]),
        duration_s=duration_s, sample_rate=sample_rate,
        formants=FORMANTS[(p["gender"], entry.vowel)], seed=int(p["seed"]),
    )


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def write_manifest(path, manifest: DatasetManifest) -> None:
    with_params = any(e.params for e in manifest.entries)
    columns = MANIFEST_COLUMNS + (PARAM_COLUMNS if with_params else ())
    with open(path, "w", newline="") as fh:
        if manifest.note:
            fh.write(f"# {manifest.note}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for e in manifest.entries:
            row = [e.subject_id, e.vowel, e.label, e.source]
            if with_params:
                row += [_fmt(e.params.get(c, "")) for c in PARAM_COLUMNS]
            writer.writerow(row)


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    note = ""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            note = note or line[1:].strip()
        elif line.strip():
            body.append(line)
    if not body:
        raise ManifestError(f"{path}: empty manifest")
    reader = csv.reader(body)
    header = next(reader)
    missing = [c for c in MANIFEST_COLUMNS if c not in header]
    if missing:
        raise ManifestError(f"{path}: missing column(s) {', '.join(missing)}")
    pos = {name: i for i, name in enumerate(header)}
    entries = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise ManifestError(f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}")
        label = row[pos["label"]]
        if label not in (PD, HEALTHY):
            raise ManifestError(f"{path}: row {lineno}, column label: {label!r} is not {PD} or {HEALTHY}")
        params = {c: row[pos[c]] for c in PARAM_COLUMNS if c in pos and row[pos[c]] != ""}
        entries.append(ManifestEntry(row[pos["subject_id"]], row[pos["vowel"]], label,
                                     row[pos["source"]], params))
    return DatasetManifest(entries, note)


def group_means(label: str, gender: str = "male") -> dict[str, float]:
    return {k: m for k, (m, _sd) in GROUP_ACOUSTICS[(label, gender)].items()}
