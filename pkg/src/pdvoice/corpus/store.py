"""Plain-text persistence: the feature store (CSV) and model files (JSON)."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from ..nn import Network, TrainTrace
from ..weighting import LABELS, VOWELS, Voiceprint

FEATURE_KEYS = ("subject_id", "vowel", "label", "source_id")
MODEL_FORMAT = "pdvoice-model"
MODEL_VERSION = 1


class StoreError(ValueError):
    pass


def coefficient_names(orders: Sequence[int]) -> list[str]:
    return [f"c{o}" for o in orders]


def save_features(path, voiceprints: Sequence[Voiceprint]) -> None:
    """One row per utterance; floats written with repr so they reload exactly."""
    if not voiceprints:
        raise StoreError("no voiceprints to save")
    dims = {vp.values.size for vp in voiceprints}
    if len(dims) != 1:
        raise StoreError(f"voiceprints have mixed dimensions {sorted(dims)}")
    d = dims.pop()
    orders = voiceprints[0].orders or list(range(1, d + 1))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(FEATURE_KEYS) + coefficient_names(orders))
        for vp in voiceprints:
            writer.writerow([vp.subject_id, vp.vowel, vp.label, vp.source_id]
                            + [repr(float(x)) for x in vp.values])


def load_features(path) -> list[Voiceprint]:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise StoreError(f"{path}: empty feature store")
    header = rows[0]
    missing = [k for k in ("subject_id", "vowel", "label") if k not in header]
    if missing:
        raise StoreError(f"{path}: missing column(s) {', '.join(missing)}")
    coef_cols = [i for i, name in enumerate(header) if name not in FEATURE_KEYS]
    if not coef_cols:
        raise StoreError(f"{path}: no coefficient columns")
    orders = []
    for i in coef_cols:
        name = header[i]
        if not (name.startswith("c") and name[1:].isdigit()):
            raise StoreError(f"{path}: column {i + 1} ({name!r}) is not a coefficient column")
        orders.append(int(name[1:]))
    pos = {name: i for i, name in enumerate(header)}
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise StoreError(f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}")
        label, vowel = row[pos["label"]], row[pos["vowel"]]
        if label not in LABELS:
            raise StoreError(f"{path}: row {lineno}, column label: unknown label {label!r}")
        if vowel not in VOWELS:
            raise StoreError(f"{path}: row {lineno}, column vowel: unknown vowel {vowel!r}")
        values = np.empty(len(coef_cols))
        for j, i in enumerate(coef_cols):
            try:
                values[j] = float(row[i])
            except ValueError:
                raise StoreError(
                    f"{path}: row {lineno}, column {header[i]}: {row[i]!r} is not a number"
                ) from None
        if not np.all(np.isfinite(values)):
            raise StoreError(f"{path}: row {lineno} has non-finite coefficients")
        out.append(Voiceprint(
            values, label=label, vowel=vowel, subject_id=row[pos["subject_id"]],
            source_id=row[pos["source_id"]] if "source_id" in pos else "", orders=orders,
        ))
    if not out:
        raise StoreError(f"{path}: no data rows")
    return out


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _floats(a) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def model_document(net: Network, config: dict | None = None, trace: TrainTrace | None = None) -> dict:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layer_sizes": list(net.layer_sizes),
        "output_activation": net.output_activation,
        "input_shift": None if net.input_shift is None else _floats(net.input_shift),
        "input_scale": None if net.input_scale is None else _floats(net.input_scale),
        "layers": [{"weights": _floats(w), "bias": _floats(b)} for w, b in zip(net.weights, net.biases)],
        "config": config or {},
    }
    if trace is not None:
        doc["trace"] = {"losses": list(trace.losses), "updates": list(trace.updates)}
    return doc


def save_model(path, net: Network, config: dict | None = None, trace: TrainTrace | None = None) -> None:
    """JSON text; Python's float repr makes the round trip exact."""
    text = json.dumps(model_document(net, config, trace), indent=1, sort_keys=True)
    Path(path).write_text(text + "\n")


def load_model(path) -> tuple[Network, dict]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise StoreError(f"{path}: not a JSON document ({exc})") from None
    if doc.get("format") != MODEL_FORMAT:
        raise StoreError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise StoreError(f"{path}: unsupported model version {doc.get('version')!r}")
    try:
        net = Network(
            doc["layer_sizes"],
            [np.array(layer["weights"], dtype=np.float64) for layer in doc["layers"]],
            [np.array(layer["bias"], dtype=np.float64) for layer in doc["layers"]],
            output_activation=doc["output_activation"],
            input_shift=doc.get("input_shift"),
            input_scale=doc.get("input_scale"),
        )
    except (KeyError, ValueError) as exc:
        raise StoreError(f"{path}: invalid model ({exc})") from None
    return net, doc
