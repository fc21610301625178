"""Command-line entry point: synth, extract, train, eval, sweep, report."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import evaluation as ev
from . import nn
from .config import ConfigError, ExperimentConfig, load_config, parse_indices, parse_subsets, parse_value
from .corpus.dataset import build_synthetic_dataset, read_manifest, synth_params_for, write_manifest
from .corpus.store import file_digest, load_features, load_model, save_features, save_model
from .corpus.synth import synth_vowel
from .corpus.wav import load_wav, write_wav
from .frontend import extract_mfcc
from .weighting import VOWELS, WeightVector, corpus_weights, make_voiceprint

log = logging.getLogger("pdvoice")


class CommandError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# helpers


def _overrides(args, extra: dict | None = None) -> dict:
    out = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = parse_value(value)
    if args.seed is not None:
        out["seed"] = args.seed
    for key, value in (extra or {}).items():
        if value is not None:
            out[key] = value
    return out


def _config(args, extra: dict | None = None) -> ExperimentConfig:
    return load_config(args.config, _overrides(args, extra))


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return " ".join(str(v) for v in value)
    return "" if value is None else str(value)


def _write_record(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["key", "value"])
        for key, value in rows:
            writer.writerow([key, _fmt(value)])


def _read_record(path: Path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return {r[0]: r[1] for r in rows[1:] if len(r) == 2}


def _read_table(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _load_dataset(path, cfg: ExperimentConfig):
    vps = load_features(path)
    if cfg.eval.vowel:
        vps = [vp for vp in vps if vp.vowel == cfg.eval.vowel]
        if not vps:
            raise CommandError(f"{path}: no rows for vowel {cfg.eval.vowel!r}")
    return vps


def _config_lines(cfg: ExperimentConfig) -> list[str]:
    return [f"  {k} = {_fmt(v)}" for k, v in cfg.flat().items()]


def _provenance(cfg: ExperimentConfig, inputs: dict[str, Path]) -> list[tuple[str, object]]:
    rows: list[tuple[str, object]] = [("seed", cfg.seed)]
    for name, path in inputs.items():
        rows.append((name, Path(path).name))
        rows.append((f"{name}_sha256", file_digest(path)))
    return rows


# --------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    cfg = _config(args, {
        "synth.n_pd": args.subjects_pd, "synth.n_healthy": args.subjects_healthy,
        "synth.vowels": args.vowels, "synth.sample_rate": args.sample_rate,
        "synth.duration_s": args.duration, "synth.genders": args.genders,
        "synth.spread": args.spread,
    })
    s = cfg.synth
    out = Path(args.out)
    manifest, clips = build_synthetic_dataset(
        s.n_pd, s.n_healthy, tuple(s.vowels), seed=cfg.seed, sample_rate=s.sample_rate,
        duration_s=s.duration_s, genders=s.genders, spread=s.spread,
    )
    (out / "wav").mkdir(parents=True, exist_ok=True)
    for entry, clip in zip(manifest.entries, clips):
        rel = Path("wav") / f"{entry.subject_id}_{entry.vowel}.wav"
        write_wav(out / rel, clip.samples, int(clip.sample_rate))
        entry.source = rel.as_posix()
    write_manifest(out / "manifest.csv", manifest)
    print(f"wrote {len(manifest)} clips for {len(manifest.subjects())} subjects to {out}")
    for (label, vowel), count in manifest.counts().items():
        print(f"  {label:<8} /{vowel}/  {count}")
    return 0


# --------------------------------------------------------------------------
# extract


def _load_entry_audio(entry, base: Path, cfg: ExperimentConfig):
    if entry.source.startswith("synth:"):
        if not entry.params:
            raise CommandError(f"{entry.subject_id}/{entry.vowel}: synthetic entry without parameters")
        return synth_vowel(synth_params_for(entry, cfg.synth.sample_rate, cfg.synth.duration_s))
    return load_wav(entry.resolve(base))


def _save_weights(path: Path, orders, w: WeightVector) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["order", "weight", "entropy"])
        for o, wt, e in zip(orders, w.weights, w.entropies):
            writer.writerow([o, repr(float(wt)), repr(float(e))])


def _load_weights(path: Path) -> WeightVector:
    rows = _read_table(path)
    if not rows or set(rows[0]) != {"order", "weight", "entropy"}:
        raise CommandError(f"{path}: expected columns order, weight, entropy")
    return WeightVector(np.array([float(r["weight"]) for r in rows]),
                        np.array([float(r["entropy"]) for r in rows]))


def cmd_extract(args) -> int:
    extra = {"weighting": args.weighting}
    if args.no_drop_c1:
        extra["frontend.drop_c1"] = False
    cfg = _config(args, extra)
    manifest_path = Path(args.manifest)
    manifest = read_manifest(manifest_path)
    base = manifest_path.parent
    matrices, metas = [], []
    for i, entry in enumerate(manifest.entries):
        try:
            clip = _load_entry_audio(entry, base, cfg)
            ceps = extract_mfcc(clip, cfg.frontend)
        except (OSError, ValueError, CommandError) as exc:
            msg = f"entry {i + 1} ({entry.source}): {exc}"
            if args.strict:
                raise CommandError(msg) from None
            log.warning("skipping %s", msg)
            continue
        log.info("%s: %d frames x %d coefficients", entry.source, ceps.rows, ceps.cols)
        matrices.append(ceps)
        vowel = entry.vowel if entry.vowel in VOWELS else "other"
        metas.append(dict(label=entry.label, vowel=vowel, subject_id=entry.subject_id,
                          source_id=entry.source))
    if not matrices:
        raise CommandError("no manifest entry could be processed")
    out = Path(args.out)
    weights = None
    if cfg.weighting == "corpus":
        if args.weights_in:
            weights = _load_weights(Path(args.weights_in))
        else:
            weights = corpus_weights(matrices)
            weights_out = Path(args.weights_out) if args.weights_out else out.with_suffix(".weights.csv")
            _save_weights(weights_out, matrices[0].orders, weights)
            log.info("corpus weights written to %s", weights_out)
    voiceprints = [make_voiceprint(m, weights, **meta) for m, meta in zip(matrices, metas)]
    save_features(out, voiceprints)
    print(f"wrote {len(voiceprints)} voiceprints of dimension {voiceprints[0].values.size} to {out}")
    return 0


# --------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    cfg = _config(args, {"eval.vowel": args.vowel, "eval.coefficients": args.coefficients})
    vps = _load_dataset(args.features, cfg)
    X, labels = ev.unpack(vps)
    X = ev.select_columns(X, cfg.eval.coefficients)
    tcfg = cfg.train_config()
    net, trace = nn.fit(X, labels, tcfg)
    meta = dict(cfg.flat())
    meta.update(dict(_provenance(cfg, {"features": Path(args.features)})))
    meta["n_samples"] = len(vps)
    save_model(args.out, net, meta, trace)
    print(f"trained {'-'.join(map(str, net.layer_sizes))} network on {len(vps)} samples; "
          f"final loss {trace.final_loss!r}; model written to {args.out}")
    return 0


# --------------------------------------------------------------------------
# eval


def _report_text(title: str, report: ev.MetricsReport, provenance, cfg) -> str:
    c = report.counts
    lines = [title, "=" * len(title), ""]
    lines += [f"{k}: {_fmt(v)}" for k, v in provenance]
    lines += ["", f"{'metric':<12} {'value':>8}", f"{'-' * 12} {'-' * 8}"]
    for name in ev.METRIC_NAMES:
        lines.append(f"{name:<12} {getattr(report, name):>8.4f}")
    lines += ["", f"TP={c.tp} TN={c.tn} FP={c.fp} FN={c.fn} (positive class: HEALTHY)"]
    lines.append(f"coefficients: {_fmt(report.coefficients_used)}")
    if report.folds:
        lines.append("per-fold mean: " + ", ".join(f"{k}={v:.4f}" for k, v in report.fold_average().items()))
    for flag in report.flags:
        lines.append(f"flag: {flag}")
    lines += ["", "configuration:"] + _config_lines(cfg)
    return "\n".join(lines) + "\n"


def _write_fold_table(path: Path, report: ev.MetricsReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["fold", "n", "tp", "tn", "fp", "fn", *ev.METRIC_NAMES])
        for i, f in enumerate(report.folds):
            c = f.counts
            writer.writerow([i, c.total, c.tp, c.tn, c.fp, c.fn]
                            + [repr(float(getattr(f, m))) for m in ev.METRIC_NAMES])


def cmd_eval(args) -> int:
    cfg = _config(args, {"eval.vowel": args.vowel, "eval.coefficients": args.coefficients,
                         "eval.k": args.k})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = {"features": Path(args.features)}
    tcfg = cfg.train_config()
    coefficients = cfg.eval.coefficients
    if args.test_set:
        inputs["test_set"] = Path(args.test_set)
        train_vps = _load_dataset(args.features, cfg)
        test_vps = _load_dataset(args.test_set, cfg)
        if args.model:
            inputs["model"] = Path(args.model)
            model, _ = load_model(args.model)
        else:
            model = train_vps
        report = ev.run_holdout_test(model, test_vps, tcfg, coefficients)
        title = f"Held-out test: {len(test_vps)} samples"
    else:
        vps = _load_dataset(args.features, cfg)
        n = len(vps)
        k = min(cfg.eval.k or n, n)
        labels = [vp.label for vp in vps] if cfg.eval.stratify else None
        plan = ev.make_folds(n, k, cfg.seed, labels)
        report = ev.run_cross_validation(vps, tcfg, plan, coefficients, workers=cfg.eval.workers)
        if plan.leave_one_out:
            title = f"Leave-one-out cross-validation (k = n = {n})"
        else:
            title = f"{k}-fold cross-validation (n = {n}{', stratified' if plan.stratified else ''})"
        _write_fold_table(out / "folds.csv", report)
    provenance = [("command", "eval"), ("title", title)] + _provenance(cfg, inputs)
    record = provenance + list(report.as_record().items())
    record += [(f"config.{k}", v) for k, v in cfg.flat().items()]
    _write_record(out / "metrics.csv", record)
    (out / "report.txt").write_text(_report_text(title, report, provenance[2:], cfg))
    print(title)
    print(f"accuracy {report.accuracy:.4f}  sensitivity {report.sensitivity:.4f}  "
          f"specificity {report.specificity:.4f}  MCC {report.mcc:.4f}  PE {report.pe:.4f}")
    return 0


# --------------------------------------------------------------------------
# sweep


def cmd_sweep(args) -> int:
    cfg = _config(args, {"eval.vowel": args.vowel, "eval.k": args.k,
                         "eval.subsets": args.subsets})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    vps = _load_dataset(args.features, cfg)
    n, d = len(vps), vps[0].values.size
    subsets = cfg.eval.subsets or [[j] for j in range(1, d + 1)]
    k = min(cfg.eval.k or n, n)
    labels = [vp.label for vp in vps] if cfg.eval.stratify else None
    plan = ev.make_folds(n, k, cfg.seed, labels)
    ranked = ev.coefficient_sweep(vps, subsets, cfg.train_config(), plan, workers=cfg.eval.workers)
    orders = vps[0].orders
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "subset", "cepstral_orders", *ev.METRIC_NAMES, "tp", "tn", "fp", "fn"])
        for rank, (subset, rep) in enumerate(ranked, start=1):
            c = rep.counts
            writer.writerow([rank, ",".join(map(str, subset)),
                             ",".join(str(orders[j - 1]) for j in subset) if orders else "",
                             *[repr(float(getattr(rep, m))) for m in ev.METRIC_NAMES],
                             c.tp, c.tn, c.fp, c.fn])
    mode = "leave-one-out" if plan.leave_one_out else f"{k}-fold"
    provenance = [("command", "sweep"), ("mode", mode), ("subsets", len(subsets))]
    provenance += _provenance(cfg, {"features": Path(args.features)})
    lines = [f"Coefficient sweep ({mode}, n = {n})", ""]
    lines += [f"{k_}: {_fmt(v)}" for k_, v in provenance]
    lines += ["", f"{'rank':>4}  {'subset':<16} {'acc':>7} {'sens':>7} {'spec':>7} {'MCC':>7} {'PE':>7}"]
    for rank, (subset, rep) in enumerate(ranked, start=1):
        lines.append(f"{rank:>4}  {','.join(map(str, subset)):<16} {rep.accuracy:>7.4f} "
                     f"{rep.sensitivity:>7.4f} {rep.specificity:>7.4f} {rep.mcc:>7.4f} {rep.pe:>7.4f}")
    lines += ["", "configuration:"] + _config_lines(cfg)
    (out / "sweep.txt").write_text("\n".join(lines) + "\n")
    best_subset, best = ranked[0]
    print(f"{len(ranked)} subsets evaluated; best {','.join(map(str, best_subset))} "
          f"with accuracy {best.accuracy:.4f}, MCC {best.mcc:.4f}")
    return 0


# --------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    from . import plotting

    src = Path(args.report_dir)
    if not src.is_dir():
        raise CommandError(f"{src} is not a directory")
    out = Path(args.out) if args.out else src
    out.mkdir(parents=True, exist_ok=True)
    rows: list[tuple[str, str, str]] = []
    if (src / "metrics.csv").exists():
        record = _read_record(src / "metrics.csv")
        plotting.plot_metrics(record, out / "metrics.png")
        rows.append(("figure", "metrics", "metrics.png"))
        for key in ("mode", "n", *ev.METRIC_NAMES, "tp", "tn", "fp", "fn", "coefficients", "features_sha256"):
            if key in record:
                rows.append(("metric", key, record[key]))
    if (src / "folds.csv").exists():
        plotting.plot_folds(_read_table(src / "folds.csv"), out / "folds.png")
        rows.append(("figure", "folds", "folds.png"))
    if (src / "sweep.csv").exists():
        table = _read_table(src / "sweep.csv")
        plotting.plot_sweep(table, out / "sweep.png")
        rows.append(("figure", "sweep", "sweep.png"))
        if table:
            rows.append(("sweep", "best_subset", table[0]["subset"]))
            rows.append(("sweep", "best_accuracy", table[0]["accuracy"]))
    if args.features:
        vps = load_features(args.features)
        plotting.plot_voiceprints(vps, out / "voiceprints.png")
        rows.append(("figure", "voiceprints", "voiceprints.png"))
    if args.model:
        _, doc = load_model(args.model)
        losses = doc.get("trace", {}).get("losses", [])
        if losses:
            plotting.plot_loss(losses, out / "loss.png")
            rows.append(("figure", "loss", "loss.png"))
    if not rows:
        raise CommandError(f"{src}: nothing to report (no metrics.csv, folds.csv or sweep.csv)")
    with open(out / "summary.tsv", "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["kind", "key", "value"])
        writer.writerows(rows)
    for row in rows:
        print("\t".join(row))
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one configuration key, e.g. net.epochs=200")
    common.add_argument("--strict", action="store_true", help="abort on the first bad input")
    common.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")

    parser = argparse.ArgumentParser(prog="pdvoice", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic vowel corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--subjects-pd", type=int)
    p.add_argument("--subjects-healthy", type=int)
    p.add_argument("--vowels", help="e.g. aou")
    p.add_argument("--sample-rate", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--genders", choices=["cohort", "male", "female"])
    p.add_argument("--spread", type=float, help="scale of between-subject variation (1 = group SDs)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", parents=[common], help="manifest -> voiceprint feature store")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="feature store (CSV)")
    p.add_argument("--no-drop-c1", action="store_true", help="keep the first cepstral coefficient")
    p.add_argument("--weighting", choices=["per_utterance", "corpus"])
    p.add_argument("--weights-in", help="reuse corpus weights from this file")
    p.add_argument("--weights-out", help="where to save corpus weights")
    p.set_defaults(func=cmd_extract)

    def dataset_flags(p):
        p.add_argument("features")
        p.add_argument("--out", required=True)
        p.add_argument("--vowel", choices=["a", "o", "u"])

    p = sub.add_parser("train", parents=[common], help="fit one network on a feature store")
    dataset_flags(p)
    p.add_argument("--coefficients", help="1-based columns, e.g. 7,11 or 4-8")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="cross-validate or test on a held-out set")
    dataset_flags(p)
    p.add_argument("--coefficients")
    p.add_argument("--k", type=int, help="folds (default: leave-one-out)")
    p.add_argument("--test-set", help="held-out feature store; trains on FEATURES unless --model")
    p.add_argument("--model", help="trained model file for --test-set")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common], help="rank coefficient subsets by CV accuracy")
    dataset_flags(p)
    p.add_argument("--k", type=int)
    p.add_argument("--subsets", help="';'-separated subsets, e.g. '6;7,11;4-8' (default: singletons)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", parents=[common], help="render figures and a summary table")
    p.add_argument("report_dir", help="directory written by eval or sweep")
    p.add_argument("--out", help="figure directory (default: report_dir)")
    p.add_argument("--features", help="feature store for the voiceprint figure")
    p.add_argument("--model", help="model file for the training-loss figure")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    try:
        if getattr(args, "coefficients", None):
            args.coefficients = parse_indices(args.coefficients)
        if getattr(args, "subsets", None):
            args.subsets = parse_subsets(args.subsets)
        return args.func(args)
    except (ConfigError, CommandError, ValueError, OSError, RuntimeError) as exc:
        print(f"pdvoice {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
