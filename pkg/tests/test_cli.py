import csv
import hashlib

import pytest

from pdvoice.cli import main

FAST = ["--set", "net.epochs=5", "--set", "net.hidden=[6]"]


def run(*argv):
    return main([str(a) for a in argv])


def pipeline(root):
    """synth -> extract -> train -> eval -> sweep -> report, all under root."""
    assert run("synth", "--out", root / "corpus", "--subjects-pd", 3, "--subjects-healthy", 3,
               "--vowels", "u", "--duration", 0.3, "--seed", 4, "-q") == 0
    assert run("extract", root / "corpus" / "manifest.csv", "--out", root / "feats.csv", "-q") == 0
    assert run("train", root / "feats.csv", "--out", root / "model.json", *FAST, "-q") == 0
    assert run("eval", root / "feats.csv", "--out", root / "eval", *FAST, "-q") == 0
    assert run("sweep", root / "feats.csv", "--out", root / "sweep", "--subsets", "1;2;3,4", *FAST, "-q") == 0
    assert run("report", root / "eval", "--features", root / "feats.csv", "--model", root / "model.json", "-q") == 0
    assert run("report", root / "sweep", "-q") == 0


def digests(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def twice(tmp_path_factory):
    a, b = tmp_path_factory.mktemp("a"), tmp_path_factory.mktemp("b")
    pipeline(a)
    pipeline(b)
    return a, b


def test_reruns_are_byte_identical(twice):
    a, b = twice
    da, db = digests(a), digests(b)
    assert da == db
    for name in ("feats.csv", "model.json", "eval/metrics.csv", "eval/report.txt", "eval/folds.csv",
                 "eval/metrics.png", "eval/voiceprints.png", "eval/loss.png", "eval/summary.tsv",
                 "sweep/sweep.csv", "sweep/sweep.txt", "sweep/sweep.png", "corpus/manifest.csv",
                 "corpus/wav/PD01_u.wav"):
        assert name in da


def test_eval_outputs(twice):
    root = twice[0]
    report = (root / "eval" / "report.txt").read_text()
    assert report.startswith("Leave-one-out cross-validation (k = n = 6)")
    assert "features_sha256" in report and "net.epochs = 5" in report
    with open(root / "eval" / "metrics.csv") as fh:
        record = {k: v for k, v in csv.reader(fh)}
    assert record["mode"] == "leave-one-out"
    assert record["n"] == "6"
    assert record["config.net.epochs"] == "5"
    assert int(record["tp"]) + int(record["fn"]) == 3
    assert len((root / "eval" / "folds.csv").read_text().splitlines()) == 7


def test_sweep_ranking_file(twice):
    with open(twice[0] / "sweep" / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["rank"] for r in rows] == ["1", "2", "3"]
    assert sorted(r["subset"] for r in rows) == ["1", "2", "3,4"]
    assert rows[0]["cepstral_orders"] in ("2", "3", "4,5")


def test_different_seed_changes_outputs(twice, tmp_path):
    root = twice[0]
    assert run("eval", root / "feats.csv", "--out", tmp_path / "e", *FAST, "--seed", 99, "-q") == 0
    assert (tmp_path / "e" / "metrics.csv").read_bytes() != (root / "eval" / "metrics.csv").read_bytes()


def test_holdout_and_kfold(twice, tmp_path):
    root = twice[0]
    assert run("eval", root / "feats.csv", "--out", tmp_path / "h", "--test-set", root / "feats.csv",
               "--model", root / "model.json", "-q") == 0
    assert (tmp_path / "h" / "report.txt").read_text().startswith("Held-out test: 6 samples")
    assert run("eval", root / "feats.csv", "--out", tmp_path / "k", "--k", 3, *FAST, "-q") == 0
    assert (tmp_path / "k" / "report.txt").read_text().startswith("3-fold cross-validation")


def test_corpus_weighting_writes_and_reuses_weights(twice, tmp_path):
    manifest = twice[0] / "corpus" / "manifest.csv"
    assert run("extract", manifest, "--out", tmp_path / "f.csv", "--weighting", "corpus", "-q") == 0
    assert (tmp_path / "f.weights.csv").exists()
    assert run("extract", manifest, "--out", tmp_path / "g.csv", "--weighting", "corpus",
               "--weights-in", tmp_path / "f.weights.csv", "-q") == 0
    assert (tmp_path / "f.csv").read_bytes() == (tmp_path / "g.csv").read_bytes()


def test_no_drop_c1_header(twice, tmp_path):
    manifest = twice[0] / "corpus" / "manifest.csv"
    assert run("extract", manifest, "--out", tmp_path / "f.csv", "--no-drop-c1", "-q") == 0
    assert (tmp_path / "f.csv").read_text().splitlines()[0].split(",")[4] == "c1"


def test_bad_entries_skip_or_abort(twice, tmp_path, capsys):
    src = (twice[0] / "corpus" / "manifest.csv").read_text()
    lines = src.splitlines()
    lines[3] = lines[3].replace("wav/PD02_u.wav", "missing.wav")
    (twice[0] / "corpus" / "broken.csv").write_text("\n".join(lines) + "\n")
    broken = twice[0] / "corpus" / "broken.csv"
    assert run("extract", broken, "--out", tmp_path / "f.csv") == 0
    assert "skipping" in capsys.readouterr().err
    assert len((tmp_path / "f.csv").read_text().splitlines()) == 6
    assert run("extract", broken, "--out", tmp_path / "g.csv", "--strict") == 1
    assert "missing.wav" in capsys.readouterr().err


def test_errors_exit_nonzero(tmp_path, capsys):
    assert run("synth", "--out", tmp_path / "x", "--subjects-pd", 0) == 1
    assert "error" in capsys.readouterr().err
    assert run("eval", tmp_path / "nope.csv", "--out", tmp_path / "e") == 1
    assert run("train", tmp_path / "nope.csv", "--out", tmp_path / "m.json", "--set", "net.bogus=1") == 1
    assert "unknown setting" in capsys.readouterr().err
    assert run("report", tmp_path) == 1


def test_default_synth_writes_full_corpus(tmp_path, capsys):
    assert run("synth", "--out", tmp_path / "c", "-q") == 0
    assert len(list((tmp_path / "c" / "wav").glob("*.wav"))) == 120
    assert len((tmp_path / "c" / "manifest.csv").read_text().splitlines()) == 122  # provenance, header, 120 rows
    assert "120 clips" in capsys.readouterr().out


def test_pd_only_test_corpus(tmp_path):
    assert run("synth", "--out", tmp_path / "t", "--subjects-pd", 28, "--subjects-healthy", 0,
               "--vowels", "ao", "--duration", 0.05, "-q") == 0
    assert len(list((tmp_path / "t" / "wav").glob("*.wav"))) == 56


def test_default_sweep_covers_every_singleton(twice, tmp_path):
    feats = twice[0] / "feats.csv"
    assert run("sweep", feats, "--out", tmp_path / "s", "--k", 3, "--set", "net.epochs=1",
               "--set", "net.hidden=[2]", "-q") == 0
    with open(tmp_path / "s" / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 19
    assert sorted(int(r["subset"]) for r in rows) == list(range(1, 20))
