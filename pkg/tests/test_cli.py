import json

import pytest

from liveredact.cli import main
from liveredact.config import apply_overrides, parse_config_file, session_config


def _jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    rc = main(["gen-corpus", "--out", str(out), "--set", "gen.n_calls=4", "--set", "gen.seed=17"])
    assert rc == 0
    return out


def test_gen_redact_eval_roundtrip(corpus_dir, tmp_path):
    pred = tmp_path / "pred"
    rc = main([
        "redact", "--bundle", str(corpus_dir), "--out-dir", str(pred), "--oracle-nlu",
        "--set", "decoder.revision_prob=0.0",
    ])
    assert rc == 0
    for name in ("captures.jsonl", "events.jsonl", "corruptions.jsonl", "decoded.jsonl",
                 "masks.jsonl", "report.json", "metrics.json"):
        assert (pred / name).exists()

    report = tmp_path / "report.json"
    rc = main(["eval", "--gold", str(corpus_dir), "--pred", str(pred), "--report", str(report)])
    assert rc == 0
    doc = json.loads(report.read_text())
    assert doc["mask_coverage"] == 1.0
    assert doc["wer"]["overall"] == 0.0
    assert all(m["recall"] == 1.0 for m in doc["per_type"].values())


def test_captures_masked_by_default_and_revealed_on_flag(corpus_dir, tmp_path):
    masked_dir, open_dir = tmp_path / "masked", tmp_path / "open"
    base = ["redact", "--bundle", str(corpus_dir), "--oracle-nlu", "--set", "decoder.revision_prob=0.0"]
    assert main(base + ["--out-dir", str(masked_dir)]) == 0
    assert main(base + ["--out-dir", str(open_dir), "--reveal-captures"]) == 0
    hidden = _jsonl(masked_dir / "captures.jsonl")
    shown = _jsonl(open_dir / "captures.jsonl")
    assert hidden and all(set(c["value"]) <= {"*", "/"} for c in hidden)
    assert any(any(ch.isdigit() for ch in c["value"]) for c in shown)


def test_train_and_redact_with_model(tmp_path):
    corpus = tmp_path / "train"
    heldout = tmp_path / "test"
    assert main(["gen-corpus", "--out", str(corpus), "--set", "gen.n_calls=60", "--set", "gen.seed=5"]) == 0
    assert main(["gen-corpus", "--out", str(heldout), "--set", "gen.n_calls=8", "--set", "gen.seed=6"]) == 0
    model = tmp_path / "model.json"
    assert main(["train-nlu", "--corpus", str(corpus), "--model", str(model), "--lambda", "0.001"]) == 0

    pred = tmp_path / "pred"
    assert main([
        "redact", "--bundle", str(heldout), "--out-dir", str(pred), "--model", str(model),
        "--set", "decoder.revision_prob=0.0",
    ]) == 0
    report = tmp_path / "report.json"
    assert main(["eval", "--gold", str(heldout), "--pred", str(pred), "--report", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert doc["per_type"]["CCNUM"]["recall"] >= 0.5  # small corpus smoke bound


def test_self_train_cli(tmp_path):
    corpus = tmp_path / "train"
    unlabeled = tmp_path / "extra"
    assert main(["gen-corpus", "--out", str(corpus), "--set", "gen.n_calls=40", "--set", "gen.seed=5"]) == 0
    assert main(["gen-corpus", "--out", str(unlabeled), "--set", "gen.n_calls=20", "--set", "gen.seed=99"]) == 0
    teacher = tmp_path / "teacher.json"
    student = tmp_path / "student.json"
    assert main(["train-nlu", "--corpus", str(corpus), "--model", str(teacher)]) == 0
    assert main([
        "self-train", "--model", str(teacher), "--unlabeled", str(unlabeled),
        "--out-model", str(student), "--corpus", str(corpus),
    ]) == 0
    assert student.exists()


def test_redact_requires_a_classifier(corpus_dir, tmp_path):
    rc = main(["redact", "--bundle", str(corpus_dir), "--out-dir", str(tmp_path / "x")])
    assert rc == 2


def test_baseline_comparison_mode(corpus_dir, tmp_path):
    pred = tmp_path / "pred"
    base = tmp_path / "base"
    common = ["redact", "--bundle", str(corpus_dir), "--oracle-nlu", "--set", "decoder.revision_prob=0.0"]
    assert main(common + ["--out-dir", str(pred)]) == 0
    assert main(common + ["--out-dir", str(base)]) == 0
    report = tmp_path / "cmp.json"
    assert main(["eval", "--gold", str(corpus_dir), "--pred", str(pred),
                 "--baseline", str(base), "--report", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert "baseline_per_type" in doc and "relative_drop_pct" in doc


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "lr.cfg"
    cfg.write_text(
        """
        # pipeline knobs
        pipeline.holdback_ms = 750
        vad.threshold_factor = 4.5
        lar.sensitive = CCNUM,CVV
        decoder.revision_prob = 0.0
        """
    )
    settings = parse_config_file(cfg)
    assert settings["pipeline.holdback_ms"] == 750.0
    sc = session_config(settings)
    assert sc.holdback_ms == 750.0
    assert sc.vad.threshold_factor == 4.5
    from liveredact.entities import EntityType

    assert sc.sensitive == frozenset({EntityType.CCNUM, EntityType.CVV})

    overridden = apply_overrides(settings, ["pipeline.holdback_ms=100"])
    assert session_config(overridden).holdback_ms == 100.0


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("pipeline.holdbak_ms = 750\n")
    with pytest.raises(ValueError, match="holdbak"):
        parse_config_file(cfg)
    with pytest.raises(ValueError, match="unknown config key"):
        apply_overrides({}, ["decoder.rate=1"])
