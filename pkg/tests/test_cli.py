import json

import pytest

from kpgen.cli import main
from kpgen.corpus import write_corpus
from kpgen.synthetic import make_synthetic_corpus

TINY_FLAGS = ["--enc-layers", "1", "--dec-layers", "1", "--d-model", "16", "--heads", "2",
              "--pos-emb-dim", "4", "--epochs", "1", "--lr", "1e-3", "--clip-norm", "1.0", "--beam-depth", "3"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    syn = make_synthetic_corpus(n_docs=36, n_topics=3, seed=11)
    write_corpus(syn.documents[:30], root / "train.jsonl")
    write_corpus(syn.documents[30:], root / "test.jsonl")
    syn.embeddings.save(root / "vectors.txt")
    common = ["--vectors", str(root / "vectors.txt"), "--bank", str(root / "bank.jsonl")]
    assert main(["build-index", "--corpus", str(root / "train.jsonl"), "--min-df", "2", *common]) == 0
    assert main(["train", "--corpus", str(root / "train.jsonl"), "--checkpoint", str(root / "model.pt"),
                 *common, *TINY_FLAGS]) == 0
    return root, common + ["--checkpoint", str(root / "model.pt")]


def _predict(root, common, out, *extra):
    assert main(["predict", "--corpus", str(root / "test.jsonl"), "--output", str(out),
                 "--beam-size", "6", "--beam-depth", "3", *common, *extra]) == 0
    return [json.loads(l) for l in out.read_text().splitlines()]


def test_predict_evaluate_roundtrip(workspace, capsys):
    root, common = workspace
    rows = _predict(root, common, root / "pred.jsonl")
    assert len(rows) == 6
    assert set(rows[0]) == {"id", "present", "absent"}
    capsys.readouterr()
    assert main(["evaluate", "--corpus", str(root / "test.jsonl"), "--predictions", str(root / "pred.jsonl"),
                 "--output", str(root / "report.json"), "--per-document"]) == 0
    assert "present_f1@5" in capsys.readouterr().out
    report = json.loads((root / "report.json").read_text())
    assert set(report["per_document"]) == {r["id"] for r in rows}


def test_predict_is_deterministic(workspace):
    root, common = workspace
    a = _predict(root, common, root / "a.jsonl", "--seed", "3")
    b = _predict(root, common, root / "b.jsonl", "--seed", "3")
    assert a == b


def test_ablation_flags(workspace):
    root, common = workspace
    rows = _predict(root, common, root / "abl.jsonl", "--no-references", "--no-pos", "--no-adjustment")
    assert len(rows) == 6


def test_config_file_and_override(workspace, tmp_path):
    root, common = workspace
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("beam_size: 4\ntop_n: 1\nlambda: 0.5\n")
    rows = _predict(root, common, tmp_path / "p.jsonl", "--config", str(cfg))
    assert all(len(r["present"]) <= 1 for r in rows)
    rows = _predict(root, common, tmp_path / "q.jsonl", "--config", str(cfg), "--top-n", "3")
    assert any(len(r["present"]) > 1 for r in rows)


def test_config_unknown_key_is_an_error(workspace, tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("beam_sise: 4\n")
    assert main(["stats", "--corpus", "x", "--config", str(cfg)]) == 2
    assert "beam_sise" in capsys.readouterr().err


def test_tune_alpha_and_stats(workspace, capsys):
    root, common = workspace
    assert main(["tune-alpha", "--corpus", str(root / "test.jsonl"), "--grid", "-0.5", "0", "0.5",
                 "--beam-size", "4", "--beam-depth", "3", "--output", str(root / "alpha.json"), *common]) == 0
    assert json.loads((root / "alpha.json").read_text())["alpha"] in (-0.5, 0.0, 0.5)
    capsys.readouterr()
    assert main(["stats", "--corpus", str(root / "test.jsonl"), "--training-corpus", str(root / "train.jsonl")]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert {"kps_per_doc", "pct_absent", "pct_overlap"} <= set(stats)


def test_update_bank(workspace, tmp_path):
    root, common = workspace
    bank = tmp_path / "bank.jsonl"
    vec = ["--vectors", str(root / "vectors.txt"), "--bank", str(bank)]
    assert main(["build-index", "--corpus", str(root / "train.jsonl"), "--min-df", "2", *vec]) == 0
    before = bank.read_text().count("\n")
    assert main(["build-index", "--update", "--corpus", str(root / "test.jsonl"), *vec]) == 0
    assert bank.read_text().count("\n") >= before


@pytest.mark.parametrize(
    "argv, message",
    [
        (["predict", "--corpus", "nope.jsonl"], "nope.jsonl does not exist"),
        (["predict"], "--corpus is required"),
        (["evaluate", "--corpus", "missing.jsonl", "--predictions", "p"], "does not exist"),
        (["build-index", "--corpus", "c", "--vectors", "v"], "does not exist"),
    ],
)
def test_errors_exit_nonzero(argv, message, capsys):
    assert main(argv) == 1
    assert message in capsys.readouterr().err


def test_malformed_predictions(workspace, tmp_path, capsys):
    root, _ = workspace
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "x", "present": [{"nophrase": 1}]}\n')
    assert main(["evaluate", "--corpus", str(root / "test.jsonl"), "--predictions", str(bad)]) == 1
    assert "bad.jsonl:1" in capsys.readouterr().err
