import json

import pytest

from helpers import FIXTURES, doc_dict
from salience_lab import cli
from salience_lab.cli import EXIT_DATA, EXIT_MODEL, EXIT_OK, EXIT_USAGE, PipelineConfig, config_hash, main


def header(path):
    out = {}
    for line in path.read_text().splitlines():
        if not line.startswith("# "):
            break
        k, _, v = line[2:].partition(": ")
        out[k] = v
    return out


def write_corpus(directory, docs):
    directory.mkdir()
    for d in docs:
        (directory / f"{d['doc_id']}.json").write_text(json.dumps(d))
    return directory


@pytest.fixture
def ingested(tmp_path, monkeypatch):
    monkeypatch.delenv(cli.SEED_ENV, raising=False)
    out = tmp_path / "out"
    assert main(["ingest", "--corpus", str(FIXTURES), "--out", str(out), "--collapse-threshold", "3"]) == EXIT_OK
    return out


def test_ingest_fixtures_reports_no_violations(ingested, capsys):
    main(["ingest", "--corpus", str(FIXTURES), "--out", str(ingested)])
    lines = capsys.readouterr().out.splitlines()
    assert lines[-1] == "ingested 6 documents, 0 violations in 0 documents"
    assert all(line.endswith("\t0 violations") for line in lines[:-1])
    manifest = json.loads((ingested / "ingest/manifest.json").read_text())
    assert len(manifest["valid"]) == 6


def test_provenance_header_keys(ingested):
    assert main(["features", "--out", str(ingested)]) == EXIT_OK
    h = header(ingested / "features/mention.csv")
    assert list(h) == sorted(h)
    assert {"config_hash", "seed", "version", "step", "operation", "level"} <= set(h)
    assert h["seed"] == "0" and h["step"] == "features"
    assert "created" not in h


def test_reruns_are_byte_identical(ingested):
    main(["features", "--out", str(ingested)])
    first = (ingested / "features/entity.csv").read_bytes()
    main(["features", "--out", str(ingested), "--threads", "3"])
    assert (ingested / "features/entity.csv").read_bytes() == first


def test_config_hash_ignores_paths_and_threads():
    base = PipelineConfig(corpus="a", out="x", threads=1)
    moved = PipelineConfig(corpus="b", out="y", threads=8)
    assert config_hash(base, "d") == config_hash(moved, "d")
    assert config_hash(base, "d") != config_hash(PipelineConfig(seed=1), "d")
    assert config_hash(base, "d") != config_hash(base, "other corpus")


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.SEED_ENV, "41")
    out = tmp_path / "out"
    assert main(["ingest", "--corpus", str(FIXTURES), "--out", str(out)]) == EXIT_OK
    assert main(["features", "--out", str(out), "--level", "entity"]) == EXIT_OK
    assert header(out / "features/entity.csv")["seed"] == "41"
    # the flag wins over the environment
    main(["features", "--out", str(out), "--level", "entity", "--seed", "3"])
    assert header(out / "features/entity.csv")["seed"] == "3"


def test_bad_seed_environment_is_usage_error(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.SEED_ENV, "many")
    assert main(["ingest", "--corpus", str(FIXTURES), "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_unknown_flag_exits_with_usage(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["features", "--no-such-flag"])
    assert exc.value.code == EXIT_USAGE
    assert "--no-such-flag" in capsys.readouterr().err


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"corpus": str(FIXTURES), "colour": "red"}))
    assert main(["ingest", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_ingest_needs_an_existing_corpus(tmp_path):
    assert main(["ingest", "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert main(["ingest", "--corpus", str(tmp_path / "nowhere"), "--out", str(tmp_path / "o")]) == EXIT_USAGE


@pytest.mark.parametrize("argv, step", [
    (["features"], "salience-lab ingest"),
    (["describe"], "salience-lab features --level mention"),
    (["anova"], "salience-lab fit-bb"),
    (["importance"], "salience-lab fit-forest"),
])
def test_missing_artifact_names_prior_step(tmp_path, capsys, argv, step, ingested):
    if argv == ["features"]:
        argv = argv + ["--corpus", str(FIXTURES), "--out", str(tmp_path / "empty")]
    else:
        argv = argv + ["--out", str(ingested)]
    assert main(argv) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "missing" in err and f"run `{step}" in err


def test_invalid_document_is_data_error(tmp_path, capsys):
    sents = [[("Kim", "PROPN", 2, "nsubj"), ("left", "VERB", 0, "root")]]
    gap = [{"id": 1, "start": 1, "end": 1, "relation_coarse": "root", "relation_fine": "root", "parent": None,
            "explicit_dm": False}]
    corpus_dir = write_corpus(tmp_path / "c", [
        doc_dict(sents, [{"entity": "kim", "sent": 0, "start": 1, "end": 1}], doc_id="ok"),
        doc_dict(sents, [{"entity": "kim", "sent": 0, "start": 1, "end": 1}], edus=gap, doc_id="bad"),
    ])
    assert main(["ingest", "--corpus", str(corpus_dir), "--out", str(tmp_path / "o")]) == EXIT_DATA
    assert "1 violations in 1 documents" in capsys.readouterr().out
    viol = (tmp_path / "o/ingest/violations.csv").read_text()
    assert "bad," in viol and "ok," not in viol


def test_non_convergence_is_model_error(ingested, capsys):
    main(["features", "--out", str(ingested)])
    code = main(["fit-bb", "--out", str(ingested), "--terms", "position_in_doc", "deprel", "--max-iter", "1"])
    assert code == EXIT_MODEL
    assert "model error" in capsys.readouterr().err


def test_eval_baseline_on_62_38_fixture(tmp_path, capsys):
    # one test document, 100 singleton entities, 62 of them in every summary
    sent = [(f"w{i}", "NOUN", 0, "root") for i in range(100)]
    mentions = [{"entity": f"e{i:03d}", "sent": 0, "start": i + 1, "end": i + 1} for i in range(100)]
    summaries = [{"summary_id": f"s{j}", "entities": [f"e{i:03d}" for i in range(62)]} for j in range(5)]
    d = doc_dict([sent], mentions, summaries=summaries, doc_id="t1", partition="test")
    corpus_dir = write_corpus(tmp_path / "c", [d])
    out = str(tmp_path / "o")
    assert main(["ingest", "--corpus", str(corpus_dir), "--out", out]) == EXIT_OK
    assert main(["features", "--out", out, "--level", "mention"]) == EXIT_OK
    capsys.readouterr()
    assert main(["eval", "--split", "test", "--out", out]) == EXIT_OK
    printed = capsys.readouterr().out
    assert "split test: n=100, baseline accuracy 0.6200" in printed
    report = (tmp_path / "o/reports/eval_test.csv").read_text().splitlines()
    row = next(line for line in report if line.startswith("none,"))
    assert row.split(",")[4] == "0.620000"


def test_eval_on_empty_partition_is_data_error(tmp_path, ingested, capsys):
    main(["features", "--out", str(ingested)])
    main(["ingest", "--corpus", str(FIXTURES), "--out", str(ingested), "--partitions", "train"])
    main(["features", "--out", str(ingested)])
    assert main(["eval", "--split", "test", "--out", str(ingested)]) == EXIT_DATA
