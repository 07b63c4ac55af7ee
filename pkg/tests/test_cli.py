import csv
import json
import os

import pytest

from rtlsguard import cli
from rtlsguard.config import ConfigError, config_digest, derive_seed, load_config

SMALL = ["--set", "telemetry.repetitions=1", "--set", "training.mlp.epochs=5",
         "--set", "training.vqc.epochs=1", "--set", "training.fusion.epochs=5"]


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    out = tmp_path / "out"
    monkeypatch.setenv(cli.OUTPUT_ENV, str(out))
    monkeypatch.chdir(tmp_path)
    return out


def run(*args):
    return cli.main(list(args) + SMALL)


def test_config_defaults_and_overrides():
    cfg, applied = load_config(None, ["seed=7", "model.qubits=6", "model.kind=nn"])
    assert cfg["seed"] == 7 and cfg["model"]["qubits"] == 6 and cfg["model"]["kind"] == "nn"
    assert applied == ["seed=7", "model.qubits=6", "model.kind=nn"]


def test_config_unknown_key_names_section(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"version": 1, "model": {"width": 3}}))
    with pytest.raises(ConfigError) as e:
        load_config(str(p))
    assert (e.value.section, e.value.key) == ("model", "width")


def test_config_malformed_and_version(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="line 1"):
        load_config(str(p))
    p.write_text(json.dumps({"version": 2}))
    with pytest.raises(ConfigError):
        load_config(str(p))


def test_digest_stable_and_sensitive():
    cfg, _ = load_config()
    assert config_digest(cfg) == config_digest(load_config()[0])
    assert config_digest(cfg, ["seed=1"]) != config_digest(cfg)
    other, applied = load_config(None, ["privacy.hash_key=secret"])
    assert other["privacy"]["hash_key"] == "secret"
    assert applied == ["privacy.hash_key=<redacted>"]
    assert config_digest(other, applied) == config_digest(cfg, applied)


def test_named_seed_streams_independent():
    assert derive_seed(42, "init") == derive_seed(42, "init")
    assert len({derive_seed(42, n) for n in ("telemetry", "init", "shuffle", "dropout")}) == 4
    assert derive_seed(42, "init") != derive_seed(43, "init")


def test_pipeline_end_to_end(out_dir):
    assert run("generate") == 0
    assert (out_dir / "runs.json").exists()
    assert run("featurize") == 0
    with open(out_dir / "features.csv") as fh:
        header = next(csv.reader(fh))
    assert header == [f"x{i}" for i in range(1, 11)] + ["label"]
    meta = json.loads((out_dir / "features.csv.meta.json").read_text())
    assert meta["seed"] == 42 and len(meta["config_digest"]) == 16

    assert run("sanitize") == 0
    with open(out_dir / "features_sanitized.csv") as fh:
        header = next(csv.reader(fh))
    assert header == ["x1", "x2", "x3", "x7", "x8", "x9", "x10", "label"]

    assert run("train", "--model", "hybrid-nn", "--qubits", "2") == 0
    manifest = json.loads((out_dir / "model" / "manifest.json").read_text())
    assert manifest["seed"] == 42 and "vqc.txt" in manifest["files"]
    assert run("evaluate", "--model", "hybrid-nn", "--qubits", "2") == 0
    with open(out_dir / "report.csv") as fh:
        row = next(csv.DictReader(fh))
    assert row["model"] == "Hybrid DQNN+NN" and row["config_hash"] == meta["config_digest"]
    for root, _, files in os.walk(out_dir.parent):
        for f in files:
            assert str(out_dir) in os.path.join(root, f)


def test_sanitize_samples(out_dir):
    assert run("generate") == 0
    assert run("sanitize", "--samples", "runs/run_000.csv") == 0
    with open(out_dir / "sanitized_samples.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert all(len(r["beacon_id"]) == 32 for r in rows)


def test_qnn_learn_unitary(out_dir, capsys):
    assert run("qnn-learn-unitary", "--arch", "1,2,1", "--pairs", "10", "--steps", "30") == 0
    with open(out_dir / "qnn_cost.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 31
    assert 0 <= float(rows[-1]["cost"]) <= 1
    assert "final cost" in capsys.readouterr().out


def test_sweep_dropout(out_dir):
    assert run("generate") == 0 and run("featurize") == 0
    assert run("sweep", "dropout", "--set", "experiments.dropout_rates=[0.0,0.3]") == 0
    with open(out_dir / "dropout_sweep.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 2


@pytest.mark.parametrize("args, code, kind", [
    (["bogus"], 2, "config"),
    (["train", "--set", "model.width=3"], 2, "config"),
    (["train", "--features", "absent.csv"], 3, "data"),
    (["qnn-learn-unitary", "--arch", "1,2"], 2, "config"),
    (["train", "--model", "svm"], 2, "config"),
])
def test_error_exit_codes(out_dir, capsys, args, code, kind):
    if args[0] == "train" and "--features" not in args:
        assert run("generate") == 0 and run("featurize") == 0
        capsys.readouterr()
    assert cli.main(args) == code
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith(f"error kind={kind}")


def test_hash_key_never_written(out_dir):
    secret = ["--set", "privacy.hash_key=topsecret"]
    assert run("generate", *secret) == 0 and run("featurize", *secret) == 0
    assert run("sanitize", "--samples", "runs/run_000.csv", *secret) == 0
    assert run("bench-table2", *secret, "--set", "experiments.qubit_grid=[2]") == 0
    for root, _, files in os.walk(out_dir):
        for f in files:
            with open(os.path.join(root, f), encoding="utf-8") as fh:
                assert "topsecret" not in fh.read(), f


def test_malformed_features_is_data_error(out_dir, capsys):
    out_dir.mkdir()
    (out_dir / "features.csv").write_text("x1,label\n0.5,zero\n")
    assert cli.main(["train"]) == 3
    assert ":2:" in capsys.readouterr().err


def test_invariant_violation_exit_code(out_dir, capsys, monkeypatch):
    from rtlsguard import qlinalg

    def broken(*a, **k):
        raise qlinalg.DensityMatrixError("trace", 0.5)

    monkeypatch.setattr(cli.dqnn, "train", broken)
    assert run("qnn-learn-unitary", "--steps", "1") == 4
    assert capsys.readouterr().err.startswith("error kind=invariant")


def test_output_dir_escape_rejected(out_dir, capsys):
    assert run("generate") == 0
    capsys.readouterr()
    assert run("featurize", "--output", "../escape.csv") == 2
    assert "escapes the output directory" in capsys.readouterr().err
    assert not (out_dir.parent / "escape.csv").exists()


def test_cli_deterministic(tmp_path, monkeypatch):
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        monkeypatch.setenv(cli.OUTPUT_ENV, str(out))
        assert run("generate") == 0 and run("featurize") == 0
        assert run("train", "--model", "nn") == 0 and run("evaluate", "--model", "nn") == 0
        with open(out / "report.csv") as fh:
            row = next(csv.DictReader(fh))
        row.pop("train_time_s")
        outputs.append(((out / "features.csv").read_bytes(),
                        (out / "model" / "mlp.txt").read_bytes(), row))
    assert outputs[0] == outputs[1]
