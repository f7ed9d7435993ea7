import csv
import json

import pytest

from neucube.cli import RunConfig, build_parser, main, merge

SMALL = ["--set", "synthetic.samples_per_class=6", "--set", "synthetic.t=30"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("synth", "--out", d / "data.csv", "--seed", 7, *SMALL) == 0
    assert run("train", "--data", d / "data.csv", "--model-dir", d / "model",
               "--set", "pipeline.desnn.k=1", "--set", "pipeline.desnn.drift=0.0") == 0
    return d


def test_synth_is_byte_reproducible(tmp_path):
    run("synth", "--out", tmp_path / "a.csv", "--seed", 7, *SMALL)
    run("synth", "--out", tmp_path / "b.csv", "--seed", 7, *SMALL)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_train_writes_model_directory(workdir):
    names = {p.name for p in (workdir / "model").iterdir()}
    assert {"pipeline.json", "cube.json", "model.json", "config.json", "mapping.csv", "metrics.json"} <= names
    metrics = json.loads((workdir / "model" / "metrics.json").read_text())
    assert metrics["train_accuracy"] == 1.0
    assert {"confusion", "sparsity", "mapping_objective", "seeds", "timings"} <= set(metrics)


def test_predict_memorises_training_set(workdir, capsys):
    out = workdir / "labels.csv"
    assert run("predict", "--model-dir", workdir / "model", "--data", workdir / "data.csv",
               "--out", out, "--metrics", workdir / "pm.json") == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 12
    assert all(r["label"] == r["predicted"] for r in rows)
    assert json.loads((workdir / "pm.json").read_text())["accuracy"] == 1.0


def test_predict_output_is_byte_reproducible(workdir):
    for name in ("p1.csv", "p2.csv"):
        run("predict", "--model-dir", workdir / "model", "--data", workdir / "data.csv", "--out", workdir / name)
    assert (workdir / "p1.csv").read_bytes() == (workdir / "p2.csv").read_bytes()


def test_encode_map_early_and_analyze(workdir):
    d = workdir
    assert run("encode", "--data", d / "data.csv", "--out", d / "raster.csv") == 0
    assert (d / "raster.csv").read_text().startswith("sample_id,variable,tick,polarity\n")
    assert run("map", "--data", d / "data.csv", "--out", d / "map.csv", "--similarity-out", d / "sim.csv") == 0
    assert (d / "map.csv").read_text().startswith("variable,input_neuron_id,x,y,z\n")
    assert run("early-predict", "--model-dir", d / "model", "--data", d / "data.csv",
               "--fractions", "1.0,0.5", "--out", d / "early.json") == 0
    early = json.loads((d / "early.json").read_text())
    assert early
    assert run("analyze", "--model-dir", d / "model", "--out", d / "clusters.json",
               "--snapshots", d / "snap", "--frames", d / "frames", "--data", d / "data.csv") == 0
    clusters = json.loads((d / "clusters.json").read_text())
    assert clusters["spectral_radius"] < 1.0
    assert (d / "snap" / "connectivity.json").exists()
    assert any((d / "frames").iterdir())


def test_help_for_every_subcommand(capsys):
    parser = build_parser()
    sub = next(a for a in parser._actions if a.__class__.__name__ == "_SubParsersAction")
    assert set(sub.choices) == {"synth", "encode", "map", "train", "predict", "early-predict", "analyze", "optimize"}
    for name in sub.choices:
        with pytest.raises(SystemExit) as exc:
            main([name, "--help"])
        assert exc.value.code == 0
        assert "usage" in capsys.readouterr().out


def test_exit_codes(tmp_path, capsys):
    assert run("frobnicate") == 1
    assert run("synth") == 1  # missing --out
    assert run("synth", "--out", tmp_path / "x.csv", "--set", "synthetic.bogus=1") == 1
    assert run("synth", "--out", tmp_path / "x.csv", "--set", "synthetic.noise_std=-1") == 1
    assert run("predict", "--model-dir", tmp_path / "none", "--data", tmp_path / "x.csv", "--out", tmp_path / "o.csv") == 2
    (tmp_path / "bad.csv").write_text("sample_id,tick,x,label\na,0,oops,0\n")
    assert run("encode", "--data", tmp_path / "bad.csv", "--out", tmp_path / "r.csv") == 2
    err = capsys.readouterr().err
    assert "oops" in err or "'x'" in err


def test_config_round_trip(workdir, tmp_path):
    doc = json.loads((workdir / "model" / "config.json").read_text())
    cfg = merge(RunConfig(), doc)
    assert json.loads(json.dumps(cfg.to_dict())) == doc
    (tmp_path / "cfg.json").write_text(json.dumps(doc))
    assert run("synth", "--config", tmp_path / "cfg.json", "--out", tmp_path / "s.csv") == 0


def test_unknown_nested_key_rejected(tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps({"pipeline": {"lif": {"threshold": 1}}}))
    assert run("synth", "--config", tmp_path / "cfg.json", "--out", tmp_path / "s.csv") == 1


def test_optimize_small(tmp_path):
    run("synth", "--out", tmp_path / "d.csv", "--seed", 1, *SMALL)
    assert run("optimize", "--data", tmp_path / "d.csv", "--out", tmp_path / "best.json", "--trace", tmp_path / "t.csv",
               "--generations", 2, "--population", 4, "--set", "ga.elite_count=1") == 0
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "generation,best_error,mean_error" and len(lines) == 3
    assert "spike_threshold" in json.loads((tmp_path / "best.json").read_text())["runs"]["graph"]["params"]
