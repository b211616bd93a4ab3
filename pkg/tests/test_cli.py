import json

import pytest

from ghnet import cli, formats
from ghnet.data import load_dataset

SMALL = ["--n-gamma", "300", "--n-hadron", "200", "--n-on", "300"]


def run(*argv):
    return cli.main([str(a) for a in argv])


def outputs(d):
    """File contents keyed by name; manifest minus its volatile entries."""
    files = {}
    for p in sorted(d.iterdir()):
        if p.name == cli.MANIFEST:
            doc = json.loads(p.read_text())
            doc.pop("created")
            doc.pop("timing")
            doc["args"].pop("out_dir", None)
            files[p.name] = json.dumps(doc, sort_keys=True).encode()
        else:
            files[p.name] = p.read_bytes()
    return files


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert run("synth", *SMALL, "--seed", 1, "--out-dir", d) == 0
    return d


def test_synth_default_counts(tmp_path):
    assert run("synth", "--out-dir", tmp_path) == 0
    counts = {n: len(load_dataset(tmp_path / f"{n}.txt")) for n in ("gamma", "hadron", "on")}
    assert counts == {"gamma": 12332, "hadron": 6688, "on": 7356}
    manifest = json.loads((tmp_path / cli.MANIFEST).read_text())
    assert manifest["command"] == "synth" and manifest["args"]["seed"] == 0
    assert set(manifest["outputs"]) == {"gamma.txt", "hadron.txt", "on.txt"}


def test_synth_seed_reproducible(tmp_path, data_dir):
    assert run("synth", *SMALL, "--seed", 1, "--out-dir", tmp_path) == 0
    assert outputs(tmp_path) == outputs(data_dir)


def test_synth_rejects_zero_count(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        run("synth", "--n-gamma", 0, "--out-dir", tmp_path)
    assert info.value.code == 2
    assert "positive integer" in capsys.readouterr().err


def test_train_mlp_outputs(tmp_path, data_dir, capsys):
    rc = run("train-mlp", "--gamma", data_dir / "gamma.txt", "--hadron", data_dir / "hadron.txt",
             "--runs", 15, "--method", "bfgs", "--out-dir", tmp_path)
    assert rc == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert names == {"model.txt", "error_curve.csv", "confusion.csv", "histogram.csv", cli.MANIFEST}
    curve = (tmp_path / "error_curve.csv").read_text().splitlines()
    assert curve[0] == "run,train_error,test_error" and len(curve) == 16
    assert "test accuracy" in capsys.readouterr().out


def test_train_mlp_stochastic(tmp_path, data_dir):
    rc = run("train-mlp", "--gamma", data_dir / "gamma.txt", "--hadron", data_dir / "hadron.txt",
             "--runs", 2, "--method", "stochastic", "--out-dir", tmp_path)
    assert rc == 0
    assert len((tmp_path / "error_curve.csv").read_text().splitlines()) == 3


def test_train_mlp_missing_input(tmp_path, data_dir, capsys):
    missing = tmp_path / "absent.txt"
    rc = run("train-mlp", "--gamma", missing, "--hadron", data_dir / "hadron.txt", "--out-dir", tmp_path / "o")
    assert rc == 1
    assert str(missing) in capsys.readouterr().err


def test_train_mlp_bad_line_reports_position(tmp_path, data_dir, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text((data_dir / "gamma.txt").read_text() + "1 2 3\n")
    rc = run("train-mlp", "--gamma", bad, "--hadron", data_dir / "hadron.txt", "--out-dir", tmp_path / "o")
    assert rc == 1
    assert "line 301" in capsys.readouterr().err


def test_partial_outputs_removed(tmp_path, data_dir, monkeypatch):
    def boom(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(formats, "write_error_curve", boom)
    out = tmp_path / "o"
    rc = run("train-mlp", "--gamma", data_dir / "gamma.txt", "--hadron", data_dir / "hadron.txt",
             "--runs", 2, "--out-dir", out)
    assert rc == 1
    assert list(out.iterdir()) == []


def test_train_som_outputs(tmp_path, data_dir):
    rc = run("train-som", "--on", data_dir / "on.txt", "--width", 6, "--height", 5,
             "--kernel", "cutgaussian", "--epochs", 3, "--out-dir", tmp_path)
    assert rc == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert names == {"codebook.txt", "qe_curve.csv", "umatrix.pgm", "umatrix.csv", "clusters.csv", cli.MANIFEST}
    assert (tmp_path / "umatrix.pgm").read_bytes().startswith(b"P5 6 5 255\n")
    som_map, kernel = formats.read_codebook(tmp_path / "codebook.txt")
    assert som_map.codebook.shape == (30, 10) and kernel.value == "cutgaussian"


def test_train_som_rejects_unknown_kernel(tmp_path, data_dir):
    with pytest.raises(SystemExit) as info:
        run("train-som", "--on", data_dir / "on.txt", "--kernel", "bubble", "--out-dir", tmp_path)
    assert info.value.code == 2


def test_hybrid_requires_on_flag(tmp_path, data_dir):
    with pytest.raises(SystemExit) as info:
        run("hybrid", "--gamma", data_dir / "gamma.txt", "--hadron", data_dir / "hadron.txt",
            "--out-dir", tmp_path)
    assert info.value.code == 2


def test_hybrid_missing_on_file(tmp_path, data_dir, capsys):
    rc = run("hybrid", "--gamma", data_dir / "gamma.txt", "--hadron", data_dir / "hadron.txt",
             "--on", tmp_path / "none.txt", "--out-dir", tmp_path)
    assert rc == 1
    assert "none.txt" in capsys.readouterr().err


def test_hybrid_report(tmp_path, data_dir):
    rc = run("hybrid", "--gamma", data_dir / "gamma.txt", "--hadron", data_dir / "hadron.txt",
             "--on", data_dir / "on.txt", "--width", 8, "--height", 8, "--epochs", 5, "--runs", 20,
             "--out-dir", tmp_path)
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert "runs_to_threshold" in report["hybrid"] and "runs_to_threshold" in report["direct"]
    assert report["hybrid"]["training_set_size"] <= report["hybrid"]["codebook_size"] == 64
    manifest = json.loads((tmp_path / cli.MANIFEST).read_text())
    assert set(manifest["timing"]) == {"som_seconds", "hybrid_mlp_seconds", "direct_mlp_seconds"}


def test_classify_stream_and_file(tmp_path, data_dir, capsys):
    model_dir = tmp_path / "m"
    run("train-mlp", "--gamma", data_dir / "gamma.txt", "--hadron", data_dir / "hadron.txt",
        "--runs", 10, "--out-dir", model_dir)
    capsys.readouterr()
    assert run("classify", "--model", model_dir / "model.txt", "--events", data_dir / "on.txt") == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 300
    value, label = lines[0].split()
    assert label == ("gamma" if float(value) >= 0.5 else "hadron")
    assert run("classify", "--model", model_dir / "model.txt", "--events", data_dir / "on.txt",
               "--threshold", -1e9, "--out-dir", tmp_path / "c") == 0
    got = (tmp_path / "c" / "classified.txt").read_text().splitlines()
    assert all(ln.endswith(" gamma") for ln in got)


def test_classify_corrupted_model(tmp_path, data_dir, capsys):
    bad = tmp_path / "model.txt"
    bad.write_text("format = ghnet-mlp\nversion = 1\nlayout = 10,10,1\nW0 = 1 2\n")
    assert run("classify", "--model", bad, "--events", data_dir / "on.txt") == 1
    assert "corrupted" in capsys.readouterr().err


def test_classify_dimension_mismatch(tmp_path, data_dir, capsys):
    from ghnet.mlp import MlpLayout, init_network

    p = tmp_path / "m.txt"
    formats.save_mlp(p, init_network(MlpLayout(12, (4,)), 0))
    assert run("classify", "--model", p, "--events", data_dir / "on.txt") == 1
    assert "expects 12 inputs" in capsys.readouterr().err


def test_umatrix_from_codebook(tmp_path, data_dir):
    run("train-som", "--on", data_dir / "on.txt", "--width", 5, "--height", 4, "--epochs", 2,
        "--out-dir", tmp_path / "s")
    assert run("umatrix", "--codebook", tmp_path / "s" / "codebook.txt", "--out-dir", tmp_path / "u") == 0
    assert (tmp_path / "u" / "umatrix.csv").read_bytes() == (tmp_path / "s" / "umatrix.csv").read_bytes()
    assert (tmp_path / "u" / "umatrix.pgm").read_bytes() == (tmp_path / "s" / "umatrix.pgm").read_bytes()


def test_replay_is_bit_identical(tmp_path, data_dir):
    first = tmp_path / "a"
    run("train-som", "--on", data_dir / "on.txt", "--width", 5, "--height", 5, "--epochs", 2,
        "--seed", 7, "--out-dir", first)
    assert run("replay", first / cli.MANIFEST, "--out-dir", tmp_path / "b") == 0
    assert outputs(first) == outputs(tmp_path / "b")


def test_replay_unknown_command(tmp_path, capsys):
    p = tmp_path / "manifest.json"
    p.write_text(json.dumps({"args": {"command": "replay", "out_dir": "x"}}))
    assert run("replay", p) == 1
