import json

import numpy as np
import pytest

from blconv.cli import main
from blconv.model import save_network
from conftest import layered_network


@pytest.fixture
def layered_file(tmp_path, rng):
    net = layered_network([2, 3, 1], rng)
    path = tmp_path / "net.json"
    save_network(net, path, inputs={"1": 0.4, "2": 0.9}, targets={"6": 0.3})
    return path


@pytest.fixture
def ring_file(tmp_path):
    doc = {
        "neurons": [
            {"id": 1, "is_input": True},
            {"id": 2},
            {"id": 3, "is_output": True},
        ],
        "synapses": [
            {"id": 1, "pre": 1, "post": 2, "w": 1.0},
            {"id": 2, "pre": 2, "post": 3, "w": 0.5},
            {"id": 3, "pre": 3, "post": 2, "w": 0.5},
        ],
    }
    path = tmp_path / "ring.json"
    path.write_text(json.dumps(doc))
    return path


def test_no_subcommand(capsys):
    assert main([]) == 1


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 1


def test_bad_flag():
    with pytest.raises(SystemExit) as info:
        main(["cm", "--nope"])
    assert info.value.code == 1


def test_bad_parameter_value(capsys):
    assert main(["cm", "--c", "1.5"]) == 1
    assert "C must lie" in capsys.readouterr().err


def test_analyze_layered(layered_file, capsys, tmp_path):
    dump = tmp_path / "g.csv"
    assert main(["analyze", str(layered_file), "--dump-csv", str(dump)]) == 0
    out = capsys.readouterr().out
    assert "hierarchical: true, det(I-G)=1.0, CM=0" in out
    assert "verdict: converges" in out
    assert dump.read_text().startswith("synapse,")


def test_analyze_ring(ring_file, capsys):
    assert main(["analyze", str(ring_file)]) == 0
    out = capsys.readouterr().out
    assert "hierarchical: false" in out
    assert "cycle: 2 -> 3 -> 2" in out or "cycle: 3 -> 2 -> 3" in out


def test_missing_network_file(tmp_path):
    assert main(["analyze", str(tmp_path / "nope.json")]) == 1


def test_train_and_equiv(layered_file, tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    out_net = tmp_path / "trained.json"
    args = ["train", str(layered_file), "--max-steps", "20", "--out-csv", str(trace), "--out-network", str(out_net)]
    assert main(args) == 0
    lines = trace.read_text().splitlines()
    assert lines[0] == "step,E,wdot_inf_norm,CM" and len(lines) == 21
    errors = [float(l.split(",")[1]) for l in lines[1:]]
    assert np.all(np.diff(errors) <= 1e-12)
    assert json.loads(out_net.read_text())["targets"] == {"6": 0.3}
    capsys.readouterr()
    assert main(["equiv", str(layered_file)]) == 0
    err = float(capsys.readouterr().out.split("=")[1])
    assert err <= 1e-5


def test_train_requires_targets(tmp_path, rng):
    path = tmp_path / "n.json"
    save_network(layered_network([2, 1], rng), path)
    assert main(["train", str(path)]) == 1


def test_sweep_from_to_steps(tmp_path, capsys):
    out = tmp_path / "c.csv"
    args = ["sweep", "--vary", "C", "--from", "0.1", "--to", "0.9", "--steps", "9", "--n", "8", "--b", "3",
            "--trials", "2", "--out-csv", str(out)]
    assert main(args) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 10
    assert [float(l.split(",")[0]) for l in lines[1:]] == pytest.approx([0.1 * k for k in range(1, 10)])


def test_sweep_incomplete_range(tmp_path):
    assert main(["sweep", "--vary", "C", "--from", "0.1", "--out-csv", str(tmp_path / "x.csv")]) == 1


def test_config_precedence(tmp_path, capsys):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"n": 6, "b": 2, "trials": 2, "seed": 3}))
    assert main(["--config", str(conf), "cm"]) == 0
    from_conf = capsys.readouterr().out
    assert main(["--config", str(conf), "cm", "--seed", "4"]) == 0
    overridden = capsys.readouterr().out
    assert main(["cm", "--n", "6", "--b", "2", "--trials", "2", "--seed", "4"]) == 0
    assert overridden == capsys.readouterr().out
    assert from_conf != overridden


def test_unknown_config_key(tmp_path):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"bogus": 1}))
    assert main(["--config", str(conf), "cm"]) == 1


def test_env_seed(monkeypatch, capsys):
    base = ["cm", "--n", "6", "--b", "2", "--trials", "1"]
    monkeypatch.setenv("BLCONV_SEED", "9")
    assert main(base) == 0
    from_env = capsys.readouterr().out
    assert main(base + ["--seed", "9"]) == 0
    assert from_env == capsys.readouterr().out
    monkeypatch.setenv("BLCONV_SEED", "x")
    assert main(base) == 1
