import json

import numpy as np
import pytest

from otlrm import io
from otlrm.cli import gradcheck_suite, main
from otlrm.model import init_model, reconstruct


@pytest.fixture
def cube(tmp_path):
    X = reconstruct(init_model((32, 32, 8), 3, k=2, seed=1000))
    path = tmp_path / "truth.ot3"
    io.save_tensor(path, X)
    return X, str(path)


def last_json(text):
    return json.loads(text.strip().splitlines()[-1])


def test_simulate_full_sampling_is_identity(cube, tmp_path):
    X, path = cube
    out = str(tmp_path / "obs.ot3")
    assert main(["simulate", path, "--op", "completion", "--sr", "1.0", "--out", out]) == 0
    assert np.array_equal(io.load_tensor(out), X)


def test_metrics_same_file(cube, capsys):
    _, path = cube
    assert main(["metrics", path, path]) == 0
    rep = last_json(capsys.readouterr().out)
    assert rep["psnr"] == "inf"
    assert rep["ssim"] == 1.0


def test_simulate_then_complete(cube, tmp_path, capsys):
    X, path = cube
    obs = str(tmp_path / "obs.ot3")
    assert main(["simulate", path, "--op", "completion", "--sr", "0.3", "--seed", "0", "--out", obs]) == 0
    rec = str(tmp_path / "rec.ot3")
    code = main(["complete", obs, "--mask", obs + ".mask.ot3", "--rank", "3", "--lr", "1e-2",
                 "--t-max", "3000", "--truth", path, "--out", rec])
    assert code == 0
    report = json.loads(open(rec + ".report.json").read())
    assert set(report) == {"task", "config", "iterations", "final_loss", "psnr", "ssim", "wall_seconds"}
    assert report["iterations"] == 3000
    assert report["psnr"] >= 40.0


def test_config_echo_reproduces(cube, tmp_path):
    _, path = cube
    a = str(tmp_path / "a.ot3")
    assert main(["complete", path, "--sr", "0.5", "--seed", "3", "--t-max", "15", "--out", a]) == 0
    echo = json.loads(open(a + ".config.json").read())
    assert echo["seed"] == 3 and echo["t_max"] == 15 and echo["lam"] == 1e-8
    b = str(tmp_path / "b.ot3")
    assert main(["complete", "--config", a + ".config.json", "--out", b]) == 0
    assert np.array_equal(io.load_tensor(a), io.load_tensor(b))


def test_denoise_and_cassi(cube, tmp_path):
    X, path = cube
    d = str(tmp_path / "d.ot3")
    assert main(["denoise", path, "--sigma", "0.1", "--t-max", "5", "--out", d]) == 0
    assert json.loads(open(d + ".config.json").read())["loss_kind"] == "l1"
    meas = str(tmp_path / "m.ot3")
    assert main(["simulate", path, "--op", "cassi", "--seed", "1", "--out", meas]) == 0
    assert io.load_tensor(meas).shape == (32, 46, 1)
    c = str(tmp_path / "c.ot3")
    assert main(["cassi", meas, "--mask", meas + ".mask.ot3", "--bands", "8", "--t-max", "5",
                 "--out", c]) == 0
    assert io.load_tensor(c).shape == X.shape


def test_tsvt_command(cube, tmp_path, capsys):
    _, path = cube
    out = str(tmp_path / "t.ot3")
    assert main(["tsvt", path, "--gamma", "0.5", "--transform", "random", "--out", out]) == 0
    rep = last_json(capsys.readouterr().out)
    assert rep["tnn_after"] <= rep["tnn_before"]


def test_usage_errors(cube, tmp_path, capsys):
    _, path = cube
    assert main(["complete", path, "--bogus", "1"]) == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "usage"
    assert main(["metrics", str(tmp_path / "missing.ot3"), path]) == 1
    assert json.loads(capsys.readouterr().err.strip())["error"] == "usage"
    assert main(["complete", path, "--out", str(tmp_path / "x.ot3")]) == 1
    assert main(["complete", path, "--sr", "0.5", "--rank", "0", "--out", str(tmp_path / "x.ot3")]) == 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numeric_failure_exit_code(tmp_path, capsys):
    path = str(tmp_path / "big.ot3")
    io.save_tensor(path, np.full((4, 4, 2), 1e200))
    assert main(["complete", path, "--sr", "1.0", "--t-max", "2", "--out", str(tmp_path / "o.ot3")]) == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "numeric" and "iteration" in err["message"]


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--probes", "60"]) == 0
    lines = [json.loads(x) for x in capsys.readouterr().out.strip().splitlines()]
    assert all(x["pass"] for x in lines)
    assert {x["check"] for x in lines} >= {"quadratic", "householder_chain", "rank_estimate"}


def test_gradcheck_suite_seeds():
    for seed in range(1, 6):
        for name, err, tol in gradcheck_suite(seed, 60):
            assert err < tol, name
