import json

from scorepath.cli import main


def test_cli_affine_certify(tmp_path):
    out = tmp_path / "cert.json"
    assert main(["certify", "--score", "affine", "--gamma", "1.0", "--alpha", "5e-5", "--out", str(out)]) == 0
    cert = json.loads(out.read_text())
    assert cert["verdict"] == "pass" and abs(cert["ratio"] - 0.045) < 1e-12


def test_cli_pipeline(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dataset": {"grid": {"n_theta": 21, "n_d": 21}}, "svm": {"epochs": 20},
                               "sweep": {"ratios": [0.2], "ic_grid": [[0.3, -0.2]]}}))
    c = ["--config", str(cfg)]
    assert main(["dataset", *c, "--out", str(tmp_path / "data")]) == 0
    assert main(["train", *c, "--dataset", str(tmp_path / "data" / "dataset.csv"), "--out", str(tmp_path / "m")]) == 0
    model = str(tmp_path / "m" / "model.json")
    assert main(["verify", *c, "--score", model, "--out", str(tmp_path / "v")]) == 0
    assert main(["curve", *c, "--score", model, "--out", str(tmp_path / "c")]) == 0
    assert main(["certify", *c, "--score", model, "--out", str(tmp_path / "cert.json")]) == 0
    assert main(["simulate", *c, "--score", model, "--state", "0.2", "0.1", "--out", str(tmp_path / "s")]) == 0
    assert main(["sweep", *c, "--score", model, "--out", str(tmp_path / "sw")]) == 0
    assert main(["render", "--state", "0.1", "0.2", "--out", str(tmp_path / "r")]) == 0
    assert len(json.loads((tmp_path / "r" / "scan.json").read_text())["ranges"]) == 64
    assert json.loads((tmp_path / "sw" / "summary.json").read_text())["summary"]["n_trajectories"] == 1


def test_cli_error_exit(tmp_path, capsys):
    assert main(["render", "--state", "0.0", "2.0", "--out", str(tmp_path)]) == 1
    assert "PoseOutsideCorridor" in capsys.readouterr().err
