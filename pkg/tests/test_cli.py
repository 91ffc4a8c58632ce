import json
import subprocess
import sys

import numpy as np
import pytest

from oodkit.cli import main, read_scores_csv, write_scores_csv
from oodkit.data import (
    FeatureMatrix,
    LabeledDataset,
    SpatialDataset,
    write_feature_file,
)


def _make_flat_files(tmp_path, rng, n_train=60, n_test=30, d=4, spread=6.0):
    """Two well-separated classes in-distribution; a shifted blob as OoD."""
    half = n_train // 2
    train_x = np.concatenate(
        [rng.standard_normal((half, d)), rng.standard_normal((half, d)) + spread]
    )
    train_y = np.array([0] * half + [1] * half)
    test_in = np.concatenate(
        [rng.standard_normal((n_test // 2, d)), rng.standard_normal((n_test - n_test // 2, d)) + spread]
    )
    test_out = rng.standard_normal((n_test, d)) - spread
    paths = {}
    for name, payload in (
        ("train", LabeledDataset(FeatureMatrix(train_x, layer_name="fc"), train_y)),
        ("test_in", FeatureMatrix(test_in, layer_name="fc")),
        ("test_out", FeatureMatrix(test_out, layer_name="fc")),
    ):
        paths[name] = tmp_path / f"{name}.oodf"
        write_feature_file(payload, paths[name])
    return paths


def test_fit_score_eval_chain(tmp_path, capsys):
    rng = np.random.default_rng(70)
    paths = _make_flat_files(tmp_path, rng)
    model = tmp_path / "model.oodm"
    assert main(["fit", "--detector", "lof", "--k", "10",
                 "--train", str(paths["train"]), "--out", str(model)]) == 0
    in_csv = tmp_path / "in.csv"
    out_csv = tmp_path / "out.csv"
    assert main(["score", "--model", str(model), "--in", str(paths["test_in"]), "--out", str(in_csv)]) == 0
    assert main(["score", "--model", str(model), "--in", str(paths["test_out"]), "--out", str(out_csv)]) == 0
    assert in_csv.read_text().startswith("# confidence scores; larger = more in-distribution\n")
    report = tmp_path / "report.json"
    assert main(["eval", "--in-scores", str(in_csv), "--out-scores", str(out_csv),
                 "--report", str(report), "--detector", "lof", "--benchmark", "toy"]) == 0
    payload = json.loads(report.read_text())
    assert payload["auroc"] > 95.0
    assert payload["detector"] == "lof"
    table = capsys.readouterr().out
    assert "TNR at TPR 95%" in table


@pytest.mark.parametrize("detector", ["lof_d", "mahalanobis"])
def test_other_detectors_fit_and_score(tmp_path, detector):
    rng = np.random.default_rng(71)
    paths = _make_flat_files(tmp_path, rng)
    model = tmp_path / "m.oodm"
    assert main(["fit", "--detector", detector, "--k", "8",
                 "--train", str(paths["train"]), "--out", str(model)]) == 0
    out_csv = tmp_path / "s.csv"
    assert main(["score", "--model", str(model), "--in", str(paths["test_in"]), "--out", str(out_csv)]) == 0
    assert read_scores_csv(out_csv).shape == (30,)


def test_missing_file_exit_code_and_message(tmp_path, capsys):
    code = main(["fit", "--train", str(tmp_path / "nowhere.oodf"), "--out", str(tmp_path / "m.oodm")])
    assert code == 2
    assert "nowhere.oodf" in capsys.readouterr().err


def test_validation_error_exit_code(tmp_path, capsys):
    rng = np.random.default_rng(72)
    paths = _make_flat_files(tmp_path, rng, n_train=20)
    code = main(["fit", "--detector", "lof", "--k", "50",
                 "--train", str(paths["train"]), "--out", str(tmp_path / "m.oodm")])
    assert code == 1
    assert "validation error" in capsys.readouterr().err


def test_pool_command(tmp_path):
    rng = np.random.default_rng(73)
    stack = SpatialDataset(rng.random((5, 3, 2, 2)), layer_name="s4", labels=np.arange(5))
    maps_path = tmp_path / "maps.oodf"
    write_feature_file(stack, maps_path)
    out_path = tmp_path / "feats.oodf"
    assert main(["pool", "--method", "gem", "--gem-p", "3", "--in", str(maps_path), "--out", str(out_path)]) == 0
    from oodkit.data import read_feature_file

    pooled = read_feature_file(out_path)
    assert pooled.features.values.shape == (5, 3)
    assert np.array_equal(pooled.labels, np.arange(5))
    # pooling flat features is a validation error
    assert main(["pool", "--in", str(out_path), "--out", str(tmp_path / "x.oodf")]) == 1


def test_simulate_small_and_deterministic(tmp_path):
    args = ["simulate", "--dims", "1,10", "--seeds", "0..1", "--n-train", "60",
            "--n-test-in", "40", "--n-test-out", "40", "--k", "5", "--r", "8.0"]
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    lines = out1.read_text().strip().split("\n")
    assert lines[0] == "d,detector,seed,tnr95,auroc,dtacc,aupr"
    assert len(lines) == 1 + 2 * 2 * 2


def test_ensemble_fit_command(tmp_path):
    rng = np.random.default_rng(74)
    files = {}
    for name, shift in (("in1", 2.0), ("in2", 0.5), ("out1", 0.0), ("out2", 0.0)):
        p = tmp_path / f"{name}.csv"
        write_scores_csv(rng.standard_normal(50) + shift, p)
        files[name] = str(p)
    weights = tmp_path / "weights.json"
    assert main(["ensemble-fit", "--in-scores", files["in1"], files["in2"],
                 "--out-scores", files["out1"], files["out2"],
                 "--layers", "l1,l2", "--out", str(weights)]) == 0
    payload = json.loads(weights.read_text())
    assert set(payload["alpha"]) == {"l1", "l2"}
    assert payload["alpha"]["l1"] > 0


def test_pipeline_single_layer_and_determinism(tmp_path):
    rng = np.random.default_rng(75)
    paths = _make_flat_files(tmp_path, rng)
    outputs = []
    for tag in ("run1", "run2"):
        out_dir = tmp_path / tag
        assert main(["pipeline", "--detector", "lof", "--k", "10", "--seed", "3",
                     "--train", str(paths["train"]), "--test-in", str(paths["test_in"]),
                     "--test-out", str(paths["test_out"]), "--benchmark", "toy",
                     "--out-dir", str(out_dir)]) == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report["auroc"] > 95.0
        assert report["validation_split"]["mode"].startswith("single-layer")
        outputs.append(
            b"".join(
                (out_dir / name).read_bytes()
                for name in ("report.json", "weights.json", "combined_in.csv",
                             "scores_test_in_layer_0.csv")
            )
        )
    assert outputs[0] == outputs[1]


def test_pipeline_on_benchmark_d100_data(tmp_path):
    # single-layer LOF pipeline over the d=100 synthetic benchmark cell
    from oodkit.simulation import SimConfig, generate

    config = SimConfig(dims=(100,), seeds=(0,), n_test_in=400, n_test_out=400)
    train, test_in, test_out = generate(config, 100, 0)
    paths = {"train": train}
    paths["test_in"] = FeatureMatrix(test_in, layer_name="sim")
    paths["test_out"] = FeatureMatrix(test_out, layer_name="sim")
    locations = {}
    for name, payload in paths.items():
        locations[name] = tmp_path / f"{name}.oodf"
        write_feature_file(payload, locations[name])
    out_dir = tmp_path / "out"
    assert main(["pipeline", "--detector", "lof", "--k", "20", "--seed", "0",
                 "--train", str(locations["train"]), "--test-in", str(locations["test_in"]),
                 "--test-out", str(locations["test_out"]), "--out-dir", str(out_dir)]) == 0
    report = json.loads((out_dir / "report.json").read_text())
    assert report["auroc"] > 95.0


def test_pipeline_multi_layer_with_config_file(tmp_path):
    rng = np.random.default_rng(76)
    a_dir, b_dir = tmp_path / "a", tmp_path / "b"
    a_dir.mkdir()
    b_dir.mkdir()
    a = _make_flat_files(a_dir, rng)
    b = _make_flat_files(b_dir, rng, spread=5.0)
    out_dir = tmp_path / "out"
    cfg = tmp_path / "pipe.cfg"
    cfg.write_text(
        "\n".join(
            [
                "config_version = 1",
                "# two-layer LOF pipeline",
                "detector = lof",
                "k = 10",
                "seed = 0",
                f"train.early = {a['train']}",
                f"train.late = {b['train']}",
                f"test_in.early = {a['test_in']}",
                f"test_in.late = {b['test_in']}",
                f"test_out.early = {a['test_out']}",
                f"test_out.late = {b['test_out']}",
                f"out_dir = {out_dir}",
            ]
        )
    )
    assert main(["pipeline", "--config", str(cfg)]) == 0
    report = json.loads((out_dir / "report.json").read_text())
    assert report["layers"] == ["early", "late"]
    assert report["validation_split"]["fraction"] == 0.2
    assert report["validation_split"]["seed"] == 0
    weights = json.loads((out_dir / "weights.json").read_text())
    assert set(weights["alpha"]) == {"early", "late"}
    assert (out_dir / "scores_test_out_late.csv").exists()
    assert report["auroc"] > 90.0


def test_flag_overrides_config(tmp_path):
    rng = np.random.default_rng(77)
    paths = _make_flat_files(tmp_path, rng)
    cfg = tmp_path / "fit.cfg"
    cfg.write_text("detector = mahalanobis\n")
    model = tmp_path / "m.oodm"
    assert main(["fit", "--config", str(cfg), "--detector", "lof", "--k", "10",
                 "--train", str(paths["train"]), "--out", str(model)]) == 0
    from oodkit.model_io import load_model

    assert hasattr(load_model(model), "blocks")  # LOF won, not mahalanobis


def test_unknown_config_key_rejected(tmp_path, capsys):
    rng = np.random.default_rng(78)
    paths = _make_flat_files(tmp_path, rng)
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("detektor = lof\n")
    code = main(["fit", "--config", str(cfg), "--train", str(paths["train"]),
                 "--out", str(tmp_path / "m.oodm")])
    assert code == 1
    assert "unknown config key" in capsys.readouterr().err


def test_pipeline_missing_file_names_path(tmp_path, capsys):
    rng = np.random.default_rng(79)
    paths = _make_flat_files(tmp_path, rng)
    code = main(["pipeline", "--train", str(paths["train"]),
                 "--test-in", str(paths["test_in"]),
                 "--test-out", str(tmp_path / "absent.oodf"),
                 "--out-dir", str(tmp_path / "o")])
    assert code == 2
    assert "absent.oodf" in capsys.readouterr().err


def test_console_script_help_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "oodkit", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    for sub in ("pool", "fit", "score", "ensemble-fit", "eval", "simulate", "pipeline"):
        assert sub in proc.stdout


def test_unknown_flag_is_hard_error():
    proc = subprocess.run(
        [sys.executable, "-m", "oodkit", "simulate", "--frobnicate", "1", "--out", "x.csv"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode != 0
    assert "frobnicate" in proc.stderr
