"""
End-to-end tests of the forenlab commands through click's test runner.
"""

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from agent.main import cli
from utils.config import SEED_ENV
from utils.grids import downsample, load_grid, load_manifest, save_grid
from utils.models import Model, checkpoint_bytes, load_checkpoint

SMALL_RUN = ["arch=vifor", "embed_dim=8", "heads=2", "layers=1", "height=32", "width=32", "scale_factor=2",
             "n_fields=3", "val_fraction=0.34"]


@pytest.fixture(autouse=True)
def no_seed_env(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)


def run(*args, settings=()):
    flags = []
    for setting in settings:
        flags += ["--set", setting]
    return CliRunner().invoke(cli, [*args, "--quiet", *flags])


def paths(tmp_path, name="run"):
    return [f"data_dir={tmp_path / 'grids'}", f"checkpoint={tmp_path / name / 'model.vfr'}",
            f"report={tmp_path / name / 'report.csv'}"]


def generate(tmp_path):
    result = run("gen", settings=SMALL_RUN + paths(tmp_path))
    assert result.exit_code == 0, result.output
    return tmp_path / "grids" / "manifest.txt"


def test_gen_writes_fields_and_manifest(tmp_path):
    result = run("gen", settings=["n_fields=4", "height=16", "width=16", f"data_dir={tmp_path / 'a'}"])
    assert result.exit_code == 0, result.output
    listed = load_manifest(tmp_path / "a" / "manifest.txt")
    assert len(listed) == 4
    assert all(load_grid(p).shape == (16, 16) for p in listed)
    assert (tmp_path / "a" / "manifest.txt").read_text().startswith("# seed=7\n")


def test_gen_is_byte_identical_for_a_seed(tmp_path):
    for name in ("a", "b"):
        assert run("gen", settings=["n_fields=2", f"data_dir={tmp_path / name}"]).exit_code == 0
    for a, b in zip(sorted((tmp_path / "a").glob("*.esmg")), sorted((tmp_path / "b").glob("*.esmg"))):
        assert a.read_bytes() == b.read_bytes()


def test_train_zero_epochs_saves_initialization(tmp_path):
    generate(tmp_path)
    result = run("train", settings=SMALL_RUN + paths(tmp_path) + ["epochs=0"])
    assert result.exit_code == 0, result.output
    saved = load_checkpoint(tmp_path / "run" / "model.vfr")
    assert checkpoint_bytes(Model.build(saved.config, 7)) == (tmp_path / "run" / "model.vfr").read_bytes()
    report = pd.read_csv(tmp_path / "run" / "report.csv")
    assert len(report) == 0
    assert list(report.columns) == ["epoch", "loss", "mse_term", "freq_term", "val_mse", "val_psnr", "val_ssim",
                                    "lr", "seconds"]


def test_train_is_deterministic(tmp_path):
    generate(tmp_path)
    for name in ("first", "second"):
        result = run("train", settings=SMALL_RUN + paths(tmp_path, name) + ["epochs=2"])
        assert result.exit_code == 0, result.output
    first, second = tmp_path / "first", tmp_path / "second"
    assert (first / "report.csv").read_bytes() == (second / "report.csv").read_bytes()
    assert (first / "model.vfr").read_bytes() == (second / "model.vfr").read_bytes()


def test_eval_of_ground_truth_against_itself(tmp_path):
    manifest = generate(tmp_path)
    out = tmp_path / "eval.csv"
    result = run("eval", "--predictions", str(manifest), "--out", str(out), settings=SMALL_RUN + paths(tmp_path))
    assert result.exit_code == 0, result.output
    df = pd.read_csv(out)
    assert list(df.columns) == ["file", "mse_pct", "psnr_db", "ssim"]
    assert len(df) == 4
    assert np.all(df["mse_pct"] == 0.0)
    assert np.all(df["psnr_db"] == 99.0)
    assert np.all(df["ssim"] == 1.0)


def test_eval_mean_row_and_logged_metrics(tmp_path):
    generate(tmp_path)
    settings = SMALL_RUN + paths(tmp_path) + ["epochs=1"]
    assert run("train", settings=settings).exit_code == 0
    out = tmp_path / "eval.csv"
    result = run("eval", "--split", "val", "--out", str(out), settings=settings)
    assert result.exit_code == 0, result.output
    df = pd.read_csv(out)
    rows, mean = df.iloc[:-1], df.iloc[-1]
    assert mean["file"] == "mean"
    for column in ("mse_pct", "psnr_db", "ssim"):
        assert abs(mean[column] - rows[column].mean()) < 1e-12
    report = pd.read_csv(tmp_path / "run" / "report.csv")
    assert abs(mean["psnr_db"] - report["val_psnr"].iloc[-1]) < 1e-9
    assert abs(mean["ssim"] - report["val_ssim"].iloc[-1]) < 1e-9


def test_infer_scales_and_is_deterministic(tmp_path):
    manifest = generate(tmp_path)
    settings = SMALL_RUN + paths(tmp_path) + ["epochs=0"]
    assert run("train", settings=settings).exit_code == 0
    lr_path = save_grid(downsample(load_grid(load_manifest(manifest)[0]), 2), tmp_path / "lr.esmg")
    outputs = []
    for name in ("one.esmg", "two.esmg"):
        result = run("infer", str(lr_path), str(tmp_path / name), "--pgm", str(tmp_path / "one.pgm"),
                     settings=settings)
        assert result.exit_code == 0, result.output
        outputs.append((tmp_path / name).read_bytes())
    assert outputs[0] == outputs[1]
    assert load_grid(tmp_path / "one.esmg").shape == (32, 32)
    assert (tmp_path / "one.pgm").exists()


def test_infer_rejects_mismatched_grid(tmp_path):
    manifest = generate(tmp_path)
    settings = SMALL_RUN + paths(tmp_path) + ["epochs=0"]
    assert run("train", settings=settings).exit_code == 0
    hr_path = load_manifest(manifest)[0]
    result = run("infer", str(hr_path), str(tmp_path / "out.esmg"), settings=settings)
    assert result.exit_code == 2
    assert "does not match" in result.output


def test_sweep_single_value(tmp_path):
    generate(tmp_path)
    out = tmp_path / "sweep.csv"
    result = run("sweep", "--param", "omega0", "--values", "20", "--out", str(out),
                 settings=SMALL_RUN + paths(tmp_path) + ["epochs=1"])
    assert result.exit_code == 0, result.output
    assert out.read_text().splitlines()[0] == "omega0,psnr"
    assert len(pd.read_csv(out)) == 1


def test_grid_sweep_writes_csv_and_excel(tmp_path):
    generate(tmp_path)
    out = tmp_path / "grid.csv"
    result = run("sweep", "--param", "omega0", "--values", "20,30", "--param2", "layers", "--values2", "1:2:1",
                 "--out", str(out), settings=SMALL_RUN + paths(tmp_path) + ["epochs=1", "output_format=both"])
    assert result.exit_code == 0, result.output
    csv, xlsx = pd.read_csv(out), pd.read_excel(out.with_suffix(".xlsx"))
    assert list(csv.columns) == ["omega0", "layers", "psnr"]
    assert len(csv) == 4
    assert list(xlsx.columns) == list(csv.columns)
    assert np.allclose(xlsx["psnr"], csv["psnr"])


def test_grid_sweep_needs_both_second_options(tmp_path):
    generate(tmp_path)
    result = run("sweep", "--param", "omega0", "--values", "20", "--param2", "layers",
                 settings=SMALL_RUN + paths(tmp_path) + ["epochs=1"])
    assert result.exit_code == 2


def test_spectrum_of_identical_grids(tmp_path):
    manifest = generate(tmp_path)
    grid = load_manifest(manifest)[0]
    out = tmp_path / "spectrum.csv"
    result = run("spectrum", str(grid), "--recon", str(grid), "--out", str(out), settings=paths(tmp_path))
    assert result.exit_code == 0, result.output
    df = pd.read_csv(out)
    assert len(df) == 8
    assert np.all(df["band_sq_error"] == 0.0)
    energy = float(np.sum(load_grid(grid).values ** 2))
    assert abs(df["target_energy"].sum() - energy) / energy < 1e-9


def test_spectrum_from_checkpoint(tmp_path):
    manifest = generate(tmp_path)
    settings = SMALL_RUN + paths(tmp_path) + ["epochs=0"]
    assert run("train", settings=settings).exit_code == 0
    out = tmp_path / "spectrum.csv"
    result = run("spectrum", str(load_manifest(manifest)[0]), "--checkpoint", str(tmp_path / "run" / "model.vfr"),
                 "--out", str(out), settings=settings)
    assert result.exit_code == 0, result.output
    assert list(pd.read_csv(out).columns) == ["band", "r_lo", "r_hi", "target_energy", "recon_energy",
                                              "band_sq_error"]


def test_exit_code_for_config_error(tmp_path):
    result = run("gen", settings=["no_such_key=1"])
    assert result.exit_code == 2
    assert "no_such_key" in result.output


def test_exit_code_for_missing_data(tmp_path):
    result = run("train", settings=paths(tmp_path))
    assert result.exit_code == 3


def test_exit_code_for_numerical_abort(tmp_path):
    generate(tmp_path)
    result = run("train", settings=SMALL_RUN + paths(tmp_path) + ["arch=siren_only", "epochs=2", "base_lr=1e300",
                                                                 "min_lr=1e300"])
    assert result.exit_code == 4
    assert len(pd.read_csv(tmp_path / "run" / "report.csv")) == 1
