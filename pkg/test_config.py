"""
Tests for RunConfig resolution: defaults, files, overrides and FORENLAB_SEED.
"""

import pytest

from utils.config import DEFAULTS, SEED_ENV, RunConfig, describe_defaults
from utils.errors import ConfigError, DataError
from utils.models import Model


@pytest.fixture(autouse=True)
def no_seed_env(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)


def test_defaults_are_valid():
    config = RunConfig.load()
    model_config = config.model_config(16, 16)
    assert model_config.arch == "vifor"
    assert model_config.hr_shape == (64, 64)
    assert Model.build(model_config).parameter_count() > 0
    assert config.loss_weights().lambda2 == 0.1
    assert config.dataset_spec().seed == 7
    assert config.trainer(verbose=False).base_lr == 1e-4


def test_every_key_is_documented():
    table = describe_defaults()
    for key, (_, doc) in DEFAULTS.items():
        assert doc
        assert f"`{key}`" in table


def test_file_then_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\n\nepochs = 5\narch=visir\nseed=3\n")
    config = RunConfig.load(path, ["epochs=7"])
    assert config.epochs == 7
    assert config.arch == "visir"
    assert config.seed == 3


def test_unknown_keys_are_rejected(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("epochz=5\n")
    with pytest.raises(ConfigError, match="epochz"):
        RunConfig.load(path)
    with pytest.raises(ConfigError):
        RunConfig.load(overrides=["learning_rate=0.1"])


def test_malformed_lines_and_values():
    with pytest.raises(ConfigError):
        RunConfig.load(overrides=["epochs"])
    with pytest.raises(ConfigError):
        RunConfig.load(overrides=["epochs=many"])
    with pytest.raises(ConfigError):
        RunConfig.load(overrides=["alpha_learnable=maybe"])


def test_missing_config_file(tmp_path):
    with pytest.raises(DataError):
        RunConfig.load(tmp_path / "absent.cfg")


def test_type_coercion_and_presets():
    config = RunConfig.load(overrides=["omega0=sweep", "alpha_learnable=yes", "base_lr=1e-3", "heads=2"])
    assert config.omega0 == 20.0
    assert config.alpha_learnable is True
    assert config.base_lr == 1e-3
    assert config.heads == 2
    assert RunConfig.load(overrides=["omega0=ablation"]).omega0 == 30.0


def test_seed_env_replaces_only_the_default(tmp_path, monkeypatch):
    monkeypatch.setenv(SEED_ENV, "123")
    assert RunConfig.load().seed == 123
    path = tmp_path / "run.cfg"
    path.write_text("seed=5\n")
    assert RunConfig.load(path).seed == 5
    assert RunConfig.load(path, ["seed=9"]).seed == 9
    assert RunConfig.load(use_env=False).seed == 7


def test_text_round_trip(tmp_path):
    config = RunConfig.load(overrides=["arch=mlp_relu", "share_encoder=false", "f_low=0.05"])
    path = tmp_path / "run.cfg"
    path.write_text(config.to_text())
    assert RunConfig.load(path) == config


def test_manifest_defaults_to_data_dir():
    config = RunConfig.load(overrides=["data_dir=out/grids"])
    assert config.manifest_path.as_posix() == "out/grids/manifest.txt"
    assert RunConfig.load(overrides=["manifest=other.txt"]).manifest_path.as_posix() == "other.txt"
