"""
Tests for grid fields, the ESMG container, manifests, resampling and dataset assembly.
"""

import numpy as np
import pytest

from utils.errors import ConfigError, DataError, DimensionError, FormatError
from utils.grids import (ESMG_HEADER, FULL_IMAGE, SUB_IMAGE, DatasetSpec, GridField, build_dataset,
                         downsample, grid_from_bytes, grid_to_bytes, load_grid, load_manifest,
                         make_pair, save_grid, save_pgm, split_pairs, synth_field, tile8, untile8,
                         upsample_nearest, write_manifest)
from utils.spectral import band_spectrum


def dyadic_field(height, width, seed=0):
    """Values k/1024, so block means are exact in binary floating point."""
    rng = np.random.default_rng(seed)
    return GridField(rng.integers(0, 1024, size=(height, width)) / 1024.0)


def test_esmg_header_and_size():
    assert ESMG_HEADER.size == 30
    blob = grid_to_bytes(GridField(np.array([[0.0, 0.25], [0.5, 1.0]])))
    assert len(blob) == 62
    assert blob[:4] == b"ESMG"


def test_esmg_round_trip_is_bit_exact(tmp_path):
    grid = GridField(np.random.default_rng(1).random((12, 20)), "ts", -3.5, 310.25)
    path = save_grid(grid, tmp_path / "field.esmg")
    loaded = load_grid(path)
    assert loaded.values.tobytes() == grid.values.tobytes()
    assert (loaded.variable, loaded.norm_min, loaded.norm_max) == ("ts", -3.5, 310.25)
    assert grid_to_bytes(loaded) == path.read_bytes()


def test_esmg_bad_magic_reports_offset():
    blob = b"XXXX" + grid_to_bytes(GridField(np.zeros((2, 2))))[4:]
    with pytest.raises(FormatError) as info:
        grid_from_bytes(blob)
    assert info.value.offset == 0


def test_esmg_truncated_payload():
    blob = grid_to_bytes(GridField(np.zeros((4, 4))))
    with pytest.raises(FormatError, match="length mismatch"):
        grid_from_bytes(blob[:-8])
    with pytest.raises(FormatError, match="truncated"):
        grid_from_bytes(blob[:10])


def test_load_missing_grid_is_data_error(tmp_path):
    with pytest.raises(DataError):
        load_grid(tmp_path / "missing.esmg")


def test_normalize_and_denormalize():
    raw = np.array([[10.0, 20.0], [30.0, 50.0]])
    grid = GridField.normalize(raw, "flw")
    assert grid.values.min() == 0.0 and grid.values.max() == 1.0
    assert np.allclose(grid.denormalize(), raw)


def test_constant_field_normalizes_to_zeros():
    grid = GridField.normalize(np.full((3, 3), 7.0))
    assert np.all(grid.values == 0.0)
    assert grid.norm_max == grid.norm_min + 1.0


def test_unknown_variable_is_rejected():
    with pytest.raises(ConfigError):
        GridField(np.zeros((2, 2)), "precip")


def test_block_mean_downsample_is_exact():
    values = np.array([[0.0, 0.5, 1.0, 1.0],
                       [0.5, 1.0, 1.0, 1.0],
                       [0.25, 0.25, 0.0, 0.0],
                       [0.25, 0.25, 0.0, 0.5]])
    lr = downsample(GridField(values), 2)
    assert np.array_equal(lr.values, [[0.5, 1.0], [0.25, 0.125]])


def test_downsample_of_constant_is_constant():
    for interp in ("block_mean", "bilinear"):
        lr = downsample(GridField(np.full((16, 16), 0.375)), 4, interp)
        assert lr.shape == (4, 4)
        assert np.allclose(lr.values, 0.375)


def test_downsample_rejects_indivisible_grid():
    with pytest.raises(DimensionError):
        downsample(GridField(np.zeros((10, 10))), 4)


def test_upsample_then_block_mean_is_identity():
    grid = dyadic_field(4, 4)
    assert np.array_equal(downsample(upsample_nearest(grid, 4), 4).values, grid.values)


def test_tile8_reassembles_bit_exact():
    grid = GridField(np.random.default_rng(2).random((64, 64)))
    tiles = tile8(grid)
    assert len(tiles) == 8
    assert all(t.shape == (32, 16) for t in tiles)
    assert untile8(tiles).values.tobytes() == grid.values.tobytes()


def test_tile8_rejects_indivisible_grid():
    with pytest.raises(DimensionError):
        tile8(GridField(np.zeros((30, 64))))


def test_synth_field_is_seeded_and_normalized():
    a = synth_field(32, 32, seed=3)
    b = synth_field(32, 32, seed=3)
    c = synth_field(32, 32, seed=4)
    assert a.values.tobytes() == b.values.tobytes()
    assert not np.array_equal(a.values, c.values)
    assert a.values.min() == 0.0 and a.values.max() == 1.0


def test_synth_field_high_band_follows_amplitude():
    quiet = band_spectrum(synth_field(64, 64, amp_high=0.0, n_bumps=0, seed=5).values, 8)
    loud = band_spectrum(synth_field(64, 64, amp_high=1.0, n_bumps=0, seed=5).values, 8)
    assert quiet.energy[3:].sum() < 1e-12 * quiet.total
    assert loud.energy[3:].sum() > 1e-3 * loud.total


def test_synth_field_without_high_tones_is_low_band():
    spectrum = band_spectrum(synth_field(64, 64, amp_high=0.0, seed=5).values, 8)
    assert spectrum.energy[:2].sum() >= 0.95 * spectrum.total


def test_shared_high_seed_gives_every_field_the_same_high_tones():
    a = synth_field(32, 32, n_low=0, n_bumps=0, seed=1, high_seed=9)
    b = synth_field(32, 32, n_low=0, n_bumps=0, seed=2, high_seed=9)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(synth_field(32, 32, seed=1, high_seed=9).values,
                              synth_field(32, 32, seed=2, high_seed=9).values)


def test_synth_field_needs_16x16():
    with pytest.raises(ConfigError):
        synth_field(8, 8)


def test_make_pair_keeps_hr_untouched():
    hr = dyadic_field(16, 16)
    before = hr.values.copy()
    pair = make_pair(hr, 4)
    assert pair.lr.shape == (4, 4)
    assert np.array_equal(pair.hr.values, before)


def test_split_is_seeded_and_disjoint():
    pairs = [make_pair(dyadic_field(16, 16, seed=i), 4, name=f"f{i}") for i in range(8)]
    first = split_pairs(pairs, 0.25, seed=7)
    second = split_pairs(pairs, 0.25, seed=7)
    assert [p.name for p in first.val] == [p.name for p in second.val]
    assert len(first.val) == 2 and len(first.train) == 6
    assert not {p.name for p in first.val} & {p.name for p in first.train}


def test_single_sample_has_empty_val():
    dataset = split_pairs([make_pair(dyadic_field(16, 16), 4)], 0.25, seed=7)
    assert len(dataset.train) == 1 and dataset.val == []


def test_sub_image_mode_has_eight_times_the_samples():
    fields = [synth_field(64, 64, seed=i) for i in range(4)]
    full = build_dataset(fields, DatasetSpec(mode=FULL_IMAGE), 4)
    sub = build_dataset(fields, DatasetSpec(mode=SUB_IMAGE), 4)
    assert len(sub) == 8 * len(full) == 32
    assert sub.train[0].hr.shape == (32, 16)
    assert sub.train[0].lr.shape == (8, 4)


def test_dataset_spec_validation():
    with pytest.raises(ConfigError):
        DatasetSpec(mode="patches")
    with pytest.raises(ConfigError):
        DatasetSpec(val_fraction=1.0)


def test_manifest_round_trip(tmp_path):
    paths = [save_grid(dyadic_field(16, 16, seed=i), tmp_path / "grids" / f"g{i}.esmg") for i in range(3)]
    manifest = write_manifest(paths, 11, tmp_path / "manifest.txt")
    assert manifest.read_text().splitlines()[0] == "# seed=11"
    assert [p.name for p in load_manifest(manifest)] == ["g0.esmg", "g1.esmg", "g2.esmg"]


def test_empty_manifest_is_data_error(tmp_path):
    manifest = tmp_path / "manifest.txt"
    manifest.write_text("# seed=1\n")
    with pytest.raises(DataError):
        load_manifest(manifest)


def test_pgm_header_and_size(tmp_path):
    path = save_pgm(GridField(np.array([[0.0, 1.0, 2.0]])), tmp_path / "preview.pgm")
    blob = path.read_bytes()
    header = b"P5\n3 1\n65535\n"
    assert blob.startswith(header)
    assert blob[len(header):] == bytes([0, 0, 255, 255, 255, 255])
