"""
Gridded scalar fields: ESMG file I/O, normalization, synthetic ESM-like
fields, LR construction and sub-image / full-image dataset assembly.
"""

import os
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from utils.errors import ConfigError, DataError, DimensionError, FormatError
from utils.spectral import radial_frequency

VARIABLES = ("ts", "fsw", "flw", "synthetic")

ESMG_MAGIC = b"ESMG"
ESMG_VERSION = 1
# magic, version, u32 height, u32 width, variable tag, f64 norm_min, f64 norm_max
ESMG_HEADER = struct.Struct("<4sBIIBdd")

SUB_IMAGE = "sub_image"
FULL_IMAGE = "full_image"
INTERPOLATIONS = ("block_mean", "bilinear")


@dataclass
class GridField:
    """A 2D scalar field with the min/max it was normalized with."""

    values: np.ndarray
    variable: str = "synthetic"
    norm_min: float = 0.0
    norm_max: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DimensionError(f"grid values must be 2D, got shape {list(self.values.shape)}")
        if self.variable not in VARIABLES:
            raise ConfigError(f"unknown variable tag '{self.variable}', expected one of {VARIABLES}")
        if not self.norm_min < self.norm_max:
            raise ConfigError(f"norm_min {self.norm_min} must be below norm_max {self.norm_max}")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @classmethod
    def normalize(cls, raw: np.ndarray, variable: str = "synthetic") -> "GridField":
        """Min-max normalize raw values to [0, 1], remembering the range."""
        raw = np.asarray(raw, dtype=np.float64)
        lo, hi = float(raw.min()), float(raw.max())
        if hi == lo:
            # constant field: keep it constant at 0
            hi = lo + 1.0
        values = (raw - lo) / (hi - lo)
        return cls(values, variable, lo, hi)

    def denormalize(self) -> np.ndarray:
        return self.values * (self.norm_max - self.norm_min) + self.norm_min

    def with_values(self, values: np.ndarray) -> "GridField":
        return replace(self, values=np.asarray(values, dtype=np.float64))


@dataclass
class SRPair:
    """LR input and HR target; hr is never modified when the pair is built."""

    lr: GridField
    hr: GridField
    scale: int
    name: str = ""

    def __post_init__(self):
        if self.hr.shape != (self.lr.height * self.scale, self.lr.width * self.scale):
            raise DimensionError(f"hr {list(self.hr.shape)} is not lr {list(self.lr.shape)} × {self.scale}")


@dataclass(frozen=True)
class DatasetSpec:
    """How source fields become training samples."""

    mode: str = FULL_IMAGE
    tile_rows: int = 2
    tile_cols: int = 4
    val_fraction: float = 0.25
    seed: int = 7

    def __post_init__(self):
        if self.mode not in (SUB_IMAGE, FULL_IMAGE):
            raise ConfigError(f"unknown dataset mode '{self.mode}'")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction must lie in [0, 1), got {self.val_fraction}")


@dataclass
class SRDataset:
    train: List[SRPair] = field(default_factory=list)
    val: List[SRPair] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train) + len(self.val)


# ESMG container

def grid_to_bytes(grid: GridField) -> bytes:
    header = ESMG_HEADER.pack(ESMG_MAGIC, ESMG_VERSION, grid.height, grid.width,
                              VARIABLES.index(grid.variable), grid.norm_min, grid.norm_max)
    return header + grid.values.astype("<f8").tobytes()


def grid_from_bytes(blob: bytes) -> GridField:
    if len(blob) < ESMG_HEADER.size:
        raise FormatError(f"truncated ESMG header: expected {ESMG_HEADER.size} bytes, got {len(blob)}", len(blob))
    magic, version, height, width, tag, lo, hi = ESMG_HEADER.unpack_from(blob, 0)
    if magic != ESMG_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {ESMG_MAGIC!r}", 0)
    if version != ESMG_VERSION:
        raise FormatError(f"unsupported ESMG version {version}", 4)
    if tag >= len(VARIABLES):
        raise FormatError(f"unknown variable tag byte {tag}", 13)
    expected = ESMG_HEADER.size + 8 * height * width
    if len(blob) != expected:
        raise FormatError(f"ESMG payload length mismatch: expected {expected} bytes, got {len(blob)}",
                          min(len(blob), expected))
    values = np.frombuffer(blob, dtype="<f8", offset=ESMG_HEADER.size).reshape(height, width)
    try:
        return GridField(values.astype(np.float64), VARIABLES[tag], lo, hi)
    except ConfigError as e:
        raise FormatError(f"invalid ESMG header: {e}", 14) from None


def save_grid(grid: GridField, path) -> Path:
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    path.write_bytes(grid_to_bytes(grid))
    return path


def load_grid(path) -> GridField:
    path = Path(path)
    if not path.exists():
        raise DataError(f"grid file not found: {path}")
    try:
        return grid_from_bytes(path.read_bytes())
    except FormatError as e:
        raise FormatError(f"{path}: {e}") from None


def save_pgm(grid: GridField, path) -> Path:
    """Write a 16-bit binary PGM (P5) for quick visual inspection; values are clipped to [0, 1]."""
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    levels = np.round(np.clip(grid.values, 0.0, 1.0) * 65535).astype(">u2")
    header = f"P5\n{grid.width} {grid.height}\n65535\n".encode("ascii")
    path.write_bytes(header + levels.tobytes())
    return path


# manifests

def write_manifest(paths: Sequence, seed: int, manifest_path) -> Path:
    """One grid path per line (relative to the manifest), after a seed header."""
    manifest_path = Path(manifest_path)
    os.makedirs(manifest_path.parent, exist_ok=True)
    lines = [f"# seed={seed}"]
    for p in paths:
        lines.append(os.path.relpath(Path(p), manifest_path.parent))
    manifest_path.write_text("\n".join(lines) + "\n")
    return manifest_path


def load_manifest(manifest_path) -> List[Path]:
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise DataError(f"manifest not found: {manifest_path}")
    paths = []
    for line in manifest_path.read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            paths.append((manifest_path.parent / line).resolve())
    if not paths:
        raise DataError(f"manifest lists no grids: {manifest_path}")
    return paths


# synthetic fields

def _pick_bins(rng, r: np.ndarray, lo: float, hi: float, count: int) -> List[Tuple[int, int]]:
    candidates = np.argwhere((r >= lo) & (r <= hi))
    if count == 0 or len(candidates) == 0:
        return []
    chosen = rng.choice(len(candidates), size=count, replace=len(candidates) < count)
    return [tuple(candidates[i]) for i in chosen]


def synth_field(height: int, width: int, n_low: int = 6, n_high: int = 6, amp_high: float = 0.5,
                seed: int = 0, n_bumps: int = 3, high_seed: Optional[int] = None) -> GridField:
    """
    Generate an ESM-like field with known frequency content.

    Tones sit on exact DFT bins: low tones with r ≤ 0.2, high tones with r ≥ 0.5
    (scaled by amp_high), plus a few localized Gaussian bumps. The result is
    min-max normalized.

    Args:
        height: Field height (≥ 16)
        width: Field width (≥ 16)
        n_low: Number of low-band tones
        n_high: Number of high-band tones
        amp_high: Amplitude factor of the high-band tones
        seed: Random seed
        n_bumps: Number of Gaussian bumps
        high_seed: Seed of the high-band tones; fields generated with the same
            high_seed share them, like fine-scale detail locked to terrain.
            Defaults to the field seed.

    Returns:
        Normalized GridField tagged 'synthetic'
    """
    if height < 16 or width < 16:
        raise ConfigError(f"synthetic fields need at least 16×16, got {height}×{width}")
    rng = np.random.default_rng(seed)
    r = radial_frequency(height, width)
    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    out = np.zeros((height, width))

    def tone(u, v, amplitude, gen=rng):
        phase = gen.uniform(0.0, 2.0 * np.pi)
        return amplitude * np.cos(2.0 * np.pi * (u * rows / height + v * cols / width) + phase)

    min_r = float(np.min(r[r > 0]))
    for u, v in _pick_bins(rng, r, min_r, 0.2, n_low):
        out += tone(u, v, rng.uniform(0.5, 1.0))
    high_rng = rng if high_seed is None else np.random.default_rng(high_seed)
    for u, v in _pick_bins(high_rng, r, 0.5, 1.0, n_high):
        out += tone(u, v, amp_high * high_rng.uniform(0.5, 1.0), high_rng)
    for _ in range(n_bumps):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        sigma = rng.uniform(0.08, 0.2) * min(height, width)
        out += rng.uniform(-1.0, 1.0) * np.exp(-((rows - cy) ** 2 + (cols - cx) ** 2) / (2.0 * sigma ** 2))
    return GridField.normalize(out, "synthetic")


# resampling

def bilinear_matrix(src: int, dst: int) -> np.ndarray:
    """
    dst×src matrix sampling a 1D signal at pixel centers of a dst-long grid.

    Pixel centers are aligned (not corners), and sample positions are clamped
    to the outer source centers.
    """
    pos = (np.arange(dst) + 0.5) * src / dst - 0.5
    pos = np.clip(pos, 0.0, src - 1)
    left = np.floor(pos).astype(np.int64)
    right = np.minimum(left + 1, src - 1)
    frac = pos - left
    m = np.zeros((dst, src))
    m[np.arange(dst), left] += 1.0 - frac
    m[np.arange(dst), right] += frac
    return m


def downsample(hr: GridField, scale: int, interp: str = "block_mean") -> GridField:
    """
    Coarsen a field by an integer factor.

    'block_mean' averages scale×scale blocks; 'bilinear' samples the field at
    the coarse pixel centers.
    """
    if scale < 1 or hr.height % scale or hr.width % scale:
        raise DimensionError(f"field {list(hr.shape)} is not divisible by scale {scale}")
    h, w = hr.height // scale, hr.width // scale
    if interp == "block_mean":
        values = hr.values.reshape(h, scale, w, scale).mean(axis=(1, 3))
    elif interp == "bilinear":
        values = bilinear_matrix(hr.height, h) @ hr.values @ bilinear_matrix(hr.width, w).T
    else:
        raise ConfigError(f"unknown interpolation '{interp}', expected one of {INTERPOLATIONS}")
    return hr.with_values(values)


def upsample_nearest(field_: GridField, scale: int) -> GridField:
    return field_.with_values(np.repeat(np.repeat(field_.values, scale, axis=0), scale, axis=1))


def tile8(grid: GridField, rows: int = 2, cols: int = 4) -> List[GridField]:
    """Cut a field into a rows×cols lattice of non-overlapping tiles, row-major."""
    if grid.height % rows or grid.width % cols:
        raise DimensionError(f"field {list(grid.shape)} cannot be cut into {rows}×{cols} tiles")
    th, tw = grid.height // rows, grid.width // cols
    return [grid.with_values(grid.values[i * th:(i + 1) * th, j * tw:(j + 1) * tw].copy())
            for i in range(rows) for j in range(cols)]


def untile8(tiles: Sequence[GridField], rows: int = 2, cols: int = 4) -> GridField:
    if len(tiles) != rows * cols:
        raise DimensionError(f"expected {rows * cols} tiles, got {len(tiles)}")
    lattice = [np.hstack([t.values for t in tiles[i * cols:(i + 1) * cols]]) for i in range(rows)]
    return tiles[0].with_values(np.vstack(lattice))


# datasets

def make_pair(hr: GridField, scale: int, interp: str = "block_mean", name: str = "") -> SRPair:
    return SRPair(downsample(hr, scale, interp), hr, scale, name)


def split_pairs(pairs: Sequence[SRPair], val_fraction: float, seed: int) -> SRDataset:
    """Seeded partition into train and val; val is empty for a single sample or a zero fraction."""
    n = len(pairs)
    order = np.random.default_rng(seed).permutation(n)
    n_val = int(round(val_fraction * n))
    if val_fraction > 0 and n >= 2:
        n_val = min(max(n_val, 1), n - 1)
    else:
        n_val = 0
    val_idx = sorted(order[:n_val].tolist())
    train_idx = sorted(order[n_val:].tolist())
    return SRDataset([pairs[i] for i in train_idx], [pairs[i] for i in val_idx])


def build_dataset(fields: Sequence[GridField], spec: DatasetSpec, scale: int,
                  interp: str = "block_mean", names: Sequence[str] = None) -> SRDataset:
    """
    Turn HR fields into LR/HR pairs and split them.

    In sub_image mode every field contributes its eight tiles as separate samples.
    """
    names = list(names) if names is not None else [f"field_{i:03d}" for i in range(len(fields))]
    pairs = []
    for name, hr in zip(names, fields):
        if spec.mode == SUB_IMAGE:
            for k, tile in enumerate(tile8(hr, spec.tile_rows, spec.tile_cols)):
                pairs.append(make_pair(tile, scale, interp, f"{name}#tile{k}"))
        else:
            pairs.append(make_pair(hr, scale, interp, name))
    if not pairs:
        raise DataError("dataset is empty")
    return split_pairs(pairs, spec.val_fraction, spec.seed)
