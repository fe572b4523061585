"""
Script to generate the synthetic ESM-like dataset and load it back as LR/HR pairs.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from pathlib import Path
from typing import List, Tuple

import numpy as np
from tqdm import tqdm

from utils.config import RunConfig
from utils.errors import DataError, DimensionError
from utils.grids import (GridField, SRDataset, build_dataset, load_grid, load_manifest, save_grid,
                         save_pgm, synth_field, write_manifest)


class DatasetGenerator:
    """Writes seeded synthetic HR fields plus a manifest."""

    def __init__(self, config: RunConfig, verbose: bool = True):
        self.config = config
        self.verbose = verbose

    def field_seeds(self) -> List[int]:
        """One seed per field, derived from the run seed."""
        rng = np.random.default_rng(self.config.seed)
        return [int(s) for s in rng.integers(0, 2 ** 31 - 1, size=self.config.n_fields)]

    def generate_fields(self) -> List[GridField]:
        cfg = self.config
        return [
            synth_field(cfg.height, cfg.width, cfg.n_low, cfg.n_high, cfg.amp_high, seed=s,
                        high_seed=cfg.seed if cfg.shared_high else None)
            for s in tqdm(self.field_seeds(), desc="Generating fields", disable=not self.verbose)
        ]

    def generate(self, preview: bool = False) -> Tuple[List[Path], Path]:
        """
        Write every field as ESMG and the manifest that lists them.

        Args:
            preview: Also write a PGM image next to every field

        Returns:
            (grid paths, manifest path)
        """
        data_dir = Path(self.config.data_dir)
        paths = []
        for i, grid in enumerate(self.generate_fields()):
            path = save_grid(grid, data_dir / f"field_{i:03d}.esmg")
            if preview:
                save_pgm(grid, path.with_suffix('.pgm'))
            paths.append(path)
        manifest = write_manifest(paths, self.config.seed, self.config.manifest_path)
        if self.verbose:
            print(f"Wrote {len(paths)} fields and manifest {manifest}")
        return paths, manifest


def load_fields(manifest) -> Tuple[List[GridField], List[str]]:
    """Load every grid a manifest lists; all grids must share one shape."""
    fields, names = [], []
    for path in load_manifest(manifest):
        grid = load_grid(path)
        if fields and grid.shape != fields[0].shape:
            raise DimensionError(f"{path}: grid {list(grid.shape)} differs from {list(fields[0].shape)} "
                                 f"of {names[0]}")
        fields.append(grid)
        names.append(path.stem)
    return fields, names


def load_dataset(config: RunConfig) -> SRDataset:
    """Build the train/val pairs the config describes from its manifest."""
    fields, names = load_fields(config.manifest_path)
    dataset = build_dataset(fields, config.dataset_spec(), config.scale_factor, config.interp, names)
    if not dataset.train:
        raise DataError(f"no training samples in {config.manifest_path}")
    return dataset


def main():
    """Main function to generate the default synthetic dataset."""
    generator = DatasetGenerator(RunConfig.load())

    print("Starting synthetic dataset generation...")
    paths, manifest = generator.generate(preview=True)

    print(f"Generated {len(paths)} fields")
    print(f"Manifest: {manifest}")


if __name__ == "__main__":
    main()
