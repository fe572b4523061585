"""
Script to super-resolve an LR grid with a trained checkpoint.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from pathlib import Path

from utils.config import RunConfig
from utils.errors import DimensionError
from utils.grids import GridField, load_grid, save_grid, save_pgm
from utils.models import Model, load_checkpoint, super_resolve


class InferenceRunner:
    """Loads one checkpoint and applies it to LR grids."""

    def __init__(self, checkpoint, verbose: bool = True):
        self.model: Model = load_checkpoint(checkpoint)
        self.checkpoint = Path(checkpoint)
        self.verbose = verbose

    def infer(self, lr: GridField) -> GridField:
        cfg = self.model.config
        if lr.shape != (cfg.lr_height, cfg.lr_width):
            raise DimensionError(f"LR grid {list(lr.shape)} does not match checkpoint {self.checkpoint} "
                                 f"({cfg.lr_height}×{cfg.lr_width})")
        return lr.with_values(super_resolve(self.model, lr.values))

    def infer_file(self, lr_path, out_path, pgm_path=None) -> Path:
        """
        Super-resolve an ESMG file.

        Args:
            lr_path: LR grid to read
            out_path: Where to write the HR grid
            pgm_path: Optional PGM preview of the output

        Returns:
            Path of the written grid
        """
        lr = load_grid(lr_path)
        try:
            sr = self.infer(lr)
        except DimensionError as e:
            raise DimensionError(f"{lr_path}: {e}") from None
        out = save_grid(sr, out_path)
        if pgm_path:
            save_pgm(sr, pgm_path)
        if self.verbose:
            print(f"Super-resolved {lr_path} {list(lr.shape)} → {out} {list(sr.shape)}")
        return out


def main():
    """Main function: python scripts/run_inference.py LR_GRID OUT_GRID"""
    if len(sys.argv) != 3:
        print("Usage: python scripts/run_inference.py LR_GRID OUT_GRID")
        return
    runner = InferenceRunner(RunConfig.load().checkpoint)
    runner.infer_file(sys.argv[1], sys.argv[2])


if __name__ == "__main__":
    main()
