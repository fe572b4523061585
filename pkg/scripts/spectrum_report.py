"""
Script to compare the radial band energies of a target grid and a reconstruction.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pandas as pd

from scripts.run_inference import InferenceRunner
from utils.errors import DimensionError
from utils.grids import GridField, downsample, load_grid
from utils.metrics import band_errors

SPECTRUM_COLUMNS = ['band', 'r_lo', 'r_hi', 'target_energy', 'recon_energy', 'band_sq_error']


class SpectrumReporter:
    """Band-energy table: target, reconstruction and the energy of their difference."""

    def __init__(self, n_bands: int = 8):
        self.n_bands = n_bands

    def compare(self, target: np.ndarray, recon: np.ndarray) -> pd.DataFrame:
        target_bands, recon_bands, error_bands = band_errors(recon, target, self.n_bands)
        edges = target_bands.edges
        return pd.DataFrame({
            'band': np.arange(self.n_bands),
            'r_lo': edges[:-1],
            'r_hi': edges[1:],
            'target_energy': target_bands.energy,
            'recon_energy': recon_bands.energy,
            'band_sq_error': error_bands.energy,
        }, columns=SPECTRUM_COLUMNS)

    def from_files(self, target_path, recon_path=None) -> pd.DataFrame:
        target = load_grid(target_path)
        recon = load_grid(recon_path) if recon_path else target
        if recon.shape != target.shape:
            raise DimensionError(f"{recon_path}: grid {list(recon.shape)} does not match "
                                 f"{target_path} {list(target.shape)}")
        return self.compare(target.values, recon.values)

    def from_checkpoint(self, target_path, checkpoint, interp: str = 'block_mean') -> pd.DataFrame:
        """Downsample the HR target, super-resolve it with the checkpoint and compare."""
        target: GridField = load_grid(target_path)
        runner = InferenceRunner(checkpoint, verbose=False)
        lr = downsample(target, runner.model.config.scale_factor, interp)
        return self.compare(target.values, runner.infer(lr).values)


def main():
    """Main function: python scripts/spectrum_report.py TARGET_GRID [RECON_GRID]"""
    if len(sys.argv) not in (2, 3):
        print("Usage: python scripts/spectrum_report.py TARGET_GRID [RECON_GRID]")
        return
    reporter = SpectrumReporter()
    df = reporter.from_files(*sys.argv[1:])
    print(df.to_string(index=False))


if __name__ == "__main__":
    main()
