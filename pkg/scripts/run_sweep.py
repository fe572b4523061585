"""
Script to sweep one or two hyperparameters (omega0, cutoff, head depth) and record val PSNR.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from typing import Sequence

import numpy as np
import pandas as pd

from scripts.generate_dataset import load_dataset
from utils.config import RunConfig
from utils.grids import SRDataset
from utils.tables import save_table
from utils.training import sweep, sweep_grid


class SweepRunner:
    """Runs training.sweep with the settings of a RunConfig."""

    def __init__(self, config: RunConfig, verbose: bool = True):
        self.config = config
        self.verbose = verbose

    def run(self, param: str, values: Sequence, dataset: SRDataset = None) -> pd.DataFrame:
        cfg = self.config
        dataset = dataset or load_dataset(cfg)
        lr = dataset.train[0].lr
        values = _typed(param, values)
        if self.verbose:
            print(f"Sweeping {param} over {list(values)} ({cfg.epochs} epochs per cell)")
        return sweep(param, list(values), cfg.model_config(lr.height, lr.width), dataset, cfg.epochs,
                     trainer=cfg.trainer(verbose=self.verbose and cfg.workers <= 1),
                     seed=cfg.seed, workers=cfg.workers)

    def run_grid(self, param: str, values: Sequence, param2: str, values2: Sequence,
                 dataset: SRDataset = None) -> pd.DataFrame:
        """Every combination of two parameters, one row per cell."""
        cfg = self.config
        dataset = dataset or load_dataset(cfg)
        lr = dataset.train[0].lr
        values, values2 = _typed(param, values), _typed(param2, values2)
        if self.verbose:
            print(f"Sweeping {param} over {list(values)} × {param2} over {list(values2)} "
                  f"({cfg.epochs} epochs per cell)")
        return sweep_grid(param, values, param2, values2, cfg.model_config(lr.height, lr.width), dataset,
                          cfg.epochs, trainer=cfg.trainer(verbose=self.verbose and cfg.workers <= 1),
                          seed=cfg.seed, workers=cfg.workers)


def _typed(param: str, values: Sequence) -> list:
    return [int(v) for v in values] if param == 'layers' else list(values)


def parse_values(text: str) -> list:
    """Comma-separated numbers, or start:stop:step (stop inclusive)."""
    text = text.strip()
    if ':' in text:
        start, stop, step = (float(part) for part in text.split(':'))
        values = np.arange(start, stop + step / 2.0, step)
        return [round(float(v), 10) for v in values]
    return [float(part) for part in text.split(',') if part.strip()]


def main():
    """Main function: omega0 from 10 to 60 against one to six hidden layers."""
    runner = SweepRunner(RunConfig.load())

    print("Starting omega0 × layers sweep...")
    df = runner.run_grid('omega0', parse_values('10:60:10'), 'layers', parse_values('1:6:1'))
    save_table(df, 'data/runs/sweep_grid.csv', runner.config.output_format)

    print(df.pivot(index='omega0', columns='layers', values='psnr').to_string())


if __name__ == "__main__":
    main()
