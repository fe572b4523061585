"""
Spectral-bias benchmark, cutoff ablation and sub-image vs full-image comparison
on the standard synthetic dataset.

The spectral-bias run trains a ReLU MLP, a standalone SIREN, ViSIR and ViFOR
with identical budgets and compares overall and high-band PSNR; the ablation
sweeps the FOREN cutoff over several seeds.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from typing import Dict, Iterable, Sequence

import numpy as np
import pandas as pd

from scripts.generate_dataset import DatasetGenerator
from utils.config import RunConfig
from utils.grids import FULL_IMAGE, SUB_IMAGE, SRDataset, build_dataset
from utils.metrics import high_band_psnr
from utils.models import Model, super_resolve
from utils.tables import save_table
from utils.training import sweep

BENCHMARK_ARCHS = ('mlp_relu', 'siren_only', 'visir', 'vifor')
ABLATION_CUTOFFS = (0.05, 0.3, 0.9)
ABLATION_SEEDS = (7, 8, 9)
MODE_ARCHS = ('visir', 'vifor')

# Layered over the config file, below --set overrides. patch_size=1 must
# divide the 8×4 LR tiles of sub_image mode.
BENCHMARK_OVERRIDES = (
    'patch_size=1',
    'layers=2',
    'batch_size=1',
    'base_lr=1e-3',
    'min_lr=1e-5',
    'lambda2=0.0',
)


def benchmark_config(path=None, overrides: Iterable[str] = (), use_env: bool = True) -> RunConfig:
    """RunConfig with the benchmark settings below the caller's overrides."""
    return RunConfig.load(path, [*BENCHMARK_OVERRIDES, *overrides], use_env=use_env)


class SpectralBiasBenchmark:
    """Trains the comparison models with shared data, seed and epoch budget."""

    def __init__(self, config: RunConfig, verbose: bool = True):
        self.config = config
        self.verbose = verbose
        self._fields = None
        self._datasets: Dict[str, SRDataset] = {}

    def dataset_for(self, mode: str) -> SRDataset:
        if mode not in self._datasets:
            cfg = self.config.with_overrides(mode=mode)
            if self._fields is None:
                self._fields = DatasetGenerator(cfg, verbose=False).generate_fields()
            self._datasets[mode] = build_dataset(self._fields, cfg.dataset_spec(), cfg.scale_factor, cfg.interp)
        return self._datasets[mode]

    @property
    def dataset(self) -> SRDataset:
        return self.dataset_for(self.config.mode)

    def train_arch(self, arch: str, mode: str = None) -> Dict[str, float]:
        mode = mode or self.config.mode
        cfg = self.config.with_overrides(arch=arch, mode=mode)
        dataset = self.dataset_for(mode)
        val_pairs = dataset.val or dataset.train
        lr = dataset.train[0].lr
        model = Model.build(cfg.model_config(lr.height, lr.width), cfg.seed)
        report, model = cfg.trainer(verbose=self.verbose).train(model, dataset, cfg.epochs, cfg.seed)
        preds = [super_resolve(model, p.lr.values) for p in val_pairs]
        val_psnr = (report.last.val_psnr if report.last is not None
                    else float(cfg.trainer(verbose=False).validate(model, val_pairs).psnr))
        return {
            'arch': arch,
            'mode': mode,
            'parameters': model.parameter_count(),
            'val_psnr': float(val_psnr),
            'high_band_psnr': float(np.mean([high_band_psnr(pred, p.hr.values)
                                             for pred, p in zip(preds, val_pairs)])),
        }

    def run_spectral_bias(self, archs: Sequence[str] = BENCHMARK_ARCHS) -> pd.DataFrame:
        rows = []
        for arch in archs:
            if self.verbose:
                print(f"Benchmarking {arch}...")
            rows.append(self.train_arch(arch))
        return pd.DataFrame(rows, columns=['arch', 'parameters', 'val_psnr', 'high_band_psnr'])

    def run_mode_comparison(self, archs: Sequence[str] = MODE_ARCHS,
                            modes: Sequence[str] = (FULL_IMAGE, SUB_IMAGE)) -> pd.DataFrame:
        """
        Train each architecture on whole fields and on 2×4 sub-image tiles.

        PSNR is per validation sample, so sub-image rows average over tiles.
        """
        rows = []
        for mode in modes:
            for arch in archs:
                if self.verbose:
                    print(f"Benchmarking {arch} on {mode}...")
                rows.append(self.train_arch(arch, mode))
        return pd.DataFrame(rows, columns=['arch', 'mode', 'parameters', 'val_psnr', 'high_band_psnr'])

    def run_cutoff_ablation(self, cutoffs: Sequence[float] = ABLATION_CUTOFFS,
                            seeds: Sequence[int] = ABLATION_SEEDS) -> pd.DataFrame:
        """Cutoff sweep per seed; one row per (seed, fc)."""
        cfg = self.config.with_overrides(arch='vifor')
        lr = self.dataset.train[0].lr
        frames = []
        for seed in seeds:
            if self.verbose:
                print(f"Cutoff ablation, seed {seed}...")
            df = sweep('fc', list(cutoffs), cfg.model_config(lr.height, lr.width), self.dataset, cfg.epochs,
                       trainer=cfg.trainer(verbose=False), seed=seed, workers=cfg.workers)
            df.insert(0, 'seed', seed)
            frames.append(df)
        return pd.concat(frames, ignore_index=True)

    @staticmethod
    def check(bias: pd.DataFrame, ablation: pd.DataFrame = None, margin_db: float = 2.0) -> Dict[str, bool]:
        """Pass/fail of the benchmark claims."""
        by_arch = bias.set_index('arch')
        checks = {
            'siren_beats_relu_high_band': bool(by_arch.loc['siren_only', 'high_band_psnr']
                                               - by_arch.loc['mlp_relu', 'high_band_psnr'] >= margin_db),
            'vifor_beats_relu_overall': bool(by_arch.loc['vifor', 'val_psnr']
                                             - by_arch.loc['mlp_relu', 'val_psnr'] >= margin_db),
        }
        if ablation is not None:
            means = ablation.groupby('fc')['psnr'].mean()
            interior = means.index[len(means) // 2]
            checks['cutoff_interior_optimum'] = bool(means.loc[interior] >= means.iloc[0]
                                                     and means.loc[interior] >= means.iloc[-1])
        return checks


def main():
    """Main function to run the full benchmark and write its tables."""
    config = benchmark_config()
    benchmark = SpectralBiasBenchmark(config)

    print("Starting spectral-bias benchmark...")
    bias = benchmark.run_spectral_bias()
    save_table(bias, 'data/benchmark/spectral_bias.csv', config.output_format)

    print("Starting cutoff ablation...")
    ablation = benchmark.run_cutoff_ablation()
    save_table(ablation, 'data/benchmark/cutoff_ablation.csv', config.output_format)

    print("Starting sub-image vs full-image comparison...")
    modes = benchmark.run_mode_comparison()
    save_table(modes, 'data/benchmark/modes.csv', config.output_format)

    print("\nBenchmark summary:")
    print(bias.to_string(index=False))
    print(modes.to_string(index=False))
    for name, passed in benchmark.check(bias, ablation).items():
        print(f"{'✓' if passed else '✗'} {name}")


if __name__ == "__main__":
    main()
