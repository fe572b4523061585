"""
forenlab - command-line entry point for frequency-aware super-resolution runs.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import functools
from pathlib import Path
from typing import Optional, Sequence

import click
import pandas as pd
from dotenv import load_dotenv

from scripts.evaluate_model import SPLITS, Evaluator
from scripts.generate_dataset import DatasetGenerator
from scripts.run_inference import InferenceRunner
from scripts.run_sweep import SweepRunner, parse_values
from scripts.spectrum_report import SpectrumReporter
from scripts.train_model import TrainingPipeline
from utils.config import RunConfig
from utils.errors import ConfigError, ForenLabError
from utils.tables import save_table
from utils.training import SWEEP_PARAMS


class ForenLab:
    """Wires a RunConfig to the dataset, training, evaluation and report pipelines."""

    def __init__(self, config: RunConfig, verbose: bool = True):
        self.config = config
        self.verbose = verbose

    def generate(self, preview: bool = False):
        return DatasetGenerator(self.config, self.verbose).generate(preview)

    def train(self):
        return TrainingPipeline(self.config, self.verbose).run()

    def evaluate(self, checkpoint: Optional[str] = None, split: str = 'all',
                 predictions: Optional[str] = None) -> pd.DataFrame:
        """
        Score a checkpoint, or a manifest of predicted grids, against the dataset.

        Args:
            checkpoint: VFR1 file, defaults to the configured checkpoint
            split: Which samples to score when a checkpoint is evaluated
            predictions: Manifest of predicted HR grids (skips the model)

        Returns:
            DataFrame with columns file, mse_pct, psnr_db, ssim and a final mean row
        """
        evaluator = Evaluator(self.config, self.verbose)
        if predictions:
            return evaluator.evaluate_predictions(predictions)
        return evaluator.evaluate_checkpoint(checkpoint or self.config.checkpoint, split)

    def sweep(self, param: str, values: Sequence[float], param2: Optional[str] = None,
              values2: Optional[Sequence[float]] = None) -> pd.DataFrame:
        runner = SweepRunner(self.config, self.verbose)
        if param2:
            return runner.run_grid(param, values, param2, values2)
        return runner.run(param, values)

    def infer(self, lr_grid: str, out: str, pgm: Optional[str] = None, checkpoint: Optional[str] = None) -> Path:
        return InferenceRunner(checkpoint or self.config.checkpoint, self.verbose).infer_file(lr_grid, out, pgm)

    def spectrum(self, grid: str, recon: Optional[str] = None, checkpoint: Optional[str] = None) -> pd.DataFrame:
        reporter = SpectrumReporter(self.config.n_bands)
        if checkpoint:
            return reporter.from_checkpoint(grid, checkpoint, self.config.interp)
        return reporter.from_files(grid, recon)

    def save(self, df: pd.DataFrame, path) -> list:
        return save_table(df, path, self.config.output_format)


def config_options(command):
    """--config/--set/--quiet shared by every command."""
    @click.option('--config', '-c', 'config_path', type=click.Path(dir_okay=False),
                  help='key=value config file')
    @click.option('--set', '-s', 'overrides', multiple=True, metavar='KEY=VALUE',
                  help='Override a config value (repeatable)')
    @click.option('--quiet', '-q', is_flag=True, help='Suppress progress output')
    @functools.wraps(command)
    def wrapper(config_path, overrides, quiet, **kwargs):
        try:
            load_dotenv()
            lab = ForenLab(RunConfig.load(config_path, overrides), verbose=not quiet)
            return command(lab, **kwargs)
        except ForenLabError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(e.exit_code)
    return wrapper


@click.group()
def cli():
    """forenlab - ViSIR / ViFOR super-resolution for gridded climate fields."""
    pass


@cli.command()
@click.option('--preview', is_flag=True, help='Also write PGM previews')
@config_options
def gen(lab: ForenLab, preview):
    """Generate the synthetic dataset and its manifest."""
    paths, manifest = lab.generate(preview)
    click.echo(f"✓ {len(paths)} fields listed in {manifest}")


@cli.command()
@config_options
def train(lab: ForenLab):
    """Train a model; writes a checkpoint and a report."""
    report, model = lab.train()
    if report.last is not None:
        click.echo(f"✓ Trained {model.config.arch} for {len(report)} epochs, "
                   f"val PSNR {report.last.val_psnr:.2f} dB")
    else:
        click.echo(f"✓ Saved untrained {model.config.arch} checkpoint")


@cli.command(name='eval')
@click.option('--checkpoint', type=click.Path(dir_okay=False), help='Checkpoint to evaluate')
@click.option('--split', type=click.Choice(SPLITS), default='all', help='Samples to evaluate')
@click.option('--predictions', type=click.Path(dir_okay=False),
              help='Manifest of predicted HR grids to score instead of a checkpoint')
@click.option('--out', '-o', default='data/runs/eval.csv', help='Metrics table path')
@config_options
def evaluate(lab: ForenLab, checkpoint, split, predictions, out):
    """Score reconstructions with MSE (%), PSNR and SSIM."""
    df = lab.evaluate(checkpoint, split, predictions)
    lab.save(df, out)
    mean = df.iloc[-1]
    click.echo(f"✓ mean MSE {mean['mse_pct']:.4f}%  PSNR {mean['psnr_db']:.2f} dB  SSIM {mean['ssim']:.4f}")


@cli.command()
@click.option('--param', '-p', type=click.Choice(sorted(SWEEP_PARAMS)), required=True,
              help='Hyperparameter to sweep')
@click.option('--values', '-v', required=True, help='Comma-separated values or start:stop:step')
@click.option('--param2', type=click.Choice(sorted(SWEEP_PARAMS)),
              help='Second hyperparameter for a grid sweep')
@click.option('--values2', help='Values of the second hyperparameter')
@click.option('--out', '-o', default='data/runs/sweep.csv', help='Sweep table path')
@config_options
def sweep(lab: ForenLab, param, values, param2, values2, out):
    """Train one model per value (or value pair) and record the final val PSNR."""
    if bool(param2) != bool(values2):
        raise ConfigError("--param2 and --values2 go together")
    try:
        parsed = parse_values(values)
        parsed2 = parse_values(values2) if values2 else None
    except ValueError:
        raise ConfigError(f"cannot parse sweep values '{values}' / '{values2}'") from None
    df = lab.sweep(param, parsed, param2, parsed2)
    lab.save(df, out)
    click.echo(df.to_string(index=False))


@cli.command()
@click.argument('lr_grid', type=click.Path(dir_okay=False))
@click.argument('out', type=click.Path(dir_okay=False))
@click.option('--checkpoint', type=click.Path(dir_okay=False), help='Checkpoint to use')
@click.option('--pgm', type=click.Path(dir_okay=False), help='Also write a PGM preview')
@config_options
def infer(lab: ForenLab, lr_grid, out, checkpoint, pgm):
    """Super-resolve an LR grid."""
    written = lab.infer(lr_grid, out, pgm, checkpoint)
    click.echo(f"✓ {written}")


@cli.command()
@click.argument('grid', type=click.Path(dir_okay=False))
@click.option('--recon', type=click.Path(dir_okay=False), help='Reconstruction to compare with GRID')
@click.option('--checkpoint', type=click.Path(dir_okay=False),
              help='Reconstruct GRID from its downsampled version with this checkpoint')
@click.option('--out', '-o', default='data/runs/spectrum.csv', help='Band table path')
@config_options
def spectrum(lab: ForenLab, grid, recon, checkpoint, out):
    """Radial band energies of a grid and its reconstruction."""
    df = lab.spectrum(grid, recon, checkpoint)
    lab.save(df, out)
    click.echo(df.to_string(index=False))


if __name__ == "__main__":
    cli()
