"""
Script to train a super-resolution model on a generated dataset.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from pathlib import Path
from typing import Tuple

from scripts.generate_dataset import load_dataset
from utils.config import RunConfig
from utils.errors import NumericalError
from utils.grids import SRDataset
from utils.models import Model, save_checkpoint
from utils.tables import save_table
from utils.training import TrainReport


class TrainingPipeline:
    """Dataset → model → trainer → checkpoint + report."""

    def __init__(self, config: RunConfig, verbose: bool = True):
        self.config = config
        self.verbose = verbose

    def build_model(self, dataset: SRDataset) -> Model:
        lr = dataset.train[0].lr
        return Model.build(self.config.model_config(lr.height, lr.width), self.config.seed)

    def save_report(self, report: TrainReport):
        return save_table(report.to_frame(), self.config.report, self.config.output_format)

    def run(self, dataset: SRDataset = None) -> Tuple[TrainReport, Model]:
        """
        Train with the configured settings and write checkpoint and report.

        Args:
            dataset: Pairs to train on, loaded from the manifest when omitted

        Returns:
            (report, trained model)
        """
        cfg = self.config
        dataset = dataset or load_dataset(cfg)
        model = self.build_model(dataset)
        if self.verbose:
            print(f"Training {cfg.arch} ({model.parameter_count()} parameters) on "
                  f"{len(dataset.train)} train / {len(dataset.val)} val samples")

        trainer = cfg.trainer(verbose=self.verbose)
        try:
            report, model = trainer.train(model, dataset, cfg.epochs, cfg.seed)
        except NumericalError as e:
            if e.report is not None:
                self.save_report(e.report)
            raise

        checkpoint = save_checkpoint(model, Path(cfg.checkpoint))
        if self.verbose:
            print(f"Checkpoint saved to {checkpoint}")
        self.save_report(report)
        return report, model


def main():
    """Main function to train on the default dataset."""
    pipeline = TrainingPipeline(RunConfig.load())

    print("Starting training...")
    report, _ = pipeline.run()

    if report.last is not None:
        print(f"Final val PSNR: {report.last.val_psnr:.2f} dB, SSIM: {report.last.val_ssim:.4f}")


if __name__ == "__main__":
    main()
