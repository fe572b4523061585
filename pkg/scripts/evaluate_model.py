"""
Script to evaluate a checkpoint (or a set of predicted grids) against ground truth.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from typing import List, Sequence

import pandas as pd
from tqdm import tqdm

from scripts.generate_dataset import load_dataset, load_fields
from utils.config import RunConfig
from utils.errors import ConfigError, DataError, DimensionError
from utils.grids import SRPair
from utils.metrics import MetricTriple, evaluate_pair, mean_triple
from utils.models import Model, load_checkpoint, super_resolve

EVAL_COLUMNS = ['file', 'mse_pct', 'psnr_db', 'ssim']
SPLITS = ('all', 'train', 'val')


class Evaluator:
    """Per-file MSE (%), PSNR (dB) and SSIM plus a mean row."""

    def __init__(self, config: RunConfig, verbose: bool = True):
        self.config = config
        self.verbose = verbose

    @staticmethod
    def to_frame(names: Sequence[str], triples: List[MetricTriple]) -> pd.DataFrame:
        rows = [{'file': name, 'mse_pct': t.mse_pct, 'psnr_db': t.psnr, 'ssim': t.ssim}
                for name, t in zip(names, triples)]
        mean = mean_triple(triples)
        rows.append({'file': 'mean', 'mse_pct': mean.mse_pct, 'psnr_db': mean.psnr, 'ssim': mean.ssim})
        return pd.DataFrame(rows, columns=EVAL_COLUMNS)

    def select_pairs(self, split: str = 'all') -> List[SRPair]:
        if split not in SPLITS:
            raise ConfigError(f"unknown split '{split}', expected one of {SPLITS}")
        dataset = load_dataset(self.config)
        if split == 'train':
            return dataset.train
        if split == 'val':
            return dataset.val or dataset.train
        return sorted(dataset.train + dataset.val, key=lambda p: p.name)

    def evaluate_model(self, model: Model, pairs: Sequence[SRPair]) -> pd.DataFrame:
        """Super-resolve every LR input and score it against its HR target."""
        cfg = model.config
        triples = []
        for pair in tqdm(pairs, desc="Evaluating", disable=not self.verbose):
            if pair.lr.shape != (cfg.lr_height, cfg.lr_width) or pair.scale != cfg.scale_factor:
                raise DimensionError(f"{pair.name}: LR {list(pair.lr.shape)} at scale {pair.scale} does not "
                                     f"fit the checkpoint ({cfg.lr_height}×{cfg.lr_width}, scale "
                                     f"{cfg.scale_factor})")
            triples.append(evaluate_pair(super_resolve(model, pair.lr.values), pair.hr.values))
        return self.to_frame([p.name for p in pairs], triples)

    def evaluate_checkpoint(self, checkpoint, split: str = 'all') -> pd.DataFrame:
        return self.evaluate_model(load_checkpoint(checkpoint), self.select_pairs(split))

    def evaluate_predictions(self, predictions_manifest) -> pd.DataFrame:
        """Score predicted HR grids against the HR grids of the config's manifest, file by file."""
        targets, names = load_fields(self.config.manifest_path)
        preds, pred_names = load_fields(predictions_manifest)
        if len(preds) != len(targets):
            raise DataError(f"{predictions_manifest} lists {len(preds)} grids, "
                            f"{self.config.manifest_path} lists {len(targets)}")
        triples = []
        for name, pred_name, pred, target in zip(names, pred_names, preds, targets):
            if pred.shape != target.shape:
                raise DimensionError(f"{pred_name}: grid {list(pred.shape)} does not match "
                                     f"{name} {list(target.shape)}")
            triples.append(evaluate_pair(pred.values, target.values))
        return self.to_frame(names, triples)


def main():
    """Main function to evaluate the default checkpoint."""
    config = RunConfig.load()
    evaluator = Evaluator(config)

    print(f"Evaluating {config.checkpoint}...")
    df = evaluator.evaluate_checkpoint(config.checkpoint)

    print(df.to_string(index=False))


if __name__ == "__main__":
    main()
