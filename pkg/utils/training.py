"""
Losses, Adam, the cosine learning-rate schedule, the training loop and
hyperparameter sweeps.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from utils.errors import ConfigError, DimensionError, ForenLabError, NumericalError
from utils.grids import SRDataset, SRPair
from utils.metrics import evaluate_pair, mean_triple
from utils.models import Model, ModelConfig, forward, super_resolve
from utils.ndtensor import Graph, Tensor, backward, mean, record_op, square, sub, zero_grads
from utils.spectral import fft2_array, ifft2_array

REPORT_COLUMNS = ["epoch", "loss", "mse_term", "freq_term", "val_mse", "val_psnr", "val_ssim", "lr", "seconds"]
SWEEP_PARAMS = {"omega0": "omega0", "f_c": "fc", "fc": "fc", "layers": "layers"}


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 0.1

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0 or self.lambda1 + self.lambda2 <= 0:
            raise ConfigError(f"loss weights must be non-negative with a positive sum, "
                              f"got lambda1={self.lambda1}, lambda2={self.lambda2}")


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def mse_loss(pred, target) -> Tensor:
    pred, target = _as_tensor(pred), _as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"mse: shape mismatch {list(pred.shape)} vs {list(target.shape)}")
    return mean(square(sub(pred, target)))


def freq_loss(pred, target) -> Tensor:
    """
    Mean absolute difference of the 2D DFT magnitude spectra.

    With unnormalized spectra, averaging over the H·W bins leaves a constant
    offset c as a loss of |c| (only the DC magnitude moves, by c·H·W).
    """
    pred, target = _as_tensor(pred), _as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"freq_loss: shape mismatch {list(pred.shape)} vs {list(target.shape)}")
    spec_p = fft2_array(pred.data)
    spec_t = fft2_array(target.data)
    mag_p = np.abs(spec_p)
    mag_t = np.abs(spec_t)
    diff = mag_p - mag_t
    n = diff.size

    def unit(spec, mag):
        return np.divide(spec, mag, out=np.zeros_like(spec), where=mag > 0)

    def backward_fn(g):
        weight = np.sign(diff) * (float(g) / n)
        # d|X_k|/dx = Re(X_k e^{+iθ}) / |X_k|, summed over bins with an unnormalized inverse DFT
        grad_p = np.real(ifft2_array(weight * unit(spec_p, mag_p))) * n
        grad_t = np.real(ifft2_array(weight * unit(spec_t, mag_t))) * n
        return grad_p, -grad_t

    return record_op(np.array(np.mean(np.abs(diff))), (pred, target), "freq_loss", backward_fn)


def loss_terms(pred, target, w: LossWeights) -> Tuple[Tensor, Tensor, Optional[Tensor]]:
    """Return (total, mse, freq); freq is None when lambda2 is 0."""
    mse_term = mse_loss(pred, target)
    if w.lambda2 == 0:
        return mse_term * w.lambda1, mse_term, None
    freq_term = freq_loss(pred, target)
    return mse_term * w.lambda1 + freq_term * w.lambda2, mse_term, freq_term


def total_loss(pred, target, w: LossWeights = LossWeights()) -> Tensor:
    """λ₁·MSE + λ₂·FreqLoss."""
    return loss_terms(pred, target, w)[0]


@dataclass
class OptimState:
    """Adam moments and step counter."""

    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    base_lr: float = 1e-4

    @classmethod
    def for_parameters(cls, params: Dict[str, Tensor], **settings) -> "OptimState":
        state = cls(**settings)
        for name, p in params.items():
            state.m[name] = np.zeros(p.shape)
            state.v[name] = np.zeros(p.shape)
        return state


def adam_step(params: Dict[str, Tensor], grads: Dict[str, Optional[np.ndarray]], state: OptimState,
              lr: float = None) -> OptimState:
    """
    One bias-corrected Adam update, in place.

    Args:
        params: Named parameters to update
        grads: Named gradients (missing or None means zero)
        state: Moment estimates; state.step is incremented before the update
        lr: Step size, defaults to state.base_lr

    Returns:
        The updated state
    """
    lr = state.base_lr if lr is None else lr
    for name, g in grads.items():
        if g is not None and not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in parameter '{name}' at step {state.step + 1}",
                                 parameter=name)
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros(p.shape)
        if g.shape != p.shape:
            raise DimensionError(f"gradient of '{name}' has shape {list(g.shape)}, parameter {list(p.shape)}")
        if name not in state.m:
            state.m[name] = np.zeros(p.shape)
            state.v[name] = np.zeros(p.shape)
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        m_hat = state.m[name] / (1.0 - state.beta1 ** t)
        v_hat = state.v[name] / (1.0 - state.beta2 ** t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state


def cosine_lr(t: int, total: int, base_lr: float = 1e-4, min_lr: float = 1e-6) -> float:
    """min + ½(base − min)(1 + cos(πt/T)); clamps to min_lr past the end."""
    if total < 1:
        raise ConfigError(f"total steps must be at least 1, got {total}")
    if t < 0:
        raise ConfigError(f"step must be non-negative, got {t}")
    if t == 0:
        return base_lr
    if t >= total:
        return min_lr
    return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + math.cos(math.pi * t / total))


@dataclass(frozen=True)
class TrainRecord:
    epoch: int
    loss: float
    mse_term: float
    freq_term: float
    val_mse: float
    val_psnr: float
    val_ssim: float
    lr: float
    seconds: float


@dataclass
class TrainReport:
    records: List[TrainRecord] = field(default_factory=list)

    def append(self, record: TrainRecord):
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ConfigError(f"epoch {record.epoch} does not follow epoch {self.records[-1].epoch}")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def last(self) -> Optional[TrainRecord]:
        return self.records[-1] if self.records else None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records], columns=REPORT_COLUMNS)

    def to_csv(self, path=None):
        return self.to_frame().to_csv(path, index=False)


class Trainer:
    """Adam + cosine decay over LR/HR pairs with per-epoch validation."""

    def __init__(self, weights: LossWeights = LossWeights(), base_lr: float = 1e-4, min_lr: float = 1e-6,
                 beta1: float = 0.9, beta2: float = 0.999, adam_eps: float = 1e-8, batch_size: int = 0,
                 log_wall_time: bool = False, verbose: bool = True):
        if batch_size < 0:
            raise ConfigError(f"batch_size must be non-negative, got {batch_size}")
        self.weights = weights
        self.base_lr = base_lr
        self.min_lr = min_lr
        self.betas = (beta1, beta2)
        self.adam_eps = adam_eps
        self.batch_size = batch_size
        self.log_wall_time = log_wall_time
        self.verbose = verbose

    def _batches(self, n: int, rng) -> List[np.ndarray]:
        order = rng.permutation(n)
        size = self.batch_size or n
        return [order[i:i + size] for i in range(0, n, size)]

    def _step_on_batch(self, model: Model, batch: Sequence[SRPair]) -> Tuple[float, float, float]:
        """Accumulate gradients over a batch, one graph per sample."""
        totals = np.zeros(3)
        for pair in batch:
            with Graph():
                pred = forward(model, pair.lr.values)
                total, mse_term, freq_term = loss_terms(pred, pair.hr.values, self.weights)
                if not np.isfinite(total.item()):
                    raise NumericalError(f"loss became {total.item()} on sample '{pair.name}'")
                backward(total * (1.0 / len(batch)))
            totals += [total.item(), mse_term.item(), 0.0 if freq_term is None else freq_term.item()]
        return tuple(totals / len(batch))

    def validate(self, model: Model, pairs: Sequence[SRPair]):
        return mean_triple(evaluate_pair(super_resolve(model, p.lr.values), p.hr.values) for p in pairs)

    def train(self, model: Model, dataset: SRDataset, epochs: int, seed: int = 0) -> Tuple[TrainReport, Model]:
        """
        Train in place and report per-epoch losses and validation metrics.

        Validation uses the training pairs when the dataset has no val split.

        Raises:
            NumericalError: loss or a gradient became non-finite; .report holds
                the epochs completed before the abort
        """
        if not dataset.train:
            raise ConfigError("training set is empty")
        if epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {epochs}")
        report = TrainReport()
        rng = np.random.default_rng(seed)
        params = model.parameters
        state = OptimState.for_parameters(params, beta1=self.betas[0], beta2=self.betas[1],
                                          eps=self.adam_eps, base_lr=self.base_lr)
        val_pairs = dataset.val or dataset.train
        steps_per_epoch = len(self._batches(len(dataset.train), np.random.default_rng(0)))
        total_steps = max(1, epochs * steps_per_epoch)

        progress = tqdm(range(1, epochs + 1), desc=f"Training {model.config.arch}", disable=not self.verbose)
        for epoch in progress:
            started = time.perf_counter()
            sums = np.zeros(3)
            lr = self.base_lr
            try:
                for batch in self._batches(len(dataset.train), rng):
                    zero_grads(params.values())
                    sums += np.array(self._step_on_batch(model, [dataset.train[i] for i in batch])) * len(batch)
                    lr = cosine_lr(state.step, total_steps, self.base_lr, self.min_lr)
                    adam_step(params, {k: p.grad for k, p in params.items()}, state, lr)
                    model.clip_alpha()
            except NumericalError as e:
                e.report = report
                if self.verbose:
                    tqdm.write(f"[ERROR] epoch {epoch}: {e}; keeping {len(report)} completed epochs")
                raise
            metrics = self.validate(model, val_pairs)
            loss, mse_term, freq_term = sums / len(dataset.train)
            seconds = time.perf_counter() - started if self.log_wall_time else 0.0
            report.append(TrainRecord(epoch, float(loss), float(mse_term), float(freq_term),
                                      metrics.mse, metrics.psnr, metrics.ssim, float(lr), seconds))
            if self.verbose:
                tqdm.write(f"epoch {epoch:4d}  loss {loss:.6f}  val_psnr {metrics.psnr:.2f} dB  "
                           f"val_ssim {metrics.ssim:.4f}  lr {lr:.2e}")
        return report, model


def train(model: Model, dataset: SRDataset, epochs: int, w: LossWeights = LossWeights(), seed: int = 0,
          **trainer_options) -> Tuple[TrainReport, Model]:
    return Trainer(weights=w, **trainer_options).train(model, dataset, epochs, seed)


def _sweep_config(param: str, value, base_cfg: ModelConfig) -> ModelConfig:
    if param == "omega0":
        return replace(base_cfg, omega0=float(value))
    if param in ("f_c", "fc"):
        return replace(base_cfg, f_low=float(value), f_high=float(value))
    if param == "layers":
        return replace(base_cfg, siren_hidden_layers=int(value))
    raise ConfigError(f"unknown sweep parameter '{param}', expected one of {sorted(set(SWEEP_PARAMS))}")


def _check_param(param: str):
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter '{param}', expected one of {sorted(set(SWEEP_PARAMS))}")


def _final_psnr(cfg: ModelConfig, dataset: SRDataset, epochs: int, trainer: Trainer, seed: int,
                label: str) -> float:
    try:
        model = Model.build(cfg, seed)
        report, _ = trainer.train(model, dataset, epochs, seed)
        if report.last is None:
            return float(trainer.validate(model, dataset.val or dataset.train).psnr)
        return float(report.last.val_psnr)
    except ForenLabError as e:
        print(f"[ERROR] sweep cell {label} failed: {e}")
        return float("nan")


def _run_cells(cells: Sequence, run_cell, workers: int, desc: str, verbose: bool) -> List[float]:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_cell, cells))
    return [run_cell(c) for c in tqdm(cells, desc=desc, disable=not verbose)]


def sweep(param: str, values: Sequence, base_cfg: ModelConfig, dataset: SRDataset, epochs: int,
          trainer: Trainer = None, seed: int = 0, workers: int = 1) -> pd.DataFrame:
    """
    Train one model per value with a shared seed and collect final val PSNR.

    Failed cells are reported and recorded as NaN; the sweep continues.

    Returns:
        DataFrame with columns [<param>, psnr]
    """
    if not values:
        raise ConfigError("sweep needs at least one value")
    _check_param(param)
    trainer = trainer or Trainer(verbose=False)
    column = SWEEP_PARAMS[param]

    def run_cell(value):
        return _final_psnr(_sweep_config(param, value, base_cfg), dataset, epochs, trainer, seed,
                           f"{column}={value}")

    psnrs = _run_cells(list(values), run_cell, workers, f"Sweeping {column}", trainer.verbose)
    return pd.DataFrame({column: list(values), "psnr": psnrs})


def sweep_grid(param: str, values: Sequence, param2: str, values2: Sequence, base_cfg: ModelConfig,
               dataset: SRDataset, epochs: int, trainer: Trainer = None, seed: int = 0,
               workers: int = 1) -> pd.DataFrame:
    """
    Two-parameter sweep, e.g. omega0 × hidden layers, over the full grid of values.

    Returns:
        Long-form DataFrame with columns [<param>, <param2>, psnr], first
        parameter varying slowest
    """
    if not values or not values2:
        raise ConfigError("grid sweep needs at least one value per parameter")
    _check_param(param)
    _check_param(param2)
    column, column2 = SWEEP_PARAMS[param], SWEEP_PARAMS[param2]
    if column == column2:
        raise ConfigError(f"grid sweep needs two different parameters, got '{param}' twice")
    trainer = trainer or Trainer(verbose=False)
    cells = [(a, b) for a in values for b in values2]

    def run_cell(cell):
        a, b = cell
        cfg = _sweep_config(param2, b, _sweep_config(param, a, base_cfg))
        return _final_psnr(cfg, dataset, epochs, trainer, seed, f"{column}={a}, {column2}={b}")

    psnrs = _run_cells(cells, run_cell, workers, f"Sweeping {column} × {column2}", trainer.verbose)
    return pd.DataFrame({column: [a for a, _ in cells], column2: [b for _, b in cells], "psnr": psnrs})
