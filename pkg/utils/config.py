"""
Run configuration: plain-text key=value files with documented defaults.

Precedence is command-line overrides > config file > defaults. FORENLAB_SEED
(from the environment or a .env file) replaces the default seed only.
"""

import os
from pathlib import Path
from typing import Dict, Iterable, Tuple

from utils.errors import ConfigError, DataError
from utils.grids import DatasetSpec, FULL_IMAGE
from utils.models import ModelConfig, OMEGA0_PRESETS
from utils.training import LossWeights, Trainer

SEED_ENV = "FORENLAB_SEED"

# key: (default, description)
DEFAULTS: Dict[str, Tuple[object, str]] = {
    # model
    'arch': ('vifor', 'visir | vifor | mlp_relu | siren_only'),
    'patch_size': (8, 'ViT patch size P (must divide the LR grid)'),
    'embed_dim': (64, 'token width D'),
    'heads': (4, 'attention heads H (must divide D)'),
    'layers': (4, 'transformer blocks L'),
    'omega0': (30.0, 'sine frequency, a number or a preset: ablation (30), sweep (20)'),
    'siren_hidden_layers': (2, 'hidden sine layers K in each coordinate head'),
    'f_low': (0.3, 'low-pass cutoff in (0, 1]'),
    'f_high': (0.3, 'high-pass cutoff in (0, 1]'),
    'fusion_alpha': (0.5, 'weight of the low-frequency branch'),
    'alpha_learnable': (False, 'train the fusion weight'),
    'foren_in_encoder': (True, 'filter the encoder feed-forward activations (vifor)'),
    'share_encoder': (True, 'one encoder for both branches (vifor)'),
    'ff_mult': (2, 'feed-forward width as a multiple of D'),
    'bilinear_skip': (True, 'visir/vifor decoders add their output to the bilinear upsampling'),
    'scale_factor': (4, 'upscaling factor s'),
    # loss and optimizer
    'lambda1': (1.0, 'weight of the pixel MSE term'),
    'lambda2': (0.1, 'weight of the Fourier magnitude term'),
    'base_lr': (1e-4, 'initial Adam learning rate'),
    'min_lr': (1e-6, 'learning rate at the end of the cosine schedule'),
    'beta1': (0.9, 'Adam first-moment decay'),
    'beta2': (0.999, 'Adam second-moment decay'),
    'adam_eps': (1e-8, 'Adam epsilon'),
    'epochs': (300, 'training epochs'),
    'batch_size': (0, 'samples per optimizer step, 0 = full batch'),
    # data
    'mode': (FULL_IMAGE, 'full_image | sub_image (eight tiles per field)'),
    'val_fraction': (0.25, 'share of samples held out for validation'),
    'n_fields': (16, 'synthetic fields written by gen'),
    'height': (64, 'synthetic HR height'),
    'width': (64, 'synthetic HR width'),
    'n_low': (6, 'low-band tones per synthetic field'),
    'n_high': (6, 'high-band tones per synthetic field'),
    'amp_high': (0.5, 'amplitude factor of the high-band tones'),
    'shared_high': (True, 'all fields share one set of high-band tones (terrain-locked detail)'),
    'interp': ('block_mean', 'LR construction: block_mean | bilinear'),
    'n_bands': (8, 'radial bands in spectrum reports'),
    # paths and run control
    'data_dir': ('data/synthetic', 'directory for generated grids'),
    'manifest': ('', 'dataset manifest, defaults to <data_dir>/manifest.txt'),
    'checkpoint': ('data/runs/model.vfr', 'VFR1 checkpoint path'),
    'report': ('data/runs/train_report.csv', 'training report CSV'),
    'output_format': ('csv', 'csv | xlsx | both'),
    'seed': (7, 'random seed for data, initialization and shuffling'),
    'workers': (1, 'parallel sweep cells'),
    'log_wall_time': (False, 'write measured seconds into reports'),
}

_TRUE = ('true', '1', 'yes', 'on')
_FALSE = ('false', '0', 'no', 'off')


def _coerce(key: str, raw, default):
    if not isinstance(raw, str):
        raw_text = str(raw)
    else:
        raw_text = raw.strip()
    if key == 'omega0' and raw_text in OMEGA0_PRESETS:
        return OMEGA0_PRESETS[raw_text]
    try:
        if isinstance(default, bool):
            if raw_text.lower() in _TRUE:
                return True
            if raw_text.lower() in _FALSE:
                return False
            raise ValueError(raw_text)
        if isinstance(default, int):
            return int(raw_text)
        if isinstance(default, float):
            return float(raw_text)
    except ValueError:
        raise ConfigError(f"invalid value '{raw_text}' for '{key}' "
                          f"(expected {type(default).__name__})") from None
    return raw_text


def parse_assignments(lines: Iterable[str], source: str = '<overrides>') -> Dict[str, str]:
    """Parse key=value lines; '#' starts a comment line."""
    values = {}
    for number, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        if '=' not in line:
            raise ConfigError(f"{source}:{number}: expected key=value, got '{line}'")
        key, _, raw = line.partition('=')
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{number}: unknown config key '{key}'")
        values[key] = raw.strip()
    return values


class RunConfig:
    """Typed view over a fully resolved set of run settings."""

    def __init__(self, values: Dict[str, object] = None):
        self.values = {key: default for key, (default, _) in DEFAULTS.items()}
        for key, raw in (values or {}).items():
            self.set(key, raw)

    @classmethod
    def load(cls, path=None, overrides: Iterable[str] = (), use_env: bool = True) -> "RunConfig":
        """
        Resolve settings from defaults, FORENLAB_SEED, a config file and overrides.

        Args:
            path: Optional key=value config file
            overrides: key=value strings that win over the file
            use_env: Honor FORENLAB_SEED for the default seed

        Returns:
            Resolved RunConfig
        """
        config = cls()
        if use_env and os.getenv(SEED_ENV):
            config.set('seed', os.getenv(SEED_ENV))
        if path:
            path = Path(path)
            if not path.exists():
                raise DataError(f"config file not found: {path}")
            for key, raw in parse_assignments(path.read_text().splitlines(), str(path)).items():
                config.set(key, raw)
        for key, raw in parse_assignments(overrides).items():
            config.set(key, raw)
        return config

    def set(self, key: str, raw):
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key '{key}'")
        self.values[key] = _coerce(key, raw, DEFAULTS[key][0])

    def __getattr__(self, key: str):
        values = self.__dict__.get('values', {})
        if key in values:
            return values[key]
        raise AttributeError(key)

    def __eq__(self, other) -> bool:
        return isinstance(other, RunConfig) and self.values == other.values

    def with_overrides(self, **changes) -> "RunConfig":
        return RunConfig({**self.values, **changes})

    def to_text(self) -> str:
        lines = []
        for key, value in self.values.items():
            lines.append(f"{key}={str(value).lower() if isinstance(value, bool) else value}")
        return '\n'.join(lines) + '\n'

    @property
    def manifest_path(self) -> Path:
        return Path(self.manifest) if self.manifest else Path(self.data_dir) / 'manifest.txt'

    def model_config(self, lr_height: int, lr_width: int) -> ModelConfig:
        return ModelConfig(
            arch=self.arch, lr_height=lr_height, lr_width=lr_width, patch_size=self.patch_size,
            embed_dim=self.embed_dim, heads=self.heads, layers=self.layers, omega0=self.omega0,
            siren_hidden_layers=self.siren_hidden_layers, f_low=self.f_low, f_high=self.f_high,
            fusion_alpha=self.fusion_alpha, scale_factor=self.scale_factor,
            alpha_learnable=self.alpha_learnable, foren_in_encoder=self.foren_in_encoder,
            share_encoder=self.share_encoder, ff_mult=self.ff_mult, bilinear_skip=self.bilinear_skip,
        )

    def loss_weights(self) -> LossWeights:
        return LossWeights(self.lambda1, self.lambda2)

    def dataset_spec(self) -> DatasetSpec:
        return DatasetSpec(mode=self.mode, val_fraction=self.val_fraction, seed=self.seed)

    def optimizer_settings(self) -> Dict[str, object]:
        return {
            'base_lr': self.base_lr,
            'min_lr': self.min_lr,
            'beta1': self.beta1,
            'beta2': self.beta2,
            'adam_eps': self.adam_eps,
            'batch_size': self.batch_size,
            'log_wall_time': self.log_wall_time,
        }

    def trainer(self, verbose: bool = True) -> Trainer:
        return Trainer(weights=self.loss_weights(), verbose=verbose, **self.optimizer_settings())


def describe_defaults() -> str:
    """Markdown table of every key, its default and meaning."""
    rows = ['| key | default | meaning |', '|-----|---------|---------|']
    for key, (default, doc) in DEFAULTS.items():
        shown = str(default).lower() if isinstance(default, bool) else default
        rows.append(f"| `{key}` | `{shown}` | {doc} |")
    return '\n'.join(rows)
