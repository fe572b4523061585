"""
ViSIR / ViFOR super-resolution networks and coordinate-MLP baselines.

All four architectures share one layout: a patch-embedding ViT encoder turns
the LR grid into a lattice of tokens, and a coordinate-conditioned implicit
head maps every HR pixel ([x, y] plus bilinearly sampled token features) to a
value. ViSIR uses sine activations throughout; ViFOR filters the encoder
feed-forward pre-activations and the two head outputs with FOREN masks.
The baselines skip the encoder and see [x, y, LR sample] only.
"""

import struct
from collections import OrderedDict
from dataclasses import dataclass, fields
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from utils.errors import ConfigError, DataError, DimensionError, FormatError
from utils.grids import bilinear_matrix
from utils.ndtensor import (Tensor, blend, concat, layer_norm, matmul, no_grad, relu, sin_act,
                            softmax)
from utils.spectral import HIGH_PASS, LOW_PASS, foren_apply, make_mask

ARCHS = ("visir", "vifor", "mlp_relu", "siren_only")
OMEGA0_PRESETS = {"ablation": 30.0, "sweep": 20.0}

CHECKPOINT_MAGIC = b"VFR1"


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; lr_height/lr_width fix the token lattice."""

    arch: str = "vifor"
    lr_height: int = 16
    lr_width: int = 16
    patch_size: int = 8
    embed_dim: int = 64
    heads: int = 4
    layers: int = 4
    omega0: float = 30.0
    siren_hidden_layers: int = 2
    f_low: float = 0.3
    f_high: float = 0.3
    fusion_alpha: float = 0.5
    scale_factor: int = 4
    alpha_learnable: bool = False
    foren_in_encoder: bool = True
    share_encoder: bool = True
    ff_mult: int = 2
    bilinear_skip: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.arch not in ARCHS:
            raise ConfigError(f"unknown architecture '{self.arch}', expected one of {ARCHS}")
        for name in ("lr_height", "lr_width", "patch_size", "embed_dim", "heads", "layers",
                     "siren_hidden_layers", "scale_factor", "ff_mult"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.embed_dim % self.heads:
            raise ConfigError(f"embed_dim {self.embed_dim} is not divisible by heads {self.heads}")
        if self.arch in ("visir", "vifor") and (self.lr_height % self.patch_size or self.lr_width % self.patch_size):
            raise ConfigError(f"patch_size {self.patch_size} does not divide LR grid "
                              f"{self.lr_height}×{self.lr_width}")
        if self.omega0 <= 0:
            raise ConfigError(f"omega0 must be positive, got {self.omega0}")
        if not 0.0 < self.f_low <= 1.0 or not 0.0 < self.f_high <= 1.0:
            raise ConfigError(f"cutoffs must lie in (0, 1], got f_low={self.f_low}, f_high={self.f_high}")
        if not 0.0 <= self.fusion_alpha <= 1.0:
            raise ConfigError(f"fusion_alpha must lie in [0, 1], got {self.fusion_alpha}")

    @property
    def lattice(self) -> Tuple[int, int]:
        return self.lr_height // self.patch_size, self.lr_width // self.patch_size

    @property
    def n_tokens(self) -> int:
        rows, cols = self.lattice
        return rows * cols

    @property
    def hr_shape(self) -> Tuple[int, int]:
        return self.lr_height * self.scale_factor, self.lr_width * self.scale_factor

    @property
    def ff_dim(self) -> int:
        return self.ff_mult * self.embed_dim

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name}={str(value).lower() if isinstance(value, bool) else repr(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ModelConfig":
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, raw = line.partition("=")
            if key not in types:
                raise ConfigError(f"unknown model config key '{key}'")
            kind = types[key]
            if kind in (bool, "bool"):
                values[key] = raw == "true"
            elif kind in (int, "int"):
                values[key] = int(raw)
            elif kind in (float, "float"):
                values[key] = float(raw)
            else:
                values[key] = raw.strip("'\"")
        return cls(**values)


@dataclass
class TokenSequence:
    tokens: Tensor
    rows: int
    cols: int

    def __post_init__(self):
        if self.tokens.shape[0] != self.rows * self.cols:
            raise DimensionError(f"{self.tokens.shape[0]} tokens do not fill a {self.rows}×{self.cols} lattice")


# parameter layout

def _head_specs(prefix: str, in_dim: int, width: int, hidden: int, out_bias: bool = True,
                bandwidth: float = None):
    specs = []
    fan_in = in_dim
    for k in range(hidden):
        init = ("first", bandwidth) if k == 0 else "siren"
        specs.append((f"{prefix}.hidden{k}.weight", (fan_in, width), init))
        specs.append((f"{prefix}.hidden{k}.bias", (width,), ("bias", fan_in)))
        fan_in = width
    specs.append((f"{prefix}.out.weight", (width, 1), "linear"))
    if out_bias:
        specs.append((f"{prefix}.out.bias", (1,), ("bias", width)))
    return specs


def _encoder_specs(prefix: str, cfg: ModelConfig):
    d, f = cfg.embed_dim, cfg.ff_dim
    specs = []
    for l in range(cfg.layers):
        b = f"{prefix}.block{l}"
        specs += [(f"{b}.ln1.gain", (d,), "ones"), (f"{b}.ln1.bias", (d,), "zeros")]
        for proj in ("q", "k", "v", "o"):
            specs += [(f"{b}.attn.w{proj}", (d, d), "linear"), (f"{b}.attn.b{proj}", (d,), ("bias", d))]
        specs += [(f"{b}.ln2.gain", (d,), "ones"), (f"{b}.ln2.bias", (d,), "zeros")]
        specs += [(f"{b}.ff.w1", (d, f), "siren"), (f"{b}.ff.b1", (f,), ("bias", d)),
                  (f"{b}.ff.w2", (f, d), "linear"), (f"{b}.ff.b2", (d,), ("bias", f))]
    specs += [(f"{prefix}.ln.gain", (d,), "ones"), (f"{prefix}.ln.bias", (d,), "zeros")]
    return specs


def baseline_width(cfg: ModelConfig) -> int:
    """
    Hidden width of the coordinate-MLP baselines.

    Chosen so the baseline's parameter count is closest to the ViSIR head's,
    which keeps the spectral-bias comparison at matched capacity.
    """
    target = _head_count(cfg.embed_dim + 2, cfg.embed_dim, cfg.siren_hidden_layers, True)
    width = 1
    while _head_count(3, width, cfg.siren_hidden_layers, True) < target:
        width += 1
    if width > 1 and (target - _head_count(3, width - 1, cfg.siren_hidden_layers, True)
                      < _head_count(3, width, cfg.siren_hidden_layers, True) - target):
        width -= 1
    return width


def _head_count(in_dim: int, width: int, hidden: int, out_bias: bool) -> int:
    return in_dim * width + width + (hidden - 1) * (width * width + width) + width + (1 if out_bias else 0)


def parameter_specs(cfg: ModelConfig) -> List[Tuple[str, Tuple[int, ...], object]]:
    """Ordered (name, shape, init) list; the order is the checkpoint and initialization order."""
    d, p = cfg.embed_dim, cfg.patch_size
    if cfg.arch in ("mlp_relu", "siren_only"):
        specs = _head_specs("mlp", 3, baseline_width(cfg), cfg.siren_hidden_layers,
                            bandwidth=nyquist_bandwidth(cfg))
        if cfg.arch == "mlp_relu":
            specs = [(n, s, "linear" if _is_sine_init(init) else init) for n, s, init in specs]
        return specs

    specs = [("patch.weight", (p * p, d), "linear"), ("patch.bias", (d,), ("bias", p * p)),
             ("pos_embed", (cfg.n_tokens, d), "zeros")]
    if cfg.arch == "visir":
        specs += _encoder_specs("encoder", cfg)
        specs += _head_specs("head", d + 2, d, cfg.siren_hidden_layers)
        return specs

    if cfg.share_encoder:
        specs += _encoder_specs("encoder", cfg)
    else:
        specs += _encoder_specs("encoder_low", cfg) + _encoder_specs("encoder_high", cfg)
    specs += _head_specs("head_low", d + 2, d, cfg.siren_hidden_layers)
    # a high-pass output has no DC component, so an output bias would never be trained
    specs += _head_specs("head_high", d + 2, d, cfg.siren_hidden_layers, out_bias=False,
                         bandwidth=nyquist_bandwidth(cfg))
    if cfg.alpha_learnable:
        specs.append(("fusion.alpha", (1,), "alpha"))
    return specs


def parameter_count(cfg: ModelConfig) -> int:
    """
    Closed-form parameter count.

    embed  = P²D + D + ND
    block  = 4D + 4(D² + D) + 2DF + F + D,   F = ff_mult·D
    encoder = L·block + 2D
    head(i, w, bias) = iw + w + (K−1)(w² + w) + w + bias
    visir  = embed + encoder + head(D+2, D, 1)
    vifor  = embed + encoder·(1 or 2) + head(D+2, D, 1) + head(D+2, D, 0) + learnable α
    baselines = head(3, W, 1) with W = baseline_width
    """
    d, f, k = cfg.embed_dim, cfg.ff_dim, cfg.siren_hidden_layers
    if cfg.arch in ("mlp_relu", "siren_only"):
        return _head_count(3, baseline_width(cfg), k, True)
    embed = cfg.patch_size ** 2 * d + d + cfg.n_tokens * d
    block = 4 * d + 4 * (d * d + d) + 2 * d * f + f + d
    encoder = cfg.layers * block + 2 * d
    if cfg.arch == "visir":
        return embed + encoder + _head_count(d + 2, d, k, True)
    encoders = 1 if cfg.share_encoder else 2
    return (embed + encoders * encoder + _head_count(d + 2, d, k, True)
            + _head_count(d + 2, d, k, False) + (1 if cfg.alpha_learnable else 0))


def nyquist_bandwidth(cfg: ModelConfig) -> float:
    """Angular frequency of the HR Nyquist rate in [-1, 1] pixel coordinates (π·max(H, W)/2)."""
    return float(np.pi * max(cfg.hr_shape) / 2.0)


def first_layer_bounds(fan_in: int, omega0: float, bandwidth: float = None) -> Tuple[float, float]:
    """
    Init bounds (coordinate rows, feature rows) of a head's first sine layer.

    Coordinate rows follow the first-layer rule U(−1/fan_in, 1/fan_in) unless a
    bandwidth is given; then they span frequencies up to that bandwidth after
    the ω₀ factor. Feature rows keep the hidden-layer bound √(6/fan_in)/ω₀.
    """
    coords = 1.0 / fan_in if bandwidth is None else bandwidth / omega0
    return coords, np.sqrt(6.0 / fan_in) / omega0


def _is_sine_init(init) -> bool:
    return init == "siren" or (isinstance(init, tuple) and init[0] == "first")


def _init_array(rng, shape, init, cfg: ModelConfig) -> np.ndarray:
    if init == "zeros":
        return np.zeros(shape)
    if init == "ones":
        return np.ones(shape)
    if init == "alpha":
        return np.full(shape, cfg.fusion_alpha)
    if isinstance(init, tuple) and init[0] == "first":
        coords, features = first_layer_bounds(shape[0], cfg.omega0, init[1])
        bound = np.full((shape[0], 1), features)
        bound[:2] = coords  # rows 0 and 1 take [x, y]
        return rng.uniform(-1.0, 1.0, size=shape) * bound
    if isinstance(init, tuple):  # ("bias", fan_in)
        bound = np.sqrt(1.0 / init[1])
        return rng.uniform(-bound, bound, size=shape)
    fan_in = shape[0]
    if init == "siren":
        bound = np.sqrt(6.0 / fan_in) / cfg.omega0
    else:
        bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Model:
    """Network parameters plus the config they were built for."""

    def __init__(self, config: ModelConfig, parameters: "OrderedDict[str, Tensor]"):
        self.config = config
        self.parameters = parameters

    @classmethod
    def build(cls, config: ModelConfig, seed: int = 0) -> "Model":
        rng = np.random.default_rng(seed)
        params = OrderedDict()
        for name, shape, init in parameter_specs(config):
            params[name] = Tensor(_init_array(rng, shape, init, config), requires_grad=True)
        return cls(config, params)

    def __getitem__(self, name: str) -> Tensor:
        return self.parameters[name]

    @property
    def positional(self) -> Tensor:
        return self.parameters["pos_embed"]

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters.values()))

    def state(self) -> Dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.parameters.items()}

    def clip_alpha(self):
        """Keep a learnable fusion weight inside [0, 1]."""
        alpha = self.parameters.get("fusion.alpha")
        if alpha is not None:
            np.clip(alpha.data, 0.0, 1.0, out=alpha.data)

    def __call__(self, lr_img):
        return forward(self, lr_img)


# building blocks

@lru_cache(maxsize=32)
def _pixel_coordinates(height: int, width: int) -> np.ndarray:
    """(H·W)×2 array of [x, y] pixel-center coordinates in [-1, 1], row-major."""
    ys = (2.0 * np.arange(height) + 1.0) / height - 1.0
    xs = (2.0 * np.arange(width) + 1.0) / width - 1.0
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    coords = np.stack([grid_x.ravel(), grid_y.ravel()], axis=1)
    coords.setflags(write=False)
    return coords


@lru_cache(maxsize=32)
def _sampling_matrix(src_h: int, src_w: int, dst_h: int, dst_w: int) -> np.ndarray:
    """(dst_h·dst_w)×(src_h·src_w) bilinear interpolation matrix."""
    m = np.kron(bilinear_matrix(src_h, dst_h), bilinear_matrix(src_w, dst_w))
    m.setflags(write=False)
    return m


def _linear(x: Tensor, model: Model, prefix: str, w: str = "weight", b: str = "bias") -> Tensor:
    return matmul(x, model[f"{prefix}.{w}"]) + model[f"{prefix}.{b}"]


def patch_embed(img, model: Model) -> TokenSequence:
    """
    Split the LR grid into non-overlapping P×P patches and embed them.

    Token i = W_p·vec(patch_i) + b_p + E_i, tokens in row-major lattice order.
    """
    cfg = model.config
    img = img if isinstance(img, Tensor) else Tensor(img)
    h, w = img.shape
    p = cfg.patch_size
    if h % p or w % p:
        raise ConfigError(f"image {h}×{w} is not divisible by patch size {p}")
    rows, cols = h // p, w // p
    if rows * cols != cfg.n_tokens:
        raise DimensionError(f"image {h}×{w} gives {rows * cols} patches, model expects {cfg.n_tokens}")
    patches = img.reshape(rows, p, cols, p).transpose(0, 2, 1, 3).reshape(rows * cols, p * p)
    tokens = _linear(patches, model, "patch") + model.positional
    return TokenSequence(tokens, rows, cols)


def multi_head_attention(x: Tensor, model: Model, prefix: str) -> Tensor:
    heads = model.config.heads
    n, d = x.shape
    dh = d // heads

    def split(t):
        return t.reshape(n, heads, dh).transpose(1, 0, 2)

    q = split(_linear(x, model, prefix, "wq", "bq"))
    k = split(_linear(x, model, prefix, "wk", "bk"))
    v = split(_linear(x, model, prefix, "wv", "bv"))
    scores = matmul(q, k.transpose(0, 2, 1)) * (1.0 / np.sqrt(dh))
    context = matmul(softmax(scores, axis=-1), v)
    merged = context.transpose(1, 0, 2).reshape(n, d)
    return _linear(merged, model, prefix, "wo", "bo")


def _fusion_alpha(model: Model):
    if model.config.alpha_learnable:
        return model["fusion.alpha"]
    return model.config.fusion_alpha


def _feed_forward(x: Tensor, model: Model, prefix: str, rows: int, cols: int) -> Tensor:
    """
    Token-wise feed-forward W2·act(W1·x + b1) + b2.

    ViSIR uses act = sin(ω₀·). With FOREN in the ViFOR encoder the
    pre-activations, laid out on the patch lattice, are split at f_l into
    complementary low and high parts and act = sin(ω₀·low) + sin(ω₀·high).
    The split does not depend on α, so the fused output stays affine in α.
    """
    cfg = model.config
    hidden = _linear(x, model, prefix, "w1", "b1")
    if cfg.arch == "vifor" and cfg.foren_in_encoder:
        f = hidden.shape[1]
        lattice = hidden.transpose(1, 0).reshape(f, rows, cols)
        low = foren_apply(lattice, make_mask(LOW_PASS, cfg.f_low, rows, cols))
        high = foren_apply(lattice, make_mask(HIGH_PASS, cfg.f_low, rows, cols))
        act = sin_act(low, cfg.omega0) + sin_act(high, cfg.omega0)
        return _linear(act.reshape(f, rows * cols).transpose(1, 0), model, prefix, "w2", "b2")
    return _linear(sin_act(hidden, cfg.omega0), model, prefix, "w2", "b2")


def encoder_forward(seq: TokenSequence, model: Model, prefix: str = "encoder") -> TokenSequence:
    """
    L pre-norm transformer blocks followed by a final layer norm.

    Each block: x + MHSA(LN(x)), then x + FF(LN(x)); the feed-forward
    activation is sin(ω₀·) and, in ViFOR, acts on lattice-filtered inputs.
    """
    cfg = model.config
    x = seq.tokens
    if x.shape[1] != cfg.embed_dim:
        raise DimensionError(f"token width {x.shape[1]} does not match embed_dim {cfg.embed_dim}")
    for l in range(cfg.layers):
        b = f"{prefix}.block{l}"
        x = x + multi_head_attention(layer_norm(x, model[f"{b}.ln1.gain"], model[f"{b}.ln1.bias"]),
                                     model, f"{b}.attn")
        x = x + _feed_forward(layer_norm(x, model[f"{b}.ln2.gain"], model[f"{b}.ln2.bias"]),
                              model, f"{b}.ff", seq.rows, seq.cols)
    x = layer_norm(x, model[f"{prefix}.ln.gain"], model[f"{prefix}.ln.bias"])
    return TokenSequence(x, seq.rows, seq.cols)


def _implicit_head(inputs: Tensor, model: Model, prefix: str, activation) -> Tensor:
    z = inputs
    for k in range(model.config.siren_hidden_layers):
        z = activation(_linear(z, model, f"{prefix}.hidden{k}"))
    out = matmul(z, model[f"{prefix}.out.weight"])
    bias = f"{prefix}.out.bias"
    return out + model[bias] if bias in model.parameters else out


def _decoder_inputs(feats: TokenSequence, target_dims: Tuple[int, int]) -> Tensor:
    ho, wo = target_dims
    sampled = matmul(Tensor(_sampling_matrix(feats.rows, feats.cols, ho, wo)), feats.tokens)
    return concat([Tensor(_pixel_coordinates(ho, wo)), sampled], axis=1)


def _check_target(model: Model, target_dims) -> Tuple[int, int]:
    target_dims = tuple(target_dims)
    if target_dims != model.config.hr_shape:
        raise DimensionError(f"target {list(target_dims)} is not LR × {model.config.scale_factor} "
                             f"= {list(model.config.hr_shape)}")
    return target_dims


def visir_decode(feats: TokenSequence, target_dims, model: Model, prefix: str = "head") -> Tensor:
    """SIREN head over [x, y, bilinear token features] for every HR pixel."""
    ho, wo = _check_target(model, target_dims)
    omega0 = model.config.omega0
    out = _implicit_head(_decoder_inputs(feats, (ho, wo)), model, prefix, lambda t: sin_act(t, omega0))
    return out.reshape(ho, wo)


def vifor_decode(feats: TokenSequence, target_dims, model: Model, feats_high: TokenSequence = None) -> Tensor:
    """
    Two coordinate heads whose output maps pass a low-pass (f_l) and a
    high-pass (f_h) FOREN filter, fused as α·low + (1−α)·high.
    """
    cfg = model.config
    ho, wo = _check_target(model, target_dims)
    low_map = visir_decode(feats, (ho, wo), model, "head_low")
    high_map = visir_decode(feats_high or feats, (ho, wo), model, "head_high")
    low = foren_apply(low_map, make_mask(LOW_PASS, cfg.f_low, ho, wo))
    high = foren_apply(high_map, make_mask(HIGH_PASS, cfg.f_high, ho, wo))
    return blend(low, high, _fusion_alpha(model))


def _lr_sample(lr: Tensor, cfg: ModelConfig) -> Tensor:
    """Bilinear upsampling of the LR grid as an (H·W)×1 column."""
    h, w = lr.shape
    ho, wo = cfg.hr_shape
    return matmul(Tensor(_sampling_matrix(h, w, ho, wo)), lr.reshape(h * w, 1))


def _baseline_forward(lr: Tensor, model: Model) -> Tensor:
    cfg = model.config
    ho, wo = cfg.hr_shape
    inputs = concat([Tensor(_pixel_coordinates(ho, wo)), _lr_sample(lr, cfg)], axis=1)
    if cfg.arch == "mlp_relu":
        activation = relu
    else:
        activation = lambda t: sin_act(t, cfg.omega0)
    return _implicit_head(inputs, model, "mlp", activation).reshape(ho, wo)


def forward(model: Model, lr_img) -> Tensor:
    """
    Super-resolve one LR grid: I_LR (h×w) → I_SR (h·s × w·s).

    Args:
        model: Model to run
        lr_img: LR grid as array or Tensor with the config's LR dims

    Returns:
        HR Tensor, recorded on the current graph when parameters require gradients
    """
    cfg = model.config
    lr = lr_img if isinstance(lr_img, Tensor) else Tensor(np.asarray(lr_img, dtype=np.float64))
    if lr.shape != (cfg.lr_height, cfg.lr_width):
        raise DimensionError(f"LR input {list(lr.shape)} does not match model LR dims "
                             f"{[cfg.lr_height, cfg.lr_width]}")
    if cfg.arch in ("mlp_relu", "siren_only"):
        return _baseline_forward(lr, model)
    if cfg.arch not in ARCHS:
        raise ConfigError(f"unknown architecture '{cfg.arch}'")
    tokens = patch_embed(lr, model)
    if cfg.arch == "visir":
        out = visir_decode(encoder_forward(tokens, model), cfg.hr_shape, model)
    elif cfg.share_encoder:
        out = vifor_decode(encoder_forward(tokens, model), cfg.hr_shape, model)
    else:
        out = vifor_decode(encoder_forward(tokens, model, "encoder_low"), cfg.hr_shape, model,
                           feats_high=encoder_forward(tokens, model, "encoder_high"))
    if cfg.bilinear_skip:
        # the decoder predicts the residual over bilinear upsampling
        out = out + _lr_sample(lr, cfg).reshape(*cfg.hr_shape)
    return out


def super_resolve(model: Model, lr_img) -> np.ndarray:
    """Inference without recording a graph."""
    with no_grad():
        return forward(model, lr_img).data.copy()


# VFR1 checkpoints

def checkpoint_bytes(model: Model) -> bytes:
    config_text = model.config.to_text().encode("utf-8")
    out = [CHECKPOINT_MAGIC, struct.pack("<I", len(config_text)), config_text,
           struct.pack("<I", len(model.parameters))]
    for name, tensor in model.parameters.items():
        encoded = name.encode("utf-8")
        out.append(struct.pack("<I", len(encoded)))
        out.append(encoded)
        out.append(struct.pack("<I", tensor.ndim))
        out.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        out.append(tensor.data.astype("<f8").tobytes())
    return b"".join(out)


def model_from_bytes(blob: bytes) -> Model:
    offset = 0

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise FormatError(f"truncated checkpoint while reading {what}: "
                              f"expected {n} bytes, {len(blob) - offset} left", offset)
        chunk = blob[offset:offset + n]
        offset += n
        return chunk

    if take(4, "magic") != CHECKPOINT_MAGIC:
        raise FormatError(f"bad checkpoint magic, expected {CHECKPOINT_MAGIC!r}", 0)
    (text_len,) = struct.unpack("<I", take(4, "config length"))
    try:
        config = ModelConfig.from_text(take(text_len, "config").decode("utf-8"))
    except (ConfigError, ValueError) as e:
        raise FormatError(f"invalid checkpoint config: {e}", 8) from None
    (count,) = struct.unpack("<I", take(4, "parameter count"))
    params = OrderedDict()
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        name = take(name_len, "name").decode("utf-8")
        (rank,) = struct.unpack("<I", take(4, "rank"))
        shape = struct.unpack(f"<{rank}I", take(4 * rank, "dims"))
        n = int(np.prod(shape)) if rank else 1
        values = np.frombuffer(take(8 * n, f"values of {name}"), dtype="<f8").reshape(shape)
        params[name] = Tensor(values.astype(np.float64), requires_grad=True)
    if offset != len(blob):
        raise FormatError(f"{len(blob) - offset} trailing bytes after the last parameter", offset)
    expected = [name for name, _, _ in parameter_specs(config)]
    if list(params) != expected:
        raise FormatError("checkpoint parameters do not match the architecture in its config")
    return Model(config, params)


def save_checkpoint(model: Model, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(checkpoint_bytes(model))
    return path


def load_checkpoint(path) -> Model:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    try:
        return model_from_bytes(path.read_bytes())
    except FormatError as e:
        raise FormatError(f"{path}: {e}") from None
