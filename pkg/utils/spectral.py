"""
2D discrete Fourier transforms, ideal radial masks and the FOREN filter.

Transforms act on the last two axes of an array, so a stack of feature maps
(..., H, W) is filtered in one call. Power-of-two axes use an iterative
radix-2 Cooley-Tukey pass; other sizes use the direct O(N²) transform.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from utils.errors import ConfigError, DimensionError, SymmetryError
from utils.ndtensor import Tensor, record_op

LOW_PASS = "low_pass"
HIGH_PASS = "high_pass"
MASK_KINDS = (LOW_PASS, HIGH_PASS)

# imaginary residue above this means the spectrum was not conjugate-symmetric
RESIDUE_LIMIT = 1e-6


@dataclass(frozen=True)
class ComplexGrid:
    """Spectrum of an H×W grid, stored as separate real and imaginary planes."""

    height: int
    width: int
    re: np.ndarray
    im: np.ndarray

    @classmethod
    def from_complex(cls, values: np.ndarray) -> "ComplexGrid":
        values = np.asarray(values)
        return cls(values.shape[0], values.shape[1], values.real.copy(), values.imag.copy())

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.re, self.im)


@dataclass(frozen=True)
class FreqMask:
    """Ideal binary filter in frequency space."""

    kind: str
    cutoff: float
    height: int
    width: int
    mask: np.ndarray

    @property
    def shape(self):
        return (self.height, self.width)


@dataclass(frozen=True)
class BandSpectrum:
    """
    Energy of a grid per radial annulus.

    energy[i] is Σ|X|²/(HW) over the bins of band i, so the bands add up to
    Σx² (Parseval). mean_energy[i] is the same quantity averaged per bin.
    """

    edges: np.ndarray
    energy: np.ndarray
    mean_energy: np.ndarray
    counts: np.ndarray

    @property
    def n_bands(self) -> int:
        return len(self.energy)

    @property
    def total(self) -> float:
        return float(np.sum(self.energy))


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _bit_reverse_permutation(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _fft_last_axis(x: np.ndarray, inverse: bool) -> np.ndarray:
    """Unnormalized DFT along the last axis (sign +1 for the inverse)."""
    n = x.shape[-1]
    sign = 1.0 if inverse else -1.0
    x = np.asarray(x, dtype=np.complex128)
    if n == 1:
        return x.copy()
    if not is_power_of_two(n):
        k = np.arange(n)
        basis = np.exp(sign * 2j * np.pi * np.outer(k, k) / n)
        return x @ basis

    lead = x.shape[:-1]
    x = x[..., _bit_reverse_permutation(n)]
    half = 1
    while half < n:
        twiddle = np.exp(sign * 1j * np.pi * np.arange(half) / half)
        blocks = x.reshape(lead + (n // (2 * half), 2, half))
        even = blocks[..., 0, :]
        odd = blocks[..., 1, :] * twiddle
        x = np.concatenate([even + odd, even - odd], axis=-1).reshape(lead + (n,))
        half *= 2
    return x


def fft2_array(x: np.ndarray) -> np.ndarray:
    """Unnormalized forward DFT over the last two axes."""
    rows_done = _fft_last_axis(x, inverse=False)
    return np.swapaxes(_fft_last_axis(np.swapaxes(rows_done, -1, -2), inverse=False), -1, -2)


def ifft2_array(spectrum: np.ndarray) -> np.ndarray:
    """Inverse DFT over the last two axes with the 1/(HW) factor; returns complex values."""
    h, w = spectrum.shape[-2:]
    rows_done = _fft_last_axis(spectrum, inverse=True)
    out = np.swapaxes(_fft_last_axis(np.swapaxes(rows_done, -1, -2), inverse=True), -1, -2)
    return out / (h * w)


def _real_part(values: np.ndarray) -> np.ndarray:
    residue = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if residue > RESIDUE_LIMIT:
        raise SymmetryError(f"inverse DFT left an imaginary residue of {residue:.3e}")
    return values.real.copy()


def dft2(x: np.ndarray) -> ComplexGrid:
    """
    Forward 2D DFT of a real grid (no normalization).

    Args:
        x: Real H×W grid, H, W ≥ 1

    Returns:
        ComplexGrid holding X[u, v] = Σ x[m, n]·exp(−2πi(um/H + vn/W))
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or min(x.shape) < 1:
        raise DimensionError(f"dft2 needs a non-empty 2D grid, got shape {list(x.shape)}")
    return ComplexGrid.from_complex(fft2_array(x))


def idft2(spectrum: ComplexGrid) -> np.ndarray:
    """
    Inverse of dft2; the imaginary part must vanish and is discarded.

    Raises:
        SymmetryError: residue above 1e-6 (the spectrum was not conjugate-symmetric)
    """
    return _real_part(ifft2_array(spectrum.to_complex()))


def dft2_bruteforce(x: np.ndarray) -> ComplexGrid:
    """Direct quadruple-sum DFT; reference for small grids only."""
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape
    m = np.arange(h)
    n = np.arange(w)
    row_phase = np.exp(-2j * np.pi * np.outer(m, m) / h)  # [u, m]
    col_phase = np.exp(-2j * np.pi * np.outer(n, n) / w)  # [v, n]
    kernel = row_phase[:, None, :, None] * col_phase[None, :, None, :]  # [u, v, m, n]
    return ComplexGrid.from_complex(np.einsum("uvmn,mn->uv", kernel, x))


def radial_frequency(height: int, width: int) -> np.ndarray:
    """
    Normalized radial frequency of every DFT bin.

    r = ‖(fu, fv)‖ / ‖(0.5, 0.5)‖ with fu, fv in cycles/sample, so the corner
    Nyquist bin has r = 1 exactly.
    """
    fu = np.fft.fftfreq(height)[:, None]
    fv = np.fft.fftfreq(width)[None, :]
    return np.sqrt(2.0 * (fu * fu + fv * fv))


def make_mask(kind: str, f_c: float, height: int, width: int) -> FreqMask:
    """
    Build an ideal low-pass or high-pass mask.

    Args:
        kind: 'low_pass' keeps r ≤ f_c, 'high_pass' keeps r > f_c
        f_c: Cutoff in (0, 1]
        height: Grid height
        width: Grid width

    Returns:
        FreqMask with a {0, 1} mask array
    """
    if kind not in MASK_KINDS:
        raise ConfigError(f"unknown mask kind '{kind}', expected one of {MASK_KINDS}")
    if not 0.0 < f_c <= 1.0:
        raise ConfigError(f"cutoff frequency must lie in (0, 1], got {f_c}")
    r = radial_frequency(height, width)
    passes = r <= f_c if kind == LOW_PASS else r > f_c
    return FreqMask(kind, float(f_c), height, width, passes.astype(np.float64))


def filter_array(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """idft2(dft2(x)·mask) over the last two axes of a real array."""
    return _real_part(ifft2_array(fft2_array(x) * mask))


def foren_apply(x: Union[np.ndarray, Tensor], mask: FreqMask):
    """
    FOREN filtering: 𝓕⁻¹(𝓕(x)·H).

    Accepts a plain array or a Tensor whose last two axes match the mask. For
    tensors the op is recorded; its backward applies the same mask to the
    incoming gradient (a real symmetric binary mask is self-adjoint).
    """
    shape = x.shape
    if tuple(shape[-2:]) != mask.shape:
        raise DimensionError(f"foren_apply: grid {list(shape[-2:])} does not match mask {list(mask.shape)}")
    if not isinstance(x, Tensor):
        return filter_array(np.asarray(x, dtype=np.float64), mask.mask)
    out = filter_array(x.data, mask.mask)
    return record_op(out, (x,), "foren", lambda g: (filter_array(g, mask.mask),),
                     {"kind": mask.kind, "cutoff": mask.cutoff})


def band_spectrum(x: np.ndarray, n_bands: int = 8) -> BandSpectrum:
    """
    Split the energy of a grid into equal-width radial bands on [0, 1].

    Band 0 is [0, e₁] and includes the DC bin; band i > 0 is (eᵢ, eᵢ₊₁].
    """
    if n_bands < 2:
        raise ConfigError(f"n_bands must be at least 2, got {n_bands}")
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape
    power = np.abs(fft2_array(x)) ** 2 / (h * w)
    r = radial_frequency(h, w)
    edges = np.linspace(0.0, 1.0, n_bands + 1)
    band = np.clip(np.ceil(r * n_bands) - 1, 0, n_bands - 1).astype(np.int64)
    energy = np.bincount(band.ravel(), weights=power.ravel(), minlength=n_bands)
    counts = np.bincount(band.ravel(), minlength=n_bands)
    mean_energy = np.divide(energy, counts, out=np.zeros(n_bands), where=counts > 0)
    return BandSpectrum(edges, energy, mean_energy, counts)
