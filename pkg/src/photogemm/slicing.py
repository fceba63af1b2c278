"""Split mantissa magnitudes into narrow unsigned slices and recombine products.

A ``b``-bit magnitude is cut into ``s`` digits of ``d`` bits each, most
significant digit first.  Two sliced operands multiply as ``s * s`` slice
products which are shifted by their digit weights and summed.

When ``s * d > b`` there are spare bit positions.  With ``padding="low"`` (the
default) the magnitude is left-justified, so the spare bits sit below the least
significant digit and every digit is full width; the reconstructed sum is then
divided by ``2**(2 * pad)``.  With ``padding="high"`` the spare bits are the top
bits of the most significant digit and no rescaling is needed.

Low padding keeps the value of one slice-product unit the same for every
mantissa width, so additive noise on the slice products has the same size in
the value domain whether ``b`` is a multiple of ``d`` or not.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidConfig, InvalidValue

MAX_SLICE_WIDTH = 6
PADDING_MODES = ("low", "high")


@dataclass(frozen=True)
class SliceConfig:
    slice_width: int = 5
    num_slices: int = 2
    mantissa_bits: Optional[int] = None  # defaults to slice_width * num_slices
    padding: str = "low"

    def __post_init__(self):
        if not 1 <= self.slice_width <= MAX_SLICE_WIDTH:
            raise InvalidConfig(f"slice width must be in [1, {MAX_SLICE_WIDTH}], got {self.slice_width}")
        if self.num_slices < 1:
            raise InvalidConfig(f"num_slices must be >= 1, got {self.num_slices}")
        if self.padding not in PADDING_MODES:
            raise InvalidConfig(f"padding must be one of {PADDING_MODES}, got {self.padding!r}")
        b = self.bits
        if b < 1 or b > self.capacity:
            raise InvalidConfig(
                f"{self.num_slices} slices of {self.slice_width} bits cannot hold {b}-bit magnitudes"
            )

    @classmethod
    def for_mantissa(cls, b: int, d: int = 5, padding: str = "low") -> "SliceConfig":
        """The minimal config for ``b``-bit magnitudes: ``s = ceil(b / d)``."""
        if b < 1:
            raise InvalidConfig(f"mantissa width must be >= 1, got {b}")
        return cls(d, math.ceil(b / d), b, padding)

    @property
    def bits(self) -> int:
        return self.capacity if self.mantissa_bits is None else self.mantissa_bits

    @property
    def capacity(self) -> int:
        return self.slice_width * self.num_slices

    @property
    def pad(self) -> int:
        """Number of low spare bits (zero under high padding)."""
        return self.capacity - self.bits if self.padding == "low" else 0

    @property
    def max_slice(self) -> int:
        return (1 << self.slice_width) - 1


@dataclass(frozen=True)
class SlicedOperand:
    sign: int
    slices: tuple[int, ...]

    def magnitude(self, cfg: SliceConfig) -> int:
        d = cfg.slice_width
        total = 0
        for digit in self.slices:
            total = (total << d) | digit
        return total >> cfg.pad


def slice_weights(cfg: SliceConfig) -> np.ndarray:
    """``s x s`` integer weights ``2**(d * (2s - 2 - u - v))`` of each slice product."""
    s, d = cfg.num_slices, cfg.slice_width
    u = np.arange(s)
    return np.left_shift(1, d * (2 * s - 2 - u[:, None] - u[None, :])).astype(np.int64)


def slice_mantissa(magnitude: int, b: int, cfg: SliceConfig) -> SlicedOperand:
    """Base-``2**d`` digits of ``magnitude``, most significant first."""
    if cfg.num_slices * cfg.slice_width < b:
        raise InvalidConfig(f"{cfg.num_slices} x {cfg.slice_width}-bit slices cannot hold {b} bits")
    magnitude = int(magnitude)
    if not 0 <= magnitude < (1 << b):
        raise InvalidValue(f"magnitude {magnitude} does not fit in {b} bits")
    cfg = _with_bits(cfg, b)
    v = magnitude << cfg.pad
    d, s = cfg.slice_width, cfg.num_slices
    digits = tuple((v >> (d * (s - 1 - j))) & cfg.max_slice for j in range(s))
    return SlicedOperand(1, digits)


def slice_array(magnitudes, cfg: SliceConfig) -> np.ndarray:
    """Vectorised :func:`slice_mantissa`: appends a trailing axis of length ``s``."""
    m = np.asarray(magnitudes, dtype=np.int64)
    if m.size and (m.min() < 0 or m.max() >= (1 << cfg.bits)):
        raise InvalidValue(f"magnitudes must lie in [0, 2**{cfg.bits})")
    v = m << cfg.pad
    d, s = cfg.slice_width, cfg.num_slices
    shifts = d * (s - 1 - np.arange(s))
    return (v[..., None] >> shifts) & cfg.max_slice


def reconstruct_product(partials, cfg: SliceConfig) -> float:
    """Shift-and-add ``s x s`` slice products into one magnitude product.

    ``partials[i][j]`` must be ``slice_i(x) * slice_j(y)`` (possibly noisy).
    Integer partials give an exact integer result.
    """
    p = np.asarray(partials)
    s = cfg.num_slices
    if p.shape != (s, s):
        raise InvalidValue(f"expected {s}x{s} partials, got shape {p.shape}")
    if np.issubdtype(p.dtype, np.integer):
        total = sum(int(p[i, j]) << (cfg.slice_width * (2 * s - 2 - i - j)) for i in range(s) for j in range(s))
        return total >> (2 * cfg.pad)
    return float(reconstruct_array(p, cfg))


def reconstruct_array(partials, cfg: SliceConfig):
    """Vectorised reconstruction over the trailing ``(s, s)`` axes."""
    p = np.asarray(partials)
    w = slice_weights(cfg)
    if np.issubdtype(p.dtype, np.integer):
        total = np.einsum("...uv,uv->...", p.astype(np.int64), w)
        return total >> (2 * cfg.pad)
    total = np.einsum("...uv,uv->...", p.astype(np.float64), w.astype(np.float64))
    return np.ldexp(total, -2 * cfg.pad)


def noise_gain(cfg: SliceConfig) -> tuple[float, float]:
    """``(sum w, sqrt(sum w**2))`` in the magnitude domain.

    An additive error ``mu + sigma * z`` on every slice product shows up in the
    reconstructed product with mean ``mu * sum_w`` and standard deviation
    ``sigma * rss_w``.
    """
    w = slice_weights(cfg).astype(np.float64)
    scale = 2.0 ** (-2 * cfg.pad)
    return float(w.sum() * scale), float(np.sqrt((w**2).sum()) * scale)


def _with_bits(cfg: SliceConfig, b: int) -> SliceConfig:
    if cfg.bits == b:
        return cfg
    return SliceConfig(cfg.slice_width, cfg.num_slices, b, cfg.padding)
