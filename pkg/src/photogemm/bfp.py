"""Block floating point conversion.

A block is a run of reals that shares one power-of-two exponent.  Each element
keeps a sign and a ``b``-bit unsigned magnitude, so a block is stored as
``(shared_exponent, [(sign, magnitude), ...])`` and decodes to
``sign * magnitude * 2**shared_exponent``.

The shared exponent is chosen so that the largest magnitude in the block lands
in ``[2**(b-1), 2**b)`` before rounding.  When rounding pushes it to ``2**b``
the magnitude saturates at ``2**b - 1`` and the exponent is left alone.

Matrices are converted either row-wise (left GEMM operand, one block per row)
or column-wise (right operand, one block per column).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ExponentOverflow, InvalidConfig, InvalidValue

ROUNDING_MODES = ("nearest-even", "truncate")

#: Widest magnitude that still decodes exactly through binary64.
MAX_MANTISSA_BITS = 52


def exponent_range(exponent_bits: int) -> tuple[int, int]:
    """Signed range ``(lo, hi)`` of a two's-complement exponent field."""
    if exponent_bits < 1:
        raise InvalidConfig(f"exponent_bits must be >= 1, got {exponent_bits}")
    return -(1 << (exponent_bits - 1)), (1 << (exponent_bits - 1)) - 1


def _check_width(b: int) -> None:
    if not isinstance(b, (int, np.integer)) or b < 2:
        raise InvalidConfig(f"mantissa width b must be an integer >= 2, got {b!r}")
    if b > MAX_MANTISSA_BITS:
        raise InvalidConfig(f"mantissa width b must be <= {MAX_MANTISSA_BITS}, got {b}")


def _check_rounding(rounding: str) -> None:
    if rounding not in ROUNDING_MODES:
        raise InvalidConfig(f"rounding must be one of {ROUNDING_MODES}, got {rounding!r}")


def as_real_matrix(x, name: str = "matrix") -> np.ndarray:
    """Validate ``x`` as a dense, finite, non-empty 2-D binary64 matrix."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidValue(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidConfig(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidValue(f"{name} contains non-finite values")
    return arr


def quantize_blocks(
    x,
    b: int,
    axis: int = -1,
    rounding: str = "nearest-even",
    exponent_bits: int = 8,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised block conversion along ``axis``.

    Returns ``(exponents, mantissas)``.  ``exponents`` has ``axis`` removed,
    ``mantissas`` is a signed int64 array shaped like ``x`` holding
    ``sign * magnitude``.
    """
    _check_width(b)
    _check_rounding(rounding)
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise InvalidConfig("cannot convert an empty block")
    if not np.all(np.isfinite(x)):
        raise InvalidValue("block contains non-finite values")

    absmax = np.max(np.abs(x), axis=axis, keepdims=True)
    # frexp gives absmax = f * 2**e with f in [0.5, 1), so floor(log2) = e - 1
    _, e = np.frexp(absmax)
    exps = np.where(absmax > 0, e.astype(np.int64) - 1 - (b - 1), 0)

    lo, hi = exponent_range(exponent_bits)
    if exps.size and (exps.min() < lo or exps.max() > hi):
        bad = exps[(exps < lo) | (exps > hi)].ravel()[0]
        raise ExponentOverflow(
            f"shared exponent {int(bad)} outside the {exponent_bits}-bit range [{lo}, {hi}]"
        )

    scaled = np.abs(np.ldexp(x, -exps))
    mags = np.rint(scaled) if rounding == "nearest-even" else np.floor(scaled)
    np.minimum(mags, float((1 << b) - 1), out=mags)
    mant = mags.astype(np.int64)
    mant = np.where(x < 0, -mant, mant)
    return np.squeeze(exps, axis=axis), mant


@dataclass(frozen=True)
class BfpBlock:
    """One block: a shared exponent plus sign-magnitude mantissas."""

    shared_exponent: int
    signs: tuple[int, ...]
    magnitudes: tuple[int, ...]
    mantissa_bits: int

    def __post_init__(self):
        if len(self.signs) != len(self.magnitudes):
            raise InvalidValue("signs and magnitudes differ in length")
        limit = 1 << self.mantissa_bits
        for s, m in zip(self.signs, self.magnitudes):
            if s not in (1, -1):
                raise InvalidValue(f"sign must be +1 or -1, got {s}")
            if not 0 <= m < limit:
                raise InvalidValue(f"magnitude {m} does not fit in {self.mantissa_bits} bits")

    @classmethod
    def from_mantissas(
        cls, shared_exponent: int, mantissas: Iterable[tuple[int, int]], mantissa_bits: int
    ) -> "BfpBlock":
        pairs = list(mantissas)
        return cls(
            int(shared_exponent),
            tuple(int(s) for s, _ in pairs),
            tuple(int(m) for _, m in pairs),
            int(mantissa_bits),
        )

    @classmethod
    def from_signed(cls, shared_exponent: int, values: Sequence[int], mantissa_bits: int) -> "BfpBlock":
        vals = [int(v) for v in values]
        return cls(
            int(shared_exponent),
            tuple(-1 if v < 0 else 1 for v in vals),
            tuple(abs(v) for v in vals),
            int(mantissa_bits),
        )

    @property
    def mantissas(self) -> list[tuple[int, int]]:
        return list(zip(self.signs, self.magnitudes))

    def signed(self) -> np.ndarray:
        return np.array([s * m for s, m in zip(self.signs, self.magnitudes)], dtype=np.int64)

    def is_zero(self) -> bool:
        return not any(self.magnitudes)

    def is_normalized(self) -> bool:
        if self.is_zero():
            return self.shared_exponent == 0
        return max(self.magnitudes) >= 1 << (self.mantissa_bits - 1)

    def __len__(self) -> int:
        return len(self.magnitudes)


def fp_to_bfp(
    block,
    b: int,
    rounding: str = "nearest-even",
    exponent_bits: int = 8,
) -> BfpBlock:
    """Convert a 1-D run of reals to a :class:`BfpBlock` with ``b`` magnitude bits."""
    x = np.asarray(block, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidValue(f"a block must be 1-D, got shape {x.shape}")
    exp, mant = quantize_blocks(x, b, axis=0, rounding=rounding, exponent_bits=exponent_bits)
    return BfpBlock.from_signed(int(exp), mant, b)


def bfp_to_fp(block: BfpBlock) -> np.ndarray:
    """Decode exactly: ``sign * magnitude * 2**shared_exponent`` in binary64."""
    return np.ldexp(block.signed().astype(np.float64), block.shared_exponent)


def element_error_bound(exponents, mantissas, b: int, axis: int, rounding: str = "nearest-even") -> np.ndarray:
    """Per-element worst-case conversion error for an already converted matrix.

    Half an ulp of the block for round-to-nearest, one ulp for truncation.  An
    element sitting on the top code ``2**b - 1`` may have saturated, so it gets a
    full ulp either way.
    """
    ulp = np.ldexp(1.0, np.expand_dims(np.asarray(exponents, dtype=np.int64), axis))
    base = ulp * (0.5 if rounding == "nearest-even" else 1.0)
    top = np.abs(np.asarray(mantissas)) == (1 << b) - 1
    return np.where(top, ulp, base)


@dataclass(frozen=True)
class BfpMatrix:
    """A matrix converted block-wise along rows (``axis='row'``) or columns."""

    mantissas: np.ndarray  # signed int64, same shape as the source matrix
    exponents: np.ndarray  # one per block
    axis: str
    mantissa_bits: int
    rounding: str = "nearest-even"

    @property
    def shape(self) -> tuple[int, int]:
        return self.mantissas.shape

    @property
    def _np_axis(self) -> int:
        return 1 if self.axis == "row" else 0

    def to_float(self) -> np.ndarray:
        e = np.expand_dims(self.exponents, self._np_axis)
        return np.ldexp(self.mantissas.astype(np.float64), e)

    def block(self, index: int) -> BfpBlock:
        vals = self.mantissas[index] if self.axis == "row" else self.mantissas[:, index]
        return BfpBlock.from_signed(int(self.exponents[index]), vals, self.mantissa_bits)

    def error_bound(self) -> np.ndarray:
        return element_error_bound(
            self.exponents, self.mantissas, self.mantissa_bits, self._np_axis, self.rounding
        )


def quantize_matrix(
    x,
    b: int,
    axis: str,
    rounding: str = "nearest-even",
    exponent_bits: int = 8,
    name: str = "matrix",
) -> BfpMatrix:
    """Convert a whole matrix, one block per row (``axis='row'``) or per column."""
    if axis not in ("row", "col"):
        raise InvalidConfig(f"axis must be 'row' or 'col', got {axis!r}")
    arr = as_real_matrix(x, name)
    exps, mant = quantize_blocks(
        arr, b, axis=1 if axis == "row" else 0, rounding=rounding, exponent_bits=exponent_bits
    )
    return BfpMatrix(mant, exps.astype(np.int64), axis, b, rounding)


@dataclass(frozen=True)
class BfpTile:
    """An ``L``-row slab of A (or ``L``-column slab of B) as independent blocks."""

    index: int
    start: int
    blocks: list[BfpBlock]
    axis: str

    @property
    def size(self) -> int:
        return len(self.blocks)


def _tiles(bm: BfpMatrix, L: int) -> list[BfpTile]:
    if L < 1:
        raise InvalidConfig(f"tile size L must be >= 1, got {L}")
    n = bm.shape[0] if bm.axis == "row" else bm.shape[1]
    tiles = []
    for t, start in enumerate(range(0, n, L)):
        stop = min(start + L, n)
        tiles.append(BfpTile(t, start, [bm.block(i) for i in range(start, stop)], bm.axis))
    return tiles


def matrix_to_bfp_tiles_A(A, L: int, b: int, rounding: str = "nearest-even", exponent_bits: int = 8) -> list[BfpTile]:
    """Split A into ``ceil(M/L)`` row tiles; every row is its own block of length K."""
    return _tiles(quantize_matrix(A, b, "row", rounding, exponent_bits, "A"), L)


def matrix_to_bfp_tiles_B(B, L: int, b: int, rounding: str = "nearest-even", exponent_bits: int = 8) -> list[BfpTile]:
    """Split B into ``ceil(N/L)`` column tiles; every column is its own block of length K."""
    return _tiles(quantize_matrix(B, b, "col", rounding, exponent_bits, "B"), L)
