"""Tiling and flattening of BFP operands into PPU jobs.

A is cut into slabs of ``L`` rows, B into slabs of ``L`` columns.  A job pairs
one A slab with one B slab and serialises both into aligned streams of length
``L * L * K``:

* the A stream is the slab in row-major order, repeated ``L`` times;
* the B stream walks the slab column by column, each column repeated ``L``
  times.

Position ``t`` therefore pairs ``A[i, k]`` with ``B[k, j]`` where
``j = t // (L K)``, ``i = (t mod L K) // K`` and ``k = t mod K``.  Ragged edge
slabs are zero-padded to ``L`` and the padding is cropped after reconstruction.
If a job would not fit in the DAC player memory the inner dimension is split
into chunks whose partial sums are added digitally.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bfp import BfpMatrix, quantize_matrix
from .errors import InvalidConfig, ShapeError
from .slicing import SliceConfig, slice_array


@dataclass(frozen=True)
class TileJob:
    p: int  # tile row index (A slab)
    r: int  # tile column index (B slab)
    k_start: int
    k: int  # depth of this job (chunk of the inner dimension)
    L: int
    l_rows: int  # live rows, <= L
    l_cols: int  # live columns, <= L
    a_flat: np.ndarray  # signed mantissas, length L*L*k
    b_flat: np.ndarray
    a_slices: np.ndarray  # (T, s) slices of |a_flat|
    b_slices: np.ndarray
    exp_a: np.ndarray  # (L,) row exponents, 0 on padding
    exp_b: np.ndarray  # (L,) column exponents
    slot_index: np.ndarray  # (T,) global (i*N + j)*K + k, -1 on padding lanes
    slice_width: int

    @property
    def length(self) -> int:
        return self.a_flat.size

    @property
    def a_signs(self) -> np.ndarray:
        return np.where(self.a_flat < 0, -1, 1)

    @property
    def b_signs(self) -> np.ndarray:
        return np.where(self.b_flat < 0, -1, 1)

    def pair_indices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Local ``(i, j, k)`` of every stream position."""
        t = np.arange(self.length)
        lk = self.L * self.k
        return (t % lk) // self.k, t // lk, t % self.k


def k_chunk(K: int, L: int, s: int, dac_sram_bytes: int) -> int:
    """Largest inner-dimension chunk whose streams fit ``dac_sram_bytes``.

    Each stream position holds ``s`` one-byte slices.
    """
    per_k = L * L * s
    if per_k > dac_sram_bytes:
        raise InvalidConfig(
            f"a single inner-dimension step needs {per_k} bytes, DAC SRAM holds {dac_sram_bytes}"
        )
    return max(1, min(K, dac_sram_bytes // per_k))


def flatten_pair(a_tile: np.ndarray, b_tile: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flatten an ``L x K`` A tile and ``K x L`` B tile into aligned streams."""
    L = a_tile.shape[0]
    a_flat = np.tile(a_tile.ravel(), L)
    b_flat = np.repeat(b_tile.T[:, None, :], L, axis=1).ravel()
    return a_flat, b_flat


def _pad(x: np.ndarray, rows: int, cols: int) -> np.ndarray:
    out = np.zeros((rows, cols), dtype=x.dtype)
    out[: x.shape[0], : x.shape[1]] = x
    return out


def build_jobs(
    qa: BfpMatrix,
    qb: BfpMatrix,
    L: int,
    cfg: SliceConfig,
    dac_sram_bytes: int = 32768,
) -> list[TileJob]:
    """Jobs for the product of two converted operands, in (p, r, chunk) order."""
    if L < 1:
        raise InvalidConfig(f"tile size L must be >= 1, got {L}")
    M, K = qa.shape
    K2, N = qb.shape
    if K != K2:
        raise ShapeError(f"A is {M}x{K} but B is {K2}x{N}")
    kc = k_chunk(K, L, cfg.num_slices, dac_sram_bytes)
    jobs = []
    for p in range(-(-M // L)):
        r0, r1 = p * L, min(p * L + L, M)
        exp_a = np.zeros(L, dtype=np.int64)
        exp_a[: r1 - r0] = qa.exponents[r0:r1]
        for r in range(-(-N // L)):
            c0, c1 = r * L, min(r * L + L, N)
            exp_b = np.zeros(L, dtype=np.int64)
            exp_b[: c1 - c0] = qb.exponents[c0:c1]
            for k0 in range(0, K, kc):
                k1 = min(k0 + kc, K)
                kk = k1 - k0
                at = _pad(qa.mantissas[r0:r1, k0:k1], L, kk)
                bt = _pad(qb.mantissas[k0:k1, c0:c1], kk, L)
                a_flat, b_flat = flatten_pair(at, bt)
                t = np.arange(L * L * kk)
                li, lj, lk = (t % (L * kk)) // kk, t // (L * kk), t % kk
                gi, gj = r0 + li, c0 + lj
                live = (gi < M) & (gj < N)
                slot = np.where(live, (gi * N + gj) * K + k0 + lk, -1)
                jobs.append(
                    TileJob(
                        p, r, k0, kk, L, r1 - r0, c1 - c0,
                        a_flat, b_flat,
                        slice_array(np.abs(a_flat), cfg), slice_array(np.abs(b_flat), cfg),
                        exp_a, exp_b, slot, cfg.slice_width,
                    )
                )
    return jobs


def tile_matrices(
    A,
    B,
    L: int,
    b: int,
    cfg: Optional[SliceConfig] = None,
    rounding: str = "nearest-even",
    exponent_bits: int = 8,
    dac_sram_bytes: int = 32768,
) -> list[TileJob]:
    """Convert ``A`` row-wise and ``B`` column-wise to BFP and build all jobs."""
    a = np.asarray(A, dtype=np.float64)
    bm = np.asarray(B, dtype=np.float64)
    if a.ndim == 2 and bm.ndim == 2 and a.shape[1] != bm.shape[0]:
        raise ShapeError(f"A is {a.shape[0]}x{a.shape[1]} but B is {bm.shape[0]}x{bm.shape[1]}")
    cfg = cfg or SliceConfig.for_mantissa(b)
    if cfg.bits != b:
        cfg = SliceConfig(cfg.slice_width, cfg.num_slices, b, cfg.padding)
    qa = quantize_matrix(a, b, "row", rounding, exponent_bits, "A")
    qb = quantize_matrix(bm, b, "col", rounding, exponent_bits, "B")
    return build_jobs(qa, qb, L, cfg, dac_sram_bytes)
