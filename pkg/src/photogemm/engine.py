"""End-to-end tiled GEMM on the simulated accelerator.

Pipeline: convert A row-wise and B column-wise to BFP, cut both into tiles,
flatten every tile pair into aligned slice streams, run the streams through a
PPU, recombine slice products and sum dot products in the digital
post-processing unit (DPPU), scale by the row and column exponents, and place
the tile into the output.

Two dataflows compute the same thing:

``stream``
    executes every tile job literally, one stream position at a time.
``blocked``
    multiplies whole slice planes at once, ``S_Au @ S_Bv`` for every slice
    pair ``(u, v)``.  Same products, same noise draws, much faster.

Noise on slice products is addressed by the global coordinate
``(i, j, k, u, v)`` of the product, so results do not depend on the tile size,
the dataflow, the job order or the number of worker threads.  For very large
products the per-slice draws are replaced by one draw per output element with
the identical Gaussian distribution (``noise_path = aggregated``).
"""
from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng
from .bfp import BfpMatrix, as_real_matrix, quantize_matrix
from .config import SystemConfig
from .errors import AlignmentError, ExponentOverflow, InvalidConfig, ShapeError
from .metrics import ErrorReport, error_report, expected_error_report
from .photonic import NoiseModel, ppu_execute, transfer_error_table
from .slicing import SliceConfig, noise_gain, reconstruct_array, slice_array, slice_weights
from .tiling import TileJob, build_jobs

#: Largest M*N*K handled by the literal stream dataflow under ``dataflow=auto``.
STREAM_LIMIT = 1 << 18
#: Largest M*N*K whose slice-product errors are drawn one by one.
EXPLICIT_NOISE_LIMIT = 1 << 21


@dataclass(frozen=True)
class OutputTile:
    values: np.ndarray
    origin: tuple[int, int]


@dataclass
class MatmulResult:
    values: np.ndarray  # M x N result
    mantissa_sums: np.ndarray  # M x N sums before exponent recovery
    exact_sums: np.ndarray  # M x N noise-free integer sums
    exp_a: np.ndarray
    exp_b: np.ndarray
    noise_mean: np.ndarray  # expected value-domain Gaussian error per element
    noise_var: np.ndarray
    reference: Optional[np.ndarray]
    report: Optional[ErrorReport]
    dataflow: str
    noise_path: str

    @property
    def quantized_values(self) -> np.ndarray:
        """The noise-free BFP result."""
        return np.ldexp(self.exact_sums.astype(np.float64), self.exp_a[:, None] + self.exp_b[None, :])

    def expected_report(self) -> ErrorReport:
        """Metrics averaged over the Gaussian noise (quantisation error kept exact)."""
        if self.reference is None:
            raise InvalidConfig("expected_report needs the binary64 reference")
        bias = self.quantized_values - self.reference
        return expected_error_report(bias, self.noise_mean, self.noise_var, self.reference)


# --- DPPU and exponent recovery --------------------------------------------

def dppu_accumulate(streams: np.ndarray, job: TileJob, cfg: SliceConfig) -> np.ndarray:
    """Recombine slice products, apply signs and sum over the inner dimension.

    Returns the ``L x L`` mantissa-domain sums of the job (int64 when the
    streams are exact integers).
    """
    s = cfg.num_slices
    streams = np.asarray(streams)
    if streams.shape != (s, s, job.length):
        raise AlignmentError(f"expected streams of shape {(s, s, job.length)}, got {streams.shape}")
    mags = reconstruct_array(np.moveaxis(streams, 2, 0), cfg)
    signed = mags * (job.a_signs * job.b_signs)
    per_col = signed.reshape(job.L, job.L, job.k).sum(axis=2)  # (j, i)
    return per_col.T


def _check_exponents(e: np.ndarray, e_range: tuple[int, int]) -> None:
    lo, hi = e_range
    if e.size and (e.min() < lo or e.max() > hi):
        bad = int(e.max()) if e.max() > hi else int(e.min())
        raise ExponentOverflow(f"combined exponent {bad} outside [{lo}, {hi}]")


def exponent_recover(sums, job: TileJob, e_range: tuple[int, int] = (-256, 254)) -> OutputTile:
    """Scale mantissa sums by ``2**(E_A[i] + E_B[j])``; exact in binary64."""
    e = job.exp_a[:, None] + job.exp_b[None, :]
    _check_exponents(e, e_range)
    return OutputTile(np.ldexp(np.asarray(sums, dtype=np.float64), e), (job.p, job.r))


# --- noise helpers ------------------------------------------------------------

def _slot_weights(cfg: SliceConfig) -> np.ndarray:
    """Flat ``s*s`` reconstruction weights in the magnitude domain."""
    return np.ldexp(slice_weights(cfg).astype(np.float64).ravel(), -2 * cfg.pad)


def _pair_noise(seed: int, u: int, v: int, M: int, N: int, K: int) -> np.ndarray:
    return rng.slice_pair_normals(seed, u, v, 0, M * N * K).reshape(M, N, K)


def _gaussian_moments(noise: NoiseModel, cfg: SliceConfig, sign_dot: np.ndarray, K: int):
    sum_w, rss_w = noise_gain(cfg)
    mu, sigma = noise.mu_for(cfg.slice_width), noise.sigma_for(cfg.slice_width)
    return mu * sum_w * sign_dot, np.full(sign_dot.shape, K * (sigma * rss_w) ** 2)


# --- dataflows ---------------------------------------------------------------

def _stream_sums(qa, qb, cfg, noise, sys, explicit, threads):
    M, K = qa.shape
    N = qb.shape[1]
    L = sys.tile_size
    s = cfg.num_slices
    jobs = build_jobs(qa, qb, L, cfg, sys.dac_sram_bytes)
    z_grid = None
    if explicit:
        z_grid = np.stack([
            np.stack([_pair_noise(noise.seed, u, v, M, N, K).reshape(-1) for v in range(s)])
            for u in range(s)
        ])  # (s, s, M*N*K)
    ppu = sys.ppu_config()

    def run(job_and_index):
        index, job = job_and_index
        draws = None
        if z_grid is not None:
            live = job.slot_index >= 0
            draws = np.where(live, z_grid[:, :, np.where(live, job.slot_index, 0)], 0.0)
        streams = ppu_execute(job, noise, index % sys.num_ppus, ppu, draws)
        return dppu_accumulate(streams, job, cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            tiles = list(pool.map(run, enumerate(jobs)))
    else:
        tiles = [run(x) for x in enumerate(jobs)]

    grid_m, grid_n = -(-M // L) * L, -(-N // L) * L
    dtype = np.int64 if noise.is_ideal else np.float64
    out = np.zeros((grid_m, grid_n), dtype=dtype)
    for job, t in zip(jobs, tiles):  # fixed order keeps float sums reproducible
        out[job.p * L:(job.p + 1) * L, job.r * L:(job.r + 1) * L] += t
    return out[:M, :N]


def _signed_planes(q: BfpMatrix, cfg: SliceConfig) -> np.ndarray:
    sl = slice_array(np.abs(q.mantissas), cfg)
    sign = np.where(q.mantissas < 0, -1, 1)
    return sl * sign[..., None]


def _matmul_rows(a: np.ndarray, b: np.ndarray, threads: int) -> np.ndarray:
    if threads <= 1 or a.shape[0] < 2 * threads:
        return a @ b
    chunks = np.array_split(np.arange(a.shape[0]), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda idx: a[idx] @ b, chunks))
    return np.vstack(parts)


def _exact_sums_blocked(pa, pb, cfg, threads) -> np.ndarray:
    s = cfg.num_slices
    w = slice_weights(cfg)
    total = None
    for u in range(s):
        au = pa[:, :, u].astype(np.float64)
        for v in range(s):
            # each plane product is an exact integer well below 2**53
            part = _matmul_rows(au, pb[:, :, v].astype(np.float64), threads).astype(np.int64) * w[u, v]
            total = part if total is None else total + part
    return total >> (2 * cfg.pad)


def _transfer_error_blocked(pa, pb, cfg, noise, threads) -> np.ndarray:
    """Summed deterministic modulator error, via one-hot slice encodings."""
    d, s = cfg.slice_width, cfg.num_slices
    table = transfer_error_table(d, noise)
    levels = 1 << d
    w = _slot_weights(cfg).reshape(s, s)
    sa = np.where(pa.sum(axis=2) < 0, -1.0, 1.0)
    sb = np.where(pb.sum(axis=2) < 0, -1.0, 1.0)
    M, K = sa.shape
    N = sb.shape[1]
    total = np.zeros((M, N))
    for u in range(s):
        xa = np.abs(pa[:, :, u])
        onehot_a = np.zeros((M, K, levels))
        onehot_a[np.arange(M)[:, None], np.arange(K)[None, :], xa] = sa
        for v in range(s):
            xb = np.abs(pb[:, :, v])
            # G[k, x, j] = sign_b[k, j] * table[x, xb[k, j]]
            g = table[:, xb] * sb[None, :, :]  # (levels, K, N)
            g = np.moveaxis(g, 0, 1).reshape(K * levels, N)
            total += w[u, v] * _matmul_rows(onehot_a.reshape(M, K * levels), g, threads)
    return total


def _explicit_noise_blocked(seed, sa, sb, cfg, noise):
    s = cfg.num_slices
    w = _slot_weights(cfg).reshape(s, s)
    sigma, mu = noise.sigma_for(cfg.slice_width), noise.mu_for(cfg.slice_width)
    M, K = sa.shape
    N = sb.shape[1]
    per_k = np.zeros((M, N, K))
    for u in range(s):
        for v in range(s):
            per_k += w[u, v] * (mu + sigma * _pair_noise(seed, u, v, M, N, K))
    return np.einsum("ijk,ik,kj->ij", per_k, sa, sb)


# --- public entry --------------------------------------------------------------

def choose_dataflow(sys: SystemConfig, M: int, N: int, K: int) -> str:
    if sys.dataflow != "auto":
        return sys.dataflow
    return "stream" if M * N * K <= STREAM_LIMIT else "blocked"


def choose_noise_path(sys: SystemConfig, M: int, N: int, K: int, s: int) -> str:
    if not sys.noise.has_gaussian:
        return "none"
    if sys.noise_path != "auto":
        return sys.noise_path
    return "explicit" if M * N * K <= EXPLICIT_NOISE_LIMIT else "aggregated"


def matrix_multiply(
    A,
    B,
    sys: Optional[SystemConfig] = None,
    seed: Optional[int] = None,
    threads: int = 1,
    reference: Optional[bool] = None,
) -> MatmulResult:
    """Multiply ``A @ B`` on the simulated accelerator.

    ``seed`` overrides ``sys.noise.seed``.  ``reference`` controls whether the
    binary64 product and the :class:`ErrorReport` are computed (default:
    ``sys.error_report``).
    """
    sys = sys or SystemConfig()
    a = np.asarray(A, dtype=np.float64)
    b = np.asarray(B, dtype=np.float64)
    if a.ndim == 2 and b.ndim == 2 and a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"A is {a.shape[0]}x{a.shape[1]} but B is {b.shape[0]}x{b.shape[1]}; inner dimensions differ"
        )
    a = as_real_matrix(a, "A")
    b = as_real_matrix(b, "B")
    noise = sys.noise if seed is None else dataclasses.replace(sys.noise, seed=int(seed))
    cfg = sys.slice_config()
    bits = sys.mantissa_bits
    qa = quantize_matrix(a, bits, "row", sys.rounding, sys.exponent_bits, "A")
    qb = quantize_matrix(b, bits, "col", sys.rounding, sys.exponent_bits, "B")
    M, K = a.shape
    N = b.shape[1]
    s = cfg.num_slices
    e = qa.exponents[:, None] + qb.exponents[None, :]
    _check_exponents(e, sys.combined_exponent_range())

    dataflow = choose_dataflow(sys, M, N, K)
    path = choose_noise_path(sys, M, N, K, s)
    if path == "aggregated":
        pipeline_noise = dataclasses.replace(noise, mu=0.0, sigma=0.0, sigma_by_width={})
        if pipeline_noise.mode == "gaussian":
            pipeline_noise = dataclasses.replace(pipeline_noise, mode="ideal")
    else:
        pipeline_noise = noise

    pa, pb = _signed_planes(qa, cfg), _signed_planes(qb, cfg)
    exact = _exact_sums_blocked(pa, pb, cfg, threads)
    if dataflow == "stream":
        sums = _stream_sums(qa, qb, cfg, pipeline_noise, sys, path == "explicit", threads)
    else:
        if pipeline_noise.is_ideal:
            sums = exact
        else:
            sums = exact.astype(np.float64)
            if pipeline_noise.mode == "mzm-transfer":
                sums = sums + _transfer_error_blocked(pa, pb, cfg, pipeline_noise, threads)
            if path == "explicit":
                sa = np.where(qa.mantissas < 0, -1.0, 1.0)
                sb = np.where(qb.mantissas < 0, -1.0, 1.0)
                sums = sums + _explicit_noise_blocked(noise.seed, sa, sb, cfg, noise)

    sa = np.where(qa.mantissas < 0, -1.0, 1.0)
    sb = np.where(qb.mantissas < 0, -1.0, 1.0)
    sign_dot = sa @ sb
    if noise.has_gaussian:
        mean, var = _gaussian_moments(noise, cfg, sign_dot, K)
    else:
        mean, var = np.zeros((M, N)), np.zeros((M, N))
    if path == "aggregated":
        z = rng.normals(noise.seed, (rng.AGGREGATE_NOISE,), 0, M * N).reshape(M, N)
        sums = sums.astype(np.float64) + mean + np.sqrt(var) * z

    scale = np.ldexp(1.0, e)
    values = np.ldexp(np.asarray(sums, dtype=np.float64), e)
    want_ref = sys.error_report if reference is None else reference
    ref = a @ b if want_ref else None
    report = None
    if ref is not None:
        report = error_report(values, ref)
    return MatmulResult(
        values=values,
        mantissa_sums=sums,
        exact_sums=exact,
        exp_a=qa.exponents,
        exp_b=qb.exponents,
        noise_mean=mean * scale,
        noise_var=var * scale * scale,
        reference=ref,
        report=report,
        dataflow=dataflow,
        noise_path=path,
    )


# --- batched dot products ----------------------------------------------------

@dataclass
class DotResult:
    noisy: np.ndarray  # (T,) mantissa-domain sums
    exact: np.ndarray  # (T,) int64
    mean: np.ndarray  # expected Gaussian error per trial (mantissa domain)
    var: np.ndarray


def batch_dot(a_mant, b_mant, cfg: SliceConfig, noise: NoiseModel, seed: Optional[int] = None) -> DotResult:
    """``T`` independent mantissa dot products of length ``K`` through the photonic path.

    Trial ``t`` draws its noise exactly as output element ``(t, 0)`` of a
    ``T x K`` by ``K x 1`` GEMM would.
    """
    a = np.asarray(a_mant, dtype=np.int64)
    b = np.asarray(b_mant, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 2:
        raise AlignmentError(f"operand batches must share a 2-D shape, got {a.shape} and {b.shape}")
    T, K = a.shape
    s = cfg.num_slices
    sl_a = slice_array(np.abs(a), cfg)
    sl_b = slice_array(np.abs(b), cfg)
    sign = np.where(a < 0, -1, 1) * np.where(b < 0, -1, 1)
    exact = (np.abs(a) * np.abs(b) * sign).sum(axis=1)
    noise_seed = noise.seed if seed is None else int(seed)
    if noise.is_ideal:
        return DotResult(exact.astype(np.float64), exact, np.zeros(T), np.zeros(T))
    w = _slot_weights(cfg)
    err = np.zeros((T, K))
    if noise.mode == "mzm-transfer":
        table = transfer_error_table(cfg.slice_width, noise)
        for u in range(s):
            for v in range(s):
                err += w[u * s + v] * table[sl_a[:, :, u], sl_b[:, :, v]]
    mean = np.zeros(T)
    var = np.zeros(T)
    if noise.has_gaussian:
        mu, sigma = noise.mu_for(cfg.slice_width), noise.sigma_for(cfg.slice_width)
        for u in range(s):
            for v in range(s):
                z = rng.slice_pair_normals(noise_seed, u, v, 0, T * K).reshape(T, K)
                err += w[u * s + v] * (mu + sigma * z)
        m, v = _gaussian_moments(noise, cfg, sign.sum(axis=1).astype(np.float64), K)
        mean, var = m, v
    noisy = exact + (err * sign).sum(axis=1)
    return DotResult(noisy, exact, mean, var)
