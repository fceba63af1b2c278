"""Experiment runners: error scaling, mantissa sweep, noise characterisation.

Every runner returns a plain dict of results.  All random inputs are keyed by
``(seed, experiment, size, trial)``, and trials may run on worker threads, so
the numbers never depend on the degree of parallelism.
"""
from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import rng
from .bfp import quantize_blocks
from .config import SystemConfig
from .engine import batch_dot, matrix_multiply
from .errors import InvalidConfig
from .metrics import ErrorReport, error_report, fit_power_law
from .photonic import NoiseModel, photonic_multiply_array
from .slicing import SliceConfig, slice_array

DEFAULT_SIZES = (16, 64, 128, 256, 512, 1024)
DEFAULT_WIDTHS = tuple(range(6, 21))
DEFAULT_SWEEP_SIZES = (64, 128, 256)
DEFAULT_NOISE_WIDTHS = tuple(range(3, 9))
DEFAULT_DOT_LENGTHS = (32, 64, 128, 256, 512, 1024)
DISTRIBUTIONS = ("uniform", "gaussian")

# experiment ids used in random stream domains
_ERROR_SCALING, _MANTISSA_SWEEP, _NOISE_CHAR, _DOT_PRODUCT = 1, 2, 3, 4

#: Calibration point for the default noise level.
CALIBRATION_TARGET_RE = 1e-3
CALIBRATION_K = 1024
CALIBRATION_TRIALS = 1000


def _parallel_map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def random_matrix(seed: int, domain: tuple, shape: tuple, distribution: str = "uniform") -> np.ndarray:
    g = rng.generator(seed, (rng.MATRIX_DATA,) + tuple(domain))
    if distribution == "uniform":
        return g.uniform(1.0, 100.0, shape)
    if distribution == "gaussian":
        return g.standard_normal(shape)
    raise InvalidConfig(f"distribution must be one of {DISTRIBUTIONS}, got {distribution!r}")


def trials_for_size(trials: int, n: int, full_until: int = 256) -> int:
    """Fewer trials for big matrices; large outputs average over many elements anyway."""
    if n <= full_until:
        return trials
    return max(1, int(trials * (full_until / n) ** 2))


def _mean_reports(reports) -> dict:
    keys = ("rel_l2", "rmse", "mae", "max_abs")
    return {k: float(np.mean([getattr(r, k) for r in reports])) for k in keys}


def _strictly_decreasing(x) -> bool:
    return all(b < a for a, b in zip(x, x[1:]))


def _non_decreasing(x) -> bool:
    return all(b >= a for a, b in zip(x, x[1:]))


def _non_increasing(x) -> bool:
    return all(b <= a for a, b in zip(x, x[1:]))


# --- error scaling ---------------------------------------------------------------

def error_scaling(
    sys: Optional[SystemConfig] = None,
    sizes: Sequence[int] = DEFAULT_SIZES,
    trials: int = 8,
    seed: int = 0,
    threads: int = 1,
    distribution: str = "uniform",
) -> dict:
    """Square GEMMs of growing size; mean RelL2, RMSE and MAE per size."""
    sys = sys or SystemConfig()
    rows = []
    for n in sizes:
        count = trials_for_size(trials, n)

        def one(t, n=n):
            A = random_matrix(seed, (_ERROR_SCALING, n, t, 0), (n, n), distribution)
            B = random_matrix(seed, (_ERROR_SCALING, n, t, 1), (n, n), distribution)
            res = matrix_multiply(A, B, sys, seed=rng.derive_seed(seed, (_ERROR_SCALING, n, t)), reference=True)
            quant = error_report(res.quantized_values, res.reference)
            return res.report, res.expected_report(), quant

        out = _parallel_map(one, list(range(count)), threads)
        rows.append({
            "n": n,
            "trials": count,
            **_mean_reports([o[0] for o in out]),
            "expected": _mean_reports([o[1] for o in out]),
            "quantization_only": _mean_reports([o[2] for o in out]),
        })
    result = {"rows": rows}
    if len(rows) >= 3:
        exponent, r2 = fit_power_law([(r["n"], r["rel_l2"]) for r in rows])
        result["fit"] = {"exponent": exponent, "r2": r2}
    rel = [r["rel_l2"] for r in rows]
    result["checks"] = {
        "rel_l2_strictly_decreasing": _strictly_decreasing(rel),
        "rmse_non_decreasing": _non_decreasing([r["rmse"] for r in rows]),
        "mae_non_decreasing": _non_decreasing([r["mae"] for r in rows]),
    }
    if "fit" in result:
        result["checks"]["exponent_in_range"] = -0.6 <= result["fit"]["exponent"] <= -0.4
    return result


# --- mantissa sweep --------------------------------------------------------------

def mantissa_sweep(
    sys: Optional[SystemConfig] = None,
    widths: Sequence[int] = DEFAULT_WIDTHS,
    sizes: Sequence[int] = DEFAULT_SWEEP_SIZES,
    trials: int = 2,
    seed: int = 0,
    threads: int = 1,
    distribution: str = "uniform",
    saturation_width: int = 14,
) -> dict:
    """Error metrics against mantissa width; the same inputs are reused for every width.

    Slice-product noise is keyed by significance, so every width sees the same
    draws for the same bits.  Each trial is also run with the negated draws
    (an antithetic pair) and the measured metrics pool both runs; this cancels
    the correlation between one noise sample and the width-dependent
    quantisation error, which otherwise swamps the small per-bit gains once
    noise dominates.  ``expected`` metrics average over the noise analytically.
    """
    sys = sys or SystemConfig()
    widths = list(widths)
    table = []
    for n in sizes:
        count = trials_for_size(trials, n)
        per_width = []
        for b in widths:
            cfg = dataclasses.replace(sys, mantissa_bits=b)

            def one(t, n=n, cfg=cfg):
                A = random_matrix(seed, (_MANTISSA_SWEEP, n, t, 0), (n, n), distribution)
                B = random_matrix(seed, (_MANTISSA_SWEEP, n, t, 1), (n, n), distribution)
                res = matrix_multiply(A, B, cfg, seed=rng.derive_seed(seed, (_MANTISSA_SWEEP, n, t)), reference=True)
                return antithetic_report(A, B, cfg, res), res.expected_report()

            out = _parallel_map(one, list(range(count)), threads)
            per_width.append({
                "width": b,
                **_mean_reports([o[0] for o in out]),
                "expected": _mean_reports([o[1] for o in out]),
            })
        table.append({"n": n, "trials": count, "widths": per_width, "checks": _sweep_checks(per_width, saturation_width)})
    return {"sizes": table}


def antithetic_report(A, B, sys: SystemConfig, res) -> ErrorReport:
    """Metrics pooled over ``res`` and its mirror image with negated Gaussian draws.

    The Gaussian error enters additively, so the mirrored result is
    ``2 D - C`` where ``D`` is the same product with the random part switched
    off (quantisation, modulator error and the noise mean kept).
    """
    if not sys.noise.has_gaussian:
        return res.report
    still = dataclasses.replace(sys.noise, sigma=0.0, sigma_by_width={})
    D = matrix_multiply(A, B, dataclasses.replace(sys, noise=still), reference=False).values
    mirror = 2.0 * D - res.values
    return error_report(np.stack([res.values, mirror]), np.stack([res.reference, res.reference]))


def _sweep_checks(per_width: list, saturation_width: int) -> dict:
    checks = {}
    for metric in ("rel_l2", "rmse", "mae"):
        exp = [w["expected"][metric] for w in per_width]
        checks[f"expected_{metric}_non_increasing"] = _non_increasing(exp)
        checks[f"measured_{metric}_non_increasing"] = _non_increasing([w[metric] for w in per_width])
        checks[f"measured_{metric}_non_increasing_to_saturation"] = _non_increasing(
            [w[metric] for w in per_width if w["width"] <= saturation_width]
        )
        gains = [a - b for a, b in zip(exp, exp[1:])]
        widths = [w["width"] for w in per_width]
        low = [g for g, b in zip(gains, widths) if b < saturation_width]
        high = [g for g, b in zip(gains, widths) if b >= saturation_width]
        if low and high:
            # every one-bit gain at or above the saturation width is smaller
            # than the smallest gain below it
            checks[f"expected_{metric}_gain_shrinks"] = max(high) < min(low)
    return checks


# --- dot products and calibration ---------------------------------------------------

def dot_product_errors(
    noise: NoiseModel,
    K: int,
    b: int,
    d: int,
    trials: int,
    seed: int = 0,
    exponent_bits: int = 8,
    distribution: str = "uniform",
) -> dict:
    """Relative errors of BFP dot products through the photonic path.

    Each trial draws two length-``K`` vectors, converts each to one BFP block,
    multiplies through the sliced photonic path and compares with the binary64
    dot product of the unconverted vectors.
    """
    a = random_matrix(seed, (_DOT_PRODUCT, K, b, 0), (trials, K), distribution)
    v = random_matrix(seed, (_DOT_PRODUCT, K, b, 1), (trials, K), distribution)
    ea, ma = quantize_blocks(a, b, axis=1, exponent_bits=exponent_bits)
    eb, mb = quantize_blocks(v, b, axis=1, exponent_bits=exponent_bits)
    cfg = SliceConfig.for_mantissa(b, d)
    res = batch_dot(ma, mb, cfg, noise, seed=rng.derive_seed(seed, (_DOT_PRODUCT, K, b)))
    scale = np.ldexp(1.0, ea + eb)
    ref = (a * v).sum(axis=1)
    quant = res.exact * scale - ref
    noise_err = (res.noisy - res.exact) * scale
    return {"reference": ref, "quantization_error": quant, "noise_error": noise_err}


def calibrate_sigma(
    target_re: float = CALIBRATION_TARGET_RE,
    K: int = CALIBRATION_K,
    b: int = 10,
    d: int = 5,
    trials: int = CALIBRATION_TRIALS,
    seed: int = 0,
) -> float:
    """Slice-product noise std-dev at which the mean dot-product RE equals ``target_re``.

    The same inputs and unit-variance noise draws are reused for every
    candidate sigma, so the mean RE is a smooth increasing function of sigma
    and a bracketing root finder applies.
    """
    unit = NoiseModel(mode="gaussian", sigma=1.0, sigma_scaling="constant", seed=0)
    e = dot_product_errors(unit, K, b, d, trials, seed)
    ref, q, n = np.abs(e["reference"]), e["quantization_error"], e["noise_error"]

    def excess(sigma):
        return float(np.mean(np.abs(q + sigma * n) / ref)) - target_re

    if excess(0.0) >= 0:
        raise InvalidConfig("quantisation error alone exceeds the calibration target")
    hi = 1.0
    while excess(hi) < 0:
        hi *= 2
    return brentq(excess, 0.0, hi, xtol=1e-10)


def dot_product_accuracy(
    sys: Optional[SystemConfig] = None,
    lengths: Sequence[int] = DEFAULT_DOT_LENGTHS,
    configs: Sequence[tuple[int, int]] = ((5, 10), (4, 8)),
    trials: int = 1000,
    seed: int = 0,
    threads: int = 1,
) -> dict:
    """Mean and std of dot-product RE for each ``(slice width, mantissa width)`` and length."""
    sys = sys or SystemConfig()
    rows = []
    jobs = [(d, b, K) for d, b in configs for K in lengths]

    def one(job):
        d, b, K = job
        e = dot_product_errors(sys.noise, K, b, d, trials, seed)
        re = np.abs(e["quantization_error"] + e["noise_error"]) / np.abs(e["reference"])
        return {"slice_width": d, "mantissa_bits": b, "K": K, "re_mean": float(re.mean()), "re_std": float(re.std())}

    rows = _parallel_map(one, jobs, threads)
    return {"rows": rows}


# --- single-product noise characterisation ---------------------------------------------

def _histogram(x: np.ndarray, bins: int = 40) -> dict:
    counts, edges = np.histogram(x, bins=bins)
    return {"counts": counts.tolist(), "edges": [float(v) for v in edges]}


def product_errors(noise: NoiseModel, width: int, trials: int, seed: int = 0, slice_width: int = 5) -> dict:
    """Errors of ``trials`` products of ``width``-bit operands drawn from [1, 2**width - 1].

    Operands wider than ``slice_width`` are sliced and recombined like
    mantissas; narrower ones go through a single analog product.
    """
    g = rng.generator(seed, (rng.MATRIX_DATA, _NOISE_CHAR, width))
    x = g.integers(1, 1 << width, trials)
    y = g.integers(1, 1 << width, trials)
    d = min(width, slice_width)
    cfg = SliceConfig.for_mantissa(width, d)
    s = cfg.num_slices
    sx, sy = slice_array(x, cfg), slice_array(y, cfg)
    xs = np.repeat(sx[:, :, None], s, axis=2)
    ys = np.repeat(sy[:, None, :], s, axis=1)
    partials = photonic_multiply_array(xs, ys, noise, width=d, stream=(_NOISE_CHAR, width))
    w = np.ldexp(np.asarray([[2.0 ** (d * (2 * s - 2 - u - v)) for v in range(s)] for u in range(s)]), -2 * cfg.pad)
    got = np.einsum("tuv,uv->t", np.asarray(partials, dtype=np.float64), w)
    truth = (x * y).astype(np.float64)
    return {"x": x, "y": y, "error": got - truth, "truth": truth, "slice_width": d, "num_slices": s}


def noise_characterization(
    sys: Optional[SystemConfig] = None,
    widths: Sequence[int] = DEFAULT_NOISE_WIDTHS,
    trials: int = 200,
    seed: int = 0,
    threads: int = 1,
    dot_lengths: Sequence[int] = DEFAULT_DOT_LENGTHS,
    dot_trials: int = 1000,
    bins: int = 40,
) -> dict:
    """AE and RE of single products per operand width, plus dot-product RE."""
    sys = sys or SystemConfig()
    d = sys.slice.slice_width

    def one(width):
        e = product_errors(sys.noise, width, trials, seed, d)
        ae = np.abs(e["error"])
        re = ae / e["truth"]
        return {
            "width": width,
            "slice_width": e["slice_width"],
            "num_slices": e["num_slices"],
            "ae_mean": float(ae.mean()),
            "ae_std": float(ae.std()),
            "re_mean": float(re.mean()),
            "re_std": float(re.std()),
            "histogram": _histogram(e["error"], bins),
        }

    rows = _parallel_map(one, list(widths), threads)
    dots = dot_product_accuracy(sys, dot_lengths, trials=dot_trials, seed=seed, threads=threads)
    return {"products": rows, "dot_products": dots["rows"]}
