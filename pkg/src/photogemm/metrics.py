"""Error metrics, analytic error bounds and power-law fitting."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import erf

from .errors import DegenerateReference, FitError, InvalidValue, ShapeError


@dataclass(frozen=True)
class ErrorReport:
    rel_l2: float
    rmse: float
    mae: float
    max_abs: float
    n_elements: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BoundInputs:
    E_m: int = 0
    b: int = 10
    N_block: int = 1
    K_blocks: int = 1
    E_max: int = 0
    L_dot: int = 1
    sigma: float = 0.0

    def __post_init__(self):
        for name in ("b", "N_block", "K_blocks", "L_dot"):
            if getattr(self, name) < 1:
                raise InvalidValue(f"{name} must be positive")
        if self.sigma < 0:
            raise InvalidValue("sigma must be >= 0")


def _pair(measured, reference) -> tuple[np.ndarray, np.ndarray]:
    m = np.asarray(measured, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    if m.shape != r.shape:
        raise ShapeError(f"measured {m.shape} and reference {r.shape} differ in shape")
    if m.size == 0:
        raise InvalidValue("metrics need at least one element")
    return m, r


def rel_l2(measured, reference) -> float:
    """Frobenius norm of the error over the Frobenius norm of the reference."""
    m, r = _pair(measured, reference)
    denom = np.linalg.norm(r)
    if denom == 0:
        raise DegenerateReference("reference has zero norm")
    return float(np.linalg.norm(m - r) / denom)


def rmse(measured, reference) -> float:
    m, r = _pair(measured, reference)
    return float(np.sqrt(np.mean((m - r) ** 2)))


def mae(measured, reference) -> float:
    m, r = _pair(measured, reference)
    return float(np.mean(np.abs(m - r)))


def error_report(measured, reference) -> ErrorReport:
    m, r = _pair(measured, reference)
    d = m - r
    denom = np.linalg.norm(r)
    return ErrorReport(
        rel_l2=float(np.linalg.norm(d) / denom) if denom > 0 else math.nan,
        rmse=float(np.sqrt(np.mean(d * d))),
        mae=float(np.mean(np.abs(d))),
        max_abs=float(np.max(np.abs(d))),
        n_elements=int(d.size),
    )


def expected_error_report(bias, mean, var, reference) -> ErrorReport:
    """Metrics averaged over the noise instead of measured on one draw.

    The error of every element is ``bias + e`` with ``e ~ Normal(mean, var)``,
    where ``bias`` is the deterministic quantisation error.  RMSE and RelL2 use
    the exact mean squared error, MAE the folded-normal mean, and max_abs the
    largest per-element root mean square error.
    """
    b = np.asarray(bias, dtype=np.float64)
    mu = b + np.asarray(mean, dtype=np.float64)
    v = np.broadcast_to(np.asarray(var, dtype=np.float64), mu.shape)
    r = np.asarray(reference, dtype=np.float64)
    ms = mu * mu + v
    sd = np.sqrt(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        folded = np.where(
            sd > 0,
            sd * math.sqrt(2 / math.pi) * np.exp(-0.5 * (mu / np.where(sd > 0, sd, 1)) ** 2)
            + mu * erf(mu / np.where(sd > 0, sd * math.sqrt(2), 1)),
            np.abs(mu),
        )
    denom = np.linalg.norm(r)
    return ErrorReport(
        rel_l2=float(np.sqrt(ms.sum()) / denom) if denom > 0 else math.nan,
        rmse=float(np.sqrt(ms.mean())),
        mae=float(folded.mean()),
        max_abs=float(np.sqrt(ms.max())),
        n_elements=int(mu.size),
    )


def quantization_bound(inp: BoundInputs) -> float:
    """Worst-case absolute BFP error ``N_block * K_blocks * 2**E_m * 2**-(b+1)``."""
    return inp.N_block * inp.K_blocks * math.ldexp(1.0, inp.E_m - (inp.b + 1))


def photonic_rms_bound(inp: BoundInputs) -> float:
    """RMS bound ``2**E_max * sqrt(L_dot) * sigma`` on exponent-scaled noise."""
    return math.ldexp(1.0, inp.E_max) * math.sqrt(inp.L_dot) * inp.sigma


def gemm_quantization_bound(qa, qb, A, B) -> np.ndarray:
    """Element-wise bound on ``|C_bfp - A @ B|`` from the conversion errors.

    With ``|a - a_hat| <= da`` and ``|b - b_hat| <= db`` element-wise,
    ``|a b - a_hat b_hat| <= |a| db + |b| da + da db``.
    """
    da, db = qa.error_bound(), qb.error_bound()
    a, b = np.abs(np.asarray(A, dtype=np.float64)), np.abs(np.asarray(B, dtype=np.float64))
    return a @ db + da @ b + da @ db


def gemm_rel_l2_bound(qa, qb, A, B, reference=None) -> float:
    """Prediction for RelL2 of a noise-free BFP GEMM against binary64."""
    ref = np.asarray(A, dtype=np.float64) @ np.asarray(B, dtype=np.float64) if reference is None else reference
    denom = np.linalg.norm(ref)
    if denom == 0:
        raise DegenerateReference("reference has zero norm")
    return float(np.linalg.norm(gemm_quantization_bound(qa, qb, A, B)) / denom)


def fit_power_law(points) -> tuple[float, float]:
    """Least-squares slope of ``log y`` against ``log N``, with its r squared."""
    pts = [(float(n), float(y)) for n, y in points]
    if len(pts) < 3:
        raise FitError(f"need at least 3 points, got {len(pts)}")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(x * y)):
        raise FitError("power-law fit needs positive finite points")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise FitError("all N values are equal")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(slope), r2
