"""Analog photonic multiplication and the photonic processing unit (PPU).

Two cascaded Mach-Zehnder modulators multiply two unsigned slice values: the
first imprints ``x`` on the light intensity, the second scales what is left by
``y``, and a photodetector reads the product.  Three behaviours are modelled:

``ideal``
    the product is exact.
``gaussian``
    the product carries additive error ``mu + sigma * z``, ``z`` a standard
    normal drawn from a keyed stream (see :mod:`photogemm.rng`).
``mzm-transfer``
    a deterministic error from the cosine-squared modulator response after a
    polynomial predistortion of the drive voltage, plus the Gaussian term when
    ``sigma > 0``.

A PPU has four modulators on two wavelengths and produces four slice products
per pulse.  Signs never enter the optical path; they are applied digitally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import rng
from .errors import AlignmentError, CapacityError, InvalidConfig, InvalidValue

NOISE_MODES = ("ideal", "gaussian", "mzm-transfer")
SIGMA_SCALINGS = ("fullscale", "constant")

#: Per slice-product noise std-dev at 5-bit slices.  Fitted so that the mean
#: relative error of 1024-long BFP dot products (10-bit mantissas, 5-bit
#: slices, uniform[1, 100] operands) is 0.10%; see ``calibrate_sigma``.
CALIBRATED_SIGMA = 6.4008


@dataclass(frozen=True)
class NoiseModel:
    mode: str = "gaussian"
    mu: float = 0.0
    sigma: float = CALIBRATED_SIGMA
    # explicit std-dev per slice width, overriding the scaling rule
    sigma_by_width: dict = field(default_factory=dict)
    # "fullscale": sigma grows with the square of the slice full-scale value
    sigma_scaling: str = "fullscale"
    reference_width: int = 5
    v_pi: float = 5.0
    calibration_order: int = 5
    drive_span: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.mode not in NOISE_MODES:
            raise InvalidConfig(f"noise mode must be one of {NOISE_MODES}, got {self.mode!r}")
        if not self.sigma >= 0 or not math.isfinite(self.sigma):
            raise InvalidConfig(f"sigma must be finite and >= 0, got {self.sigma}")
        if not math.isfinite(self.mu):
            raise InvalidConfig(f"mu must be finite, got {self.mu}")
        if self.sigma_scaling not in SIGMA_SCALINGS:
            raise InvalidConfig(f"sigma_scaling must be one of {SIGMA_SCALINGS}, got {self.sigma_scaling!r}")
        if self.v_pi <= 0:
            raise InvalidConfig(f"v_pi must be > 0, got {self.v_pi}")
        if self.calibration_order < 1:
            raise InvalidConfig(f"calibration_order must be >= 1, got {self.calibration_order}")
        if not 0 < self.drive_span <= 1:
            raise InvalidConfig(f"drive_span must be in (0, 1], got {self.drive_span}")
        for w, s in self.sigma_by_width.items():
            if s < 0:
                raise InvalidConfig(f"sigma for width {w} must be >= 0, got {s}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidConfig(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def is_ideal(self) -> bool:
        return self.mode == "ideal"

    @property
    def has_gaussian(self) -> bool:
        return self.mode != "ideal" and (self.sigma > 0 or self.mu != 0 or bool(self.sigma_by_width))

    def sigma_for(self, width: int) -> float:
        """Noise std-dev for products of ``width``-bit slices."""
        if self.mode == "ideal":
            return 0.0
        if width in self.sigma_by_width:
            return float(self.sigma_by_width[width])
        if self.sigma_scaling == "constant":
            return self.sigma
        ratio = ((1 << width) - 1) / ((1 << self.reference_width) - 1)
        return self.sigma * ratio * ratio

    def mu_for(self, width: int) -> float:
        return 0.0 if self.mode == "ideal" else self.mu


@dataclass(frozen=True)
class PpuConfig:
    mzm_count: int = 4
    wavelengths: int = 2
    products_per_pulse: int = 4
    dac_sram_bytes: int = 32768

    def __post_init__(self):
        if self.mzm_count < 2 or self.mzm_count % 2:
            raise InvalidConfig(f"mzm_count must be an even number >= 2, got {self.mzm_count}")
        if self.products_per_pulse != self.wavelengths * (self.mzm_count // 2):
            raise InvalidConfig("products_per_pulse must equal wavelengths * mzm_count / 2")
        if self.dac_sram_bytes < 1:
            raise InvalidConfig(f"dac_sram_bytes must be >= 1, got {self.dac_sram_bytes}")


def slices_per_mantissa_schedule(s: int, ppus_per_job: int = 1, products_per_pulse: int = 4) -> int:
    """Pulses needed for one mantissa product split into ``s * s`` slice products."""
    if s < 1 or ppus_per_job < 1:
        raise InvalidConfig("s and ppus_per_job must be >= 1")
    return -(-s * s // (products_per_pulse * ppus_per_job))


# --- modulator transfer -----------------------------------------------------

def mzm_transmission(v, v_pi: float) -> np.ndarray:
    """Intensity transfer ``cos(pi V / 2 V_pi)**2`` of one modulator."""
    return np.cos(np.pi * np.asarray(v, dtype=np.float64) / (2.0 * v_pi)) ** 2


@lru_cache(maxsize=64)
def _predistortion(order: int, span: float) -> np.polynomial.Chebyshev:
    # Exact drive for a target transmission t_max * u is arcsin(sqrt(t_max u)),
    # normalised to [0, 1].  The DAC can only apply a polynomial of it.
    t_max = math.sin(math.pi * span / 2) ** 2
    u = np.linspace(0.0, 1.0, 2001)
    q = np.arcsin(np.sqrt(t_max * u)) / (math.pi * span / 2)
    return np.polynomial.Chebyshev.fit(u, q, order, domain=[0.0, 1.0])


def mzm_drive(u, noise: NoiseModel) -> np.ndarray:
    """Drive voltage for a normalised operand ``u`` in [0, 1].

    The modulator is biased at its transmission null (``V = V_pi``) and driven
    down by at most ``drive_span * V_pi``.
    """
    q = _predistortion(noise.calibration_order, noise.drive_span)(np.asarray(u, dtype=np.float64))
    return noise.v_pi * (1.0 - noise.drive_span * q)


def mzm_product(x, y, width: int, noise: NoiseModel) -> np.ndarray:
    """Noise-free output of two cascaded modulators for slice values ``x, y``."""
    full = float((1 << width) - 1)
    t_max = math.sin(math.pi * noise.drive_span / 2) ** 2
    fx = mzm_transmission(mzm_drive(np.asarray(x) / full, noise), noise.v_pi)
    fy = mzm_transmission(mzm_drive(np.asarray(y) / full, noise), noise.v_pi)
    return fx * fy / (t_max * t_max) * full * full


@lru_cache(maxsize=64)
def _transfer_error_table(width: int, order: int, span: float, v_pi: float) -> np.ndarray:
    n = NoiseModel(mode="mzm-transfer", sigma=0.0, v_pi=v_pi, calibration_order=order, drive_span=span)
    g = np.arange(1 << width, dtype=np.float64)
    table = mzm_product(g[:, None], g[None, :], width, n) - g[:, None] * g[None, :]
    table.setflags(write=False)
    return table


def transfer_error_table(width: int, noise: NoiseModel) -> np.ndarray:
    """``table[x, y]`` = deterministic modulator error for slice values ``x, y``."""
    return _transfer_error_table(width, noise.calibration_order, noise.drive_span, noise.v_pi)


# --- multiplication ---------------------------------------------------------

def _check_slices(x: np.ndarray, width: int) -> None:
    if x.size and (x.min() < 0 or x.max() >= (1 << width)):
        raise InvalidValue(f"slice values must lie in [0, 2**{width})")


def apply_noise(x, y, width: int, noise: NoiseModel, z=None) -> np.ndarray:
    """Photonic products of slice arrays ``x`` and ``y``.

    ``z`` supplies the standard normals (same shape) for the Gaussian term.
    Ideal mode returns exact int64 products.
    """
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    exact = x * y
    if noise.is_ideal:
        return exact
    out = exact.astype(np.float64)
    if noise.mode == "mzm-transfer":
        out = out + transfer_error_table(width, noise)[x, y]
    sigma, mu = noise.sigma_for(width), noise.mu_for(width)
    if sigma > 0 or mu != 0:
        if z is None:
            raise InvalidValue("gaussian noise requested without normal draws")
        out = out + mu + sigma * np.asarray(z, dtype=np.float64)
    return out


def photonic_multiply(x: int, y: int, noise: NoiseModel, stream_key: tuple = (), width: int = 5) -> float:
    """One analog product of two ``width``-bit slice values.

    The Gaussian draw is addressed by ``(noise.seed, stream_key)``.
    """
    xa, ya = np.asarray(x), np.asarray(y)
    _check_slices(xa, width)
    _check_slices(ya, width)
    z = rng.normals(noise.seed, (rng.SCALAR_NOISE,) + tuple(int(k) for k in stream_key), 0, 1)[0]
    out = apply_noise(xa, ya, width, noise, z)
    return float(out) if not noise.is_ideal else float(int(out))


def photonic_multiply_array(x, y, noise: NoiseModel, width: int = 5, stream: tuple = (), start: int = 0) -> np.ndarray:
    """Many products at once; element ``n`` uses position ``start + n`` of ``stream``."""
    xa = np.asarray(x, dtype=np.int64)
    ya = np.asarray(y, dtype=np.int64)
    if xa.shape != ya.shape:
        raise AlignmentError(f"operand shapes differ: {xa.shape} vs {ya.shape}")
    _check_slices(xa, width)
    _check_slices(ya, width)
    z = None
    if noise.has_gaussian:
        z = rng.normals(noise.seed, (rng.SCALAR_NOISE,) + tuple(stream), start, xa.size).reshape(xa.shape)
    return apply_noise(xa, ya, width, noise, z)


# --- PPU --------------------------------------------------------------------

def job_noise_draws(job, noise: NoiseModel) -> np.ndarray:
    """Standard normals ``(s, s, T)`` for every slice product of a job.

    Each draw is addressed by the global ``(i, j, k)`` slot and the slice pair
    ``(u, v)`` of the product, so it does not depend on tiling.  Padding lanes
    get zeros.
    """
    s = job.a_slices.shape[1]
    base = job.slot_index  # (T,), -1 on padding lanes
    live = base >= 0
    z = np.zeros((s, s, base.size))
    if not live.any():
        return z
    slots = base[live]
    lo, hi = int(slots.min()), int(slots.max())
    for u in range(s):
        for v in range(s):
            z[u, v, live] = rng.slice_pair_normals(noise.seed, u, v, lo, hi - lo + 1)[slots - lo]
    return z


def ppu_execute(job, noise: NoiseModel, ppu_index: int = 0, ppu: PpuConfig = PpuConfig(), draws=None) -> np.ndarray:
    """Run a tile job through one PPU.

    Returns an ``(s, s, T)`` array: ``out[u, v, t]`` is the product of A-slice
    ``u`` (carried on wavelength ``u``) and B-slice ``v`` (output modulator
    ``v``) for stream position ``t``.  For ``s = 2`` these are the four
    streams ``a1*b1, a1*b2, a2*b1, a2*b2`` of one pulse each.  ``ppu_index``
    only selects the hardware unit; it does not affect results.
    """
    a, b = job.a_slices, job.b_slices
    if a.shape != b.shape:
        raise AlignmentError(f"operand streams differ in shape: {a.shape} vs {b.shape}")
    T, s = a.shape
    if T * s > ppu.dac_sram_bytes:
        raise CapacityError(f"job needs {T * s} bytes of DAC SRAM, only {ppu.dac_sram_bytes} available")
    width = job.slice_width
    _check_slices(a, width)
    _check_slices(b, width)
    if noise.has_gaussian and draws is None:
        draws = job_noise_draws(job, noise)
    x = a.T[:, None, :]
    y = b.T[None, :, :]
    return apply_noise(np.broadcast_to(x, (s, s, T)), np.broadcast_to(y, (s, s, T)), width, noise, draws)
