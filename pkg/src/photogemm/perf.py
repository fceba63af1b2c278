"""Analytic latency, throughput, power and area model of the accelerator.

Latency of one GEMM is built from

* operand load: input bytes through the DRAM, global SRAM and local SRAM
  links in series;
* compute: tile jobs scheduled greedily over the PPUs.  A job costs a fixed
  launch overhead, one converter sample per pulse and a digital
  post-processing term per flattened element pair;
* result store: output bytes back through the same links.

With ``overlap_load_compute`` (double buffering) loading and computing run
concurrently after the first job's operands arrive; otherwise the phases are
sequential.  The launch overhead and the digital cycles per element are not
published and are fitted to two end-to-end throughput figures
(:func:`calibrate_constants`).
"""
from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import SystemConfig
from .errors import InvalidConfig, InvalidValue
from .photonic import slices_per_mantissa_schedule
from .tiling import k_chunk

BASELINE_PPUS = 100

#: Figures quoted for other platforms, used only to annotate reports.
REFERENCE_DATA = {
    "throughput_gflops": {"16": 209.25, "1024": 6654.44},
    "energy_eff_gflops_w": {"16": 1.23, "1024": 39.14},
    "gpu_rtx3060_energy_eff_gflops_w": 39.41,
    "bitlume_speedups": [2.48, 2.05, 1.70, 1.36],
    "bitlume_energy_eff_ratio": 1.48,
}


@dataclass(frozen=True)
class AreaPowerEntry:
    component: str
    domain: str  # "electronic" or "photonic"
    area_mm2: float
    power_w: float
    area_pct: Optional[float] = None  # published percentage, if any
    power_pct: Optional[float] = None


@dataclass(frozen=True)
class AreaPowerTable:
    entries: tuple[AreaPowerEntry, ...]

    @property
    def total_area_mm2(self) -> float:
        return math.fsum(e.area_mm2 for e in self.entries)

    @property
    def total_power_w(self) -> float:
        return math.fsum(e.power_w for e in self.entries)

    def power_by_domain(self) -> dict[str, float]:
        out = {"electronic": 0.0, "photonic": 0.0}
        for e in self.entries:
            out[e.domain] += e.power_w
        return out


def _opt_float(text: str) -> Optional[float]:
    text = (text or "").strip()
    return float(text) if text else None


def load_area_power_table(path: Optional[str] = None) -> AreaPowerTable:
    """Read a table CSV (``#`` comment lines allowed); default is the shipped one."""
    if path:
        text = Path(path).read_text(encoding="utf-8")
    else:
        text = resources.files("photogemm").joinpath("data/area_power_table.csv").read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    entries = []
    for row in csv.DictReader(lines):
        domain = row["domain"].strip()
        if domain not in ("electronic", "photonic"):
            raise InvalidConfig(f"unknown domain {domain!r} for {row['component']}")
        entries.append(
            AreaPowerEntry(
                row["component"].strip(), domain,
                float(row["area_mm2"]), float(row["power_w"]),
                _opt_float(row.get("area_pct", "")), _opt_float(row.get("power_pct", "")),
            )
        )
    if not entries:
        raise InvalidConfig("area/power table is empty")
    return AreaPowerTable(tuple(entries))


def area_power_report(table: AreaPowerTable) -> dict:
    """Totals and per-component portions (fractions of the totals)."""
    area, power = table.total_area_mm2, table.total_power_w
    rows = []
    for e in table.entries:
        rows.append({
            "component": e.component,
            "domain": e.domain,
            "area_mm2": e.area_mm2,
            "area_portion": e.area_mm2 / area if area else 0.0,
            "power_w": e.power_w,
            "power_portion": e.power_w / power if power else 0.0,
        })
    return {
        "total_area_mm2": round(area, 2),
        "total_power_w": round(power, 2),
        "components": rows,
    }


def scaled_power_w(table: AreaPowerTable, num_ppus: int, memory_logic_fraction: float = 0.5) -> float:
    """Total power at ``num_ppus``.

    Photonic front-end power (converters, modulators, detectors, laser) scales
    linearly with the PPU count relative to the 100-PPU table.  Electronic
    power keeps ``1 - memory_logic_fraction`` fixed and scales the rest.
    """
    by = table.power_by_domain()
    ratio = num_ppus / BASELINE_PPUS
    return by["photonic"] * ratio + by["electronic"] * ((1 - memory_logic_fraction) + memory_logic_fraction * ratio)


@dataclass(frozen=True)
class PerfReport:
    M: int
    K: int
    N: int
    num_ppus: int
    jobs: int
    rounds: int
    latency_s: float
    throughput_gflops: float
    energy_eff_gflops_w: float
    power_w: float
    load_s: float
    compute_s: float
    digital_s: float
    store_s: float
    prologue_s: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _chain_time(nbytes: float, sys: SystemConfig) -> float:
    return nbytes * (1 / sys.dram_bw_bytes_s + 1 / sys.global_sram_bw_bytes_s + 1 / sys.local_sram_bw_bytes_s)


def _job_profile(M: int, K: int, N: int, sys: SystemConfig):
    """Job counts and per-job (pairs) for full and remainder inner-dimension chunks."""
    L = sys.tile_size
    s = sys.slice_config().num_slices
    kc = k_chunk(K, L, s, sys.dac_sram_bytes)
    tiles = -(-M // L) * -(-N // L)
    full, rem = divmod(K, kc)
    kinds = [(tiles * full, L * L * kc)]
    if rem:
        kinds.append((tiles, L * L * rem))
    return kinds, s


def _compute_terms(M: int, K: int, N: int, sys: SystemConfig):
    """Makespan decomposed as ``launches * t_launch + photonic_s + pairs * digital``.

    Jobs are sorted longest first and dealt round-robin over the PPUs, so the
    first PPU carries the makespan: the longest job of every round.
    """
    kinds, s = _job_profile(M, K, N, sys)
    P = sys.num_ppus
    pulses = slices_per_mantissa_schedule(s)
    launches = 0
    pairs = 0
    position = 0
    for count, per_job in sorted(kinds, key=lambda x: -x[1]):
        # rounds whose leading job (index r*P) falls in this group
        first = -(-position // P)
        last = -(-(position + count) // P)
        n = last - first
        launches += n
        pairs += n * per_job
        position += count
    jobs = sum(c for c, _ in kinds)
    return jobs, launches, pairs, pulses


def simulate_gemm_perf(M: int, K: int, N: int, sys: Optional[SystemConfig] = None, table: Optional[AreaPowerTable] = None) -> PerfReport:
    sys = sys or SystemConfig()
    for name, v in (("M", M), ("K", K), ("N", N)):
        if v < 1:
            raise InvalidValue(f"{name} must be >= 1, got {v}")
    jobs, rounds, pairs, pulses = _compute_terms(M, K, N, sys)
    photonic = pairs * pulses / sys.converter_rate_sps
    digital = pairs * sys.digital_cycles_per_element / sys.system_clock_hz
    compute = rounds * sys.ppu_launch_overhead_s + photonic + digital

    load = _chain_time((M * K + K * N) * sys.bytes_per_element_in, sys)
    store = _chain_time(M * N * sys.bytes_per_element_out, sys)
    L = sys.tile_size
    kc = k_chunk(K, L, sys.slice_config().num_slices, sys.dac_sram_bytes)
    if sys.overlap_load_compute:
        prologue = min(load, _chain_time(2 * L * kc * sys.bytes_per_element_in, sys))
        latency = prologue + max(load, compute) + store
    else:
        prologue = 0.0
        latency = load + compute + store
    throughput = 2.0 * M * K * N / latency / 1e9
    table = table or load_area_power_table(sys.area_power_table or None)
    power = scaled_power_w(table, sys.num_ppus, sys.memory_logic_power_fraction)
    return PerfReport(
        M, K, N, sys.num_ppus, jobs, rounds, latency, throughput,
        energy_efficiency_value(throughput, power), power,
        load, compute - digital, digital, store, prologue,
    )


def energy_efficiency_value(throughput_gflops: float, power_w: float) -> float:
    return throughput_gflops / power_w if throughput_gflops > 0 and power_w > 0 else 0.0


def energy_efficiency(report: PerfReport, table: AreaPowerTable, num_ppus: int, memory_logic_fraction: float = 0.5) -> float:
    """Throughput per watt with the power table scaled to ``num_ppus``."""
    return energy_efficiency_value(report.throughput_gflops, scaled_power_w(table, num_ppus, memory_logic_fraction))


def scaled_system(sys: SystemConfig, num_ppus: int) -> SystemConfig:
    """``sys`` with ``num_ppus`` PPUs and bandwidths scaled per ``bandwidth_scaling``."""
    if num_ppus < 1:
        raise InvalidValue(f"PPU count must be >= 1, got {num_ppus}")
    f = num_ppus / BASELINE_PPUS if sys.bandwidth_scaling == "linear" else 1.0
    return dataclasses.replace(
        sys,
        num_ppus=num_ppus,
        dram_bw_bytes_s=sys.dram_bw_bytes_s * f,
        global_sram_bw_bytes_s=sys.global_sram_bw_bytes_s * f,
        local_sram_bw_bytes_s=sys.local_sram_bw_bytes_s * f,
    )


def sweep_ppus(M: int, K: int, N: int, sys: Optional[SystemConfig] = None, ppu_counts: Sequence[int] = (25, 50, 100, 200), table: Optional[AreaPowerTable] = None) -> list[PerfReport]:
    sys = sys or SystemConfig()
    table = table or load_area_power_table(sys.area_power_table or None)
    return [simulate_gemm_perf(M, K, N, scaled_system(sys, int(c)), table) for c in ppu_counts]


def efficiency_crossover(M: int, K: int, N: int, reference_eff: float, sys: Optional[SystemConfig] = None, max_ppus: int = 4096) -> Optional[int]:
    """Smallest PPU count whose efficiency exceeds ``reference_eff`` (None if none up to ``max_ppus``)."""
    sys = sys or SystemConfig()
    table = load_area_power_table(sys.area_power_table or None)
    lo, hi = 1, max_ppus
    eff = lambda c: simulate_gemm_perf(M, K, N, scaled_system(sys, c), table).energy_eff_gflops_w
    if eff(hi) <= reference_eff:
        return None
    # efficiency is not strictly monotone in P (round quantisation), so scan
    for c in range(lo, hi + 1):
        if eff(c) > reference_eff:
            return c
    return None


def calibrate_constants(points: Sequence[tuple[int, float]], sys: Optional[SystemConfig] = None) -> tuple[float, float]:
    """Fit ``(launch_overhead_s, digital_cycles_per_element)`` to square-GEMM throughputs.

    ``points`` are ``(n, gflops)`` pairs.  Assumes compute-bound latency at each
    point (checked afterwards by the caller); two points give an exact solve,
    more points a least-squares fit.
    """
    sys = sys or SystemConfig()
    rows, rhs = [], []
    for n, gflops in points:
        target = 2.0 * n**3 / (gflops * 1e9)
        jobs, rounds, pairs, pulses = _compute_terms(n, n, n, sys)
        L = sys.tile_size
        kc = k_chunk(n, L, sys.slice_config().num_slices, sys.dac_sram_bytes)
        load = _chain_time(2 * n * n * sys.bytes_per_element_in, sys)
        store = _chain_time(n * n * sys.bytes_per_element_out, sys)
        prologue = min(load, _chain_time(2 * L * kc * sys.bytes_per_element_in, sys)) if sys.overlap_load_compute else load
        fixed = prologue + store + pairs * pulses / sys.converter_rate_sps
        rows.append([rounds, pairs / sys.system_clock_hz])
        rhs.append(target - fixed)
    sol, *_ = np.linalg.lstsq(np.array(rows, dtype=float), np.array(rhs), rcond=None)
    return float(sol[0]), float(sol[1])
