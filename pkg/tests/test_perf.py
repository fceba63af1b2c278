import dataclasses

import pytest

from photogemm.config import CALIBRATED_DIGITAL_CYCLES, CALIBRATED_LAUNCH_OVERHEAD_S, SystemConfig
from photogemm.errors import InvalidConfig, InvalidValue
from photogemm.perf import (
    REFERENCE_DATA,
    area_power_report,
    calibrate_constants,
    efficiency_crossover,
    load_area_power_table,
    scaled_power_w,
    simulate_gemm_perf,
    sweep_ppus,
)


def test_recalibration_reproduces_shipped_constants():
    pts = [(16, 209.25), (1024, 6654.44)]
    launch, cycles = calibrate_constants(pts)
    assert launch == pytest.approx(CALIBRATED_LAUNCH_OVERHEAD_S, rel=1e-5)
    assert cycles == pytest.approx(CALIBRATED_DIGITAL_CYCLES, rel=1e-5)


def test_reference_throughputs():
    assert simulate_gemm_perf(16, 16, 16).throughput_gflops == pytest.approx(209.25, rel=1e-3)
    rep = simulate_gemm_perf(1024, 1024, 1024)
    assert rep.throughput_gflops == pytest.approx(6654.44, rel=1e-3)
    assert rep.jobs == 512 * 512
    assert rep.rounds == 2622
    assert rep.power_w == pytest.approx(170.47)


def test_compute_halves_when_ppus_double():
    sys = SystemConfig()
    a = simulate_gemm_perf(1024, 1024, 1024, sys)
    b = simulate_gemm_perf(1024, 1024, 1024, dataclasses.replace(sys, num_ppus=200))
    assert b.rounds == 1311
    assert b.compute_s == pytest.approx(a.compute_s / 2, rel=1e-12)
    assert b.digital_s == pytest.approx(a.digital_s / 2, rel=1e-12)


def test_sequential_phases_are_slower():
    sys = SystemConfig()
    a = simulate_gemm_perf(256, 256, 256, sys)
    b = simulate_gemm_perf(256, 256, 256, dataclasses.replace(sys, overlap_load_compute=False))
    assert b.latency_s > a.latency_s
    assert b.latency_s == pytest.approx(b.load_s + b.compute_s + b.digital_s + b.store_s)


def test_k_split_adds_jobs():
    # 32768 bytes / (2 * 2 tiles * 2 slices) = 4096 inner steps per job
    assert simulate_gemm_perf(2, 16384, 2).jobs == 4
    assert simulate_gemm_perf(2, 4096, 2).jobs == 1
    assert simulate_gemm_perf(3, 5000, 3).jobs == 2 * 2 * 2


def test_efficiency_and_sweep():
    rep = simulate_gemm_perf(1024, 1024, 1024)
    assert rep.energy_eff_gflops_w == pytest.approx(39.04, abs=0.01)
    effs = [r.energy_eff_gflops_w for r in sweep_ppus(1024, 1024, 1024)]
    assert effs == sorted(effs)
    assert effs[2] == pytest.approx(rep.energy_eff_gflops_w)


def test_crossover():
    c = efficiency_crossover(1024, 1024, 1024, REFERENCE_DATA["gpu_rtx3060_energy_eff_gflops_w"], max_ppus=400)
    assert 100 <= c <= 120
    assert efficiency_crossover(1024, 1024, 1024, 1e6, max_ppus=50) is None


def test_power_scaling():
    table = load_area_power_table()
    assert scaled_power_w(table, 100) == pytest.approx(table.total_power_w)
    by = table.power_by_domain()
    assert scaled_power_w(table, 200) == pytest.approx(2 * by["photonic"] + 1.5 * by["electronic"])
    assert scaled_power_w(table, 200, 0.0) == pytest.approx(2 * by["photonic"] + by["electronic"])


def test_area_power_table():
    table = load_area_power_table()
    rep = area_power_report(table)
    assert rep["total_area_mm2"] == 1183.86
    assert rep["total_power_w"] == 170.47
    assert sum(r["area_portion"] for r in rep["components"]) == pytest.approx(1.0)


def test_custom_table(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("# comment\ncomponent,domain,area_mm2,power_w\nA,electronic,1.5,2\nB,photonic,0.5,1\n")
    table = load_area_power_table(str(path))
    assert table.total_area_mm2 == 2.0 and table.power_by_domain() == {"electronic": 2.0, "photonic": 1.0}
    path.write_text("component,domain,area_mm2,power_w\nA,quantum,1,1\n")
    with pytest.raises(InvalidConfig):
        load_area_power_table(str(path))


def test_invalid_sizes():
    with pytest.raises(InvalidValue):
        simulate_gemm_perf(0, 4, 4)
    with pytest.raises(InvalidValue):
        sweep_ppus(4, 4, 4, ppu_counts=[0])
