"""Throughput and efficiency of the modelled accelerator across sizes and PPU counts.

    python3 demos/design_space.py
"""
from photogemm.config import SystemConfig
from photogemm.perf import REFERENCE_DATA, area_power_report, efficiency_crossover, load_area_power_table, simulate_gemm_perf, sweep_ppus


def main():
    sys = SystemConfig()
    print(" size   GFLOPS   GFLOPS/W   jobs")
    for n in (16, 64, 256, 1024, 4096):
        r = simulate_gemm_perf(n, n, n, sys)
        print(f"{n:5d} {r.throughput_gflops:9.2f} {r.energy_eff_gflops_w:9.2f} {r.jobs:8d}")

    print("\nPPUs  GFLOPS/W at 1024^3")
    for r in sweep_ppus(1024, 1024, 1024, sys, (25, 50, 100, 200, 400)):
        print(f"{r.num_ppus:4d} {r.energy_eff_gflops_w:9.2f}")
    gpu = REFERENCE_DATA["gpu_rtx3060_energy_eff_gflops_w"]
    print(f"\nfirst PPU count above {gpu} GFLOPS/W:", efficiency_crossover(1024, 1024, 1024, gpu, sys, max_ppus=400))

    rep = area_power_report(load_area_power_table())
    print(f"\narea {rep['total_area_mm2']} mm2, power {rep['total_power_w']} W")
    for c in sorted(rep["components"], key=lambda c: -c["power_w"])[:4]:
        print(f"  {c['component']:14s} {100 * c['power_portion']:5.1f}% of power")


if __name__ == "__main__":
    main()
