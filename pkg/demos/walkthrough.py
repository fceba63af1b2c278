"""Follow one small product through the simulated accelerator, step by step.

    python3 demos/walkthrough.py
"""
import numpy as np

from photogemm import SystemConfig, fp_to_bfp, matrix_multiply, slice_mantissa
from photogemm.photonic import NoiseModel, ppu_execute
from photogemm.slicing import SliceConfig, reconstruct_product
from photogemm.tiling import tile_matrices


def main():
    # 1. block floating point: one exponent per block, 10-bit magnitudes
    blk = fp_to_bfp([1.4277, -0.3125, 0.0503], 10)
    print("shared exponent", blk.shared_exponent, "mantissas", blk.signed().tolist())

    # 2. slicing: a 10-bit magnitude becomes two 5-bit digits
    cfg = SliceConfig(5, 2, 10)
    x, y = slice_mantissa(731, 10, cfg), slice_mantissa(613, 10, cfg)
    print("731 ->", x.slices, " 613 ->", y.slices)

    # 3. the PPU multiplies every slice pair; the DPPU shifts and adds
    (job,) = tile_matrices(np.array([[731 / 512]]), np.array([[613 / 512]]), 1, 10)
    partials = ppu_execute(job, NoiseModel(mode="ideal"))[:, :, 0]
    print("slice products", partials.tolist(), "->", reconstruct_product(partials, cfg))

    # 4. a whole GEMM, noise-free and with calibrated Gaussian noise
    g = np.random.default_rng(0)
    A, B = g.uniform(1, 100, (64, 64)), g.uniform(1, 100, (64, 64))
    for label, noise in (("ideal", NoiseModel(mode="ideal")), ("gaussian", NoiseModel())):
        res = matrix_multiply(A, B, SystemConfig(noise=noise))
        print(f"{label:9s} RelL2 {res.report.rel_l2:.3e}  expected {res.expected_report().rel_l2:.3e}  ({res.dataflow})")


if __name__ == "__main__":
    main()
