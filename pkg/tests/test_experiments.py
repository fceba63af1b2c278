import numpy as np
import pytest

from photogemm.config import SystemConfig
from photogemm.experiments import (
    antithetic_report,
    calibrate_sigma,
    dot_product_errors,
    error_scaling,
    mantissa_sweep,
    noise_characterization,
    product_errors,
    random_matrix,
    trials_for_size,
)
from photogemm.engine import matrix_multiply
from photogemm.photonic import CALIBRATED_SIGMA, NoiseModel

IDEAL = SystemConfig(noise=NoiseModel(mode="ideal"))


def test_calibration_reproduces_shipped_sigma():
    assert calibrate_sigma() == pytest.approx(CALIBRATED_SIGMA, abs=5e-5)


def test_random_matrix_keyed():
    a = random_matrix(1, (7, 2), (3, 3))
    assert np.array_equal(a, random_matrix(1, (7, 2), (3, 3)))
    assert not np.array_equal(a, random_matrix(1, (7, 3), (3, 3)))
    assert a.min() >= 1 and a.max() <= 100


def test_trials_for_size():
    assert trials_for_size(8, 256) == 8
    assert trials_for_size(8, 512) == 2
    assert trials_for_size(8, 1024) == 1


def test_error_scaling_without_noise_is_quantisation_only():
    r = error_scaling(IDEAL, sizes=(8, 16, 32), trials=2)
    for row in r["rows"]:
        assert row["rel_l2"] == pytest.approx(row["quantization_only"]["rel_l2"])
        assert row["rel_l2"] < 2e-3
    assert "fit" in r


def test_error_scaling_threads_invariant():
    a = error_scaling(sizes=(8, 16, 24), trials=3, threads=1)
    b = error_scaling(sizes=(8, 16, 24), trials=3, threads=4)
    assert a == b


def test_mantissa_sweep_without_noise_improves_every_bit():
    r = mantissa_sweep(IDEAL, widths=range(6, 12), sizes=(16,), trials=1)
    rel = [w["rel_l2"] for w in r["sizes"][0]["widths"]]
    assert all(b < a for a, b in zip(rel, rel[1:]))


def test_antithetic_report_pools_mirror():
    g = np.random.default_rng(0)
    A, B = g.uniform(1, 2, (8, 8)), g.uniform(1, 2, (8, 8))
    sys = SystemConfig(noise=NoiseModel(sigma=3.0, mu=0.1))
    res = matrix_multiply(A, B, sys, seed=5)
    rep = antithetic_report(A, B, sys, res)
    # the pooled mean squared error is free of the noise-quantisation cross term
    q = res.quantized_values + res.noise_mean - res.reference
    n = res.values - res.quantized_values - res.noise_mean
    assert rep.rmse**2 == pytest.approx(np.mean(q * q + n * n), rel=1e-9)
    assert antithetic_report(A, B, IDEAL, matrix_multiply(A, B, IDEAL)) == matrix_multiply(A, B, IDEAL).report


def test_dot_product_errors_noise_free():
    e = dot_product_errors(NoiseModel(mode="ideal"), 64, 10, 5, 50)
    assert not e["noise_error"].any()
    assert np.all(np.abs(e["quantization_error"]) / e["reference"] < 2e-3)


@pytest.mark.parametrize("mode", ["gaussian", "mzm-transfer"])
def test_noise_characterisation_grows_with_width(mode):
    sys = SystemConfig(noise=NoiseModel(mode=mode))
    r = noise_characterization(sys, widths=range(3, 9), trials=400, dot_lengths=(32, 64), dot_trials=50)
    ae = [p["ae_mean"] for p in r["products"]]
    assert all(b > a for a, b in zip(ae, ae[1:]))
    assert sum(r["products"][0]["histogram"]["counts"]) == 400
    assert len(r["dot_products"]) == 4


def test_product_errors_slices_wide_operands():
    e = product_errors(NoiseModel(mode="ideal"), 8, 100, slice_width=5)
    assert e["num_slices"] == 2 and not e["error"].any()
    e = product_errors(NoiseModel(mode="ideal"), 4, 100, slice_width=5)
    assert e["num_slices"] == 1 and e["slice_width"] == 4
