import numpy as np
import pytest

from photogemm import rng
from photogemm.bfp import quantize_matrix
from photogemm.engine import batch_dot
from photogemm.errors import AlignmentError, CapacityError, InvalidConfig, InvalidValue
from photogemm.photonic import (
    NoiseModel,
    PpuConfig,
    mzm_product,
    photonic_multiply,
    photonic_multiply_array,
    ppu_execute,
    slices_per_mantissa_schedule,
)
from photogemm.slicing import SliceConfig, noise_gain
from photogemm.tiling import build_jobs, tile_matrices

IDEAL = NoiseModel(mode="ideal")


def gaussian(sigma, mu=0.0, seed=0):
    return NoiseModel(mode="gaussian", mu=mu, sigma=sigma, sigma_scaling="constant", seed=seed)


def test_ideal_multiply():
    assert photonic_multiply(22, 19, IDEAL) == 418.0


def test_gaussian_multiply_statistics():
    x = np.full(100_000, 22)
    y = np.full(100_000, 19)
    out = photonic_multiply_array(x, y, gaussian(2.0), stream=(7,))
    assert abs(out.mean() - 418) <= 0.05
    assert 1.9 <= out.std() <= 2.1


def test_zero_operand():
    assert photonic_multiply(0, 17, IDEAL) == 0.0
    out = photonic_multiply_array(np.zeros(1000, int), np.full(1000, 9), gaussian(0.5))
    assert abs(out.mean()) < 4 * 0.5 / np.sqrt(1000)


def test_scalar_keyed_determinism():
    n = gaussian(1.0, seed=11)
    a = photonic_multiply(3, 4, n, (1, 2, 3))
    b = photonic_multiply(3, 4, n, (1, 2, 3))
    c = photonic_multiply(3, 4, n, (1, 2, 4))
    assert a == b and a != c


def test_slice_range_checked():
    with pytest.raises(InvalidValue):
        photonic_multiply(32, 1, IDEAL)
    with pytest.raises(InvalidValue):
        photonic_multiply(-1, 1, IDEAL)


def test_noise_model_validation():
    with pytest.raises(InvalidConfig):
        NoiseModel(sigma=-1)
    with pytest.raises(InvalidConfig):
        NoiseModel(mode="loud")
    with pytest.raises(InvalidConfig):
        NoiseModel(v_pi=0)
    with pytest.raises(InvalidConfig):
        NoiseModel(calibration_order=0)
    with pytest.raises(InvalidConfig):
        PpuConfig(products_per_pulse=3)


def test_sigma_scaling_rules():
    n = NoiseModel(sigma=2.0)
    assert n.sigma_for(5) == 2.0
    assert n.sigma_for(4) == pytest.approx(2.0 * (15 / 31) ** 2)
    assert NoiseModel(sigma=2.0, sigma_scaling="constant").sigma_for(3) == 2.0
    assert NoiseModel(sigma=2.0, sigma_by_width={3: 0.1}).sigma_for(3) == 0.1
    assert IDEAL.sigma_for(5) == 0.0


def test_schedule():
    assert slices_per_mantissa_schedule(2, 1) == 1
    assert slices_per_mantissa_schedule(4, 1) == 4
    assert slices_per_mantissa_schedule(4, 4) == 1
    assert slices_per_mantissa_schedule(3, 1) == 3
    assert slices_per_mantissa_schedule(1, 1) == 1


def single_pair_job(a, b):
    return tile_matrices(np.array([[float(a)]]), np.array([[float(b)]]), 1, 10, SliceConfig(5, 2))[0]


def test_ppu_single_pair():
    job = single_pair_job(731, 613)
    assert job.a_flat.tolist() == [731] and job.b_flat.tolist() == [613]
    streams = ppu_execute(job, IDEAL)
    assert streams.shape == (2, 2, 1)
    assert streams[:, :, 0].tolist() == [[418, 110], [513, 135]]
    assert sorted(streams.ravel().tolist()) == [110, 135, 418, 513]


def test_ppu_zero_operands():
    job = tile_matrices(np.zeros((2, 3)), np.zeros((3, 2)), 2, 10)[0]
    assert not ppu_execute(job, IDEAL).any()


def test_ppu_stream_length_matches_tile_pair():
    A = np.arange(1, 13, dtype=float).reshape(3, 4)
    B = np.arange(1, 13, dtype=float).reshape(4, 3)
    job = tile_matrices(A, B, 2, 10)[0]
    out = ppu_execute(job, IDEAL)
    assert out.shape == (2, 2, 16)


def test_ppu_errors():
    job = single_pair_job(5, 6)
    bad = type(job)(**{**job.__dict__, "b_slices": np.zeros((2, 2), dtype=np.int64)})
    with pytest.raises(AlignmentError):
        ppu_execute(bad, IDEAL)
    with pytest.raises(CapacityError):
        ppu_execute(job, IDEAL, ppu=PpuConfig(dac_sram_bytes=1))


def test_ppu_noise_is_keyed_by_global_coordinates():
    rng_ = np.random.default_rng(0)
    A = rng_.uniform(1, 100, (4, 6))
    B = rng_.uniform(1, 100, (6, 4))
    noise = gaussian(1.0, seed=5)
    qa, qb = quantize_matrix(A, 10, "row"), quantize_matrix(B, 10, "col")
    cfg = SliceConfig(5, 2, 10)
    seen = {}
    for L in (1, 2, 4):
        for job in build_jobs(qa, qb, L, cfg):
            out = ppu_execute(job, noise)
            exact = ppu_execute(job, IDEAL)
            for t in np.nonzero(job.slot_index >= 0)[0]:
                key = int(job.slot_index[t])
                val = tuple(np.round(out[:, :, t] - exact[:, :, t], 12).ravel())
                assert seen.setdefault(key, val) == val
    assert len(seen) == 4 * 4 * 6


def test_unbiased_noise():
    z = rng.normals(3, (rng.SLICE_NOISE,), 0, 200_000)
    assert abs(z.mean()) < 4 / np.sqrt(z.size)
    assert z.std() == pytest.approx(1.0, rel=0.01)


def test_position_addressing():
    full = rng.normals(9, (1, 2), 0, 50)
    for start in (0, 1, 3, 4, 5, 17, 33):
        np.testing.assert_array_equal(rng.normals(9, (1, 2), start, 10), full[start:start + 10])


def test_dot_product_error_grows_linearly():
    cfg = SliceConfig(5, 2, 10)
    noise = gaussian(0.3, mu=0.01)
    sum_w, rss_w = noise_gain(cfg)
    g = np.random.default_rng(4)
    lengths = [32, 64, 128, 256, 512, 1024]
    variances, means = [], []
    for L in lengths:
        a = g.integers(0, 1024, (2000, L))
        b = g.integers(0, 1024, (2000, L))
        r = batch_dot(a, b, cfg, noise, seed=L)
        err = r.noisy - r.exact
        variances.append(err.var())
        means.append(err.mean())
        se = err.std() / np.sqrt(err.size)
        assert abs(err.mean() - L * 0.01 * sum_w) < 4 * se
    slope = np.polyfit(lengths, variances, 1)[0]
    assert slope == pytest.approx((0.3 * rss_w) ** 2, rel=0.1)


def test_transfer_calibration_converges():
    g = np.arange(32)
    worst = []
    for order in range(1, 10):
        n = NoiseModel(mode="mzm-transfer", sigma=0.0, calibration_order=order)
        err = mzm_product(g[:, None], g[None, :], 5, n) - np.outer(g, g)
        worst.append(np.abs(err).max())
    assert all(b < a for a, b in zip(worst, worst[1:]))
    assert worst[-1] < worst[0] / 10


def test_transfer_mode_without_gaussian_is_deterministic():
    n = NoiseModel(mode="mzm-transfer", sigma=0.0, seed=1)
    m = NoiseModel(mode="mzm-transfer", sigma=0.0, seed=2)
    assert photonic_multiply(20, 30 % 32, n) == photonic_multiply(20, 30 % 32, m)
