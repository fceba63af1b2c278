import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photogemm.errors import InvalidConfig, InvalidValue
from photogemm.slicing import (
    SliceConfig,
    SlicedOperand,
    noise_gain,
    reconstruct_array,
    reconstruct_product,
    slice_array,
    slice_mantissa,
    slice_weights,
)

CFG = SliceConfig(5, 2)


def test_slice_examples():
    assert slice_mantissa(731, 10, CFG).slices == (22, 27)
    assert 22 * 32 + 27 == 731
    assert slice_mantissa(0, 10, CFG).slices == (0, 0)
    assert slice_mantissa(7, 10, CFG).slices == (0, 7)
    assert slice_mantissa(613, 10, CFG).slices == (19, 5)


def test_reconstruct_examples():
    assert reconstruct_product([[418, 110], [513, 135]], CFG) == 448103 == 731 * 613
    assert reconstruct_product([[0, 0], [0, 0]], CFG) == 0
    assert reconstruct_product([[37]], SliceConfig(5, 1)) == 37
    assert reconstruct_product(np.array([[418.0, 110.0], [513.0, 135.0]]), CFG) == 448103.0


def test_slice_errors():
    with pytest.raises(InvalidValue):
        slice_mantissa(1024, 10, CFG)
    with pytest.raises(InvalidValue):
        slice_mantissa(-1, 10, CFG)
    with pytest.raises(InvalidConfig):
        slice_mantissa(3, 11, CFG)
    with pytest.raises(InvalidConfig):
        SliceConfig(7, 2)
    with pytest.raises(InvalidConfig):
        SliceConfig(0, 2)
    with pytest.raises(InvalidConfig):
        SliceConfig(5, 2, 11)
    with pytest.raises(InvalidValue):
        reconstruct_product([[1, 2, 3]], CFG)


@pytest.mark.parametrize("padding", ["low", "high"])
@pytest.mark.parametrize("b,d", [(8, 3), (8, 5), (7, 4), (9, 2)])
def test_padding_layouts(padding, b, d):
    cfg = SliceConfig.for_mantissa(b, d, padding)
    for m in (0, 1, 5, 2**b - 1, 2 ** (b - 1)):
        op = slice_mantissa(m, b, cfg)
        assert all(0 <= x < 2**d for x in op.slices)
        assert op.magnitude(cfg) == m
    top = slice_mantissa(2**b - 1, b, cfg).slices
    if padding == "high" and cfg.capacity > b:
        assert top[0] < 2**d - 1  # spare bits live in the top digit
    if padding == "low" and cfg.capacity > b:
        assert top[0] == 2**d - 1  # value is left-justified


@pytest.mark.parametrize("padding", ["low", "high"])
@pytest.mark.parametrize("b,d", [(10, 5), (10, 4), (10, 3), (9, 5), (8, 6)])
def test_exact_factorisation_exhaustive(padding, b, d):
    cfg = SliceConfig.for_mantissa(b, d, padding)
    m = np.arange(2**b)
    s = slice_array(m, cfg)
    assert s.max() < 2**d
    for chunk in np.array_split(m, 8):
        x = s[chunk][:, None, :, None]
        y = s[None, :, None, :]
        partials = x * y  # (chunk, 2**b, s, s)
        got = reconstruct_array(partials, cfg)
        np.testing.assert_array_equal(got, chunk[:, None] * m[None, :])


def test_scalar_and_vector_slicing_agree():
    cfg = SliceConfig.for_mantissa(11, 4)
    m = np.arange(0, 2**11, 37)
    vec = slice_array(m, cfg)
    for i, v in enumerate(m):
        assert tuple(vec[i]) == slice_mantissa(int(v), 11, cfg).slices


@settings(max_examples=200, deadline=None)
@given(
    st.integers(0, 2**10 - 1),
    st.integers(0, 2**10 - 1),
    st.sampled_from([(10, 5), (10, 4), (9, 5), (10, 3)]),
    st.sampled_from(["low", "high"]),
    st.lists(st.floats(-3, 3), min_size=16, max_size=16),
)
def test_noise_is_linear(u, v, bd, padding, eps):
    b, d = bd
    cfg = SliceConfig.for_mantissa(b, d, padding)
    u, v = u % 2**b, v % 2**b
    s = cfg.num_slices
    su = np.array(slice_mantissa(u, b, cfg).slices)
    sv = np.array(slice_mantissa(v, b, cfg).slices)
    e = np.array(eps[: s * s]).reshape(s, s)
    exact = np.outer(su, sv).astype(float)
    noisy = reconstruct_product(exact + e, cfg)
    w = slice_weights(cfg) / 2.0 ** (2 * cfg.pad)
    assert noisy - u * v == pytest.approx(float((e * w).sum()), abs=1e-9 * max(1.0, abs(u * v)))


def test_sign_rule():
    op = SlicedOperand(-1, (22, 27))
    other = SlicedOperand(1, (19, 5))
    partials = np.outer(op.slices, other.slices)
    value = op.sign * other.sign * reconstruct_product(partials, CFG)
    assert value == -(731 * 613)


def test_noise_gain_is_width_independent_in_value_units():
    # one unit of slice-product noise has the same value-domain size for b and b+1
    # once the extra exponent bit is accounted for
    _, g10 = noise_gain(SliceConfig.for_mantissa(10, 5))
    _, g11 = noise_gain(SliceConfig.for_mantissa(11, 5))
    assert g11 / 4 == pytest.approx(g10, rel=1e-3)
