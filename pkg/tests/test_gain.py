import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmapcodec.codec import CodecConfig, encode
from qmapcodec.gain import (
    GainUnit,
    GainVector,
    IterationLimit,
    NotReachable,
    RateTarget,
    apply_gain,
    apply_sigma_gain,
    default_gain_unit,
    gain_for_beta,
    match_rate,
    quantize_beta,
)


def test_extrapolation_example():
    unit = GainUnit((2.0,), ([1.0, 1.0],))
    assert gain_for_beta(unit, 4.0) == GainVector([2.0, 2.0])


def test_extrapolation_below_range_uses_lower_endpoint():
    unit = GainUnit((2.0, 4.0), ([1.0, 3.0], [5.0, 5.0]))
    np.testing.assert_allclose(gain_for_beta(unit, 1.0).values, [0.5, 1.5])
    np.testing.assert_allclose(gain_for_beta(unit, 8.0).values, [10.0, 10.0])


def test_exact_hit_returns_stored_vector():
    unit = default_gain_unit(3)
    for b, v in zip(unit.betas, unit.vectors):
        assert gain_for_beta(unit, b) is v


@pytest.mark.parametrize("mode, expected", [("linear", 1.5), ("paper-literal", 0.5)])
def test_interpolation_modes(mode, expected):
    unit = GainUnit((1.0, 2.0), ([1.0], [2.0]))
    assert gain_for_beta(unit, 1.5, mode).values[0] == pytest.approx(expected)


def test_linear_continuous_at_stored_points():
    unit = default_gain_unit(2)
    for b, v in zip(unit.betas[1:], unit.vectors[1:]):
        np.testing.assert_allclose(gain_for_beta(unit, b * (1 - 1e-9)).values, v.values, rtol=1e-8)
        np.testing.assert_allclose(gain_for_beta(unit, b * (1 + 1e-9)).values, v.values, rtol=1e-8)


def test_default_unit_is_sqrt_and_monotone():
    unit = default_gain_unit(4)
    assert unit.betas == (1.0, 2.0, 4.0, 8.0)
    for b, v in zip(unit.betas, unit.vectors):
        np.testing.assert_allclose(v.values, math.sqrt(b))
    assert all(np.all(a.values <= b.values) for a, b in zip(unit.vectors, unit.vectors[1:]))


@pytest.mark.parametrize("beta", [0.0, -1.0])
def test_bad_beta(beta):
    with pytest.raises(ValueError):
        gain_for_beta(default_gain_unit(1), beta)


def test_unit_validation_and_json():
    with pytest.raises(ValueError):
        GainUnit((2.0, 1.0), ([1.0], [1.0]))
    with pytest.raises(ValueError):
        GainUnit((1.0,), ([1.0], [1.0]))
    with pytest.raises(ValueError):
        GainVector([1.0, 0.0])
    unit = GainUnit((1.0, 3.0), ([1.0, 2.0], [0.5, 4.0]))
    assert GainUnit.from_json(unit.to_json()) == unit
    with pytest.raises(ValueError):
        GainUnit.from_json('{"betas": [1]}')


def test_apply_gain_examples():
    lat = np.array([[1.0, -3.0]])
    np.testing.assert_array_equal(apply_gain(lat, GainVector([2.0])), [[2.0, -6.0]])
    np.testing.assert_array_equal(apply_gain(lat, GainVector.ones(1)), lat)
    with pytest.raises(ValueError):
        apply_gain(lat, GainVector([1.0, 2.0]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=8), st.integers(0, 1000))
def test_forward_inverse_identity(gains, seed):
    g = GainVector(gains)
    lat = np.random.default_rng(seed).normal(0, 50, (len(gains), 3, 4))
    back = apply_gain(apply_gain(lat, g), g, inverse=True)
    np.testing.assert_allclose(back, lat, rtol=1e-9)
    np.testing.assert_allclose(g.values * g.inverse, 1.0, rtol=1e-15)


def test_sigma_gain():
    sigma = np.ones((2, 3, 3))
    out = apply_sigma_gain(sigma, GainVector([0.5, 1.0]))
    assert np.all(out[0] == 0.5) and np.all(out[1] == 1.0)


def test_quantize_beta():
    assert quantize_beta(1.0) == 1.0
    assert quantize_beta(1 / 3) * 65536 == round(65536 / 3)
    with pytest.raises(ValueError):
        quantize_beta(1e-9)


def test_rate_target_validation():
    with pytest.raises(ValueError):
        RateTarget(0.5, tolerance=1.0)
    with pytest.raises(ValueError):
        RateTarget(-1)
    assert RateTarget(1.0).accepts(1.09) and not RateTarget(1.0).accepts(1.1)


def test_rate_monotone_in_global_gain(natural_prepared):
    bits = []
    for s in np.geomspace(0.25, 4.0, 10):
        unit = GainUnit((1.0,), (np.full(16, s),))
        bs = encode(natural_prepared, CodecConfig(gain_unit_y=unit))
        bits.append(len(bs.segments["y_residual"]))
    assert bits == sorted(bits)


def test_match_rate_at_stored_beta(natural_prepared):
    bpp = encode(natural_prepared, CodecConfig(beta=2.0)).bpp
    m = match_rate(natural_prepared, CodecConfig(), RateTarget(bpp))
    assert abs(m.bpp - bpp) / bpp < 0.10
    beta, achieved, bs = m
    assert bs.bpp == achieved and beta == m.beta


@pytest.mark.parametrize("target", [0.4, 0.6, 0.8])
def test_match_rate_within_tolerance(natural, target):
    m = match_rate(natural, CodecConfig(), RateTarget(target))
    assert abs(m.bpp - target) / target < 0.10
    assert m.bitstream.bpp == m.bpp


def test_match_rate_unreachable(natural_prepared):
    top = encode(natural_prepared, CodecConfig(beta=64.0)).bpp
    with pytest.raises(NotReachable) as err:
        match_rate(natural_prepared, CodecConfig(), RateTarget(10 * top))
    assert err.value.high[1] == pytest.approx(top)


def test_match_rate_iteration_limit(natural_prepared):
    with pytest.raises(IterationLimit) as err:
        match_rate(natural_prepared, CodecConfig(), RateTarget(0.55, tolerance=1e-6, max_iterations=3))
    assert err.value.best.bpp > 0


def test_match_rate_deterministic(natural_prepared):
    a = match_rate(natural_prepared, CodecConfig(), RateTarget(0.5))
    b = match_rate(natural_prepared, CodecConfig(), RateTarget(0.5))
    assert a.trials == b.trials and a.bitstream.to_bytes() == b.bitstream.to_bytes()
