import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from warpspace.warp import (
    DegenerateGradient,
    LatentPath,
    UndefinedRatio,
    WarpingFunction,
    eval_warp,
    grad_warp,
    nonlinearity_coefficient,
    shift,
    traverse,
)

from oracles import central_difference, relative_error


def random_warp(rng, d, n):
    centers = rng.standard_normal((n, d))
    weights = rng.standard_normal(n)
    log_scales = np.log(rng.uniform(0.1, 2.0, n) / d)
    return WarpingFunction(centers, weights, log_scales)


def bipolar_pair(s, alpha=1.0, gamma=1e-8):
    s = np.asarray(s, dtype=float)
    return WarpingFunction.bipolar(np.stack([s, -s]), [alpha], [np.log(gamma)])


# eval_warp -------------------------------------------------------------------


def test_single_rbf_at_center_is_one():
    warp = WarpingFunction(np.zeros((1, 3)), [1.0], [0.0])
    assert eval_warp(warp, np.zeros(3)) == 1.0


@pytest.mark.parametrize("alpha,gamma", [(1.0, 1.0), (-2.5, 0.3), (0.7, 1e-8)])
def test_bipolar_pair_vanishes_at_origin(alpha, gamma):
    warp = bipolar_pair([0.4, -1.2, 2.0], alpha, gamma)
    assert eval_warp(warp, np.zeros(3)) == 0.0


def test_hand_evaluated_pair():
    warp = WarpingFunction([[1.0, 0.0], [-1.0, 0.0]], [1.0, -1.0], np.log([0.5, 0.5]))
    assert eval_warp(warp, [1.0, 0.0]) == pytest.approx(1 - np.exp(-2.0), rel=1e-15)
    assert eval_warp(warp, [1.0, 0.0]) == pytest.approx(0.8646647, abs=1e-7)


def test_dimension_mismatch_raises():
    warp = WarpingFunction(np.zeros((2, 3)), [1.0, -1.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        eval_warp(warp, np.zeros(4))
    with pytest.raises(ValueError):
        grad_warp(warp, np.zeros(2))


def test_construction_checks_lengths():
    with pytest.raises(ValueError):
        WarpingFunction(np.zeros((2, 3)), [1.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        WarpingFunction(np.zeros((0, 3)), [], [])


def test_bipolar_constructor_ties_pairs():
    warp = WarpingFunction.bipolar(np.ones((4, 2)), [0.3, -1.1], [0.1, -2.0])
    assert warp.is_bipolar()
    np.testing.assert_array_equal(warp.weights, [0.3, -0.3, -1.1, 1.1])
    np.testing.assert_array_equal(warp.log_scales, [0.1, 0.1, -2.0, -2.0])
    assert np.all(warp.scales > 0)


# grad_warp -------------------------------------------------------------------


def test_gradient_zero_at_single_center():
    s = np.array([0.3, -0.2])
    warp = WarpingFunction(s[None], [2.0], [0.5])
    np.testing.assert_array_equal(grad_warp(warp, s), np.zeros(2))


@pytest.mark.parametrize("gamma", [1.0, 1e-2, 1e-5, 1e-8])
def test_bipolar_gradient_at_origin(gamma):
    s = np.array([0.5, -1.0, 2.0])
    alpha = 1.7
    warp = bipolar_pair(s, alpha, gamma)
    expected = 4 * alpha * gamma * np.exp(-gamma * s @ s) * s
    np.testing.assert_allclose(grad_warp(warp, np.zeros(3)), expected, rtol=1e-12)


def test_bipolar_gradient_small_gamma_limit():
    s = np.array([0.5, -1.0, 2.0])
    alpha, gamma = 1.7, 1e-8
    got = grad_warp(bipolar_pair(s, alpha, gamma), np.zeros(3))
    np.testing.assert_allclose(got, 4 * alpha * gamma * s, rtol=1e-7)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    warp = random_warp(rng, 8, 6)
    z = rng.standard_normal(8)
    fd = central_difference(lambda: eval_warp(warp, z), z, h=1e-5)
    assert relative_error(grad_warp(warp, z), fd) < 1e-6


def test_eval_and_grad_are_bit_deterministic(rng):
    warp = random_warp(rng, 16, 10)
    z = rng.standard_normal(16)
    assert eval_warp(warp, z) == eval_warp(warp, z.copy())
    assert grad_warp(warp, z).tobytes() == grad_warp(warp, z.copy()).tobytes()


# shift -------------------------------------------------------------------------


@given(
    seed=st.integers(0, 2**31),
    eps=st.floats(1e-3, 10.0) | st.floats(-10.0, -1e-3),
)
def test_shift_has_length_eps(seed, eps):
    rng = np.random.default_rng(seed)
    warp = random_warp(rng, 6, 4)
    z = rng.standard_normal(6)
    dz = shift(warp, z, eps)
    assert np.linalg.norm(dz) == pytest.approx(abs(eps), rel=1e-12)


def test_linear_regime_shift_is_constant_direction(rng):
    s = rng.standard_normal(10)
    warp = bipolar_pair(s, 0.8, 1e-8)
    unit = s / np.linalg.norm(s)
    for _ in range(50):
        z = rng.standard_normal(10)
        z *= rng.uniform(0, 10) / np.linalg.norm(z)
        dz = shift(warp, z, 0.3)
        assert dz @ unit / 0.3 > 1 - 1e-6


def test_degenerate_gradient_raises():
    # all centers at the origin with weights summing to zero cancel exactly
    warp = WarpingFunction(np.zeros((2, 3)), [1.0, -1.0], [0.0, 0.0])
    with pytest.raises(DegenerateGradient) as info:
        shift(warp, np.zeros(3), 0.5)
    assert info.value.norm == 0.0
    np.testing.assert_array_equal(info.value.z, np.zeros(3))


def test_shift_rejects_zero_eps(rng):
    with pytest.raises(ValueError):
        shift(random_warp(rng, 3, 2), np.zeros(3), 0.0)


# traverse ----------------------------------------------------------------------


def test_zero_steps_returns_start(rng):
    z0 = rng.standard_normal(4)
    path = traverse(random_warp(rng, 4, 2), z0, 0.5, 0)
    assert len(path) == 1
    np.testing.assert_array_equal(path.points[0], z0)


def test_linear_regime_traversal_is_collinear(rng):
    eps = 0.7
    warp = bipolar_pair(rng.standard_normal(6), 1.0, 1e-8)
    path = traverse(warp, rng.standard_normal(6), eps, 5)
    assert len(path) == 6
    centered = path.points - path.points.mean(axis=0)
    _, sv, vt = np.linalg.svd(centered)
    residual = centered - np.outer(centered @ vt[0], vt[0])
    assert np.abs(residual).max() < 1e-6 * eps
    assert nonlinearity_coefficient(path) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("sign", [1, -1])
def test_traversal_steps_have_length_eps(rng, sign):
    warp = random_warp(rng, 5, 6)
    path = traverse(warp, rng.standard_normal(5), 0.4, 12, sign)
    steps = np.linalg.norm(np.diff(path.points, axis=0), axis=1)
    np.testing.assert_allclose(steps, 0.4, rtol=1e-9)
    assert path.direction_sign == sign


def test_traversal_reports_failing_step():
    warp = WarpingFunction(np.zeros((2, 2)), [1.0, -1.0], [0.0, 0.0])
    with pytest.raises(DegenerateGradient) as info:
        traverse(warp, np.zeros(2), 0.1, 3)
    assert info.value.step == 0
    assert len(info.value.partial) == 1


def test_traverse_argument_checks(rng):
    warp = random_warp(rng, 3, 2)
    with pytest.raises(ValueError):
        traverse(warp, np.zeros(3), -0.1, 2)
    with pytest.raises(ValueError):
        traverse(warp, np.zeros(3), 0.1, 2, sign=0)


# non-linearity coefficient -------------------------------------------------------


def test_phi_straight_path():
    assert nonlinearity_coefficient(LatentPath([[0, 0], [1, 0], [2, 0]], 1.0)) == 1.0


def test_phi_right_angle():
    phi = nonlinearity_coefficient(LatentPath([[0, 0], [1, 0], [1, 1]], 1.0))
    assert phi == pytest.approx(np.sqrt(2), rel=1e-15)
    assert phi == pytest.approx(1.4142136, abs=1e-7)


def test_phi_undefined_cases():
    with pytest.raises(UndefinedRatio):
        nonlinearity_coefficient(LatentPath([[0.0, 0.0]], 1.0))
    with pytest.raises(UndefinedRatio):
        nonlinearity_coefficient(LatentPath([[0, 0], [1, 0], [0, 0]], 1.0))


@given(arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 4)),
              elements=st.floats(-100, 100)))
def test_phi_at_least_one(points):
    if np.linalg.norm(points[-1] - points[0]) < 1e-6:
        return
    assert nonlinearity_coefficient(points) >= 1 - 1e-12
