import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from warpspace.evaluation import (
    CorrelationReport,
    coord_baseline,
    correlation_report,
    diagonal_dominance,
    pearson_with_steps,
    phi_report,
    random_baseline,
    reconstructor_accuracy,
    walk_and_trace,
    walk_batch,
)
from warpspace.generator import SyntheticGenerator, axis_aligned_map
from warpspace.network import InitConfig, init
from warpspace.nn import Reconstructor


def axis_generator(d=16):
    return SyntheticGenerator(d, matrix=axis_aligned_map(d))


def test_pearson_matches_scipy(rng):
    values = rng.standard_normal((21, 5))
    got = pearson_with_steps(values)
    steps = np.arange(21)
    ref = [stats.pearsonr(steps, values[:, a])[0] for a in range(5)]
    np.testing.assert_allclose(got, ref, rtol=1e-12)


def test_pearson_monotone_and_constant():
    s = np.linspace(-1, 1, 9)
    values = np.stack([np.tanh(3 * s), -s, np.full(9, 0.4)], axis=1)
    r = pearson_with_steps(values)
    assert r[0] > 0.95 and r[1] == pytest.approx(-1.0, abs=1e-15) and r[2] == 0.0


def test_span_tolerance_flattens_drift():
    s = np.arange(9.0)
    values = np.stack([s, 1.0 + 1e-9 * s], axis=1)
    assert pearson_with_steps(values)[1] == pytest.approx(1.0)
    np.testing.assert_allclose(pearson_with_steps(values, span_tol=[0.0, 1e-7]), [1.0, 0.0], atol=1e-14)


@given(arrays(np.float64, (7, 3), elements=st.floats(-50, 50)))
def test_pearson_bounded(values):
    r = pearson_with_steps(values)
    assert np.all(np.abs(r) <= 1.0)


def test_coord_fixture_dominance():
    gen = axis_generator()
    rep = correlation_report(coord_baseline(5, 16), gen, 50, 10, 0.1, np.random.default_rng(0))
    np.testing.assert_array_equal(rep.assignment, np.arange(5))
    assert np.all(np.diag(np.abs(rep.raw)) > 0.99)
    off = np.abs(rep.raw)[~np.eye(5, dtype=bool)]
    assert off.max() < 0.05
    assert diagonal_dominance(rep) > 0.8
    np.testing.assert_allclose(rep.l1_normalized.sum(axis=1), 1.0, rtol=1e-12)


def test_diagonal_dominance_hand_values():
    m = np.array([[0.8, 0.1, 0.1], [0.1, 0.7, 0.2], [0.2, 0.2, 0.6]])
    rep = CorrelationReport(m, m, np.array([0, 1, 2]), np.zeros(3))
    # assigned mean 0.7, off mean 0.15
    assert diagonal_dominance(rep) == pytest.approx(0.55, abs=1e-15)
    collapsed = CorrelationReport(m, m, np.array([0, 0, 0]), np.zeros(3))
    assert diagonal_dominance(collapsed) == pytest.approx(
        (0.8 + 0.1 + 0.1) / 3 - (0.1 + 0.7 + 0.2 + 0.2 + 0.2 + 0.6) / 6, abs=1e-15)


def test_zero_row_stays_zero():
    gen = axis_generator(8)
    # warpings along axes 6, 7 touch no factor
    from warpspace.network import fixed_linear_network

    net = fixed_linear_network(np.eye(8)[[0, 6]])
    rep = correlation_report(net, gen, 10, 4, 0.2, np.random.default_rng(0))
    np.testing.assert_array_equal(rep.l1_normalized[1], 0.0)
    assert rep.l1_normalized[0, 0] == 1.0


def test_csv_layout():
    rep = correlation_report(coord_baseline(5, 16), axis_generator(), 5, 3, 0.1,
                             np.random.default_rng(1))
    lines = rep.matrix_csv().splitlines()
    assert lines[0] == "warping,attr_cx,attr_cy,attr_sigma,attr_theta,attr_intensity"
    assert len(lines) == 6
    assert rep.ranges_csv().splitlines()[0] == "attribute,warping,range"


def test_walk_batch_matches_single_walk(rng):
    net = init(2, 4, 6, seed=3, config=InitConfig(gamma_init=0.1))
    gen = SyntheticGenerator(6)
    z0 = rng.standard_normal((3, 6))
    points, ok = walk_batch(net, 1, z0, 0.4, 5)
    assert ok.all()
    for i in range(3):
        path, trace = walk_and_trace(net, gen, 1, z0[i], 0.4, 5)
        np.testing.assert_allclose(points[i], path.points, rtol=1e-10, atol=1e-12)
        np.testing.assert_array_equal(trace.steps, np.arange(-5, 6))
        np.testing.assert_allclose(trace.center, gen.attribute_array(z0[i]))


def test_phi_linear_baselines_are_one():
    rep = phi_report(random_baseline(5, 16, 0), None, 20, 10, 1.0, np.random.default_rng(0))
    np.testing.assert_allclose(rep.per_warping, 1.0, atol=1e-6)
    assert rep.sorted_values == sorted(rep.per_warping, reverse=True)


def test_phi_curved_paths_above_one():
    net = init(3, 4, 4, seed=1, config=InitConfig(gamma_init=0.5, sigma_support=1.0))
    rep = phi_report(net, None, 20, 10, 0.5, np.random.default_rng(2))
    vals = rep.per_warping[np.isfinite(rep.per_warping)]
    assert np.all(vals >= 1 - 1e-12) and vals.max() > 1.001
    assert rep.to_csv().splitlines()[0] == "rank,warping,phi"


def test_random_baseline_unit_directions():
    net = random_baseline(4, 10, seed=5)
    for k in range(4):
        assert np.linalg.norm(net.direction(k, np.zeros(10))) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        coord_baseline(11, 10)


def test_untrained_reconstructor_near_chance():
    net = random_baseline(5, 8, seed=0)
    acc = reconstructor_accuracy(net, Reconstructor(5, seed=0), SyntheticGenerator(8), 400,
                                 np.random.default_rng(0))
    assert 0.0 <= acc <= 100.0
    assert acc < 60.0
