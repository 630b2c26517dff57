import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from warpspace import autodiff as ad
from warpspace.autodiff import Tape, Tensor
from warpspace.generator import SyntheticGenerator, axis_aligned_map, factor_map

from oracles import central_difference, relative_error


@pytest.mark.parametrize("dim,seed", [(5, 0), (16, 3), (64, 11)])
def test_factor_rows_orthonormal(dim, seed):
    m = factor_map(dim, seed)
    assert m.shape == (5, dim)
    np.testing.assert_allclose(m @ m.T, np.eye(5), atol=1e-10)


@pytest.mark.parametrize("dim", [1, 4])
def test_small_latent_uses_orthonormal_columns(dim):
    m = factor_map(dim, 0)
    assert m.shape == (5, dim)
    np.testing.assert_allclose(m.T @ m, np.eye(dim), atol=1e-10)
    SyntheticGenerator(dim)


def test_generator_is_immutable():
    gen = SyntheticGenerator(8)
    with pytest.raises(ValueError):
        gen.matrix[0, 0] = 1.0


def test_rejects_non_orthonormal_map():
    with pytest.raises(ValueError):
        SyntheticGenerator(6, matrix=2 * axis_aligned_map(6))


def test_midpoint_attributes():
    a = SyntheticGenerator(16).attributes(np.zeros(16))
    assert (a.cx, a.cy, a.sigma, a.theta, a.intensity) == (0.5, 0.5, 0.125, 0.0, 0.65)


def test_saturating_first_factor():
    gen = SyntheticGenerator(12, seed=4)
    a = gen.attributes(60.0 * gen.matrix[0])
    assert a.cx == pytest.approx(0.8, abs=1e-9)
    np.testing.assert_allclose([a.cy, a.sigma, a.theta, a.intensity], [0.5, 0.125, 0.0, 0.65],
                               atol=1e-9)


def test_invariant_to_orthogonal_complement(rng):
    gen = SyntheticGenerator(10, seed=2)
    z = rng.standard_normal(10)
    v = rng.standard_normal(10)
    v -= gen.matrix.T @ (gen.matrix @ v)
    np.testing.assert_allclose(gen.attribute_array(z + 5 * v), gen.attribute_array(z), atol=1e-12)


@given(arrays(np.float64, 7, elements=st.floats(-1e3, 1e3)))
def test_attributes_within_ranges(z):
    a = SyntheticGenerator(7, seed=1).attribute_array(z)
    lo = [0.2, 0.2, 0.05, -np.pi / 2, 0.3]
    hi = [0.8, 0.8, 0.2, np.pi / 2, 1.0]
    assert np.all(a >= lo) and np.all(a <= hi)


def test_center_pixel_at_midpoint():
    # an odd size puts a pixel center exactly on the blob center
    img = SyntheticGenerator(8, image_size=15).render(np.zeros(8))
    assert img[0, 7, 7] == pytest.approx(0.65, rel=1e-15)
    assert img.max() == img[0, 7, 7]
    # even size: the four central pixels sit half a pixel off in x and y
    img16 = SyntheticGenerator(8, image_size=16).render(np.zeros(8))
    off = 1 / 32
    expected = 0.65 * np.exp(-0.5 * (off**2 + 4 * off**2) / 0.125**2)
    assert img16[0, 7, 7] == pytest.approx(expected, rel=1e-12)


def test_image_values_in_unit_interval(rng):
    imgs = SyntheticGenerator(16, seed=5).render(3 * rng.standard_normal((20, 16)))
    assert imgs.shape == (20, 1, 16, 16)
    assert imgs.min() >= 0 and imgs.max() <= 1


def test_render_deterministic(rng):
    gen = SyntheticGenerator(16, seed=5)
    z = rng.standard_normal(16)
    assert gen.render(z).tobytes() == gen.render(z.copy()).tobytes()


def test_image_jacobian_matches_finite_differences(rng):
    gen = SyntheticGenerator(6, image_size=8, seed=3)
    z = rng.standard_normal((2, 6))
    w = rng.standard_normal((2, 1, 8, 8))
    zt = Tensor(z.copy(), requires_grad=True)
    with Tape() as tape:
        loss = ad.reduce_sum(gen.generate(zt) * w)
    tape.backward(loss)
    fd = central_difference(lambda: float(np.sum(gen.render(z) * w)), z)
    assert relative_error(zt.grad, fd) < 1e-5


def test_dimension_mismatch():
    gen = SyntheticGenerator(6)
    with pytest.raises(ValueError):
        gen.attributes(np.zeros(5))
    with pytest.raises(ValueError):
        gen.render(np.zeros((2, 7)))
