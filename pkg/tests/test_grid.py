import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chemolab.grid import (
    Field,
    SpectralField,
    apply_heat_semigroup,
    dealias,
    forward_transform,
    inverse_transform,
    make_grid,
    spectral_divergence,
    spectral_gradient,
)


def test_make_grid_small_1d():
    g = make_grid(1, math.pi, 8)
    assert g.spacing == pytest.approx(math.pi / 4, abs=0)
    assert g.spacing * g.n == 2 * math.pi
    assert sorted(g.wavenumbers.tolist()) == [-4, -3, -2, -1, 0, 1, 2, 3]


def test_make_grid_2d_shape():
    g = make_grid(2, 10.0, 256)
    assert g.shape == (256, 256)
    assert g.spacing == 20 / 256


@pytest.mark.parametrize("args", [(3, 10, 7), (2, 10, 6), (2, 0.0, 16), (2, -1.0, 16), (4, 1.0, 16)])
def test_make_grid_rejects(args):
    with pytest.raises(ValueError):
        make_grid(*args)


@given(st.sampled_from([8, 16, 64, 130]), st.floats(0.5, 50))
def test_wavenumbers_symmetric(n, L):
    g = make_grid(1, L, n)
    k = dict(zip(g.mode_index.tolist(), g.wavenumbers.tolist()))
    for j, kj in k.items():
        if -j in k:
            assert k[-j] == -kj
    assert g.spacing * g.n == pytest.approx(2 * L, rel=1e-15)


def test_field_finiteness_flag_and_size():
    g = make_grid(1, 1.0, 8)
    assert not Field(g, np.full(8, np.nan)).is_finite()
    assert g.zeros().is_finite()
    with pytest.raises(ValueError):
        Field(g, np.zeros(9))


def test_constant_transform_has_only_zero_mode(grid_pi_2d):
    F = forward_transform(grid_pi_2d.constant(3.0))
    assert F.coefficients.flat[0] == pytest.approx(3.0 * 32**2)
    rest = np.abs(F.coefficients).ravel()[1:]
    assert np.max(rest) < 1e-10


def test_cosine_has_two_coefficients(grid_pi_1d):
    (x,) = grid_pi_1d.coordinates()
    F = forward_transform(Field(grid_pi_1d, np.cos(x)))
    assert np.count_nonzero(np.abs(F.coefficients) > 1e-9) == 2


@pytest.mark.parametrize("dim,n", [(1, 8), (1, 256), (2, 64), (3, 16)])
def test_round_trip(dim, n, rng):
    g = make_grid(dim, 3.0, n)
    f = Field(g, rng.standard_normal(g.shape))
    back = inverse_transform(forward_transform(f))
    assert np.linalg.norm(back.values - f.values) <= 1e-12 * np.linalg.norm(f.values)


def test_spectral_field_conjugate_symmetry(rng):
    g = make_grid(2, 1.0, 16)
    F = forward_transform(Field(g, rng.standard_normal(g.shape)))
    c = F.coefficients
    mirrored = np.conj(np.roll(np.flip(c, axis=(0, 1)), 1, axis=(0, 1)))
    assert np.allclose(c, mirrored, atol=1e-12)
    with pytest.raises(ValueError):
        SpectralField(g, np.zeros(5, dtype=complex))


def test_gradient_of_constant_and_sine(grid_pi_2d):
    for comp in spectral_gradient(grid_pi_2d.constant(2.0)):
        assert np.max(np.abs(comp.values)) == 0
    x, y = grid_pi_2d.coordinates()
    gx, gy = spectral_gradient(Field(grid_pi_2d, np.sin(x)))
    assert np.max(np.abs(gx.values - np.cos(x))) < 1e-10
    assert np.max(np.abs(gy.values)) < 1e-10


def test_gradient_product_rule():
    g = make_grid(2, math.pi, 32)
    x, y = g.coordinates()
    gx, gy = spectral_gradient(Field(g, np.sin(x) * np.cos(y)))
    assert np.max(np.abs(gx.values - np.cos(x) * np.cos(y))) <= 1e-10
    assert np.max(np.abs(gy.values + np.sin(x) * np.sin(y))) <= 1e-10


def test_gradient_on_scaled_box():
    # wavenumbers pi j / L: d/dx sin(pi x / L) = (pi / L) cos(pi x / L)
    L = 7.0
    g = make_grid(1, L, 64)
    (x,) = g.coordinates()
    (d,) = spectral_gradient(Field(g, np.sin(3 * np.pi * x / L)))
    assert np.max(np.abs(d.values - 3 * np.pi / L * np.cos(3 * np.pi * x / L))) < 1e-10


def test_divergence_examples(grid_pi_2d):
    z = spectral_divergence([grid_pi_2d.constant(1.0), grid_pi_2d.constant(-2.0)])
    assert np.max(np.abs(z.values)) < 1e-13
    x, _ = grid_pi_2d.coordinates()
    lap = spectral_divergence(spectral_gradient(Field(grid_pi_2d, np.sin(x))))
    assert np.max(np.abs(lap.values + np.sin(x))) < 1e-10
    with pytest.raises(ValueError):
        spectral_divergence([grid_pi_2d.constant(1.0)])


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 1e6))
def test_divergence_mean_zero(seed, scale):
    g = make_grid(2, 2.0, 16)
    r = np.random.default_rng(seed)
    F = [Field(g, scale * r.standard_normal(g.shape)) for _ in range(2)]
    div = spectral_divergence(F)
    mag = max(np.max(np.abs(c.values)) for c in F)
    assert abs(np.mean(div.values)) <= 1e-13 * mag


def test_heat_semigroup_examples(grid_pi_1d):
    c = grid_pi_1d.constant(1.7)
    assert np.allclose(apply_heat_semigroup(c, 3.0).values, 1.7, rtol=0, atol=1e-14)
    (x,) = grid_pi_1d.coordinates()
    out = apply_heat_semigroup(Field(grid_pi_1d, np.cos(x)), 1.0, shift=1.0)
    assert np.max(np.abs(out.values - math.exp(-2) * np.cos(x))) < 1e-10
    f = Field(grid_pi_1d, np.sin(2 * x))
    assert np.array_equal(apply_heat_semigroup(f, 0.0).values, f.values)
    with pytest.raises(ValueError):
        apply_heat_semigroup(f, -0.1)


def heat_kernel_oracle(x, x0, sigma, t, L, images=6):
    """Periodized Gaussian evolved by the exact heat kernel, by direct quadrature.

    The initial datum is the periodic sum of exp(-(x - x0 - 2 L m)^2 / (2 sigma^2)).
    Convolution with the heat kernel is done numerically on a fine trapezoid mesh
    over one period, independent of any Fourier machinery.
    """
    y = np.linspace(-L, L, 4001)[:-1]
    dy = y[1] - y[0]
    f0 = sum(np.exp(-((y - x0 - 2 * L * m) ** 2) / (2 * sigma**2)) for m in range(-images, images + 1))
    out = np.empty_like(x)
    for i, xi in enumerate(x):
        kern = sum(
            np.exp(-((xi - y - 2 * L * m) ** 2) / (4 * t)) for m in range(-images, images + 1)
        ) / math.sqrt(4 * math.pi * t)
        out[i] = np.sum(kern * f0) * dy
    return out


@pytest.mark.parametrize("t", [0.05, 0.5, 2.0])
def test_heat_semigroup_vs_quadrature_oracle(t):
    L, sigma, x0 = 5.0, 0.6, 0.7
    g = make_grid(1, L, 128)
    (x,) = g.coordinates()
    f0 = sum(np.exp(-((x - x0 - 2 * L * m) ** 2) / (2 * sigma**2)) for m in range(-6, 7))
    got = apply_heat_semigroup(Field(g, f0), t).values
    want = heat_kernel_oracle(x, x0, sigma, t, L)
    assert np.max(np.abs(got - want)) <= 1e-8


@given(st.floats(0, 2), st.floats(0, 2), st.sampled_from([0.0, 1.0]), st.integers(0, 1000))
def test_semigroup_property(s, t, shift, seed):
    g = make_grid(2, 3.0, 16)
    f = Field(g, np.random.default_rng(seed).standard_normal(g.shape))
    a = apply_heat_semigroup(f, s + t, shift)
    b = apply_heat_semigroup(apply_heat_semigroup(f, s, shift), t, shift)
    assert np.max(np.abs(a.values - b.values)) <= 1e-11


@given(st.floats(0, 5), st.integers(0, 1000))
def test_semigroup_mean(t, seed):
    g = make_grid(1, 2.0, 32)
    f = Field(g, np.random.default_rng(seed).standard_normal(g.shape))
    m0 = np.mean(f.values)
    assert np.mean(apply_heat_semigroup(f, t).values) == pytest.approx(m0, abs=1e-13)
    assert np.mean(apply_heat_semigroup(f, t, 1.0).values) == pytest.approx(m0 * math.exp(-t), abs=1e-13)


def test_dealias_examples():
    g = make_grid(1, math.pi, 16)
    (x,) = g.coordinates()
    vals = np.cos(5 * x) + np.sin(2 * x)
    low = forward_transform(Field(g, vals))
    assert np.max(np.abs(inverse_transform(dealias(low)).values - vals)) < 1e-14
    high = forward_transform(Field(g, np.cos(7 * x)))
    assert np.max(np.abs(inverse_transform(dealias(high)).values)) < 1e-13


@given(st.integers(0, 2**32 - 1))
def test_dealias_projection(seed):
    g = make_grid(2, 1.0, 24)
    F = forward_transform(Field(g, np.random.default_rng(seed).standard_normal(g.shape)))
    D = dealias(F)
    assert D.norm() <= F.norm()
    assert np.array_equal(dealias(D).coefficients, D.coefficients)


def test_field_arithmetic_and_integral():
    g = make_grid(2, 2.0, 8)
    a, b = g.constant(2.0), g.constant(0.5)
    assert (a + b).values[0, 0] == 2.5
    assert (a - b).values[0, 0] == 1.5
    assert (a * 3).values[0, 0] == 6.0
    assert (-a).values[0, 0] == -2.0
    assert a.integral() == pytest.approx(2.0 * 16.0)
    assert a.sup() == 2.0
