import numpy as np
import pytest

from chemolab.grid import _fft, make_grid
from chemolab.sampling import bandlimited_field, bandlimited_vector_field


def test_band_limit_and_normalization():
    g = make_grid(2, 5.0, 32)
    f = bandlimited_field(g, np.random.default_rng(0))
    assert f.sup() == pytest.approx(1.0)
    coef = np.abs(_fft(f.values))
    outside = np.abs(g.mode_index) > 8
    assert np.max(coef[outside, :]) < 1e-10 and np.max(coef[:, outside]) < 1e-10


def test_seeded_and_vector():
    g = make_grid(1, 5.0, 32)
    a = bandlimited_field(g, np.random.default_rng(4), band=3)
    b = bandlimited_field(g, np.random.default_rng(4), band=3)
    assert np.array_equal(a.values, b.values)
    assert len(bandlimited_vector_field(make_grid(3, 1.0, 8), np.random.default_rng(1))) == 3
    with pytest.raises(ValueError):
        bandlimited_field(g, np.random.default_rng(0), band=16)


def test_coarse_padding_gives_same_physical_field():
    fine = make_grid(2, 5.0, 64)
    coarse = make_grid(2, 5.0, 32)
    a = bandlimited_field(coarse, np.random.default_rng(7))
    b = bandlimited_field(fine, np.random.default_rng(7), coarse=32)
    assert np.max(np.abs(b.values[::2, ::2] - a.values)) < 1e-12
    with pytest.raises(ValueError):
        bandlimited_field(coarse, np.random.default_rng(7), coarse=64)
