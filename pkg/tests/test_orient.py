from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import special

from dipscat.radial import NodalLineModel
from dipscat.orient import (
    eta_profile,
    multichannel_distribution,
    p_wave_pair,
    real_ylm,
    short_range_eta_scan,
    slope_ratio_scan,
    sphere_norm,
)


@pytest.fixture(scope="module")
def pair():
    return p_wave_pair(6.0, NodalLineModel(0.1492))


@pytest.mark.parametrize("alpha", [0.1, math.pi / 4, 1.2, -0.7])
def test_eta_anchored_at_x_max(pair, alpha):
    prof = eta_profile(*pair, alpha)
    k = int(np.argmax(prof.x))
    assert abs(prof.eta[k] - alpha) <= 1e-3
    assert np.all(np.abs(prof.eta) <= math.pi / 2 + 1e-12)


def test_eta_of_equal_functions_is_alpha():
    x = np.linspace(1.0, 50.0, 200)
    u = x ** 2 - 3.0 / x
    prof = eta_profile(u, u, 0.4, x=x, x_short=2.0)
    assert np.allclose(prof.eta, 0.4, atol=1e-14)
    assert prof.eta_short == pytest.approx(0.4, abs=1e-14)
    with pytest.raises(ValueError):
        eta_profile(u, u, 0.4)


def test_eta_follows_sign_change_continuously():
    x = np.linspace(0.5, 10.0, 400)
    u0 = x - 2.0  # changes sign at x = 2
    u1 = np.ones_like(x) * 8.0
    prof = eta_profile(u0, u1, math.pi / 4, x=x)
    # the continuous branch passes through pi/2 where u0 vanishes
    k = np.argmin(np.abs(x - 2.0))
    assert abs(abs(prof.eta_unwrapped[k]) - math.pi / 2) < 0.05
    assert np.all(np.abs(np.diff(prof.eta_unwrapped)) < 0.1)


def test_real_ylm_matches_scipy():
    theta = np.linspace(0.05, math.pi - 0.05, 9)
    for ell in (1, 3, 5):
        for m in range(0, ell + 1):
            ref = _scipy_ylm(ell, m, theta)
            assert np.allclose(real_ylm(ell, m, theta), ref, atol=1e-13)


def _scipy_ylm(ell, m, theta):
    # phi = 0 slice of the complex harmonic; real there
    if hasattr(special, "sph_harm_y"):
        return special.sph_harm_y(ell, m, theta, 0.0).real
    return special.sph_harm(m, ell, 0.0, theta).real


def test_real_ylm_continuation_through_axis():
    # theta beyond pi reaches the phi = pi half plane: Y(2 pi - t) = (-1)^m Y(t)
    t = np.array([0.3, 1.1])
    assert np.allclose(real_ylm(3, 1, 2 * math.pi - t), -real_ylm(3, 1, t), atol=1e-14)
    assert np.allclose(real_ylm(3, 2, 2 * math.pi - t), real_ylm(3, 2, t), atol=1e-14)


@pytest.fixture(scope="module")
def distribution():
    return multichannel_distribution(math.pi / 4, 6.0, 0.1492, [1.0, 20.0, 150.0], ntheta=361)


def test_norm_identity(distribution):
    for ell in (1, 3, 5):
        for ix in range(distribution.x.size):
            direct = sphere_norm(distribution, ell, ix)
            assert direct == pytest.approx(distribution.coherent_norms[ell][ix], rel=1e-10)


def test_incoherent_norm_close_to_coherent_far_out(distribution):
    # far out the channel mixing is weak and the two norms nearly coincide
    for ell in (1, 3, 5):
        assert np.all(distribution.norms[ell] >= 0)
    n1 = distribution.norms[1][-1]
    assert distribution.coherent_norms[1][-1] == pytest.approx(n1, rel=0.05)


def test_far_distribution_points_to_theta0(distribution):
    assert distribution.peak_direction(2) == pytest.approx(math.pi / 4, abs=0.1)


def test_probe_radii_validated():
    with pytest.raises(ValueError):
        multichannel_distribution(0.3, 6.0, 0.1492, [250.0])


def test_slope_ratio_inverse():
    rows = slope_ratio_scan([0.147, 0.1492], 6.0)
    for r in rows:
        assert r.ratio * r.inverse == pytest.approx(1.0, rel=1e-12)
        assert r.d0 != 0 and r.d1 != 0


def test_short_range_scan_rows():
    rows = short_range_eta_scan([0.1492], [0.2, 0.6], 6.0)
    assert [r.alpha for r in rows] == [0.2, 0.6]
    assert all(abs(r.eta) <= math.pi / 2 for r in rows)
    assert all(r.x_probe >= 0.1492 for r in rows)
