from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from dipscat.angular import (
    ChannelSet,
    alpha_ql,
    alpha_weighted_matrix,
    coupling_matrix,
    p2_element,
)

_T, _W = np.polynomial.legendre.leggauss(60)


def quad_element(ell, ell_p, m):
    """<Y_lm| cos^2 - 1/3 |Y_l'm> by Gauss-Legendre quadrature in cos(theta)."""
    def norm(l):
        return math.sqrt((2 * l + 1) / 2.0 * math.factorial(l - m) / math.factorial(l + m))
    f = norm(ell) * special.lpmv(m, ell, _T) * norm(ell_p) * special.lpmv(m, ell_p, _T)
    return float(np.sum(_W * f * (_T ** 2 - 1.0 / 3.0)))


def test_gaunt_against_quadrature():
    worst = 0.0
    for m in range(0, 18):
        for ell in range(m, 18):
            for ell_p in range(m, 18):
                worst = max(worst, abs(p2_element(ell, ell_p, m) - quad_element(ell, ell_p, m)))
    assert worst <= 1e-12


def test_example_element():
    assert abs(p2_element(3, 5, 1) - quad_element(3, 5, 1)) <= 1e-12


def test_p_wave_diagonal_exact():
    assert p2_element(1, 1, 0) == 4.0 / 15.0
    assert p2_element(1, 1, 1) == -2.0 / 15.0
    assert p2_element(1, 1, -1) == -2.0 / 15.0


def test_m_exceeding_ell_rejected():
    with pytest.raises(ValueError):
        p2_element(1, 3, 2)


@given(st.integers(0, 6), st.integers(0, 8), st.integers(0, 8))
def test_symmetric_and_banded(m, a, b):
    ell, ell_p = m + a, m + b
    assert p2_element(ell, ell_p, m) == p2_element(ell_p, ell, m)
    if abs(ell - ell_p) > 2 or (ell - ell_p) % 2:
        assert p2_element(ell, ell_p, m) == 0.0


@given(st.integers(0, 7))
def test_trace_rule(m):
    # summed over all projections (both signs) of one l, cos^2 - 1/3 averages to zero
    ell = 2 * m + 1
    total = sum(p2_element(ell, ell, mm) * (1 if mm == 0 else 2) for mm in range(0, ell + 1))
    assert abs(total) < 1e-13


def test_coupling_matrix_shape():
    cm = coupling_matrix(ChannelSet.odd(1, 3))
    assert cm.ell_list == (1, 3, 5)
    assert cm.values.shape == (3, 3)
    assert np.array_equal(cm.values, cm.values.T)
    assert cm.values[0, 2] == 0.0
    for i, l in enumerate(cm.ell_list):
        for j, lp in enumerate(cm.ell_list):
            assert abs(cm.values[i, j] - quad_element(l, lp, 1)) <= 1e-12


def test_sign_of_m_irrelevant():
    a = coupling_matrix(ChannelSet.odd(1, 4)).values
    b = coupling_matrix(ChannelSet.odd(-1, 4)).values
    assert np.array_equal(a, b)


def test_channel_set_validation():
    with pytest.raises(ValueError):
        ChannelSet(0, (1, 2))
    with pytest.raises(ValueError):
        ChannelSet(0, (3, 1))
    with pytest.raises(ValueError):
        ChannelSet(3, (1, 3))
    with pytest.raises(ValueError):
        ChannelSet(0, ())
    assert ChannelSet.odd(2, 2).ell_list == (3, 5)
    assert ChannelSet.odd(0, 3).ell_list == (1, 3, 5)


def test_alpha_ql_cancels_p_wave_diagonal():
    c0, c1 = ChannelSet.odd(0, 3), ChannelSet.odd(1, 3)
    q = alpha_weighted_matrix(alpha_ql(), c0, c1, weights=(1 / 3, 2 / 3))
    assert q.values[0, 0] == 0.0
    q = alpha_weighted_matrix(alpha_ql(), c0, c1)
    assert abs(q.values[0, 0]) < 1e-16
    assert math.cos(alpha_ql()) ** 2 == pytest.approx(1 / 3, rel=1e-15)


def test_alpha_limits():
    c0, c1 = ChannelSet.odd(0, 2), ChannelSet.odd(1, 2)
    assert np.array_equal(alpha_weighted_matrix(0.0, c0, c1).values, coupling_matrix(c0).values)
    q = alpha_weighted_matrix(math.pi / 2, c0, c1).values
    assert np.allclose(q, coupling_matrix(c1).values, atol=1e-16)
    with pytest.raises(ValueError):
        alpha_weighted_matrix(0.1, c0, ChannelSet.odd(1, 3))
