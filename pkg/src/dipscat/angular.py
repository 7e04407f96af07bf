"""Odd-parity partial-wave basis and the anisotropic coupling matrices.

The anisotropic part of the interaction is proportional to
``cos^2(theta) - 1/3``.  Its matrix elements between spherical harmonics
of equal ``m`` couple ``l`` only to ``l`` and ``l +- 2``.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np


@dataclass(frozen=True)
class ChannelSet:
    """Odd partial waves ``ell_list`` sharing the projection ``m``.

    Only ``|m|`` matters for the radial problem; the sign is kept so that
    callers can check the ``m -> -m`` symmetry explicitly.
    """

    m: int
    ell_list: tuple

    def __post_init__(self):
        ells = tuple(int(l) for l in self.ell_list)
        if not ells:
            raise ValueError("a channel set needs at least one partial wave")
        if any(l % 2 == 0 for l in ells):
            raise ValueError(f"only odd partial waves are allowed, got {ells}")
        if any(b <= a for a, b in zip(ells, ells[1:])):
            raise ValueError(f"partial waves must increase strictly, got {ells}")
        if ells[0] < abs(self.m):
            raise ValueError(f"l={ells[0]} is smaller than |m|={abs(self.m)}")
        object.__setattr__(self, "ell_list", ells)

    @classmethod
    def odd(cls, m: int, n: int) -> "ChannelSet":
        """The ``n`` lowest odd partial waves allowed for projection ``m``."""
        if n < 1:
            raise ValueError("n must be positive")
        lmin = abs(m) if abs(m) % 2 == 1 else abs(m) + 1
        return cls(m, tuple(lmin + 2 * k for k in range(n)))

    @property
    def n(self) -> int:
        return len(self.ell_list)

    @property
    def ells(self) -> np.ndarray:
        return np.asarray(self.ell_list, dtype=float)


@dataclass(frozen=True)
class CouplingMatrix:
    """Matrix of ``<l m | cos^2(theta) - 1/3 | l' m>`` over a channel list.

    ``label`` records how the matrix was built, e.g. ``"m=1"`` or
    ``"alpha=0.785398"``.
    """

    ell_list: tuple
    values: np.ndarray
    label: str = ""

    @property
    def n(self) -> int:
        return len(self.ell_list)

    @property
    def ells(self) -> np.ndarray:
        return np.asarray(self.ell_list, dtype=float)


def _ladder(ell: int, m: int) -> float:
    # <l-1, m | cos(theta) | l, m>
    if ell <= abs(m):
        return 0.0
    return math.sqrt((ell * ell - m * m) / ((2 * ell + 1) * (2 * ell - 1)))


def p2_element(ell: int, ell_p: int, m: int) -> float:
    """Return ``<Y_{l m} | cos^2(theta) - 1/3 | Y_{l' m}>``.

    Parameters
    ----------
    ell, ell_p : int
        Partial waves, both at least ``|m|``.
    m : int
        Common projection quantum number.

    Examples
    --------
    >>> p2_element(1, 1, 0)
    0.26666666666666666
    """
    m = abs(int(m))
    if m > min(ell, ell_p):
        raise ValueError(f"|m|={m} exceeds min(l, l')={min(ell, ell_p)}")
    lo, hi = min(ell, ell_p), max(ell, ell_p)
    if hi == lo:
        l = lo
        return (2.0 / 3.0) * (l * (l + 1) - 3 * m * m) / ((2 * l - 1) * (2 * l + 3))
    if hi == lo + 2:
        return _ladder(lo + 1, m) * _ladder(lo + 2, m)
    return 0.0


def coupling_matrix(channels: ChannelSet) -> CouplingMatrix:
    """Banded symmetric coupling matrix for a fixed-``m`` channel set."""
    ells = channels.ell_list
    n = len(ells)
    q = np.zeros((n, n))
    for i in range(n):
        for j in range(i, min(n, i + 2)):
            q[i, j] = q[j, i] = p2_element(ells[i], ells[j], channels.m)
    return CouplingMatrix(ells, q, label=f"m={abs(channels.m)}")


def alpha_weighted_matrix(alpha: float, channels_m0: ChannelSet,
                          channels_m1: ChannelSet, weights=None) -> CouplingMatrix:
    """Coupling for a fixed orientation ``alpha`` of the interparticle axis.

    The Hamiltonian is ``cos^2(alpha) H_0 + sin^2(alpha) H_1``; only the
    anisotropic term differs between the two, so the coupling mixes the
    ``m=0`` and ``|m|=1`` matrices with the same weights.  ``weights`` may
    override ``(cos^2(alpha), sin^2(alpha))``; ``(1/3, 2/3)`` then hits the
    quasi-long-range orientation without trigonometric round-off.
    """
    if channels_m0.ell_list != channels_m1.ell_list:
        raise ValueError("the m=0 and |m|=1 channel sets must share their l list")
    if channels_m0.m != 0 or abs(channels_m1.m) != 1:
        raise ValueError("expected an m=0 and an |m|=1 channel set")
    if weights is None:
        c2, s2 = math.cos(alpha) ** 2, math.sin(alpha) ** 2
    else:
        c2, s2 = (float(w) for w in weights)
    q = c2 * coupling_matrix(channels_m0).values + s2 * coupling_matrix(channels_m1).values
    return CouplingMatrix(channels_m0.ell_list, q, label=f"alpha={alpha:.6f}")


def alpha_ql() -> float:
    """Orientation with ``cos^2(alpha) = 1/3`` where the p-wave 1/x^3 term vanishes."""
    return math.acos(1.0 / math.sqrt(3.0))
