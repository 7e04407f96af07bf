"""Large-distance expansions of the zero-energy coupled radial equations.

At zero energy and without a trap the radial equations read::

    u_j'' = [L_j / x^2 - 1 / x^6] u_j - sum_i Q_ji u_i / x^3,   L_j = l_j (l_j + 1)

with ``Q = I * q`` the anisotropic coupling.  Solutions are expanded as::

    u_j(x) = sum_k sum_r A[k, j, r] x^(p0 - k) ln(x)^r

Two families of reference solutions exist for every channel ``l'``: a
growing one starting as ``x^(l'+1)`` and a decaying one starting as
``x^(-l')``.  Whenever ``(p0 - k)(p0 - k - 1) = L_j`` the power coefficient
is left free and set to zero, and a logarithm appears instead.  With this
convention the p-wave growing solution carries no pure ``1/x`` term, so
the coefficient of the p-wave decaying solution in a physical combination
is minus the generalised scattering volume.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SeriesSolution:
    """Coefficients of one reference solution.

    ``coef[k, j, r]`` multiplies ``x^(p0 - k) ln(x)^r`` in channel ``j``.
    """

    p0: int
    coef: np.ndarray
    kind: str
    channel: int

    def evaluate(self, x, kmin: int = 0):
        """Values and derivatives at ``x`` (scalar or 1-D array).

        Terms with ``k < kmin`` are skipped, which gives the tail of the
        expansion beyond a chosen number of leading orders.

        Returns
        -------
        u, du : ndarray, shape (len(x), n)
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lx = np.log(x)
        order, n, nr = self.coef.shape
        u = np.zeros((x.size, n))
        du = np.zeros((x.size, n))
        for k in range(kmin, order):
            p = self.p0 - k
            xp = x ** p
            for r in range(nr):
                c = self.coef[k, :, r]
                if not np.any(c):
                    continue
                lr = lx ** r
                u += np.outer(xp * lr, c)
                dterm = p * xp / x * lr
                if r > 0:
                    dterm = dterm + r * xp / x * lx ** (r - 1)
                du += np.outer(dterm, c)
        return u, du


def threshold_series(ells, qmat, kind: str, channel: int, order: int = 14,
                     nlog: int = 6) -> SeriesSolution:
    """Build the large-``x`` expansion of a zero-energy reference solution.

    Parameters
    ----------
    ells : sequence of int
        Partial waves of the channels.
    qmat : ndarray, shape (n, n)
        Coefficient matrix of the ``+Q/x^3`` attraction, ``Q = I * q``.
    kind : {"growing", "decaying"}
        ``x^(l+1)`` or ``x^(-l)`` leading behaviour.
    channel : int
        Index (not ``l``) of the channel carrying the leading term.
    order : int
        Number of powers kept.
    nlog : int
        Highest power of ``ln x`` stored.
    """
    ells = np.asarray(ells, dtype=int)
    n = ells.size
    lsq = ells * (ells + 1.0)
    qmat = np.asarray(qmat, dtype=float)
    if kind == "growing":
        p0 = int(ells[channel]) + 1
    elif kind == "decaying":
        p0 = -int(ells[channel])
    else:
        raise ValueError(f"unknown kind {kind!r}")
    nr = nlog + 1
    coef = np.zeros((order, n, nr + 2))
    coef[0, channel, 0] = 1.0
    for k in range(1, order):
        p = p0 - k
        src = qmat @ coef[k - 1]
        if k >= 4:
            src = src + coef[k - 4]
        for j in range(n):
            diag = p * (p - 1) - lsq[j]
            a = coef[k, j]
            if diag != 0:
                for r in range(nr - 1, -1, -1):
                    a[r] = -(src[j, r] + (r + 1) * (2 * p - 1) * a[r + 1]
                             + (r + 2) * (r + 1) * a[r + 2]) / diag
            else:
                # resonant power: the equation at log order r fixes the
                # coefficient of ln^(r+1); the pure power stays free (zero)
                for r in range(nr - 1, -1, -1):
                    a[r + 1] = -(src[j, r] + (r + 2) * (r + 1) * a[r + 2]) / ((r + 1) * (2 * p - 1))
                a[0] = 0.0
            if np.any(a[nr:]):
                raise ArithmeticError("logarithmic order exceeded; raise nlog")
    return SeriesSolution(p0, coef[:, :, :nr].copy(), kind, channel)
