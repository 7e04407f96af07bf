"""Orientation of the interparticle axis relative to the common dipole axis.

Single channel
    The p-wave threshold function with mixed ``m`` character,
    ``cos(a) u0(x) cos(t) + sin(a) u1(x) sin(t)``, peaks at the angle
    ``eta(x)`` with ``tan(eta) = tan(a) u1(x) / u0(x)``.  Far out both radial
    functions behave as ``x^2`` and ``eta -> a``; close to the nodal line the
    ratio ``u1 / u0`` is governed by the short-range physics.

Several channels
    A wave function concentrated around the direction ``theta0`` at large
    distance is the truncated expansion of ``delta(theta - theta0)`` on
    odd spherical harmonics.  Propagating every ``(l', m)`` component inward
    with its own threshold solution gives the angular distribution at any
    radius.  Only the ``phi = 0`` half plane and its continuation through
    the ``Z`` axis (``theta`` in ``[0, 2 pi)``) are sampled.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import special

from .angular import ChannelSet, coupling_matrix
from .radial import NodalLineModel, PotentialSpec, RadialGrid
from .scatter import DEFAULT_GRID, ThresholdSolution, interpolate_on_mesh, threshold_solution

DELTA_X = 0.034


@dataclass
class OrientationProfile:
    """Main orientation ``eta(x)`` of a single-channel threshold function.

    ``eta`` is unwrapped continuously from ``x_max`` inward and then reduced
    to ``(-pi/2, pi/2]``; ``eta_unwrapped`` keeps the continuous branch.
    """

    x: np.ndarray
    eta: np.ndarray
    eta_unwrapped: np.ndarray
    alpha: float
    x_short: float
    eta_short: float


def _reduce_pi(a):
    """Map angles to ``(-pi/2, pi/2]``."""
    r = np.mod(np.asarray(a, dtype=float) + 0.5 * np.pi, np.pi) - 0.5 * np.pi
    return np.where(r <= -0.5 * np.pi + 1e-15, r + np.pi, r)


def p_wave_pair(intensity: float, model: NodalLineModel,
                grid: RadialGrid | None = None) -> tuple:
    """Single-channel ``l=1`` threshold solutions for ``m=0`` and ``|m|=1``.

    Both are normalised to the common asymptote ``x^2``.
    """
    grid = grid or DEFAULT_GRID
    out = []
    for m in (0, 1):
        spec = PotentialSpec(float(intensity), coupling_matrix(ChannelSet.odd(m, 1)))
        out.append(threshold_solution(spec, model, grid))
    return tuple(out)


def eta_profile(u0, u1, alpha: float, x=None, x_short: float | None = None) -> OrientationProfile:
    """Main orientation ``eta(x)`` from two radial functions.

    Both functions are scaled to one at the largest radius, so that
    ``eta(x_max) = alpha`` holds exactly; the ``x^-1`` corrections to the
    common ``x^2`` asymptote differ between ``m=0`` and ``|m|=1``.

    Parameters
    ----------
    u0, u1 : ThresholdSolution or ndarray
        ``m=0`` and ``|m|=1`` p-wave functions.  Arrays must share the grid
        ``x``; solutions are evaluated on the grid of ``u0``.
    alpha : float
        Asymptotic orientation (radians).
    x : ndarray, optional
        Radii of array inputs, any order.
    x_short : float, optional
        Radius of the reported short-range value (default: node + 0.034).
    """
    if isinstance(u0, ThresholdSolution):
        xs = u0.x
        a0 = u0.radial()[0][:, 0]
        a1 = interpolate_on_mesh(u1.solutions, u1.radial()[0], xs)[:, 0] \
            if not np.array_equal(u1.x, xs) else u1.radial()[0][:, 0]
        if x_short is None:
            x_short = float(np.min(u0.nodes)) + DELTA_X
        f0 = lambda r: float(u0.at([r])[0, 0])
        f1 = lambda r: float(u1.at([r])[0, 0])
    else:
        if x is None:
            raise ValueError("array inputs need their radii x")
        xs = np.asarray(x, dtype=float)
        a0 = np.asarray(u0, dtype=float)
        a1 = np.asarray(u1, dtype=float)
        srt = np.argsort(xs)
        f0 = lambda r: float(np.interp(r, xs[srt], a0[srt]))
        f1 = lambda r: float(np.interp(r, xs[srt], a1[srt]))
    order = np.argsort(xs)[::-1]  # from x_max inward
    xo, b0, b1 = xs[order], a0[order], a1[order]
    # alpha is the orientation at x_max itself: scale both functions to one there
    n0, n1 = b0[0], b1[0]
    b0, b1 = b0 / n0, b1 / n1
    g0, g1 = f0, f1
    f0 = lambda r: g0(r) / n0
    f1 = lambda r: g1(r) / n1
    ca, sa = math.cos(alpha), math.sin(alpha)
    ok = ~((b0 == 0) & (b1 == 0))
    raw = np.arctan(np.divide(sa * b1, ca * b0, out=np.full_like(b0, np.inf), where=(ca * b0) != 0))
    # arctan jumps by pi whenever u0 changes sign; unwrapping with period pi follows the branch
    raw = np.where(ok, raw, np.nan)
    good = np.isfinite(raw)
    unw = np.full_like(raw, np.nan)
    unw[good] = np.unwrap(raw[good], period=np.pi)
    if not np.all(good):
        idx = np.arange(raw.size)
        unw = np.interp(idx, idx[good], unw[good])
    # anchor the branch on alpha at x_max
    unw = unw + np.pi * round((alpha - unw[0]) / np.pi)
    eta_short = float("nan")
    if x_short is not None:
        r0, r1 = f0(x_short), f1(x_short)
        eta_short = float(_reduce_pi(math.atan2(sa * r1, ca * r0)))
    back = np.argsort(order)
    return OrientationProfile(xo[back], _reduce_pi(unw)[back], unw[back], float(alpha),
                              float(x_short) if x_short is not None else float("nan"), eta_short)


def _off_node(sol0, sol1, x, half_wave: bool = True, rel: float = 0.05):
    """Shift ``x`` by half a local wavelength when it sits close to a node."""
    for _ in range(4):
        probe = np.linspace(0.8 * x, 1.2 * x, 9)
        v0 = np.abs(sol0.at(probe)[:, 0])
        v1 = np.abs(sol1.at(probe)[:, 0])
        here0 = abs(float(sol0.at([x])[0, 0]))
        here1 = abs(float(sol1.at([x])[0, 0]))
        if here0 > rel * v0.max() and here1 > rel * v1.max():
            return x
        if not half_wave:
            break
        # local wavelength of the -1/x^6 region: 2 pi x^3
        x = x + math.pi * x ** 3
    raise ValueError(f"cannot place the short-range probe off the nodes near x={x:.4g}")


@dataclass
class ShortRangeRow:
    x00: float
    alpha: float
    x_probe: float
    eta: float


def short_range_eta_scan(x00_values, alphas, intensity: float, delta_x: float = DELTA_X,
                         grid: RadialGrid | None = None, mapper=map) -> list:
    """``eta(x00 + delta_x)`` over a grid of nodal parameters and orientations.

    The probe point is shifted by half a local wavelength when it falls
    close to a node of ``u0`` or ``u1``.
    """
    task = _EtaTask(tuple(float(a) for a in alphas), float(intensity), float(delta_x),
                    grid or DEFAULT_GRID)
    rows = []
    for chunk in mapper(task, [float(x) for x in x00_values]):
        rows.extend(chunk)
    return rows


class _EtaTask:
    def __init__(self, alphas, intensity, delta_x, grid):
        self.alphas, self.intensity, self.delta_x, self.grid = alphas, intensity, delta_x, grid

    def __call__(self, x00):
        model = NodalLineModel(x00)
        s0, s1 = p_wave_pair(self.intensity, model, self.grid)
        node = float(s0.nodes[0])
        xp = _off_node(s0, s1, node + self.delta_x)
        r0 = float(s0.at([xp])[0, 0]) / float(s0.radial()[0][0, 0])
        r1 = float(s1.at([xp])[0, 0]) / float(s1.radial()[0][0, 0])
        return [ShortRangeRow(x00, a, xp, float(_reduce_pi(math.atan2(math.sin(a) * r1,
                                                                      math.cos(a) * r0))))
                for a in self.alphas]


@dataclass
class SlopeRow:
    x00: float
    d0: float
    d1: float
    ratio: float
    inverse: float


def slope_ratio_scan(x00_values, intensity: float, model_template: NodalLineModel | None = None,
                     grid: RadialGrid | None = None) -> list:
    """Slopes ``D_m = u_m'(x0)`` at the p-wave node and their ratios.

    ``x0`` is the nodal line at zero energy for ``l=1``; with the
    fixed-node model it equals ``x00``.
    """
    grid = grid or DEFAULT_GRID
    tpl = model_template or NodalLineModel(0.0)
    rows = []
    for x00 in x00_values:
        model = NodalLineModel(float(x00), tpl.slope_E, tpl.slope_L, tpl.slope_I)
        slopes = []
        for sol in p_wave_pair(intensity, model, grid):
            x0 = float(sol.nodes[0])
            k = sol.solutions.mesh.index_of(x0)
            if k is None:
                raise ValueError(f"node x0={x0} is not on the grid")
            slopes.append(float(sol.radial()[1][k, 0]))
        d0, d1 = slopes
        rows.append(SlopeRow(float(x00), d0, d1,
                             d0 / d1 if d1 != 0 else math.inf,
                             d1 / d0 if d0 != 0 else math.inf))
    return rows


# --------------------------------------------------------------------------
# several channels


def real_ylm(ell: int, m: int, theta):
    """``Y_lm(theta, phi=0)`` with the Condon-Shortley phase, ``m >= 0``.

    ``theta`` beyond ``pi`` continues through the ``Z`` axis into the
    ``phi = pi`` half plane, which amounts to ``sin(theta)^m`` keeping its
    sign.
    """
    theta = np.asarray(theta, dtype=float)
    m = abs(int(m))
    norm = math.sqrt((2 * ell + 1) / (4 * math.pi) * math.factorial(ell - m) / math.factorial(ell + m))
    sign = np.sign(np.sin(theta)) ** m if m % 2 else 1.0
    return norm * special.lpmv(m, ell, np.cos(theta)) * sign


@dataclass
class AngularDistribution:
    """Angular distribution at a set of radii.

    Attributes
    ----------
    x : ndarray, shape (nx,)
    theta : ndarray, shape (nt,)
    total : ndarray, shape (nx, nt)
        ``f(x, theta)``.
    partial : dict
        ``l -> f_l(x, theta)``, shape (nx, nt).
    norms : dict
        ``l -> N_l(x)``: square root of the incoherent sum of
        ``|Y_{l' m}(theta0) u^m_{l l'}(x)|^2`` over ``l'`` and ``m``.
    coherent_norms : dict
        ``l -> (integral of |f_l|^2 over the sphere)^(1/2)``; equals
        ``norms`` wherever ``u^m_{l l'}`` is diagonal in ``(l, l')``.
    """

    x: np.ndarray
    theta: np.ndarray
    theta0: float
    total: np.ndarray
    partial: dict
    norms: dict
    coherent_norms: dict
    coefficients: dict = field(default_factory=dict)

    def peak_direction(self, ix: int, ell: int | None = None) -> float:
        """Angle of maximal ``|f|`` at radius index ``ix``, reduced to ``(-pi/2, pi/2]``."""
        f = self.total[ix] if ell is None else self.partial[ell][ix]
        return float(_reduce_pi(self.theta[int(np.argmax(np.abs(f)))]))


def physical_matrix(intensity: float, m: int, ells, model: NodalLineModel,
                    grid: RadialGrid | None = None) -> tuple:
    """Threshold solutions ``u^m_{l l'}`` for every starting channel ``l'``.

    Column ``l'`` is the physical solution growing in channel ``l'``,
    normalised so that its own channel equals one at ``x_max``.

    Returns
    -------
    ells_m : tuple
        Partial waves allowed for ``|m|``.
    sols : list of ThresholdSolution
    scale : ndarray
        ``u_{l' l'}(x_max)`` used for the normalisation.
    """
    grid = grid or DEFAULT_GRID
    ells_m = tuple(l for l in ells if l >= abs(m))
    cs = ChannelSet(abs(m), ells_m)
    spec = PotentialSpec(float(intensity), coupling_matrix(cs))
    sols, scale = [], []
    for j in range(len(ells_m)):
        sol = threshold_solution(spec, model, grid, channel=j)
        u, _ = sol.radial()
        scale.append(float(u[0, j]))
        sols.append(sol)
    return ells_m, sols, np.array(scale)


def multichannel_distribution(theta0: float, intensity: float, x00: float, x_probe,
                              ells=(1, 3, 5), ntheta: int = 721,
                              model: NodalLineModel | None = None,
                              grid: RadialGrid | None = None) -> AngularDistribution:
    """Angular distribution of the wave function that points to ``theta0`` far out.

    All ``m`` with ``|m| <= max(ells)`` are included; the sum over ``-m``
    and ``+m`` doubles the ``m != 0`` terms in the ``phi = 0`` plane.

    Parameters
    ----------
    theta0 : float
        Asymptotic orientation (radians).
    intensity, x00 : float
    x_probe : sequence of float
        Radii at which the distribution is evaluated.
    ells : tuple of odd int
    ntheta : int
        Points of the ``theta`` grid over ``[0, 2 pi)``.
    """
    grid = grid or DEFAULT_GRID
    model = model or NodalLineModel(float(x00))
    xs = np.atleast_1d(np.asarray(x_probe, dtype=float))
    if np.any(xs > grid.x_max) or np.any(xs < x00):
        raise ValueError("probe radii must lie between the node and x_max")
    theta = np.linspace(0.0, 2.0 * np.pi, ntheta, endpoint=False)
    ells = tuple(int(l) for l in ells)
    lmax = max(ells)
    partial = {l: np.zeros((xs.size, ntheta)) for l in ells}
    norm2 = {l: np.zeros(xs.size) for l in ells}
    coh2 = {l: np.zeros(xs.size) for l in ells}
    coefs = {}
    for m in range(0, lmax + 1):
        ells_m, sols, scale = physical_matrix(intensity, m, ells, model, grid)
        mult = 1.0 if m == 0 else 2.0
        # u[x, l, l'] for this |m|
        u = np.stack([s.at(xs) / sc for s, sc in zip(sols, scale)], axis=2)
        y0 = np.array([float(real_ylm(lp, m, theta0)) for lp in ells_m])
        coefs[m] = (ells_m, u)
        for i, l in enumerate(ells_m):
            c = u[:, i, :] @ y0  # sum over l'
            partial[l] += mult * np.outer(c, real_ylm(l, m, theta))
            norm2[l] += mult * np.sum((u[:, i, :] * y0) ** 2, axis=1)
            coh2[l] += mult * c ** 2
    total = sum(partial.values())
    return AngularDistribution(xs, theta, float(theta0), total, partial,
                               {l: np.sqrt(v) for l, v in norm2.items()},
                               {l: np.sqrt(v) for l, v in coh2.items()}, coefs)


def sphere_norm(dist: AngularDistribution, ell: int, ix: int, order: int = 32) -> float:
    """``(integral of |f_l|^2 over the sphere)^(1/2)`` by Gauss-Legendre quadrature.

    The ``+m`` and ``-m`` components are orthogonal in ``phi``; each
    ``|m|`` block is integrated over ``cos(theta)`` separately.
    """
    t, wq = np.polynomial.legendre.leggauss(order)
    th = np.arccos(t)
    total = 0.0
    for m, (ells_m, u) in dist.coefficients.items():
        if ell not in ells_m:
            continue
        i = ells_m.index(ell)
        y0 = np.array([float(real_ylm(lp, m, dist.theta0)) for lp in ells_m])
        c = float(u[ix, i, :] @ y0)
        # one of the two +-m components, integrated over phi (2 pi)
        val = 2.0 * np.pi * np.sum(wq * (c * real_ylm(ell, m, th)) ** 2)
        total += val if m == 0 else 2.0 * val
    return math.sqrt(total)
