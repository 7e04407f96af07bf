"""Threshold scattering: s-wave length, generalised p-wave volume and its poles.

The zero-energy physical solution is built from the inward-integrated
reference columns: one growing column ``G`` (``~ x^2`` in the p-wave
channel) plus all decaying columns ``D_l`` (``~ x^-l``), combined so that
every channel vanishes on its nodal line.  With ``G`` normalised to unit
``x^2`` coefficient the p-wave channel behaves as::

    z_1(x) = x^2 + a x + b + c ln(x)/x - M/x + O(x^-2)

and ``M`` is the generalised scattering volume.  Poles of ``M`` are the
parameters where the decaying columns alone can satisfy the nodal
conditions, i.e. where a bound state sits at threshold; the determinant
of that matrix is the robust indicator used for pole refinement.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import optimize, special

from .angular import ChannelSet, CouplingMatrix, coupling_matrix
from .radial import (NodalLineModel, PotentialSpec, RadialGrid, SolutionSet,
                     _lagrange_weights, propagate)

DEFAULT_GRID = RadialGrid(points_per_wavelength=240.0)
# the single-channel s-wave sweep is cheap; a four times finer step brings
# the scattering length within 1e-8 of its closed form
S_WAVE_GRID = DEFAULT_GRID.refined(4.0)

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class BracketError(ValueError):
    """Raised when a root bracket holds no (or more than one) sign change."""


# --------------------------------------------------------------------------
# s wave


def vdw_s_wave_length(x00: float) -> float:
    """Closed-form zero-energy s-wave scattering length for a node at ``x00``.

    The zero-energy solutions of ``u'' = -u/x^6`` are
    ``sqrt(x) J_{+-1/4}(1/(2x^2))``; requiring ``u(x00) = 0`` fixes their
    ratio and hence ``a``.
    """
    z0 = 1.0 / (2.0 * x00 * x00)
    jm = special.jv(-0.25, z0)
    jp = special.jv(0.25, z0)
    pref = special.gamma(0.75) / (2.0 * special.gamma(1.25))
    if jp == 0:
        return math.copysign(math.inf, jm)
    return float(pref * jm / jp)


def s_wave_scattering_length(x00: float, grid: RadialGrid | None = None,
                             window=(50.0, 200.0)) -> float:
    """Field-free s-wave scattering length from an outward integration.

    The l=0, E=0, I=0 equation is integrated outward from ``u(x00) = 0``
    and ``u`` is fitted to ``C (x - a)`` on ``window``, both terms carrying
    their leading ``x^-4`` relative corrections.

    Returns ``+-inf`` when the fitted slope vanishes.
    """
    if not 0.10 < x00 < 0.20:
        raise ValueError(f"x00={x00} outside the working range (0.10, 0.20)")
    grid = grid or S_WAVE_GRID
    if window[1] > grid.x_max:
        raise ValueError("fit window extends beyond x_max")
    spec = PotentialSpec(0.0, CouplingMatrix((0,), np.zeros((1, 1)), "s"))
    sol = propagate(spec, grid, "outward-from-nodes", NodalLineModel(x00))
    u, _ = sol.combine(np.ones(1))
    x = sol.mesh.x
    sel = (x >= window[0]) & (x <= window[1])
    if sel.sum() < 4:
        raise ValueError("fit window is not sampled by the grid")
    xs = x[sel]
    # leading corrections of the two zero-energy solutions x and 1
    design = np.vstack([xs - 1.0 / (12.0 * xs ** 3), 1.0 - 1.0 / (20.0 * xs ** 4)]).T
    slope, icpt = np.linalg.lstsq(design, u[sel, 0], rcond=None)[0]
    if slope == 0:
        return math.copysign(math.inf, -icpt)
    return float(-icpt / slope)


def x00_for_scattering_length(a: float, bracket=(0.1429, 0.1526)) -> float:
    """Nodal parameter in ``bracket`` whose s-wave scattering length is ``a``."""
    f = lambda x: vdw_s_wave_length(x) - a
    xs = np.linspace(bracket[0], bracket[1], 401)
    vals = np.array([f(x) for x in xs])
    for k in range(xs.size - 1):
        if np.isfinite(vals[k]) and np.isfinite(vals[k + 1]) and vals[k] * vals[k + 1] <= 0:
            if abs(vals[k] - vals[k + 1]) > 50:
                continue  # a pole of a(x00), not a root
            return float(optimize.brentq(f, xs[k], xs[k + 1], xtol=1e-15))
    raise BracketError(f"no x00 in {bracket} gives a={a}")


# --------------------------------------------------------------------------
# threshold solution and generalised scattering volume


@dataclass
class ThresholdSolution:
    """Zero-energy physical combination and its diagnostics.

    Attributes
    ----------
    solutions : SolutionSet
        Reference columns ``[D_lmax .. D_lmin, G_lmin]``.
    coefficients : ndarray
        Coefficients of the reference columns in their series
        normalisation, with the growing one equal to 1.
    m_matched : float
        ``-`` coefficient of the p-wave decaying column.
    determinant : float
        Column-normalised determinant of the decaying-only nodal matrix.
    singular : bool
        True when that matrix is numerically singular (threshold bound state).
    """

    solutions: SolutionSet
    nodes: np.ndarray
    coefficients: np.ndarray
    final: np.ndarray
    m_matched: float
    determinant: float
    singular: bool
    _u: np.ndarray | None = field(default=None, repr=False)
    _du: np.ndarray | None = field(default=None, repr=False)

    @property
    def spec(self) -> PotentialSpec:
        return self.solutions.spec

    @property
    def x(self) -> np.ndarray:
        return self.solutions.mesh.x

    def radial(self):
        """Physical radial functions ``(u, du)`` on the grid, shape (N, n)."""
        if self._u is None:
            p = self.solutions.w.shape[2]
            u, du = self.solutions.combine(self.final, normalize_column=p - 1)
            sc = self.solutions.column_scale[p - 1]
            self._u, self._du = u * sc, du * sc
        return self._u, self._du

    def at(self, xs):
        """Physical radial functions at arbitrary radii (Lagrange in ``y``)."""
        u, _ = self.radial()
        return interpolate_on_mesh(self.solutions, u, xs)


def interpolate_on_mesh(sol: SolutionSet, values, xs, stencil: int = 8):
    """Interpolate grid values ``values`` (N, ...) to radii ``xs``.

    Interpolation acts on ``values / psi`` in the mapped variable, which
    is smooth on the uniform grid.
    """
    mesh = sol.mesh
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    vals = np.asarray(values)
    scaled = vals / mesh.psi.reshape((-1,) + (1,) * (vals.ndim - 1))
    out = []
    for x in xs:
        yv = float(mesh.y_of(x))
        j = (mesh.y[0] - yv) / mesh.h if mesh.order == "inward" else (yv - mesh.y[0]) / mesh.h
        lo = int(math.floor(j)) - stencil // 2 + 1
        lo = min(max(lo, 0), mesh.size - stencil)
        idx = np.arange(lo, lo + stencil)
        wts = _lagrange_weights(mesh.y[idx], yv)
        out.append(np.tensordot(wts, scaled[idx], axes=1) * sol.psi_at(x))
    return np.array(out)


def _nodal_matrix(sol: SolutionSet, nodes):
    n = sol.spec.n
    return sol.final_values_at(nodes, rows=np.arange(n))


def _normalized_det(mat):
    norms = np.linalg.norm(mat, axis=0)
    norms[norms == 0] = 1.0
    return float(np.linalg.det(mat / norms))


def threshold_solution(spec: PotentialSpec, model: NodalLineModel,
                       grid: RadialGrid | None = None, channel: int = 0,
                       backend: str | None = None) -> ThresholdSolution:
    """Zero-energy physical solution growing in channel index ``channel``.

    Parameters
    ----------
    spec : PotentialSpec
        Must have ``energy == 0`` and no trap.
    model : NodalLineModel
    grid : RadialGrid, optional
    channel : int
        Index of the channel carrying the ``x^(l+1)`` growth (0 = lowest l).

    Returns
    -------
    ThresholdSolution
    """
    if spec.trap_beta != 0 or spec.energy != 0:
        raise ValueError("threshold solutions need E=0 and no trap")
    grid = grid or DEFAULT_GRID
    n = spec.n
    sol = propagate(spec, grid, "inward-threshold", model, columns=(channel,), backend=backend)
    nodes = model.nodes(0.0, spec.coupling.ell_list, spec.intensity)
    z = _nodal_matrix(sol, nodes)
    dmat, gvec = z[:, :n], z[:, n]
    det = _normalized_det(dmat)
    cond = np.linalg.cond(dmat)
    singular = not np.isfinite(cond) or cond > 1e13
    if singular:
        e_d = -np.linalg.lstsq(dmat, gvec, rcond=None)[0]
    else:
        e_d = -np.linalg.solve(dmat, gvec)
    final = np.append(e_d, 1.0)
    c = sol.original_coefficients(final) / sol.column_scale
    c = c / c[n]
    # the p-wave decaying column D_{lmin} is the last decaying one
    m_matched = -float(c[n - 1])
    return ThresholdSolution(sol, nodes, c, final, m_matched, det, singular)


def threshold_determinant(spec: PotentialSpec, model: NodalLineModel,
                          grid: RadialGrid | None = None, backend: str | None = None) -> float:
    """Sign-robust determinant of the decaying-only nodal conditions at E=0.

    Zero exactly when a bound state sits at threshold.  Column
    normalisation keeps its magnitude in ``[-1, 1]``.
    """
    grid = grid or DEFAULT_GRID
    sol = propagate(spec, grid, "inward-decaying", model, backend=backend)
    nodes = model.nodes(0.0, spec.coupling.ell_list, spec.intensity)
    return _normalized_det(_nodal_matrix(sol, nodes))


@dataclass(frozen=True)
class AsymptoticFitBasis:
    """Five-function large-``x`` basis of the p-wave channel.

    ``window`` holds the sample radii; the default is a geometric ladder
    of 8 points in ``[x_max/4, x_max]``.  ``subtract_tail`` removes the
    known ``O(x^-2)`` part of the expansion before fitting.
    """

    window: tuple
    subtract_tail: bool = True
    names: tuple = ("x^2", "x", "1", "ln(x)/x", "1/x")

    @classmethod
    def default(cls, x_max: float = 200.0, npts: int = 8) -> "AsymptoticFitBasis":
        return cls(tuple(np.geomspace(x_max / 4.0, x_max, npts)))

    def design(self, x=None):
        x = np.asarray(self.window if x is None else x, dtype=float)
        return np.vstack([x * x, x, np.ones_like(x), np.log(x) / x, 1.0 / x]).T

    def condition(self) -> float:
        a = self.design()
        return float(np.linalg.cond(a / np.max(np.abs(a), axis=0)))


@dataclass
class VolumeResult:
    """Generalised scattering volume with fit diagnostics.

    Attributes
    ----------
    m_value : float
        Fitted volume ``M`` (``u ~ x^2 - M/x``).
    m_matched : float
        Volume from the matching coefficients, an independent check.
    residual : float
        Max fit residual relative to the leading coefficient times ``x^2``.
    coefficients : dict
        Fitted coefficients of the five basis functions.
    weights : ndarray
        Integrated probability per channel over ``x <= 5``.
    ell_label : int
        Dominant channel of the short-range weights.
    flagged : bool
        Residual above tolerance or threshold bound state.
    """

    m_value: float
    m_matched: float
    residual: float
    coefficients: dict
    weights: np.ndarray
    ell_label: int
    flagged: bool
    determinant: float
    channel_kinds: dict = field(default_factory=dict)


def _channel_weights(sol: SolutionSet, u, x_short: float = 5.0):
    x = sol.mesh.x
    sel = x <= x_short
    xs = x[sel]
    order = np.argsort(xs)
    dens = u[sel][order] ** 2
    w = _trapezoid(dens, xs[order], axis=0)
    tot = w.sum()
    return w / tot if tot > 0 else w


def extract_volume(thr: ThresholdSolution, basis: AsymptoticFitBasis | None = None,
                   tol: float = 1e-6) -> VolumeResult:
    """Fit the p-wave channel of a threshold solution to the five-term basis.

    Parameters
    ----------
    thr : ThresholdSolution
    basis : AsymptoticFitBasis, optional
        Defaults to 8 geometric points in ``[x_max/4, x_max]``.
    tol : float
        Residual above which the result is flagged.
    """
    sol = thr.solutions
    x_max = float(sol.mesh.x[0])
    basis = basis or AsymptoticFitBasis.default(x_max)
    xs = np.asarray(basis.window, dtype=float)
    if xs.max() > x_max * (1 + 1e-12) or xs.min() <= 0:
        raise ValueError("fit window outside the integration range")
    design = basis.design()
    cond = basis.condition()
    if not np.isfinite(cond) or cond > 1e14:
        raise ValueError(f"ill-conditioned fit basis (cond={cond:.3g})")
    z = thr.at(xs)[:, 0]
    target = z.copy()
    if basis.subtract_tail and sol.series is not None:
        n = thr.spec.n
        g_ser = sol.series[n]
        d_ser = sol.series[n - 1]
        tail = g_ser.evaluate(xs, kmin=4)[0][:, 0]
        tail += thr.coefficients[n - 1] * d_ser.evaluate(xs, kmin=1)[0][:, 0]
        target -= tail
    colscale = np.max(np.abs(design), axis=0)
    coef = np.linalg.lstsq(design / colscale, target, rcond=None)[0] / colscale
    fit = design @ coef
    lead = abs(coef[0]) * xs.max() ** 2
    residual = float(np.max(np.abs(fit - target)) / lead) if lead > 0 else math.inf
    m_value = float(-coef[4] / coef[0])
    u, _ = thr.radial()
    weights = _channel_weights(sol, u)
    ells = thr.spec.coupling.ell_list
    kinds = {int(l): ("growing" if i == 0 else "decaying") for i, l in enumerate(ells)}
    flagged = thr.singular or residual > tol or not np.isfinite(m_value)
    return VolumeResult(m_value, thr.m_matched, residual, dict(zip(basis.names, coef.tolist())),
                        weights, int(ells[int(np.argmax(weights))]), flagged, thr.determinant, kinds)


def scattering_volume(spec: PotentialSpec, model: NodalLineModel, grid: RadialGrid | None = None,
                      basis: AsymptoticFitBasis | None = None) -> VolumeResult:
    """Convenience wrapper: threshold solution followed by the asymptotic fit."""
    return extract_volume(threshold_solution(spec, model, grid), basis)


# --------------------------------------------------------------------------
# scans and poles


@dataclass(frozen=True)
class ScanSetup:
    """Fixed parameters of a scan over ``I`` or ``x00``.

    ``coupling`` fixes the channel set (fixed ``m`` or orientation);
    ``intensity`` and ``model`` provide the value of the axis not scanned.
    """

    coupling: CouplingMatrix
    intensity: float = 0.0
    model: NodalLineModel = NodalLineModel(0.1492)
    grid: RadialGrid = DEFAULT_GRID

    def at(self, axis: str, value: float):
        if axis == "intensity":
            return PotentialSpec(float(value), self.coupling), self.model
        if axis == "x00":
            m = self.model
            return (PotentialSpec(self.intensity, self.coupling),
                    NodalLineModel(float(value), m.slope_E, m.slope_L, m.slope_I))
        raise ValueError(f"unknown scan axis {axis!r}")


def setup_for_m(m: int, n: int, **kw) -> ScanSetup:
    return ScanSetup(coupling_matrix(ChannelSet.odd(m, n)), **kw)


@dataclass
class ScanRow:
    axis_value: float
    m_value: float
    m_matched: float
    residual: float
    determinant: float
    flagged: bool
    ell_label: int


def volume_point(setup: ScanSetup, axis: str, value: float) -> ScanRow:
    spec, model = setup.at(axis, value)
    thr = threshold_solution(spec, model, setup.grid)
    res = extract_volume(thr)
    return ScanRow(float(value), res.m_value, res.m_matched, res.residual,
                   res.determinant, res.flagged, res.ell_label)


def volume_scan(setup: ScanSetup, axis: str, values, mapper=map) -> list:
    """Generalised volume along ``axis`` at each of ``values``.

    ``mapper`` lets callers parallelise (e.g. ``pool.map``); rows are
    returned sorted by axis value whatever the completion order.
    """
    values = [float(v) for v in values]
    if not values:
        raise ValueError("empty scan range")
    rows = list(mapper(_VolumeTask(setup, axis), values))
    return sorted(rows, key=lambda r: r.axis_value)


class _VolumeTask:
    def __init__(self, setup, axis):
        self.setup, self.axis = setup, axis

    def __call__(self, value):
        return volume_point(self.setup, self.axis, value)


def determinant_at(setup: ScanSetup, axis: str, value: float) -> float:
    spec, model = setup.at(axis, value)
    return threshold_determinant(spec, model, setup.grid)


@dataclass
class PoleRecord:
    """Zero-energy bound state crossing threshold along a scan axis.

    ``width`` is the residue ``w`` of ``M ~ w / (s - s_p)``; ``ell_label``
    is the dominant channel of the threshold bound state.
    """

    axis: str
    location: float
    width: float
    ell_label: int
    m: str
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))


def bound_state_weights(spec: PotentialSpec, model: NodalLineModel, grid: RadialGrid,
                        x_short: float = 5.0):
    """Channel weights of the threshold bound state (null vector of the nodal matrix)."""
    sol = propagate(spec, grid, "inward-decaying", model)
    nodes = model.nodes(0.0, spec.coupling.ell_list, spec.intensity)
    mat = _nodal_matrix(sol, nodes)
    _, _, vt = np.linalg.svd(mat)
    u, _ = sol.combine(vt[-1])
    return _channel_weights(sol, u, x_short)


def find_pole(setup: ScanSetup, axis: str, bracket, xtol: float = 1e-10,
              width_offsets=(2e-3, 5e-3, 1e-2)) -> PoleRecord:
    """Locate the threshold bound state inside ``bracket`` along ``axis``.

    The determinant of the decaying-only nodal conditions must change sign
    exactly once across a fine sampling of the bracket.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not hi > lo:
        raise BracketError("empty bracket")
    f = lambda s: determinant_at(setup, axis, s)
    samples = np.linspace(lo, hi, 41)
    vals = np.array([f(s) for s in samples])
    changes = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    if changes.size == 0:
        raise BracketError(f"no determinant sign change for {axis} in [{lo}, {hi}]")
    if changes.size > 1:
        raise BracketError(f"{changes.size} determinant sign changes for {axis} in [{lo}, {hi}]")
    k = changes[0]
    root = optimize.brentq(f, samples[k], samples[k + 1], xtol=xtol)
    width = pole_width(setup, axis, root, width_offsets)
    spec, model = setup.at(axis, root)
    weights = bound_state_weights(spec, model, setup.grid)
    ells = setup.coupling.ell_list
    return PoleRecord(axis, float(root), width, int(ells[int(np.argmax(weights))]),
                      setup.coupling.label, weights)


def pole_width(setup: ScanSetup, axis: str, root: float, offsets=(2e-3, 5e-3, 1e-2)) -> float:
    """Residue of ``M`` at a pole from samples on both flanks.

    ``M(s) = w / (s - s_p) + b0 + b1 (s - s_p)`` is fitted by least squares.
    """
    ds = np.concatenate([-np.asarray(offsets), np.asarray(offsets)])
    rows = [volume_point(setup, axis, root + d) for d in ds]
    m = np.array([r.m_value for r in rows])
    design = np.vstack([1.0 / ds, np.ones_like(ds), ds]).T
    coef = np.linalg.lstsq(design, m, rcond=None)[0]
    return float(coef[0])


def determinant_roots(setup: ScanSetup, axis: str, values, xtol: float = 1e-9) -> list:
    """All sign changes of the threshold determinant on a sampled axis, refined."""
    values = np.asarray(values, dtype=float)
    f = lambda s: determinant_at(setup, axis, s)
    d = np.array([f(v) for v in values])
    roots = []
    for k in np.nonzero(np.sign(d[:-1]) != np.sign(d[1:]))[0]:
        roots.append(float(optimize.brentq(f, values[k], values[k + 1], xtol=xtol)))
    return roots


@dataclass
class SingularityCurve:
    """A branch of threshold bound states in the ``(I, x00)`` plane."""

    ell_label: int
    intensity: list = field(default_factory=list)
    x00: list = field(default_factory=list)
    width_x00: list = field(default_factory=list)

    def slope(self):
        """``dI/dx00`` along the branch (finite differences)."""
        i = np.asarray(self.intensity)
        x = np.asarray(self.x00)
        if i.size < 2:
            return np.full(i.size, np.nan)
        return np.gradient(i, x)


def singularity_map(coupling: CouplingMatrix, intensities, x00_values,
                    grid: RadialGrid | None = None, with_widths: bool = False,
                    max_jump: float = 0.002) -> list:
    """Trace ``det = 0`` curves over ``x00`` for each intensity.

    For every intensity the roots in ``x00`` are found by sign changes of
    the threshold determinant; roots at successive intensities are linked
    into branches when they are closer than ``max_jump`` and share ``l~``.
    Branches that cannot be continued are closed, not dropped.
    """
    grid = grid or DEFAULT_GRID
    curves: list[SingularityCurve] = []
    open_curves: list[SingularityCurve] = []
    for inten in intensities:
        setup = ScanSetup(coupling, intensity=float(inten), grid=grid)
        roots = determinant_roots(setup, "x00", x00_values)
        next_open = []
        for r in roots:
            spec, model = setup.at("x00", r)
            wts = bound_state_weights(spec, model, grid)
            label = int(coupling.ell_list[int(np.argmax(wts))])
            best = None
            for c in open_curves:
                if c.ell_label == label and abs(c.x00[-1] - r) < max_jump and c not in next_open:
                    if best is None or abs(c.x00[-1] - r) < abs(best.x00[-1] - r):
                        best = c
            if best is None:
                best = SingularityCurve(label)
                curves.append(best)
            best.intensity.append(float(inten))
            best.x00.append(r)
            best.width_x00.append(pole_width(setup, "x00", r, (2e-5, 5e-5, 1e-4))
                                  if with_widths else math.nan)
            next_open.append(best)
        open_curves = next_open
    return curves
