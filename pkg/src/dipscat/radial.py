"""Coupled-channel radial problem in van der Waals reduced units.

The potential matrix is::

    V_ll'(x) = delta_ll' [l(l+1)/x^2 - 1/x^6 + beta^4 x^2] - I q_ll' / x^3

and the radial functions obey ``u'' = (V - E) u``.  Short-range physics is
replaced by a nodal line: every physical solution vanishes at
``x0(E, l, I)``.

Propagation uses a Liouville map.  With a positive comparison function
``P(x)`` that bounds the local wave number, the new variable
``y = int sqrt(P) dx`` and ``u = P^(-1/4) w`` turn the equations into
``w_yy = W(y) w`` where ``|W|`` stays of order one everywhere.  A uniform
``y`` grid then resolves the fast oscillations at short range and the
slow power laws at large ``x`` with the same step.  The Numerov sweep
itself lives in :mod:`dipscat._kernels`.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
import math

import numpy as np

from . import _kernels
from .angular import CouplingMatrix


_GL_T, _GL_W = np.polynomial.legendre.leggauss(12)


@dataclass(frozen=True)
class PotentialSpec:
    """Parameters of the coupled radial equations.

    Attributes
    ----------
    intensity : float
        Reduced intensity ``I`` (van der Waals units).
    coupling : CouplingMatrix
        Angular matrix of ``cos^2(theta) - 1/3`` over the channel list.
    trap_beta : float
        ``beta_omega``; zero disables the harmonic trap.
    energy : float
        Collision energy in van der Waals units.
    c6 : float
        Strength of the ``-1/x^6`` term; 1 in reduced units, 0 switches the
        van der Waals attraction off (pure trap or pure dipolar tests).
    """

    intensity: float
    coupling: CouplingMatrix
    trap_beta: float = 0.0
    energy: float = 0.0
    c6: float = 1.0

    def __post_init__(self):
        if self.intensity < 0:
            raise ValueError("intensity must be non-negative")
        if self.trap_beta < 0:
            raise ValueError("trap_beta must be non-negative")
        if self.c6 < 0:
            raise ValueError("c6 must be non-negative")

    @property
    def ells(self) -> np.ndarray:
        return self.coupling.ells

    @property
    def n(self) -> int:
        return self.coupling.n

    def with_energy(self, energy: float) -> "PotentialSpec":
        return replace(self, energy=float(energy))

    def with_intensity(self, intensity: float) -> "PotentialSpec":
        return replace(self, intensity=float(intensity))


def potential_matrix(spec: PotentialSpec, x):
    """Potential matrix at ``x``; returns shape ``x.shape + (n, n)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("potential_matrix needs x > 0")
    ells = spec.ells
    cent = ells * (ells + 1.0)
    xe = x[..., None]
    diag = cent / xe ** 2 - spec.c6 / xe ** 6 + spec.trap_beta ** 4 * xe ** 2
    v = -spec.intensity * spec.coupling.values / (x[..., None, None] ** 3)
    idx = np.arange(spec.n)
    v[..., idx, idx] += diag
    return v


@dataclass(frozen=True)
class NodalLineModel:
    """Linear nodal line ``x0 = x00 + sE E + sL l(l+1) + sI I``.

    The default zero slopes give the fixed-node model.
    """

    x00: float
    slope_E: float = 0.0
    slope_L: float = 0.0
    slope_I: float = 0.0

    def node(self, energy: float, ell: int, intensity: float) -> float:
        return node_position(self, energy, ell, intensity)

    def nodes(self, energy: float, ells, intensity: float) -> np.ndarray:
        return np.array([node_position(self, energy, int(l), intensity) for l in ells])


def node_position(model: NodalLineModel, energy: float, ell: int, intensity: float) -> float:
    """Position of the nodal line for one channel."""
    x0 = (model.x00 + model.slope_E * energy + model.slope_L * ell * (ell + 1)
          + model.slope_I * intensity)
    if not x0 > 0:
        raise ValueError(f"non-positive node position {x0} for l={ell}, E={energy}, I={intensity}")
    return float(x0)


@dataclass(frozen=True)
class RadialGrid:
    """Step policy of the propagator.

    Attributes
    ----------
    x_max : float
        Outer end of the integration.
    points_per_wavelength : float
        Grid points per ``2 pi`` of the mapped variable; the local step in
        ``x`` is ``2 pi / (ppw * sqrt(P(x)))``.
    max_step : float
        Absolute cap on the step in ``x``.
    x_floor : float
        Overflow guard: no grid point below this radius.
    qr_every : int
        Steps between re-orthonormalisations of multi-column sweeps.
    x_grow : float
        Radius below which growing zero-energy reference columns are
        integrated numerically; above it they come from their expansion.
    """

    x_max: float = 200.0
    points_per_wavelength: float = 120.0
    max_step: float = 2.0
    x_floor: float = 0.10
    qr_every: int = 20
    x_grow: float = 20.0

    def refined(self, factor: float = 2.0) -> "RadialGrid":
        """Same policy with the step divided by ``factor``."""
        return RadialGrid(self.x_max, self.points_per_wavelength * factor,
                          self.max_step / factor, self.x_floor, self.qr_every, self.x_grow)


@dataclass(frozen=True)
class Comparison:
    """Comparison function ``P = c6 x^-6 + kappa2 x^-2 + b4 x^2 + e0``."""

    kappa2: float
    b4: float
    e0: float
    c6: float = 1.0

    def p(self, x):
        return self.c6 * x ** -6 + self.kappa2 * x ** -2 + self.b4 * x * x + self.e0

    def dp(self, x):
        return -6.0 * self.c6 * x ** -7 - 2.0 * self.kappa2 * x ** -3 + 2.0 * self.b4 * x

    def d2p(self, x):
        return 42.0 * self.c6 * x ** -8 + 6.0 * self.kappa2 * x ** -4 + 2.0 * self.b4

    def phi(self, x):
        return np.sqrt(self.p(x))


def comparison_for(spec: PotentialSpec, grid: RadialGrid, energy_shift: bool = False) -> Comparison:
    lmax = float(np.max(spec.ells))
    h = 2.0 * math.pi / grid.points_per_wavelength
    e0 = (h / grid.max_step) ** 2
    if energy_shift:
        e0 += abs(spec.energy)
    return Comparison(lmax * (lmax + 1.0) + 0.25, spec.trap_beta ** 4, e0, float(spec.c6))


class _YMap:
    """Tabulated ``y(x) = int_{x_ref}^x sqrt(P) dx`` with a Newton inverse."""

    def __init__(self, comp: Comparison, x_lo: float, x_hi: float, x_ref: float, dtau: float = 0.02):
        self.comp = comp
        t_lo, t_hi = math.log(x_lo), math.log(x_hi)
        m = max(4, int(math.ceil((t_hi - t_lo) / dtau)))
        self.tau = np.linspace(t_lo, t_hi, m + 1)
        pieces = self._integral(self.tau[:-1], self.tau[1:])
        cum = np.concatenate(([0.0], np.cumsum(pieces)))
        self.cum = cum - self._raw(math.log(x_ref), cum)

    def _integrand(self, tau):
        x = np.exp(tau)
        return self.comp.phi(x) * x

    def _integral(self, ta, tb):
        ta = np.asarray(ta, dtype=float)
        tb = np.asarray(tb, dtype=float)
        half = 0.5 * (tb - ta)
        nodes = (0.5 * (ta + tb))[..., None] + half[..., None] * _GL_T
        return half * np.sum(_GL_W * self._integrand(nodes), axis=-1)

    def _raw(self, tau, cum):
        tau = np.asarray(tau, dtype=float)
        k = np.clip(np.searchsorted(self.tau, tau) - 1, 0, self.tau.size - 2)
        return cum[k] + self._integral(self.tau[k], tau)

    def y(self, x):
        return self._raw(np.log(np.asarray(x, dtype=float)), self.cum)

    def x(self, y):
        y = np.asarray(y, dtype=float)
        tau = np.interp(y, self.cum, self.tau)
        for _ in range(6):
            f = self._raw(tau, self.cum) - y
            tau = tau - f / self._integrand(tau)
        return np.exp(tau)


@dataclass
class Mesh:
    """Realised grid of the mapped variable.

    Grid index 0 is the start of the sweep; ``order`` is ``"inward"`` when
    the sweep starts at ``x_max``.
    """

    x: np.ndarray
    y: np.ndarray
    h: float
    order: str
    comp: Comparison
    ymap: _YMap
    phi: np.ndarray = field(init=False)
    psi: np.ndarray = field(init=False)
    dlnpsi: np.ndarray = field(init=False)
    qcorr: np.ndarray = field(init=False)

    def __post_init__(self):
        x = self.x
        p = self.comp.p(x)
        dp = self.comp.dp(x)
        d2p = self.comp.d2p(x)
        self.phi = np.sqrt(p)
        self.psi = p ** -0.25
        self.dlnpsi = -dp / (4.0 * p)
        d2lnpsi = -(d2p * p - dp * dp) / (4.0 * p * p)
        # psi''/psi, removed from the mapped equation
        self.qcorr = d2lnpsi + self.dlnpsi ** 2

    @property
    def size(self) -> int:
        return self.x.size

    def y_of(self, x):
        return self.ymap.y(x)

    def index_of(self, x: float, tol: float = 1e-9) -> int | None:
        """Index of the grid point sitting on ``x`` in the mapped variable, if any."""
        yv = float(self.ymap.y(x))
        i = int(np.argmin(np.abs(self.y - yv)))
        return i if abs(self.y[i] - yv) <= tol * self.h else None


@lru_cache(maxsize=64)
def _cached_mesh(comp: Comparison, x_max: float, anchor: float, h_target: float,
                 n_below: int, x_floor: float) -> Mesh:
    x_lo_tab = max(x_floor, 0.5 * anchor) * 0.9
    ymap = _YMap(comp, x_lo_tab, x_max * 1.0001, anchor)
    y_top = float(ymap.y(x_max))
    nsteps = max(8, int(math.ceil(y_top / h_target)))
    h = y_top / nsteps
    y = y_top - h * np.arange(nsteps + n_below + 1)
    x = ymap.x(y)
    x[0] = x_max
    x[nsteps] = anchor
    if x[-1] < x_floor:
        raise ValueError(f"grid reaches x={x[-1]:.4g} below the overflow guard {x_floor}")
    return Mesh(x, y, h, "inward", comp, ymap)


def build_mesh(spec: PotentialSpec, grid: RadialGrid, anchor: float, x_bottom: float | None = None,
               energy_shift: bool = False, x_max: float | None = None) -> Mesh:
    """Inward mesh from ``x_max`` that puts a grid point exactly on ``anchor``.

    The grid continues below the anchor far enough to cover ``x_bottom``
    (default: the anchor itself) plus a few stencil points.
    """
    comp = comparison_for(spec, grid, energy_shift)
    x_max = grid.x_max if x_max is None else float(x_max)
    h_target = 2.0 * math.pi / grid.points_per_wavelength
    n_below = 8
    if x_bottom is not None and x_bottom < anchor:
        span = float(_YMap(comp, 0.9 * x_bottom, anchor * 1.0001, anchor).y(x_bottom))
        n_below += int(math.ceil(-span / h_target))
    return _cached_mesh(comp, float(x_max), float(anchor), h_target, n_below, grid.x_floor)


def mapped_coefficients(spec: PotentialSpec, mesh: Mesh) -> np.ndarray:
    """``W`` of the mapped equation ``w_yy = W w`` on every grid point."""
    v = potential_matrix(spec, mesh.x)
    idx = np.arange(spec.n)
    v[:, idx, idx] -= spec.energy
    v[:, idx, idx] -= mesh.qcorr[:, None]
    return v / (mesh.phi ** 2)[:, None, None]


@dataclass
class SolutionSet:
    """Several coupled solutions on one mesh.

    ``w`` holds the mapped functions of every column, expressed in the
    basis of the segment the grid point belongs to; ``rs`` are the
    triangular factors linking consecutive segments.  Use
    :meth:`combine` to get physical combinations of the original columns.

    Attributes
    ----------
    pedigree : str
        ``"inward-gaussian"``, ``"inward-decaying"``, ``"inward-threshold"``
        or ``"outward-from-nodes"``.
    columns : list of str
        Human-readable description of every starting column.
    """

    spec: PotentialSpec
    mesh: Mesh
    w: np.ndarray
    rs: np.ndarray
    seg: np.ndarray
    wmat: np.ndarray
    pedigree: str
    columns: list

    @property
    def nseg(self) -> int:
        return self.rs.shape[0] + 1

    def segment_coefficients(self, final):
        """Coefficients of one combination in every segment basis.

        ``final`` is the coefficient vector in the last segment.  Returns
        ``(coefs, logscale)`` with ``coefs[s]`` unit-normalised and the true
        coefficients equal to ``coefs[s] * exp(logscale[s])``.
        """
        k = self.rs.shape[0]
        p = self.w.shape[2]
        coefs = np.zeros((k + 1, p))
        logs = np.zeros(k + 1)
        e = np.asarray(final, dtype=float)
        nrm = np.max(np.abs(e))
        coefs[k] = e / nrm
        logs[k] = math.log(nrm)
        for s in range(k - 1, -1, -1):
            e = _upper_solve(self.rs[s], coefs[s + 1])
            nrm = np.max(np.abs(e))
            coefs[s] = e / nrm
            logs[s] = logs[s + 1] + math.log(nrm)
        return coefs, logs

    def original_coefficients(self, final):
        coefs, logs = self.segment_coefficients(final)
        return coefs[0] * math.exp(logs[0])

    def combine(self, final, normalize_column: int | None = None):
        """Physical combination on the whole grid.

        Parameters
        ----------
        final : array, shape (p,)
            Coefficients in the last-segment basis.
        normalize_column : int, optional
            Rescale so that this original column has coefficient one.

        Returns
        -------
        u, du : ndarray, shape (N, n)
            Radial function and its ``x`` derivative.
        """
        coefs, logs = self.segment_coefficients(final)
        if normalize_column is not None:
            logs = logs - logs[0] - math.log(abs(coefs[0][normalize_column]))
            coefs = coefs * np.sign(coefs[0][normalize_column])
        wv = np.einsum("inp,ip->in", self.w, coefs[self.seg]) * np.exp(logs[self.seg])[:, None]
        return self._to_u(wv)

    def column_values(self):
        """Values and derivatives of every column, each in its segment basis."""
        n, p = self.w.shape[1:]
        u = np.empty_like(self.w)
        du = np.empty_like(self.w)
        for c in range(p):
            u[:, :, c], du[:, :, c] = self._to_u(self.w[:, :, c])
        return u, du

    def _to_u(self, wv):
        mesh = self.mesh
        h = mesh.h
        wy = np.empty_like(wv)
        bw = wv - (h * h / 6.0) * np.einsum("inm,im->in", self.wmat, wv)
        wy[1:-1] = (bw[2:] - bw[:-2]) / (2.0 * h)
        # five-point one-sided differences at the two ends
        c5 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)
        wy[0] = np.tensordot(c5, wv[:5], axes=1)
        wy[-1] = -np.tensordot(c5, wv[::-1][:5], axes=1)
        if mesh.order == "inward":
            wy = -wy  # grid index runs toward decreasing y
        u = mesh.psi[:, None] * wv
        du = mesh.psi[:, None] * (mesh.dlnpsi[:, None] * wv + mesh.phi[:, None] * wy)
        return u, du

    def final_values_at(self, xs, rows=None, stencil: int = 8):
        """Mapped values ``w`` of all final-segment columns at radii ``xs``.

        Off-grid radii use Lagrange interpolation in ``y``.  With ``rows``
        given, entry ``i`` of the result only keeps channel ``rows[i]``.
        Returns shape ``(len(xs), n, p)`` or ``(len(xs), p)`` with rows.
        """
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        last = self.nseg - 1
        out = []
        for x in xs:
            yv = float(self.mesh.y_of(x))
            out.append(self._interp_w(yv, stencil, last))
        out = np.array(out)
        if rows is not None:
            out = out[np.arange(len(xs)), np.asarray(rows), :]
        return out

    def _interp_w(self, yv, stencil, segment):
        mesh = self.mesh
        j = (mesh.y[0] - yv) / mesh.h
        i0 = int(round(j))
        if abs(j - i0) < 1e-9:
            if self.seg[i0] != segment:
                raise ValueError("requested point lies outside the final segment")
            return self.w[i0]
        lo = int(math.floor(j)) - stencil // 2 + 1
        lo = min(max(lo, 0), mesh.size - stencil)
        idx = np.arange(lo, lo + stencil)
        if np.any(self.seg[idx] != segment):
            raise ValueError("interpolation stencil crosses a re-orthonormalisation")
        ys = mesh.y[idx]
        wts = _lagrange_weights(ys, yv)
        return np.einsum("k,knp->np", wts, self.w[idx])

    def psi_at(self, x):
        return self.mesh.comp.p(np.asarray(x, dtype=float)) ** -0.25


def _lagrange_weights(nodes, x):
    nodes = np.asarray(nodes, dtype=float)
    wts = np.ones(nodes.size)
    for k in range(nodes.size):
        for j in range(nodes.size):
            if j != k:
                wts[k] *= (x - nodes[j]) / (nodes[k] - nodes[j])
    return wts


def _upper_solve(r, b):
    n = r.shape[0]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - r[i, i + 1:] @ x[i + 1:]) / r[i, i]
    return x


def _sweep(spec, mesh, w0, w1, qr_stop_x, grid, backend=None):
    wmat = mapped_coefficients(spec, mesh)
    n = spec.n
    h2 = mesh.h ** 2
    amat = np.eye(n)[None, :, :] - (h2 / 12.0) * wmat
    ainv = np.linalg.inv(amat)
    mask = np.zeros(mesh.size, dtype=bool)
    if w0.shape[1] > 1 and grid.qr_every > 0:
        mask[grid.qr_every::grid.qr_every] = True
        mask &= mesh.x > qr_stop_x
        mask[:2] = False
    w, rs, seg = _kernels.numerov_sweep(ainv, amat, w0, w1, mask, backend=backend)
    if not np.all(np.isfinite(w)):
        raise FloatingPointError("overflow during propagation; refine the grid or the re-orthonormalisation")
    return w, rs, seg, wmat


def _start_values(mesh, u, du, which):
    """Mapped start values from radial values ``u`` and derivatives ``du``."""
    return u / mesh.psi[which]


def propagate(spec: PotentialSpec, grid: RadialGrid, boundary: str,
              model: NodalLineModel | None = None, columns=None,
              backend: str | None = None, x_max: float | None = None,
              x_bottom: float | None = None) -> SolutionSet:
    """Integrate a set of coupled solutions.

    Parameters
    ----------
    spec : PotentialSpec
    grid : RadialGrid
    boundary : str
        ``"inward-gaussian"``: trap starts ``delta exp(-beta^2 x^2 / 2)``.
        ``"inward-decaying"``: starts decaying in every channel at large
        ``x`` (power laws at zero energy, exponentials below threshold).
        ``"inward-threshold"``: zero-energy decaying starts for every
        channel plus the growing starts listed in ``columns``.
        ``"outward-from-nodes"``: solution ``l'`` vanishes at the common
        node with unit slope in channel ``l'``.
    model : NodalLineModel
        Needed to place the mesh; the mesh is anchored on the node of the
        lowest channel.
    columns : sequence of int, optional
        For ``"inward-threshold"``, channel indices of the growing
        solutions to carry (default: the lowest channel only).

    Returns
    -------
    SolutionSet
    """
    if model is None:
        raise ValueError("a nodal-line model is required to place the grid")
    n = spec.n
    nodes = model.nodes(spec.energy, spec.coupling.ell_list, spec.intensity)
    anchor = nodes[0]
    bottom = float(np.min(nodes)) if x_bottom is None else min(float(x_bottom), float(np.min(nodes)))
    qr_stop = 2.0 * float(np.max(nodes))
    if boundary == "outward-from-nodes":
        return _propagate_outward(spec, grid, nodes, backend, x_max)
    beta = spec.trap_beta
    if boundary == "inward-gaussian":
        if beta <= 0:
            raise ValueError("inward-gaussian starts need trap_beta > 0")
        xm = max(8.0 / beta, grid.x_max) if x_max is None else x_max
        mesh = build_mesh(spec, grid, anchor, bottom, x_max=xm)
        e_osc = spec.energy / (2.0 * beta * beta)
        xs = mesh.x[:2]
        g = np.exp(-0.5 * beta * beta * xs * xs) * (xs / xs[0]) ** (e_osc - 0.5)
        w0 = np.eye(n) * g[0] / mesh.psi[0]
        w1 = np.eye(n) * g[1] / mesh.psi[1]
        labels = [f"gaussian l'={l}" for l in spec.coupling.ell_list]
    elif boundary == "inward-decaying" and spec.energy < 0:
        if beta > 0:
            raise ValueError("use inward-gaussian starts with a trap")
        kappa = math.sqrt(-spec.energy)
        # far enough for the exponential tail, close enough to avoid overflow inward
        xm = max(20.0, 30.0 / kappa) if x_max is None else x_max
        mesh = build_mesh(spec, grid, anchor, bottom, energy_shift=True, x_max=xm)
        xs = mesh.x[:2]
        g = np.exp(-kappa * (xs - xs[0]))
        w0 = np.eye(n) * g[0] / mesh.psi[0]
        w1 = np.eye(n) * g[1] / mesh.psi[1]
        labels = [f"decaying l'={l}" for l in spec.coupling.ell_list]
    elif boundary in ("inward-decaying", "inward-threshold"):
        if beta > 0 or spec.energy != 0 or spec.c6 != 1.0:
            raise ValueError("power-law starts need E=0, no trap and c6=1")
        from .series import threshold_series
        mesh = build_mesh(spec, grid, anchor, bottom, x_max=x_max)
        qmat = spec.intensity * spec.coupling.values
        ells = spec.coupling.ell_list
        cols = []
        labels = []
        for j in range(n - 1, -1, -1):
            cols.append(threshold_series(ells, qmat, "decaying", j))
            labels.append(f"decaying l'={ells[j]}")
        if boundary == "inward-threshold":
            for j in (columns if columns is not None else (0,)):
                cols.append(threshold_series(ells, qmat, "growing", j))
                labels.append(f"growing l'={ells[j]}")
        ndec = n
        scale = np.empty(len(cols))
        u = np.zeros((2, n, ndec))
        for c in range(ndec):
            u[:, :, c], _ = cols[c].evaluate(mesh.x[:2])
            scale[c] = np.max(np.abs(u[0, :, c]))
        u = u / scale[:ndec]
        w0 = u[0] / mesh.psi[0]
        w1 = u[1] / mesh.psi[1]
        if len(cols) == ndec:
            sol = _finish(spec, mesh, w0, w1, qr_stop, grid, backend, boundary, labels)
        else:
            sol = _finish_injected(spec, mesh, w0, w1, cols[ndec:], scale, qr_stop, grid,
                                   backend, boundary, labels)
        sol.series = cols
        sol.column_scale = scale
        return sol
    else:
        raise ValueError(f"unknown boundary pedigree {boundary!r}")
    return _finish(spec, mesh, w0, w1, qr_stop, grid, backend, boundary, labels)


def _finish(spec, mesh, w0, w1, qr_stop, grid, backend, pedigree, labels):
    w, rs, seg, wmat = _sweep(spec, mesh, w0, w1, qr_stop, grid, backend)
    sol = SolutionSet(spec, mesh, w, rs, seg, wmat, pedigree, labels)
    sol.series = None
    sol.column_scale = np.ones(w.shape[2])
    return sol


def _finish_injected(spec, mesh, w0, w1, growing, scale, qr_stop, grid, backend, pedigree, labels):
    """Sweep decaying columns from ``x_max`` and start growing ones at ``grid.x_grow``.

    Integrated inward, a growing reference column is the subdominant
    solution: round-off near ``x_max`` seeds decaying admixtures that are
    amplified by ``(x_max / x_node)^(2l+1)``.  The large-``x`` expansion
    converges for every ``x > 0`` at zero energy, so the growing columns
    are taken from it down to ``x_grow`` and integrated numerically only
    below.
    """
    ndec = w0.shape[1]
    ng = len(growing)
    i_g = int(np.searchsorted(-mesh.x, -grid.x_grow))
    i_g = min(max(i_g, 0), mesh.size - 4)
    wmat = mapped_coefficients(spec, mesh)
    n = spec.n
    h2 = mesh.h ** 2
    amat = np.eye(n)[None, :, :] - (h2 / 12.0) * wmat
    ainv = np.linalg.inv(amat)
    mask = np.zeros(mesh.size, dtype=bool)
    if grid.qr_every > 0:
        mask[grid.qr_every::grid.qr_every] = True
        mask &= mesh.x > qr_stop
    mask[:2] = False
    mask[i_g:i_g + 2] = False
    if i_g > 0:
        w_a, rs_a, seg_a = _kernels.numerov_sweep(ainv[:i_g + 2], amat[:i_g + 2], w0, w1,
                                                  mask[:i_g + 2], backend=backend)
    else:
        w_a = np.concatenate(([w0], [w1]))
        rs_a = np.zeros((0, ndec, ndec))
        seg_a = np.zeros(2, dtype=np.int64)
    # growing columns from the expansion on the outer part of the grid
    ug = np.zeros((i_g + 2, n, ng))
    for c, ser in enumerate(growing):
        ug[:, :, c], _ = ser.evaluate(mesh.x[:i_g + 2])
        scale[ndec + c] = np.max(np.abs(ug[i_g, :, c]))
    ug = ug / scale[ndec:]
    wg = ug / mesh.psi[:i_g + 2, None, None]
    start0 = np.concatenate((w_a[i_g], wg[i_g]), axis=1)
    start1 = np.concatenate((w_a[i_g + 1], wg[i_g + 1]), axis=1)
    w_b, rs_b, seg_b = _kernels.numerov_sweep(ainv[i_g:], amat[i_g:], start0, start1,
                                              mask[i_g:], backend=backend)
    p = ndec + ng
    w = np.empty((mesh.size, n, p))
    w[:i_g + 2, :, :ndec] = w_a
    w[:i_g + 2, :, ndec:] = wg
    w[i_g:] = w_b
    w[i_g:i_g + 2] = np.concatenate((w_a[i_g:], wg[i_g:]), axis=2)
    rs = np.zeros((rs_a.shape[0] + rs_b.shape[0], p, p))
    for k in range(rs_a.shape[0]):
        rs[k, :ndec, :ndec] = rs_a[k]
        rs[k, ndec:, ndec:] = np.eye(ng)
    rs[rs_a.shape[0]:] = rs_b
    seg = np.empty(mesh.size, dtype=np.int64)
    seg[:i_g + 2] = seg_a
    seg[i_g:] = seg_a[-1] + seg_b
    if not np.all(np.isfinite(w)):
        raise FloatingPointError("overflow during propagation")
    sol = SolutionSet(spec, mesh, w, rs, seg, wmat, pedigree, labels)
    sol.x_grow = float(mesh.x[i_g])
    return sol


def _propagate_outward(spec, grid, nodes, backend, x_max):
    if np.ptp(nodes) > 0:
        raise ValueError("outward starts need a common node in every channel")
    anchor = float(nodes[0])
    inward = build_mesh(spec, grid, anchor, anchor, x_max=x_max)
    k = inward.index_of(anchor)
    # reverse the part of the mesh from one point below the node to x_max
    sl = slice(k + 1, None, -1) if k + 1 < inward.size else slice(None, None, -1)
    x = inward.x[sl].copy()
    y = inward.y[sl].copy()
    mesh = Mesh(x, y, inward.h, "outward", inward.comp, inward.ymap)
    wmat = mapped_coefficients(spec, mesh)
    n = spec.n
    h = mesh.h
    # Taylor start about the node (grid index 1), unit slope in channel l'
    i = 1
    w_node = np.zeros((n, n))
    s = np.eye(n) * (1.0 / (mesh.psi[i] * mesh.phi[i]))
    w_1 = wmat[i]
    d1 = (wmat[i + 1] - wmat[i - 1]) / (2 * h)
    d2 = (wmat[i + 1] - 2 * wmat[i] + wmat[i - 1]) / h ** 2

    def taylor(t):
        a3 = w_1 / 6.0
        a4 = d1 / 12.0
        a5 = (d2 / 2.0 + w_1 @ w_1 / 6.0) / 20.0
        return (t * np.eye(n) + a3 * t ** 3 + a4 * t ** 4 + a5 * t ** 5) @ s

    w_prev = taylor(-h)
    sub = mesh
    sub_w = np.concatenate(([w_prev], [w_node]))
    # sweep from the node outward, index 0 of the sweep is the point below
    amat = np.eye(n)[None] - (h * h / 12.0) * wmat
    ainv = np.linalg.inv(amat)
    mask = np.zeros(mesh.size, dtype=bool)
    w, rs, seg = _kernels.numerov_sweep(ainv, amat, sub_w[0], sub_w[1], mask, backend=backend)
    if not np.all(np.isfinite(w)):
        raise FloatingPointError("overflow during outward propagation")
    sol = SolutionSet(spec, sub, w, rs, seg, wmat, "outward-from-nodes",
                      [f"node l'={l}" for l in spec.coupling.ell_list])
    sol.series = None
    sol.column_scale = np.ones(n)
    return sol
