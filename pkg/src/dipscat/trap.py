"""Two particles in an isotropic harmonic trap.

In van der Waals reduced units the trap adds ``beta^4 x^2`` to every
diagonal element of the potential, with ``beta = sigma / a_omega``.
Energies are quoted either as ``E`` (van der Waals units) or as
``e = E / (2 beta^2)`` (oscillator units), in which the interaction-free
levels sit at ``e = 2N + l + 3/2``.

Bound levels follow from inward solutions that start as Gaussians at
large ``x``: the energy is an eigenvalue when a combination of them
vanishes on the nodal line of every channel.  The module also holds the
pseudopotential description of the lowest p-wave levels, the affine law
``dE = A + B M`` linking level shifts to the generalised scattering
volume, and the closed-form ``A`` and ``B``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import math
import warnings

import numpy as np
from scipy import integrate, linalg, optimize, special

from .angular import CouplingMatrix
from .radial import NodalLineModel, PotentialSpec, RadialGrid, propagate
from .scatter import DEFAULT_GRID, ScanSetup, _nodal_matrix, _trapezoid, volume_point

SQRT_PI = math.sqrt(math.pi)
# energy offsets (oscillator units) of the root-order probe
_PROBE_D1, _PROBE_D2 = 1e-4, 1e-3

# Table of the closed-form shift-law coefficients, indexed by N:
# A = a_N c3 beta^3 / sqrt(pi),  B = b_N beta^5 / sqrt(pi)
_A_COEF = {0: -4.0 / 3.0, 1: -26.0 / 15.0, 2: -433.0 / 210.0}
_B_COEF = {0: 8.0, 1: 20.0, 2: 35.0}


@dataclass(frozen=True)
class TrapSpec:
    """Isotropic harmonic confinement.

    Attributes
    ----------
    beta_omega : float
        Ratio ``sigma / a_omega`` of the van der Waals length to the
        oscillator length.
    """

    beta_omega: float

    def __post_init__(self):
        if not 0.0 < self.beta_omega < 1.0:
            raise ValueError("beta_omega must lie in (0, 1)")

    def a_omega(self, sigma: float = 1.0) -> float:
        """Oscillator length, in the unit of ``sigma``."""
        return sigma / self.beta_omega

    def eps_omega(self, eps: float = 1.0) -> float:
        """Oscillator energy unit ``hbar omega = 2 eps beta^2``."""
        return 2.0 * eps * self.beta_omega ** 2

    def check_dipole_length(self, intensity: float) -> bool:
        """Warn when the dipolar length ``I/6`` exceeds the trap length."""
        ok = intensity / 6.0 < self.a_omega()
        if not ok:
            warnings.warn(f"dipolar length {intensity / 6.0:.3g} exceeds the trap length "
                          f"{self.a_omega():.3g}", RuntimeWarning, stacklevel=2)
        return ok


def unperturbed_e(N: int, ell: int) -> float:
    """Interaction-free level ``2N + l + 3/2`` in oscillator units."""
    return 2.0 * N + ell + 1.5


def unperturbed_energy(N: int, ell: int, beta: float) -> float:
    """Interaction-free level in van der Waals units."""
    return 2.0 * beta * beta * unperturbed_e(N, ell)


@dataclass
class TrapLevel:
    """One bound level of the trapped pair.

    ``N`` and ``ell`` form the diabatic label (dominant channel and the
    nearest compatible oscillator level).  ``index`` is the adiabatic rank
    of the level inside the searched window and ``adiabatic`` the
    interaction-free level of the same rank, when the window starts below
    the lowest one.  ``degenerate`` flags a double root of the quantisation
    determinant.
    """

    energy: float
    e_omega: float
    N: int
    ell: int
    m: str
    weights: np.ndarray
    shift: float
    index: int = 0
    adiabatic: tuple | None = None
    degenerate: bool = False


def trap_spec(intensity: float, coupling: CouplingMatrix, beta: float, c6: float = 1.0) -> PotentialSpec:
    TrapSpec(beta)
    return PotentialSpec(float(intensity), coupling, trap_beta=float(beta), c6=c6)


def trap_determinant(spec: PotentialSpec, model: NodalLineModel, e_omega: float,
                     grid: RadialGrid | None = None, backend: str | None = None):
    """Nodal determinant of the Gaussian-start solutions at ``e_omega``.

    The columns all start with the same amplitude at ``x_max``, so their
    determinant on the nodal lines is an analytic function of the energy.
    It can span hundreds of decades and is returned as
    ``(sign, log|det|)``.
    """
    sol, nodes = _trap_solutions(spec, model, e_omega, grid, backend)
    return _log_det(sol, nodes)


def _trap_solutions(spec, model, e_omega, grid, backend=None):
    grid = grid or DEFAULT_GRID
    beta = spec.trap_beta
    energy = 2.0 * beta * beta * e_omega
    s = spec.with_energy(energy)
    sol = propagate(s, grid, "inward-gaussian", model, backend=backend)
    return sol, model.nodes(energy, s.coupling.ell_list, s.intensity)


def _log_det(sol, nodes):
    # original columns = final-segment columns times R_{K-1} ... R_0
    sign, logabs = np.linalg.slogdet(_nodal_matrix(sol, nodes))
    if sol.rs.shape[0]:
        logabs += float(np.sum(np.log(np.abs(np.diagonal(sol.rs, axis1=1, axis2=2)))))
    return float(sign), float(logabs)


def _level_weights(sol, nodes, count=1):
    """Channel weights of the ``count`` null vectors of the nodal matrix."""
    mat = _nodal_matrix(sol, nodes)
    _, _, vt = np.linalg.svd(mat)
    x = sol.mesh.x
    order = np.argsort(x)
    # the wave function is only physical outside the node
    sel = order[x[order] >= np.min(nodes)]
    out = []
    for k in range(1, count + 1):
        u, _ = sol.combine(vt[-k])
        w = _trapezoid(u[sel] ** 2, x[sel], axis=0)
        out.append(w / w.sum())
    return out


def _cluster_weights(spec, model, grid, backend, centre, count, de=_PROBE_D1):
    """Channel weights of ``count`` levels too close for the determinant samples.

    Near the cluster the nodal matrix of the original columns is linear in
    the energy, ``M(centre + d) = M0 + d M1``; the generalised eigenvectors
    of ``(M0, -M1)`` with the ``count`` smallest offsets ``d`` are the null
    vectors of the individual levels, ordered by energy.  A sweep without
    re-orthonormalisation keeps the columns comparable between energies.
    """
    flat = replace(grid, qr_every=0)
    mats = []
    for e in (centre - de, centre, centre + de):
        sol, nodes = _trap_solutions(spec, model, e, flat, backend)
        mats.append(_nodal_matrix(sol, nodes))
    sol, nodes = _trap_solutions(spec, model, centre, flat, backend)
    m1 = (mats[2] - mats[0]) / (2.0 * de)
    d, vecs = linalg.eig(mats[1], -m1)
    d = np.where(np.isfinite(d), d, np.inf)
    pick = np.argsort(np.abs(d))[:count]
    pick = pick[np.argsort(d[pick].real)]
    x = sol.mesh.x
    sel = x >= np.min(nodes)
    order = np.argsort(x[sel])
    out = []
    for k in pick:
        u, _ = sol.combine(np.real_if_close(vecs[:, k]).real)
        w = _trapezoid(u[sel][order] ** 2, x[sel][order], axis=0)
        out.append(w / w.sum())
    return out


def _unperturbed_ladder(ells, count):
    return sorted((unperturbed_e(N, l), N, l) for l in ells for N in range(count))


def _clusters(roots, gap):
    """Group sorted roots closer than ``gap``; the probe cannot separate them."""
    out = []
    for r in roots:
        if out and r - out[-1][-1] < gap:
            out[-1].append(r)
        else:
            out.append([r])
    return out


class _DetProbe:
    """``(sign, log|det|)`` of the trap determinant along the energy axis."""

    def __init__(self, spec, model, grid, backend):
        self.args = (spec, model, grid, backend)
        self.ref = 0.0

    def __call__(self, e):
        return trap_determinant(self.args[0], self.args[1], e, self.args[2], self.args[3])

    def signed(self, e):
        sgn, lg = self(e)
        return sgn * math.exp(min(max(lg - self.ref, -700.0), 700.0))

    def log(self, e):
        return self(e)[1]

    def multiplicity(self, e0, d1=_PROBE_D1, d2=_PROBE_D2):
        """Order of the zero at ``e0`` from the log-log slope of ``|det|``."""
        slopes = []
        for sgn in (-1.0, 1.0):
            l1 = self.log(e0 + sgn * d1)
            l2 = self.log(e0 + sgn * d2)
            slopes.append((l2 - l1) / math.log(d2 / d1))
        return max(1, int(round(0.5 * (slopes[0] + slopes[1]))))


def _hidden_roots(probe, a, b, level, xtol, dip, fine: int = 40):
    """Roots inside ``[a, b]`` where the coarse samples show no sign change.

    A close pair of levels leaves only a dip in ``log|det|``.  The interval
    is resampled ``fine`` times; remaining dips without a sign change are
    even-order roots, accepted when they sink ``dip`` below ``level`` (the
    smaller ``log|det|`` at the interval ends).
    """
    es = np.linspace(a, b, fine + 1)
    vals = [probe(e) for e in es]
    sg = np.array([v[0] for v in vals])
    found = [optimize.brentq(probe.signed, es[k], es[k + 1], xtol=xtol)
             for k in np.nonzero(sg[:-1] != sg[1:])[0]]
    if found:
        return found
    res = optimize.minimize_scalar(probe.log, bounds=(a, b), method="bounded",
                                   options={"xatol": xtol})
    if res.fun < level - dip:
        return [float(res.x)]
    return []


def trap_levels(spec: PotentialSpec, model: NodalLineModel, window=(0.0, 8.0),
                grid: RadialGrid | None = None, step: float = 0.01, xtol: float = 1e-9,
                backend: str | None = None, dip: float = 8.0) -> list:
    """Bound levels with ``e_omega`` inside ``window``.

    The determinant is sampled on a uniform ``e_omega`` grid of spacing
    ``step``; every sign change is refined by Brent's method (bisection
    safeguarded secant) to ``xtol``.  Local minima of ``log|det|`` without
    a sign change are resampled finely to split close pairs; dips that
    still show no sign change and sink more than ``dip`` below the samples
    are even-order roots, refined by minimisation.  Roots closer than the
    probe offset form one cluster; a cluster of order ``k > 1`` (exact or
    unresolved degeneracy) yields ``k`` levels with ``degenerate=True``.

    Parameters
    ----------
    spec : PotentialSpec
        ``trap_beta`` must be positive; ``energy`` is ignored.
    model : NodalLineModel
    window : (float, float)
        Search range in oscillator units.
    """
    beta = spec.trap_beta
    TrapSpec(beta)
    grid = grid or DEFAULT_GRID
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ValueError("empty energy window")
    nstep = max(2, int(math.ceil((hi - lo) / step)))
    es = np.linspace(lo, hi, nstep + 1)
    probe = _DetProbe(spec, model, grid, backend)
    samples = [probe(e) for e in es]
    sg = np.array([s for s, _ in samples])
    lg = np.array([l for _, l in samples])
    probe.ref = float(np.median(lg))
    roots = []
    for k in np.nonzero(sg[:-1] != sg[1:])[0]:
        roots.append(optimize.brentq(probe.signed, es[k], es[k + 1], xtol=xtol))
    for k in range(1, len(es) - 1):
        if lg[k] < lg[k - 1] and lg[k] < lg[k + 1] and sg[k - 1] == sg[k] == sg[k + 1]:
            roots.extend(_hidden_roots(probe, es[k - 1], es[k + 1], min(lg[k - 1], lg[k + 1]),
                                       xtol, dip))
    roots.sort()
    ells = spec.coupling.ell_list
    ladder = _unperturbed_ladder(ells, int(hi // 2) + 2)
    first = ladder[0][0]
    levels = []
    for cluster in _clusters(roots, 2.0 * _PROBE_D1):
        centre = float(np.mean(cluster))
        mult = max(len(cluster), probe.multiplicity(centre))
        energies = list(cluster) + [centre] * (mult - len(cluster))
        if mult == 1:
            sol, nodes = _trap_solutions(spec, model, centre, grid, backend)
            weights = _level_weights(sol, nodes)
        else:
            weights = _cluster_weights(spec, model, grid, backend, centre, mult)
        for e, wts in zip(energies, weights):
            rank = len(levels)
            energy = 2.0 * beta * beta * e
            ell = int(ells[int(np.argmax(wts))])
            N = max(0, int(round((e - ell - 1.5) / 2.0)))
            adiabatic = None
            if lo <= first and rank < len(ladder):
                adiabatic = (ladder[rank][1], ladder[rank][2])
            levels.append(TrapLevel(energy, e, N, ell, spec.coupling.label, wts,
                                    energy - unperturbed_energy(N, ell, beta), rank, adiabatic,
                                    mult > 1))
    return levels


@dataclass
class SweepPoint:
    intensity: float
    levels: list


def trap_sweep(coupling: CouplingMatrix, intensities, beta: float, model: NodalLineModel,
               window=(0.0, 8.0), grid: RadialGrid | None = None, mapper=map) -> list:
    """Trap levels along an intensity sweep."""
    task = _SweepTask(coupling, beta, model, tuple(window), grid or DEFAULT_GRID)
    return list(mapper(task, [float(i) for i in intensities]))


class _SweepTask:
    def __init__(self, coupling, beta, model, window, grid):
        self.coupling, self.beta, self.model = coupling, beta, model
        self.window, self.grid = window, grid

    def __call__(self, inten):
        spec = trap_spec(inten, self.coupling, self.beta)
        return SweepPoint(inten, trap_levels(spec, self.model, self.window, self.grid))


@dataclass
class AvoidedCrossing:
    """Local minimum of the gap between adjacent levels of one ladder.

    ``labels`` holds the diabatic ``N`` of the lower and upper level at the
    sampled minimum.
    """

    intensity: float
    gap: float
    lower: int
    labels: tuple


def avoided_crossings(sweep: list, ell: int | None = 1, max_gap: float = 1.0) -> list:
    """Locate anticrossings along an intensity sweep.

    Only levels whose dominant channel is ``ell`` are compared (all levels
    with ``ell=None``), so weakly coupled levels of other partial waves
    lying in between do not break the ladder.  The sweep is cut into runs
    with a constant number of such levels; inside a run a crossing is
    reported where the gap between neighbours ``k`` and ``k+1`` (oscillator
    units) has an interior local minimum below ``max_gap``.
    """
    ladders = []
    for p in sweep:
        lev = [l for l in p.levels if ell is None or l.ell == ell]
        ladders.append(sorted(lev, key=lambda l: l.e_omega))
    counts = [len(l) for l in ladders]
    out = []
    start = 0
    while start < len(sweep):
        stop = start
        while stop + 1 < len(sweep) and counts[stop + 1] == counts[start]:
            stop += 1
        run = range(start, stop + 1)
        for k in range(counts[start] - 1):
            gap = np.array([ladders[j][k + 1].e_omega - ladders[j][k].e_omega for j in run])
            for i in range(1, len(gap) - 1):
                if gap[i] < gap[i - 1] and gap[i] <= gap[i + 1] and gap[i] < max_gap:
                    j = start + i
                    out.append(AvoidedCrossing(float(sweep[j].intensity), float(gap[i]), k,
                                               (ladders[j][k].N, ladders[j][k + 1].N)))
        start = stop + 1
    out.sort(key=lambda c: c.intensity)
    return out


@dataclass
class BoundLevel:
    """Free-space bound state below threshold."""

    energy: float
    weights: np.ndarray
    intensity: float


def bound_determinant(spec: PotentialSpec, model: NodalLineModel, energy: float,
                      grid: RadialGrid | None = None, backend: str | None = None):
    """``(sign, log|det|)`` of the nodal matrix of exponentially decaying starts."""
    grid = grid or DEFAULT_GRID
    s = spec.with_energy(energy)
    sol = propagate(s, grid, "inward-decaying", model, backend=backend)
    nodes = model.nodes(energy, s.coupling.ell_list, s.intensity)
    return _log_det(sol, nodes)


def last_bound_state(spec: PotentialSpec, model: NodalLineModel, window=(-0.05, -1e-6),
                     grid: RadialGrid | None = None, samples: int = 60,
                     xtol: float = 1e-12) -> BoundLevel:
    """Least-bound level with energy inside ``window`` (both ends negative).

    The determinant is sampled on a logarithmic grid in binding energy and
    the sign change closest to threshold is refined.
    """
    if spec.trap_beta != 0:
        raise ValueError("free-space bound states need trap_beta = 0")
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi < 0:
        raise ValueError("window must satisfy lo < hi < 0")
    grid = grid or DEFAULT_GRID
    es = -np.geomspace(-hi, -lo, samples)
    samples_ = [bound_determinant(spec, model, e, grid) for e in es]
    sg = np.array([v[0] for v in samples_])
    ref = float(np.median([v[1] for v in samples_]))

    def f(e):
        sgn, lg = bound_determinant(spec, model, e, grid)
        return sgn * math.exp(min(max(lg - ref, -700.0), 700.0))

    change = np.nonzero(sg[:-1] != sg[1:])[0]
    if change.size == 0:
        raise ValueError(f"no bound state between {lo} and {hi}")
    k = change[0]
    e0 = optimize.brentq(f, es[k + 1], es[k], xtol=xtol, rtol=1e-12)
    s = spec.with_energy(e0)
    sol = propagate(s, grid, "inward-decaying", model)
    nodes = model.nodes(e0, s.coupling.ell_list, s.intensity)
    (w,) = _level_weights(sol, nodes)
    return BoundLevel(float(e0), w, spec.intensity)


# --------------------------------------------------------------------------
# affine shift law


@dataclass
class ShiftLawFit:
    """Least-squares fit ``dE = A + B M`` over an ``x00`` scan."""

    A: float
    B: float
    residual: float
    level: tuple
    used: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


def fit_shift_law(shifts, volumes, level=(0, 1, "m=0"), beta: float | None = None,
                  max_fraction: float = 0.1, max_volume: float | None = None,
                  min_points: int = 4) -> ShiftLawFit:
    """Fit level shifts against generalised scattering volumes.

    Samples near poles are excluded: with ``beta`` given only shifts below
    ``max_fraction * 4 beta^2`` (a fraction of the level spacing) are kept,
    and ``max_volume`` optionally caps ``|M|``.  ``residual`` is the rms
    misfit relative to the spread of the retained shifts.
    """
    shifts = np.asarray(shifts, dtype=float)
    volumes = np.asarray(volumes, dtype=float)
    if shifts.shape != volumes.shape:
        raise ValueError("shifts and volumes must share the x00 grid")
    use = np.isfinite(shifts) & np.isfinite(volumes)
    if beta is not None:
        use &= np.abs(shifts) < max_fraction * 4.0 * beta * beta
    if max_volume is not None:
        use &= np.abs(volumes) <= max_volume
    if use.sum() < min_points:
        raise ValueError(f"only {int(use.sum())} off-pole samples; need {min_points}")
    design = np.vstack([np.ones(use.sum()), volumes[use]]).T
    coef, *_ = np.linalg.lstsq(design, shifts[use], rcond=None)
    resid = shifts[use] - design @ coef
    spread = np.ptp(shifts[use])
    rel = float(np.sqrt(np.mean(resid ** 2)) / spread) if spread > 0 else 0.0
    return ShiftLawFit(float(coef[0]), float(coef[1]), rel, tuple(level), use)


@dataclass
class ShiftPoint:
    """Trapped-level shift and free-space volume at one nodal parameter."""

    x00: float
    volume: float
    shift: float
    e_omega: float


def shift_law_scan(coupling: CouplingMatrix, intensity: float, beta: float, x00_values,
                   N: int = 0, half_window: float = 0.45, grid: RadialGrid | None = None,
                   mapper=map) -> list:
    """Shift of the ``(N, l~=1)`` level and ``M`` over a scan of ``x00``.

    The level is searched within ``half_window`` (oscillator units) of its
    unperturbed position; when that window holds no ``l~=1`` level with the
    requested ``N``, or more than one, the shift is NaN.
    """
    task = _ShiftTask(coupling, float(intensity), float(beta), int(N), float(half_window),
                      grid or DEFAULT_GRID)
    rows = list(mapper(task, [float(x) for x in x00_values]))
    return sorted(rows, key=lambda r: r.x00)


class _ShiftTask:
    def __init__(self, coupling, intensity, beta, N, half_window, grid):
        self.coupling, self.intensity, self.beta = coupling, intensity, beta
        self.N, self.half_window, self.grid = N, half_window, grid

    def __call__(self, x00):
        model = NodalLineModel(x00)
        e0 = unperturbed_e(self.N, 1)
        spec = trap_spec(self.intensity, self.coupling, self.beta)
        window = (e0 - self.half_window, e0 + self.half_window)
        found = [lv for lv in trap_levels(spec, model, window, self.grid)
                 if lv.ell == 1 and lv.N == self.N]
        volume = volume_point(ScanSetup(self.coupling, self.intensity, model, self.grid),
                              "x00", x00).m_value
        if len(found) != 1:
            return ShiftPoint(x00, volume, math.nan, math.nan)
        return ShiftPoint(x00, volume, found[0].shift, found[0].e_omega)


def c3_for(intensity: float, m: int) -> float:
    """Coefficient of the p-wave ``-c3/x^3`` tail: ``4I/15`` (m=0) or ``-2I/15`` (|m|=1)."""
    if m == 0:
        return 4.0 * intensity / 15.0
    if abs(m) == 1:
        return -2.0 * intensity / 15.0
    raise ValueError("p waves only carry m = 0 or |m| = 1")


def analytic_AB(N: int, beta: float, c3: float):
    """Closed-form ``(A, B)`` of the shift law for the p-wave level ``N``.

    Examples
    --------
    >>> A, B = analytic_AB(0, 0.05, 1.6)
    >>> round(A * 1e4, 4), round(B * 1e6, 3)
    (-1.5045, 1.41)
    """
    if N not in _A_COEF:
        raise ValueError(f"N={N} is outside the tabulated range 0..2")
    return (_A_COEF[N] * c3 * beta ** 3 / SQRT_PI, _B_COEF[N] * beta ** 5 / SQRT_PI)


def perturbative_shift(beta: float, c3: float, volume: float = 0.0, x_lo: float = 0.0) -> float:
    """Lowest-level shift from the trap energy of a threshold-like trial function.

    The trial function is ``(x^2 + c3 x / 2 - M / x) exp(-beta^2 x^2 / 2)``;
    the virial theorem doubles its mean trap energy into the level energy.
    ``x_lo`` must be positive when ``volume`` is non-zero.
    """
    if volume != 0 and not x_lo > 0:
        raise ValueError("a 1/x term needs a positive lower limit")
    a = 0.5 * c3
    b2 = beta * beta

    def f2(x):
        return ((x * x + a * x - volume / x) * math.exp(-0.5 * b2 * x * x)) ** 2

    scale = 1.0 / beta
    pts = [scale, 3 * scale]
    num, _ = integrate.quad(lambda x: b2 * b2 * x * x * f2(x), x_lo, 12 * scale, points=pts,
                            limit=400, epsabs=0, epsrel=1e-12)
    den, _ = integrate.quad(f2, x_lo, 12 * scale, points=pts, limit=400, epsabs=0, epsrel=1e-12)
    if not (np.isfinite(num) and np.isfinite(den) and den > 0):
        raise ArithmeticError("quadrature did not converge")
    return 2.0 * num / den - 5.0 * b2


def perturbative_A_quadrature(beta: float, c3: float, N: int = 0) -> float:
    """``A`` of the lowest level by quadrature of the trial-function energy."""
    if N != 0:
        raise ValueError("the trial function only describes the lowest level")
    return perturbative_shift(beta, c3)


# --------------------------------------------------------------------------
# pseudopotential levels


def busch_f1(e):
    """Right-hand side ``f_1(e)`` of the p-wave pseudopotential relation.

    ``S_1 / a_omega^3 = f_1(e)`` with
    ``f_1(e) = -(3/8) Gamma(-1/4 - e/2) / Gamma(5/4 - e/2)``; it vanishes
    at the interaction-free levels ``e = 2N + 5/2`` and diverges at
    ``e = 2k - 1/2``.  Complex ``e`` is accepted.
    """
    e = np.asarray(e)
    return -0.375 * special.gamma(-0.25 - 0.5 * e) * special.rgamma(1.25 - 0.5 * e)


def busch_f1_derivative_at_level(N: int) -> float:
    """``d f_1 / de`` at ``e = 2N + 5/2``.

    There ``1/Gamma(5/4 - e/2)`` has a simple zero with derivative
    ``-(1/2)(-1)^N N!``, so the derivative is
    ``(3/16) (-1)^N N! Gamma(-N - 3/2)``.
    """
    if N < 0 or int(N) != N:
        raise ValueError("N must be a non-negative integer")
    N = int(N)
    return 0.1875 * (-1) ** N * math.factorial(N) * float(special.gamma(-N - 1.5))


def B_from_derivative(N: int, beta: float) -> float:
    """Slope ``B = 2 beta^5 de/df_1`` of the level shift against the volume."""
    return 2.0 * beta ** 5 / busch_f1_derivative_at_level(N)


def busch_spectrum(s1, beta: float, window=(0.0, 10.0), xtol: float = 1e-12) -> np.ndarray:
    """Levels ``e`` solving ``S_1(E) beta^3 = f_1(e)`` inside ``window``.

    Parameters
    ----------
    s1 : float or callable
        p-wave scattering volume, or a function of the energy ``E`` in van
        der Waals units.
    beta : float
    window : (float, float)
        Range of ``e`` in oscillator units.

    Returns
    -------
    ndarray
        One root per branch of ``f_1`` between its poles.
    """
    s1f = s1 if callable(s1) else (lambda _e, v=float(s1): v)
    g = lambda e: float(s1f(2.0 * beta * beta * e)) * beta ** 3 - float(busch_f1(e))
    lo, hi = float(window[0]), float(window[1])
    poles = [2.0 * k - 0.5 for k in range(int(math.floor((lo + 0.5) / 2.0)),
                                           int(math.ceil((hi + 0.5) / 2.0)) + 1)]
    edges = sorted(set([lo, hi] + [p for p in poles if lo < p < hi]))
    roots = []
    eps = 1e-9
    for a, b in zip(edges[:-1], edges[1:]):
        a2 = a + eps if a in poles else a
        b2 = b - eps if b in poles else b
        ga, gb = g(a2), g(b2)
        if ga == 0:
            roots.append(a2)
        elif np.sign(ga) != np.sign(gb):
            roots.append(optimize.brentq(g, a2, b2, xtol=xtol))
    if not roots:
        raise ValueError(f"no pseudopotential level in {window}")
    return np.array(roots)
