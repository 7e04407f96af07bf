"""Acceptance criteria 1-9.

Every check is recorded in the shared report and printed at the end of the
run as one pass/fail line per criterion (``pytest -v`` or plain
``pytest``).  Tolerances are the published ones; criteria that the model
cannot meet fail here and are analysed in the design notes.
"""
from __future__ import annotations

from dataclasses import replace
import io
import math
import time

import numpy as np
import pytest

from acceptance_report import REPORT
from dipscat.angular import (
    ChannelSet,
    CouplingMatrix,
    alpha_ql,
    alpha_weighted_matrix,
    coupling_matrix,
    p2_element,
)
from dipscat.cli import run as cli_run
from dipscat.orient import (
    eta_profile,
    multichannel_distribution,
    p_wave_pair,
    short_range_eta_scan,
)
from dipscat.radial import NodalLineModel, PotentialSpec, RadialGrid, propagate
from dipscat.scatter import (
    DEFAULT_GRID,
    S_WAVE_GRID,
    ScanSetup,
    bound_state_weights,
    determinant_at,
    determinant_roots,
    find_pole,
    s_wave_scattering_length,
    setup_for_m,
    threshold_solution,
    vdw_s_wave_length,
    volume_point,
    x00_for_scattering_length,
)
from dipscat.trap import (
    B_from_derivative,
    analytic_AB,
    avoided_crossings,
    busch_spectrum,
    c3_for,
    fit_shift_law,
    perturbative_A_quadrature,
    shift_law_scan,
    trap_levels,
    trap_spec,
    trap_sweep,
    unperturbed_e,
)
from dipscat.units import (
    catalog_keys,
    c6bar_from_intensity,
    compute_dd_units,
    compute_vdw_units,
    equivalent_dipole,
    intensity_to_dipole_length,
    load_species,
    SpeciesParams,
    table_row,
)

X00 = 0.1492
BETA = 0.05
POLE_TOL = 0.15
# largest change of each observable under grid halving that the package promises
ADVERTISED = {
    "a": 1e-8,  # s-wave scattering length, relative to max(1, |a|)
    "M": 1e-5,  # generalised scattering volume, relative to max(1, |M|)
    "pole_I": 1e-6,  # pole intensity, relative
    "pole_x00": 1e-8,  # pole nodal parameter, absolute
    "e_omega": 1e-8,  # trap level, oscillator units
    "eta": 1e-6,  # orientation angle, radians
}


def rel(a, b):
    return abs(a / b - 1.0)


def angle_mod_pi(a, target):
    """Distance between two axis directions (angles modulo pi)."""
    d = (a - target + 0.5 * math.pi) % math.pi - 0.5 * math.pi
    return abs(d)


def finish(criterion):
    checks = REPORT.entries.get(criterion, [])
    bad = [f"{c.label}: {c.detail}" for c in checks if not c.ok]
    assert not bad, "; ".join(bad)


# --------------------------------------------------------------------------
# 1. unit catalog


def test_criterion_1_table_I():
    t0 = time.perf_counter()
    cols = ("sigma", "epsilon", "beta", "m1", "d1")
    for key in catalog_keys("I"):
        sp = load_species(key)
        row = table_row(sp)
        errs = {c: rel(row[c], sp.reference[c]) for c in cols if c in sp.reference}
        worst = max(errs, key=errs.get)
        REPORT.record(1, f"Table I {key}", errs[worst] <= 2e-3,
                      f"worst {worst} off by {100 * errs[worst]:.3f}% "
                      f"({row[worst]:.6g} vs {sp.reference[worst]:.6g})")
    REPORT.record(1, "Table I runtime", time.perf_counter() - t0 < 1.0,
                  f"{time.perf_counter() - t0:.3f} s")
    finish_table(1, "Table I")


def test_criterion_1_table_II():
    t0 = time.perf_counter()
    cols = ("d_length", "e_energy", "c6bar", "i_critical")
    for key in catalog_keys("II"):
        sp = load_species(key)
        row = table_row(sp)
        errs = {c: rel(row[c], sp.reference[c]) for c in cols if c in sp.reference}
        worst = max(errs, key=errs.get)
        REPORT.record(1, f"Table II {key}", errs[worst] <= 5e-3,
                      f"worst {worst} off by {100 * errs[worst]:.3f}% "
                      f"({row[worst]:.6g} vs {sp.reference[worst]:.6g})")
    REPORT.record(1, "Table II runtime", time.perf_counter() - t0 < 1.0,
                  f"{time.perf_counter() - t0:.3f} s")
    finish_table(1, "Table II")


def finish_table(criterion, prefix):
    bad = [f"{c.label}: {c.detail}" for c in REPORT.entries[criterion]
           if c.label.startswith(prefix) and not c.ok]
    assert not bad, "; ".join(bad)


# --------------------------------------------------------------------------
# 2. exact identities


def test_criterion_2_identities():
    sigma = 151.053
    d, _ = intensity_to_dipole_length(6.0, sigma)
    REPORT.record(2, "I=6 gives D=sigma", d == sigma, f"D={d!r}")
    REPORT.record(2, "I=6 gives c6bar=1", c6bar_from_intensity(6.0) == 1.0,
                  f"c6bar={c6bar_from_intensity(6.0)!r}")
    # the same identity through the physical units of a real pair
    base = load_species("Sr88_2")
    dm, _ = equivalent_dipole(base, 6.0)
    sp = SpeciesParams("x", base.reduced_mass, base.c6, base.alpha1, base.alpha2,
                       electric_dipole1=dm, electric_dipole2=dm)
    dd = compute_dd_units(sp)
    vdw = compute_vdw_units(sp)
    REPORT.record(2, "Sr88 at I=6: D=sigma", rel(dd.d_length, vdw.sigma) < 1e-14,
                  f"relative {rel(dd.d_length, vdw.sigma):.1e}")
    REPORT.record(2, "Sr88 at I=6: c6bar=1", abs(dd.c6bar - 1.0) < 1e-13,
                  f"c6bar-1 = {dd.c6bar - 1.0:.1e}")
    REPORT.record(2, "q11(m=0) = 4/15", p2_element(1, 1, 0) == 4.0 / 15.0,
                  repr(p2_element(1, 1, 0)))
    REPORT.record(2, "q11(|m|=1) = -2/15", p2_element(1, 1, 1) == -2.0 / 15.0,
                  repr(p2_element(1, 1, 1)))
    q = alpha_weighted_matrix(alpha_ql(), ChannelSet.odd(0, 3), ChannelSet.odd(1, 3),
                              weights=(1 / 3, 2 / 3))
    REPORT.record(2, "alpha_QL cancels the p-wave 1/x^3 term", q.values[0, 0] == 0.0,
                  repr(q.values[0, 0]))
    finish(2)


# --------------------------------------------------------------------------
# 3. s-wave anchors


def test_criterion_3_s_wave():
    t0 = time.perf_counter()
    anchors = [(0.149481, 0.0, 0.02), (0.1492, 0.891, 0.01), (0.142906, -1.31436, 0.01),
               (0.147, 0.494623, 0.005)]
    for x00, target, tol in anchors:
        a = s_wave_scattering_length(x00)
        REPORT.record(3, f"a({x00})", abs(a - target) <= tol,
                      f"{a:.6f} vs {target} +- {tol}")
    worst = 0.0
    for x00 in np.linspace(0.1432, 0.1524, 12):
        exact = vdw_s_wave_length(x00)
        worst = max(worst, abs(s_wave_scattering_length(x00) - exact) / max(1.0, abs(exact)))
    REPORT.record(3, "Bessel oracle", worst <= 1e-8, f"worst deviation {worst:.1e}")
    xs = np.linspace(0.1429, 0.1526, 2001)
    a = np.array([vdw_s_wave_length(x) for x in xs])
    poles = int(np.sum((a[:-1] > 0) & (a[1:] < 0)))
    REPORT.record(3, "a(x00) spans -inf..+inf once per quasi-period",
                  poles == 1 and int(np.sum(np.diff(a) < 0)) == 1, f"{poles} pole(s)")
    REPORT.record(3, "runtime", time.perf_counter() - t0 < 10.0,
                  f"{time.perf_counter() - t0:.2f} s")
    finish(3)


# --------------------------------------------------------------------------
# 4. poles


def test_criterion_4_poles():
    t0 = time.perf_counter()
    setup = setup_for_m(1, 3, intensity=0.0, model=NodalLineModel(X00))
    roots = determinant_roots(setup, "intensity", np.linspace(0.5, 12.0, 116))
    p_wave = []
    for r in roots:
        spec, model = setup.at("intensity", r)
        w = bound_state_weights(spec, model, setup.grid)
        if setup.coupling.ell_list[int(np.argmax(w))] == 1:
            p_wave.append(r)
    REPORT.record(4, "two l~=1 roots for |m|=1, n=3, I in [0.5, 12]", len(p_wave) == 2,
                  f"roots {', '.join(f'{r:.4f}' for r in p_wave)}")
    for target in (1.36, 9.01):
        near = min(p_wave, key=lambda r: abs(r - target)) if p_wave else math.nan
        REPORT.record(4, f"pole near I={target}", rel(near, target) <= POLE_TOL,
                      f"{near:.4f} ({100 * (near / target - 1):+.1f}%)")

    x00 = x00_for_scattering_length(1.16)
    c0, c1 = ChannelSet.odd(0, 3), ChannelSet.odd(1, 3)
    widths = {}
    for name, alpha, target, bracket in (("0", 0.0, 1.35, (0.8, 2.0)),
                                         ("pi/2", math.pi / 2, 12.45, (10.0, 14.0)),
                                         ("pi/4", math.pi / 4, 3.64, (2.5, 4.5))):
        fixed = ScanSetup(alpha_weighted_matrix(alpha, c0, c1), 0.0, NodalLineModel(x00))
        pole = find_pole(fixed, "intensity", bracket)
        widths[name] = abs(pole.width)
        REPORT.record(4, f"fixed orientation alpha={name}",
                      rel(pole.location, target) <= POLE_TOL,
                      f"I={pole.location:.4f} vs {target} ({100 * (pole.location / target - 1):+.1f}%),"
                      f" width {widths[name]:.3f}")
    order = widths["pi/4"] > widths["0"] > widths["pi/2"]
    REPORT.record(4, "width ordering w(pi/4) > w(0) > w(pi/2)", order,
                  ", ".join(f"{k}: {v:.3f}" for k, v in widths.items()))
    REPORT.record(4, "runtime", time.perf_counter() - t0 < 300.0,
                  f"{time.perf_counter() - t0:.1f} s")
    finish(4)


# --------------------------------------------------------------------------
# 5. determinant zeros and volume divergences


def _divergence_intervals(values):
    v = np.asarray(values)
    jump = np.abs(np.diff(v))
    big = jump > 20.0 * np.median(np.abs(v))
    return set(np.nonzero((np.sign(v[:-1]) != np.sign(v[1:])) & big)[0].tolist())


def _zero_intervals(values):
    d = np.asarray(values)
    return set(np.nonzero(np.sign(d[:-1]) != np.sign(d[1:]))[0].tolist())


@pytest.mark.parametrize("name, setup, axis, lo, hi", [
    ("|m|=1 n=3 over I", setup_for_m(1, 3, model=NodalLineModel(X00)), "intensity", 7.5, 9.5),
    ("|m|=1 n=1 over x00 at I=6", setup_for_m(1, 1, intensity=6.0), "x00", 0.1460, 0.1500),
    ("alpha=pi/4 over I", ScanSetup(alpha_weighted_matrix(math.pi / 4, ChannelSet.odd(0, 3),
                                                          ChannelSet.odd(1, 3)),
                                    0.0, NodalLineModel(x00_for_scattering_length(1.16))),
     "intensity", 2.0, 5.0),
])
def test_criterion_5_pole_determinant_equivalence(name, setup, axis, lo, hi):
    values = np.linspace(lo, hi, 200)
    det = [determinant_at(setup, axis, v) for v in values]
    vol = [volume_point(setup, axis, v).m_value for v in values]
    zeros, divs = _zero_intervals(det), _divergence_intervals(vol)
    ok = bool(zeros) and zeros == divs
    REPORT.record(5, name, ok, f"determinant zeros in intervals {sorted(zeros)}, "
                               f"divergences in {sorted(divs)}")
    assert ok


# --------------------------------------------------------------------------
# 6. trap spectrum


def test_criterion_6_free_oscillator():
    free = CouplingMatrix((1, 3, 5), np.zeros((3, 3)), "free")
    spec = trap_spec(0.0, free, BETA, c6=0.0)
    grid = replace(DEFAULT_GRID, x_floor=0.005)
    levels = trap_levels(spec, NodalLineModel(0.02), window=(2.0, 9.0), grid=grid)
    dev = max(min(abs(l.e_omega - unperturbed_e(N, l.ell)) for N in range(4)) for l in levels)
    expected = sum(1 for l in (1, 3, 5) for N in range(4) if 2.0 < unperturbed_e(N, l) < 9.0)
    ok = dev <= 1e-6 and len(levels) == expected
    REPORT.record(6, "interaction-free levels 2N+l+3/2", ok,
                  f"{len(levels)} levels (expected {expected}), worst deviation {dev:.1e}")
    finish_subset(6, "interaction-free")


@pytest.mark.parametrize("m, caption", [(0, (-0.0001615, 1.355e-6)), (1, (0.0000725, 1.5e-6))])
def test_criterion_6_shift_law(m, caption):
    coupling = coupling_matrix(ChannelSet.odd(m, 3))
    pts = shift_law_scan(coupling, 6.0, BETA, np.linspace(0.1432, 0.1524, 24))
    fit = fit_shift_law([p.shift for p in pts], [p.volume for p in pts], beta=BETA)
    A_an, B_an = analytic_AB(0, BETA, c3_for(6.0, m))
    label = f"shift law m={m}"
    for what, got, ref, tol in (("A vs caption", fit.A, caption[0], 0.15),
                                ("B vs caption", fit.B, caption[1], 0.15),
                                ("A vs analytic", fit.A, A_an, 0.10),
                                ("B vs analytic", fit.B, B_an, 0.10)):
        REPORT.record(6, f"{label}: {what}", rel(got, ref) <= tol,
                      f"{got:.5g} vs {ref:.5g} ({100 * (got / ref - 1):+.1f}%, limit {100 * tol:.0f}%)")
    finish_subset(6, label)


def test_criterion_6_avoided_crossings():
    coupling = coupling_matrix(ChannelSet.odd(1, 3))
    sweep = trap_sweep(coupling, np.linspace(1.6, 1.75, 16), BETA, NodalLineModel(X00),
                       window=(0.0, 6.0))
    found = avoided_crossings(sweep)
    REPORT.record(6, "anticrossings near the first pole (|m|=1, n=3)", len(found) == 2,
                  ", ".join(f"I={c.intensity:.3f} gap {c.gap:.3f}" for c in found) or "none")
    finish_subset(6, "anticrossings")


def finish_subset(criterion, prefix):
    bad = [f"{c.label}: {c.detail}" for c in REPORT.entries[criterion]
           if c.label.startswith(prefix) and not c.ok]
    assert not bad, "; ".join(bad)


# --------------------------------------------------------------------------
# 7. pseudopotential gate


def test_criterion_7_busch():
    roots = busch_spectrum(0.0, BETA, window=(0.0, 9.0))
    dev = float(np.max(np.abs(roots - np.array([2.5, 4.5, 6.5, 8.5]))))
    REPORT.record(7, "busch roots at 2N+5/2", dev <= 1e-9, f"worst deviation {dev:.1e}")
    for N, coef in zip(range(3), (8.0, 20.0, 35.0)):
        b = B_from_derivative(N, BETA)
        ref = coef * BETA ** 5 / math.sqrt(math.pi)
        REPORT.record(7, f"B_from_derivative N={N}", rel(b, ref) <= 1e-10,
                      f"relative {rel(b, ref):.1e}")
    finish_subset(7, "B")
    finish_subset(7, "busch")


@pytest.mark.parametrize("m", [0, 1])
def test_criterion_7_perturbative_A(m):
    c3 = c3_for(6.0, m)
    a_q = perturbative_A_quadrature(BETA, c3)
    a_an, _ = analytic_AB(0, BETA, c3)
    label = f"perturbative A, beta=0.05, c3={c3:g} (I=6, m={m})"
    REPORT.record(7, label, rel(a_q, a_an) <= 1e-2,
                  f"{a_q:.5g} vs {a_an:.5g} ({100 * (a_q / a_an - 1):+.2f}%)")
    finish_subset(7, label)


# --------------------------------------------------------------------------
# 8. orientation

ALPHAS = [k * math.pi / 24 for k in range(1, 12)]


def test_criterion_8_eta_far():
    s0, s1 = p_wave_pair(6.0, NodalLineModel(X00))
    worst = 0.0
    for alpha in ALPHAS:
        prof = eta_profile(s0, s1, alpha)
        worst = max(worst, abs(prof.eta[int(np.argmax(prof.x))] - alpha))
    REPORT.record(8, "eta(x_max) = alpha", worst <= 1e-3, f"worst {worst:.1e} rad")
    finish_subset(8, "eta(x_max)")


@pytest.mark.parametrize("m, bracket, limit", [(0, (0.150, 0.154), 0.0),
                                               (1, (0.146, 0.150), math.pi / 2)])
def test_criterion_8_pole_locking(m, bracket, limit):
    pole = find_pole(setup_for_m(m, 1, intensity=6.0), "x00", bracket)
    rows = short_range_eta_scan([pole.location], ALPHAS, 6.0)
    etas = np.array([r.eta for r in rows])
    dist = np.array([angle_mod_pi(e, limit) for e in etas])
    spread = float(dist.max() - dist.min())
    label = f"pole locking m={m}"
    REPORT.record(8, label, spread <= 0.05 and dist.max() <= 0.05,
                  f"pole x00={pole.location:.6f}, spread {spread:.1e}, "
                  f"largest distance to {limit:.4f}: {dist.max():.1e} rad")
    finish_subset(8, label)


def test_criterion_8_short_range_value():
    (row,) = short_range_eta_scan([0.148], [math.pi / 4], 6.0)
    label = "eta(0.148 + dx), I=6, alpha=pi/4"
    REPORT.record(8, label, abs(row.eta - 0.33) <= 0.03,
                  f"{row.eta:.4f} rad at x={row.x_probe:.4f} vs 0.33 +- 0.03")
    finish_subset(8, label)


@pytest.mark.parametrize("m, bracket, target", [(0, (0.1420, 0.1435), 0.0),
                                                (1, (0.1485, 0.1495), -math.pi / 2)])
def test_criterion_8_multichannel_lock(m, bracket, target):
    pole = find_pole(setup_for_m(m, 3, intensity=6.0), "x00", bracket)
    dist = multichannel_distribution(-0.3 * math.pi, 6.0, pole.location, [2.5], ntheta=1441)
    peak = dist.peak_direction(0)
    label = f"multichannel lock m={m}"
    REPORT.record(8, label, angle_mod_pi(peak, target) <= 0.1,
                  f"pole x00={pole.location:.6f}, peak at x=2.5: {peak:.4f} rad "
                  f"vs {target:.4f} (mod pi)")
    finish_subset(8, label)


# --------------------------------------------------------------------------
# 9. numerical hygiene


def test_criterion_9_wronskian():
    spec = PotentialSpec(6.0, coupling_matrix(ChannelSet.odd(1, 3)))
    model = NodalLineModel(X00)
    sol = propagate(spec, replace(DEFAULT_GRID, qr_every=0), "inward-threshold", model)
    u, du = sol.column_values()
    x = sol.mesh.x
    w = np.sum(u[:, :, 3] * du[:, :, 2] - du[:, :, 3] * u[:, :, 2], axis=1)
    ref = abs(w[np.argmin(np.abs(x - 100.0))])
    drift = max(np.ptp(w[(x >= lo) & (x <= 10 * lo)]) / ref for lo in (X00, 1.0, 10.0, 100.0))
    REPORT.record(9, "Wronskian drift per decade", drift <= 1e-8, f"{drift:.1e}")
    finish_subset(9, "Wronskian")


def _observables(grid, s_grid):
    out = {}
    out["a"] = s_wave_scattering_length(0.147, s_grid)
    out["M"] = volume_point(setup_for_m(1, 3, intensity=6.0, grid=grid), "intensity", 6.0).m_value
    out["pole_I"] = find_pole(setup_for_m(1, 3, grid=grid), "intensity", (8.0, 10.0)).location
    out["pole_x00"] = find_pole(setup_for_m(1, 1, intensity=6.0, grid=grid), "x00",
                                (0.146, 0.150)).location
    spec = trap_spec(6.0, coupling_matrix(ChannelSet.odd(1, 3)), BETA)
    out["e_omega"] = trap_levels(spec, NodalLineModel(X00), (2.0, 3.0), grid)[0].e_omega
    s0, s1 = p_wave_pair(6.0, NodalLineModel(0.148), grid)
    out["eta"] = eta_profile(s0, s1, math.pi / 4).eta_short
    return out


def test_criterion_9_grid_halving():
    base = _observables(DEFAULT_GRID, S_WAVE_GRID)
    fine = _observables(DEFAULT_GRID.refined(), S_WAVE_GRID.refined())
    for key, tol in ADVERTISED.items():
        change = abs(fine[key] - base[key])
        if key in ("a", "M"):
            change /= max(1.0, abs(base[key]))
        elif key == "pole_I":
            change /= abs(base[key])
        REPORT.record(9, f"grid halving {key}", change <= tol,
                      f"change {change:.1e} (advertised {tol:.0e})")
    finish_subset(9, "grid halving")


def test_criterion_9_m_sign_identity():
    model = NodalLineModel(X00)
    plus = threshold_solution(PotentialSpec(6.0, coupling_matrix(ChannelSet.odd(1, 3))), model)
    minus = threshold_solution(PotentialSpec(6.0, coupling_matrix(ChannelSet.odd(-1, 3))), model)
    same = np.array_equal(plus.radial()[0], minus.radial()[0]) and plus.m_matched == minus.m_matched
    REPORT.record(9, "m=+-1 bit identity", same, "radial functions and M compared bitwise")
    finish_subset(9, "m=+-1")


def test_criterion_9_cli_jobs(tmp_path):
    outputs = []
    for jobs in (1, 3):
        path = tmp_path / f"scan{jobs}.csv"
        code = cli_run(["volume-scan", "--m", "1", "--range", "7.5:9.5:6", "--axis", "intensity",
                        "--jobs", str(jobs), "--output", str(path)], stdout=io.StringIO())
        assert code == 0
        outputs.append((path.read_bytes(), (tmp_path / f"scan{jobs}.csv.json").read_text()))
    same = outputs[0] == outputs[1]
    REPORT.record(9, "CLI output independent of --jobs", same, "CSV and sidecar compared bytewise")
    finish_subset(9, "CLI")
