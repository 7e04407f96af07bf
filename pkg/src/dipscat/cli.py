"""Command-line front end.

Every computation is a subcommand.  Parameters come from three layers,
later ones overriding earlier ones: built-in defaults, a JSON config file
(``--config``) and explicit flags.  ``--print-config`` dumps the effective
configuration and exits.

Results are written as CSV (header row, ``%.12g`` numbers) to ``--output``
or to stdout.  With ``--output`` a JSON sidecar ``<output>.json`` mirrors
the rows together with the package version, the configuration and its
hash.  Neither file depends on ``--jobs``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical
failure, 3 root bracket failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import multiprocessing
import sys
from contextlib import contextmanager

import numpy as np

from . import __version__
from . import orient, scatter, trap, units
from .angular import ChannelSet, alpha_weighted_matrix, coupling_matrix
from .radial import NodalLineModel, RadialGrid

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_BRACKET = 0, 1, 2, 3


class UsageError(Exception):
    """Invalid command line or configuration."""


# keys that never influence results and stay out of the config hash
_RUNTIME_KEYS = ("output", "jobs")

COMMON = {
    "output": None,
    "jobs": 1,
    "x_max": 200.0,
    "ppw": 240.0,
    "max_step": 2.0,
}

_NODAL = {"x00": 0.1492, "slope_E": 0.0, "slope_L": 0.0, "slope_I": 0.0}
_CHANNELS = {"m": None, "alpha": None, "channels": "1,3,5"}

DEFAULTS = {
    "units": {"species": "all", "table": None},
    "volume-scan": {**_CHANNELS, **_NODAL, "axis": "x00", "range": "0.143:0.152:10",
                    "intensity": 6.0},
    "singularity-map": {**_CHANNELS, **_NODAL, "intensities": "0.5:10:20",
                        "x00_range": "0.1430:0.1525:96", "widths": False},
    "pole": {**_CHANNELS, **_NODAL, "axis": "intensity", "bracket": "0.5:3",
             "intensity": 6.0},
    "trap-spectrum": {**_CHANNELS, **_NODAL, "beta": 0.05, "intensities": "1.6:1.75:16",
                      "window": "0:6", "crossings": True},
    "shift-law": {**_CHANNELS, **_NODAL, "beta": 0.05, "intensity": 6.0,
                  "range": "0.1432:0.1524:24", "level": 0, "half_window": 0.45,
                  "max_fraction": 0.1},
    "busch": {"beta": 0.05, "s1": "0", "window": "0:10"},
    "orient-eta": {**_NODAL, "x00": 0.148, "mode": "profile", "intensity": 6.0,
                   "alphas": "0.7853981633974483", "range": "0.143:0.153:41",
                   "delta_x": orient.DELTA_X},
    "orient-multi": {**_NODAL, "x00": 0.147, "mode": "norms", "intensity": 6.0,
                     "theta0": -0.3 * math.pi, "channels": "1,3,5",
                     "probe": "0.3,0.5,1,1.5,2,2.5,5,10,50,199", "ntheta": 721},
    "fixed-orientation": {**_NODAL, "x00": None, "alpha": 0.0, "channels": "1,3,5",
                          "scattering_length": None, "mode": "scan",
                          "range": "0.5:16:32", "bracket": "0.8:2"},
    "slope-ratio": {**_NODAL, "range": "0.143:0.153:21", "intensity": 6.0},
}

_HELP = {
    "units": "reduced units of the species catalog",
    "volume-scan": "generalised scattering volume along x00 or I",
    "singularity-map": "threshold bound-state branches in the (I, x00) plane",
    "pole": "locate one pole of the scattering volume",
    "trap-spectrum": "trapped levels along an intensity sweep",
    "shift-law": "fit of trap level shifts against the scattering volume",
    "busch": "pseudopotential p-wave trap spectrum",
    "orient-eta": "single-channel orientation angle eta",
    "orient-multi": "multichannel angular distributions",
    "fixed-orientation": "scattering volume for a fixed orientation alpha",
    "slope-ratio": "slopes of the m=0 and |m|=1 threshold functions at the node",
}


# --------------------------------------------------------------------------
# parsing helpers


def parse_values(text, name: str = "range") -> np.ndarray:
    """``"start:stop:num"`` (inclusive linspace) or a comma-separated list."""
    if isinstance(text, (int, float)):
        return np.array([float(text)])
    if isinstance(text, (list, tuple)):
        vals = np.array([float(v) for v in text])
    else:
        s = str(text).strip()
        try:
            if ":" in s:
                parts = s.split(":")
                if len(parts) != 3:
                    raise UsageError(f"{name}: expected start:stop:num, got {s!r}")
                lo, hi, num = float(parts[0]), float(parts[1]), int(parts[2])
                if num < 1 or hi < lo:
                    raise UsageError(f"{name}: empty range {s!r}")
                vals = np.linspace(lo, hi, num)
            else:
                vals = np.array([float(v) for v in s.split(",") if v.strip()])
        except ValueError as exc:
            raise UsageError(f"{name}: cannot parse {s!r} ({exc})") from None
    if vals.size == 0:
        raise UsageError(f"{name}: empty range")
    return vals


def parse_interval(text, name: str):
    parts = str(text).split(":")
    try:
        lo, hi = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"{name}: expected lo:hi, got {text!r}") from None
    if not hi > lo:
        raise UsageError(f"{name}: empty interval {text!r}")
    return lo, hi


def parse_ells(text) -> tuple:
    try:
        return tuple(int(v) for v in parse_values(text, "channels"))
    except (TypeError, ValueError):
        raise UsageError(f"channels: cannot parse {text!r}") from None


def _grid(cfg) -> RadialGrid:
    return RadialGrid(x_max=float(cfg["x_max"]), points_per_wavelength=float(cfg["ppw"]),
                      max_step=float(cfg["max_step"]))


def _model(cfg, x00=None) -> NodalLineModel:
    return NodalLineModel(float(cfg["x00"] if x00 is None else x00), float(cfg["slope_E"]),
                          float(cfg["slope_L"]), float(cfg["slope_I"]))


def _coupling(cfg):
    """Fixed-``m`` or fixed-orientation coupling; exactly one must be chosen."""
    m, alpha = cfg.get("m"), cfg.get("alpha")
    if m is not None and alpha is not None:
        raise UsageError("give either m or alpha, not both")
    ells = parse_ells(cfg["channels"])
    try:
        if alpha is not None:
            return alpha_weighted_matrix(float(alpha), ChannelSet(0, ells), ChannelSet(1, ells))
        return coupling_matrix(ChannelSet(int(1 if m is None else m), ells))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


@contextmanager
def _mapper(jobs: int):
    if jobs <= 1:
        yield map
        return
    with multiprocessing.Pool(jobs) as pool:
        yield lambda f, xs: pool.map(f, list(xs), chunksize=1)


# --------------------------------------------------------------------------
# subcommands; each returns (columns, rows, summary)


def cmd_units(cfg, mapper):
    keys = units.catalog_keys(cfg["table"])
    name = cfg["species"]
    if name != "all":
        # accept a section name, its printed label, or an isotope for homonuclear pairs
        cat = units.read_catalog()
        keys = [k for k in keys if name in (k, cat[k].get("label"))] or \
               [k for k in keys if k == f"{name}_2"]
        if not keys:
            raise UsageError(f"unknown species {name!r}")
    cols = ["key", "label", "table", "sigma", "epsilon", "beta", "m1", "d1",
            "d_length", "e_energy", "c6bar", "i_critical"]
    rows = []
    for k in keys:
        sp = units.load_species(k)
        row = units.table_row(sp)
        rows.append([k, sp.name, sp.reference.get("table", "")]
                    + [row.get(c, math.nan) for c in cols[3:]])
    return cols, rows, {}


def cmd_volume_scan(cfg, mapper):
    if cfg["axis"] not in ("x00", "intensity"):
        raise UsageError(f"axis must be x00 or intensity, got {cfg['axis']!r}")
    values = parse_values(cfg["range"])
    setup = scatter.ScanSetup(_coupling(cfg), float(cfg["intensity"]), _model(cfg), _grid(cfg))
    res = scatter.volume_scan(setup, cfg["axis"], values, mapper)
    cols = [cfg["axis"], "M", "M_matched", "residual", "determinant", "flagged", "ell_label"]
    rows = [[r.axis_value, r.m_value, r.m_matched, r.residual, r.determinant, r.flagged,
             r.ell_label] for r in res]
    return cols, rows, {}


def cmd_singularity_map(cfg, mapper):
    inten = parse_values(cfg["intensities"], "intensities")
    x00s = parse_values(cfg["x00_range"], "x00_range")
    curves = scatter.singularity_map(_coupling(cfg), inten, x00s, _grid(cfg),
                                     with_widths=bool(cfg["widths"]))
    cols = ["branch", "ell_label", "intensity", "x00", "width_x00", "slope"]
    rows = []
    for b, c in enumerate(curves):
        for i, x, w, s in zip(c.intensity, c.x00, c.width_x00, c.slope()):
            rows.append([b, c.ell_label, i, x, w, s])
    return cols, rows, {"branches": len(curves)}


def _pole_rows(setup, axis, bracket):
    p = scatter.find_pole(setup, axis, bracket)
    ells = setup.coupling.ell_list
    cols = ["axis", "location", "width", "ell_label", "label"] + [f"weight_{l}" for l in ells]
    return cols, [[p.axis, p.location, p.width, p.ell_label, p.m] + list(p.weights)]


def cmd_pole(cfg, mapper):
    if cfg["axis"] not in ("x00", "intensity"):
        raise UsageError(f"axis must be x00 or intensity, got {cfg['axis']!r}")
    setup = scatter.ScanSetup(_coupling(cfg), float(cfg["intensity"]), _model(cfg), _grid(cfg))
    cols, rows = _pole_rows(setup, cfg["axis"], parse_interval(cfg["bracket"], "bracket"))
    return cols, rows, {}


def cmd_trap_spectrum(cfg, mapper):
    coupling = _coupling(cfg)
    inten = parse_values(cfg["intensities"], "intensities")
    window = parse_interval(cfg["window"], "window")
    try:
        trap.TrapSpec(float(cfg["beta"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    sweep = trap.trap_sweep(coupling, inten, float(cfg["beta"]), _model(cfg), window,
                            _grid(cfg), mapper)
    ells = coupling.ell_list
    cols = (["intensity", "index", "e_omega", "energy", "N", "ell", "shift", "degenerate"]
            + [f"weight_{l}" for l in ells])
    rows = []
    for pt in sorted(sweep, key=lambda p: p.intensity):
        for lv in pt.levels:
            rows.append([pt.intensity, lv.index, lv.e_omega, lv.energy, lv.N, lv.ell,
                         lv.shift, lv.degenerate] + list(lv.weights))
    summary = {}
    if cfg["crossings"]:
        summary["avoided_crossings"] = [
            {"intensity": c.intensity, "gap": c.gap, "lower": c.lower, "labels": list(c.labels)}
            for c in trap.avoided_crossings(sweep)]
    return cols, rows, summary


def cmd_shift_law(cfg, mapper):
    coupling = _coupling(cfg)
    beta = float(cfg["beta"])
    pts = trap.shift_law_scan(coupling, float(cfg["intensity"]), beta,
                              parse_values(cfg["range"]), int(cfg["level"]),
                              float(cfg["half_window"]), _grid(cfg), mapper)
    shifts = np.array([p.shift for p in pts])
    vols = np.array([p.volume for p in pts])
    fit = trap.fit_shift_law(shifts, vols, (int(cfg["level"]), 1, coupling.label), beta=beta,
                             max_fraction=float(cfg["max_fraction"]))
    summary = {"A": fit.A, "B": fit.B, "residual": fit.residual, "points": int(fit.used.sum())}
    if cfg.get("alpha") is None:
        m = int(1 if cfg.get("m") is None else cfg["m"])
        a, b = trap.analytic_AB(int(cfg["level"]), beta, trap.c3_for(float(cfg["intensity"]), m))
        summary.update(A_analytic=a, B_analytic=b)
    cols = ["x00", "M", "shift", "e_omega", "used"]
    rows = [[p.x00, p.volume, p.shift, p.e_omega, bool(u)] for p, u in zip(pts, fit.used)]
    return cols, rows, summary


def cmd_busch(cfg, mapper):
    beta = float(cfg["beta"])
    window = parse_interval(cfg["window"], "window")
    cols = ["s1", "index", "e_omega", "energy"]
    rows = []
    for s1 in parse_values(cfg["s1"], "s1"):
        for k, e in enumerate(trap.busch_spectrum(float(s1), beta, window)):
            rows.append([float(s1), k, float(e), 2.0 * beta * beta * float(e)])
    summary = {"B_from_derivative": {str(n): trap.B_from_derivative(n, beta) for n in range(3)}}
    return cols, rows, summary


def cmd_orient_eta(cfg, mapper):
    alphas = parse_values(cfg["alphas"], "alphas")
    grid = _grid(cfg)
    inten = float(cfg["intensity"])
    if cfg["mode"] == "scan":
        res = orient.short_range_eta_scan(parse_values(cfg["range"]), alphas, inten,
                                          float(cfg["delta_x"]), grid, mapper)
        cols = ["x00", "alpha", "x_probe", "eta"]
        rows = [[r.x00, r.alpha, r.x_probe, r.eta] for r in res]
        return cols, rows, {}
    if cfg["mode"] != "profile":
        raise UsageError(f"mode must be profile or scan, got {cfg['mode']!r}")
    u0, u1 = orient.p_wave_pair(inten, _model(cfg), grid)
    cols = ["alpha", "x", "eta", "eta_unwrapped"]
    rows, summary = [], {}
    for a in alphas:
        prof = orient.eta_profile(u0, u1, float(a))
        rows.extend([float(a), x, e, eu] for x, e, eu in zip(prof.x, prof.eta, prof.eta_unwrapped))
        summary[f"{float(a):.12g}"] = {"x_short": prof.x_short, "eta_short": prof.eta_short}
    return cols, rows, {"short_range": summary}


def cmd_orient_multi(cfg, mapper):
    ells = parse_ells(cfg["channels"])
    probe = parse_values(cfg["probe"], "probe")
    dist = orient.multichannel_distribution(float(cfg["theta0"]), float(cfg["intensity"]),
                                            float(cfg["x00"]), probe, ells,
                                            int(cfg["ntheta"]), _model(cfg), _grid(cfg))
    if cfg["mode"] == "distribution":
        cols = ["x", "theta", "total"] + [f"partial_{l}" for l in ells]
        rows = []
        for i, x in enumerate(dist.x):
            for j, t in enumerate(dist.theta):
                rows.append([x, t, dist.total[i, j]] + [dist.partial[l][i, j] for l in ells])
        return cols, rows, {}
    if cfg["mode"] != "norms":
        raise UsageError(f"mode must be norms or distribution, got {cfg['mode']!r}")
    cols = (["x", "peak"] + [f"norm_{l}" for l in ells] + [f"coherent_norm_{l}" for l in ells]
            + [f"peak_{l}" for l in ells])
    rows = []
    for i, x in enumerate(dist.x):
        rows.append([x, dist.peak_direction(i)] + [dist.norms[l][i] for l in ells]
                    + [dist.coherent_norms[l][i] for l in ells]
                    + [dist.peak_direction(i, l) for l in ells])
    return cols, rows, {}


def cmd_fixed_orientation(cfg, mapper):
    ells = parse_ells(cfg["channels"])
    try:
        coupling = alpha_weighted_matrix(float(cfg["alpha"]), ChannelSet(0, ells),
                                         ChannelSet(1, ells))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    a, x00 = cfg.get("scattering_length"), cfg.get("x00")
    if a is not None and x00 is not None:
        raise UsageError("give either x00 or scattering_length, not both")
    if x00 is None:
        # default: the s-wave scattering length used for the orientation scans
        x00 = scatter.x00_for_scattering_length(1.16 if a is None else float(a))
    setup = scatter.ScanSetup(coupling, 0.0, _model(cfg, x00), _grid(cfg))
    summary = {"x00": x00}
    if cfg["mode"] == "pole":
        cols, rows = _pole_rows(setup, "intensity", parse_interval(cfg["bracket"], "bracket"))
        return cols, rows, summary
    if cfg["mode"] != "scan":
        raise UsageError(f"mode must be scan or pole, got {cfg['mode']!r}")
    res = scatter.volume_scan(setup, "intensity", parse_values(cfg["range"]), mapper)
    cols = ["intensity", "M", "residual", "flagged", "ell_label"]
    rows = [[r.axis_value, r.m_value, r.residual, r.flagged, r.ell_label] for r in res]
    return cols, rows, summary


def cmd_slope_ratio(cfg, mapper):
    res = orient.slope_ratio_scan(parse_values(cfg["range"]), float(cfg["intensity"]),
                                  _model(cfg, 0.0), _grid(cfg))
    cols = ["x00", "d0", "d1", "ratio", "inverse"]
    return cols, [[r.x00, r.d0, r.d1, r.ratio, r.inverse] for r in res], {}


COMMANDS = {
    "units": cmd_units,
    "volume-scan": cmd_volume_scan,
    "singularity-map": cmd_singularity_map,
    "pole": cmd_pole,
    "trap-spectrum": cmd_trap_spectrum,
    "shift-law": cmd_shift_law,
    "busch": cmd_busch,
    "orient-eta": cmd_orient_eta,
    "orient-multi": cmd_orient_multi,
    "fixed-orientation": cmd_fixed_orientation,
    "slope-ratio": cmd_slope_ratio,
}


# --------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.12g" % float(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else None
    return v


def render_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def config_hash(cfg: dict) -> str:
    payload = {k: v for k, v in cfg.items() if k not in _RUNTIME_KEYS}
    text = json.dumps(_jsonable(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def sidecar(command: str, cfg: dict, columns, rows, summary) -> str:
    meta = {
        "version": __version__,
        "subcommand": command,
        "config": {k: v for k, v in cfg.items() if k not in _RUNTIME_KEYS},
        "config_hash": config_hash(cfg),
        "columns": list(columns),
        "rows": rows,
        "summary": summary,
    }
    return json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# argument handling


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_common(p):
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON file with parameter values")
    p.add_argument("--print-config", action="store_true", default=S,
                   help="print the effective configuration and exit")
    p.add_argument("--output", "-o", default=S, help="CSV path (stdout when omitted)")
    p.add_argument("--jobs", type=int, default=S, help="worker processes for scans")
    p.add_argument("--x-max", dest="x_max", type=float, default=S, help="outer grid radius")
    p.add_argument("--ppw", type=float, default=S, help="grid points per local wavelength")
    p.add_argument("--max-step", dest="max_step", type=float, default=S, help="largest grid step")


_INT_KEYS = ("m", "ntheta", "level")
_FLOAT_KEYS = ("alpha", "scattering_length", "x00")


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = _Parser(prog="dipscat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dipscat {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, defaults in DEFAULTS.items():
        p = sub.add_parser(name, help=_HELP[name], argument_default=S)
        _add_common(p)
        for key, val in defaults.items():
            flag = "--" + key.replace("_", "-")
            if isinstance(val, bool):
                p.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction)
            elif key in _INT_KEYS:
                p.add_argument(flag, dest=key, type=int)
            elif isinstance(val, float) or key in _FLOAT_KEYS:
                p.add_argument(flag, dest=key, type=float)
            else:
                p.add_argument(flag, dest=key)
    return parser


def resolve_config(command: str, given: dict) -> dict:
    """Merge defaults, the optional config file and explicit flags."""
    cfg = {**COMMON, **DEFAULTS[command]}
    path = given.pop("config", None)
    if path is not None:
        try:
            with open(path) as fh:
                filecfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(filecfg, dict):
            raise UsageError(f"config {path} must hold a JSON object")
        sub = filecfg.pop("subcommand", command)
        if sub != command:
            raise UsageError(f"config {path} is for {sub!r}, not {command!r}")
        unknown = sorted(set(filecfg) - set(cfg))
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")
        cfg.update(filecfg)
    cfg.update(given)
    if int(cfg["jobs"]) < 1:
        raise UsageError("jobs must be at least 1")
    return cfg


def run(argv=None, stdout=None) -> int:
    """Entry point; returns the exit code."""
    stdout = stdout or sys.stdout
    try:
        ns = build_parser().parse_args(argv)
        if ns.command is None:
            raise UsageError("a subcommand is required (see --help)")
        given = {k: v for k, v in vars(ns).items() if k != "command"}
        show = given.pop("print_config", False)
        cfg = resolve_config(ns.command, given)
        if show:
            stdout.write(json.dumps(_jsonable(cfg), indent=2, sort_keys=True) + "\n")
            return EXIT_OK
        with _mapper(int(cfg["jobs"])) as mapper:
            cols, rows, summary = COMMANDS[ns.command](cfg, mapper)
    except UsageError as exc:
        print(f"dipscat: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except scatter.BracketError as exc:
        print(f"dipscat {ns.command}: bracket failure: {exc}", file=sys.stderr)
        return EXIT_BRACKET
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"dipscat {ns.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    text = render_csv(cols, rows)
    out = cfg["output"]
    if out is None:
        stdout.write(text)
    else:
        try:
            with open(out, "w") as fh:
                fh.write(text)
            with open(f"{out}.json", "w") as fh:
                fh.write(sidecar(ns.command, cfg, cols, rows, summary))
        except OSError as exc:
            print(f"dipscat {ns.command}: cannot write output: {exc}", file=sys.stderr)
            return EXIT_USAGE
    if summary and out is None:
        print(json.dumps(_jsonable(summary), sort_keys=True), file=sys.stderr)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
