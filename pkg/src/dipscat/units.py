"""Reduced-unit systems for van der Waals and dipole-dipole collisions.

Two unit systems are used.  The van der Waals units make the ``-C6/R^6``
term read ``-1/x^6``::

    sigma = (2 mu C6 / hbar^2)^(1/4),   epsilon = hbar^2 / (2 mu sigma^2)

and the light intensity is measured in ``beta = c sigma^3 epsilon /
(12 pi alpha1 alpha2)``.  The dipole-dipole units scale the ``1/R^3``
interaction of two aligned permanent dipoles of strength ``Dcal``::

    D = mu Dcal / hbar^2,   E_D = hbar^2 / (mu D^2),   c6bar = 2 mu C6 / (hbar^2 D^4)

Inside this module every quantity is kept in atomic units; conversion
to display units (a0, microkelvin, GW/cm^2, Debye, Bohr magneton)
happens only in the returned dataclasses.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
import math

from scipy import constants as sc


@dataclass(frozen=True)
class PhysicalConstants:
    """SI values of the constants used for unit conversion.

    ``intensity_au`` is the atomic unit of light intensity in W/cm^2 in the
    Gaussian convention ``I = c E^2 / (8 pi)``, i.e. ``E_h^2 / (hbar a0^2)``.
    """

    bohr_radius: float = sc.physical_constants["Bohr radius"][0]
    hartree: float = sc.physical_constants["Hartree energy"][0]
    electron_mass: float = sc.m_e
    amu: float = sc.physical_constants["atomic mass constant"][0]
    boltzmann: float = sc.k
    bohr_magneton: float = sc.physical_constants["Bohr magneton"][0]
    debye: float = 1e-21 / sc.c
    speed_of_light: float = sc.c
    hbar: float = sc.hbar
    elementary_charge: float = sc.e
    fine_structure: float = sc.fine_structure
    intensity_au: float = field(init=False)

    def __post_init__(self):
        for name in ("bohr_radius", "hartree", "electron_mass", "amu", "boltzmann",
                     "bohr_magneton", "debye", "speed_of_light", "hbar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        w_per_m2 = self.hartree ** 2 / (self.hbar * self.bohr_radius ** 2)
        object.__setattr__(self, "intensity_au", w_per_m2 * 1e-4)

    @property
    def mass_au(self) -> float:
        """One amu in electron masses."""
        return self.amu / self.electron_mass

    @property
    def c_au(self) -> float:
        """Speed of light in atomic units."""
        return 1.0 / self.fine_structure

    @property
    def debye_au(self) -> float:
        """One Debye in atomic units of electric dipole (e a0)."""
        return self.debye / (self.elementary_charge * self.bohr_radius)

    @property
    def microkelvin_per_hartree(self) -> float:
        return self.hartree / self.boltzmann * 1e6


CODATA = PhysicalConstants()


@dataclass(frozen=True)
class SpeciesParams:
    """Physical inputs of a colliding pair.

    Dipoles are either electric (Debye) or magnetic (Bohr magnetons);
    setting both kinds is rejected.
    """

    name: str
    reduced_mass: float
    c6: float
    alpha1: float
    alpha2: float
    electric_dipole1: float | None = None
    electric_dipole2: float | None = None
    magnetic_dipole1: float | None = None
    magnetic_dipole2: float | None = None
    reference: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.reduced_mass > 0:
            raise ValueError(f"{self.name}: reduced mass must be positive")
        if not self.c6 > 0:
            raise ValueError(f"{self.name}: C6 must be positive")
        if not self.alpha1 * self.alpha2 > 0:
            raise ValueError(f"{self.name}: polarizability product must be positive")
        electric = self.electric_dipole1 is not None or self.electric_dipole2 is not None
        magnetic = self.magnetic_dipole1 is not None or self.magnetic_dipole2 is not None
        if electric and magnetic:
            raise ValueError(f"{self.name}: set either electric or magnetic dipoles, not both")

    @property
    def has_dipole(self) -> bool:
        return self.dipole_kind is not None

    @property
    def dipole_kind(self) -> str | None:
        if self.electric_dipole1 is not None and self.electric_dipole2 is not None:
            return "electric"
        if self.magnetic_dipole1 is not None and self.magnetic_dipole2 is not None:
            return "magnetic"
        return None


@dataclass(frozen=True)
class VdwUnits:
    """Van der Waals units: ``sigma`` in a0, ``epsilon`` in microkelvin, ``beta`` in GW/cm^2."""

    sigma: float
    epsilon: float
    beta: float
    epsilon_hartree: float


@dataclass(frozen=True)
class DipoleUnits:
    """Dipole-dipole units: ``d_length`` in a0 and ``e_energy`` in microkelvin.

    ``i_critical`` is the reduced intensity (van der Waals units) at which
    light-induced dipoles match the permanent ones.
    """

    d_length: float
    e_energy: float
    c6bar: float
    i_critical: float


def _mu_au(species: SpeciesParams, const: PhysicalConstants) -> float:
    return species.reduced_mass * const.mass_au


def compute_vdw_units(species: SpeciesParams, const: PhysicalConstants = CODATA) -> VdwUnits:
    """Length, energy and intensity units of the van der Waals system.

    Examples
    --------
    >>> u = compute_vdw_units(load_species("Sr88_2"))
    >>> round(u.sigma, 3), round(u.epsilon, 2), round(u.beta, 4)
    (151.053, 86.37, 0.6358)
    """
    mu = _mu_au(species, const)
    sigma = (2.0 * mu * species.c6) ** 0.25
    eps = 1.0 / (2.0 * mu * sigma ** 2)
    beta_au = const.c_au * sigma ** 3 * eps / (12.0 * math.pi * species.alpha1 * species.alpha2)
    return VdwUnits(sigma, eps * const.microkelvin_per_hartree,
                    beta_au * const.intensity_au * 1e-9, eps)


def dipole_strength_au(species: SpeciesParams, const: PhysicalConstants = CODATA) -> float:
    """Coefficient ``Dcal`` of the aligned-dipole ``(1 - 3 cos^2) / R^3`` interaction (a.u.)."""
    kind = species.dipole_kind
    if kind == "electric":
        return (species.electric_dipole1 * species.electric_dipole2 * const.debye_au ** 2)
    if kind == "magnetic":
        # mu_B = alpha/2 in atomic units and the magnetic coupling carries alpha^2
        half = 0.5 * const.fine_structure
        return species.magnetic_dipole1 * species.magnetic_dipole2 * half ** 2
    raise ValueError(f"{species.name}: no permanent dipole moments set")


def compute_dd_units(species: SpeciesParams, const: PhysicalConstants = CODATA) -> DipoleUnits:
    """Dipole-dipole units and the critical intensity of a dipolar pair.

    Examples
    --------
    >>> u = compute_dd_units(load_species("Cr52_2_dd"))
    >>> round(u.d_length, 3), round(u.c6bar, 2), round(u.i_critical, 3)
    (22.741, 259.48, 1.495)
    """
    dcal = dipole_strength_au(species, const)
    mu = _mu_au(species, const)
    vdw = compute_vdw_units(species, const)
    d = mu * dcal
    e_d = 1.0 / (mu * d ** 2)
    c6bar = 2.0 * mu * species.c6 / d ** 4
    ic = 3.0 * dcal / (vdw.epsilon_hartree * vdw.sigma ** 3)
    return DipoleUnits(d, e_d * const.microkelvin_per_hartree, c6bar, ic)


def intensity_to_dipole_length(intensity: float, sigma: float = 1.0):
    """Dipole length ``D = (I/6) sigma`` equivalent to reduced intensity ``I``.

    Returns ``(D, E_D / epsilon)``; the energy ratio ``72 / I^2`` is infinite
    at ``I = 0``.
    """
    if intensity < 0:
        raise ValueError("intensity must be non-negative")
    d = intensity / 6.0 * sigma
    ratio = math.inf if intensity == 0 else 72.0 / intensity ** 2
    return d, ratio


def c6bar_from_intensity(intensity: float) -> float:
    """Reduced van der Waals strength ``(6 / I)^4`` seen in dipole units."""
    if not intensity > 0:
        raise ValueError("intensity must be positive")
    return (6.0 / intensity) ** 4


def equivalent_dipole(species: SpeciesParams, intensity: float = 1.0,
                      const: PhysicalConstants = CODATA):
    """Electric (Debye) and magnetic (Bohr magneton) dipoles mimicking intensity ``I``.

    At reduced intensity ``I`` the light-induced coupling is
    ``Dcal = I epsilon sigma^3 / 3``; both values grow as ``sqrt(I)``.
    """
    if intensity < 0:
        raise ValueError("intensity must be non-negative")
    vdw = compute_vdw_units(species, const)
    dcal = intensity * vdw.epsilon_hartree * vdw.sigma ** 3 / 3.0
    d = math.sqrt(dcal) / const.debye_au
    m = 2.0 * math.sqrt(dcal) / const.fine_structure
    return d, m


# --------------------------------------------------------------------------
# catalog


def _catalog_text() -> str:
    return resources.files("dipscat").joinpath("data/species.ini").read_text()


def read_catalog(path=None) -> configparser.ConfigParser:
    """Parse the species catalog (the bundled one unless ``path`` is given)."""
    cfg = configparser.ConfigParser()
    # keep isotope keys case-sensitive
    cfg.optionxform = str
    if path is None:
        cfg.read_string(_catalog_text())
    else:
        with open(path) as fh:
            cfg.read_file(fh)
    return cfg


def _partner_mass(spec: str, masses) -> float:
    try:
        return sum(float(masses[atom.strip()]) for atom in spec.split("+"))
    except KeyError as exc:
        raise KeyError(f"unknown isotope {exc.args[0]!r} in {spec!r}") from None


def _opt(sec, key):
    return sec.getfloat(key) if key in sec else None


def load_species(key: str, catalog: configparser.ConfigParser | None = None) -> SpeciesParams:
    """Build :class:`SpeciesParams` for one catalog section."""
    cfg = catalog if catalog is not None else read_catalog()
    if key not in cfg or key == "masses":
        raise KeyError(f"species {key!r} not in catalog")
    sec = cfg[key]
    m1 = _partner_mass(sec["partner1"], cfg["masses"])
    m2 = _partner_mass(sec["partner2"], cfg["masses"])
    ref = {k[4:]: float(v) for k, v in sec.items() if k.startswith("ref_")}
    ref["table"] = sec.get("table", "")
    return SpeciesParams(
        name=sec.get("label", key),
        reduced_mass=m1 * m2 / (m1 + m2),
        c6=sec.getfloat("c6"),
        alpha1=sec.getfloat("alpha1"),
        alpha2=sec.getfloat("alpha2"),
        electric_dipole1=_opt(sec, "electric_dipole1"),
        electric_dipole2=_opt(sec, "electric_dipole2"),
        magnetic_dipole1=_opt(sec, "magnetic_dipole1"),
        magnetic_dipole2=_opt(sec, "magnetic_dipole2"),
        reference=ref,
    )


def catalog_keys(table: str | None = None, catalog: configparser.ConfigParser | None = None) -> list:
    """Section names of the catalog, optionally restricted to one table ("I" or "II")."""
    cfg = catalog if catalog is not None else read_catalog()
    keys = [k for k in cfg.sections() if k != "masses"]
    if table is not None:
        keys = [k for k in keys if cfg[k].get("table") == table]
    return keys


def table_row(species: SpeciesParams) -> dict:
    """Recomputed display columns for a catalog entry, keyed like its ``ref_`` values."""
    vdw = compute_vdw_units(species)
    row = {"sigma": vdw.sigma, "epsilon": vdw.epsilon, "beta": vdw.beta}
    d1, m1 = equivalent_dipole(species, 1.0)
    row.update(d1=d1, m1=m1)
    if species.has_dipole:
        dd = compute_dd_units(species)
        row.update(d_length=dd.d_length, e_energy=dd.e_energy, c6bar=dd.c6bar,
                   i_critical=dd.i_critical)
    return row
