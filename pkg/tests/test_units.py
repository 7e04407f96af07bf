from __future__ import annotations

import math

import pytest
from hypothesis import given, strategies as st

from dipscat.units import (
    CODATA,
    PhysicalConstants,
    SpeciesParams,
    c6bar_from_intensity,
    catalog_keys,
    compute_dd_units,
    compute_vdw_units,
    dipole_strength_au,
    equivalent_dipole,
    intensity_to_dipole_length,
    load_species,
    read_catalog,
    table_row,
)


def test_catalog_holds_both_tables():
    assert len(catalog_keys("I")) == 13
    assert len(catalog_keys("II")) == 12
    for key in catalog_keys():
        sp = load_species(key)
        assert sp.reduced_mass > 0
        assert sp.reference["table"] in ("I", "II")


def test_table_two_rows_carry_dipoles():
    for key in catalog_keys("II"):
        assert load_species(key).has_dipole
    for key in catalog_keys("I"):
        assert not load_species(key).has_dipole


def test_unknown_species_raises():
    with pytest.raises(KeyError):
        load_species("Xx1_2")
    with pytest.raises(KeyError):
        load_species("masses")


def test_catalog_from_file(tmp_path):
    path = tmp_path / "cat.ini"
    path.write_text(
        "[masses]\nA1 = 10.0\n\n[Pair]\ntable = I\npartner1 = A1\npartner2 = A1\n"
        "c6 = 100.0\nalpha1 = 10.0\nalpha2 = 10.0\n"
    )
    cat = read_catalog(path)
    sp = load_species("Pair", cat)
    assert sp.reduced_mass == pytest.approx(5.0)
    assert catalog_keys(catalog=cat) == ["Pair"]


def test_sr88_row():
    # sigma, epsilon and beta for 88Sr2 as tabulated
    u = compute_vdw_units(load_species("Sr88_2"))
    assert u.sigma == pytest.approx(151.053, rel=2e-3)
    assert u.epsilon == pytest.approx(86.37, rel=2e-3)
    assert u.beta == pytest.approx(0.6358, rel=2e-3)


def test_cr52_dipolar_row():
    u = compute_dd_units(load_species("Cr52_2_dd"))
    assert u.d_length == pytest.approx(22.741, rel=5e-3)
    assert u.c6bar == pytest.approx(259.48, rel=5e-3)
    assert u.i_critical == pytest.approx(1.495, rel=5e-3)


def test_rbcs_dipolar_row():
    sp = load_species("RbCs_2")
    u = compute_dd_units(sp)
    ref = sp.reference
    assert u.d_length == pytest.approx(ref["d_length"], rel=5e-3)
    assert u.i_critical == pytest.approx(ref["i_critical"], rel=5e-3)


def test_vdw_energy_definition():
    sp = load_species("Sr86_2")
    u = compute_vdw_units(sp)
    mu = sp.reduced_mass * CODATA.mass_au
    assert u.epsilon_hartree == pytest.approx(1.0 / (2.0 * mu * u.sigma ** 2), rel=1e-14)


def test_sigma_scales_with_c6_quarter_power():
    sp = load_species("Sr88_2")
    doubled = SpeciesParams("x", sp.reduced_mass, 16.0 * sp.c6, sp.alpha1, sp.alpha2)
    assert compute_vdw_units(doubled).sigma == pytest.approx(2.0 * compute_vdw_units(sp).sigma,
                                                             rel=1e-14)


def test_intensity_six_gives_sigma():
    d, ratio = intensity_to_dipole_length(6.0, sigma=151.0)
    assert d == 151.0
    assert ratio == 2.0
    assert c6bar_from_intensity(6.0) == 1.0


def test_intensity_zero():
    d, ratio = intensity_to_dipole_length(0.0)
    assert d == 0.0 and math.isinf(ratio)
    with pytest.raises(ValueError):
        c6bar_from_intensity(0.0)
    with pytest.raises(ValueError):
        intensity_to_dipole_length(-1.0)


@given(st.floats(min_value=0.01, max_value=100.0))
def test_c6bar_round_trip(intensity):
    # c6bar = (sigma / D)^4 with D = I sigma / 6
    d, _ = intensity_to_dipole_length(intensity)
    assert c6bar_from_intensity(intensity) == pytest.approx(d ** -4, rel=1e-12)


@given(st.floats(min_value=0.1, max_value=100.0))
def test_equivalent_dipole_scales_as_sqrt(intensity):
    sp = load_species("Cr52_2")
    d1, m1 = equivalent_dipole(sp, 1.0)
    d, m = equivalent_dipole(sp, intensity)
    assert d == pytest.approx(d1 * math.sqrt(intensity), rel=1e-12)
    assert m == pytest.approx(m1 * math.sqrt(intensity), rel=1e-12)


def test_equivalent_dipole_reaches_critical_intensity():
    # a pair with the equivalent dipoles of intensity I has I_c = I
    base = load_species("Cr52_2")
    for inten in (0.5, 1.495, 6.0):
        _, m = equivalent_dipole(base, inten)
        sp = SpeciesParams("x", base.reduced_mass, base.c6, base.alpha1, base.alpha2,
                           magnetic_dipole1=m, magnetic_dipole2=m)
        assert compute_dd_units(sp).i_critical == pytest.approx(inten, rel=1e-12)
        d, _ = equivalent_dipole(base, inten)
        sp = SpeciesParams("x", base.reduced_mass, base.c6, base.alpha1, base.alpha2,
                           electric_dipole1=d, electric_dipole2=d)
        assert compute_dd_units(sp).i_critical == pytest.approx(inten, rel=1e-12)


def test_critical_intensity_independent_of_polarizability():
    sp = load_species("KRb40_2")
    other = SpeciesParams(sp.name, sp.reduced_mass, sp.c6, 3.0 * sp.alpha1, 0.5 * sp.alpha2,
                          electric_dipole1=sp.electric_dipole1,
                          electric_dipole2=sp.electric_dipole2)
    assert compute_dd_units(other).i_critical == compute_dd_units(sp).i_critical
    assert compute_vdw_units(other).beta != compute_vdw_units(sp).beta


def test_dipole_strength_kinds():
    base = load_species("Sr88_2")
    el = SpeciesParams("e", base.reduced_mass, base.c6, 1.0, 1.0,
                       electric_dipole1=1.0, electric_dipole2=1.0)
    mg = SpeciesParams("m", base.reduced_mass, base.c6, 1.0, 1.0,
                       magnetic_dipole1=1.0, magnetic_dipole2=1.0)
    assert dipole_strength_au(el) == pytest.approx(CODATA.debye_au ** 2, rel=1e-14)
    assert dipole_strength_au(mg) == pytest.approx((CODATA.fine_structure / 2) ** 2, rel=1e-14)
    with pytest.raises(ValueError):
        dipole_strength_au(base)


def test_species_validation():
    with pytest.raises(ValueError):
        SpeciesParams("x", -1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        SpeciesParams("x", 1.0, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        SpeciesParams("x", 1.0, 1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        SpeciesParams("x", 1.0, 1.0, 1.0, 1.0, electric_dipole1=1.0, magnetic_dipole1=1.0)


def test_constants():
    assert CODATA.intensity_au == pytest.approx(6.436e15, rel=1e-3)
    assert CODATA.debye_au == pytest.approx(0.393430, rel=1e-5)
    with pytest.raises(ValueError):
        PhysicalConstants(bohr_radius=0.0)


def test_table_row_keys():
    row = table_row(load_species("Dy164_2"))
    assert {"sigma", "epsilon", "beta", "d1", "m1", "d_length", "e_energy", "c6bar",
            "i_critical"} <= set(row)
    assert "d_length" not in table_row(load_species("Sr88_2"))
