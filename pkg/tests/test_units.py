import math

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import constants

from qreflect.errors import DomainError
from qreflect.units import (AMU, EV, K_B, NK, ev_m4_to_si, incidence_from_energy, incidence_from_velocity,
                            incidence_from_wavenumber, joule_to_kelvin, joule_to_nk, k_beta4, kelvin_to_joule,
                            nk_to_joule, thermal_wavelength)

RB_MASS = 87 * constants.atomic_mass


def test_constants_are_codata():
    assert K_B == constants.k
    assert EV == constants.e
    assert AMU == constants.atomic_mass


def test_thermal_wavelength_room_temperature():
    # hbar c / k_B = 2.28988e-3 m K
    assert thermal_wavelength(300.0) == pytest.approx(2.28988452e-3 / 300.0, rel=1e-7)


@pytest.mark.parametrize("T", [0.0, -1.0])
def test_thermal_wavelength_rejects_nonpositive(T):
    with pytest.raises(DomainError):
        thermal_wavelength(T)


def test_rb_at_half_mm_per_s_is_about_one_nanokelvin():
    inc = incidence_from_velocity(0.49e-3, RB_MASS)
    assert inc.energy_nk == pytest.approx(1.2561666, rel=1e-6)
    assert inc.energy_kelvin == pytest.approx(inc.energy_nk * 1e-9)


def test_c4_unit_conversion():
    assert ev_m4_to_si(7.6e-37) == pytest.approx(7.6e-37 * 1.602176634e-19, rel=1e-15)


def test_k_beta4_rejects_bad_beta4():
    with pytest.raises(DomainError):
        k_beta4(incidence_from_velocity(1e-3, RB_MASS), 0.0)


@pytest.mark.parametrize("bad", [dict(v=-1.0, m=1.0), dict(v=1.0, m=0.0)])
def test_incidence_validation(bad):
    with pytest.raises(DomainError):
        incidence_from_velocity(bad["v"], bad["m"])


@given(st.floats(1e-7, 10.0), st.floats(1.0, 300.0))
def test_incidence_constructors_agree(v, mass_u):
    m = mass_u * AMU
    a = incidence_from_velocity(v, m)
    b = incidence_from_wavenumber(a.wavenumber, m)
    c = incidence_from_energy(a.energy, m)
    for other in (b, c):
        assert other.velocity == pytest.approx(v, rel=1e-12)
        assert other.energy == pytest.approx(0.5 * m * v * v, rel=1e-12)


@given(st.floats(1e-6, 1e6))
def test_temperature_energy_roundtrip(T):
    assert joule_to_kelvin(kelvin_to_joule(T)) == pytest.approx(T, rel=1e-14)
    assert nk_to_joule(joule_to_nk(T * K_B * NK)) == pytest.approx(T * K_B * NK, rel=1e-14)
