"""Physical constants, unit conversions and incidence kinematics.

Everything inside the package is SI.  The helpers here convert to the
laboratory units (nK, um, mm/s, Angstrom^3, eV) at I/O boundaries only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants as _sc

from .errors import DomainError


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA values used throughout (SI)."""

    hbar: float = _sc.hbar
    c: float = _sc.c
    k_B: float = _sc.k
    atomic_mass_unit: float = _sc.atomic_mass
    eV: float = _sc.e


CONSTANTS = PhysicalConstants()

HBAR = CONSTANTS.hbar
C = CONSTANTS.c
K_B = CONSTANTS.k_B
AMU = CONSTANTS.atomic_mass_unit
EV = CONSTANTS.eV

ANGSTROM3 = 1e-30
NM = 1e-9
UM = 1e-6
NK = 1e-9


def kelvin_to_joule(T):
    return np.multiply(T, K_B)


def joule_to_kelvin(E):
    return np.divide(E, K_B)


def joule_to_nk(E):
    """Energy in J expressed as a temperature in nK."""
    return np.divide(E, K_B * NK)


def nk_to_joule(T_nK):
    return np.multiply(T_nK, K_B * NK)


def ev_m4_to_si(c4_ev_m4):
    """C4 given in eV m^4 to J m^4."""
    return c4_ev_m4 * EV


def thermal_wavelength(T):
    """Thermal photon wavelength hbar c / (k_B T) in metres.

    Parameters
    ----------
    T : float
        Temperature in kelvin, strictly positive.
    """
    if not T > 0:
        raise DomainError(f"thermal wavelength needs T > 0, got {T!r}")
    return HBAR * C / (K_B * T)


@dataclass(frozen=True)
class Incidence:
    """Normal-incidence kinematics of an atom of mass ``mass``.

    ``velocity``, ``wavenumber`` and ``energy`` are kept mutually
    consistent by the constructors below; build instances through
    :func:`incidence_from_velocity` or :func:`incidence_from_wavenumber`.
    """

    velocity: float
    wavenumber: float
    energy: float
    mass: float

    @property
    def energy_kelvin(self) -> float:
        return self.energy / K_B

    @property
    def energy_nk(self) -> float:
        return self.energy / (K_B * NK)


def incidence_from_velocity(v: float, m: float) -> Incidence:
    if not m > 0:
        raise DomainError(f"mass must be positive, got {m!r}")
    if not v >= 0:
        raise DomainError(f"velocity must be non-negative, got {v!r}")
    k = m * v / HBAR
    return Incidence(velocity=float(v), wavenumber=k, energy=(HBAR * k) ** 2 / (2 * m), mass=float(m))


def incidence_from_wavenumber(k: float, m: float) -> Incidence:
    if not m > 0:
        raise DomainError(f"mass must be positive, got {m!r}")
    if not k >= 0:
        raise DomainError(f"wavenumber must be non-negative, got {k!r}")
    return Incidence(velocity=HBAR * k / m, wavenumber=float(k), energy=(HBAR * k) ** 2 / (2 * m), mass=float(m))


def incidence_from_energy(E: float, m: float) -> Incidence:
    if not E >= 0:
        raise DomainError(f"energy must be non-negative, got {E!r}")
    return incidence_from_wavenumber(math.sqrt(2 * m * E) / HBAR, m)


def k_beta4(incidence: Incidence, beta4: float) -> float:
    """Dimensionless product k_i * beta_4."""
    if not beta4 > 0:
        raise DomainError(f"beta4 must be positive, got {beta4!r}")
    return incidence.wavenumber * beta4
