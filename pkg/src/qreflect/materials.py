"""Atomic species, dielectric surfaces and the closed-form coefficients.

Polarizabilities are stored as Gaussian polarizability volumes (m^3), so
that ``alpha * k_B * T / r**3`` is an energy without further factors.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
from scipy.integrate import quad

from .errors import ConfigurationError, DomainError
from .units import AMU, ANGSTROM3, C, EV, HBAR, K_B, NM


@dataclass(frozen=True)
class Species:
    """An atom: mass (kg), static polarizability volume (m^3) and the
    effective transition length l = lambda_tr / 2 pi (m)."""

    name: str
    mass: float
    static_polarizability: float
    transition_length: float

    def __post_init__(self):
        for attr in ("mass", "static_polarizability", "transition_length"):
            if not getattr(self, attr) > 0:
                raise DomainError(f"{self.name}: {attr} must be positive")


@dataclass(frozen=True)
class Surface:
    """A dielectric half-space with static permittivity ``static_permittivity``.

    ``phi_override`` replaces the computed retardation factor phi(eps0) when
    set; it is how the catalog pins C4 to a tabulated value.
    """

    name: str
    static_permittivity: float
    phi_override: Optional[float] = None

    def __post_init__(self):
        if not self.static_permittivity > 1:
            raise DomainError(f"{self.name}: static permittivity must exceed 1")
        if self.phi_override is not None and not 0 < self.phi_override <= 1:
            raise DomainError(f"{self.name}: phi override must lie in (0, 1]")

    @property
    def phi(self) -> float:
        if self.phi_override is not None:
            return self.phi_override
        return phi(self.static_permittivity)


@dataclass(frozen=True)
class AtomSurfacePair:
    species: Species
    surface: Surface
    c4_override: Optional[float] = None

    def __post_init__(self):
        if self.c4_override is not None and not self.c4_override > 0:
            raise DomainError("C4 override must be positive")

    @property
    def name(self) -> str:
        return f"{self.species.name}/{self.surface.name}"

    @property
    def epsilon(self) -> float:
        return self.surface.static_permittivity

    @property
    def c4(self) -> float:
        return c4(self)

    @property
    def beta4(self) -> float:
        return beta4(self)


def fresnel_kernel(p, eps):
    """2 r_TM - (r_TM + r_TE)/p^2 at imaginary frequency, p = c q / xi >= 1.

    Written so that eps -> 1 loses no precision.
    """
    s = np.sqrt(p * p + eps - 1.0)
    r_tm = (eps - 1.0) * ((eps + 1.0) * p * p - 1.0) / (eps * p + s) ** 2
    r_te = -(eps - 1.0) / (p + s) ** 2
    return 2.0 * r_tm - (r_tm + r_te) / (p * p)


def phi(eps0: float) -> float:
    """Retardation factor of a dielectric wall relative to a perfect mirror.

    C4(eps0) = phi(eps0) * 3 alpha hbar c / (8 pi); phi -> 1 for a perfect
    conductor and vanishes linearly as eps0 -> 1.
    """
    if not eps0 > 1:
        raise DomainError(f"phi needs eps0 > 1, got {eps0!r}")
    val, _ = quad(lambda p: fresnel_kernel(p, eps0) / (p * p), 1.0, np.inf, epsabs=0.0, epsrel=1e-11, limit=200)
    return 0.5 * val


def c4(pair: AtomSurfacePair) -> float:
    """Casimir-Polder strength 3 alpha hbar c phi / (8 pi) in J m^4."""
    if pair.c4_override is not None:
        return pair.c4_override
    return 3.0 * pair.species.static_polarizability * HBAR * C * pair.surface.phi / (8.0 * math.pi)


def c3(pair: AtomSurfacePair, T: float) -> float:
    """Classical Lifshitz strength alpha k_B T (eps-1) / (4 (eps+1)) in J m^3."""
    if not T >= 0:
        raise DomainError(f"temperature must be non-negative, got {T!r}")
    e = pair.epsilon
    return pair.species.static_polarizability * K_B * T * (e - 1.0) / (4.0 * (e + 1.0))


def c2(pair: AtomSurfacePair, T_S: float, T_E: float) -> float:
    """Strength of the C2/r^2 non-equilibrium tail in J m^2; positive
    (repulsive) when the environment is hotter than the surface."""
    if not (T_S >= 0 and T_E >= 0):
        raise DomainError("temperatures must be non-negative")
    e = pair.epsilon
    return (
        math.pi * pair.species.static_polarizability * K_B**2 * (T_E**2 - T_S**2) * (e + 1.0)
        / (12.0 * HBAR * C * math.sqrt(e - 1.0))
    )


def beta4(pair: AtomSurfacePair) -> float:
    return math.sqrt(2.0 * pair.species.mass * c4(pair)) / HBAR


def beta0(pair: AtomSurfacePair, T_S: float, T_E: float) -> float:
    return 2.0 * pair.species.mass * c2(pair, T_S, T_E) / HBAR**2


def transition_temperature_limit(species: Species) -> float:
    """Temperature above which the static-response potentials are suspect
    (k_B T > 0.1 hbar c / l)."""
    return 0.1 * HBAR * C / (K_B * species.transition_length)


# ---------------------------------------------------------------------------
# catalog

RB87 = Species("Rb87", 87 * AMU, 47.25 * ANGSTROM3, 130 * NM)
HE4_METASTABLE = Species("He4*", 4 * AMU, 46.8 * ANGSTROM3, 130 * NM)
HE4 = Species("He4", 4 * AMU, 0.205 * ANGSTROM3, 130 * NM)

#: C4 of Rb87 on silicon, 7.6e-37 eV m^4, folded into phi so that other
#: species on the same surface scale with their polarizability.
SI_RB_C4 = 7.6e-37 * EV
SILICON = Surface("Si", 12.0, phi_override=8.0 * math.pi * SI_RB_C4 / (3.0 * RB87.static_polarizability * HBAR * C))


@dataclass(frozen=True)
class Catalog:
    species: Mapping[str, Species]
    surfaces: Mapping[str, Surface]
    aliases: Mapping[str, str] = field(default_factory=dict)

    def get_species(self, name: str) -> Species:
        key = self.aliases.get(name, name)
        try:
            return self.species[key]
        except KeyError:
            raise ConfigurationError(
                f"unknown species {name!r}; catalog has {', '.join(sorted(self.species))}"
            ) from None

    def get_surface(self, name: str) -> Surface:
        key = self.aliases.get(name, name)
        try:
            return self.surfaces[key]
        except KeyError:
            raise ConfigurationError(
                f"unknown surface {name!r}; catalog has {', '.join(sorted(self.surfaces))}"
            ) from None

    def pair(self, species: str, surface: str) -> AtomSurfacePair:
        return AtomSurfacePair(self.get_species(species), self.get_surface(surface))


DEFAULT_CATALOG = Catalog(
    species={s.name: s for s in (RB87, HE4_METASTABLE, HE4)},
    surfaces={SILICON.name: SILICON},
    aliases={"Rb": "Rb87", "87Rb": "Rb87", "He*": "He4*", "He": "He4", "Silicon": "Si"},
)

_UNITS = {
    "mass": {"": 1.0, "kg": 1.0, "u": AMU, "amu": AMU},
    "static_polarizability": {"": 1.0, "m3": 1.0, "m^3": 1.0, "A3": ANGSTROM3, "A^3": ANGSTROM3,
                              "Å3": ANGSTROM3, "Å^3": ANGSTROM3, "angstrom3": ANGSTROM3},
    "transition_length": {"": 1.0, "m": 1.0, "nm": NM, "um": 1e-6},
    "static_permittivity": {"": 1.0},
    "phi_override": {"": 1.0},
}

_QUANTITY = re.compile(r"^\s*([-+0-9.eE]+)\s*(\S*)\s*$")


def parse_quantity(text: str, field_name: str) -> float:
    """Parse ``"87 u"``, ``"47.25 A^3"``, ``"130 nm"`` or a bare SI number."""
    m = _QUANTITY.match(text)
    if not m:
        raise ConfigurationError(f"cannot parse {field_name} value {text!r}")
    number, unit = m.groups()
    try:
        scale = _UNITS[field_name][unit]
    except KeyError:
        raise ConfigurationError(f"unknown unit {unit!r} for {field_name}") from None
    return float(number) * scale


def load_catalog(path, base: Optional[Catalog] = DEFAULT_CATALOG) -> Catalog:
    """Read species/surface records from an INI-style file.

    Sections are ``[species NAME]`` or ``[surface NAME]``; keys are the
    dataclass field names.  Entries extend (and may replace) ``base``.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigurationError(f"cannot read catalog {path}: {exc}") from exc

    species = dict(base.species) if base else {}
    surfaces = dict(base.surfaces) if base else {}
    aliases = dict(base.aliases) if base else {}
    for section in parser.sections():
        kind, _, name = section.partition(" ")
        name = name.strip()
        rec = parser[section]
        try:
            if kind == "species":
                species[name] = Species(
                    name,
                    parse_quantity(rec["mass"], "mass"),
                    parse_quantity(rec["static_polarizability"], "static_polarizability"),
                    parse_quantity(rec["transition_length"], "transition_length"),
                )
            elif kind == "surface":
                phi_o = rec.get("phi_override")
                surfaces[name] = Surface(
                    name,
                    parse_quantity(rec["static_permittivity"], "static_permittivity"),
                    None if phi_o in (None, "", "none") else parse_quantity(phi_o, "phi_override"),
                )
            else:
                raise ConfigurationError(f"unknown catalog section {section!r}")
        except KeyError as exc:
            raise ConfigurationError(f"catalog section {section!r} lacks field {exc.args[0]}") from None
        except DomainError as exc:
            raise ConfigurationError(str(exc)) from exc
        aliases.pop(name, None)
    return Catalog(species, surfaces, aliases)


def format_catalog(catalog: Catalog) -> str:
    """Serialize a catalog in the format read by :func:`load_catalog` (SI)."""
    lines = []
    for s in catalog.species.values():
        lines += [f"[species {s.name}]",
                  f"mass = {s.mass / AMU:.10g} u",
                  f"static_polarizability = {s.static_polarizability / ANGSTROM3:.10g} A^3",
                  f"transition_length = {s.transition_length / NM:.10g} nm", ""]
    for s in catalog.surfaces.values():
        lines += [f"[surface {s.name}]", f"static_permittivity = {s.static_permittivity:.10g}"]
        if s.phi_override is not None:
            lines.append(f"phi_override = {s.phi_override:.15g}")
        lines.append("")
    return "\n".join(lines)
