"""Thermal atom-surface potential in and out of equilibrium.

The full potential is ``u_full = u_eq(r, T_E) + u_neq(r, T_S, T_E)``:

* ``u_eq`` is the equilibrium Lifshitz potential
  ``-C3(T_E)/r^3 * G((r + l)/lambda_T)``.  Writing it as
  ``-C4/(r^3 (r + l)) * S(x)`` with ``S = x G(x)/a`` keeps the T -> 0
  limit (S -> 1) exact and lets a C4 override rescale the whole curve.
* ``u_neq`` is the non-equilibrium correction.  Its radial integral is
  done analytically; the frequency and angular integrals are nested
  adaptive quadratures.  It tends to ``C2/r^2`` far from the surface.

Two interpolating functions G are provided.  :class:`LifshitzG` is the
Matsubara sum for static alpha and eps (the exact G for this model,
reduced to a single quadrature); :class:`AdditiveG` is the two-term
interpolant ``1 + a/x`` that only matches the asymptotes.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import make_interp_spline
from scipy.optimize import minimize_scalar

from ._kernels import neq_angular
from .errors import DomainError, NumericalError
from .materials import (
    AtomSurfacePair,
    c2,
    c3,
    c4,
    fresnel_kernel,
    phi,
    transition_temperature_limit,
)
from .units import C, HBAR, K_B, NK, thermal_wavelength


# ---------------------------------------------------------------------------
# interpolating function G


class GFunction:
    """Interface of an equilibrium interpolating function G(x), x = r/lambda_T.

    Subclasses implement :meth:`scaled`, the ratio S(x) = x G(x) / a with
    ``a = 3 phi (eps+1) / (2 pi (eps-1))``, so that S(0) = 1.
    """

    eps: float
    phi: float

    @property
    def short_range_coefficient(self) -> float:
        e = self.eps
        return 3.0 * self.phi * (e + 1.0) / (2.0 * math.pi * (e - 1.0))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.scaled(x) * self.short_range_coefficient / x

    def scaled(self, x):
        raise NotImplementedError

    def scaled_fast(self, x):
        """Vectorized S(x); may use a cached interpolant."""
        return self.scaled(x)


@dataclass(frozen=True)
class AdditiveG(GFunction):
    """G(x) = 1 + a/x, giving u_eq = -C3/r^3 - C4/(r^3 (r+l))."""

    eps: float
    phi: float

    def scaled(self, x):
        return 1.0 + np.asarray(x, dtype=float) / self.short_range_coefficient


def _bose_weight(q):
    # y (1 + 4y + y^2) / (1 - y)^4 with y = exp(-q): sum_n n^3 exp(-n q)
    y = math.exp(-q)
    om = -math.expm1(-q)
    return y * (1.0 + 4.0 * y + y * y) / om**4


@dataclass(frozen=True)
class LifshitzG(GFunction):
    """Matsubara-sum G for a frequency-independent alpha and eps.

    G(x) = 1 + (eps+1)/(2(eps-1)) * int_{4 pi x}^inf q^2 w(q) K(q/(4 pi x)) dq

    where w(q) = sum_n n^3 e^{-n q} and K is :func:`fresnel_kernel`.  The
    n = 0 Matsubara term gives the leading 1; for x -> 0 the integral
    reproduces a/x with a built on the exact phi(eps).
    """

    eps: float
    rel_tol: float = 1e-11
    phi: float = field(init=False)

    def __post_init__(self):
        if not self.eps > 1:
            raise DomainError("LifshitzG needs eps > 1")
        object.__setattr__(self, "phi", phi(self.eps))

    def _sum_term(self, x: float) -> float:
        lo = 4.0 * math.pi * x
        scale = 1.0 / lo
        e = self.eps

        def f(q):
            return q * q * _bose_weight(q) * fresnel_kernel(q * scale, e)

        # geometric edges resolve the 6/q^2 behaviour below q ~ 1
        edges = [lo]
        while edges[-1] < 1.0:
            edges.append(min(edges[-1] * 8.0, 1.0))
        top = max(lo, 1.0) + 60.0
        edges.append(top)
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            if b > a:
                total += quad(f, a, b, epsabs=0.0, epsrel=self.rel_tol, limit=200)[0]
        return (e + 1.0) / (2.0 * (e - 1.0)) * total

    def g(self, x: float) -> float:
        return 1.0 + self._sum_term(x)

    def scaled(self, x):
        x = np.asarray(x, dtype=float)
        a = self.short_range_coefficient
        out = np.empty(x.shape)
        for idx, xi in np.ndenumerate(x):
            if not xi > 0:
                raise DomainError("G needs x > 0")
            out[idx] = xi / a * (1.0 + self._sum_term(xi)) if xi < 25.0 else xi / a
        return out if out.ndim else float(out)

    def scaled_fast(self, x):
        return _lifshitz_scaled_interp(self.eps, self.rel_tol)(x)


_X_LO, _X_HI, _X_PER_DECADE = 1e-7, 25.0, 48


@lru_cache(maxsize=16)
def _lifshitz_scaled_interp(eps: float, rel_tol: float):
    g = LifshitzG(eps, rel_tol)
    n = int(math.ceil(math.log10(_X_HI / _X_LO) * _X_PER_DECADE)) + 1
    lx = np.linspace(math.log(_X_LO), math.log(_X_HI), n)
    spl = make_interp_spline(lx, np.log(g.scaled(np.exp(lx))), k=5)
    a = g.short_range_coefficient
    s_lo = float(np.exp(spl(lx[0])))

    def interp(x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        mid = (x >= _X_LO) & (x <= _X_HI)
        out[mid] = np.exp(spl(np.log(x[mid])))
        out[x > _X_HI] = x[x > _X_HI] / a
        # Euler-Maclaurin: S - 1 = O(x^4) as x -> 0
        low = x < _X_LO
        out[low] = 1.0 + (s_lo - 1.0) * (x[low] / _X_LO) ** 4
        return out if out.ndim else float(out)

    return interp


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True, eq=False)
class PotentialTable:
    """Log-grid tabulation of the full potential.

    ``u_values`` holds u_full on ``r_grid``.  Interpolation runs on the two
    smooth pieces: r^2 u_neq as a spline in ln r, plus the equilibrium part
    in closed form through the (cached) G interpolant.  Outside the grid
    u_neq is held constant below ``r_grid[0]`` and continued with a
    C2/r^2 + O(1/r^3) tail above ``r_grid[-1]``.
    """

    r_grid: np.ndarray
    u_values: np.ndarray
    neq_r2: np.ndarray
    order: int = 3
    c2: float = 0.0
    _spline: object = field(default=None, repr=False)

    def __post_init__(self):
        if np.any(np.diff(self.r_grid) <= 0):
            raise DomainError("r_grid must be strictly increasing")
        if self._spline is None and np.any(self.neq_r2 != 0):
            spl = make_interp_spline(np.log(self.r_grid), self.neq_r2, k=self.order)
            object.__setattr__(self, "_spline", spl)

    @property
    def r_min(self) -> float:
        return float(self.r_grid[0])

    @property
    def r_max(self) -> float:
        return float(self.r_grid[-1])

    def neq(self, r):
        """Interpolated u_neq(r)."""
        r = np.asarray(r, dtype=float)
        if self._spline is None:
            return np.zeros(r.shape) if r.ndim else 0.0
        s = np.log(r)
        b = self._spline(np.clip(s, math.log(self.r_min), math.log(self.r_max)))
        lo = r < self.r_min
        b = np.where(lo, self.neq_r2[0] * (r / self.r_min) ** 2, b)
        hi = r > self.r_max
        b = np.where(hi, self.c2 + (self.neq_r2[-1] - self.c2) * self.r_max / np.where(hi, r, 1.0), b)
        out = b / r**2
        return out if out.ndim else float(out)

    def dneq(self, r):
        """d u_neq / dr from the interpolant."""
        r = np.asarray(r, dtype=float)
        if self._spline is None:
            return np.zeros(r.shape) if r.ndim else 0.0
        s = np.log(r)
        sc = np.clip(s, math.log(self.r_min), math.log(self.r_max))
        b = self._spline(sc)
        db = self._spline(sc, 1)
        lo = r < self.r_min
        hi = r > self.r_max
        b = np.where(lo, self.neq_r2[0] * (r / self.r_min) ** 2, b)
        db = np.where(lo, 2.0 * b, db)
        rr = np.where(hi, r, 1.0)
        b_hi = self.c2 + (self.neq_r2[-1] - self.c2) * self.r_max / rr
        b = np.where(hi, b_hi, b)
        db = np.where(hi, -(self.neq_r2[-1] - self.c2) * self.r_max / rr, db)
        out = (db - 2.0 * b) / r**3
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class BarrierInfo:
    r_bar: float
    U_bar: float
    exists: bool

    @property
    def U_bar_nK(self) -> float:
        return self.U_bar / (K_B * NK)


@dataclass(frozen=True, eq=False)
class PotentialModel:
    """An atom-surface pair at surface temperature ``T_S`` and environment
    temperature ``T_E`` (kelvin)."""

    pair: AtomSurfacePair
    T_S: float
    T_E: float
    quad_rel_tol: float = 1e-8
    g_function: Optional[GFunction] = None
    table: Optional[PotentialTable] = None

    def __post_init__(self):
        if not (self.T_S >= 0 and self.T_E >= 0):
            raise DomainError("temperatures must be non-negative")
        if not 0 < self.quad_rel_tol <= 1e-3:
            raise DomainError("quad_rel_tol must lie in (0, 1e-3]")
        if self.g_function is None:
            object.__setattr__(self, "g_function", LifshitzG(self.pair.epsilon))
        limit = transition_temperature_limit(self.pair.species)
        if max(self.T_S, self.T_E) > limit:
            warnings.warn(
                f"temperature above {limit:.3g} K: static-polarizability potentials "
                "are outside their validity range", RuntimeWarning, stacklevel=3)

    # -- derived scalars -----------------------------------------------------
    @property
    def mass(self) -> float:
        return self.pair.species.mass

    @property
    def is_equilibrium(self) -> bool:
        return self.T_S == self.T_E

    @property
    def c4(self) -> float:
        return c4(self.pair)

    @property
    def c3(self) -> float:
        return c3(self.pair, self.T_E)

    @property
    def c2(self) -> float:
        return c2(self.pair, self.T_S, self.T_E)

    @property
    def beta4(self) -> float:
        return math.sqrt(2.0 * self.mass * self.c4) / HBAR

    def with_table(self, table: Optional[PotentialTable]) -> "PotentialModel":
        return replace(self, table=table)

    def with_temperatures(self, T_S: float, T_E: float) -> "PotentialModel":
        return replace(self, T_S=T_S, T_E=T_E, table=None)

    def tabulated(self, r_min=1e-9, r_max=1.0, points_per_decade=64) -> "PotentialModel":
        return self.with_table(tabulate(self, r_min, r_max, points_per_decade))

    # -- equilibrium part ----------------------------------------------------
    def _shape(self, r, fast):
        if self.T_E == 0:
            return np.ones(np.shape(r)) if np.ndim(r) else 1.0
        x = (r + self.pair.species.transition_length) / thermal_wavelength(self.T_E)
        return self.g_function.scaled_fast(x) if fast else self.g_function.scaled(x)

    def _u_eq(self, r, fast):
        r = _positive(r)
        l = self.pair.species.transition_length
        return -self.c4 / (r**3 * (r + l)) * self._shape(r, fast)

    def u_eq(self, r):
        """Equilibrium potential at temperature T_E (J)."""
        return self._u_eq(r, fast=False)

    # -- non-equilibrium part ------------------------------------------------
    def u_neq(self, r):
        """Non-equilibrium correction (J); zero when T_S == T_E."""
        r = _positive(r)
        if self.is_equilibrium:
            return np.zeros(np.shape(r)) if np.ndim(r) else 0.0
        if np.ndim(r) == 0:
            return self.u_neq_with_error(float(r))[0]
        return np.array([self.u_neq_with_error(float(ri))[0] for ri in np.ravel(r)]).reshape(np.shape(r))

    def u_neq_with_error(self, r: float):
        """Return ``(u_neq(r), absolute error estimate)``."""
        if not r > 0:
            raise DomainError("r must be positive")
        if self.is_equilibrium:
            return 0.0, 0.0
        eps = self.pair.epsilon
        b = math.sqrt(eps - 1.0)
        T_S, T_E = self.T_S, self.T_E
        T_max = max(T_S, T_E)
        w0 = K_B * T_max / HBAR
        tol = self.quad_rel_tol
        inner_tol = max(tol * 1e-2, 1e-13)
        a_per_x = 2.0 * r * w0 / C
        rS = T_max / T_S if T_S > 0 else math.inf
        rE = T_max / T_E if T_E > 0 else math.inf

        def angular(a):
            if a > 0 and 60.0 / a < b:
                top = math.asin(60.0 / (a * b))
            else:
                top = 0.5 * math.pi
            return quad(neq_angular, 0.0, top, args=(a, eps), epsabs=0.0, epsrel=inner_tol, limit=200)[0]

        def bose(y):
            return 0.0 if y > 700.0 else 1.0 / math.expm1(y)

        def integrand(x):
            if x == 0.0:
                return 0.0
            return x**3 * (bose(x * rS) - bose(x * rE)) * angular(a_per_x * x)

        # far from the surface the integrand spreads over many decades above
        # x_c = 1/a_per_x; geometric sub-intervals keep QUADPACK out of roundoff
        x_top = _bose_cutoff(tol)
        edges = [0.0]
        e = (min(1.0 / a_per_x, x_top) if a_per_x > 0 else x_top) / 8.0
        while e < x_top:
            edges.append(e)
            e *= 8.0
        edges.append(x_top)
        val = err = 0.0
        failed = False
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            for lo, hi in zip(edges[:-1], edges[1:]):
                v, ev, info, *rest = quad(integrand, lo, hi, epsabs=0.0, epsrel=tol, limit=200, full_output=1)
                val += v
                err += ev
                failed = failed or bool(rest)
        if failed and err > 10 * tol * abs(val):
            raise NumericalError(f"u_neq quadrature at r={r:.3e} m did not converge", error_estimate=err)
        pref = 2.0 * HBAR * self.pair.species.static_polarizability / (math.pi * C**3 * (eps - 1.0))
        scale = pref * w0**4
        return -scale * val, scale * err

    # -- full ----------------------------------------------------------------
    def u_full(self, r):
        """Full potential (J); routed through the table when one is attached."""
        if self.table is not None:
            r = _positive(r)
            return self._u_eq(r, fast=True) + self.table.neq(r)
        return self.u_eq(r) + self.u_neq(r)

    def du_full(self, r):
        """Radial derivative of :meth:`u_full` (J/m)."""
        r = _positive(r)
        if self.table is not None:
            return self._du_eq(r) + self.table.dneq(r)
        h = 1e-5
        return (self.u_full(r * (1 + h)) - self.u_full(r * (1 - h))) / (2 * h * r)

    def _du_eq(self, r):
        h = 1e-5
        return (self._u_eq(r * (1 + h), True) - self._u_eq(r * (1 - h), True)) / (2 * h * r)

    def c2_asymptote(self, r):
        """The C2/r^2 asymptote of the full potential (J)."""
        r = _positive(r)
        return self.c2 / r**2


@lru_cache(maxsize=32)
def _bose_cutoff(tol: float) -> float:
    x = 40.0
    while x**3 * math.exp(-x) > 6.5 * tol * 1e-2:
        x += 1.0
    return x


def _positive(r):
    if np.ndim(r) == 0:
        r = float(r)
        if not r > 0:
            raise DomainError(f"r must be positive, got {r!r}")
        return r
    r = np.asarray(r, dtype=float)
    if not np.all(r > 0):
        raise DomainError("r must be positive")
    return r


def tabulate(model: PotentialModel, r_min: float = 1e-9, r_max: float = 1.0,
             points_per_decade: int = 64, order: int = 3) -> PotentialTable:
    """Tabulate the full potential on a log grid from ``r_min`` to ``r_max``."""
    if not 0 < r_min < r_max:
        raise DomainError("tabulate needs 0 < r_min < r_max")
    if points_per_decade < 16:
        raise DomainError("points_per_decade must be at least 16")
    n = int(math.ceil(math.log10(r_max / r_min) * points_per_decade)) + 1
    r = np.geomspace(r_min, r_max, n)
    neq = model.u_neq(r) if not model.is_equilibrium else np.zeros(n)
    u = model._u_eq(r, fast=True) + neq
    return PotentialTable(r_grid=r, u_values=u, neq_r2=neq * r**2, order=order, c2=model.c2)


def find_barrier(model: PotentialModel, points_per_decade: int = 32) -> BarrierInfo:
    """Locate the repulsive barrier maximum of the full potential.

    Coarse scan on a log grid over [l, 1e3 lambda_{T_S}], then Brent
    (golden-section/parabolic) refinement in ln r to 1e-4 relative.
    """
    if not model.T_E > model.T_S:
        return BarrierInfo(math.nan, math.nan, False)
    l = model.pair.species.transition_length
    lam = thermal_wavelength(model.T_S) if model.T_S > 0 else thermal_wavelength(model.T_E)
    lo, hi = math.log(l), math.log(1e3 * lam)
    s = np.linspace(lo, hi, int((hi - lo) / math.log(10) * points_per_decade) + 1)
    u = np.asarray(model.u_full(np.exp(s)))
    i = int(np.argmax(u))
    if u[i] <= 0 or i == 0 or i == len(s) - 1:
        return BarrierInfo(math.nan, math.nan, False)
    res = minimize_scalar(lambda t: -float(model.u_full(math.exp(t))),
                          bracket=(s[i - 1], s[i], s[i + 1]), method="brent",
                          options={"xtol": 1e-5 / max(1.0, abs(s[i]))})
    r_bar = math.exp(res.x)
    u_bar = -res.fun
    d_lo = model.du_full(r_bar * (1 - 1e-3))
    d_hi = model.du_full(r_bar * (1 + 1e-3))
    if not (u_bar > 0 and d_lo > 0 > d_hi):
        return BarrierInfo(math.nan, math.nan, False)
    return BarrierInfo(r_bar, u_bar, True)


def write_potential_table(table: PotentialTable, path) -> None:
    """Export as CSV with header ``r_m,u_J,u_nK``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r_m", "u_J", "u_nK"])
        for r, u in zip(table.r_grid, table.u_values):
            w.writerow([f"{r:.8e}", f"{u:.8e}", f"{u / (K_B * NK):.8e}"])
