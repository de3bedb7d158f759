"""Low-velocity reflection laws and fits of the stretched-exponential form.

Near threshold |R|^2 falls off as exp(-4 k beta4) for a pure -C4/r^4 tail
and as exp(-(b v)^gamma) once a repulsive C2/r^2 tail is present, with
gamma = sqrt(1 + 4 beta0).  The scale b has no closed form and is always
a fit result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, FitError, QReflectError
from .materials import AtomSurfacePair, beta0
from .potential import BarrierInfo
from .scattering import MIN_K_BETA4, ScatteringProblem, SolverSettings, reflection_coefficient
from .units import HBAR, K_B

#: |R|^2 window in which ln(-ln|R|^2) is well conditioned
R2_LOW, R2_HIGH = 1e-6, 0.999
MIN_FIT_POINTS = 5


@dataclass(frozen=True)
class AsymptoteFit:
    gamma_fit: float
    b_fit: float
    fit_window: tuple
    residual: float
    n_points: int

    def __post_init__(self):
        if not self.b_fit > 0:
            raise FitError(f"fit produced b = {self.b_fit!r}")


def r2_equilibrium_asymptote(k_beta4):
    """exp(-4 k beta4), the threshold law of a -C4/r^4 tail."""
    k_beta4 = np.asarray(k_beta4, dtype=float)
    if np.any(k_beta4 < 0):
        raise DomainError("k beta4 must be non-negative")
    out = np.exp(-4.0 * k_beta4)
    return float(out) if out.ndim == 0 else out


def gamma_analytic(pair: AtomSurfacePair, T_S: float, T_E: float) -> float:
    """sqrt(1 + 4 beta0); 1 when the environment is not hotter than the surface."""
    if not (T_S >= 0 and T_E >= 0):
        raise DomainError("temperatures must be non-negative")
    if T_E <= T_S:
        return 1.0
    return math.sqrt(1.0 + 4.0 * beta0(pair, T_S, T_E))


def r2_nonequilibrium_asymptote(v, b: float, gamma: float):
    """exp(-(b v)^gamma)."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise DomainError("velocity must be non-negative")
    if not b > 0:
        raise DomainError("b must be positive")
    if not gamma >= 1:
        raise DomainError("gamma must be at least 1")
    out = np.exp(-((b * v) ** gamma))
    return float(out) if out.ndim == 0 else out


def fit_asymptote(points: Sequence) -> AsymptoteFit:
    """Least-squares line through (ln v, ln(-ln|R|^2)).

    ``points`` is a sequence of (v, |R|^2).  Points outside the open window
    (1e-6, 0.999) are dropped, which also removes exact |R|^2 = 1.
    """
    v = np.array([p[0] for p in points], dtype=float)
    r2 = np.array([p[1] for p in points], dtype=float)
    keep = np.isfinite(r2) & (v > 0) & (r2 > R2_LOW) & (r2 < R2_HIGH)
    if keep.sum() < MIN_FIT_POINTS:
        raise FitError(f"{int(keep.sum())} admissible points; the fit needs at least {MIN_FIT_POINTS}")
    x = np.log(v[keep])
    y = np.log(-np.log(r2[keep]))
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    if not slope > 0:
        raise FitError(f"fitted exponent {slope:.4g} is not positive")
    return AsymptoteFit(
        gamma_fit=float(slope),
        b_fit=float(math.exp(intercept / slope)),
        fit_window=(float(v[keep].min()), float(v[keep].max())),
        residual=float(math.sqrt(np.mean(resid**2))),
        n_points=int(keep.sum()),
    )


@dataclass(frozen=True)
class BarrierScales:
    v_bar: float
    k_beta4_bar: float
    T_bar: float


def barrier_scales(pair: AtomSurfacePair, barrier: BarrierInfo, mass: Optional[float] = None) -> BarrierScales:
    """Velocity, k beta4 and temperature of an atom whose energy equals U_bar."""
    if not barrier.exists:
        raise DomainError("the potential has no barrier")
    mass = pair.species.mass if mass is None else mass
    v_bar = math.sqrt(2.0 * barrier.U_bar / mass)
    kb4 = mass * v_bar * pair.beta4 / HBAR
    return BarrierScales(float(v_bar), float(kb4), float(barrier.U_bar) / K_B)


def threshold_velocity(model, settings: SolverSettings = SolverSettings(), r2_level: float = R2_HIGH,
                       k_beta4_start: float = 1e-3) -> float:
    """Velocity at which |R|^2 first drops to ``r2_level``, by bracketing in
    ln v and bisection."""
    model = model.tabulated() if getattr(model, "table", True) is None else model
    v_unit = HBAR / (model.mass * model.beta4)  # v at k beta4 = 1
    v_min = MIN_K_BETA4 * v_unit

    def f(lnv):
        res = reflection_coefficient(ScatteringProblem.from_velocity(model, math.exp(lnv)), settings)
        return math.log(res.probability) - math.log(r2_level)

    lo = math.log(k_beta4_start * v_unit)
    flo = f(lo)
    while flo < 0:
        lo -= math.log(3.0)
        if lo < math.log(v_min):
            raise FitError("|R|^2 is below the fit window even at the smallest admissible velocity")
        flo = f(lo)
    hi = lo + math.log(1.5)
    while f(hi) > 0:
        if hi > math.log(1e3 * v_unit):
            raise FitError("|R|^2 never leaves the near-unity region")
        lo, hi = hi, hi + math.log(1.5)
    return math.exp(brentq(f, lo, hi, xtol=1e-4))


def fit_window_velocities(v_threshold: float, n_points: int = 6, span: float = 1.5) -> np.ndarray:
    """Geometric grid just above the threshold velocity."""
    return np.geomspace(1.01 * v_threshold, span * v_threshold, n_points)


def fit_model(model, settings: SolverSettings = SolverSettings(), velocities: Optional[Sequence[float]] = None,
              n_points: int = 6, span: float = 1.5):
    """Compute a short |R|^2 curve near threshold and fit it.

    Returns (AsymptoteFit, list of (v, |R|^2)).  Without explicit
    ``velocities`` the window starts where |R|^2 crosses 0.999.
    """
    model = model.tabulated() if getattr(model, "table", True) is None else model
    if velocities is None:
        velocities = fit_window_velocities(threshold_velocity(model, settings), n_points, span)
    pts = []
    for v in velocities:
        try:
            res = reflection_coefficient(ScatteringProblem.from_velocity(model, float(v)), settings)
        except QReflectError:
            continue
        pts.append((float(v), res.probability))
    return fit_asymptote(pts), pts


FIT_HEADER = "species,surface,T_S,T_E,gamma_fit,b_fit_s_per_m,gamma_analytic,residual"


def format_fit_row(pair: AtomSurfacePair, T_S: float, T_E: float, fit: AsymptoteFit) -> str:
    g = gamma_analytic(pair, T_S, T_E)
    return ",".join([pair.species.name, pair.surface.name] +
                    [f"{x:.8e}" for x in (T_S, T_E, fit.gamma_fit, fit.b_fit, g, fit.residual)])
