"""One-dimensional scattering off the atom-surface potential.

The stationary equation u'' = (2m/hbar^2)(U - E) u is integrated from a
point deep inside the attractive well, where an incoming (surface-bound)
WKB wave is imposed, out to a point far away where the solution is
decomposed into incoming and outgoing WKB waves.  Everything the surface
does at short range is absorbed: nothing comes back from r -> 0.

Integration runs in s = ln r on the Liouville-transformed function
w = u / sqrt(r), which obeys w'' = (r^2 k2(r) + 1/4) w.  Each step is the
closed-form exponential of the fourth-order Magnus generator, so the
propagator is a product of real 2x2 matrices with unit determinant; the
product is formed by pairwise reduction.  The step count is doubled until
the Richardson estimate of the |R|^2 error drops below the tolerance.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, NumericalError, QReflectError
from .potential import PotentialModel
from .units import HBAR, Incidence, incidence_from_velocity

#: below this k beta4 the low-velocity laws are the better tool
MIN_K_BETA4 = 1e-5


class FunctionPotential:
    """Wrap plain callables ``u(r)`` (and optionally ``du(r)``) as a potential."""

    def __init__(self, u: Callable, du: Optional[Callable] = None, beta4: Optional[float] = None):
        self._u = u
        self._du = du
        self.beta4 = beta4

    def u_full(self, r):
        return self._u(r)

    def du_full(self, r):
        if self._du is not None:
            return self._du(r)
        h = 1e-6
        return (self._u(r * (1 + h)) - self._u(r * (1 - h))) / (2 * h * r)


@dataclass(frozen=True)
class SolverSettings:
    badlands_threshold: float = 1e-3
    inner_depth_ratio: float = 100.0
    outer_smallness: float = 1e-6
    step_rel_tol: float = 1e-10
    convergence_threshold: float = 1e-4
    check_convergence: bool = True
    max_steps: int = 2**21
    scan_points_per_decade: int = 40
    scan_r_min: float = 1e-20
    scan_r_max: float = 1e6

    def __post_init__(self):
        for name in ("badlands_threshold", "inner_depth_ratio", "outer_smallness", "step_rel_tol"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if not self.badlands_threshold < 1:
            raise ConfigurationError("badlands_threshold must be below 1")


@dataclass(frozen=True)
class ScatteringProblem:
    model: object
    mass: float
    incidence: Incidence

    def __post_init__(self):
        if not self.incidence.energy > 0:
            raise DomainError("scattering needs E_i > 0; use the low-velocity asymptotes at E_i = 0")
        if not self.mass > 0:
            raise DomainError("mass must be positive")

    @classmethod
    def from_velocity(cls, model, v: float, mass: Optional[float] = None) -> "ScatteringProblem":
        mass = model.mass if mass is None else mass
        return cls(model, mass, incidence_from_velocity(v, mass))

    @property
    def energy(self) -> float:
        return self.incidence.energy

    def k2(self, r):
        """(2m/hbar^2)(E - U(r)), the squared local wavenumber."""
        return 2.0 * self.mass * (self.energy - np.asarray(self.model.u_full(r))) / HBAR**2


class LocalMomentum(NamedTuple):
    p: np.ndarray
    forbidden: np.ndarray


@dataclass(frozen=True)
class ReflectionResult:
    amplitude: complex
    probability: float
    raw_probability: float
    r_inner: float
    r_outer: float
    badlands_at_matches: tuple
    convergence_estimate: float
    converged: bool
    steps: int
    step_error: float


def local_momentum(problem: ScatteringProblem, r) -> LocalMomentum:
    """|p(r)| = sqrt(2m|E - U|) and a flag marking classically forbidden r."""
    k2 = problem.k2(r)
    return LocalMomentum(HBAR * np.sqrt(np.abs(k2)), k2 < 0)


def _badlands_from(mass, k2, du):
    p = HBAR * np.sqrt(k2)
    return HBAR * mass * np.abs(du) / p**3


def badlands(problem: ScatteringProblem, r):
    """|d(hbar/p)/dr| = hbar m |U'| / p^3; small where WKB is accurate."""
    k2 = problem.k2(r)
    if np.any(k2 <= 0):
        raise DomainError("badlands is defined in the classically allowed region only")
    return _badlands_from(problem.mass, k2, np.asarray(problem.model.du_full(r)))


def find_matching_points(problem: ScatteringProblem, settings: SolverSettings):
    """Pick (r_inner, r_outer) by scanning a log grid.

    r_inner is the largest radius such that every grid point below it is
    classically allowed, deeper than ``inner_depth_ratio * E`` and has
    badlands < threshold; r_outer is the smallest radius with the mirror
    conditions (|U| < ``outer_smallness * E``) holding all the way out.
    """
    n = int(math.log10(settings.scan_r_max / settings.scan_r_min) * settings.scan_points_per_decade) + 1
    r = np.geomspace(settings.scan_r_min, settings.scan_r_max, n)
    E = problem.energy
    U = np.asarray(problem.model.u_full(r))
    k2 = 2.0 * problem.mass * (E - U) / HBAR**2
    allowed = k2 > 0
    B = np.full(n, np.inf)
    B[allowed] = _badlands_from(problem.mass, k2[allowed], np.asarray(problem.model.du_full(r[allowed])))
    thr = settings.badlands_threshold
    ok_in = allowed & (U < -settings.inner_depth_ratio * E) & (B < thr)
    ok_out = allowed & (np.abs(U) < settings.outer_smallness * E) & (B < thr)
    if not ok_in[0]:
        raise ConfigurationError("no admissible inner matching point; lower scan_r_min")
    if not ok_out[-1]:
        raise ConfigurationError("no admissible outer matching point; raise scan_r_max")
    i = int(np.argmin(ok_in)) - 1 if not ok_in.all() else n - 1
    j = n - int(np.argmin(ok_out[::-1]))
    if j >= n or i >= j:
        raise ConfigurationError("matching points overlap; the potential is WKB-exact everywhere")
    return float(r[i]), float(r[j])


_G1 = 0.5 - math.sqrt(3.0) / 6.0
_G2 = 0.5 + math.sqrt(3.0) / 6.0


def _magnus_steps(kap1, kap2, h):
    """exp of the 4th-order Magnus generator for w'' = kappa(s) w."""
    d = math.sqrt(3.0) * h * h * (kap1 - kap2) / 12.0
    b = 0.5 * h * (kap1 + kap2)
    q2 = d * d + h * b
    q = np.sqrt(np.abs(q2))
    grow = q2 >= 0
    qs = np.where(q > 0, q, 1.0)
    ch = np.where(grow, np.cosh(np.minimum(q, 700.0)), np.cos(q))
    sh = np.where(q > 0, np.where(grow, np.sinh(np.minimum(q, 700.0)), np.sin(q)) / qs, 1.0)
    M = np.empty((len(d), 2, 2))
    M[:, 0, 0] = ch + sh * d
    M[:, 0, 1] = sh * h
    M[:, 1, 0] = sh * b
    M[:, 1, 1] = ch - sh * d
    return M


def _chain(M):
    """M[-1] @ ... @ M[0] by pairwise reduction."""
    while len(M) > 1:
        if len(M) % 2:
            M = np.concatenate([M, np.eye(2)[None]], axis=0)
        M = np.matmul(M[1::2], M[0::2])
    return M[0]


def _wkb_wave(problem, r, direction):
    """WKB wave (u, du/dr) at r with unit phase reference; direction -1 is
    surface-bound, +1 outgoing."""
    k = math.sqrt(float(problem.k2(r)))
    dk = -problem.mass * float(problem.model.du_full(r)) / (HBAR**2 * k)
    u = 1.0 / math.sqrt(k)
    return u, u * (direction * 1j * k - 0.5 * dk / k)


def _propagate(problem, r_in, r_out, n_steps):
    s0, s1 = math.log(r_in), math.log(r_out)
    h = (s1 - s0) / n_steps
    s = s0 + h * np.arange(n_steps)

    def kappa(ss):
        rr = np.exp(ss)
        return -(rr * rr) * problem.k2(rr) + 0.25

    P = _chain(_magnus_steps(kappa(s + _G1 * h), kappa(s + _G2 * h), h))
    u0, du0 = _wkb_wave(problem, r_in, -1)
    sq = math.sqrt(r_in)
    w = np.array([u0 / sq, (r_in * du0 - 0.5 * u0) / sq])
    w = P @ w
    sq = math.sqrt(r_out)
    u, du = w[0] * sq, (w[1] + 0.5 * w[0]) / sq
    ui, dui = _wkb_wave(problem, r_out, -1)
    uo, duo = _wkb_wave(problem, r_out, +1)
    inc, out = np.linalg.solve(np.array([[ui, uo], [dui, duo]]), np.array([u, du]))
    return out / inc


def _solve(problem, r_in, r_out, tol, max_steps):
    n = max(2000, int(200 * math.log(r_out / r_in)))
    amp = _propagate(problem, r_in, r_out, n)
    err = math.inf
    while n < max_steps:
        n *= 2
        new = _propagate(problem, r_in, r_out, n)
        # fourth-order scheme: error of the finer result ~ difference / 15
        err = abs(abs(new) ** 2 - abs(amp) ** 2) / 15.0
        amp = new
        if err < tol:
            break
    if not np.isfinite(amp) or err > 1e-6:
        raise NumericalError(f"propagation did not converge with {n} steps", error_estimate=err)
    return amp, n, err


def _prepare(model):
    if isinstance(model, PotentialModel) and model.table is None:
        return model.tabulated()
    return model


def reflection_coefficient(problem: ScatteringProblem, settings: SolverSettings = SolverSettings()) -> ReflectionResult:
    """Quantum-reflection amplitude and probability for one incidence energy."""
    model = _prepare(problem.model)
    if model is not problem.model:
        problem = ScatteringProblem(model, problem.mass, problem.incidence)
    beta4 = getattr(model, "beta4", None)
    if beta4 and problem.incidence.wavenumber * beta4 < MIN_K_BETA4:
        raise DomainError(
            f"k_i beta4 = {problem.incidence.wavenumber * beta4:.2e} < {MIN_K_BETA4:g}: "
            "use qreflect.asymptotics for the v -> 0 limit")
    r_in, r_out = find_matching_points(problem, settings)
    amp, steps, step_err = _solve(problem, r_in, r_out, settings.step_rel_tol, settings.max_steps)
    raw = abs(amp) ** 2
    estimate = 0.0
    if settings.check_convergence:
        amp2, _, _ = _solve(problem, 0.5 * r_in, 2.0 * r_out, 0.5 * settings.step_rel_tol, settings.max_steps)
        estimate = abs(abs(amp2) ** 2 - raw)
    b_in = float(badlands(problem, r_in))
    b_out = float(badlands(problem, r_out))
    return ReflectionResult(
        amplitude=complex(amp),
        probability=min(max(raw, 0.0), 1.0),
        raw_probability=raw,
        r_inner=r_in,
        r_outer=r_out,
        badlands_at_matches=(b_in, b_out),
        convergence_estimate=estimate,
        converged=estimate < settings.convergence_threshold,
        steps=steps,
        step_error=step_err,
    )


@dataclass(frozen=True)
class CurvePoint:
    velocity: float
    probability: float
    converged: bool
    result: Optional[ReflectionResult] = None
    error: Optional[str] = None


def _curve_point(args):
    model, mass, v, settings = args
    try:
        res = reflection_coefficient(ScatteringProblem.from_velocity(model, v, mass), settings)
    except QReflectError as exc:
        return CurvePoint(v, math.nan, False, None, f"{type(exc).__name__}: {exc}")
    return CurvePoint(v, res.probability, res.converged, res)


def reflection_curve(model, mass: Optional[float], velocities: Sequence[float],
                     settings: SolverSettings = SolverSettings(), jobs: int = 1) -> list:
    """|R|^2 at each velocity; failures are recorded per point, not raised."""
    velocities = [float(v) for v in velocities]
    if any(not v > 0 for v in velocities):
        raise DomainError("velocities must be positive")
    if any(b < a for a, b in zip(velocities, velocities[1:])):
        raise DomainError("velocities must be sorted")
    model = _prepare(model)
    mass = model.mass if mass is None else mass
    tasks = [(model, mass, v, settings) for v in velocities]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_curve_point, tasks))
    return [_curve_point(t) for t in tasks]


CURVE_HEADER = "v_m_per_s,E_nK,k_beta4,R2,converged"


def curve_rows(points: Sequence[CurvePoint], mass: float, beta4: float) -> list:
    """CSV rows (without header) for a reflection curve."""
    rows = []
    for p in points:
        inc = incidence_from_velocity(p.velocity, mass)
        rows.append(f"{p.velocity:.8e},{inc.energy_nk:.8e},{inc.wavenumber * beta4:.8e},"
                    f"{p.probability:.8e},{int(p.converged)}")
    return rows
