"""Command-line front end: ``qreflect potential|reflect|sweep|fit``.

Settings come from built-in defaults, then an optional ``key = value``
config file (``#`` starts a comment), then command-line flags.  All CSV
output uses ``%.8e`` (nine significant digits) and rows appear in input
order, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .asymptotics import (FIT_HEADER, fit_model, format_fit_row,
                          r2_equilibrium_asymptote, r2_nonequilibrium_asymptote)
from .errors import ConfigurationError, DomainError, FitError, NumericalError, QReflectError
from .materials import DEFAULT_CATALOG, Catalog, load_catalog
from .potential import PotentialModel
from .scattering import (CURVE_HEADER, ScatteringProblem, SolverSettings, curve_rows,
                         reflection_coefficient, reflection_curve)
from .units import HBAR, UM, joule_to_nk

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_FIT = 0, 2, 3, 4

_FLOAT_KEYS = {"ts", "te", "tol", "quad_tol", "velocity", "k_beta4", "v_min", "v_max",
               "k_beta4_min", "k_beta4_max", "t_min", "t_max", "r_min_um", "r_max_um"}
_INT_KEYS = {"points", "jobs", "figure"}
_STR_KEYS = {"species", "surface", "out", "catalog", "sweep", "spacing"}


@dataclass
class RunConfig:
    species: str = "Rb87"
    surface: str = "Si"
    ts: float = 300.0
    te: float = 300.0
    out: Optional[str] = None
    tol: float = 1e-10
    quad_tol: float = 1e-8
    catalog: Optional[str] = None
    jobs: int = 1
    figure: Optional[int] = None
    velocity: Optional[float] = None
    k_beta4: Optional[float] = None
    v_min: Optional[float] = None
    v_max: Optional[float] = None
    k_beta4_min: Optional[float] = None
    k_beta4_max: Optional[float] = None
    sweep: str = "velocity"
    t_min: float = 0.0
    t_max: float = 1200.0
    points: int = 25
    spacing: str = "log"
    r_min_um: float = 0.05
    r_max_um: float = 30.0

    def validate(self):
        if self.ts < 0 or self.te < 0:
            raise ConfigurationError("temperatures must be non-negative")
        if self.points < 1:
            raise ConfigurationError("points must be at least 1")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be at least 1")
        if self.sweep not in ("velocity", "k_beta4", "ts", "te"):
            raise ConfigurationError(f"unknown sweep {self.sweep!r}; use velocity, k_beta4, ts or te")
        if self.spacing not in ("log", "linear"):
            raise ConfigurationError("spacing must be log or linear")
        for lo, hi in (("v_min", "v_max"), ("k_beta4_min", "k_beta4_max"),
                       ("t_min", "t_max"), ("r_min_um", "r_max_um")):
            a, b = getattr(self, lo), getattr(self, hi)
            if a is not None and b is not None and not (b > a or (b == a and self.points == 1)):
                raise ConfigurationError(f"empty range {lo}..{hi}")
        for name in ("v_min", "k_beta4_min", "r_min_um", "velocity", "k_beta4"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ConfigurationError(f"{name} must be positive")
        return self


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file into typed values."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip()
        if not sep or not key:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        try:
            if key in _FLOAT_KEYS:
                out[key] = float(value)
            elif key in _INT_KEYS:
                out[key] = int(value)
            elif key in _STR_KEYS:
                out[key] = value
            else:
                raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        except ValueError:
            raise ConfigurationError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    values = read_config(args.config) if args.config else {}
    for key in _FLOAT_KEYS | _INT_KEYS | _STR_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return replace(cfg, **values).validate()


def _catalog(cfg: RunConfig) -> Catalog:
    return load_catalog(cfg.catalog) if cfg.catalog else DEFAULT_CATALOG


def _model(cfg: RunConfig, catalog: Catalog, T_S=None, T_E=None) -> PotentialModel:
    pair = catalog.pair(cfg.species, cfg.surface)
    return PotentialModel(pair, cfg.ts if T_S is None else T_S, cfg.te if T_E is None else T_E,
                          quad_rel_tol=cfg.quad_tol)


def _settings(cfg: RunConfig) -> SolverSettings:
    return SolverSettings(step_rel_tol=cfg.tol)


def _grid(lo, hi, n, spacing):
    if n == 1:
        return np.array([lo])
    return np.geomspace(lo, hi, n) if spacing == "log" else np.linspace(lo, hi, n)


def _emit(text: str, out: Optional[str]):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


def _csv(header: str, rows) -> str:
    return "\n".join([header, *rows]) + "\n"


# ---------------------------------------------------------------------------
# potential

def potential_csv(model: PotentialModel, r_min: float, r_max: float, n: int) -> str:
    r = np.geomspace(r_min, r_max, n)
    u = joule_to_nk(model.u_full(r))
    asym = not model.is_equilibrium
    header = "r_m,u_nK" + (",u_asymptote_nK" if asym else "")
    rows = []
    for i, ri in enumerate(r):
        row = f"{ri:.8e},{u[i]:.8e}"
        if asym:
            row += f",{joule_to_nk(model.c2_asymptote(ri)):.8e}"
        rows.append(row)
    return _csv(header, rows)


def cmd_potential(cfg: RunConfig) -> int:
    catalog = _catalog(cfg)
    n = cfg.points if cfg.points > 1 else 200
    _emit(potential_csv(_model(cfg, catalog), cfg.r_min_um * UM, cfg.r_max_um * UM, n), cfg.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# reflect

def cmd_reflect(cfg: RunConfig) -> int:
    model = _model(cfg, _catalog(cfg))
    if cfg.velocity is not None:
        v = cfg.velocity
    elif cfg.k_beta4 is not None:
        v = cfg.k_beta4 * HBAR / (model.mass * model.beta4)
    else:
        raise ConfigurationError("reflect needs --velocity or --k-beta4")
    problem = ScatteringProblem.from_velocity(model, v)
    res = reflection_coefficient(problem, _settings(cfg))
    lines = [
        f"species = {model.pair.species.name}",
        f"surface = {model.pair.surface.name}",
        f"T_S_K = {model.T_S:.8e}",
        f"T_E_K = {model.T_E:.8e}",
        f"v_m_per_s = {v:.8e}",
        f"E_nK = {problem.incidence.energy_nk:.8e}",
        f"k_beta4 = {problem.incidence.wavenumber * model.beta4:.8e}",
        f"R2 = {res.probability:.8e}",
        f"R2_raw = {res.raw_probability:.8e}",
        f"r_inner_m = {res.r_inner:.8e}",
        f"r_outer_m = {res.r_outer:.8e}",
        f"badlands_inner = {res.badlands_at_matches[0]:.8e}",
        f"badlands_outer = {res.badlands_at_matches[1]:.8e}",
        f"convergence_estimate = {res.convergence_estimate:.8e}",
        f"steps = {res.steps}",
        f"converged = {int(res.converged)}",
    ]
    _emit("\n".join(lines) + "\n", cfg.out)
    if not res.converged:
        print(f"error: not converged (convergence_estimate = {res.convergence_estimate:.3e})", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

def velocity_sweep_csv(model, velocities, settings, jobs) -> str:
    pts = reflection_curve(model, None, velocities, settings, jobs=jobs)
    return _csv(CURVE_HEADER, curve_rows(pts, model.mass, model.beta4))


def _velocities(cfg: RunConfig, model) -> np.ndarray:
    v_unit = HBAR / (model.mass * model.beta4)
    if cfg.sweep == "k_beta4" or (cfg.k_beta4_min is not None and cfg.v_min is None):
        if cfg.k_beta4_min is None or cfg.k_beta4_max is None:
            raise ConfigurationError("k_beta4 sweep needs k_beta4_min and k_beta4_max")
        return v_unit * _grid(cfg.k_beta4_min, cfg.k_beta4_max, cfg.points, cfg.spacing)
    if cfg.v_min is None or cfg.v_max is None:
        raise ConfigurationError("velocity sweep needs v_min and v_max (m/s)")
    return _grid(cfg.v_min, cfg.v_max, cfg.points, cfg.spacing)


def temperature_sweep_csv(cfg: RunConfig, catalog: Catalog, which: str, fixed: float,
                          temps, k_beta4: float) -> str:
    """|R|^2 at fixed k beta4 while one temperature varies; the potential is
    re-tabulated at every point."""
    rows = []
    settings = _settings(cfg)
    for T in temps:
        T_S, T_E = (T, fixed) if which == "ts" else (fixed, T)
        model = _model(cfg, catalog, T_S, T_E)
        v = k_beta4 * HBAR / (model.mass * model.beta4)
        pts = reflection_curve(model, None, [v], settings)
        rows += [f"{T_S:.8e},{T_E:.8e}," + r for r in curve_rows(pts, model.mass, model.beta4)]
    return _csv("T_S_K,T_E_K," + CURVE_HEADER, rows)


def _temperatures(cfg):
    return np.linspace(cfg.t_min, cfg.t_max, cfg.points)


def cmd_sweep(cfg: RunConfig) -> int:
    catalog = _catalog(cfg)
    if cfg.sweep in ("ts", "te"):
        if cfg.k_beta4 is None:
            raise ConfigurationError("temperature sweeps need a fixed --k-beta4")
        fixed = cfg.te if cfg.sweep == "ts" else cfg.ts
        text = temperature_sweep_csv(cfg, catalog, cfg.sweep, fixed, _temperatures(cfg), cfg.k_beta4)
    else:
        model = _model(cfg, catalog)
        text = velocity_sweep_csv(model, _velocities(cfg, model), _settings(cfg), cfg.jobs)
    _emit(text, cfg.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit

def cmd_fit(cfg: RunConfig) -> int:
    model = _model(cfg, _catalog(cfg))
    velocities = None
    if cfg.v_min is not None or cfg.k_beta4_min is not None:
        velocities = _velocities(cfg, model)
    fit, _ = fit_model(model, _settings(cfg), velocities=velocities)
    _emit(_csv(FIT_HEADER, [format_fit_row(model.pair, model.T_S, model.T_E, fit)]), cfg.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# figure presets

#: (T_S, T_E) pairs of the potential figure, top curve first at 3 um
FIG1_TEMPERATURES = ((300.0, 1200.0), (0.0, 0.0), (300.0, 300.0), (1200.0, 300.0))
FIG2_TEMPERATURES = ((300.0, 1200.0), (0.0, 0.0), (300.0, 300.0))
FIG2_VELOCITIES = (0.02e-3, 2.0e-3)
FIG2_GAMMA, FIG2_B = 6.5, 2.0e3
FIG3_SPECIES = ("Rb87", "He4*", "He4")
FIG3_K_BETA4 = (1e-4, 10.0)
FIG4_K_BETA4 = 0.68
#: (swept temperature, fixed value) for the four temperature curves
FIG4_SWEEPS = (("ts", 1200.0), ("ts", 300.0), ("te", 0.0), ("te", 300.0))


def _tag(T_S, T_E):
    return f"TS{T_S:g}_TE{T_E:g}"


def run_figure(cfg: RunConfig, number: int, out_dir: Path) -> list:
    """Write the CSV datasets behind figure ``number`` into ``out_dir``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    catalog = _catalog(cfg)
    settings = _settings(cfg)
    written = []

    def write(name, text):
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    rb = replace(cfg, species="Rb87", surface="Si")
    if number == 1:
        n = cfg.points if cfg.points > 25 else 200
        for T_S, T_E in FIG1_TEMPERATURES:
            model = _model(rb, catalog, T_S, T_E)
            write(f"fig1_{_tag(T_S, T_E)}.csv", potential_csv(model, cfg.r_min_um * UM, cfg.r_max_um * UM, n))
    elif number == 2:
        v = np.linspace(*FIG2_VELOCITIES, max(cfg.points, 2))
        for T_S, T_E in FIG2_TEMPERATURES:
            model = _model(rb, catalog, T_S, T_E)
            write(f"fig2_{_tag(T_S, T_E)}.csv", velocity_sweep_csv(model, v, settings, cfg.jobs))
        model = _model(rb, catalog, 0.0, 0.0)
        kb4 = model.mass * v * model.beta4 / HBAR
        rows = [f"{vi:.8e},{e:.8e},{n:.8e}" for vi, e, n in
                zip(v, r2_equilibrium_asymptote(kb4), r2_nonequilibrium_asymptote(v, FIG2_B, FIG2_GAMMA))]
        write("fig2_asymptotes.csv", _csv("v_m_per_s,R2_equilibrium,R2_nonequilibrium", rows))
    elif number == 3:
        kb4 = np.geomspace(*FIG3_K_BETA4, max(cfg.points, 2))
        for sp in FIG3_SPECIES:
            model = _model(replace(cfg, species=sp, surface="Si"), catalog, 300.0, 1200.0)
            v = kb4 * HBAR / (model.mass * model.beta4)
            write(f"fig3_{sp.replace('*', 'm')}.csv", velocity_sweep_csv(model, v, settings, cfg.jobs))
    elif number == 4:
        temps = np.linspace(0.0, 1200.0, max(cfg.points, 2))
        for which, fixed in FIG4_SWEEPS:
            other = "TE" if which == "ts" else "TS"
            write(f"fig4_{which}_sweep_{other}{fixed:g}.csv",
                  temperature_sweep_csv(rb, catalog, which, fixed, temps, FIG4_K_BETA4))
    else:
        raise ConfigurationError(f"no figure preset {number}; choose 1, 2, 3 or 4")
    return written


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", metavar="PATH", help="key = value settings file")
    g.add_argument("--catalog", metavar="PATH", help="extra species/surface records")
    g.add_argument("--species")
    g.add_argument("--surface")
    g.add_argument("--ts", type=float, metavar="K", help="surface temperature")
    g.add_argument("--te", type=float, metavar="K", help="environment temperature")
    g.add_argument("--out", metavar="PATH", help="output file (directory with --figure)")
    g.add_argument("--tol", type=float, metavar="X", help="solver step tolerance on |R|^2")
    g.add_argument("--quad-tol", dest="quad_tol", type=float, metavar="X")
    g.add_argument("--figure", type=int, metavar="N", help="regenerate the datasets of figure N")
    g.add_argument("--jobs", type=int, metavar="N", help="worker processes for sweeps")
    g.add_argument("--points", type=int, metavar="N")

    parser = argparse.ArgumentParser(prog="qreflect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("potential", parents=[common], help="tabulate U(r) as CSV")
    p.add_argument("--r-min-um", dest="r_min_um", type=float)
    p.add_argument("--r-max-um", dest="r_max_um", type=float)

    r = sub.add_parser("reflect", parents=[common], help="|R|^2 at one velocity")
    r.add_argument("--velocity", type=float, metavar="M_PER_S")
    r.add_argument("--k-beta4", dest="k_beta4", type=float)

    for name, helptext in (("sweep", "reflection curve as CSV"), ("fit", "fit the low-velocity law")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--v-min", dest="v_min", type=float, metavar="M_PER_S")
        s.add_argument("--v-max", dest="v_max", type=float, metavar="M_PER_S")
        s.add_argument("--k-beta4-min", dest="k_beta4_min", type=float)
        s.add_argument("--k-beta4-max", dest="k_beta4_max", type=float)
        s.add_argument("--spacing", choices=("log", "linear"))
        if name == "sweep":
            s.add_argument("--sweep", choices=("velocity", "k_beta4", "ts", "te"))
            s.add_argument("--k-beta4", dest="k_beta4", type=float, help="fixed value for temperature sweeps")
            s.add_argument("--t-min", dest="t_min", type=float, metavar="K")
            s.add_argument("--t-max", dest="t_max", type=float, metavar="K")
    return parser


_COMMANDS = {"potential": cmd_potential, "reflect": cmd_reflect, "sweep": cmd_sweep, "fit": cmd_fit}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        if cfg.figure is not None:
            out_dir = Path(cfg.out or f"figure{cfg.figure}")
            for path in run_figure(cfg, cfg.figure, out_dir):
                print(path)
            return EXIT_OK
        return _COMMANDS[args.command](cfg)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        est = getattr(exc, "error_estimate", None)
        print(f"error: {exc} (convergence_estimate = {est})", file=sys.stderr)
        return EXIT_CONVERGENCE
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except QReflectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
