"""Plain-text scenario configuration and the shipped presets.

The format is one ``key = value`` per line; ``#`` starts a comment. Unknown
keys are rejected. Values of a preset are used as defaults and the file
overrides them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fields as fl
from . import leslie as ls
from . import oseen_frank as of
from . import tensor_kernel as tk
from . import young_measure as ym
from .solver import Scenario, SolverConfig


class ConfigError(ValueError):
    """Invalid configuration file or value."""


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    return parse


def _optional_float(s):
    return None if s in ("auto", "none") else float(s)


SCHEMA = {
    "grid.n": int,
    "grid.L": float,
    "grid.dim": int,
    "grid.backend": _choice("spectral", "central"),
    "frank.K1": float,
    "frank.K2": float,
    "frank.K3": float,
    "leslie.mu1": float,
    "leslie.mu2": float,
    "leslie.mu3": float,
    "leslie.mu4": float,
    "leslie.mu5": float,
    "leslie.mu6": float,
    "leslie.lambda": float,
    "solver.dt": float,
    "solver.t_end": float,
    "solver.scheme": _choice("rk2", "semi-implicit"),
    "solver.renormalize_every": int,
    "solver.cfl": float,
    "solver.elastic_form": _choice("molecular", "ericksen"),
    "init.preset": _choice("uniform", "random-director", "taylor-green"),
    "init.seed": int,
    "init.amplitude": float,
    "init.velocity": float,
    "init.kmax": int,
    "init.epsilon": float,
    "forcing.preset": _choice("none", "taylor-green"),
    "forcing.amplitude": float,
    "output.cadence": int,
    "output.snapshots": _choice("yes", "no"),
    "measure.defect_mass": float,
    "measure.oscillation": float,
    "certify.zeta": float,
    "certify.cdelta": _optional_float,
    "certify.c": float,
    "certify.tol": float,
}

DEFAULTS = {
    "grid.n": 16,
    "grid.L": 2 * math.pi,
    "grid.dim": 2,
    "grid.backend": "spectral",
    "frank.K1": 1.0,
    "frank.K2": 0.8,
    "frank.K3": 1.2,
    # dissipative and satisfying Parodi's relation λ = μ2 + μ3
    "leslie.mu1": 0.5,
    "leslie.mu2": -0.3,
    "leslie.mu3": 0.1,
    "leslie.mu4": 1.0,
    "leslie.mu5": 0.3,
    "leslie.mu6": 0.2,
    "leslie.lambda": -0.2,
    "solver.dt": 1e-3,
    "solver.t_end": 0.1,
    "solver.scheme": "rk2",
    "solver.renormalize_every": 1,
    "solver.cfl": 0.4,
    "solver.elastic_form": "molecular",
    "init.preset": "uniform",
    "init.seed": 0,
    "init.amplitude": 0.4,
    "init.velocity": 0.0,
    "init.kmax": 1,
    "init.epsilon": 0.0,
    "forcing.preset": "none",
    "forcing.amplitude": 0.0,
    "output.cadence": 10,
    "output.snapshots": "yes",
    "measure.defect_mass": 0.0,
    "measure.oscillation": 0.0,
    "certify.zeta": 0.5,
    "certify.cdelta": None,
    "certify.c": 1.0,
    "certify.tol": 1e-8,
}

PRESETS = {
    "quiescent": {"init.preset": "uniform", "solver.t_end": 0.1},
    "relaxing-director": {"init.preset": "random-director", "solver.t_end": 0.2},
    "taylor-green-coupled": {
        "init.preset": "taylor-green", "init.velocity": 0.5, "solver.t_end": 0.2,
        "forcing.preset": "taylor-green", "forcing.amplitude": 0.5,
    },
    "perturbed-twin": {
        "init.preset": "random-director", "init.velocity": 0.3, "init.epsilon": 1e-2,
        "solver.t_end": 0.5,
    },
}


def parse_text(text, source="<string>"):
    """Raw ``{key: string}`` mapping from config text."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key != "preset" and key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def build(raw=None, preset=None, overrides=None):
    """Typed configuration from defaults, a preset, raw file values and overrides."""
    raw = dict(raw or {})
    preset = preset or raw.pop("preset", None)
    raw.pop("preset", None)
    cfg = dict(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        cfg.update(PRESETS[preset])
    for key, value in raw.items():
        try:
            cfg[key] = SCHEMA[key](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None
    cfg.update(overrides or {})
    cfg["preset"] = preset
    validate(cfg)
    return cfg


def load(path, preset=None, overrides=None):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return build(parse_text(text, str(path)), preset, overrides)


def dump(cfg):
    """Config text that :func:`load` maps back to ``cfg``."""
    lines = []
    if cfg.get("preset"):
        lines.append(f"preset = {cfg['preset']}")
    for key in SCHEMA:
        value = cfg[key]
        value = "auto" if value is None else (repr(value) if isinstance(value, float) else value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def validate(cfg):
    if cfg["grid.n"] < 4:
        raise ConfigError("grid.n must be at least 4")
    if cfg["grid.dim"] not in (2, 3):
        raise ConfigError("grid.dim must be 2 or 3")
    if not cfg["grid.L"] > 0:
        raise ConfigError("grid.L must be positive")
    if cfg["output.cadence"] < 1:
        raise ConfigError("output.cadence must be >= 1")
    if not 0 < cfg["certify.zeta"] < 1:
        raise ConfigError("certify.zeta must lie in (0, 1)")
    if cfg["measure.defect_mass"] < 0:
        raise ConfigError("measure.defect_mass must be nonnegative")
    try:
        frank_constants(cfg)
        leslie_coefficients(cfg).require_dissipative()
        solver_config(cfg).validate()
    except of.ValidationError as exc:
        raise ConfigError(str(exc)) from None


def frank_constants(cfg):
    return of.FrankConstants(cfg["frank.K1"], cfg["frank.K2"], cfg["frank.K3"])


def leslie_coefficients(cfg):
    return ls.LeslieCoefficients(*(cfg[f"leslie.mu{i}"] for i in range(1, 7)), cfg["leslie.lambda"])


def solver_config(cfg):
    return SolverConfig(dt=cfg["solver.dt"], t_end=cfg["solver.t_end"], scheme=cfg["solver.scheme"],
                        renormalize_every=cfg["solver.renormalize_every"], cfl=cfg["solver.cfl"],
                        elastic_form=cfg["solver.elastic_form"], cadence=cfg["output.cadence"])


def make_grid(cfg):
    n, L, backend = cfg["grid.n"], cfg["grid.L"], cfg["grid.backend"]
    if cfg["grid.dim"] == 2:
        return fl.Grid.planar(n, L, backend)
    return fl.Grid((n, n, n), (L, L, L), backend)


def _taylor_green(grid, amplitude):
    x, y, _ = grid.coordinates()
    s = 2 * np.pi / grid.L[0]
    return amplitude * np.stack([np.sin(s * x) * np.cos(s * y),
                                 -np.cos(s * x) * np.sin(s * y), np.zeros_like(x)], axis=-1)


def initial_fields(cfg, grid):
    rng = np.random.default_rng(cfg["init.seed"])
    kind = cfg["init.preset"]
    if kind == "uniform":
        d = np.broadcast_to([0.0, 0.0, 1.0], grid.n + (3,)).copy()
    else:
        d = fl.random_director(grid, rng, kmax=cfg["init.kmax"], amplitude=cfg["init.amplitude"])
    if kind == "taylor-green":
        v = _taylor_green(grid, cfg["init.velocity"])
    elif cfg["init.velocity"] > 0:
        v = fl.random_field(grid, rng, kmax=cfg["init.kmax"], amplitude=cfg["init.velocity"])
    else:
        v = np.zeros(grid.n + (3,))
    return grid.project_divfree(v), d


def perturbation(grid, seed, kmax=2):
    """Unit-amplitude smooth director perturbation used for ε-runs."""
    return fl.random_field(grid, np.random.default_rng(seed), kmax=kmax)


def perturb_director(d, psi, eps):
    return fl.normalize(d + eps * psi) if eps else d.copy()


def forcing(cfg):
    if cfg["forcing.preset"] == "none" or cfg["forcing.amplitude"] == 0:
        return None
    amp = cfg["forcing.amplitude"]
    nu = 0.5 * cfg["leslie.mu4"]

    def g(t, grid):
        # keeps the Taylor-Green vortex alive against viscous decay
        s = 2 * np.pi / grid.L[0]
        return 2 * nu * s * s * _taylor_green(grid, amp)
    return g


@dataclass
class Setup:
    cfg: dict
    grid: fl.Grid
    reference: Scenario
    candidate: Scenario
    solver: SolverConfig


def setup(cfg):
    """Reference scenario and the candidate (ε-perturbed director, same velocity)."""
    grid = make_grid(cfg)
    frank, coeffs = frank_constants(cfg), leslie_coefficients(cfg)
    v0, d0 = initial_fields(cfg, grid)
    g = forcing(cfg)
    ref = Scenario(grid, frank, coeffs, v0, d0, g, label=cfg.get("preset") or "custom")
    psi = perturbation(grid, cfg["init.seed"] + 1)
    cand = Scenario(grid, frank, coeffs, v0.copy(), perturb_director(d0, psi, cfg["init.epsilon"]),
                    g, label="candidate")
    return Setup(cfg, grid, ref, cand, solver_config(cfg))


def injected_measures(cfg, grid, traj):
    """Candidate states carrying the configured oscillation and defect measures.

    The defect density grows linearly from zero at t=0 to
    ``measure.defect_mass`` at ``solver.t_end``; oscillation atoms are
    ``∇d ± a P`` for a fixed random pattern P of unit maximal size.
    """
    from .rel_energy import Candidate

    mass, amp = cfg["measure.defect_mass"], cfg["measure.oscillation"]
    if mass == 0 and amp == 0:
        return None
    rng = np.random.default_rng(cfg["init.seed"] + 2)
    P = rng.normal(size=grid.n + (3, 3))
    P /= np.max(tk.norm(P, 2))
    G = rng.normal(size=(3, 3, 3))
    t_end = max(cfg["solver.t_end"], 1e-300)
    out = []
    for s in traj.states:
        S = grid.grad(s.d)
        gym = ym.oscillating_pair(S, amp * P) if amp else ym.dirac_measure(S)
        defect = ym.uniform_defect(grid.n, mass * s.t / t_end, G) if mass else None
        out.append(Candidate(s.v, s.d, gym, defect))
    return out
