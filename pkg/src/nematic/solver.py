"""Time integration of the Ericksen-Leslie system on a periodic grid.

The director equation is advanced in the explicit form

    ∂t d = -(∇d) v + skw(∇v) d - (I - d⊗d)(λ sym(∇v) d + q),

which is the representative of the cross-product equation tangent to the
sphere. The velocity right-hand side is Leray projected, so the pressure is
never formed explicitly.

By default the elastic force enters the momentum balance as ``(∇d)ᵀ q``.
It differs from ``-div T^E`` by the gradient ``-∇F`` (removed by the
projection) and makes the discrete energy exchange between flow and director
cancel exactly; ``elastic_form="ericksen"`` uses ``-div T^E`` literally.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import leslie as ls
from . import oseen_frank as of
from . import tensor_kernel as tk
from .fields import Grid, normalize, variational_q

log = logging.getLogger(__name__)

SCHEMES = ("rk2", "semi-implicit")


class NumericalAbort(RuntimeError):
    """Raised when a run must stop (CFL violation, non-finite values)."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


@dataclass
class SimulationState:
    t: float
    v: np.ndarray
    d: np.ndarray
    p: Optional[np.ndarray] = None

    def copy(self):
        return SimulationState(self.t, self.v.copy(), self.d.copy(),
                               None if self.p is None else self.p.copy())


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-3
    t_end: float = 0.1
    scheme: str = "rk2"
    renormalize_every: int = 1
    cfl: float = 0.4
    unit_tol: float = 1e-10
    div_tol: float = 1e-9
    elastic_form: str = "molecular"
    cadence: int = 1

    def validate(self):
        if not self.dt > 0:
            raise of.ValidationError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise of.ValidationError(f"t_end must be nonnegative, got {self.t_end}")
        if self.scheme not in SCHEMES:
            raise of.ValidationError(f"unknown scheme {self.scheme!r}")
        if self.elastic_form not in ("molecular", "ericksen"):
            raise of.ValidationError(f"unknown elastic form {self.elastic_form!r}")
        if self.renormalize_every < 1 or self.cadence < 1:
            raise of.ValidationError("renormalize_every and cadence must be >= 1")
        return self

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))


Forcing = Callable[[float, Grid], np.ndarray]


@dataclass
class Scenario:
    grid: Grid
    frank: of.FrankConstants
    leslie: ls.LeslieCoefficients
    v0: np.ndarray
    d0: np.ndarray
    forcing: Optional[Forcing] = None
    label: str = "custom"
    director_source: Optional[Forcing] = None
    tensors: Optional[of.ElasticTensors] = None

    def __post_init__(self):
        if self.tensors is None:
            self.tensors = self.frank.tensors()

    def validate(self, unit_tol=1e-10, div_tol=1e-9):
        expected = self.grid.n + (3,)
        for name, arr in (("v0", self.v0), ("d0", self.d0)):
            if arr.shape != expected:
                raise of.ValidationError(f"{name} has shape {arr.shape}, expected {expected}")
            if not np.all(np.isfinite(arr)):
                raise of.ValidationError(f"{name} has non-finite entries")
        ls.check_unit(self.d0, unit_tol)
        div = np.max(np.abs(self.grid.div(self.v0)))
        if div > div_tol:
            raise of.ValidationError(f"v0 is not divergence free (max |div| {div:.3e})")
        return self

    def initial_state(self):
        return SimulationState(0.0, self.v0.copy(), self.d0.copy())


# -- right-hand sides ------------------------------------------------------------

def director_rhs(grid, v, d, et, coeffs, q=None, grad_v=None, grad_d=None):
    if q is None:
        q = variational_q(grid, d, et, check=False)
    grad_v = grid.grad(v) if grad_v is None else grad_v
    grad_d = grid.grad(d) if grad_d is None else grad_d
    r = coeffs.lam * tk.matvec(tk.sym(grad_v), d) + q
    tangential = r - tk.dot(d, r)[..., None] * d
    return -tk.matvec(grad_d, v) + tk.matvec(tk.skw(grad_v), d) - tangential


def director_residual(d, dt_d, v, grad_d, grad_v, q, lam):
    """``d × (∂t d + (∇d) v - skw(∇v) d + λ sym(∇v) d + q)``."""
    inner = (
        dt_d
        + tk.matvec(grad_d, v)
        - tk.matvec(tk.skw(grad_v), d)
        + lam * tk.matvec(tk.sym(grad_v), d)
        + q
    )
    return tk.cross(d, inner)


def advection(grid, v, grad_v=None):
    """Skew-symmetric form ``½((∇v) v + div(v⊗v))`` of ``(v·∇) v``."""
    grad_v = grid.grad(v) if grad_v is None else grad_v
    return 0.5 * (tk.matvec(grad_v, v) + grid.div(tk.outer(v, v)))


def velocity_forces(grid, v, d, et, coeffs, g=None, q=None, elastic_form="molecular",
                    grad_v=None, grad_d=None):
    """Unprojected momentum right-hand side ``g - (v·∇)v - div T^E + div T^L``."""
    grad_v = grid.grad(v) if grad_v is None else grad_v
    grad_d = grid.grad(d) if grad_d is None else grad_d
    if q is None:
        q = variational_q(grid, d, et, check=False)
    if elastic_form == "molecular":
        # -div T^E = (∇d)ᵀ q - ∇F; the gradient is absorbed by the pressure
        elastic = tk.matvec(np.swapaxes(grad_d, -1, -2), q)
    else:
        elastic = -grid.div(ls.ericksen_stress(grad_d, of.F_S_tensor(d, grad_d, et)))
    e = ls.corotational_rate_from_q(d, grad_v, q, coeffs)
    TL = ls.leslie_stress(d, e, grad_v, coeffs, check=False)
    f = -advection(grid, v, grad_v) + elastic + grid.div(TL)
    if g is not None:
        f = f + g
    return f


def velocity_rhs(grid, v, d, et, coeffs, g=None, q=None, elastic_form="molecular"):
    """Projected momentum right-hand side and the pressure it implies."""
    f = velocity_forces(grid, v, d, et, coeffs, g, q, elastic_form)
    return grid.helmholtz(f)


@dataclass
class Rates:
    dv: np.ndarray
    dd: np.ndarray
    p: np.ndarray
    q: np.ndarray


def rates(scn: Scenario, state: SimulationState, elastic_form="molecular"):
    grid, et, c = scn.grid, scn.tensors, scn.leslie
    v, d = state.v, state.d
    grad_v, grad_d = grid.grad(v), grid.grad(d)
    q = variational_q(grid, d, et, check=False)
    g = scn.forcing(state.t, grid) if scn.forcing else None
    f = velocity_forces(grid, v, d, et, c, g, q, elastic_form, grad_v, grad_d)
    dv, p = grid.helmholtz(f)
    dd = director_rhs(grid, v, d, et, c, q, grad_v, grad_d)
    if scn.director_source is not None:
        dd = dd + scn.director_source(state.t, grid)
    return Rates(dv, dd, p, q)


# -- stepping ------------------------------------------------------------------

def check_cfl(scn: Scenario, state: SimulationState, config: SolverConfig):
    h = scn.grid.h_min
    vmax = float(np.max(np.linalg.norm(state.v, axis=-1)))
    limits = {"advective": h / vmax if vmax > 0 else np.inf}
    if config.scheme == "rk2":
        limits["elastic"] = h * h / max(scn.tensors.k_max, 1e-300)
    dt_max = config.cfl * min(limits.values())
    if config.dt > dt_max:
        raise NumericalAbort(
            f"dt={config.dt:g} violates the CFL limit {dt_max:.4g} "
            f"(h={h:.4g}, max|v|={vmax:.4g}, k_max={scn.tensors.k_max:.4g})",
            {"t": state.t, "dt_max": dt_max, **limits},
        )


def _finish(scn, state, t, v, d, renorm):
    if renorm:
        d = normalize(d)
    v = scn.grid.project_divfree(v)
    return SimulationState(t, v, d)


def step(scn: Scenario, state: SimulationState, config: SolverConfig, step_index=0):
    """Advance one time step; returns the new state (pressure attached)."""
    dt = config.dt
    renorm = (step_index + 1) % config.renormalize_every == 0
    stage_renorm = config.renormalize_every == 1
    if config.scheme == "rk2":
        k1 = rates(scn, state, config.elastic_form)
        mid = _finish(scn, state, state.t + dt,
                      state.v + dt * k1.dv, state.d + dt * k1.dd, stage_renorm)
        k2 = rates(scn, mid, config.elastic_form)
        new = _finish(scn, state, state.t + dt,
                      state.v + 0.5 * dt * (k1.dv + k2.dv),
                      state.d + 0.5 * dt * (k1.dd + k2.dd), renorm)
        new.p = 0.5 * (k1.p + k2.p)
    else:
        new = _semi_implicit(scn, state, config, renorm)
    if not (np.all(np.isfinite(new.v)) and np.all(np.isfinite(new.d))):
        raise NumericalAbort(f"non-finite values at step {step_index + 1} (t={new.t:g})",
                             {"step": step_index + 1, "t": new.t})
    return new


def _semi_implicit(scn, state, config, renorm):
    """First-order IMEX: the leading elastic and viscous Laplacians are implicit."""
    grid, et, c, dt = scn.grid, scn.tensors, scn.leslie, config.dt
    r = rates(scn, state, config.elastic_form)
    sd = max(et.k1, et.k2) + et.k3
    sv = 0.5 * c.mu4
    d_new = grid.solve_helmholtz(state.d + dt * (r.dd - sd * grid.laplacian(state.d)), dt * sd)
    v_new = grid.solve_helmholtz(state.v + dt * (r.dv - sv * grid.laplacian(state.v)), dt * sv)
    new = _finish(scn, state, state.t + dt, v_new, d_new, renorm)
    new.p = r.p
    return new


@dataclass
class Trajectory:
    scenario: Scenario
    config: SolverConfig
    states: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    @property
    def times(self):
        return np.array([s.t for s in self.states])

    @property
    def final(self):
        return self.states[-1]


def _diagnostics(scn, state):
    return {
        "t": state.t,
        "div_inf": float(np.max(np.abs(scn.grid.div(state.v)))),
        "unit_drift": float(np.max(np.abs(np.linalg.norm(state.d, axis=-1) - 1.0))),
    }


def run(scn: Scenario, config: SolverConfig, monitor=None, cadence=None):
    """Integrate to ``config.t_end``; stores every ``cadence``-th state.

    ``monitor(state, step_index)`` is called at every stored sample.
    """
    config.validate()
    scn.validate(max(config.unit_tol, 1e-10), max(config.div_tol, 1e-9))
    cadence = config.cadence if cadence is None else cadence
    state = scn.initial_state()
    traj = Trajectory(scn, config)

    def record(s, i):
        traj.states.append(s.copy())
        traj.diagnostics.append(_diagnostics(scn, s))
        if monitor is not None:
            monitor(s, i)

    record(state, 0)
    n = config.n_steps
    for i in range(n):
        check_cfl(scn, state, config)
        state = step(scn, state, config, i)
        if (i + 1) % cadence == 0 or i + 1 == n:
            record(state, i + 1)
    log.debug("run %s finished: %d steps, %d samples", scn.label, n, len(traj.states))
    return traj


# -- manufactured solution and convergence studies ---------------------------------

@dataclass(frozen=True)
class Manufactured:
    """Smooth exact pair on a planar grid with unit director.

    ``d = (sin θ, 0, cos θ)`` with ``θ = a sin(x1) cos(x2) e^{-t}`` and
    ``v = b e^{-t} (sin x2, sin x1, 0)``; the sources that make it an exact
    solution are computed with the discrete operators of the grid in use.
    """

    a: float = 0.4
    b: float = 0.3

    def theta(self, grid, t):
        x, y, _ = grid.coordinates()
        return self.a * np.sin(x) * np.cos(y) * np.exp(-t)

    def d(self, grid, t):
        th = self.theta(grid, t)
        return np.stack([np.sin(th), np.zeros_like(th), np.cos(th)], axis=-1)

    def dt_d(self, grid, t):
        th = self.theta(grid, t)
        return (-th)[..., None] * np.stack([np.cos(th), np.zeros_like(th), -np.sin(th)], axis=-1)

    def v(self, grid, t):
        x, y, _ = grid.coordinates()
        s = self.b * np.exp(-t)
        return np.stack([s * np.sin(y), s * np.sin(x), np.zeros_like(x)], axis=-1)

    def dt_v(self, grid, t):
        return -self.v(grid, t)

    def scenario(self, grid, frank, coeffs):
        et = frank.tensors()

        def g(t, gr):
            v, d = self.v(gr, t), self.d(gr, t)
            dv, _ = velocity_rhs(gr, v, d, et, coeffs)
            return self.dt_v(gr, t) - dv

        def s(t, gr):
            v, d = self.v(gr, t), self.d(gr, t)
            return self.dt_d(gr, t) - director_rhs(gr, v, d, et, coeffs)

        return Scenario(grid, frank, coeffs, self.v(grid, 0.0), self.d(grid, 0.0),
                        forcing=g, director_source=s, label="manufactured")


def observed_orders(sizes, errors):
    sizes, errors = np.asarray(sizes, float), np.asarray(errors, float)
    return np.log(errors[:-1] / errors[1:]) / np.log(sizes[1:] / sizes[:-1])


def run_convergence(manufactured: Manufactured, frank, coeffs, n=16, t_end=0.2,
                    dts=(0.01, 0.005, 0.0025), scheme="rk2", backend="spectral",
                    spatial_ns=(8, 16, 32)):
    """Temporal and spatial refinement study; returns an order report.

    Temporal: error at ``t_end`` against the exact pair for each dt. Spatial:
    the discrete right-hand sides evaluated on the exact pair, compared with a
    fine spectral evaluation (n=64) at the shared grid points.
    """
    grid = Grid.planar(n, backend=backend)
    scn = manufactured.scenario(grid, frank, coeffs)
    t_errors = []
    for dt in dts:
        traj = run(scn, SolverConfig(dt=dt, t_end=t_end, scheme=scheme), cadence=10**9)
        fin = traj.final
        err = grid.l2(fin.v - manufactured.v(grid, fin.t)) + grid.l2(fin.d - manufactured.d(grid, fin.t))
        t_errors.append(err)

    et = frank.tensors()
    ref_n = 64
    ref_grid = Grid.planar(ref_n)
    ref_v, ref_d = manufactured.v(ref_grid, 0.0), manufactured.d(ref_grid, 0.0)
    ref_dd = director_rhs(ref_grid, ref_v, ref_d, et, coeffs)
    ref_dv, _ = velocity_rhs(ref_grid, ref_v, ref_d, et, coeffs)
    s_errors = []
    for m in spatial_ns:
        gm = Grid.planar(m, backend=backend)
        vm, dm = manufactured.v(gm, 0.0), manufactured.d(gm, 0.0)
        stride = ref_n // m
        dd = director_rhs(gm, vm, dm, et, coeffs)
        dv, _ = velocity_rhs(gm, vm, dm, et, coeffs)
        err = (gm.l2(dd - ref_dd[::stride, ::stride]) + gm.l2(dv - ref_dv[::stride, ::stride]))
        s_errors.append(err)
    return {
        "scheme": scheme,
        "backend": backend,
        "dts": list(dts),
        "temporal_errors": t_errors,
        "temporal_orders": observed_orders([1 / x for x in dts], t_errors).tolist(),
        "spatial_ns": list(spatial_ns),
        "spatial_errors": s_errors,
        "spatial_orders": observed_orders(spatial_ns, s_errors).tolist(),
    }
