"""Energy monitoring, relative energy and dissipation, and Gronwall certification.

A *candidate* is a velocity/director pair optionally carrying a generalized
Young measure and a defect measure (Dirac lift and zero defect by default);
a *reference* is a plain velocity/director pair playing the strong solution.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import leslie as ls
from . import oseen_frank as of
from . import tensor_kernel as tk
from . import young_measure as ym
from .fields import Grid, variational_q

CSV_COLUMNS = (
    "t", "kinetic", "frank", "defect_half_mass", "total", "dissipation", "cross_term",
    "energy_residual", "E_rel", "W_rel", "K", "gronwall_bound", "margin",
)

DEFAULT_TOL = 1e-8
CDELTA_LADDER = tuple(10.0**k for k in range(-6, 3))


class CertificationError(ValueError):
    """Malformed certification input (e.g. unordered samples)."""


@dataclass
class Candidate:
    v: np.ndarray
    d: np.ndarray
    gym: Optional[ym.GeneralizedYoungMeasure] = None
    defect: Optional[ym.DefectMeasure] = None

    def measures(self, grid: Grid):
        gym = self.gym if self.gym is not None else ym.dirac_from_field(grid, self.d)
        defect = self.defect if self.defect is not None else ym.zero_defect(grid.n)
        return gym, defect


def _check_grid(grid: Grid, *arrays):
    for a in arrays:
        if a.shape[:3] != grid.n:
            raise of.ValidationError(f"field of shape {a.shape} does not live on grid {grid.n}")


# -- total energy and the energy law -------------------------------------------------

@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    frank: float
    defect: float

    @property
    def total(self):
        return self.kinetic + self.frank + self.defect


def total_energy(grid: Grid, et: of.ElasticTensors, v, d, gym=None, defect=None):
    """``½‖v‖² + ⟪ν, F⟫ + ½⟪μ, 1⟫`` (direct quadrature of F without a measure)."""
    kinetic = 0.5 * grid.inner(v, v)
    if gym is None:
        frank = grid.integrate(of.energy_density(d, grid.grad(d), et))
    else:
        frank = float(ym.pairing(gym, ym.frank_integrand(et), d, grid))
    half_mass = 0.0 if defect is None else 0.5 * ym.defect_mass_total(defect, grid)
    return EnergyBreakdown(kinetic, frank, half_mass)


def dissipation_terms(grid: Grid, et, coeffs, v, d, q=None):
    """``(∫ dissipation, ∫ cross term)`` at one instant."""
    A = tk.sym(grid.grad(v))
    q = variational_q(grid, d, et, check=False) if q is None else q
    return (grid.integrate(ls.dissipation_density(d, A, q, coeffs)),
            grid.integrate(ls.cross_term(d, A, q, coeffs)))


def _trapezoid(t, y):
    t, y = np.asarray(t, float), np.asarray(y, float)
    out = np.zeros_like(t)
    if len(t) > 1:
        out[1:] = np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))
    return out


@dataclass
class EnergySeries:
    t: np.ndarray
    kinetic: np.ndarray
    frank: np.ndarray
    defect_half_mass: np.ndarray
    dissipation: np.ndarray
    cross_term: np.ndarray
    forcing_power: np.ndarray
    residual: np.ndarray = field(default=None)

    @property
    def total(self):
        return self.kinetic + self.frank + self.defect_half_mass

    @property
    def cumulative_dissipation(self):
        """``∫ (dissipation - cross term)``; nonnegative under the dissipativity conditions."""
        return _trapezoid(self.t, self.dissipation - self.cross_term)


def energy_monitor(traj, defects=None):
    """Per-interval residual ``ΔE + ∫(dissipation - cross - g·v)`` along a trajectory.

    ``residual[0]`` is nan; ``residual[i]`` belongs to the interval ending at
    sample i. For a smooth run it vanishes as dt → 0; measure-valued or
    under-resolved runs are only expected to satisfy ``residual ≤ tol``.
    """
    scn = traj.scenario
    grid, et, c = scn.grid, scn.tensors, scn.leslie
    rows = []
    for i, s in enumerate(traj.states):
        eb = total_energy(grid, et, s.v, s.d, defect=None if defects is None else defects[i])
        D, X = dissipation_terms(grid, et, c, s.v, s.d)
        gv = grid.inner(scn.forcing(s.t, grid), s.v) if scn.forcing else 0.0
        rows.append((s.t, eb.kinetic, eb.frank, eb.defect, D, X, gv))
    cols = [np.array(col, dtype=float) for col in zip(*rows)]
    series = EnergySeries(*cols)
    res = np.full(len(series.t), np.nan)
    net = series.dissipation - series.cross_term - series.forcing_power
    res[1:] = np.diff(series.total) + 0.5 * np.diff(series.t) * (net[1:] + net[:-1])
    series.residual = res
    return series


# -- relative energy and dissipation ---------------------------------------------------

def _relative_integrand(et, A, B):
    """``½ (S - A):Λ:(S - A) + ½ (S⊗h - B)⋮Θ⋮(S⊗h - B)`` with A = ∇d̃, B = ∇d̃⊗d̃ on the grid."""
    def f(x, h, S):
        a = ym._match_atoms(A, S.ndim - 2)
        b = ym._match_atoms(B, S.ndim - 2)
        X = S - a
        Y = tk.mat_outer_vec(S, h) - b
        return 0.5 * (tk.frob(X, et.lam(X)) + of.theta_form(Y, et))
    return ym.TestIntegrand(f)


def _expanded_integrand(et, grad_ref, d_ref):
    """Sum-of-squares form of the same integrand through trace, skew part and cross products."""
    k1, k2, k3, k4, k5 = et.k

    def f(x, h, S):
        n = S.ndim - 2
        A = ym._match_atoms(grad_ref, n)
        dr = ym._match_atoms(d_ref, n)
        W, Wr = tk.skw(S), tk.skw(A)
        trS, trA = tk.tr(S), tk.tr(A)
        two = (
            k1 * (trS - trA) ** 2
            + 2 * k2 * np.sum((W - Wr) ** 2, axis=(-2, -1))
            + k3 * np.sum((trS[..., None] * h - trA[..., None] * dr) ** 2, axis=-1)
            + k4 * (tk.frob(W, tk.cross_matrix(h)) - tk.frob(Wr, tk.cross_matrix(dr))) ** 2
            + 4 * k5 * np.sum((tk.matvec(W, h) - tk.matvec(Wr, dr)) ** 2, axis=-1)
        )
        return 0.5 * two
    return ym.TestIntegrand(f)


def relative_energy(grid: Grid, et: of.ElasticTensors, cand: Candidate, v_ref, d_ref,
                    form="compact"):
    """``E = ½‖v - ṽ‖² + ½⟪μ,1⟫ + ⟪ν, relative elastic integrand⟫``.

    ``form="expanded"`` evaluates the elastic part through the explicit
    sum of squares instead of Λ and Θ.
    """
    _check_grid(grid, cand.v, cand.d, v_ref, d_ref)
    gym, defect = cand.measures(grid)
    A = grid.grad(d_ref)
    if form == "compact":
        f = _relative_integrand(et, A, tk.mat_outer_vec(A, d_ref))
    elif form == "expanded":
        f = _expanded_integrand(et, A, d_ref)
    else:
        raise ValueError(f"unknown form {form!r}")
    dv = cand.v - v_ref
    return (0.5 * grid.inner(dv, dv) + 0.5 * ym.defect_mass_total(defect, grid)
            + float(ym.pairing(gym, f, cand.d, grid)))


def relative_dissipation(grid: Grid, et, coeffs: ls.LeslieCoefficients, v, d, v_ref, d_ref,
                         q=None, q_ref=None):
    """``W`` between two velocity/director pairs."""
    _check_grid(grid, v, d, v_ref, d_ref)
    q = variational_q(grid, d, et, check=False) if q is None else q
    q_ref = variational_q(grid, d_ref, et, check=False) if q_ref is None else q_ref
    A, Ar = tk.sym(grid.grad(v)), tk.sym(grid.grad(v_ref))
    Ad, Ard = tk.matvec(A, d), tk.matvec(Ar, d_ref)
    dAd = tk.dot(d, Ad) - tk.dot(d_ref, Ard)
    sq = lambda f: grid.inner(f, f)  # noqa: E731
    return (
        (coeffs.mu1 + coeffs.lam * coeffs.mu23) * sq(dAd)
        + (coeffs.mu56 - coeffs.lam * coeffs.mu23) * sq(Ad - Ard)
        + coeffs.mu4 * sq(A - Ar)
        + sq(tk.cross(d, q) - tk.cross(d_ref, q_ref))
    )


def gronwall_weight_K(grid: Grid, v_ref, d_ref, dt_d_ref, cdelta=1.0):
    """Gronwall weight of the reference state; linear in ``cdelta``."""
    s = grid.sobolev
    main = (
        grid.linf(v_ref) ** 2 + s(v_ref, 1, 3) ** 2 + s(d_ref, 2, 3) ** 2
        + s(d_ref, 1, 6) ** 4 + grid.linf(dt_d_ref) + s(dt_d_ref, 1, 3)
    )
    return cdelta * (main + grid.linf(tk.sym(grid.grad(v_ref))) + 1.0)


def initial_constant_c0(grid: Grid, et, cand0: Candidate, v_ref0, d_ref0, c=1.0):
    """``E(0)`` plus the initial Θ cross term plus ``c‖d(0) - d̃(0)‖²``."""
    E0 = relative_energy(grid, et, cand0, v_ref0, d_ref0)
    gym, _ = cand0.measures(grid)
    A = grid.grad(d_ref0)
    B = tk.mat_outer_vec(A, d_ref0)
    ThB = et.theta(B)

    def cross(x, h, S):
        n = S.ndim - 2
        a, dr, tb = (ym._match_atoms(z, n) for z in (A, d_ref0, ThB))
        return tk.t3_dot_t3(tk.mat_outer_vec(S - a, h - dr), tb)

    X = float(ym.pairing(gym, ym.TestIntegrand(cross), cand0.d, grid))
    dd = cand0.d - d_ref0
    return E0 + X + c * grid.inner(dd, dd)


def minimal_zeta(coeffs: ls.LeslieCoefficients):
    """Smallest ζ ≥ 0 with ``(μ2+μ3) - λ ≤ 4 ζ² (μ5+μ6 - λ(μ2+μ3))``."""
    a = coeffs.mu56 - coeffs.lam * coeffs.mu23
    if a <= 0:
        return math.inf
    if ls.parodi_holds(coeffs):
        return 0.0
    return math.sqrt(max(coeffs.cross_coefficient, 0.0) / (4 * a))


def zeta_admissible(coeffs: ls.LeslieCoefficients, zeta):
    a = coeffs.mu56 - coeffs.lam * coeffs.mu23
    return 0 < zeta < 1 and (ls.parodi_holds(coeffs) or coeffs.cross_coefficient <= zeta**2 * 4 * a)


# -- certification --------------------------------------------------------------------

@dataclass(frozen=True)
class RelativeEnergySample:
    t: float
    E: float
    W: float
    K: float


@dataclass
class GronwallReport:
    c0: float
    zeta: float
    t: np.ndarray
    E: np.ndarray
    bound: np.ndarray
    margin: np.ndarray
    margin_pre: np.ndarray
    int_K: float
    tol: float

    @property
    def verdict(self):
        return bool(np.all(self.margin >= -self.tol) and np.all(self.margin_pre >= -self.tol))

    @property
    def min_margin(self):
        return float(min(np.min(self.margin), np.min(self.margin_pre)))

    def summary(self):
        return {
            "verdict": "pass" if self.verdict else "fail",
            "c0": self.c0,
            "zeta": self.zeta,
            "int_K": self.int_K,
            "max_E": float(np.max(self.E)),
            "min_margin": self.min_margin,
            "tol": self.tol,
        }


def gronwall_certify(samples: Sequence[RelativeEnergySample], c0, zeta, tol=DEFAULT_TOL):
    """Check both the pre-Gronwall inequality and the integrated exponential bound.

    (i)  ``E(t) + (1-ζ)∫W ≤ c0 + ∫K E``  and  (ii) ``E(t) ≤ c0 exp(∫K)``, with
    trapezoidal integrals over the samples. A sample passes when its margin
    (right minus left side) is at least ``-tol``.
    """
    if not 0 < zeta < 1:
        raise CertificationError(f"zeta must lie in (0, 1), got {zeta}")
    t = np.array([s.t for s in samples], float)
    if len(t) == 0 or np.any(np.diff(t) <= 0):
        raise CertificationError("samples must be nonempty and strictly time ordered")
    E = np.array([s.E for s in samples], float)
    W = np.array([s.W for s in samples], float)
    K = np.array([s.K for s in samples], float)
    int_K = _trapezoid(t, K)
    with np.errstate(over="ignore"):
        bound = c0 * np.exp(int_K)
    margin_pre = c0 + _trapezoid(t, K * E) - E - (1 - zeta) * _trapezoid(t, W)
    return GronwallReport(float(c0), float(zeta), t, E, bound, bound - E, margin_pre,
                          float(int_K[-1]), tol)


def calibrate_cdelta(runs, zeta, ladder=CDELTA_LADDER, tol=DEFAULT_TOL):
    """Smallest rung of ``ladder`` for which every calibration run certifies.

    ``runs`` holds ``(t, E, W, K_unit, c0)`` tuples where ``K_unit`` is the
    Gronwall weight for ``C_δ = 1``. Returns None when no rung passes.
    """
    for cd in sorted(ladder):
        ok = True
        for t, E, W, K1, c0 in runs:
            samples = [RelativeEnergySample(*row) for row in zip(t, E, W, cd * np.asarray(K1))]
            if not gronwall_certify(samples, c0, zeta, tol).verdict:
                ok = False
                break
        if ok:
            return cd
    return None


def sobolev_shadow(grid: Grid, d, d_ref):
    """Grid-measured ratio ``‖d - d̃‖²_L6 / ‖d - d̃‖²_H1``; reported, not asserted."""
    e = d - d_ref
    den = grid.l2(e) ** 2 + grid.h1_seminorm(e) ** 2
    return grid.l6(e) ** 2 / den if den > 0 else 0.0


# -- comparison of two trajectories -------------------------------------------------------

@dataclass
class Comparison:
    t: np.ndarray
    E: np.ndarray
    W: np.ndarray
    K_unit: np.ndarray
    c0: float
    energy: EnergySeries

    def samples(self, cdelta):
        return [RelativeEnergySample(*r) for r in zip(self.t, self.E, self.W, cdelta * self.K_unit)]

    def certify(self, zeta, cdelta, tol=DEFAULT_TOL):
        return gronwall_certify(self.samples(cdelta), self.c0, zeta, tol)

    def calibration_run(self):
        return (self.t, self.E, self.W, self.K_unit, self.c0)


def _common_indices(ta, tb, atol=1e-9):
    ia, ib = [], []
    j = 0
    for i, t in enumerate(ta):
        while j < len(tb) and tb[j] < t - atol:
            j += 1
        if j < len(tb) and abs(tb[j] - t) <= atol:
            ia.append(i)
            ib.append(j)
    return ia, ib


def compare_trajectories(cand_traj, ref_traj, candidates=None, c=1.0):
    """E, W and the unit Gronwall weight at the common sample times.

    ``candidates`` optionally replaces the Dirac-lifted candidate states
    (one :class:`Candidate` per candidate sample, e.g. with injected measures).
    """
    from .solver import director_rhs

    scn = ref_traj.scenario
    grid, et, coeffs = scn.grid, scn.tensors, scn.leslie
    if cand_traj.scenario.grid.n != grid.n:
        raise of.ValidationError("candidate and reference grids differ")
    ia, ib = _common_indices(cand_traj.times, ref_traj.times)
    if not ia:
        raise CertificationError("trajectories share no sample times")
    defects = None
    if candidates is not None:
        defects = [candidates[i].measures(grid)[1] for i in range(len(cand_traj.states))]
    energy = energy_monitor(cand_traj, defects)
    t, E, W, K = [], [], [], []
    for i, j in zip(ia, ib):
        s, r = cand_traj.states[i], ref_traj.states[j]
        cand = candidates[i] if candidates is not None else Candidate(s.v, s.d)
        t.append(r.t)
        E.append(relative_energy(grid, et, cand, r.v, r.d))
        W.append(relative_dissipation(grid, et, coeffs, s.v, s.d, r.v, r.d))
        dt_d = director_rhs(grid, r.v, r.d, et, coeffs)
        K.append(gronwall_weight_K(grid, r.v, r.d, dt_d, 1.0))
    s0, r0 = cand_traj.states[ia[0]], ref_traj.states[ib[0]]
    cand0 = candidates[ia[0]] if candidates is not None else Candidate(s0.v, s0.d)
    c0 = initial_constant_c0(grid, et, cand0, r0.v, r0.d, c)
    sel = np.array(ia)
    energy_sel = EnergySeries(*(getattr(energy, n)[sel] for n in (
        "t", "kinetic", "frank", "defect_half_mass", "dissipation", "cross_term",
        "forcing_power", "residual")))
    return Comparison(np.array(t), np.array(E), np.array(W), np.array(K), c0, energy_sel)


# -- CSV --------------------------------------------------------------------------------

def monitor_rows(energy: EnergySeries, comparison: Comparison | None = None,
                 report: GronwallReport | None = None, cdelta=None):
    n = len(energy.t)
    nan = np.full(n, np.nan)
    E = comparison.E if comparison is not None else nan
    W = comparison.W if comparison is not None else nan
    K = comparison.K_unit * cdelta if comparison is not None and cdelta is not None else nan
    bound = report.bound if report is not None else nan
    margin = np.minimum(report.margin, report.margin_pre) if report is not None else nan
    cols = (energy.t, energy.kinetic, energy.frank, energy.defect_half_mass, energy.total,
            energy.dissipation, energy.cross_term, energy.residual, E, W, K, bound, margin)
    return [tuple(float(c[i]) for c in cols) for i in range(n)]


def _fmt(x):
    return "nan" if math.isnan(x) else f"{x:.17g}"


def write_monitor_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def read_monitor_csv(path):
    """Columns as float arrays keyed by name."""
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        data = [[float(x) for x in row] for row in rd]
    arr = np.array(data, float).reshape(-1, len(CSV_COLUMNS))
    return {name: arr[:, i] for i, name in enumerate(CSV_COLUMNS)}
