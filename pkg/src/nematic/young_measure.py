"""Atomic generalized Young measures and defect measures on a grid.

Per cell a measure holds a fixed number of atoms (zero-weight padding is
allowed):

* oscillation part ``ν°``: weights ``(n1, n2, n3, K)``, matrices ``(..., K, 3, 3)``
* concentration density ``m`` ``(n1, n2, n3)`` and angle atoms ``ν^∞``:
  weights ``(..., J)``, vectors ``h̃`` ``(..., J, 3)`` with ``|h̃| ≤ 1`` and
  matrices ``S̃`` ``(..., J, 3, 3)`` with unit Frobenius norm
* defect density ``μ`` ``(n1, n2, n3)`` with unit third-order atoms ``Γ``.

Densities are taken against the cell volume, so ``⟪m, 1⟫ = Σ vol · m``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import oseen_frank as of
from . import tensor_kernel as tk
from .fields import Grid

ATOL = 1e-12


class RecessionError(ValueError):
    """The integrand has no continuous extension to the boundary."""


@dataclass(frozen=True)
class GeneralizedYoungMeasure:
    osc_weights: np.ndarray
    osc_S: np.ndarray
    conc_mass: np.ndarray
    ang_weights: np.ndarray
    ang_h: np.ndarray
    ang_S: np.ndarray

    def validate(self, tol=1e-10):
        w = self.osc_weights
        if np.any(w < -tol) or np.max(np.abs(w.sum(axis=-1) - 1.0)) > tol:
            raise of.ValidationError("oscillation weights must be nonnegative and sum to one")
        if np.any(self.conc_mass < -tol):
            raise of.ValidationError("concentration mass must be nonnegative")
        aw = self.ang_weights
        active = self.conc_mass > 0
        if np.any(aw < -tol):
            raise of.ValidationError("angle weights must be nonnegative")
        if np.any(active) and np.max(np.abs(aw.sum(axis=-1) - 1.0)[active]) > tol:
            raise of.ValidationError("angle weights must sum to one where mass > 0")
        live = aw > 0
        if np.any(np.linalg.norm(self.ang_h, axis=-1)[live] > 1 + tol):
            raise of.ValidationError("angle atoms need |h| <= 1")
        if np.any(np.abs(tk.norm(self.ang_S, 2)[live] - 1.0) > tol):
            raise of.ValidationError("angle atoms need |S| = 1")
        return self

    @property
    def grid_shape(self):
        return self.conc_mass.shape

    def with_concentration(self, mass, h, S):
        """Copy with a single angle atom per cell."""
        shape = self.grid_shape
        return GeneralizedYoungMeasure(
            self.osc_weights, self.osc_S,
            np.broadcast_to(np.asarray(mass, float), shape).copy(),
            np.ones(shape + (1,)),
            np.broadcast_to(np.asarray(h, float), shape + (3,))[..., None, :].copy(),
            np.broadcast_to(np.asarray(S, float), shape + (3, 3))[..., None, :, :].copy(),
        )


@dataclass(frozen=True)
class DefectMeasure:
    mass: np.ndarray
    weights: np.ndarray
    Gamma: np.ndarray

    def validate(self, tol=1e-10):
        if np.any(self.mass < -tol):
            raise of.ValidationError("defect mass must be nonnegative")
        live = self.weights > 0
        if np.any(np.abs(tk.norm(self.Gamma, 3)[live] - 1.0) > tol):
            raise of.ValidationError("defect atoms need |Γ| = 1")
        active = self.mass > 0
        if np.any(active) and np.max(np.abs(self.weights.sum(axis=-1) - 1.0)[active]) > tol:
            raise of.ValidationError("defect weights must sum to one where mass > 0")
        return self


def _placeholder_S():
    S = np.zeros((3, 3))
    S[0, 0] = 1.0
    return S


def dirac_measure(S_field):
    """Single oscillation atom at ``S_field`` per cell, no concentration."""
    S_field = np.asarray(S_field, float)
    shape = S_field.shape[:-2]
    return GeneralizedYoungMeasure(
        np.ones(shape + (1,)),
        S_field[..., None, :, :].copy(),
        np.zeros(shape),
        np.ones(shape + (1,)),
        np.zeros(shape + (1, 3)),
        np.broadcast_to(_placeholder_S(), shape + (1, 3, 3)).copy(),
    )


def dirac_from_field(grid: Grid, d):
    """``ν° = δ_{∇d}``, ``m = 0``."""
    return dirac_measure(grid.grad(d))


def oscillating_pair(S_field, perturbation, weight=0.5):
    """Two atoms ``S ± P`` with weights chosen so the barycenter is ``S``.

    The minus atom is scaled by ``w/(1-w)`` to keep the mean exact for any
    weight ``w`` of the plus atom.
    """
    w = float(weight)
    plus = S_field + perturbation
    minus = S_field - perturbation * (w / (1 - w))
    shape = S_field.shape[:-2]
    weights = np.broadcast_to(np.array([w, 1 - w]), shape + (2,)).copy()
    base = dirac_measure(S_field)
    return GeneralizedYoungMeasure(
        weights, np.stack([plus, minus], axis=-3),
        base.conc_mass, base.ang_weights, base.ang_h, base.ang_S,
    )


def zero_defect(shape):
    return DefectMeasure(np.zeros(shape), np.zeros(shape + (1,)), np.zeros(shape + (1, 3, 3, 3)))


def uniform_defect(shape, density, Gamma):
    Gamma = np.asarray(Gamma, float)
    Gamma = Gamma / tk.norm(Gamma, 3)
    return DefectMeasure(
        np.broadcast_to(np.asarray(density, float), shape).copy(),
        np.ones(shape + (1,)),
        np.broadcast_to(Gamma, shape + (3, 3, 3))[..., None, :, :, :].copy(),
    )


def barycenter(gym: GeneralizedYoungMeasure):
    return np.einsum("...k,...kij->...ij", gym.osc_weights, gym.osc_S)


def osc_expectation(gym: GeneralizedYoungMeasure, values):
    """``Σ_k w_k values_k`` where ``values`` has the atom axis after the grid axes."""
    w = gym.osc_weights
    w = w.reshape(w.shape + (1,) * (values.ndim - w.ndim))
    return np.sum(w * values, axis=len(gym.grid_shape))


def jensen_gap(gym: GeneralizedYoungMeasure, A):
    """Per cell ``⟪ν°, |S - A|²⟫ - |bary - A|²``; nonnegative."""
    diff = gym.osc_S - A[..., None, :, :]
    second = osc_expectation(gym, np.sum(diff**2, axis=(-2, -1)))
    return second - np.sum((barycenter(gym) - A) ** 2, axis=(-2, -1))


# -- integrands and recession ----------------------------------------------------

@dataclass(frozen=True)
class TestIntegrand:
    """``f(x, h, S)`` broadcasting over leading axes.

    ``growth="quadratic"`` declares f polynomial of degree at most two in h
    and in S separately, which makes the recession transform extend
    continuously to the closed unit balls. ``growth="general"`` only allows
    interior evaluation unless ``recession`` supplies the boundary values.
    ``out_ndim`` is the number of trailing output axes (0 for scalars).
    """

    f: Callable
    growth: str = "quadratic"
    out_ndim: int = 0
    recession: Callable | None = None

    __test__ = False  # keep pytest from collecting this class

    def __call__(self, x, h, S):
        return self.f(x, h, S)


def _poly2_coefficients(vals):
    """Coefficients of a degree-2 polynomial sampled at -1, 0, 1."""
    m, z, p = vals
    return z, 0.5 * (p - m), 0.5 * (p + m) - z


def _expand(a, out_ndim):
    return a.reshape(a.shape + (1,) * out_ndim)


def bidegree_coefficients(f: TestIntegrand, x, h, S):
    """``c[q][p]`` with ``f(x, a h, b S) = Σ c_pq a^p b^q``."""
    rows = []
    for a in (-1.0, 0.0, 1.0):
        rows.append(_poly2_coefficients([f(x, a * h, b * S) for b in (-1.0, 0.0, 1.0)]))
    # rows[a_index][q] -> solve along a for each q
    return [list(_poly2_coefficients([rows[i][q] for i in range(3)])) for q in range(3)]


def recession_eval(f: TestIntegrand, h_t, S_t, x=None, strict=True):
    """Recession transform ``f̃(x, h̃, S̃)`` on the closed unit balls.

    In the interior this is ``f(x, h̃/√(1-|h̃|²), S̃/√(1-|S̃|²)) (1-|h̃|²)(1-|S̃|²)``.
    """
    h_t = np.asarray(h_t, float)
    S_t = np.asarray(S_t, float)
    a2 = 1.0 - np.sum(h_t**2, axis=-1)
    b2 = 1.0 - np.sum(S_t**2, axis=(-2, -1))
    if np.any(a2 < -ATOL) or np.any(b2 < -ATOL):
        raise RecessionError("recession arguments must lie in the closed unit balls")
    a2 = np.clip(a2, 0.0, None)
    b2 = np.clip(b2, 0.0, None)
    if f.growth == "quadratic":
        qc = bidegree_coefficients(f, x, h_t, S_t)
        if strict:
            _check_bidegree(f, x, h_t, S_t, qc)
        out = 0.0
        for q in range(3):
            for p in range(3):
                scale = np.sqrt(a2) ** (2 - p) * np.sqrt(b2) ** (2 - q)
                out = out + qc[q][p] * _expand(scale, f.out_ndim)
        return out
    boundary = (a2 <= ATOL) | (b2 <= ATOL)
    if np.any(boundary) and f.recession is None:
        raise RecessionError("integrand has no declared continuous extension to the boundary")
    with np.errstate(divide="ignore", invalid="ignore"):
        sa = np.where(boundary, 1.0, np.sqrt(np.where(a2 > 0, a2, 1.0)))
        sb = np.where(boundary, 1.0, np.sqrt(np.where(b2 > 0, b2, 1.0)))
        inner = f(x, h_t / sa[..., None], S_t / sb[..., None, None])
        out = inner * _expand(a2 * b2, f.out_ndim)
    if np.any(boundary):
        out = np.where(_expand(boundary, f.out_ndim), f.recession(x, h_t, S_t), out)
    return out


def _check_bidegree(f, x, h, S, qc):
    got = f(x, 2.0 * h, 2.0 * S)
    want = sum(qc[q][p] * 2.0 ** (p + q) for p in range(3) for q in range(3))
    scale = 1.0 + np.max(np.abs(want))
    if np.max(np.abs(got - want)) > 1e-8 * scale:
        raise RecessionError("integrand declared quadratic is not of degree <= 2 in h and S")


# -- pairings ---------------------------------------------------------------------

def _atom_axis(arr, k):
    """Insert an atom axis of length k after the grid axes."""
    return np.broadcast_to(arr[:, :, :, None], arr.shape[:3] + (k,) + arr.shape[3:])


def pairing_density(gym: GeneralizedYoungMeasure, f: TestIntegrand, d, grid: Grid):
    """Per-cell density of ``⟪ν, f⟫`` (oscillation plus concentration part)."""
    x = np.stack(grid.coordinates(), axis=-1)
    K = gym.osc_weights.shape[-1]
    vals = f(_atom_axis(x, K), _atom_axis(d, K), gym.osc_S)
    osc = osc_expectation(gym, vals)
    conc = 0.0
    if np.any(gym.conc_mass != 0):
        J = gym.ang_weights.shape[-1]
        rec = recession_eval(f, gym.ang_h, gym.ang_S, _atom_axis(x, J))
        w = gym.ang_weights.reshape(gym.ang_weights.shape + (1,) * f.out_ndim)
        conc = _expand(gym.conc_mass, f.out_ndim) * np.sum(w * rec, axis=3)
    return osc + conc


def pairing(gym: GeneralizedYoungMeasure, f: TestIntegrand, d, grid: Grid):
    """``⟪ν, f⟫``; componentwise for vector-valued integrands."""
    dens = pairing_density(gym, f, d, grid)
    return np.sum(dens, axis=(0, 1, 2)) * grid.cell_volume


def defect_pairing_density(defect: DefectMeasure, grad_phi):
    G = defect.Gamma
    val = np.einsum("...aijl,...aijk,...kl->...a", G, G, grad_phi)
    return defect.mass * np.sum(defect.weights * val, axis=-1)


def defect_pairing(defect: DefectMeasure, grad_phi, grid: Grid):
    """``⟪μ, Γ⋮(Γ·∇φ)⟫``."""
    return grid.integrate(defect_pairing_density(defect, grad_phi))


def defect_mass_total(defect: DefectMeasure, grid: Grid):
    """``⟪μ, 1⟫``."""
    return grid.integrate(defect.mass)


# -- integrands of the measure-valued formulation ------------------------------------

def frank_integrand(et):
    return TestIntegrand(lambda x, h, S: of.energy_density(h, S, et))


def ericksen_integrand(et, grad_phi):
    """``Sᵀ F_S(h, S) : ∇φ(x)``; ``grad_phi`` is sampled on the grid."""
    def f(x, h, S):
        gp = _match_atoms(grad_phi, S.ndim - 2)
        return tk.frob(tk.matmul(np.swapaxes(S, -1, -2), of.F_S(h, S, et)), gp)
    return TestIntegrand(f)


def torque_integrand(et):
    """``Υ:(S F_Sᵀ) + h × F_h`` (vector valued)."""
    def f(x, h, S):
        FS = of.F_S(h, S, et)
        return (tk.t3_mat(tk.LEVI_CIVITA, tk.matmul(S, np.swapaxes(FS, -1, -2)))
                + tk.cross(h, of.F_h(h, S, et)))
    return TestIntegrand(f, out_ndim=1)


def _match_atoms(field_arr, batch_ndim):
    """Broadcast a grid field against atom-batched arguments."""
    if batch_ndim == 4:
        return field_arr[:, :, :, None]
    return field_arr


# -- measure-valued residuals ------------------------------------------------------

@dataclass
class SlabEnd:
    """State of a candidate at one end of a time slab."""

    v: np.ndarray
    d: np.ndarray
    gym: GeneralizedYoungMeasure
    defect: DefectMeasure
    g: np.ndarray | None = None


def _velocity_terms(grid, end: SlabEnd, phi, et, coeffs):
    from .fields import variational_q
    from . import leslie as ls

    grad_v = grid.grad(end.v)
    grad_phi = grid.grad(phi)
    q = variational_q(grid, end.d, et, check=False)
    e = ls.corotational_rate_from_q(end.d, grad_v, q, coeffs)
    TL = ls.leslie_stress(end.d, e, grad_v, coeffs, check=False)
    out = (
        grid.inner(tk.matvec(grad_v, end.v), phi)
        - pairing(end.gym, ericksen_integrand(et, grad_phi), end.d, grid)
        - 2.0 * defect_pairing(end.defect, grad_phi, grid)
        + grid.inner(TL, grad_phi)
    )
    if end.g is not None:
        out -= grid.inner(end.g, phi)
    return out


def _director_terms(grid, end: SlabEnd, psi, et, coeffs):
    from .fields import variational_q

    grad_v, grad_d = grid.grad(end.v), grid.grad(end.d)
    q = variational_q(grid, end.d, et, check=False)
    inner = (
        tk.matvec(grad_d, end.v)
        - tk.matvec(tk.skw(grad_v), end.d)
        + coeffs.lam * tk.matvec(tk.sym(grad_v), end.d)
        + q
    )
    return grid.inner(tk.cross(end.d, inner), psi)


def _q_terms(grid, end: SlabEnd, psi, et):
    from .fields import variational_q

    q = variational_q(grid, end.d, et, check=False)
    FS = of.F_S(end.d, grid.grad(end.d), et)
    lhs = grid.inner(tk.cross(end.d, q), psi)
    rhs = grid.inner(tk.matmul(tk.cross_matrix(end.d), FS), grid.grad(psi))
    dens = pairing_density(end.gym, torque_integrand(et), end.d, grid)
    rhs += grid.integrate(np.sum(dens * psi, axis=-1))
    return lhs - rhs


def mv_residuals(grid: Grid, start: SlabEnd, end: SlabEnd, dt, coeffs, et, phis, psis):
    """Residuals of the measure-valued formulation over one time slab.

    Test functions are time independent on the slab; the time-derivative
    terms become differences of the end states and the remaining integrals
    are evaluated with the trapezoidal rule. Velocity and director residuals
    are divided by dt (slab averages). ``phis`` should be divergence free.
    """
    r_v, r_d, r_q = [], [], []
    d_mid = 0.5 * (start.d + end.d)
    for phi in phis:
        r = grid.inner(end.v - start.v, phi) / dt
        r += 0.5 * (_velocity_terms(grid, start, phi, et, coeffs)
                    + _velocity_terms(grid, end, phi, et, coeffs))
        r_v.append(r)
    for psi in psis:
        r = grid.inner(tk.cross(d_mid, (end.d - start.d) / dt), psi)
        r += 0.5 * (_director_terms(grid, start, psi, et, coeffs)
                    + _director_terms(grid, end, psi, et, coeffs))
        r_d.append(r)
        r_q.append(0.5 * (_q_terms(grid, start, psi, et) + _q_terms(grid, end, psi, et)))
    return {"velocity": np.array(r_v), "director": np.array(r_d), "q": np.array(r_q)}


# -- measure snapshot files ---------------------------------------------------------

MEASURE_MAGIC = "nematic-measure v1"


def write_measure(path, grid: Grid, t, gym: GeneralizedYoungMeasure, defect: DefectMeasure | None = None):
    """Plain-text measure snapshot.

    After ``#`` header lines, one block per cell (C order), each starting
    with a tag line: ``osc <cell> <count>`` followed by rows ``w S11..S33``;
    ``conc <cell> <mass> <count>`` followed by rows ``w h1 h2 h3 S11..S33``;
    optionally ``defect <cell> <mass> <count>`` followed by rows
    ``w Γ111..Γ333``. Only atoms with positive weight are written.
    """
    f17 = lambda a: " ".join(f"{x:.17g}" for x in np.ravel(a))  # noqa: E731
    ncell = int(np.prod(grid.n))
    ow = gym.osc_weights.reshape(ncell, -1)
    oS = gym.osc_S.reshape(ncell, -1, 9)
    cm = gym.conc_mass.reshape(ncell)
    aw = gym.ang_weights.reshape(ncell, -1)
    ah = gym.ang_h.reshape(ncell, -1, 3)
    aS = gym.ang_S.reshape(ncell, -1, 9)
    lines = [
        f"# {MEASURE_MAGIC}",
        "# shape = " + " ".join(str(x) for x in grid.n),
        "# L = " + " ".join(repr(x) for x in grid.L),
        f"# time = {t!r}",
    ]
    for c in range(ncell):
        keep = np.nonzero(ow[c] > 0)[0]
        lines.append(f"osc {c} {len(keep)}")
        lines += [f"{ow[c, k]:.17g} {f17(oS[c, k])}" for k in keep]
        keep = np.nonzero(aw[c] > 0)[0] if cm[c] > 0 else []
        lines.append(f"conc {c} {cm[c]:.17g} {len(keep)}")
        lines += [f"{aw[c, k]:.17g} {f17(ah[c, k])} {f17(aS[c, k])}" for k in keep]
    if defect is not None:
        dm = defect.mass.reshape(ncell)
        dw = defect.weights.reshape(ncell, -1)
        dG = defect.Gamma.reshape(ncell, -1, 27)
        for c in range(ncell):
            keep = np.nonzero(dw[c] > 0)[0] if dm[c] > 0 else []
            lines.append(f"defect {c} {dm[c]:.17g} {len(keep)}")
            lines += [f"{dw[c, k]:.17g} {f17(dG[c, k])}" for k in keep]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_measure(path):
    """Inverse of :func:`write_measure`; returns ``(grid, t, gym, defect)``."""
    meta, body = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                meta[key.strip()] = value.strip()
            elif line.strip():
                body.append(line.split())
    if not any(MEASURE_MAGIC in k for k in meta):
        raise ValueError(f"{path}: not a measure file")
    grid = Grid(tuple(int(x) for x in meta["shape"].split()),
                tuple(float(x) for x in meta["L"].split()))
    ncell = int(np.prod(grid.n))
    osc, conc, dfc = {}, {}, {}
    i = 0
    while i < len(body):
        tag = body[i]
        if tag[0] == "osc":
            c, cnt = int(tag[1]), int(tag[2])
            osc[c] = [list(map(float, r)) for r in body[i + 1:i + 1 + cnt]]
        else:
            c, mass, cnt = int(tag[1]), float(tag[2]), int(tag[3])
            rows = [list(map(float, r)) for r in body[i + 1:i + 1 + cnt]]
            (conc if tag[0] == "conc" else dfc)[c] = (mass, rows)
        i += 1 + cnt

    K = max(1, max((len(r) for r in osc.values()), default=1))
    ow, oS = np.zeros((ncell, K)), np.zeros((ncell, K, 9))
    for c, rows in osc.items():
        for k, r in enumerate(rows):
            ow[c, k], oS[c, k] = r[0], r[1:]
    J = max(1, max((len(r[1]) for r in conc.values()), default=1))
    cm, aw = np.zeros(ncell), np.zeros((ncell, J))
    ah, aS = np.zeros((ncell, J, 3)), np.tile(_placeholder_S().ravel(), (ncell, J, 1))
    for c, (mass, rows) in conc.items():
        cm[c] = mass
        for k, r in enumerate(rows):
            aw[c, k], ah[c, k], aS[c, k] = r[0], r[1:4], r[4:]
    if not conc or all(not rows for _, rows in conc.values()):
        aw[:, 0] = 1.0
    n = grid.n
    gym = GeneralizedYoungMeasure(ow.reshape(n + (K,)), oS.reshape(n + (K, 3, 3)), cm.reshape(n),
                                  aw.reshape(n + (J,)), ah.reshape(n + (J, 3)),
                                  aS.reshape(n + (J, 3, 3)))
    defect = None
    if dfc:
        M = max(1, max(len(r[1]) for r in dfc.values()))
        dm, dw, dG = np.zeros(ncell), np.zeros((ncell, M)), np.zeros((ncell, M, 27))
        for c, (mass, rows) in dfc.items():
            dm[c] = mass
            for k, r in enumerate(rows):
                dw[c, k], dG[c, k] = r[0], r[1:]
        defect = DefectMeasure(dm.reshape(n), dw.reshape(n + (M,)), dG.reshape(n + (M, 3, 3, 3)))
    return grid, float(meta["time"]), gym, defect
