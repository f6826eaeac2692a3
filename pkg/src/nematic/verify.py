"""Algebra and identity property suite behind ``nematic verify``.

Every property compares a production code path with an independent oracle
(dense or nested-loop tensors, finite differences, alternative formulas).
``faults`` injects known defects so the suite itself can be tested.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from . import fields as fl
from . import leslie as ls
from . import oseen_frank as of
from . import tensor_kernel as tk

FAULTS = ("theta-sign",)


@dataclass(frozen=True)
class PropertyResult:
    group: str
    name: str
    ok: bool
    samples: int
    error: float
    tol: float


def _rel(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def _random_unit(rng, n):
    h = rng.normal(size=(n, 3))
    return h / np.linalg.norm(h, axis=-1, keepdims=True)


def _theta_blocks(faults):
    blocks = of.theta_blocks_dense()
    if "theta-sign" in faults:
        # flips the sign of one δδδ term of the twist block
        bad = np.einsum("kn,jm,il->ijklmn", tk.EYE, tk.EYE, tk.EYE)
        blocks = dict(blocks, twist=blocks["twist"] - 2 * bad)
    return blocks


def _loops_t4_mat(L, A):
    out = np.zeros((3, 3))
    for i, j, k, l in itertools.product(range(3), repeat=4):
        out[i, j] += L[i, j, k, l] * A[k, l]
    return out


def _loops_t6_t3(T, G):
    out = np.zeros((3, 3, 3))
    for i, j, k, l, m, n in itertools.product(range(3), repeat=6):
        out[i, j, k] += T[i, j, k, l, m, n] * G[l, m, n]
    return out


def tensor_kernel_properties(rng, faults, n=500):
    eps = tk.LEVI_CIVITA
    err = 0.0
    for i, j, k, l, m, nn in itertools.product(range(3), repeat=6):
        d = lambda a, b: float(a == b)  # noqa: E731
        rhs = (d(i, l) * (d(j, m) * d(k, nn) - d(j, nn) * d(k, m))
               - d(i, m) * (d(j, l) * d(k, nn) - d(j, nn) * d(k, l))
               + d(i, nn) * (d(j, l) * d(k, m) - d(j, m) * d(k, l)))
        err = max(err, abs(eps[i, j, k] * eps[l, m, nn] - rhs))
    yield "Levi-Civita product as determinant of deltas", 729, err, 0.0

    a, b = rng.normal(size=(2, n, 3))
    yield "cross product via Levi-Civita", n, _rel(tk.cross(a, b), np.cross(a, b)), 1e-12
    yield "cross matrix applies the cross product", n, _rel(
        tk.matvec(tk.cross_matrix(a), b), np.cross(a, b)), 1e-12
    A = rng.normal(size=(n, 3, 3))
    yield "uncross inverts the cross matrix", n, _rel(tk.uncross(tk.cross_matrix(a)), a), 1e-12
    yield "sym + skw decomposition", n, _rel(tk.sym(A) + tk.skw(A), A), 1e-15

    L4 = rng.normal(size=(3, 3, 3, 3))
    T6 = rng.normal(size=(3,) * 6)
    G = rng.normal(size=(n, 3, 3, 3))
    e4 = max(_rel(tk.t4_mat(L4, A[s]), _loops_t4_mat(L4, A[s])) for s in range(n))
    yield "order-4 contraction against nested loops", n, e4, 1e-12
    e6 = max(_rel(tk.t6_t3(T6, G[s]), _loops_t6_t3(T6, G[s])) for s in range(n))
    yield "order-6 contraction against nested loops", n, e6, 1e-12


def oseen_frank_properties(rng, faults, n=500):
    K = (1.0, 0.8, 1.2)
    frank = of.FrankConstants(*K)
    et = frank.tensors()
    blocks = _theta_blocks(faults)
    eps = tk.LEVI_CIVITA

    yield "Θ twist block equals Levi-Civita product (Θ² identity)", 729, float(np.max(np.abs(
        blocks["twist"] - np.einsum("kji,nml->ijklmn", eps, eps)))), 1e-14

    A = rng.normal(size=(n, 3, 3))
    G = rng.normal(size=(n, 3, 3, 3))
    yield "Λ closed form against dense tensor", n, _rel(
        et.lam(A), tk.t4_mat(of.lambda_dense(et.k1, et.k2), A)), 1e-12
    theta = of.theta_dense(et.k3, et.k4, et.k5, blocks)
    yield "Θ closed form against dense tensor", n, _rel(et.theta(G), tk.t6_t3(theta, G)), 1e-12

    h = _random_unit(rng, n)
    yield "energy: K form equals k form on |h|=1", n, _rel(
        of.energy_density_K(h, A, frank), of.energy_density_k(h, A, et)), 1e-12
    yield "energy: k form equals tensor form", n, _rel(
        of.energy_density_k(h, A, et), of.energy_density_tensor(h, A, et)), 1e-12
    hg = rng.normal(size=(n, 3))
    yield "F_S closed form equals Λ/Θ route", n, _rel(
        of.F_S(hg, A, et), of.F_S_tensor(hg, A, et)), 1e-12
    yield "F_h closed form equals Λ/Θ route", n, _rel(
        of.F_h(hg, A, et), of.F_h_tensor(hg, A, et)), 1e-12

    m = min(n, 200)
    step = 1e-5
    fd_S = np.zeros((m, 3, 3))
    fd_h = np.zeros((m, 3))
    for i, j in itertools.product(range(3), repeat=2):
        E = np.zeros((3, 3))
        E[i, j] = step
        fd_S[:, i, j] = (of.energy_density(hg[:m], A[:m] + E, et)
                         - of.energy_density(hg[:m], A[:m] - E, et)) / (2 * step)
    for i in range(3):
        e = np.zeros(3)
        e[i] = step
        fd_h[:, i] = (of.energy_density(hg[:m] + e, A[:m], et)
                      - of.energy_density(hg[:m] - e, A[:m], et)) / (2 * step)
    yield "F_S against central differences", m, _rel(of.F_S(hg[:m], A[:m], et), fd_S), 1e-6
    yield "F_h against central differences", m, _rel(of.F_h(hg[:m], A[:m], et), fd_h), 1e-6

    a, b = rng.normal(size=(2, n, 3))
    ell = of.ellipticity_form(a, b, et) - min(et.k1, et.k2) * tk.dot(a, a) * tk.dot(b, b)
    yield "Λ strongly elliptic on rank-one matrices", n, float(max(0.0, -np.min(ell))), 1e-12
    yield "Θ positive semidefinite", n, float(max(0.0, -np.min(of.theta_form(G, et)))), 1e-12


def leslie_properties(rng, faults, n=500):
    c = ls.LeslieCoefficients(0.5, -0.3, 0.1, 1.0, 0.3, 0.2, 0.1)
    parodi = ls.LeslieCoefficients(0.5, -0.3, 0.1, 1.0, 0.3, 0.2, -0.2)
    d = _random_unit(rng, n)
    gv = rng.normal(size=(n, 3, 3))
    q = rng.normal(size=(n, 3))
    A = tk.sym(gv)
    yield "power balance equals dissipation minus cross term", n, _rel(
        ls.power_balance(d, gv, q, c),
        ls.dissipation_density(d, A, q, c) - ls.cross_term(d, A, q, c)), 1e-12
    yield "cross term vanishes under Parodi", n, float(np.max(np.abs(
        ls.cross_term(d, A, q, parodi)))), 0.0
    net = ls.dissipation_density(d, A, q, c) - ls.cross_term(d, A, q, c)
    yield "net dissipation nonnegative for dissipative coefficients", n, float(
        max(0.0, -np.min(net))), 1e-12
    e = ls.corotational_rate_from_q(d, gv, q, c)
    yield "co-rotational rate tangent to the director", n, float(np.max(np.abs(tk.dot(d, e)))), 1e-12


def fields_properties(rng, faults, n=None):
    et = of.FrankConstants(1.0, 0.8, 1.2).tensors()
    for backend in ("spectral", "central"):
        grid = fl.Grid((16, 16, 16), backend=backend)
        v = grid.project_divfree(fl.random_field(grid, rng, kmax=4))
        G = grid.grad(v)
        yield f"Korn identity ‖skw∇v‖ = ‖sym∇v‖ ({backend})", 1, abs(
            grid.l2(tk.skw(G)) - grid.l2(tk.sym(G))) / grid.l2(G), 1e-10
        yield f"projection is divergence free ({backend})", 1, float(
            np.max(np.abs(grid.div(v)))), 1e-9

    grid = fl.Grid((16, 16, 16))
    d = fl.random_director(grid, rng, kmax=2)
    yield "q: tensor route equals term-by-term assembly", 1, _rel(
        fl.variational_q(grid, d, et), fl.variational_q_expanded(grid, d, et)), 1e-10
    w = fl.random_field(grid, rng, kmax=2)
    s = 1e-4
    gat = (fl.frank_energy(grid, d + s * w, et) - fl.frank_energy(grid, d - s * w, et)) / (2 * s)
    q = fl.variational_q(grid, d, et)
    yield "q is the Gateaux derivative of the discrete energy", 1, abs(
        grid.inner(q, w) - gat) / abs(gat), 1e-4


GROUPS = {
    "tensor_kernel": tensor_kernel_properties,
    "oseen_frank": oseen_frank_properties,
    "leslie": leslie_properties,
    "fields": fields_properties,
}


def run_suite(seed=0, faults=(), groups=None):
    unknown = set(faults) - set(FAULTS)
    if unknown:
        raise ValueError(f"unknown faults {sorted(unknown)}")
    rng = np.random.default_rng(seed)
    out = []
    for group in groups or GROUPS:
        for name, count, err, tol in GROUPS[group](rng, set(faults)):
            ok = bool(np.isfinite(err) and err <= tol)
            out.append(PropertyResult(group, name, ok, count, float(err), float(tol)))
    return out


def format_report(results, elapsed=None):
    width = max(len(r.name) for r in results)
    lines = [f"{'status':6}  {'group':13}  {'property':{width}}  {'samples':>7}  {'error':>10}  {'tol':>8}"]
    for r in results:
        lines.append(f"{'PASS' if r.ok else 'FAIL':6}  {r.group:13}  {r.name:{width}}  "
                     f"{r.samples:7d}  {r.error:10.3e}  {r.tol:8.1e}")
    lines.append("")
    for group in dict.fromkeys(r.group for r in results):
        rs = [r for r in results if r.group == group]
        npass = sum(r.ok for r in rs)
        lines.append(f"{group}: {npass}/{len(rs)} passed")
    failed = [r.name for r in results if not r.ok]
    lines.append(f"total: {len(results) - len(failed)}/{len(results)} passed")
    if failed:
        lines.append("failed: " + "; ".join(failed))
    if elapsed is not None:
        lines.append(f"elapsed: {elapsed:.2f} s")
    return "\n".join(lines)


def main_report(seed=0, faults=()):
    t0 = time.perf_counter()
    results = run_suite(seed, faults)
    return results, format_report(results, time.perf_counter() - t0)
