"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""
import itertools
import sys
import time

import numpy as np

from nematic import cli
from nematic import config as cf
from nematic import fields as fl
from nematic import leslie as ls
from nematic import oseen_frank as of
from nematic import rel_energy as re_
from nematic import solver as sv
from nematic import tensor_kernel as tk
from nematic import young_measure as ym

RESULTS = {}

FRANK = of.FrankConstants(1.0, 0.8, 1.2)
ET = FRANK.tensors()
PARODI = ls.LeslieCoefficients(0.5, -0.3, 0.1, 1.0, 0.3, 0.2, -0.2)
NON_PARODI = ls.LeslieCoefficients(0.5, -0.3, 0.1, 1.0, 0.3, 0.2, 0.1)


def record(number, title, checks, t0):
    """Store and print one line; ``checks`` maps a description to (ok, detail)."""
    ok = all(c[0] for c in checks.values())
    failed = [k for k, c in checks.items() if not c[0]]
    detail = "; ".join(f"{k}: {c[1]}" for k, c in checks.items())
    line = (f"{'PASS' if ok else 'FAIL'}  criterion {number:2d}  {title}  "
            f"({time.perf_counter() - t0:.1f} s)  [{detail}]")
    RESULTS[number] = line
    print(line)
    assert ok, f"criterion {number} failed: {failed}"


def _unit(rng, n):
    h = rng.normal(size=(n, 3))
    return h / np.linalg.norm(h, axis=-1, keepdims=True)


def _perm_sign(i, j, k):
    # sign of (i, j, k) by counting inversions
    p = (i, j, k)
    if len(set(p)) < 3:
        return 0.0
    inv = sum(p[a] > p[b] for a in range(3) for b in range(a + 1, 3))
    return -1.0 if inv % 2 else 1.0


# -- 1 ---------------------------------------------------------------------------------

def test_criterion_1_tensor_algebra():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    n = 500
    d = lambda a, b: float(a == b)  # noqa: E731
    lc = 0.0
    for i, j, k, l, m, nn in itertools.product(range(3), repeat=6):
        det = (d(i, l) * (d(j, m) * d(k, nn) - d(j, nn) * d(k, m))
               - d(i, m) * (d(j, l) * d(k, nn) - d(j, nn) * d(k, l))
               + d(i, nn) * (d(j, l) * d(k, m) - d(j, m) * d(k, l)))
        lc = max(lc, abs(_perm_sign(i, j, k) * _perm_sign(l, m, nn) - det),
                 abs(tk.LEVI_CIVITA[i, j, k] * tk.LEVI_CIVITA[l, m, nn] - det))
    deltas = np.einsum("kji,nml->ijklmn", tk.LEVI_CIVITA, tk.LEVI_CIVITA)
    lc = max(lc, float(np.max(np.abs(tk.levi_civita_product_deltas() - deltas))))

    A = rng.normal(size=(n, 3, 3))
    G = rng.normal(size=(n, 3, 3, 3))
    a, b = rng.normal(size=(2, n, 3))
    Ld, Td = ET.lambda_dense, ET.theta_dense
    err_lam = err_theta = err_ups = 0.0
    for s in range(n):
        lam = np.zeros((3, 3))
        for i, j, k, l in itertools.product(range(3), repeat=4):
            lam[i, j] += Ld[i, j, k, l] * A[s, k, l]
        theta = np.zeros((3, 3, 3))
        for i, j, k, l, m, nn in itertools.product(range(3), repeat=6):
            theta[i, j, k] += Td[i, j, k, l, m, nn] * G[s, l, m, nn]
        ups = np.zeros(3)
        for i, j, k in itertools.product(range(3), repeat=3):
            ups[i] += _perm_sign(i, j, k) * a[s, j] * b[s, k]
        err_lam = max(err_lam, float(np.max(np.abs(ET.lam(A[s]) - lam))))
        err_theta = max(err_theta, float(np.max(np.abs(ET.theta(G[s]) - theta))))
        err_ups = max(err_ups, float(np.max(np.abs(tk.cross(a[s], b[s]) - ups))))
    elapsed = time.perf_counter() - t0
    record(1, "tensor algebra oracle equivalence", {
        "Levi-Civita 729 tuples": (lc == 0.0, f"{lc:.1e}"),
        "Λ 500": (err_lam <= 1e-12, f"{err_lam:.1e}"),
        "Θ 500": (err_theta <= 1e-12, f"{err_theta:.1e}"),
        "Υ 500": (err_ups <= 1e-12, f"{err_ups:.1e}"),
        "runtime < 5 s": (elapsed < 5, f"{elapsed:.2f} s"),
    }, t0)


# -- 2 ---------------------------------------------------------------------------------

def _rel(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def test_criterion_2_energy_forms():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    checks = {}
    for K in ((1.0, 0.8, 1.2), (1.0, 1.5, 0.7), (0.3, 2.0, 2.0)):
        frank = of.FrankConstants(*K)
        et = frank.tensors()
        h = _unit(rng, 200)
        S = rng.normal(size=(200, 3, 3))
        e1 = _rel(of.energy_density_k(h, S, et), of.energy_density_K(h, S, frank))
        e2 = _rel(of.energy_density_tensor(h, S, et), of.energy_density_K(h, S, frank))
        e3 = _rel(of.energy_density_dense(h, S, et), of.energy_density_K(h, S, frank))
        err = max(e1, e2, e3)
        checks[f"K={K}"] = (err <= 1e-12, f"{err:.1e}")
    record(2, "energy-form equivalence (K, k, tensor)", checks, t0)


# -- 3 ---------------------------------------------------------------------------------

def test_criterion_3_derivatives():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    m, step = 200, 1e-5
    h = rng.normal(size=(m, 3))
    S = rng.normal(size=(m, 3, 3))
    fd_S = np.zeros((m, 3, 3))
    fd_h = np.zeros((m, 3))
    for i, j in itertools.product(range(3), repeat=2):
        E = np.zeros((3, 3))
        E[i, j] = step
        fd_S[:, i, j] = (of.energy_density(h, S + E, ET) - of.energy_density(h, S - E, ET)) / (2 * step)
    for i in range(3):
        e = np.zeros(3)
        e[i] = step
        fd_h[:, i] = (of.energy_density(h + e, S, ET) - of.energy_density(h - e, S, ET)) / (2 * step)
    err_S = float(np.max(np.linalg.norm(of.F_S(h, S, ET) - fd_S, axis=(-2, -1))
                         / np.linalg.norm(fd_S, axis=(-2, -1))))
    err_h = float(np.max(np.linalg.norm(of.F_h(h, S, ET) - fd_h, axis=-1)
                         / np.linalg.norm(fd_h, axis=-1)))
    checks = {"F_S": (err_S <= 1e-6, f"{err_S:.1e}"), "F_h": (err_h <= 1e-6, f"{err_h:.1e}")}
    grids = {"planar n=32": fl.Grid.planar(32), "cube n=16": fl.Grid((16, 16, 16)),
             "planar n=16 central": fl.Grid.planar(16, backend="central")}
    for name, grid in grids.items():
        d = fl.random_director(grid, rng, kmax=2)
        w = fl.random_field(grid, rng, kmax=2)
        s = 1e-4
        gat = (fl.frank_energy(grid, d + s * w, ET) - fl.frank_energy(grid, d - s * w, ET)) / (2 * s)
        err = abs(grid.inner(fl.variational_q(grid, d, ET), w) - gat) / abs(gat)
        checks[f"q Gateaux {name}"] = (err <= 1e-4, f"{err:.1e}")
    elapsed = time.perf_counter() - t0
    checks["runtime < 30 s"] = (elapsed < 30, f"{elapsed:.2f} s")
    record(3, "derivative correctness", checks, t0)


# -- 4 ---------------------------------------------------------------------------------

def test_criterion_4_dissipation_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    n = 500
    d = _unit(rng, n)
    gv = rng.normal(size=(n, 3, 3))
    q = rng.normal(size=(n, 3))
    A = tk.sym(gv)
    checks = {}
    for name, c in (("non-Parodi", NON_PARODI), ("Parodi", PARODI)):
        lhs = ls.power_balance(d, gv, q, c)
        rhs = ls.dissipation_density(d, A, q, c) - ls.cross_term(d, A, q, c)
        err = float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))
        checks[f"identity {name}"] = (err <= 1e-12, f"{err:.1e}")
    cross = ls.cross_term(d, A, q, PARODI)
    checks["Parodi cross term"] = (not np.any(cross), f"max {np.max(np.abs(cross)):.1e}")
    record(4, "dissipation identity", checks, t0)


# -- 5 ---------------------------------------------------------------------------------

def test_criterion_5_energy_law():
    t0 = time.perf_counter()
    checks = {}
    for name, coeffs in (("Parodi", None), ("non-Parodi", NON_PARODI)):
        cfg = cf.build(None, "relaxing-director", {"init.velocity": 0.3, "output.cadence": 1})
        st = cf.setup(cfg)
        scn = st.reference
        if coeffs is not None:
            scn = sv.Scenario(scn.grid, scn.frank, coeffs, scn.v0, scn.d0)
        res, cum_ok = [], True
        for dt in (4e-3, 2e-3, 1e-3, 5e-4):
            traj = sv.run(scn, sv.SolverConfig(dt=dt, t_end=0.04))
            en = re_.energy_monitor(traj)
            res.append(float(np.nanmax(np.abs(en.residual))))
            cum_ok &= bool(np.all(en.cumulative_dissipation >= 0))
        orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
        checks[f"{name} orders"] = (bool(np.all(orders >= 1)),
                                    " ".join(f"{o:.2f}" for o in orders))
        checks[f"{name} cumulative dissipation ≥ 0"] = (cum_ok, str(cum_ok))
    elapsed = time.perf_counter() - t0
    checks["runtime < 2 min"] = (elapsed < 120, f"{elapsed:.1f} s")
    record(5, "discrete energy law", checks, t0)


# -- 6 ---------------------------------------------------------------------------------

def test_criterion_6_korn():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst = 0.0
    for grid in (fl.Grid.planar(32), fl.Grid((16, 16, 16)), fl.Grid((8, 12, 16), (1.0, 2.0, 3.0))):
        for _ in range(5):
            v = grid.project_divfree(fl.random_field(grid, rng, kmax=4))
            G = grid.grad(v)
            worst = max(worst, abs(grid.l2(tk.skw(G)) - grid.l2(tk.sym(G))) / grid.l2(tk.sym(G)))
    record(6, "Korn identity on the torus", {"15 fields": (worst <= 1e-10, f"{worst:.1e}")}, t0)


# -- 7 ---------------------------------------------------------------------------------

def _ball(rng, n, shape, r=None):
    X = rng.normal(size=(n,) + shape)
    X /= np.sqrt(np.sum(X**2, axis=tuple(range(1, X.ndim)), keepdims=True))
    rad = rng.uniform(0, 1, size=(n,) + (1,) * len(shape)) if r is None else r
    return X * rad


def test_criterion_7_young_measures():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    grid = fl.Grid.planar(16)
    d = fl.random_director(grid, rng)
    gym = ym.dirac_from_field(grid, d)
    direct = fl.frank_energy(grid, d, ET)
    err_dirac = abs(float(ym.pairing(gym, ym.frank_integrand(ET), d, grid)) - direct) / direct

    # integrands of bidegree (2, 2) are their own recession functions on the boundary
    h = _ball(rng, 20, (3,))
    h[:5] /= np.linalg.norm(h[:5], axis=-1, keepdims=True)
    S = _ball(rng, 20, (3, 3), r=1.0)
    theta_part = ym.TestIntegrand(lambda x, h, S: of.energy_density(h, S, ET)
                                  - of.energy_density(np.zeros_like(h), S, ET))
    hs = ym.TestIntegrand(lambda x, h, S: tk.dot(h, h) * np.sum(S**2, axis=(-2, -1)))
    err_rec = max(float(np.max(np.abs(ym.recession_eval(f, h, S) - f(None, h, S))))
                  for f in (theta_part, hs))

    K = 5
    w = rng.uniform(size=(200, 1, 1, K))
    w /= w.sum(axis=-1, keepdims=True)
    atoms = rng.normal(size=(200, 1, 1, K, 3, 3))
    base = ym.dirac_measure(np.zeros((200, 1, 1, 3, 3)))
    osc = ym.GeneralizedYoungMeasure(w, atoms, base.conc_mass, base.ang_weights, base.ang_h, base.ang_S)
    A = rng.normal(size=(200, 1, 1, 3, 3))
    gaps = np.concatenate([ym.jensen_gap(osc, A).ravel(), ym.jensen_gap(osc, ym.barycenter(osc)).ravel()])

    Sf = rng.normal(size=grid.n + (3, 3))
    P = rng.normal(size=grid.n + (3, 3))
    bary_dirac = np.array_equal(ym.barycenter(gym), grid.grad(d))
    bary_pair = max(float(np.max(np.abs(ym.barycenter(ym.oscillating_pair(Sf, P, wt)) - Sf)))
                    for wt in (0.5, 0.25))
    record(7, "Young-measure layer", {
        "Dirac pairing": (err_dirac <= 1e-12, f"{err_dirac:.1e}"),
        "recession invariance at 20 points": (err_rec <= 1e-12, f"{err_rec:.1e}"),
        "Jensen gap ≥ 0 on 200 atom sets": (bool(np.min(gaps) >= -1e-12), f"min {np.min(gaps):.1e}"),
        "barycenter (Dirac exact)": (bary_dirac, str(bary_dirac)),
        "barycenter (pairs)": (bary_pair <= 1e-12, f"{bary_pair:.1e}"),
    }, t0)


# -- 8 ---------------------------------------------------------------------------------

def test_criterion_8_relative_energy():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    grid = fl.Grid.planar(16)

    def pair():
        d = fl.random_director(grid, rng, kmax=2)
        v = grid.project_divfree(fl.random_field(grid, rng, kmax=2))
        return v, d

    v, d = pair()
    e_twin = re_.relative_energy(grid, ET, re_.Candidate(v, d), v, d)
    e_min, err_forms = np.inf, 0.0
    for i in range(200):
        vr, dr = pair()
        vc, dc = pair()
        gym = None
        if i % 2:
            P = 0.3 * rng.normal(size=grid.n + (3, 3))
            gym = ym.oscillating_pair(grid.grad(dc), P, rng.uniform(0.2, 0.8)).with_concentration(
                rng.uniform(size=grid.n), 0.5 * _unit(rng, 1)[0], _ball(rng, 1, (3, 3), r=1.0)[0])
        cand = re_.Candidate(vc, dc, gym)
        E = re_.relative_energy(grid, ET, cand, vr, dr)
        Ex = re_.relative_energy(grid, ET, cand, vr, dr, form="expanded")
        e_min = min(e_min, E)
        err_forms = max(err_forms, abs(E - Ex) / abs(Ex))
    G = rng.normal(size=(3, 3, 3))
    vc, dc = pair()
    base = re_.relative_energy(grid, ET, re_.Candidate(vc, dc), v, d)
    half = 0.0
    for m in (0.1, 0.7):
        defect = ym.uniform_defect(grid.n, m, G)
        with_defect = re_.relative_energy(grid, ET, re_.Candidate(vc, dc, None, defect), v, d)
        expect = 0.5 * ym.defect_mass_total(defect, grid)
        half = max(half, abs((with_defect - base) - expect) / expect)
    record(8, "relative energy properties", {
        "twin E": (e_twin == 0, f"{e_twin:.1e}"),
        "E ≥ 0 on 200 pairs": (e_min >= 0, f"min {e_min:.3e}"),
        "compact vs expanded": (err_forms <= 1e-11, f"{err_forms:.1e}"),
        "defect adds ½ mass": (half <= 1e-12, f"{half:.1e}"),
    }, t0)


# -- 9 ---------------------------------------------------------------------------------

def test_criterion_9_certification(tmp_path):
    t0 = time.perf_counter()
    checks = {}
    base = {"grid.n": 16, "solver.dt": 1e-3, "solver.t_end": 0.5, "output.cadence": 10}

    twin = cli.compare(cf.build(None, "perturbed-twin", dict(base, **{"init.epsilon": 0.0})))
    Emax = float(np.max(twin["comparison"].E))
    checks["twin E < 1e-8"] = (Emax < 1e-8, f"max {Emax:.1e}")
    checks["twin certifies"] = (twin["report"].verdict, f"margin {twin['report'].min_margin:.2e}")

    pert = cli.compare(cf.build(None, "perturbed-twin", dict(base, **{"init.epsilon": 1e-2})))
    rep = pert["report"]
    checks["ε=1e-2 certifies, margin > 0"] = (rep.verdict and rep.min_margin > 0,
                                             f"margin {rep.min_margin:.2e}, C_δ {pert['cdelta']:g}")
    checks["C_δ calibrated"] = (pert["calibrated"], str(pert["calibrated"]))

    c0s = []
    for eps in (1e-2, 5e-3, 2.5e-3):
        st = cf.setup(cf.build(None, "perturbed-twin", dict(base, **{"init.epsilon": eps})))
        c0s.append(re_.initial_constant_c0(st.grid, st.reference.tensors,
                                           re_.Candidate(st.candidate.v0, st.candidate.d0),
                                           st.reference.v0, st.reference.d0))
    ratios = np.array(c0s[:-1]) / np.array(c0s[1:])
    checks["c0 = O(ε²)"] = (bool(np.all(np.abs(ratios - 4) < 0.2)),
                            f"c0(1e-2)={c0s[0]:.3e}, ratios " + " ".join(f"{r:.3f}" for r in ratios))

    adv = tmp_path / "adv.txt"
    adv.write_text("preset = perturbed-twin\nmeasure.defect_mass = 0.5\n")
    code = cli.main(["compare", "--config", str(adv), "--out", str(tmp_path / "adv")])
    checks["adversarial exits 4"] = (code == 4, f"exit {code}")
    elapsed = time.perf_counter() - t0
    checks["runtime < 5 min"] = (elapsed < 300, f"{elapsed:.0f} s")
    record(9, "weak-strong certification", checks, t0)


# -- 10 --------------------------------------------------------------------------------

def test_criterion_10_mv_residuals():
    t0 = time.perf_counter()
    grid = fl.Grid.planar(16)
    phis = [grid.project_divfree(fl.random_field(grid, np.random.default_rng(100 + i), kmax=3))
            for i in range(10)]
    psis = [fl.random_field(grid, np.random.default_rng(200 + i), kmax=3) for i in range(10)]
    cfg = cf.build(None, "relaxing-director", {"init.velocity": 0.3})
    st = cf.setup(cfg)
    scn = sv.Scenario(st.grid, FRANK, NON_PARODI, st.reference.v0, st.reference.d0)
    dts = (4e-3, 2e-3, 1e-3, 5e-4)
    worst = []
    for dt in dts:
        traj = sv.run(scn, sv.SolverConfig(dt=dt, t_end=dt))
        a, b = (ym.SlabEnd(s.v, s.d, ym.dirac_from_field(grid, s.d), ym.zero_defect(grid.n))
                for s in traj.states)
        r = ym.mv_residuals(grid, a, b, dt, NON_PARODI, ET, phis, psis)
        worst.append([float(np.max(np.abs(r[k]))) for k in ("velocity", "director", "q")])
    worst = np.array(worst)
    dec = bool(np.all(worst[1:, :2] < worst[:-1, :2]))
    bound = worst[:, :2] / np.array(dts)[:, None]
    record(10, "measure-valued residuals", {
        "velocity": (True, " ".join(f"{x:.1e}" for x in worst[:, 0])),
        "director": (True, " ".join(f"{x:.1e}" for x in worst[:, 1])),
        "decreasing": (dec, str(dec)),
        "≤ C·dt with C from the coarsest run": (bool(np.all(bound <= bound[0] + 1e-15)),
                                               f"max residual/dt {np.max(bound):.2e}"),
        "q (backend error)": (bool(np.max(worst[:, 2]) < 1e-5), f"{np.max(worst[:, 2]):.1e}"),
    }, t0)


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    fails = 0
    for name, fn in sorted(((k, v) for k, v in globals().items() if k.startswith("test_criterion_")),
                           key=lambda kv: int(kv[0].split("_")[2])):
        try:
            if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as tmp:
                    fn(Path(tmp))
            else:
                fn()
        except AssertionError:
            fails += 1
    sys.exit(1 if fails else 0)
