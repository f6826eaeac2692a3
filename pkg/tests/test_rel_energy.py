import math

import numpy as np
import pytest

from nematic import fields as fl
from nematic import leslie as ls
from nematic import rel_energy as re_
from nematic import solver as sv
from nematic import tensor_kernel as tk
from nematic import young_measure as ym


def random_pair(grid, rng):
    d = fl.random_director(grid, rng, kmax=2)
    v = grid.project_divfree(fl.random_field(grid, rng, kmax=2))
    return v, d


def test_total_energy(rng, planar, et):
    z = np.zeros(planar.n + (3,))
    d0 = np.broadcast_to([0, 0, 1.0], planar.n + (3,)).copy()
    eb = re_.total_energy(planar, et, z, d0)
    assert eb.total == 0
    v, d = random_pair(planar, rng)
    direct = re_.total_energy(planar, et, v, d)
    paired = re_.total_energy(planar, et, v, d, gym=ym.dirac_from_field(planar, d))
    assert paired.frank == pytest.approx(direct.frank, rel=1e-12)
    defect = ym.uniform_defect(planar.n, 0.4, rng.normal(size=(3, 3, 3)))
    with_defect = re_.total_energy(planar, et, v, d, defect=defect)
    assert with_defect.total - direct.total == pytest.approx(0.2 * planar.volume)


def test_relative_energy_properties(rng, planar, et):
    v, d = random_pair(planar, rng)
    assert re_.relative_energy(planar, et, re_.Candidate(v, d), v, d) == 0
    defect = ym.uniform_defect(planar.n, 0.6, rng.normal(size=(3, 3, 3)))
    E = re_.relative_energy(planar, et, re_.Candidate(v, d, None, defect), v, d)
    assert E == pytest.approx(0.3 * planar.volume, rel=1e-14)
    for _ in range(20):
        v2, d2 = random_pair(planar, rng)
        P = 0.3 * rng.normal(size=planar.n + (3, 3))
        gym = ym.oscillating_pair(planar.grad(d2), P, rng.uniform(0.2, 0.8)).with_concentration(
            rng.uniform(size=planar.n), 0.5 * fl.normalize(rng.normal(size=3)),
            np.eye(3) / np.sqrt(3))
        cand = re_.Candidate(v2, d2, gym)
        compact = re_.relative_energy(planar, et, cand, v, d)
        expanded = re_.relative_energy(planar, et, cand, v, d, form="expanded")
        assert compact >= 0
        assert compact == pytest.approx(expanded, rel=1e-11)


def test_relative_energy_monotone_in_defect_and_grid_check(rng, planar, cube, et):
    v, d = random_pair(planar, rng)
    v2, d2 = random_pair(planar, rng)
    G = rng.normal(size=(3, 3, 3))
    values = [re_.relative_energy(planar, et, re_.Candidate(v2, d2, None, ym.uniform_defect(planar.n, m, G)), v, d)
              for m in (0.0, 0.1, 0.2)]
    assert values[0] < values[1] < values[2]
    vc, dc = random_pair(cube, rng)
    with pytest.raises(ValueError):
        re_.relative_energy(planar, et, re_.Candidate(vc, dc), v, d)


def test_relative_energy_includes_jensen_gap(rng, planar, et):
    v, d = random_pair(planar, rng)
    P = 0.2 * rng.normal(size=planar.n + (3, 3))
    gym = ym.oscillating_pair(planar.grad(d), P)
    E = re_.relative_energy(planar, et, re_.Candidate(v, d, gym), v, d)
    # Λ-part of an oscillation about the barycenter; Θ adds a nonnegative amount
    lam_part = 0.5 * 0.5 * 2 * planar.integrate(tk.frob(P, et.lam(P)))
    assert E >= lam_part - 1e-12 and E > 0


def test_relative_dissipation(rng, planar, et, parodi, non_parodi):
    v, d = random_pair(planar, rng)
    assert re_.relative_dissipation(planar, et, parodi, v, d, v, d) == 0
    # velocity difference only
    x, y, _ = planar.coordinates()
    delta = planar.project_divfree(np.stack([np.sin(y), 0 * y, 0 * y], axis=-1))
    c = non_parodi
    A = tk.sym(planar.grad(delta))
    Ad = tk.matvec(A, d)
    expect = (c.mu4 * planar.inner(A, A) + (c.mu56 - c.lam * c.mu23) * planar.inner(Ad, Ad)
              + (c.mu1 + c.lam * c.mu23) * planar.inner(tk.dot(d, Ad), tk.dot(d, Ad)))
    assert re_.relative_dissipation(planar, et, c, v + delta, d, v, d) == pytest.approx(expect, rel=1e-12)
    for _ in range(20):
        v2, d2 = random_pair(planar, rng)
        assert re_.relative_dissipation(planar, et, c, v2, d2, v, d) >= 0


def test_gronwall_weight(rng, planar):
    z = np.zeros(planar.n + (3,))
    assert re_.gronwall_weight_K(planar, z, z, z, cdelta=2.5) == pytest.approx(2.5)
    v, d = random_pair(planar, rng)
    dt_d = fl.random_field(planar, rng)
    K1 = re_.gronwall_weight_K(planar, v, d, dt_d) - re_.gronwall_weight_K(planar, z, d, dt_d)
    K2 = re_.gronwall_weight_K(planar, 2 * v, d, dt_d) - re_.gronwall_weight_K(planar, z, d, dt_d)
    assert K2 >= 2 * K1 and K2 > 0
    assert re_.gronwall_weight_K(planar, v, d, dt_d, 3.0) == pytest.approx(
        3 * re_.gronwall_weight_K(planar, v, d, dt_d, 1.0))


def test_initial_constant(rng, planar, et):
    v, d = random_pair(planar, rng)
    assert re_.initial_constant_c0(planar, et, re_.Candidate(v, d), v, d) == 0
    defect = ym.uniform_defect(planar.n, 0.5, rng.normal(size=(3, 3, 3)))
    c0 = re_.initial_constant_c0(planar, et, re_.Candidate(v, d, None, defect), v, d)
    assert c0 == pytest.approx(0.25 * planar.volume)
    psi = fl.random_field(planar, rng, kmax=2)
    vals = [re_.initial_constant_c0(planar, et, re_.Candidate(v, fl.normalize(d + e * psi)), v, d)
            for e in (1e-2, 5e-3)]
    assert vals[0] / vals[1] == pytest.approx(4, rel=0.05)


def test_zeta(parodi, non_parodi):
    assert re_.minimal_zeta(parodi) == 0
    assert re_.zeta_admissible(parodi, 0.5)
    z = re_.minimal_zeta(ls.LeslieCoefficients(0.5, 0.2, 0.1, 1.0, 0.3, 0.2, 0.0))
    assert 0 < z < 1
    c = ls.LeslieCoefficients(0.5, 0.2, 0.1, 1.0, 0.3, 0.2, 0.0)
    assert not re_.zeta_admissible(c, 0.9 * z) and re_.zeta_admissible(c, 1.01 * z)
    assert not re_.zeta_admissible(parodi, 1.0)


def samples(t, E, W, K):
    return [re_.RelativeEnergySample(*r) for r in zip(t, E, W, K)]


def test_gronwall_certify_cases():
    t = np.linspace(0, 1, 11)
    one = np.ones_like(t)
    zero = np.zeros_like(t)
    assert re_.gronwall_certify(samples(t, 0.5 * one, zero, zero), 0.5, 0.5).verdict
    assert not re_.gronwall_certify(samples(t, 0.6 * one, zero, zero), 0.5, 0.5).verdict
    k, c0 = 0.7, 0.3
    tf = np.linspace(0, 1, 2001)
    rep = re_.gronwall_certify(samples(tf, c0 * np.exp(k * tf), 0 * tf, k + 0 * tf), c0, 0.5, tol=1e-6)
    assert rep.verdict and abs(rep.min_margin) < 1e-6
    with pytest.raises(re_.CertificationError):
        re_.gronwall_certify(samples(t[::-1], one, zero, zero), 1.0, 0.5)
    with pytest.raises(re_.CertificationError):
        re_.gronwall_certify(samples(t, one, zero, zero), 1.0, 1.0)


def test_calibrate_cdelta():
    t = np.linspace(0, 1, 11)
    E = 0.1 * np.exp(0.5 * t)
    run = (t, E, 0 * t, np.ones_like(t), 0.1)
    cd = re_.calibrate_cdelta([run], 0.5, ladder=(0.01, 0.1, 1.0))
    assert cd == 1.0
    assert re_.calibrate_cdelta([run], 0.5, ladder=(0.01,)) is None


def test_energy_monitor_and_csv(tmp_path, rng, planar, frank, parodi, non_parodi):
    d = fl.random_director(planar, rng, kmax=1)
    v = planar.project_divfree(fl.random_field(planar, rng, kmax=1, amplitude=0.3))
    res = []
    for dt in (4e-3, 2e-3):
        traj = sv.run(sv.Scenario(planar, frank, non_parodi, v, d), sv.SolverConfig(dt=dt, t_end=0.02))
        en = re_.energy_monitor(traj)
        assert math.isnan(en.residual[0])
        res.append(np.nanmax(np.abs(en.residual)))
        assert np.all(en.cumulative_dissipation >= 0)
    assert res[1] < 0.5 * res[0]
    z = np.zeros_like(v)
    d0 = np.broadcast_to([0, 0, 1.0], planar.n + (3,)).copy()
    en0 = re_.energy_monitor(sv.run(sv.Scenario(planar, frank, parodi, z, d0),
                                    sv.SolverConfig(dt=1e-3, t_end=0.005)))
    assert np.all(en0.residual[1:] == 0)
    traj = sv.run(sv.Scenario(planar, frank, parodi, v, d), sv.SolverConfig(dt=2e-3, t_end=0.01))
    assert not np.any(re_.energy_monitor(traj).cross_term)
    rows = re_.monitor_rows(en)
    path = tmp_path / "m.csv"
    re_.write_monitor_csv(path, rows)
    back = re_.read_monitor_csv(path)
    assert tuple(back) == re_.CSV_COLUMNS
    for i, name in enumerate(re_.CSV_COLUMNS):
        col = np.array([r[i] for r in rows])
        assert np.array_equal(col, back[name], equal_nan=True)


def test_compare_trajectories(rng, planar, frank, parodi):
    d = fl.random_director(planar, rng, kmax=1)
    v = planar.project_divfree(fl.random_field(planar, rng, kmax=1, amplitude=0.3))
    cfg = sv.SolverConfig(dt=2e-3, t_end=0.04, cadence=5)
    ref = sv.run(sv.Scenario(planar, frank, parodi, v, d), cfg)
    twin = re_.compare_trajectories(ref, ref)
    assert np.all(twin.E == 0) and twin.c0 == 0 and twin.certify(0.5, 1.0).verdict
    psi = fl.random_field(planar, np.random.default_rng(1), kmax=2)
    cand = sv.run(sv.Scenario(planar, frank, parodi, v, fl.normalize(d + 1e-2 * psi)), cfg)
    cmp = re_.compare_trajectories(cand, ref)
    assert cmp.c0 > 0 and cmp.certify(0.5, 1e-3).verdict
    assert re_.sobolev_shadow(planar, cand.final.d, ref.final.d) > 0
