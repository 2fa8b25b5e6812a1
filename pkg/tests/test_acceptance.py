"""End-to-end acceptance suite.

Each test covers one published acceptance criterion and prints a single
PASS/FAIL line on the terminal (bypassing capture) before asserting.
"""

import math
import numpy as np
import pytest

from dissmem import concat, engine, gadget, lattice4d, toric4d, toy2d
from dissmem.concat import five_qubit_code
from dissmem.gadget import GadgetConfig, dephasing_liouvillian, sigma_minus
from dissmem.lattice4d import build
from dissmem.toric4d import ToomParams


@pytest.fixture
def report(capfd):
    """One PASS/FAIL line per criterion, written past pytest's capture."""

    def _report(criterion: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        with capfd.disabled():
            print(line, flush=True)
        assert ok, line

    return _report


def test_criterion_1_threshold_exact(report):
    got = concat.threshold(5, 0.2, 1.0)
    expected = 0.2 * 0.2 * 1.0 / (5 * 5)
    ok = got == expected and abs(got - 1.6e-3) < 1e-15
    report(1, ok, f"threshold(5, 0.2, 1) = {got!r} (want 1.6e-3 exactly)")


def test_criterion_2_bound_consistency(report):
    rng = engine.stream(2024, 0)
    worst = 0.0
    for _ in range(50):
        gn = float(rng.uniform(1e-5, 1.5e-3))
        gc = float(rng.uniform(0.5, 2.0))
        d = float(rng.uniform(0.05, 0.5))
        for n in range(1, 7):
            a = concat.p_n_bound(n, gn, gc, d, 5)
            b = concat.p_n_recursive(n, gn, gc, d, 5)
            worst = max(worst, abs(a - b) / max(a, 1e-300))
    m0 = concat.lifetime_bound(0, 7e-4, 1.0, 0.2, 5)
    ok = worst < 1e-12 and m0 == 7e-4
    report(2, ok, f"closed form vs recursion rel dev {worst:.2e}, "
                   f"lifetime_bound(M=0) = {m0!r}")


def test_criterion_3_mc_vs_bounds(report):
    code = five_qubit_code()
    gn = 8e-4
    p1 = concat.p_n_bound(1, gn, 1.0, 0.2, 5)
    rate_bound = concat.lifetime_bound(1, gn, 1.0, 0.2, 5)
    # free-running run for the time-averaged block-error indicator
    params = concat.ConcatParams(code, M=1, Gamma_noise=gn, t_max=5000.0,
                                 seed=311, check_interval=1e18)
    _, results = concat.mc_estimate(params, 2000)
    avgs = np.array([r.has_error_avg[1] for r in results])
    he_mean = float(avgs.mean())
    he_se = float(avgs.std(ddof=1) / math.sqrt(len(avgs)))
    ok_he = he_mean <= p1 + 3 * he_se
    # separate checked run for the top-level failure rate
    params = concat.ConcatParams(code, M=1, Gamma_noise=gn, t_max=5000.0,
                                 seed=313, check_interval=1.0)
    _, results = concat.mc_estimate(params, 2000)
    rate, rate_se = concat.failure_rate(results)
    ok_rate = rate <= rate_bound + 3 * rate_se
    report(3, ok_he and ok_rate,
            f"HasError {he_mean:.5f}±{he_se:.5f} vs p_1={p1}; "
            f"failure rate {rate:.3e}±{rate_se:.1e} vs bound {rate_bound:.1e}")


def test_criterion_4_factorization(report):
    code = five_qubit_code()
    params = concat.ConcatParams(code, M=2, Gamma_noise=0.05, t_max=200.0,
                                 seed=401, check_interval=1e18)
    chain = ((1, 1), (1,))
    _, results = concat.mc_estimate(params, 50, sample_chain=chain,
                                    sample_interval=2.0)
    n_samples = sum(len(r.enabled_samples) for r in results)
    lhs, rhs, gap, gap_se = concat.factorization_gap(results, len(chain))
    ok = n_samples >= 5000 and abs(gap) <= 3 * gap_se
    report(4, ok, f"joint {lhs:.5f} vs product {rhs:.5f}, "
                   f"gap {gap:+.4f}±{gap_se:.4f} over {n_samples} samples")


def test_criterion_5_static_threshold(report):
    qs = (0.05, 0.075, 0.09, 0.11)
    sizes = (3, 5, 7)
    rates = {}
    for N in sizes:
        for q in qs:
            rates[N, q] = toric4d.static_estimate(
                N, q, toric4d.CONVENTION_HALF, 500, seed=200)
    diffs = []
    for q in qs:
        a, b = rates[3, q], rates[7, q]
        diffs.append((q, b.mean - a.mean, math.hypot(a.stderr, b.stderr)))
    # crossing: last sign change of success(7) - success(3) along the grid
    crossing = None
    for (q1, d1, _), (q2, d2, _) in zip(diffs, diffs[1:]):
        if d1 > 0 >= d2:
            crossing = (q1, q2)
    ok_band = crossing is not None and 0.04 <= crossing[0] \
        and crossing[1] <= 0.12
    below_q, above_q = crossing if crossing else (qs[0], qs[-1])
    d_below = next(x for x in diffs if x[0] == below_q)
    d_above = next(x for x in diffs if x[0] == above_q)
    ok_order = (d_below[1] >= -2 * d_below[2]
                and d_above[1] <= 2 * d_above[2])
    report(5, ok_band and ok_order,
            f"success(7)-success(3) by q: "
            + ", ".join(f"{q}: {d:+.3f}±{s:.3f}" for q, d, s in diffs)
            + f"; crossing bracket {crossing} within [0.04, 0.12]")


def _lifetime_values(N, ge, trials, t_max=2e4):
    params = ToomParams(N=N, gamma_eps=ge, t_max=t_max, seed=100,
                        noise_convention=toric4d.CONVENTION_FULL)
    est = toric4d.lifetime_estimate(params, trials)
    vals = np.array(est.values)
    # mean of min(T, t_max): a censoring-robust lower bound on the lifetime
    lb = float(vals.mean())
    lb_se = float(vals.std(ddof=1) / math.sqrt(len(vals)))
    return est, lb, lb_se


def test_criterion_6_dynamic_lifetime(report):
    # deep below threshold: N=5 beats N=3 by at least 2x
    est3, m3, s3 = _lifetime_values(3, 0.002, 200)
    _, m5, s5 = _lifetime_values(5, 0.002, 60)
    ok_factor = (m5 - 2 * s5) >= 2.0 * (m3 + 2 * s3)
    # crossing of the N=3 and N=5 curves
    grid = (0.004, 0.005, 0.006, 0.007)
    diffs = []
    for ge in grid:
        _, a3, se3 = _lifetime_values(3, ge, 200)
        _, a5, se5 = _lifetime_values(5, ge, 200)
        diffs.append((ge, a5 - a3))
    crossing = None
    for (g1, d1), (g2, d2) in zip(diffs, diffs[1:]):
        if d1 > 0 >= d2:
            crossing = 0.5 * (g1 + g2)
    ok_cross = crossing is not None and 0.002 <= crossing <= 0.008
    # far above threshold: no gain from size
    _, h3, hs3 = _lifetime_values(3, 0.02, 200, t_max=1e3)
    _, h5, hs5 = _lifetime_values(5, 0.02, 200, t_max=1e3)
    ok_high = h5 <= h3 + 2 * math.hypot(hs3, hs5)
    report(6, ok_factor and ok_cross and ok_high,
            f"at 0.002: N5 >= {m5:.0f}±{s5:.0f} vs N3 {m3:.0f}±{s3:.0f}; "
            f"crossing ~{crossing}; at 0.02: N5 {h5:.2f} vs N3 {h3:.2f}")


def test_criterion_7_toy_model(report):
    # Convention (see the ledger): the reference correction generator sums
    # over ordered neighbour pairs, so each unordered voting triple fires at
    # twice the base rate (gamma_c = 2), and the majority observable fails
    # only when the magnetization goes strictly negative (tie survives).
    # exact single-spin law
    params = toy2d.ToyParams(N=1, gamma_c=0.0, gamma_phase=1.0, t_max=1e4,
                             seed=700, check_interval=0.01, tie_fails=False)
    est = toy2d.majority_lifetime(params, 10_000)
    ok_law = abs(est.mean - 1.0) < 3 * est.stderr + 0.01
    # protected 2x2 vs bare qubit at weak dephasing
    p1 = toy2d.ToyParams(N=1, gamma_c=2.0, gamma_phase=0.01, t_max=1e6,
                         seed=701, tie_fails=False)
    e1 = toy2d.majority_lifetime(p1, 400)
    p2 = toy2d.ToyParams(N=2, gamma_c=2.0, gamma_phase=0.01, t_max=1e6,
                         seed=702, tie_fails=False)
    e2 = toy2d.majority_lifetime(p2, 400)
    ratio = e2.mean / e1.mean
    ok_ratio = 25.0 <= ratio <= 100.0
    # optimal size under combined dephasing and depolarization
    scan = toy2d.ToyParams(N=1, gamma_c=2.0, gamma_phase=0.1, gamma_dep=5e-5,
                           t_max=8000.0, seed=703, tie_fails=False)
    best, rows = toy2d.optimal_size(scan, range(1, 7), 100)
    taus = {N: tau for N, _, _, tau in rows}
    gain = taus[best] / taus[1]
    ok_scan = best == 4 and gain >= 30.0
    report(7, ok_law and ok_ratio and ok_scan,
            f"N=1 lifetime {est.mean:.3f}±{est.stderr:.3f} (law 1.0); "
            f"2x2/1x1 ratio {ratio:.1f}; best size {best} with gain "
            f"{gain:.0f}x")


def test_criterion_8_gadget_bounds(report):
    rho0 = np.eye(2, dtype=complex) / 2
    all_ok = True
    details = []
    slope_pairs = []
    for E in (0, 1):
        for eps in (0.01, 0.05, 0.1):
            lsys = dephasing_liouvillian(2, E * eps * eps) if E else None
            cfg = GadgetConfig(d=2, L=sigma_minus(), epsilon=eps, E=float(E),
                               lsys=lsys, tau_max=50.0)
            result = gadget.verify(cfg, rho0, norm="trace")
            all_ok = all_ok and result.all_pass()
            details.append(f"E={E} eps={eps}: "
                           f"{'ok' if result.all_pass() else result.passes}")
            if E == 0:
                slope_pairs.append((cfg, result))
    slope = gadget.residual_slope(slope_pairs)
    ok = all_ok and slope >= 3.5
    report(8, ok, "; ".join(details) + f"; residual slope {slope:.2f}")


def test_criterion_9_structural_suites(report):
    checks = []
    # boundary-of-boundary: all six faces of any cube cancel on edges
    for N in (2, 3):
        lat = build(N)
        ok = True
        for ci in range(lat.n_cubes):
            counts = np.zeros(lat.n_edges, int)
            for fi in lat.cube_face_table[ci]:
                counts[lat.face_edge_table[fi]] += 1
            ok = ok and not np.any(counts % 2)
        checks.append(("boundary-of-boundary", ok))
    # duality incidence isomorphism, including the exact table relabeling
    for N in (2, 3):
        lat = build(N)
        fp, ec = lat.face_sector_perm, lat.edge_cube_sector_perm
        iso = all(
            set(ec[lat.face_edge_table[fi]]) ==
            set(lat.face_cube_table[fp[fi]])
            and set(ec[lat.face_edge_table[fi][:2]]) ==
            set(lat.face_cube_table[fp[fi]][:2])
            for fi in range(lat.n_faces))
        a = lat.sector_tables(dual=False)
        b = lat.sector_tables(dual=True)
        iso = iso and np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
        checks.append(("duality isomorphism", iso))
    # 1e5 fuzzed flips: incremental syndromes/active sets vs recomputation
    lat = build(3)
    state = toric4d.SectorState(lat)
    rng = engine.stream(900, 0)
    faces = rng.integers(0, lat.n_faces, size=100_000)
    ok = True
    for i, f in enumerate(faces):
        toric4d.apply_flip(state, int(f))
        if (i + 1) % 20_000 == 0:
            synd, active = state.recompute()
            ok = ok and np.array_equal(synd, state.synd) \
                and active == state.active_faces
    checks.append(("incremental vs recomputed state", ok))
    # code distance by brute force
    checks.append(("code distance 3", five_qubit_code().distance == 3))
    # determinism of full experiments under varying parallelism
    params = ToomParams(N=2, gamma_eps=0.02, t_max=500.0, seed=901)
    a = toric4d.lifetime_estimate(params, 12, parallelism=1)
    b = toric4d.lifetime_estimate(params, 12, parallelism=4)
    det = a.values == b.values
    tp = toy2d.ToyParams(N=2, gamma_phase=0.3, t_max=100.0, seed=902)
    det = det and (toy2d.majority_lifetime(tp, 12, 1).values
                   == toy2d.majority_lifetime(tp, 12, 4).values)
    checks.append(("parallel determinism", det))
    ok_all = all(ok for _, ok in checks)
    report(9, ok_all,
            "; ".join(f"{name}: {'ok' if ok else 'FAILED'}"
                      for name, ok in checks))
