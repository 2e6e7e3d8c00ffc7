"""Acceptance suite: every criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -s`` to see one line per criterion.
"""

import math
import time

import numpy as np
import pytest

from conftest import haar_unitary
from kickedwell.basis import BoxBasis, CosRatio, CosShifted, deriv_squared_spectrum
from kickedwell.dephase import DensityMatrix, DephasingEngine, DephasingSchedule
from kickedwell.entangle import entanglement_series, oracle_matches_population_map
from kickedwell.evolve import asymptotic_rate, basis_state, run_trajectory
from kickedwell.kickop import kick_operator_bessel, kick_operator_quadrature, transition_matrix
from kickedwell.harness import emit_figure

PI = math.pi


def report(name, ok, detail):
    print(f"[acceptance] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def shift_quarter_run():
    """Criterion 1 pipeline, timed end to end."""
    t0 = time.perf_counter()
    basis = BoxBasis(256)
    pot = CosShifted(1.0, PI / 4)
    u = kick_operator_quadrature(basis, pot)
    z = transition_matrix(u)
    spec = deriv_squared_spectrum(pot, u.dim)
    traj = run_trajectory(z, basis, basis_state(z.dim, 1), 100, spectrum=spec)
    elapsed = time.perf_counter() - t0
    return basis, u, z, traj, elapsed


@pytest.fixture(scope="module")
def ratio_three_quarter_run():
    """Criterion 2 pipeline."""
    basis = BoxBasis(256)
    pot = CosRatio(1.0, 0.75)
    u = kick_operator_bessel(basis, pot)
    z = transition_matrix(u)
    spec = deriv_squared_spectrum(pot, u.dim)
    traj = run_trajectory(z, basis, basis_state(z.dim, 1), 100, spectrum=spec)
    return basis, u, z, traj


@pytest.fixture(scope="module")
def cross_method_pairs():
    """Criterion 4 operators, both routes, r in {pi/4, pi/2, pi}."""
    pairs = {}
    basis = BoxBasis(64)
    for r in (PI / 4, PI / 2, PI):
        pot = CosRatio(1.0, r)
        pairs[r] = (
            kick_operator_bessel(basis, pot),
            kick_operator_quadrature(basis, pot),
        )
    return pairs


@pytest.fixture(scope="module")
def ratio_trio_trajectories():
    """Criteria 6 figure configs: k = hbar, r in {pi/4, pi/2, pi}, N = 50."""
    out = {}
    basis = BoxBasis(72)
    for r in (PI / 4, PI / 2, PI):
        u = kick_operator_bessel(basis, CosRatio(1.0, r))
        z = transition_matrix(u)
        out[r] = run_trajectory(z, basis, basis_state(z.dim, 1), 50)
    return out


def test_criterion_1_constant_rate(shift_quarter_run):
    _, _, _, traj, elapsed = shift_quarter_run
    gain = traj.energies - traj.energies[0]
    expect = 0.25 * np.arange(101)
    worst = float(np.max(np.abs(gain[1:] - expect[1:]) / gain[1:]))
    report(
        "criterion 1 (constant rate k^2/4)",
        worst < 1e-6 and elapsed < 5.0,
        f"max rel dev {worst:.3e} (tol 1e-6), runtime {elapsed:.2f}s (limit 5s)",
    )


def test_criterion_2_quarter_ratio_rate(ratio_three_quarter_run):
    _, _, _, traj = ratio_three_quarter_run
    increments = np.diff(traj.energies)
    worst = float(np.max(np.abs(increments - 0.5625) / 0.5625))
    report(
        "criterion 2 (constant rate k^2 R^2, R = 3/4)",
        worst < 1e-6,
        f"max rel increment dev {worst:.3e} (tol 1e-6)",
    )


def test_criterion_3_asymptotic_rate():
    basis = BoxBasis(320)
    pot = CosRatio(1.0, PI / 2)
    u = kick_operator_bessel(basis, pot)
    z = transition_matrix(u)
    leakage_ok = z.max_active_leakage < 1e-8
    spec = deriv_squared_spectrum(pot, u.dim)
    rep = asymptotic_rate(z, spec, basis, n_steps=2000)
    target = (PI / 2) ** 2 - (PI / 2) * math.sin(4 * (PI / 2) * PI) / (4 * PI)
    dev = abs(rep.numeric_rate - target) / target
    report(
        "criterion 3a (asymptotic rate, R = pi/2)",
        leakage_ok and dev < 0.02,
        f"slope dev {dev:.4f} (tol 0.02), max leakage {z.max_active_leakage:.2e} (tol 1e-8)",
    )

    devs = {}
    for alpha in (0.0, PI / 6, 1.0):
        b = BoxBasis(64)
        p = CosShifted(1.0, alpha)
        ua = kick_operator_quadrature(b, p, n_build=1536)
        za = transition_matrix(ua)
        sa = deriv_squared_spectrum(p, ua.dim)
        ra = asymptotic_rate(za, sa, b, n_steps=2000)
        devs[alpha] = abs(ra.numeric_rate - 0.25) / 0.25
    worst = max(devs.values())
    report(
        "criterion 3b (alpha-independence of the rate)",
        worst < 0.02,
        "slope devs " + ", ".join(f"alpha={a:.3f}: {d:.4f}" for a, d in devs.items()),
    )


def test_criterion_4_cross_method(cross_method_pairs):
    worst_diff, worst_defect = 0.0, 0.0
    for r, (ub, uq) in cross_method_pairs.items():
        assert ub.dim == uq.dim
        worst_diff = max(worst_diff, float(np.abs(ub.matrix - uq.matrix).max()))
        worst_defect = max(worst_defect, ub.unitarity_defect, uq.unitarity_defect)
    report(
        "criterion 4 (Bessel vs quadrature operators)",
        worst_diff < 1e-9 and worst_defect < 1e-10,
        f"max entrywise diff {worst_diff:.2e} (tol 1e-9), "
        f"max unitarity defect {worst_defect:.2e} (tol 1e-10)",
    )


def test_criterion_5_stochasticity(
    shift_quarter_run, ratio_three_quarter_run, cross_method_pairs
):
    operators = [shift_quarter_run[1], ratio_three_quarter_run[1]]
    operators += [u for pair in cross_method_pairs.values() for u in pair]
    lo, hi, zmin = 1.0, 1.0, 0.0
    for u in operators:
        z = transition_matrix(u)
        cols = z.z.sum(axis=0)[: z.n_active]
        rows = z.z.sum(axis=1)[: z.n_active]
        zmin = min(zmin, float(z.z.min()))
        lo = min(lo, float(cols.min()), float(rows.min()))
        hi = max(hi, float(cols.max()), float(rows.max()))
    report(
        "criterion 5 (stochasticity suite)",
        zmin >= 0.0 and lo >= 1.0 - 1e-6 and hi <= 1.0 + 1e-12,
        f"Z min {zmin:.1e}, row/col sums in [{lo:.12f}, {hi:.12f}]",
    )


def test_criterion_6_entanglement_identities(ratio_trio_trajectories):
    series = {r: entanglement_series(traj) for r, traj in ratio_trio_trajectories.items()}
    telescope_ok = exact_ok = nonneg_ok = monotone_ok = True
    for s in series.values():
        exact_ok &= bool(np.array_equal(s.e_r, np.diff(s.s_v)))
        telescope_ok &= bool(
            abs(s.s_v[-1] - s.s_v[0] - s.e_r.sum()) < 1e-12
        )
        nonneg_ok &= bool(s.e_r.min() >= -1e-9)
        monotone_ok &= bool(np.all(np.diff(s.s_v) >= -1e-9))
    sv = {r: s.s_v for r, s in series.items()}
    ordered = bool(
        np.all(sv[PI / 4][1:] < sv[PI / 2][1:]) and np.all(sv[PI / 2][1:] < sv[PI][1:])
    )
    peak_then_decay = all(
        s.e_r[0] == s.e_r.max() and np.all(np.diff(s.e_r) <= 1e-9) for s in series.values()
    )
    report(
        "criterion 6 (entanglement identities and orderings)",
        exact_ok and telescope_ok and nonneg_ok and monotone_ok and ordered and peak_then_decay,
        f"exact increments {exact_ok}, telescoping {telescope_ok}, e_r >= -1e-9 {nonneg_ok}, "
        f"s_v monotone {monotone_ok}, ordered by R {ordered}, peak-then-decay {peak_then_decay}",
    )


def test_criterion_7_joint_state_oracle(rng):
    worst = 0.0
    for d in (2, 3, 4):
        for _ in range(10):
            q = haar_unitary(rng, d)
            for lvl in range(1, d + 1):
                _, _, dev, edev = oracle_matches_population_map(q, lvl, d)
                worst = max(worst, dev, edev)
    kicks = [
        kick_operator_quadrature(BoxBasis(8), CosShifted(1.0, 1.0), n_build=64),
        kick_operator_bessel(BoxBasis(8), CosRatio(1.0, PI / 2), n_build=160),
    ]
    for u in kicks:
        for d in (2, 3, 4):
            _, _, dev, edev = oracle_matches_population_map(u, 1, d)
            worst = max(worst, dev, edev)
    report(
        "criterion 7 (joint-state oracle)",
        worst < 1e-10,
        f"max deviation {worst:.2e} (tol 1e-10)",
    )


def test_criterion_8_dephasing():
    basis = BoxBasis(32)
    u = kick_operator_quadrature(basis, CosShifted(1.0, 1.0), n_build=160)
    rho0 = DensityMatrix.pure_level(u.dim, 1)

    cont = DephasingEngine(u, basis, DephasingSchedule("continuous", 40.0, 1.0, 0.5))
    kick = DephasingEngine(u, basis, DephasingSchedule("kicked", 40.0, 1.0, 0.5))
    rc, _ = cont.run(rho0, 50)
    rk, _ = kick.run(rho0, 50)
    equiv = float(np.abs(rc.rho - rk.rho).max())

    z = transition_matrix(u)
    traj = run_trajectory(z, basis, basis_state(z.dim, 1), 20)
    devs = []
    for eps in (1.0, 10.0, 100.0, 1000.0):
        eng = DephasingEngine(u, basis, DephasingSchedule("kicked", eps, 1.0, 0.5))
        rho, _ = eng.run(rho0, 20)
        devs.append(float(np.abs(rho.populations() - traj.populations[20]).max()))
    monotone = all(a >= b - 1e-15 for a, b in zip(devs, devs[1:]))
    report(
        "criterion 8 (dephasing equivalence and projective limit)",
        equiv < 1e-12 and devs[-1] < 1e-6 and monotone,
        f"continuous-vs-kicked {equiv:.2e} (tol 1e-12), projective dev {devs[-1]:.2e} "
        f"(tol 1e-6), sweep devs {['%.2e' % d for d in devs]} monotone {monotone}",
    )


def test_criterion_9_figure_data(tmp_path):
    fig2_a = emit_figure(2, tmp_path / "a")
    fig2_b = emit_figure(2, tmp_path / "b")
    fig3_a = emit_figure(3, tmp_path / "a")
    fig3_b = emit_figure(3, tmp_path / "b")
    identical = all(
        (open(pa, "rb").read() == open(pb, "rb").read())
        for pa, pb in [(fig2_a[0], fig2_b[0]), (fig3_a[0], fig3_b[0])]
    )
    d2 = np.genfromtxt(fig2_a[0], delimiter=",", names=True)
    k_ordered = bool(
        np.all(d2["P1_k05"][1:] > d2["P1_k1"][1:]) and np.all(d2["P1_k1"][1:] > d2["P1_k2"][1:])
    )
    d3 = np.genfromtxt(fig3_a[0], delimiter=",", names=True)
    cols = [c for c in d3.dtype.names if c != "N"]
    r_ordered = bool(
        np.all(d3[cols[0]][1:] > d3[cols[1]][1:]) and np.all(d3[cols[1]][1:] > d3[cols[2]][1:])
    )
    report(
        "criterion 9 (figure-data orderings and determinism)",
        identical and k_ordered and r_ordered,
        f"byte-identical {identical}, k-ordering {k_ordered}, R-ordering {r_ordered}",
    )
