"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The randomized/algebraic criteria (1, 2, 8, 11, 12) run in seconds. The
measurement-backed ones (3-7, 9, 10) share the desk-scale artifacts from
acceptance_lib (N=200, S=3650, 8 seeds, 1% search resolution) and take
minutes each on a single core; TONSIM_ACCEPT_CACHE reuses finished
measurements across invocations.
"""

import math
import random
import subprocess
import sys
import time

import numpy as np
import pytest

from acceptance_lib import (
    ALPHA_GRID,
    ARTIFACTS,
    CAPACITY_GRID_EQ3,
    PSI0_GRID,
    desk_config,
)
from tonsim.config import TonConfig
from tonsim.fitting import (
    SurfaceFit,
    delta_relation_check,
    fit_capacity_law,
    fit_m0_vs_rho0,
    fit_r0_vs_r1,
    fit_surface,
    m0_vs_rho0_model,
    predict_ln_r1,
    r0_vs_r1_model,
    surface_model,
)
from tonsim.flatten import flat_cost, prime_impact_factor
from tonsim.kernel import run_simulation
from tonsim.sim import (
    CostLedger,
    apply_decay,
    run_simulation_pure,
    subtxn_cost,
    total_txn_cost,
)

pytestmark = pytest.mark.acceptance


def report(num: int, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {num:02d}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


# --------------------------------------------------------------- criterion 1


def test_criterion_01_property_suite():
    t0 = time.time()
    rnd = random.Random(42)
    cases = 0

    # algebraic identities
    for _ in range(400):
        psi0 = rnd.uniform(0.01, 10.0)
        alpha = rnd.choice([1.0, rnd.uniform(0.05, 0.999), rnd.uniform(1.001, 3.0)])
        length = rnd.randint(1, 20)
        direct = sum(subtxn_cost(i, psi0, alpha) for i in range(1, length + 1))
        assert math.isclose(total_txn_cost(psi0, alpha, length), direct, rel_tol=1e-12)
        cases += 1
    for _ in range(400):
        led = CostLedger.fresh(1)
        led.xi[0] = rnd.uniform(0.0, 50.0)
        h = rnd.uniform(0.5, 100.0)
        d1, d2 = rnd.uniform(0, 40), rnd.uniform(0, 40)
        led2 = CostLedger.fresh(1)
        led2.xi[0] = led.xi[0]
        apply_decay(led, 0, d1, h)
        apply_decay(led, 0, d1 + d2, h)
        apply_decay(led2, 0, d1 + d2, h)
        assert math.isclose(led.xi[0], led2.xi[0], rel_tol=1e-12)
        cases += 1

    # engine invariants on randomized configurations
    for _ in range(150):
        cfg = TonConfig(
            n_nodes=rnd.randint(5, 35),
            density=rnd.choice([0.0, rnd.uniform(0.1, 1.0), 1.0]),
            capacity=rnd.choice([rnd.uniform(2.0, 15.0), 1e9]),
            txn_length=rnd.randint(1, 10),
            sim_duration=rnd.uniform(40.0, 150.0),
            decay_time=rnd.uniform(5.0, 60.0),
            psi0=rnd.uniform(0.1, 3.0),
            alpha=rnd.choice([1.0, rnd.uniform(0.3, 1.8)]),
            injection_rate=rnd.uniform(0.0, 5.0),
            fault_mean_delay=rnd.choice([None, rnd.uniform(30.0, 300.0)]),
            seed=rnd.getrandbits(64),
        ).with_(window=rnd.choice([50, 200]))
        st = run_simulation_pure(cfg, collect_paths=True, check_invariants=True)
        assert st.injected == st.committed + st.aborted + st.in_flight_at_end
        for ordinal, path in st.paths.items():
            assert all(a != b for a, b in zip(path, path[1:]))
            if st.outcomes.get(ordinal) == "committed":
                assert len(path) == cfg.txn_length
        cases += 1

    # determinism across repeated runs (and engines, when compiled exists)
    for _ in range(60):
        cfg = TonConfig(
            n_nodes=rnd.randint(10, 40),
            density=rnd.uniform(0.2, 0.9),
            capacity=rnd.uniform(4.0, 15.0),
            txn_length=rnd.randint(2, 10),
            sim_duration=rnd.uniform(50.0, 200.0),
            injection_rate=rnd.uniform(0.5, 4.0),
            seed=rnd.getrandbits(64),
        ).with_(window=100)
        assert run_simulation(cfg) == run_simulation(cfg)
        cases += 1

    elapsed = time.time() - t0
    report(
        1,
        cases >= 1000 and elapsed < 60.0,
        f"{cases} randomized property cases in {elapsed:.1f}s (< 60s)",
    )


# --------------------------------------------------------------- criterion 2


def test_criterion_02_numeric_spot_checks():
    total = total_txn_cost(1.0, 2.0, 3)
    led = CostLedger.fresh(1)
    led.xi[0] = 10.0
    decayed = apply_decay(led, 0, 30.0, 30.0)
    ok = math.isclose(total, 7.0, rel_tol=1e-12) and math.isclose(
        decayed, 10.0 / math.e, rel_tol=1e-12
    )
    report(2, ok, f"total(1,2,3)={total}, decay(10,dt=H)={decayed:.12f}")


# --------------------------------------------------------------- criterion 3


def test_criterion_03_capacity_power_law():
    caps = ARTIFACTS.capacity_profiles()
    dense_pairs = [
        (r["capacity"], r["r1"]) for r in caps if r["capacity"] in CAPACITY_GRID_EQ3
    ]
    dense = fit_capacity_law(dense_pairs, which="r1")
    sparse_pairs = [(r["capacity"], r["r1"]) for r in ARTIFACTS.sparse_capacity_r1()]
    sparse = fit_capacity_law(sparse_pairs, which="r1")
    in_band = 1.5 <= dense.beta <= 2.5
    ordered = sparse.beta < dense.beta
    report(
        3,
        in_band and ordered,
        f"beta1(d=0.5)={dense.beta:.3f} (need [1.5,2.5]), "
        f"beta1(d=0.05)={sparse.beta:.3f} (need < dense)",
    )


# --------------------------------------------------------------- criterion 4


def test_criterion_04_rho_m_slope():
    caps = ARTIFACTS.capacity_profiles()
    pairs = [(r["rho0"], r["m0"]) for r in caps if r["m0"] is not None]
    slope = delta_relation_check(pairs)
    ok = len(pairs) >= 6 and -1.25 <= slope <= -0.75
    report(4, ok, f"n={len(pairs)} OLS slope={slope:.3f} (need [-1.25,-0.75])")


# --------------------------------------------------------------- criterion 5


def test_criterion_05_threshold_relations():
    caps = ARTIFACTS.capacity_profiles()
    f5 = fit_r0_vs_r1([(r["r1"], r["r0"]) for r in caps])
    pairs = [(r["rho0"], r["m0"]) for r in caps if r["m0"] is not None]
    f6 = fit_m0_vs_rho0(pairs)
    ok = (
        f5.goodness >= 0.9
        and 0.7 <= f5.a <= 1.3
        and 1.0 <= f5.b <= 10.0
        and f6.goodness >= 0.9
        and 0.9 <= f6.delta_m <= 1.7
        and 0.05 <= f6.lam <= 0.5
    )
    report(
        5,
        ok,
        f"eq5: a={f5.a:.3f} b={f5.b:.3f} R2={f5.goodness:.3f}; "
        f"eq6: dm={f6.delta_m:.3f} lam={f6.lam:.3f} R2={f6.goodness:.3f}",
    )


# --------------------------------------------------------------- criterion 6


def test_criterion_06_surface_monotonicity():
    grid = ARTIFACTS.grid(10)
    violations = []
    for a in ALPHA_GRID:
        row = [s for s in grid if s.alpha == a]
        for u, v in zip(row, row[1:]):
            if v.ln_r1 - u.ln_r1 > 2.0 * math.hypot(u.stderr, v.stderr):
                violations.append(("psi0", a, u.psi0, v.psi0))
    for p in PSI0_GRID:
        col = [s for s in grid if s.psi0 == p]
        for u, v in zip(col, col[1:]):
            if v.ln_r1 - u.ln_r1 > 2.0 * math.hypot(u.stderr, v.stderr):
                violations.append(("alpha", p, u.alpha, v.alpha))
    report(
        6,
        not violations,
        f"ln r1 non-increasing in psi0 and alpha within 2x stderr on the "
        f"5x5 grid; violations: {violations if violations else 'none'}",
    )


# --------------------------------------------------------------- criterion 7


def test_criterion_07_surface_fit():
    fit = ARTIFACTS.surface(10)
    ok = (
        fit.goodness >= 0.9
        and 0.45 <= fit.b_psi <= 1.35
        and -0.8 <= fit.delta_alpha <= 0.0
        and 0.5 <= fit.gamma_alpha <= 1.5
    )
    report(
        7,
        ok,
        f"R2={fit.goodness:.4f} (>=0.9) B_psi={fit.b_psi:.3f} ([0.45,1.35]) "
        f"delta_alpha={fit.delta_alpha:.3f} ([-0.8,0]) "
        f"gamma_alpha={fit.gamma_alpha:.3f} ([0.5,1.5])",
    )


# --------------------------------------------------------------- criterion 8


def test_criterion_08_flattening_round_trip():
    rnd = random.Random(2718)
    worst = 0.0
    for _ in range(1000):
        fit = SurfaceFit(
            big_a=-math.exp(rnd.uniform(math.log(1e-4), math.log(2.0))),
            b_psi=rnd.uniform(0.3, 1.6),
            b_alpha=rnd.uniform(0.5, 12.0),
            gamma_alpha=rnd.uniform(0.4, 2.0),
            delta_alpha=rnd.uniform(-0.9, 0.5),
            c=rnd.uniform(-2.0, 6.0),
            goodness=1.0,
        )
        ln_r1 = fit.c - rnd.uniform(1e-6, 8.0)
        back = predict_ln_r1(fit, 1.0, flat_cost(fit, ln_r1))
        worst = max(worst, abs(back - ln_r1))
    report(8, worst <= 1e-9, f"1000 random round trips, worst |error|={worst:.2e}")


# --------------------------------------------------------------- criterion 9


def test_criterion_09_flattening_equivalence():
    lines = []
    ok = True
    for alpha in (0.8, 1.2):
        rep = ARTIFACTS.flattening_report(alpha)
        neg = ARTIFACTS.flattening_report(alpha, scale=4.0)
        ok = ok and rep["equivalent"] and not neg["equivalent"]
        lines.append(
            f"alpha={alpha}: rel_err={rep['r1_rel_error']:.3f} "
            f"equiv={rep['equivalent']} neg(x4) equiv={neg['equivalent']}"
        )
    report(9, ok, "; ".join(lines))


# -------------------------------------------------------------- criterion 10


def test_criterion_10_psi_curves():
    peaks = {}
    for length in (6, 8, 10, 14):
        fit = ARTIFACTS.surface(length)
        peaks[length] = prime_impact_factor(fit, 1.0, length, (0.5, 1.5), tol=1e-4)
    all_ge_one = all(p.psi_at_peak >= 1.0 - 1e-9 for p in peaks.values())
    sides = peaks[14].alpha_prime < 1.0 and peaks[8].alpha_prime > 1.0
    detail = ", ".join(
        f"L={L}: alpha'={p.alpha_prime:.3f} psi={p.psi_at_peak:.3f}"
        for L, p in sorted(peaks.items())
    )
    report(10, all_ge_one and sides, detail)


# -------------------------------------------------------------- criterion 11


def test_criterion_11_fitting_oracles():
    t0 = time.time()
    cs = np.array([4.0, 6.0, 8.0, 10.0, 12.0])
    cap = fit_capacity_law(list(zip(cs, 0.37 * (cs - 2.0) ** 1.8)))
    ok = math.isclose(cap.a_coef, 0.37, rel_tol=1e-6) and math.isclose(
        cap.beta, 1.8, rel_tol=1e-6
    )

    r1 = np.array([0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0])
    f5 = fit_r0_vs_r1(list(zip(r1, r0_vs_r1_model([1.1, 4.0], r1))))
    ok = ok and np.allclose([f5.a, f5.b], [1.1, 4.0], rtol=1e-6)

    rho = np.array([0.05, 0.1, 0.2, 0.35, 0.5, 0.7, 0.9])
    f6 = fit_m0_vs_rho0(list(zip(rho, m0_vs_rho0_model([1.25, 0.3], rho))))
    ok = ok and np.allclose([f6.delta_m, f6.lam], [1.25, 0.3], rtol=1e-6)

    true = [-0.5, 0.9, 3.0, 1.0, -0.4, 3.0]
    rows = []
    for a in ALPHA_GRID:
        for p in PSI0_GRID:
            y = surface_model(true, (np.array([a]), np.array([p])))[0]
            rows.append((a, p, y, 0.05))
    f7 = fit_surface(rows, start_seed=0)
    got = [f7.big_a, f7.b_psi, f7.b_alpha, f7.gamma_alpha, f7.delta_alpha, f7.c]
    ok = ok and np.allclose(got, true, rtol=1e-4, atol=1e-4)

    elapsed = time.time() - t0
    report(
        11,
        ok and elapsed < 60.0,
        f"all four families recovered (1e-6; surface 1e-4) in {elapsed:.1f}s",
    )


# -------------------------------------------------------------- criterion 12


def run_cli(args):
    proc = subprocess.run(
        [sys.executable, "-m", "tonsim.cli", *args],
        capture_output=True,
        timeout=600,
    )
    assert proc.returncode == 0, proc.stderr.decode()
    return proc


def test_criterion_12_byte_identical_payloads(tmp_path):
    small = [
        "--set", "n_nodes=60", "--set", "sim_duration=300",
        "--set", "capacity=8", "--set", "choke_window=200",
    ]
    checks = []

    for fmt in ("csv", "json"):
        a, b = tmp_path / f"s1.{fmt}", tmp_path / f"s2.{fmt}"
        run_cli(["simulate", *small, "--set", "injection_rate=2", "--seeds", "3",
                 "--format", fmt, "--out", str(a)])
        run_cli(["simulate", *small, "--set", "injection_rate=2", "--seeds", "3",
                 "--format", fmt, "--out", str(b)])
        checks.append((f"simulate/{fmt}", a.read_bytes() == b.read_bytes()))

    a, b = tmp_path / "p1.csv", tmp_path / "p2.csv"
    prof = ["profile", *small, "--seeds", "4", "--resolution", "0.05"]
    run_cli([*prof, "--jobs", "1", "--out", str(a)])
    run_cli([*prof, "--jobs", "3", "--out", str(b)])
    checks.append(("profile jobs 1 vs 3", a.read_bytes() == b.read_bytes()))

    grid = [
        "sweep-grid", *small, "--set", "alpha_grid=0.8,1.2",
        "--set", "psi0_grid=0.5,2.0", "--seeds", "2", "--resolution", "0.05",
    ]
    a, b = tmp_path / "g1.csv", tmp_path / "g2.csv"
    run_cli([*grid, "--jobs", "1", "--out", str(a)])
    run_cli([*grid, "--jobs", "4", "--out", str(b)])
    checks.append(("sweep-grid jobs 1 vs 4", a.read_bytes() == b.read_bytes()))

    ok = all(passed for _, passed in checks)
    report(12, ok, "; ".join(f"{name}: {'ok' if p else 'DIFFERS'}" for name, p in checks))
