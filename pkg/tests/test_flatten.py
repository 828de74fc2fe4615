import math
import random

import numpy as np
import pytest

from tonsim.fitting import SurfaceFit, predict_ln_r1
from tonsim.flatten import (
    FlatteningResult,
    InfeasibleRateError,
    InvalidSurfaceError,
    flat_cost,
    flatten_for,
    flattening_ratio,
    prime_impact_factor,
    psi_curve,
)

FIT = SurfaceFit(
    big_a=-0.5, b_psi=0.9, b_alpha=3.0, gamma_alpha=1.0, delta_alpha=-0.4,
    c=3.0, goodness=1.0,
)


def test_flat_cost_inverts_alpha1_slice_exactly():
    for psi0 in (0.1, 1.0, 2.5, 7.0):
        ln_r1 = predict_ln_r1(FIT, 1.0, psi0)
        assert flat_cost(FIT, ln_r1) == pytest.approx(psi0, rel=1e-12)


def test_flat_cost_boundary_is_zero():
    assert flat_cost(FIT, FIT.c) == 0.0


def test_flat_cost_roundtrip_randomized():
    # predict(flatten(x)) == x within 1e-9 over random fits and inputs
    rnd = random.Random(8)
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
        psi0p = flat_cost(fit, ln_r1)
        assert psi0p > 0.0
        back = predict_ln_r1(fit, 1.0, psi0p)
        assert back == pytest.approx(ln_r1, abs=1e-9)


def test_flat_cost_monotone_decreasing_in_ln_r1():
    xs = np.linspace(FIT.c - 4.0, FIT.c - 1e-6, 50)
    vals = [flat_cost(FIT, x) for x in xs]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_flat_cost_domain_errors():
    with pytest.raises(InfeasibleRateError):
        flat_cost(FIT, FIT.c + 0.1)
    bad = SurfaceFit(0.5, 0.9, 3.0, 1.0, -0.4, 3.0, goodness=1.0)
    with pytest.raises(InvalidSurfaceError):
        flat_cost(bad, 0.0)


def test_flattening_ratio_examples():
    assert flattening_ratio(1.0, 1.0, 10, 1.0) == 1.0
    # total cost of (1, 2, L=3) is 7; flat cost 7/3 gives ratio exactly 1
    assert flattening_ratio(1.0, 2.0, 3, 7.0 / 3.0) == pytest.approx(1.0, rel=1e-12)
    assert flattening_ratio(1.0, 1.0, 5, 0.5) == 2.0
    with pytest.raises(ValueError):
        flattening_ratio(1.0, 1.0, 5, 0.0)


def test_flattening_ratio_continuous_at_alpha_one():
    limit = flattening_ratio(2.0, 1.0, 12, 1.7)
    for eps in (1e-6, -1e-6):
        near = flattening_ratio(2.0, 1.0 + eps, 12, 1.7)
        assert near == pytest.approx(limit, rel=1e-4)


def test_psi_is_one_at_alpha_one_by_construction():
    # flattening through the fit's own prediction is exact at alpha=1
    res = flatten_for(FIT, 1.0, 1.5, 10)
    assert res.psi_ratio == pytest.approx(1.0, rel=1e-12)
    assert res.psi0_prime == pytest.approx(1.5, rel=1e-12)


def test_psi_curve_shape_and_records():
    curve = psi_curve(FIT, 1.0, 10, [0.8, 1.0, 1.2])
    assert [round(r.alpha, 1) for r in curve] == [0.8, 1.0, 1.2]
    rec = curve[0].as_record()
    assert set(rec) == {
        "alpha", "psi0", "txn_length", "ln_r1_target", "psi0_prime", "psi_ratio",
    }


def analytic_peak_fit(b_psi=1.0, b_alpha=2.0, gamma=1.0, delta=-0.4):
    return SurfaceFit(
        big_a=-0.3, b_psi=b_psi, b_alpha=b_alpha, gamma_alpha=gamma,
        delta_alpha=delta, c=4.0, goodness=1.0,
    )


def dense_scan_argmax(fit, psi0, length, lo, hi, n=20001):
    best_a, best_v = lo, -1.0
    for k in range(n):
        a = lo + (hi - lo) * k / (n - 1)
        v = flatten_for(fit, a, psi0, length).psi_ratio
        if v > best_v:
            best_a, best_v = a, v
    return best_a, best_v


def test_prime_factor_matches_dense_scan_oracle():
    fit = analytic_peak_fit()
    for length in (6, 10, 14):
        pf = prime_impact_factor(fit, 1.0, length, (0.5, 1.5), tol=1e-5)
        oracle_a, oracle_v = dense_scan_argmax(fit, 1.0, length, 0.5, 1.5)
        assert pf.alpha_prime == pytest.approx(oracle_a, abs=2e-4)
        assert pf.psi_at_peak == pytest.approx(oracle_v, rel=1e-6)
        assert pf.psi_at_peak >= 1.0 - 1e-12


def test_prime_factor_peak_at_least_bracket_edges():
    fit = analytic_peak_fit(b_alpha=6.0)
    pf = prime_impact_factor(fit, 1.0, 12, (0.5, 1.5), tol=1e-4)
    for probe in (pf.alpha_prime - 0.01, pf.alpha_prime + 0.01):
        if 0.5 <= probe <= 1.5:
            assert pf.psi_at_peak >= flatten_for(fit, probe, 1.0, 12).psi_ratio - 1e-9


def test_prime_factor_rejects_bad_range():
    with pytest.raises(ValueError):
        prime_impact_factor(FIT, 1.0, 10, (1.5, 0.5))


def test_longer_transactions_shift_peak_left():
    # with B_alpha growing in L the peak crosses from right of 1 to left of 1
    lo_fit = analytic_peak_fit(b_alpha=1.0)   # short-transaction-like surface
    hi_fit = analytic_peak_fit(b_alpha=12.0)  # long-transaction-like surface
    pf_short = prime_impact_factor(lo_fit, 1.0, 8, (0.5, 1.5), tol=1e-5)
    pf_long = prime_impact_factor(hi_fit, 1.0, 14, (0.5, 1.5), tol=1e-5)
    assert pf_short.alpha_prime > 1.0
    assert pf_long.alpha_prime < 1.0
