"""Nonlinear least-squares fits of the measured resilience laws.

A small Levenberg–Marquardt engine (numeric central-difference Jacobian,
multiplicative damping) drives four model families: the capacity power law,
the abort-vs-choke threshold relation, the fault-tolerance curve, and the
six-parameter log-critical-rate surface over the cost parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import Xoshiro256pp

LM_TOL = 1e-10
LM_MAX_ITER = 200
LM_LAMBDA0 = 1e-3
LM_LAMBDA_CAP = 1e14
JAC_STEP = 1e-6


class FitError(ValueError):
    """Fitting could not proceed (domain or data problem)."""


class RankDeficiencyError(FitError):
    """Normal equations singular or not enough data points."""


@dataclass
class FitResult:
    params: np.ndarray
    goodness: float
    iterations: int
    converged: bool
    cost: float


def _r_squared(y, pred, w) -> float:
    res = y - pred
    ss_res = float(np.sum(w * res * res))
    ybar = float(np.sum(w * y) / np.sum(w))
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    if ss_res == 0.0:
        return 1.0
    if ss_tot == 0.0:
        return 0.0
    return 1.0 - ss_res / ss_tot


def numeric_jacobian(model, params, x) -> np.ndarray:
    """Central-difference Jacobian of the model in its parameters."""
    p = np.asarray(params, dtype=float)
    cols = []
    for i in range(p.size):
        h = JAC_STEP * max(1.0, abs(p[i]))
        up = p.copy()
        up[i] += h
        dn = p.copy()
        dn[i] -= h
        cols.append((model(up, x) - model(dn, x)) / (2.0 * h))
    return np.column_stack(cols)


def lm_fit(
    model,
    x,
    y,
    init,
    bounds=None,
    weights=None,
    tol: float = LM_TOL,
    max_iter: int = LM_MAX_ITER,
) -> FitResult:
    """Levenberg–Marquardt minimization of sum(w * (model(p, x) - y)^2).

    Multiplicative damping (x10 on rejection, /10 on acceptance); converged
    when an accepted step shrinks the cost by a relative factor below `tol`.
    Bounds are enforced by projecting trial steps onto the box. Raises
    RankDeficiencyError for under-determined data or singular normal equations.
    """
    y = np.asarray(y, dtype=float)
    p = np.asarray(init, dtype=float).copy()
    npar = p.size
    if y.size < npar:
        raise RankDeficiencyError(
            f"{y.size} data points cannot determine {npar} parameters"
        )
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    if bounds is not None:
        lo = np.asarray([b[0] for b in bounds], dtype=float)
        hi = np.asarray([b[1] for b in bounds], dtype=float)
        if np.any(p < lo) or np.any(p > hi):
            raise FitError("initial guess outside bounds")
    else:
        lo = hi = None

    def cost_of(params):
        r = model(params, x) - y
        return float(np.sum(w * r * r)), r

    cost, resid = cost_of(p)
    lam = LM_LAMBDA0
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        jac = numeric_jacobian(model, p, x) * np.sqrt(w)[:, None]
        rw = resid * np.sqrt(w)
        jtj = jac.T @ jac
        g = jac.T @ rw
        diag = np.diag(jtj).copy()
        if not np.all(np.isfinite(jtj)) or not np.all(np.isfinite(g)):
            break
        if np.any(diag <= 0.0):
            # a parameter the residuals do not depend on: singular normals
            raise RankDeficiencyError("singular normal equations")
        accepted = False
        while lam <= LM_LAMBDA_CAP:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError as exc:
                raise RankDeficiencyError("singular normal equations") from exc
            trial = p + step
            if bounds is not None:
                trial = np.clip(trial, lo, hi)
            new_cost, new_resid = cost_of(trial)
            if math.isfinite(new_cost) and new_cost < cost:
                rel_drop = (cost - new_cost) / max(cost, 1e-300)
                p, cost, resid = trial, new_cost, new_resid
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                if rel_drop < tol or cost == 0.0:
                    converged = True
                break
            lam *= 10.0
        if not accepted or converged:
            break

    pred = model(p, x)
    return FitResult(
        params=p,
        goodness=_r_squared(y, pred, w),
        iterations=it,
        converged=converged or cost == 0.0,
        cost=cost,
    )


# ------------------------------------------------------------ model families


def capacity_law_model(params, x):
    """ln r = ln(A) + beta * ln(C - 2), evaluated against y = ln r."""
    a, beta = params
    return np.log(a) + beta * np.log(x - 2.0)


def capacity_law_jac(params, x):
    a, beta = params
    n = np.asarray(x).size
    return np.column_stack([np.full(n, 1.0 / a), np.log(x - 2.0)])


def r0_vs_r1_model(params, x):
    """r0 = a * (sqrt(b^2 + r1^2) - b); forces r0 = 0 at r1 = 0."""
    a, b = params
    return a * (np.sqrt(b * b + x * x) - b)


def r0_vs_r1_jac(params, x):
    a, b = params
    root = np.sqrt(b * b + x * x)
    return np.column_stack([root - b, a * (b / root - 1.0)])


def m0_vs_rho0_model(params, x):
    """m0 = dm - (dm - 1) * sqrt(1 + (rho0/lambda)^2); equals 1 at rho0 = 0."""
    dm, lam = params
    return dm - (dm - 1.0) * np.sqrt(1.0 + (x / lam) ** 2)


def m0_vs_rho0_jac(params, x):
    dm, lam = params
    root = np.sqrt(1.0 + (x / lam) ** 2)
    return np.column_stack(
        [1.0 - root, (dm - 1.0) * (x * x / lam**3) / root]
    )


def surface_model(params, x):
    """ln r1 = A * psi0^{B_psi} * ((alpha + delta)^2 + gamma^2)^{B_alpha} + c."""
    a, b_psi, b_alpha, gamma, delta, c = params
    alpha, psi0 = x
    h = (alpha + delta) ** 2 + gamma * gamma
    return a * psi0**b_psi * h**b_alpha + c


def surface_jac(params, x):
    a, b_psi, b_alpha, gamma, delta, c = params
    alpha, psi0 = x
    h = (alpha + delta) ** 2 + gamma * gamma
    pb = psi0**b_psi
    hb = h**b_alpha
    core = a * pb * hb
    return np.column_stack(
        [
            pb * hb,
            core * np.log(psi0),
            core * np.log(h),
            core * b_alpha / h * 2.0 * gamma,
            core * b_alpha / h * 2.0 * (alpha + delta),
            np.ones_like(alpha),
        ]
    )


# ------------------------------------------------------------------ fit ops


@dataclass
class CapacityLawFit:
    a_coef: float
    beta: float
    goodness: float
    which: str = "r1"

    def as_record(self) -> dict:
        return {
            "model": f"capacity_law_{self.which}",
            "A": self.a_coef,
            "beta": self.beta,
            "goodness": self.goodness,
        }


def fit_capacity_law(samples, which: str = "r1") -> CapacityLawFit:
    """Fit r ~ A (C-2)^beta in log-log space (linear init, LM refinement)."""
    cs = np.asarray([c for c, _ in samples], dtype=float)
    rs = np.asarray([r for _, r in samples], dtype=float)
    if np.any(cs <= 2.0):
        raise FitError("capacity law requires C > 2 for every sample")
    if cs.size < 3:
        raise RankDeficiencyError("need at least 3 (C, r) samples")
    if np.any(rs <= 0.0):
        raise FitError("capacity law requires positive rates")
    lx = np.log(cs - 2.0)
    ly = np.log(rs)
    beta0, lna0 = np.polyfit(lx, ly, 1)
    res = lm_fit(
        capacity_law_model,
        cs,
        ly,
        init=[math.exp(lna0), beta0],
        bounds=[(1e-12, 1e12), (-20.0, 20.0)],
    )
    return CapacityLawFit(
        a_coef=float(res.params[0]),
        beta=float(res.params[1]),
        goodness=res.goodness,
        which=which,
    )


@dataclass
class R0R1Fit:
    a: float
    b: float
    goodness: float

    def as_record(self) -> dict:
        return {"model": "r0_vs_r1", "a": self.a, "b": self.b, "goodness": self.goodness}


def fit_r0_vs_r1(samples) -> R0R1Fit:
    """Fit r0 = a (sqrt(b^2 + r1^2) - b) over (r1, r0) pairs."""
    r1 = np.asarray([p for p, _ in samples], dtype=float)
    r0 = np.asarray([q for _, q in samples], dtype=float)
    if r1.size < 3:
        raise RankDeficiencyError("need at least 3 (r1, r0) samples")
    if np.any(r1 < 0.0) or np.any(r0 < 0.0):
        raise FitError("rates must be non-negative")
    if np.allclose(r1, r1[0]):
        raise RankDeficiencyError("all r1 values identical")
    scale = float(np.max(r1))
    best = None
    for a0 in (0.5, 1.0, 2.0):
        for b0 in (scale / 8.0, scale / 2.0, 2.0 * scale):
            try:
                res = lm_fit(
                    r0_vs_r1_model,
                    r1,
                    r0,
                    init=[a0, b0],
                    bounds=[(1e-9, 1e6), (1e-9, 1e9)],
                )
            except RankDeficiencyError:
                continue
            if best is None or res.cost < best.cost:
                best = res
    if best is None:
        raise RankDeficiencyError("all starts failed")
    return R0R1Fit(a=float(best.params[0]), b=float(best.params[1]), goodness=best.goodness)


@dataclass
class M0Fit:
    delta_m: float
    lam: float
    goodness: float

    def as_record(self) -> dict:
        return {
            "model": "m0_vs_rho0",
            "delta_m": self.delta_m,
            "lambda": self.lam,
            "goodness": self.goodness,
        }


def fit_m0_vs_rho0(samples) -> M0Fit:
    """Fit m0 = dm - (dm-1) sqrt(1 + (rho0/lambda)^2) over (rho0, m0) pairs."""
    rho = np.asarray([p for p, _ in samples], dtype=float)
    m0 = np.asarray([q for _, q in samples], dtype=float)
    if rho.size < 3:
        raise RankDeficiencyError("need at least 3 (rho0, m0) samples")
    if np.any(rho < 0.0) or np.any(rho > 1.0):
        raise FitError("rho0 must lie in [0, 1]")
    if np.allclose(rho, rho[0]):
        raise RankDeficiencyError("all rho0 values identical")
    best = None
    for dm0 in (1.05, 1.2, 1.4):
        for lam0 in (0.1, 0.25, 0.4):
            try:
                res = lm_fit(
                    m0_vs_rho0_model,
                    rho,
                    m0,
                    init=[dm0, lam0],
                    bounds=[(1.0 + 1e-9, 5.0), (1e-3, 10.0)],
                )
            except RankDeficiencyError:
                continue
            if best is None or res.cost < best.cost:
                best = res
    if best is None:
        raise RankDeficiencyError("all starts failed")
    return M0Fit(delta_m=float(best.params[0]), lam=float(best.params[1]), goodness=best.goodness)


def delta_relation_check(samples) -> float:
    """OLS slope of m0 against rho0 (expected near -1)."""
    rho = np.asarray([p for p, _ in samples], dtype=float)
    m0 = np.asarray([q for _, q in samples], dtype=float)
    if rho.size < 2:
        raise FitError("need at least 2 samples for a slope")
    if np.allclose(rho, rho[0]):
        raise FitError("degenerate abscissa: all rho0 equal")
    slope, _ = np.polyfit(rho, m0, 1)
    return float(slope)


@dataclass
class SurfaceFit:
    """Parameters of ln r1 = A psi0^{B_psi} ((alpha+delta)^2+gamma^2)^{B_alpha} + c."""

    big_a: float
    b_psi: float
    b_alpha: float
    gamma_alpha: float
    delta_alpha: float
    c: float
    goodness: float
    converged: bool = True
    flags: list[str] = field(default_factory=list)

    def as_record(self) -> dict:
        return {
            "model": "ln_r1_surface",
            "A": self.big_a,
            "B_psi": self.b_psi,
            "B_alpha": self.b_alpha,
            "gamma_alpha": self.gamma_alpha,
            "delta_alpha": self.delta_alpha,
            "c": self.c,
            "goodness": self.goodness,
            "converged": self.converged,
            "flags": ";".join(self.flags),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "SurfaceFit":
        return cls(
            big_a=float(rec["A"]),
            b_psi=float(rec["B_psi"]),
            b_alpha=float(rec["B_alpha"]),
            gamma_alpha=float(rec["gamma_alpha"]),
            delta_alpha=float(rec["delta_alpha"]),
            c=float(rec["c"]),
            goodness=float(rec.get("goodness", math.nan)),
            converged=bool(rec.get("converged", True)),
        )

    @property
    def params(self) -> np.ndarray:
        return np.array(
            [self.big_a, self.b_psi, self.b_alpha, self.gamma_alpha,
             self.delta_alpha, self.c]
        )


SURFACE_BOUNDS = [
    (-1e6, -1e-9),   # A < 0: the surface decreases in psi0
    (0.05, 3.0),     # B_psi
    (0.05, 30.0),    # B_alpha
    (1e-3, 10.0),    # gamma_alpha
    (-3.0, 3.0),     # delta_alpha
    (-50.0, 50.0),   # c (re-centered per dataset below)
]


def _latin_hypercube(n, dims, rng: Xoshiro256pp) -> np.ndarray:
    """n stratified samples in [0,1)^dims."""
    out = np.empty((n, dims))
    for d in range(dims):
        strata = [(k + rng.open01()) / n for k in range(n)]
        # Fisher-Yates with the deterministic generator
        for k in range(n - 1, 0, -1):
            j = rng.bounded(k + 1)
            strata[k], strata[j] = strata[j], strata[k]
        out[:, d] = strata
    return out


def fit_surface(samples, n_starts: int = 16, start_seed: int = 0) -> SurfaceFit:
    """Multi-start LM fit of the six-parameter ln r1 surface.

    `samples` iterates objects with alpha, psi0, ln_r1 and stderr attributes
    (GridSample) or (alpha, psi0, ln_r1, stderr) tuples. Samples are weighted
    by 1/stderr^2 when every stderr is positive. Non-finite ln_r1 cells are
    rejected. With no convergent start, the best attempt is returned flagged.
    """
    rows = []
    for s in samples:
        if hasattr(s, "alpha"):
            rows.append((s.alpha, s.psi0, s.ln_r1, getattr(s, "stderr", 0.0)))
        else:
            rows.append(tuple(s))
    rows = [r for r in rows if math.isfinite(r[2])]
    if len(rows) < 7:
        raise RankDeficiencyError("need at least 7 finite surface samples")
    alpha = np.array([r[0] for r in rows])
    psi0 = np.array([r[1] for r in rows])
    y = np.array([r[2] for r in rows])
    se = np.array([r[3] for r in rows])
    if len(set(zip(alpha, psi0))) < 7:
        raise RankDeficiencyError("samples must span distinct (alpha, psi0)")
    if np.unique(alpha).size < 2 or np.unique(psi0).size < 2:
        raise RankDeficiencyError("samples must span both alpha and psi0")
    weights = 1.0 / se**2 if np.all(se > 0.0) else None

    x = (alpha, psi0)
    ymax, ymin = float(np.max(y)), float(np.min(y))
    spread = max(ymax - ymin, 1.0)
    bounds = list(SURFACE_BOUNDS)
    bounds[5] = (ymin - 2.0 * spread, ymax + 4.0 * spread)

    rng = Xoshiro256pp(start_seed)
    cube = _latin_hypercube(n_starts, 5, rng)
    w = np.ones_like(y) if weights is None else weights

    best = None
    best_start = -1
    for k in range(n_starts):
        u = cube[k]
        b_psi = 0.45 + u[0] * (1.35 - 0.45)
        b_alpha = math.exp(math.log(0.5) + u[1] * (math.log(15.0) - math.log(0.5)))
        gamma = 0.5 + u[2] * (1.5 - 0.5)
        delta = -0.8 + u[3] * 0.8
        c = ymax + u[4] * 0.5 * spread + 0.05 * spread
        # A is linear given the rest: solve it in closed form
        basis = psi0**b_psi * ((alpha + delta) ** 2 + gamma**2) ** b_alpha
        denom = float(np.sum(w * basis * basis))
        a = float(np.sum(w * (y - c) * basis) / denom) if denom > 0 else -0.1
        a = min(a, -1e-9)
        init = np.clip(
            np.array([a, b_psi, b_alpha, gamma, delta, c]),
            [b[0] for b in bounds],
            [b[1] for b in bounds],
        )
        try:
            res = lm_fit(surface_model, x, y, init, bounds=bounds, weights=weights)
        except RankDeficiencyError:
            continue
        if best is None or res.cost < best.cost - 1e-15:
            best = res
            best_start = k
    if best is None:
        raise RankDeficiencyError("all surface starts failed")

    flags = [] if best.converged else ["non_converged_best_so_far"]
    a, b_psi, b_alpha, gamma, delta, c = (float(v) for v in best.params)
    return SurfaceFit(
        big_a=a,
        b_psi=b_psi,
        b_alpha=b_alpha,
        gamma_alpha=abs(gamma),
        delta_alpha=delta,
        c=c,
        goodness=best.goodness,
        converged=best.converged,
        flags=flags + [f"best_start:{best_start}"],
    )


def predict_ln_r1(fit: SurfaceFit, alpha: float, psi0: float) -> float:
    """Forward evaluation of the fitted surface."""
    if psi0 <= 0.0:
        raise FitError(f"psi0 must be positive, got {psi0}")
    h = (alpha + fit.delta_alpha) ** 2 + fit.gamma_alpha**2
    return float(fit.big_a * psi0**fit.b_psi * h**fit.b_alpha + fit.c)
