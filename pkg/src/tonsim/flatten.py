"""Cost flattening: trading the geometric long-term cost profile for an
equivalent flat upfront cost, and the price of doing so.

The flat-equivalent cost inverts the fitted critical-rate surface along its
alpha=1 slice; the flattening ratio compares total per-transaction costs; the
prime impact factor is the alpha that maximizes that ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .config import TonConfig
from .experiments import (
    ResilienceProfile,
    behaviorally_equivalent,
    find_r0,
    find_r1,
    EnsembleCache,
    DEFAULT_RESOLUTION,
    DEFAULT_SEEDS,
)
from .fitting import FitError, SurfaceFit, predict_ln_r1
from .sim import total_txn_cost

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0  # golden-section step ratio


class InfeasibleRateError(FitError):
    """Requested ln r1 exceeds the surface's asymptote c."""


class InvalidSurfaceError(FitError):
    """Surface parameters unusable for flattening (A >= 0 or B_psi = 0)."""


def flat_cost(fit: SurfaceFit, ln_r1: float) -> float:
    """Flat upfront cost whose alpha=1 network has the given critical rate.

    Algebraic inverse of the fitted surface at alpha=1; returns 0 at the
    boundary ln_r1 = c and grows as ln_r1 decreases.
    """
    if fit.big_a >= 0.0:
        raise InvalidSurfaceError(f"surface A must be negative, got {fit.big_a}")
    if fit.b_psi == 0.0:
        raise InvalidSurfaceError("surface B_psi must be nonzero")
    if ln_r1 > fit.c:
        raise InfeasibleRateError(
            f"ln r1 = {ln_r1} above the feasible bound c = {fit.c}"
        )
    h1 = (1.0 + fit.delta_alpha) ** 2 + fit.gamma_alpha**2
    base = (fit.c - ln_r1) / (-fit.big_a * h1**fit.b_alpha)
    return base ** (1.0 / fit.b_psi)


def flattening_ratio(psi0: float, alpha: float, length: int, psi0_prime: float) -> float:
    """Cost ratio of the original transaction to its flat equivalent.

    total_txn_cost handles alpha=1 through the analytic limit, so the ratio
    is continuous there (= psi0/psi0_prime).
    """
    if psi0_prime <= 0.0:
        raise ValueError(f"flat cost must be positive, got {psi0_prime}")
    return total_txn_cost(psi0, alpha, length) / (length * psi0_prime)


@dataclass
class FlatteningResult:
    """A flat-equivalent cost together with its provenance."""

    psi0_prime: float
    psi_ratio: float
    alpha: float
    psi0: float
    txn_length: int
    ln_r1_target: float

    def as_record(self) -> dict:
        return {
            "alpha": self.alpha,
            "psi0": self.psi0,
            "txn_length": self.txn_length,
            "ln_r1_target": self.ln_r1_target,
            "psi0_prime": self.psi0_prime,
            "psi_ratio": self.psi_ratio,
        }


def flatten_for(fit: SurfaceFit, alpha: float, psi0: float, length: int) -> FlatteningResult:
    """Flatten the (alpha, psi0) network using the surface's own prediction."""
    target = predict_ln_r1(fit, alpha, psi0)
    prime = flat_cost(fit, target)
    return FlatteningResult(
        psi0_prime=prime,
        psi_ratio=flattening_ratio(psi0, alpha, length, prime),
        alpha=alpha,
        psi0=psi0,
        txn_length=length,
        ln_r1_target=target,
    )


def psi_curve(fit: SurfaceFit, psi0: float, length: int, alphas) -> list[FlatteningResult]:
    """The flattening-ratio curve psi(alpha) at fixed psi0 and length."""
    return [flatten_for(fit, a, psi0, length) for a in alphas]


@dataclass
class PrimeFactor:
    """Location and height of the flattening-ratio peak."""

    alpha_prime: float
    psi_at_peak: float
    txn_length: int
    flags: list[str] = field(default_factory=list)

    def as_record(self) -> dict:
        return {
            "txn_length": self.txn_length,
            "alpha_prime": self.alpha_prime,
            "psi_at_peak": self.psi_at_peak,
            "flags": ";".join(self.flags),
        }


def _golden_max(f, lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def prime_impact_factor(
    fit: SurfaceFit,
    psi0: float,
    length: int,
    alpha_range: tuple[float, float] = (0.5, 1.5),
    tol: float = 1e-4,
    prescan: int = 32,
) -> PrimeFactor:
    """Maximize psi(alpha) over the given range by golden-section search.

    A coarse prescan guards against multimodality: if the sampled curve has
    more than one interior local maximum, the search falls back to refining
    around the grid argmax and says so in the flags.
    """
    lo, hi = alpha_range
    if not (0.0 < lo < hi):
        raise ValueError(f"bad alpha range {alpha_range}")

    def psi_of(alpha: float) -> float:
        return flatten_for(fit, alpha, psi0, length).psi_ratio

    grid = [lo + (hi - lo) * k / (prescan - 1) for k in range(prescan)]
    vals = [psi_of(a) for a in grid]
    peaks = [
        k
        for k in range(1, prescan - 1)
        if vals[k] >= vals[k - 1] and vals[k] >= vals[k + 1]
    ]
    flags = []
    k = max(range(prescan), key=lambda i: vals[i])
    if len(peaks) > 1:
        flags.append("multimodal_prescan_grid_argmax")
    bracket_lo = grid[max(k - 1, 0)]
    bracket_hi = grid[min(k + 1, prescan - 1)]
    alpha_star = _golden_max(psi_of, bracket_lo, bracket_hi, tol)
    psi_star = psi_of(alpha_star)
    # golden-section postcondition: no worse than the bracket edges
    if psi_star < max(vals[max(k - 1, 0)], vals[min(k + 1, prescan - 1)]):
        alpha_star, psi_star = grid[k], vals[k]
        flags.append("bracket_edge_won")
    return PrimeFactor(
        alpha_prime=alpha_star, psi_at_peak=psi_star, txn_length=length, flags=flags
    )


@dataclass
class FlatteningReport:
    """Simulation-verified equivalence of a network and its flat transform."""

    original: ResilienceProfile
    flattened: ResilienceProfile
    psi0_prime: float
    ln_r1_measured: float
    rel_tol: float
    equivalent: bool
    r1_rel_error: float

    def as_record(self) -> dict:
        return {
            "psi0_prime": self.psi0_prime,
            "ln_r1_measured": self.ln_r1_measured,
            "r1_original": self.original.r1,
            "r1_flattened": self.flattened.r1,
            "r0_original": self.original.r0,
            "r0_flattened": self.flattened.r0,
            "r1_rel_error": self.r1_rel_error,
            "rel_tol": self.rel_tol,
            "equivalent": self.equivalent,
        }


def verify_flattening(
    config: TonConfig,
    fit: SurfaceFit,
    base_seed: int = 1,
    n_seeds: int = DEFAULT_SEEDS,
    resolution: float = DEFAULT_RESOLUTION,
    rel_tol: float = 0.15,
    include_r0: bool = False,
    jobs: int = 1,
    psi0_prime_override: float | None = None,
) -> FlatteningReport:
    """Measure r1 for the original and the flattened network and compare.

    The flat cost is derived from the original's MEASURED critical rate via
    the fitted alpha=1 slice, then checked by direct simulation. Setting
    `psi0_prime_override` replaces the derived flat cost (negative controls).
    """
    cache = EnsembleCache(jobs=jobs)
    res1 = find_r1(config, base_seed, n_seeds, resolution, cache=cache)
    if res1.rate <= 0.0:
        raise FitError("original network has no positive measurable r1")
    ln_r1 = math.log(res1.rate)
    prime = flat_cost(fit, min(ln_r1, fit.c)) if psi0_prime_override is None else psi0_prime_override
    if prime <= 0.0:
        raise FitError(f"flat cost came out non-positive ({prime})")

    flat_cfg = config.with_(alpha=1.0, psi0=prime)
    flat_cache = EnsembleCache(jobs=jobs)
    flat_res1 = find_r1(
        flat_cfg, base_seed, n_seeds, resolution, cache=flat_cache, hint=res1.rate
    )

    def profile_of(cfg, res, cch) -> ResilienceProfile:
        r0 = None
        if include_r0:
            r0 = find_r0(
                cfg, base_seed, n_seeds, resolution, cache=cch,
                hint=res.rate / 2.0 if res.rate > 0 else None,
            ).rate
        return ResilienceProfile(
            r0=r0,
            r1=res.rate,
            rho0=(r0 / res.rate) if (r0 is not None and res.rate > 0) else None,
            m0=None,
            seeds_used=n_seeds,
            resolution=resolution,
            flags=list(res.flags),
        )

    original = profile_of(config, res1, cache)
    flattened = profile_of(flat_cfg, flat_res1, flat_cache)
    big = max(original.r1, flattened.r1)
    rel_err = abs(original.r1 - flattened.r1) / big if big > 0 else 0.0
    return FlatteningReport(
        original=original,
        flattened=flattened,
        psi0_prime=prime,
        ln_r1_measured=ln_r1,
        rel_tol=rel_tol,
        equivalent=behaviorally_equivalent(original, flattened, rel_tol),
        r1_rel_error=rel_err,
    )
