"""Resilience measurements: abort/choke thresholds, fault tolerance, and the
cost-parameter grid behind the critical-rate surface.

Rates are searched by bisection in log space over deterministic fixed-seed
ensembles, so every threshold is a pure function of (config, base_seed,
n_seeds, resolution).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .config import ChokeCriterion, TonConfig
from .kernel import run_simulation
from .rng import derive_seed
from .sim import RunStats, structurally_dielectric, total_txn_cost

DEFAULT_SEEDS = 8
DEFAULT_RESOLUTION = 0.01
DEFAULT_RATE_FLOOR = 1e-3
DEFAULT_RATE_CEILING = 2e3

FLAG_TRUE_AT_FLOOR = "true_at_floor"
FLAG_FALSE_AT_CEILING = "false_at_ceiling"
FLAG_ZERO_TRAFFIC = "zero_traffic_below"
FLAG_UNOBSERVABLE_LOW = "predicate_unobservable_at_bracket_low"
FLAG_R0_CLAMPED = "r0_clamped_to_r1"
FLAG_NO_CHOKE = "no_choke_in_ensemble"
FLAG_FAULTS_DISABLED = "faults_disabled"
FLAG_DIELECTRIC = "structurally_dielectric"


class EnsembleCache:
    """Memoizes single runs by config digest within one measurement session."""

    def __init__(self, jobs: int = 1):
        self.jobs = max(1, jobs)
        self._memo: dict[str, RunStats] = {}

    def run_many(self, configs: list[TonConfig]) -> list[RunStats]:
        missing = [c for c in configs if c.digest() not in self._memo]
        if missing:
            if self.jobs > 1 and len(missing) > 1:
                with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                    results = list(pool.map(run_simulation, missing))
            else:
                results = [run_simulation(c) for c in missing]
            for cfg, st in zip(missing, results):
                self._memo[cfg.digest()] = st
        return [self._memo[c.digest()] for c in configs]


def detect_choke(stats: RunStats, criterion: ChokeCriterion) -> float | None:
    """Time of the first window at or below the commit floor, or the moment
    the last node died; None if neither happened.

    The window fractions in `stats` were accumulated with the window size the
    run was configured with; only the floor is re-applied here.
    """
    for rec in stats.window_records:
        if rec.commit_fraction <= criterion.commit_floor:
            return rec.time
    if stats.all_dead_time is not None:
        return stats.all_dead_time
    return None


@dataclass
class Probe:
    """One evaluated injection rate during a threshold search.

    `informative` is False when the runs could not have satisfied the
    predicate regardless of behavior (no traffic for the abort predicate;
    no scorable window for the choke predicate).
    """

    rate: float
    satisfied: bool
    per_seed: list[bool]
    pooled_injected: int
    pooled_aborted: int
    informative: bool = True


@dataclass
class ThresholdResult:
    """Outcome of a bisection search over injection rate."""

    rate: float
    bracket: tuple[float, float]
    resolution: float
    seeds_used: int
    flags: list[str] = field(default_factory=list)
    probes: list[Probe] = field(default_factory=list)

    def seed_spread_stderr(self) -> float:
        """Standard error of per-seed log-thresholds, reconstructed from the
        probe history; floored at the bisection resolution."""
        lo0, hi0 = _probe_bounds(self.probes)
        n = self.seeds_used
        logs = []
        for j in range(n):
            lo, hi = lo0, hi0
            for p in self.probes:
                if p.per_seed[j]:
                    hi = min(hi, p.rate)
                else:
                    lo = max(lo, p.rate)
            if hi < lo:  # non-monotone seed outcomes; widest reading
                lo, hi = min(hi, lo), max(hi, lo)
            logs.append(0.5 * (math.log(lo) + math.log(hi)))
        floor = 0.5 * math.log1p(self.resolution)
        if len(logs) < 2:
            return floor
        mean = sum(logs) / n
        var = sum((x - mean) ** 2 for x in logs) / (n - 1)
        return max(math.sqrt(var / n), floor)


def _probe_bounds(probes: list[Probe]) -> tuple[float, float]:
    rates = [p.rate for p in probes]
    return (min(rates), max(rates)) if rates else (1e-12, 1e12)


def rate_hint(config: TonConfig) -> float:
    """Mean-load estimate of the choke rate, used to seed the bracketing."""
    mean_factor = total_txn_cost(config.psi0, config.alpha, config.txn_length) / (
        config.txn_length * max(config.psi0, 1e-300)
    )
    est = (
        0.5
        * config.n_nodes
        * config.capacity
        / (config.txn_length * config.psi0 * mean_factor * config.decay_time)
    )
    return est if math.isfinite(est) and est > 0 else 1.0


def _search_threshold(
    predicate,
    hint: float,
    resolution: float,
    rate_floor: float,
    rate_ceiling: float,
    seeds_used: int,
) -> ThresholdResult:
    """Log-space bisection for the lowest rate satisfying `predicate`.

    The predicate is assumed monotone in rate (see module notes); probes are
    recorded so callers can audit the bracket and per-seed outcomes.
    """
    probes: list[Probe] = []

    def check(r: float) -> bool:
        p = predicate(r)
        probes.append(p)
        return p.satisfied

    r = min(max(hint, rate_floor), rate_ceiling)
    if check(r):
        hi = r
        lo = None
        floor_flags = [FLAG_TRUE_AT_FLOOR]
        while hi > rate_floor:
            r = max(hi / 2.0, rate_floor)
            if check(r):
                hi = r
            elif probes[-1].pooled_injected == 0:
                # no traffic at all within the horizon: the predicate held at
                # every rate that produced transactions, so report zero
                floor_flags.append(FLAG_ZERO_TRAFFIC)
                break
            else:
                lo = r
                break
        if lo is None:
            return ThresholdResult(
                rate=0.0,
                bracket=(0.0, hi),
                resolution=resolution,
                seeds_used=seeds_used,
                flags=floor_flags,
                probes=probes,
            )
    else:
        lo = r
        hi = None
        while lo < rate_ceiling:
            r = min(lo * 2.0, rate_ceiling)
            if check(r):
                hi = r
                break
            lo = r
        if hi is None:
            return ThresholdResult(
                rate=rate_ceiling,
                bracket=(lo, rate_ceiling),
                resolution=resolution,
                seeds_used=seeds_used,
                flags=[FLAG_FALSE_AT_CEILING],
                probes=probes,
            )

    while hi / lo > 1.0 + resolution:
        mid = math.sqrt(lo * hi)
        if check(mid):
            hi = mid
        else:
            lo = mid

    flags = []
    by_rate = {p.rate: p for p in probes}
    if lo in by_rate and not by_rate[lo].informative:
        # below the bracket the predicate could not fire at all (e.g. not
        # enough injections to score one choke window within the horizon)
        flags.append(FLAG_UNOBSERVABLE_LOW)
    return ThresholdResult(
        rate=math.sqrt(lo * hi),
        bracket=(lo, hi),
        resolution=resolution,
        seeds_used=seeds_used,
        flags=flags,
        probes=probes,
    )


def _ensemble_configs(
    config: TonConfig, rate: float, base_seed: int, n_seeds: int, faults: bool
) -> list[TonConfig]:
    fml = config.fault_mean_delay if faults else None
    return [
        config.with_(
            injection_rate=rate,
            seed=derive_seed(base_seed, j),
            fault_mean_delay=fml,
        )
        for j in range(n_seeds)
    ]


def find_r0(
    config: TonConfig,
    base_seed: int = 1,
    n_seeds: int = DEFAULT_SEEDS,
    resolution: float = DEFAULT_RESOLUTION,
    rate_floor: float = DEFAULT_RATE_FLOOR,
    rate_ceiling: float = DEFAULT_RATE_CEILING,
    cache: EnsembleCache | None = None,
    hint: float | None = None,
) -> ThresholdResult:
    """Superconductive-to-resistive threshold: the lowest rate at which the
    pooled ensemble abort fraction reaches max(1e-6, one abort)."""
    cache = cache or EnsembleCache()

    def predicate(rate: float) -> Probe:
        runs = cache.run_many(
            _ensemble_configs(config, rate, base_seed, n_seeds, faults=False)
        )
        injected = sum(st.injected for st in runs)
        aborted = sum(st.aborted for st in runs)
        ok = injected > 0 and aborted >= max(1.0, 1e-6 * injected)
        return Probe(
            rate=rate,
            satisfied=ok,
            per_seed=[st.aborted >= 1 for st in runs],
            pooled_injected=injected,
            pooled_aborted=aborted,
            informative=injected > 0,
        )

    return _search_threshold(
        predicate,
        hint if hint is not None else 0.5 * rate_hint(config),
        resolution,
        rate_floor,
        rate_ceiling,
        n_seeds,
    )


def find_r1(
    config: TonConfig,
    base_seed: int = 1,
    n_seeds: int = DEFAULT_SEEDS,
    resolution: float = DEFAULT_RESOLUTION,
    rate_floor: float = DEFAULT_RATE_FLOOR,
    rate_ceiling: float = DEFAULT_RATE_CEILING,
    cache: EnsembleCache | None = None,
    hint: float | None = None,
) -> ThresholdResult:
    """Resistive-to-dielectric threshold: the lowest rate at which the
    majority of ensemble runs choke within the simulated duration."""
    cache = cache or EnsembleCache()

    def predicate(rate: float) -> Probe:
        runs = cache.run_many(
            _ensemble_configs(config, rate, base_seed, n_seeds, faults=False)
        )
        choked = [st.choke_time is not None for st in runs]
        scorable = [
            bool(st.window_records) or st.all_dead_time is not None for st in runs
        ]
        return Probe(
            rate=rate,
            satisfied=2 * sum(choked) > len(choked),
            per_seed=choked,
            pooled_injected=sum(st.injected for st in runs),
            pooled_aborted=sum(st.aborted for st in runs),
            informative=2 * sum(scorable) > len(scorable),
        )

    return _search_threshold(
        predicate,
        hint if hint is not None else rate_hint(config),
        resolution,
        rate_floor,
        rate_ceiling,
        n_seeds,
    )


@dataclass
class M0Result:
    """Disabled-node fraction at choke onset, at fixed injection rate r0."""

    m0: float | None
    per_run: list[float | None]
    choked_runs: int
    seeds_used: int
    flags: list[str] = field(default_factory=list)


def find_m0(
    config: TonConfig,
    r0: float,
    base_seed: int = 1,
    n_seeds: int = DEFAULT_SEEDS,
    cache: EnsembleCache | None = None,
) -> M0Result:
    """Run at the abort-onset rate with fault injection and record the mean
    disabled fraction at choke; None when no run chokes."""
    if not config.faults_enabled:
        return M0Result(None, [], 0, n_seeds, flags=[FLAG_FAULTS_DISABLED])
    cache = cache or EnsembleCache()
    runs = cache.run_many(
        _ensemble_configs(config, r0, base_seed, n_seeds, faults=True)
    )
    fractions = [st.disabled_fraction_at_choke for st in runs]
    choked = [f for f in fractions if f is not None]
    if not choked:
        return M0Result(None, fractions, 0, n_seeds, flags=[FLAG_NO_CHOKE])
    return M0Result(sum(choked) / len(choked), fractions, len(choked), n_seeds)


@dataclass
class ResilienceProfile:
    """Behavioral-equivalence fingerprint of one configuration."""

    r0: float | None
    r1: float | None
    rho0: float | None
    m0: float | None
    seeds_used: int
    resolution: float
    flags: list[str] = field(default_factory=list)
    r0_bracket: tuple[float, float] | None = None
    r1_bracket: tuple[float, float] | None = None

    def as_record(self) -> dict:
        return {
            "r0": self.r0,
            "r1": self.r1,
            "rho0": self.rho0,
            "m0": self.m0,
            "seeds_used": self.seeds_used,
            "resolution": self.resolution,
            "flags": ";".join(self.flags),
        }


def resilience_profile(
    config: TonConfig,
    base_seed: int = 1,
    n_seeds: int = DEFAULT_SEEDS,
    resolution: float = DEFAULT_RESOLUTION,
    jobs: int = 1,
    measure_m0: bool | None = None,
    rate_floor: float = DEFAULT_RATE_FLOOR,
    rate_ceiling: float = DEFAULT_RATE_CEILING,
) -> ResilienceProfile:
    """Compose r0, r1, rho0 = r0/r1 and (with faults configured) m0."""
    cache = EnsembleCache(jobs=jobs)
    res1 = find_r1(
        config, base_seed, n_seeds, resolution, rate_floor, rate_ceiling, cache
    )
    res0 = find_r0(
        config,
        base_seed,
        n_seeds,
        resolution,
        rate_floor,
        rate_ceiling,
        cache,
        hint=res1.rate / 2.0 if res1.rate > 0 else None,
    )
    flags = [f"r1:{f}" for f in res1.flags] + [f"r0:{f}" for f in res0.flags]
    r0, r1 = res0.rate, res1.rate
    if r0 > r1:
        # thresholds within one resolution step of each other can cross
        r0 = r1
        flags.append(FLAG_R0_CLAMPED)
    rho0 = (r0 / r1) if r1 > 0 else None

    m0 = None
    if measure_m0 is None:
        measure_m0 = config.faults_enabled
    if measure_m0:
        m0res = find_m0(config, r0, base_seed, n_seeds, cache)
        m0 = m0res.m0
        flags.extend(f"m0:{f}" for f in m0res.flags)

    return ResilienceProfile(
        r0=r0,
        r1=r1,
        rho0=rho0,
        m0=m0,
        seeds_used=n_seeds,
        resolution=resolution,
        flags=flags,
        r0_bracket=res0.bracket,
        r1_bracket=res1.bracket,
    )


def behaviorally_equivalent(
    p: ResilienceProfile, q: ResilienceProfile, rel_tol: float
) -> bool:
    """True when the profiles match on every jointly measured threshold.

    r1 must be present in both; r0 and m0 are compared when both sides have
    them. Relative difference is measured against the larger value.
    """
    if p.r1 is None or q.r1 is None:
        raise ValueError("both profiles need a measured r1")

    def close(a: float, b: float) -> bool:
        big = max(abs(a), abs(b))
        return True if big == 0 else abs(a - b) / big <= rel_tol

    if not close(p.r1, q.r1):
        return False
    if p.r0 is not None and q.r0 is not None and not close(p.r0, q.r0):
        return False
    if p.m0 is not None and q.m0 is not None and not close(p.m0, q.m0):
        return False
    return True


@dataclass
class GridSample:
    """One cost-parameter grid cell of the critical-rate surface."""

    alpha: float
    psi0: float
    ln_r1: float
    ln_r0: float | None
    stderr: float
    flags: str = ""

    def as_record(self) -> dict:
        return {
            "alpha": self.alpha,
            "psi0": self.psi0,
            "ln_r1": self.ln_r1,
            "ln_r0": self.ln_r0,
            "stderr": self.stderr,
            "flags": self.flags,
        }


def grid_sweep(
    config_template: TonConfig,
    alpha_grid: list[float],
    psi0_grid: list[float],
    base_seed: int = 1,
    n_seeds: int = DEFAULT_SEEDS,
    resolution: float = DEFAULT_RESOLUTION,
    include_r0: bool = False,
    jobs: int = 1,
    rate_floor: float = DEFAULT_RATE_FLOOR,
    rate_ceiling: float = DEFAULT_RATE_CEILING,
) -> list[GridSample]:
    """Measure ln r1 (optionally ln r0) on the alpha x psi0 grid, row-major.

    Each cell gets its own derived seed block; the previous cell in a row
    warm-starts the next cell's bracketing.
    """
    if not alpha_grid or not psi0_grid:
        raise ValueError("alpha and psi0 grids must be non-empty")
    if any(a <= 0 for a in alpha_grid) or any(p <= 0 for p in psi0_grid):
        raise ValueError("grid values must be positive")

    samples: list[GridSample] = []
    cell = 0
    for alpha in alpha_grid:
        row_hint: float | None = None
        for psi0 in psi0_grid:
            cfg = config_template.with_(alpha=alpha, psi0=psi0)
            if structurally_dielectric(cfg):
                # one hop's own cost reaches capacity: committed == 0 at any
                # rate, so both thresholds are exactly zero; nothing to search
                samples.append(
                    GridSample(
                        alpha=alpha, psi0=psi0, ln_r1=-math.inf,
                        ln_r0=None, stderr=0.0, flags=FLAG_DIELECTRIC,
                    )
                )
                cell += 1
                continue
            cache = EnsembleCache(jobs=jobs)
            cell_seed = derive_seed(base_seed, cell)
            res1 = find_r1(
                cfg, cell_seed, n_seeds, resolution, rate_floor, rate_ceiling,
                cache, hint=row_hint,
            )
            flags = [f"r1:{f}" for f in res1.flags]
            ln_r0 = None
            if include_r0:
                res0 = find_r0(
                    cfg, cell_seed, n_seeds, resolution, rate_floor,
                    rate_ceiling, cache,
                    hint=res1.rate / 2.0 if res1.rate > 0 else None,
                )
                flags.extend(f"r0:{f}" for f in res0.flags)
                ln_r0 = math.log(res0.rate) if res0.rate > 0 else None
            samples.append(
                GridSample(
                    alpha=alpha,
                    psi0=psi0,
                    ln_r1=math.log(res1.rate) if res1.rate > 0 else -math.inf,
                    ln_r0=ln_r0,
                    stderr=res1.seed_spread_stderr(),
                    flags=";".join(flags),
                )
            )
            row_hint = res1.rate if res1.rate > 0 else None
            cell += 1
    return samples
