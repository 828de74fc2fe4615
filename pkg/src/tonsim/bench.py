"""Compare the compiled kernel against the pure-Python reference engine."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .config import TonConfig
from .kernel import have_compiled_kernel, run_simulation
from .rng import derive_seed


@dataclass
class BenchRecord:
    kernel: str
    runs: int
    events: int
    seconds: float
    events_per_second: float
    stats_equal: bool

    def as_record(self) -> dict:
        return {
            "kernel": self.kernel,
            "runs": self.runs,
            "events": self.events,
            "seconds": self.seconds,
            "events_per_second": self.events_per_second,
            "stats_equal": self.stats_equal,
        }


def run_benchmark(config: TonConfig, base_seed: int = 1, runs: int = 3) -> list[BenchRecord]:
    """Time both engines on identical runs and verify they agree exactly."""
    kernels = ["pure"]
    if have_compiled_kernel():
        kernels.append("compiled")
    configs = [config.with_(seed=derive_seed(base_seed, j)) for j in range(runs)]

    results = {}
    timings = {}
    for kernel in kernels:
        t0 = time.perf_counter()
        stats = [run_simulation(c, kernel=kernel) for c in configs]
        timings[kernel] = time.perf_counter() - t0
        results[kernel] = stats

    agree = True
    if len(kernels) == 2:
        agree = results["pure"] == results["compiled"]

    out = []
    for kernel in kernels:
        events = sum(st.events_processed for st in results[kernel])
        secs = timings[kernel]
        out.append(
            BenchRecord(
                kernel=kernel,
                runs=runs,
                events=events,
                seconds=secs,
                events_per_second=events / secs if secs > 0 else float("inf"),
                stats_equal=agree,
            )
        )
    return out
