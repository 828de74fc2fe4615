"""Engine selection: compiled extension when available, pure Python otherwise.

The environment variable TONSIM_KERNEL forces a choice ("compiled" or
"pure"); by default the compiled kernel is used whenever it imports.
"""

from __future__ import annotations

import os

from .config import TonConfig
from .sim import RunStats, WindowRecord, run_simulation_pure

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built; fall back to the reference engine
    _compiled = None

_FORCED = os.environ.get("TONSIM_KERNEL", "").strip().lower()
if _FORCED and _FORCED not in ("compiled", "pure"):
    raise RuntimeError(
        f"TONSIM_KERNEL must be 'compiled' or 'pure', got {_FORCED!r}"
    )
if _FORCED == "compiled" and _compiled is None:
    raise RuntimeError("TONSIM_KERNEL=compiled but tonsim._kernel is not built")


def have_compiled_kernel() -> bool:
    return _compiled is not None


def active_kernel() -> str:
    """Name of the engine run_simulation dispatches to by default."""
    if _FORCED:
        return _FORCED
    return "compiled" if _compiled is not None else "pure"


def run_simulation_compiled(config: TonConfig) -> RunStats:
    if _compiled is None:
        raise RuntimeError("compiled kernel is not available")
    config.validate()
    raw = _compiled.run_kernel(
        config.n_nodes,
        config.density,
        config.capacity,
        config.txn_length,
        config.subtxn_time,
        config.sim_duration,
        config.decay_time,
        config.psi0,
        config.alpha,
        config.injection_rate,
        config.fault_mean_delay,
        config.seed,
        config.choke.window,
        config.choke.commit_floor,
    )
    raw["window_records"] = [WindowRecord(*r) for r in raw.pop("window_records")]
    return RunStats(**raw)


def run_simulation(config: TonConfig, kernel: str | None = None) -> RunStats:
    """Execute one run with the selected engine.

    Identical configs give bit-identical RunStats regardless of the engine.
    """
    which = kernel or active_kernel()
    if which == "compiled":
        return run_simulation_compiled(config)
    if which == "pure":
        return run_simulation_pure(config)
    raise ValueError(f"unknown kernel {which!r}")
