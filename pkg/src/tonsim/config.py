"""Scenario configuration for a single transaction-oriented network run."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

#: Marker used for a disabled fault injector (no internal faults at all).
FAULTS_DISABLED = None


@dataclass(frozen=True)
class ChokeCriterion:
    """Operational definition of a choked network.

    A window is `window` consecutively injected master transactions; the
    network is choked at the first window whose committed fraction falls to
    `commit_floor` or below, or at the moment the last node dies.
    """

    window: int = 1000
    commit_floor: float = 0.01

    def validate(self) -> None:
        if self.window < 1:
            raise ConfigError(f"choke window must be >= 1, got {self.window}")
        if not (0.0 <= self.commit_floor < 1.0):
            raise ConfigError(
                f"choke commit floor must be in [0, 1), got {self.commit_floor}"
            )


@dataclass(frozen=True)
class TonConfig:
    """Full parameterization of one network / cost scenario.

    Times (subtxn_time, sim_duration, decay_time, fault_mean_delay) share one
    simulation time unit. `fault_mean_delay=None` disables internal faults.
    """

    n_nodes: int = 1000
    density: float = 0.5
    capacity: float = 10.0
    txn_length: int = 10
    subtxn_time: float = 1.0
    sim_duration: float = 36500.0
    decay_time: float = 30.0
    psi0: float = 1.0
    alpha: float = 1.0
    injection_rate: float = 1.0
    fault_mean_delay: float | None = FAULTS_DISABLED
    seed: int = 1
    choke: ChokeCriterion = field(default_factory=ChokeCriterion)

    def validate(self) -> "TonConfig":
        if self.n_nodes < 2:
            raise ConfigError(f"n_nodes must be >= 2, got {self.n_nodes}")
        if not (0.0 <= self.density <= 1.0):
            raise ConfigError(f"density must be in [0, 1], got {self.density}")
        if not (self.capacity > 0.0):
            raise ConfigError(f"capacity must be > 0, got {self.capacity}")
        if self.txn_length < 1:
            raise ConfigError(f"txn_length must be >= 1, got {self.txn_length}")
        for name in ("subtxn_time", "sim_duration", "decay_time"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be positive and finite, got {v}")
        if self.psi0 < 0.0:
            raise ConfigError(f"psi0 must be >= 0, got {self.psi0}")
        if not (self.alpha > 0.0):
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.injection_rate < 0.0:
            raise ConfigError(
                f"injection_rate must be >= 0, got {self.injection_rate}"
            )
        if self.fault_mean_delay is not None and not (self.fault_mean_delay > 0.0):
            raise ConfigError(
                f"fault_mean_delay must be > 0 or disabled, got {self.fault_mean_delay}"
            )
        if not (0 <= self.seed <= 0xFFFFFFFFFFFFFFFF):
            raise ConfigError(f"seed must fit in 64 bits, got {self.seed}")
        self.choke.validate()
        return self

    @property
    def faults_enabled(self) -> bool:
        return self.fault_mean_delay is not None

    def with_(self, **kwargs) -> "TonConfig":
        """Copy with replaced fields, re-validated."""
        choke_kw = {}
        for k in ("window", "commit_floor"):
            if k in kwargs:
                choke_kw[k] = kwargs.pop(k)
        cfg = replace(self, **kwargs)
        if choke_kw:
            cfg = replace(cfg, choke=replace(cfg.choke, **choke_kw))
        return cfg.validate()

    def as_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "density": self.density,
            "capacity": self.capacity,
            "txn_length": self.txn_length,
            "subtxn_time": self.subtxn_time,
            "sim_duration": self.sim_duration,
            "decay_time": self.decay_time,
            "psi0": self.psi0,
            "alpha": self.alpha,
            "injection_rate": self.injection_rate,
            "fault_mean_delay": self.fault_mean_delay,
            "seed": self.seed,
            "choke_window": self.choke.window,
            "choke_commit_floor": self.choke.commit_floor,
        }

    def digest(self) -> str:
        """Stable hash of the resolved configuration."""
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


class ConfigError(ValueError):
    """A configuration field violates its invariant."""
