"""tonsim: deterministic transaction-oriented network simulator and
resilience/flattening experiment harness."""

from .config import ChokeCriterion, ConfigError, TonConfig
from .kernel import active_kernel, have_compiled_kernel, run_simulation
from .sim import RunStats, WindowRecord

__version__ = "0.1.0"

__all__ = [
    "ChokeCriterion",
    "ConfigError",
    "TonConfig",
    "RunStats",
    "WindowRecord",
    "run_simulation",
    "active_kernel",
    "have_compiled_kernel",
    "__version__",
]
