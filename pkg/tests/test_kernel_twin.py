"""The compiled kernel must replicate the pure engine bit-for-bit."""

import random

import pytest

from tonsim.config import TonConfig
from tonsim.kernel import have_compiled_kernel, run_simulation_compiled
from tonsim.rng import Xoshiro256pp
from tonsim.sim import run_simulation_pure

pytestmark = pytest.mark.skipif(
    not have_compiled_kernel(), reason="compiled kernel not built"
)


def test_rng_streams_match():
    from tonsim import _kernel

    for seed in (0, 1, 42, 2**64 - 1, 987654321123456789):
        rng = Xoshiro256pp(seed)
        assert [rng.next_u64() for _ in range(500)] == _kernel.rng_sample_u64(seed, 500)
        rng = Xoshiro256pp(seed)
        assert [rng.open01() for _ in range(500)] == _kernel.rng_sample_open01(seed, 500)


CASES = [
    # overload cascade, alpha = 1
    TonConfig(n_nodes=40, density=0.5, capacity=10, txn_length=10,
              sim_duration=400, injection_rate=3.0, seed=1),
    # empty graph
    TonConfig(n_nodes=30, density=0.0, capacity=10, txn_length=5,
              sim_duration=300, injection_rate=1.0, seed=4),
    # complete graph, surcharged costs
    TonConfig(n_nodes=30, density=1.0, capacity=5, txn_length=8,
              sim_duration=300, psi0=0.5, alpha=1.3, injection_rate=2.0, seed=5),
    # sparse graph, discounted costs, faults
    TonConfig(n_nodes=50, density=0.2, capacity=8, txn_length=12,
              sim_duration=500, psi0=2.0, alpha=0.7, injection_rate=1.5,
              fault_mean_delay=200.0, seed=6),
    # zero rate
    TonConfig(n_nodes=25, density=0.4, capacity=1e9, txn_length=10,
              sim_duration=300, injection_rate=0.0, seed=7),
    # short transactions, steep surcharge, faults
    TonConfig(n_nodes=60, density=0.6, capacity=12, txn_length=3,
              sim_duration=600, psi0=1.5, alpha=2.0, injection_rate=4.0,
              fault_mean_delay=300.0, seed=8),
    # single-subtransaction masters
    TonConfig(n_nodes=20, density=0.5, capacity=4, txn_length=1,
              sim_duration=250, injection_rate=5.0, seed=9),
]


@pytest.mark.parametrize("cfg", CASES, ids=range(len(CASES)))
def test_stats_bit_identical(cfg):
    assert run_simulation_pure(cfg) == run_simulation_compiled(cfg)


def test_stats_bit_identical_randomized():
    rnd = random.Random(5150)
    for _ in range(25):
        cfg = TonConfig(
            n_nodes=rnd.randint(5, 50),
            density=rnd.choice([0.0, rnd.uniform(0.05, 1.0), 1.0]),
            capacity=rnd.choice([rnd.uniform(2.0, 20.0), 1e9]),
            txn_length=rnd.randint(1, 14),
            subtxn_time=rnd.choice([1.0, 0.5]),
            sim_duration=rnd.uniform(50.0, 400.0),
            decay_time=rnd.uniform(5.0, 60.0),
            psi0=rnd.uniform(0.1, 3.0),
            alpha=rnd.choice([1.0, rnd.uniform(0.3, 2.0)]),
            injection_rate=rnd.uniform(0.0, 8.0),
            fault_mean_delay=rnd.choice([None, rnd.uniform(30.0, 500.0)]),
            seed=rnd.getrandbits(64),
        ).with_(window=rnd.choice([50, 500, 1000]))
        pure = run_simulation_pure(cfg)
        fast = run_simulation_compiled(cfg)
        assert pure == fast, cfg


def test_window_record_floats_identical():
    cfg = CASES[0].with_(window=100)
    pure = run_simulation_pure(cfg)
    fast = run_simulation_compiled(cfg)
    assert len(pure.window_records) > 0
    for a, b in zip(pure.window_records, fast.window_records):
        assert a.time.hex() == b.time.hex()
        assert a.commit_fraction.hex() == b.commit_fraction.hex()
        assert a.disabled_nodes == b.disabled_nodes
