import random

import pytest

from tonsim.config import TonConfig
from tonsim.sim import run_simulation_pure


def test_zero_rate_injects_nothing():
    cfg = TonConfig(n_nodes=20, density=0.5, injection_rate=0.0, sim_duration=100.0)
    st = run_simulation_pure(cfg)
    assert (st.injected, st.committed, st.aborted) == (0, 0, 0)


def test_empty_graph_commits_nothing():
    cfg = TonConfig(
        n_nodes=20, density=0.0, txn_length=5, injection_rate=2.0,
        sim_duration=200.0, seed=3,
    )
    st = run_simulation_pure(cfg)
    assert st.injected > 0
    assert st.committed == 0
    # every transaction dies at the first routing step
    assert st.aborted_no_route == st.aborted
    assert st.aborted + st.in_flight_at_end == st.injected


def test_unreachable_capacity_aborts_nothing():
    cfg = TonConfig(
        n_nodes=50, density=0.5, capacity=1e9, txn_length=10,
        psi0=1.0, alpha=1.0, injection_rate=0.5, sim_duration=400.0, seed=5,
    )
    st = run_simulation_pure(cfg)
    assert st.aborted == 0
    assert st.nodes_disabled_overload == 0
    assert st.committed == st.injected - st.in_flight_at_end
    assert st.committed > 0


def test_determinism_field_for_field():
    cfg = TonConfig(
        n_nodes=40, density=0.4, capacity=8.0, txn_length=7,
        psi0=1.2, alpha=1.1, injection_rate=3.0, sim_duration=300.0,
        fault_mean_delay=150.0, seed=21,
    )
    assert run_simulation_pure(cfg) == run_simulation_pure(cfg)


def test_choke_reported_on_overload_collapse():
    cfg = TonConfig(
        n_nodes=30, density=0.5, capacity=6.0, txn_length=10,
        injection_rate=8.0, sim_duration=400.0, seed=2,
    ).with_(window=200)
    st = run_simulation_pure(cfg)
    assert st.choke_time is not None
    assert 0.0 < st.disabled_fraction_at_choke <= 1.0
    assert any(rec.commit_fraction <= 0.01 for rec in st.window_records) or (
        st.all_dead_time is not None
    )


def test_all_dead_time_set_when_faults_kill_everyone():
    cfg = TonConfig(
        n_nodes=15, density=0.5, capacity=1e9, injection_rate=0.1,
        sim_duration=5000.0, fault_mean_delay=100.0, seed=4,
    )
    st = run_simulation_pure(cfg)
    assert st.nodes_disabled_fault == 15
    assert st.all_dead_time is not None
    assert st.choke_time is not None and st.choke_time <= st.all_dead_time


def random_config(rnd):
    return TonConfig(
        n_nodes=rnd.randint(5, 40),
        density=rnd.choice([0.0, rnd.uniform(0.05, 1.0), 1.0]),
        capacity=rnd.choice([rnd.uniform(2.0, 20.0), 1e9]),
        txn_length=rnd.randint(1, 12),
        subtxn_time=rnd.choice([1.0, 0.5, 2.0]),
        sim_duration=rnd.uniform(50.0, 250.0),
        decay_time=rnd.uniform(5.0, 60.0),
        psi0=rnd.uniform(0.1, 3.0),
        alpha=rnd.choice([1.0, rnd.uniform(0.3, 0.99), rnd.uniform(1.01, 1.8)]),
        injection_rate=rnd.uniform(0.0, 6.0),
        fault_mean_delay=rnd.choice([None, rnd.uniform(30.0, 400.0)]),
        seed=rnd.getrandbits(64),
    ).with_(window=rnd.choice([50, 200, 1000]))


@pytest.mark.parametrize("batch", range(4))
def test_randomized_invariants(batch):
    """Conservation, capacity safety, monotone death, commit length and
    routing exclusion over randomized configurations."""
    rnd = random.Random(1000 + batch)
    for _ in range(30):
        cfg = random_config(rnd)
        st = run_simulation_pure(cfg, collect_paths=True, check_invariants=True)
        # conservation
        assert st.injected == st.committed + st.aborted + st.in_flight_at_end
        assert st.aborted == st.aborted_no_route + st.aborted_host_died
        # monotone death: each node disabled at most once, no resurrections
        assert st.nodes_disabled_overload + st.nodes_disabled_fault <= cfg.n_nodes
        # commit length and routing exclusion, from recorded paths
        committed_seen = 0
        for ordinal, path in st.paths.items():
            for a, b in zip(path, path[1:]):
                assert a != b, "subtransaction routed back to its own host"
            status = st.outcomes.get(ordinal)
            if status == "committed":
                committed_seen += 1
                assert len(path) == cfg.txn_length
            elif status == "aborted":
                assert len(path) <= cfg.txn_length
        assert committed_seen == st.committed
        # window records are chronological and within [0, 1]
        times = [rec.time for rec in st.window_records]
        assert times == sorted(times)
        assert all(0.0 <= rec.commit_fraction <= 1.0 for rec in st.window_records)


def test_repeat_run_object_equality_randomized():
    rnd = random.Random(77)
    for _ in range(10):
        cfg = random_config(rnd)
        assert run_simulation_pure(cfg) == run_simulation_pure(cfg)
