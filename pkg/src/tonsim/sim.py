"""Discrete-event core: cost model, ledger, routing, faults, and the
pure-Python reference engine.

The engine in `run_simulation_pure` is the semantic reference. The compiled
kernel (`tonsim._kernel`) re-implements the same event loop in C; the two must
produce bit-identical RunStats for equal configs, so every RNG draw and every
floating-point expression here is mirrored there in the same order.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple

from .config import TonConfig
from .network import Network, NodeState, generate_network
from .rng import Xoshiro256pp, next_injection_delay


class SimError(Exception):
    """Contract violation inside the simulation core."""


class TxnStatus(IntEnum):
    IN_FLIGHT = 0
    COMMITTED = 1
    ABORTED = 2


class AbortReason(IntEnum):
    ALL_NEIGHBORS_DISABLED = 0
    HOST_DIED = 1


class EventKind(IntEnum):
    INJECT = 0
    SUBTXN_COMPLETE = 1
    NODE_FAULT = 2
    END_OF_SIM = 3


@dataclass
class Transaction:
    """A master transaction of `txn_length` sequential subtransactions."""

    id: int
    current_index: int
    current_node: int
    previous_node: int
    status: TxnStatus = TxnStatus.IN_FLIGHT
    abort_reason: AbortReason | None = None


class WindowRecord(NamedTuple):
    """Scored commit-fraction window (see ChokeCriterion)."""

    time: float
    commit_fraction: float
    disabled_nodes: int


@dataclass
class RunStats:
    """Counts and choke telemetry of one completed run."""

    injected: int = 0
    committed: int = 0
    aborted: int = 0
    aborted_no_route: int = 0
    aborted_host_died: int = 0
    in_flight_at_end: int = 0
    nodes_disabled_overload: int = 0
    nodes_disabled_fault: int = 0
    events_processed: int = 0
    window_records: list[WindowRecord] = field(default_factory=list)
    choke_time: float | None = None
    disabled_fraction_at_choke: float | None = None
    all_dead_time: float | None = None

    @property
    def choked(self) -> bool:
        return self.choke_time is not None


@dataclass
class CostLedger:
    """Per-node decayed cumulative cost with its last decay timestamp."""

    xi: list[float]
    last_decay_time: list[float]

    @classmethod
    def fresh(cls, n_nodes: int) -> "CostLedger":
        return cls(xi=[0.0] * n_nodes, last_decay_time=[0.0] * n_nodes)


def subtxn_cost(i: int, psi0: float, alpha: float) -> float:
    """Full cost of the i-th subtransaction: transient plus long-term part.

    The long-term overhead is psi0*(alpha^(i-1) - 1), so together with the
    transient psi0 the i-th subtransaction charges psi0*alpha^(i-1).
    """
    if i < 1:
        raise ValueError(f"subtransaction index must be >= 1, got {i}")
    return psi0 * alpha ** float(i - 1)


def structurally_dielectric(config: TonConfig) -> bool:
    """True when some single subtransaction's cost already reaches capacity.

    Such a hop kills any host unconditionally (the ledger is never negative),
    so no master can complete all its hops: the committed count is zero at
    every injection rate and the choke threshold is exactly zero.
    """
    worst = max(subtxn_cost(1, config.psi0, config.alpha),
                subtxn_cost(config.txn_length, config.psi0, config.alpha))
    return worst >= config.capacity


def total_txn_cost(psi0: float, alpha: float, length: int) -> float:
    """Total committed-transaction cost: geometric sum of subtxn_cost."""
    if length < 1:
        raise ValueError(f"transaction length must be >= 1, got {length}")
    if alpha <= 0.0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if alpha == 1.0:
        return psi0 * length
    return psi0 * (alpha ** float(length) - 1.0) / (alpha - 1.0)


def apply_decay(ledger: CostLedger, node: int, now: float, decay_time: float) -> float:
    """Exponential decay of the node's cumulative cost up to `now`."""
    last = ledger.last_decay_time[node]
    if now < last:
        raise SimError(f"clock ran backwards at node {node}: {now} < {last}")
    xi = ledger.xi[node] * math.exp(-(now - last) / decay_time)
    ledger.xi[node] = xi
    ledger.last_decay_time[node] = now
    return xi


class AddResult(IntEnum):
    ACCEPTED = 0
    NODE_DIED = 1


def add_subtxn_cost(
    ledger: CostLedger,
    network: Network,
    node: int,
    i: int,
    config: TonConfig,
    now: float,
) -> AddResult:
    """Decay, then charge the i-th subtransaction; kill the node on overload.

    Standalone variant of the engine's inner step, for direct testing. The
    caller aborts hosted transactions itself when NODE_DIED is returned.
    """
    if not network.alive(node):
        raise SimError(f"cost added at disabled node {node}")
    apply_decay(ledger, node, now, config.decay_time)
    ledger.xi[node] += subtxn_cost(i, config.psi0, config.alpha)
    if ledger.xi[node] >= config.capacity:
        network.states[node] = NodeState.DISABLED_OVERLOAD
        return AddResult.NODE_DIED
    return AddResult.ACCEPTED


def route_next(network: Network, current_node: int, rng: Xoshiro256pp) -> int | None:
    """Uniform choice among alive neighbors of the current host.

    The previous host is a legal outcome; the current host never is (the
    graph is simple). Returns None when no alive neighbor exists. Consumes
    exactly one draw when a route exists and none otherwise.
    """
    off = network.offsets
    nbrs = network.neighbors
    states = network.states
    alive_count = 0
    for k in range(off[current_node], off[current_node + 1]):
        if states[nbrs[k]] == NodeState.ALIVE:
            alive_count += 1
    if alive_count == 0:
        return None
    pick = rng.bounded(alive_count)
    for k in range(off[current_node], off[current_node + 1]):
        w = nbrs[k]
        if states[w] == NodeState.ALIVE:
            if pick == 0:
                return w
            pick -= 1
    raise SimError("unreachable: alive neighbor count changed during routing")


def schedule_faults(config: TonConfig, rng: Xoshiro256pp) -> list[tuple[int, float]]:
    """One exponential fault time per node (mean fault_mean_delay), node order.

    Empty when fault injection is disabled. A fault firing at an already
    disabled node is a no-op in the engine.
    """
    if not config.faults_enabled:
        return []
    mean = config.fault_mean_delay
    return [(v, rng.exp_mean(mean)) for v in range(config.n_nodes)]


# Event-queue kinds, shared with the compiled kernel.
_EV_INJECT = 0
_EV_COMPLETE = 1
_EV_FAULT = 2
_EV_END = 3

_NIL = -1


def run_simulation_pure(
    config: TonConfig,
    collect_paths: bool = False,
    check_invariants: bool = False,
) -> RunStats:
    """Reference event loop. See the module docstring for the twin contract.

    `collect_paths` additionally returns the per-transaction host sequences
    on the stats object (attribute `paths`), for invariant tests only.
    """
    config.validate()
    n = config.n_nodes
    length = config.txn_length
    tau0 = config.subtxn_time
    horizon = config.sim_duration
    decay_h = config.decay_time
    capacity = config.capacity
    rate = config.injection_rate
    window = config.choke.window
    floor_frac = config.choke.commit_floor

    rng = Xoshiro256pp(config.seed)
    net = generate_network(n, config.density, rng)
    offsets = net.offsets
    neighbors = net.neighbors
    alive = [True] * n
    alive_count = n
    # dense id list of alive nodes for O(1) uniform source sampling;
    # deaths swap-remove, keeping both engines' draw sequences identical
    alive_list = list(range(n))
    alive_pos = list(range(n))

    # Per-subtransaction cost, charged in full at subtransaction start.
    costs = [config.psi0 * config.alpha ** float(i) for i in range(length)]

    xi = [0.0] * n
    last_decay = [0.0] * n

    # Transaction slot pool (struct-of-arrays, recycled through a free list).
    slot_node: list[int] = []
    slot_index: list[int] = []
    slot_window: list[int] = []
    slot_gen: list[int] = []
    slot_inflight: list[bool] = []
    slot_next: list[int] = []
    slot_prev: list[int] = []
    slot_txn: list[int] = []  # injection ordinal, for path recording
    free_slots: list[int] = []

    # Intrusive per-node list of hosted in-flight subtransactions.
    host_head = [_NIL] * n
    host_tail = [_NIL] * n

    # Window accounting, indexed by injection ordinal // window.
    win_resolved: list[int] = []
    win_committed: list[int] = []

    stats = RunStats()
    records = stats.window_records
    paths: dict[int, list[int]] = {} if collect_paths else None
    outcomes: dict[int, str] = {} if collect_paths else None

    heap: list[tuple[float, int, int, int, int]] = []
    seq = 0

    def push(t: float, kind: int, a: int, b: int) -> None:
        nonlocal seq
        heapq.heappush(heap, (t, seq, kind, a, b))
        seq += 1

    push(horizon, _EV_END, 0, 0)
    if config.faults_enabled:
        mean = config.fault_mean_delay
        for v in range(n):
            push(rng.exp_mean(mean), _EV_FAULT, v, 0)
    if rate > 0.0:
        push(rng.exp_rate(rate), _EV_INJECT, 0, 0)

    in_flight = 0
    choked = False

    def resolve(w: int, committed: bool, t: float) -> None:
        nonlocal choked
        while len(win_resolved) <= w:
            win_resolved.append(0)
            win_committed.append(0)
        win_resolved[w] += 1
        if committed:
            win_committed[w] += 1
        if win_resolved[w] == window:
            frac = win_committed[w] / window
            records.append(WindowRecord(t, frac, n - alive_count))
            if not choked and frac <= floor_frac:
                choked = True
                stats.choke_time = t
                stats.disabled_fraction_at_choke = (n - alive_count) / n

    def alloc_slot(node: int, idx: int, w: int, txn: int) -> int:
        nonlocal in_flight
        in_flight += 1
        if free_slots:
            s = free_slots.pop()
            slot_node[s] = node
            slot_index[s] = idx
            slot_window[s] = w
            slot_inflight[s] = True
            slot_next[s] = _NIL
            slot_prev[s] = _NIL
            slot_txn[s] = txn
            return s
        slot_node.append(node)
        slot_index.append(idx)
        slot_window.append(w)
        slot_gen.append(0)
        slot_inflight.append(True)
        slot_next.append(_NIL)
        slot_prev.append(_NIL)
        slot_txn.append(txn)
        return len(slot_node) - 1

    def free_slot(s: int) -> None:
        nonlocal in_flight
        in_flight -= 1
        slot_inflight[s] = False
        slot_gen[s] += 1
        free_slots.append(s)

    def host_append(v: int, s: int) -> None:
        tail = host_tail[v]
        slot_prev[s] = tail
        slot_next[s] = _NIL
        if tail == _NIL:
            host_head[v] = s
        else:
            slot_next[tail] = s
        host_tail[v] = s

    def host_remove(v: int, s: int) -> None:
        p, q = slot_prev[s], slot_next[s]
        if p == _NIL:
            host_head[v] = q
        else:
            slot_next[p] = q
        if q == _NIL:
            host_tail[v] = p
        else:
            slot_prev[q] = p
        slot_prev[s] = _NIL
        slot_next[s] = _NIL

    def kill(v: int, by_fault: bool, t: float) -> None:
        nonlocal alive_count, choked
        if check_invariants and not alive[v]:
            raise SimError(f"node {v} killed twice")
        alive[v] = False
        alive_count -= 1
        last = alive_list[alive_count]
        pos = alive_pos[v]
        alive_list[pos] = last
        alive_pos[last] = pos
        net.states[v] = (
            NodeState.DISABLED_FAULT if by_fault else NodeState.DISABLED_OVERLOAD
        )
        if by_fault:
            stats.nodes_disabled_fault += 1
        else:
            stats.nodes_disabled_overload += 1
        cur = host_head[v]
        while cur != _NIL:
            nxt = slot_next[cur]
            stats.aborted += 1
            stats.aborted_host_died += 1
            if collect_paths:
                outcomes[slot_txn[cur]] = "aborted"
            resolve(slot_window[cur], False, t)
            free_slot(cur)
            cur = nxt
        host_head[v] = _NIL
        host_tail[v] = _NIL
        if alive_count == 0 and stats.all_dead_time is None:
            stats.all_dead_time = t
            if not choked:
                choked = True
                stats.choke_time = t
                stats.disabled_fraction_at_choke = 1.0

    def start_subtxn(s: int, v: int, t: float) -> None:
        """Charge the slot's subtransaction at alive node v; may kill v."""
        xi[v] = xi[v] * math.exp(-(t - last_decay[v]) / decay_h)
        last_decay[v] = t
        xi[v] += costs[slot_index[s]]
        if collect_paths:
            paths.setdefault(slot_txn[s], []).append(v)
        if xi[v] >= capacity:
            kill(v, False, t)
        else:
            if check_invariants:
                assert xi[v] < capacity
            push(t + tau0, _EV_COMPLETE, s, slot_gen[s])

    while heap:
        t, _, kind, a, b = heapq.heappop(heap)
        if kind == _EV_END:
            break
        stats.events_processed += 1
        if kind == _EV_INJECT:
            ordinal = stats.injected
            stats.injected += 1
            w = ordinal // window
            src = alive_list[rng.bounded(alive_count)] if alive_count > 0 else _NIL
            push(t + rng.exp_rate(rate), _EV_INJECT, 0, 0)
            if src != _NIL:
                s = alloc_slot(src, 0, w, ordinal)
                host_append(src, s)
                start_subtxn(s, src, t)
            else:
                # no alive node can source the transaction
                stats.aborted += 1
                stats.aborted_host_died += 1
                if collect_paths:
                    outcomes[ordinal] = "aborted"
                resolve(w, False, t)
        elif kind == _EV_COMPLETE:
            s = a
            if slot_gen[s] != b:
                continue  # stale: the slot's transaction was aborted
            v = slot_node[s]
            if check_invariants:
                assert slot_inflight[s]
                assert alive[v], "completion at a disabled host"
            idx = slot_index[s]
            if idx + 1 == length:
                stats.committed += 1
                if collect_paths:
                    outcomes[slot_txn[s]] = "committed"
                resolve(slot_window[s], True, t)
                host_remove(v, s)
                free_slot(s)
            else:
                nxt = route_next(net, v, rng)
                if nxt is None:
                    stats.aborted += 1
                    stats.aborted_no_route += 1
                    if collect_paths:
                        outcomes[slot_txn[s]] = "aborted"
                    resolve(slot_window[s], False, t)
                    host_remove(v, s)
                    free_slot(s)
                else:
                    if check_invariants:
                        assert nxt != v, "routed back to the current host"
                    host_remove(v, s)
                    slot_node[s] = nxt
                    slot_index[s] = idx + 1
                    host_append(nxt, s)
                    start_subtxn(s, nxt, t)
        else:  # _EV_FAULT
            v = a
            if alive[v]:
                kill(v, True, t)

    stats.in_flight_at_end = in_flight
    if check_invariants:
        assert stats.injected == stats.committed + stats.aborted + in_flight
        assert stats.aborted == stats.aborted_no_route + stats.aborted_host_died
        for v in range(n):
            assert (not alive[v]) or xi[v] < capacity
    if collect_paths:
        stats.paths = paths
        stats.outcomes = outcomes
    return stats
