"""Random-graph substrate: undirected simple G(N, p) with per-node state."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

from .rng import Xoshiro256pp


class NodeState(IntEnum):
    ALIVE = 0
    DISABLED_OVERLOAD = 1
    DISABLED_FAULT = 2


@dataclass
class Network:
    """Adjacency in CSR form plus per-node liveness.

    `neighbors[offsets[v]:offsets[v+1]]` lists v's neighbors in insertion
    order; the order is part of the deterministic routing contract.
    """

    n_nodes: int
    offsets: list[int]
    neighbors: list[int]
    states: list[NodeState]

    def degree(self, v: int) -> int:
        return self.offsets[v + 1] - self.offsets[v]

    def neighbors_of(self, v: int) -> list[int]:
        return self.neighbors[self.offsets[v] : self.offsets[v + 1]]

    def alive(self, v: int) -> bool:
        return self.states[v] == NodeState.ALIVE

    @property
    def edge_count(self) -> int:
        return len(self.neighbors) // 2


def sample_edges(n: int, p: float, rng: Xoshiro256pp) -> list[tuple[int, int]]:
    """Edges of G(n, p) via geometric skipping, one uniform draw per edge+gap.

    Enumerates the pairs (v, w), w < v, in lexicographic order and jumps
    between successive edges with Geometric(p) strides, so the cost is
    proportional to the number of edges rather than pairs.
    """
    edges: list[tuple[int, int]] = []
    if p <= 0.0 or n < 2:
        return edges
    if p >= 1.0:
        for v in range(1, n):
            for w in range(v):
                edges.append((v, w))
        return edges
    log_q = math.log1p(-p)
    v, w = 1, -1
    while v < n:
        u = rng.open01()
        w += 1 + int(math.floor(math.log(u) / log_q))
        while w >= v and v < n:
            w -= v
            v += 1
        if v < n:
            edges.append((v, w))
    return edges


def build_csr(n: int, edges: list[tuple[int, int]]) -> tuple[list[int], list[int]]:
    """CSR arrays from an edge list; slot order follows edge insertion order."""
    deg = [0] * n
    for v, w in edges:
        deg[v] += 1
        deg[w] += 1
    offsets = [0] * (n + 1)
    for i in range(n):
        offsets[i + 1] = offsets[i] + deg[i]
    cursor = offsets[:-1].copy()
    neighbors = [0] * (2 * len(edges))
    for v, w in edges:
        neighbors[cursor[v]] = w
        cursor[v] += 1
        neighbors[cursor[w]] = v
        cursor[w] += 1
    return offsets, neighbors


def generate_network(n_nodes: int, density: float, rng: Xoshiro256pp) -> Network:
    """Fresh all-alive G(N, p=density); isolated nodes are legal."""
    edges = sample_edges(n_nodes, density, rng)
    offsets, neighbors = build_csr(n_nodes, edges)
    return Network(
        n_nodes=n_nodes,
        offsets=offsets,
        neighbors=neighbors,
        states=[NodeState.ALIVE] * n_nodes,
    )
