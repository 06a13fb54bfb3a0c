"""Communication graphs and structural checks.

Graphs are undirected, simple and connected.  The stock experiment topology
is two 10-cliques joined by two randomly chosen bridge edges; rings,
complete graphs and connected Erdos-Renyi samples are available for smaller
studies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class GenerationFailed(Exception):
    """Random graph generation exhausted its retry budget."""


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[tuple[int, int], ...]
    neighbors: tuple[tuple[int, ...], ...]

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        if n < 1:
            raise ValueError("graph needs at least one node")
        norm = set()
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) out of range for n={n}")
            norm.add((min(u, v), max(u, v)))
        adj: list[list[int]] = [[] for _ in range(n)]
        for u, v in norm:
            adj[u].append(v)
            adj[v].append(u)
        g = cls(
            n=n,
            edges=tuple(sorted(norm)),
            neighbors=tuple(tuple(sorted(a)) for a in adj),
        )
        if not g.is_connected():
            raise ValueError("graph is not connected")
        return g

    def is_connected(self) -> bool:
        return _component_connected(self.neighbors, set(range(self.n)))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def max_degree(self) -> int:
        return max(len(a) for a in self.neighbors)

    def directed_edges(self) -> list[tuple[int, int]]:
        """All ordered (sender, receiver) pairs."""
        out = []
        for u, v in self.edges:
            out.append((u, v))
            out.append((v, u))
        out.sort()
        return out

    def to_edge_list(self) -> str:
        lines = [str(self.n)]
        lines.extend(f"{u} {v}" for u, v in self.edges)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text: str) -> "Graph":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty edge-list document")
        n = int(lines[0])
        edges = []
        for ln in lines[1:]:
            u, v = ln.split()
            edges.append((int(u), int(v)))
        return cls.from_edges(n, edges)


def _component_connected(neighbors: Sequence[Sequence[int]], nodes: set[int]) -> bool:
    if not nodes:
        return True
    start = next(iter(nodes))
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for w in neighbors[u]:
                if w in nodes and w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    return len(seen) == len(nodes)


def check_source_component(graph: Graph, byzantine: Iterable[int]) -> bool:
    """True iff removing all edges incident on ``byzantine`` leaves the
    remaining nodes connected."""
    bad = set(byzantine)
    honest = set(range(graph.n)) - bad
    masked = tuple(
        tuple(w for w in graph.neighbors[u] if w not in bad) if u not in bad else ()
        for u in range(graph.n)
    )
    return _component_connected(masked, honest)


def two_clique_bridge(rng: np.random.Generator) -> Graph:
    """Two 10-cliques joined by 2 distinct bridge edges chosen uniformly
    at random (without replacement) over the 100 cross pairs."""
    edges = []
    for base in (0, 10):
        for i in range(base, base + 10):
            for j in range(i + 1, base + 10):
                edges.append((i, j))
    picks = rng.choice(100, size=2, replace=False)
    for p in picks:
        edges.append((int(p) // 10, 10 + int(p) % 10))
    return Graph.from_edges(20, edges)


def ring(n: int) -> Graph:
    if n < 3:
        raise ValueError("ring needs n >= 3")
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete(n: int) -> Graph:
    if n < 2:
        raise ValueError("complete graph needs n >= 2")
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def erdos_renyi(n: int, p: float, rng: np.random.Generator, max_tries: int = 200) -> Graph:
    if not 0.0 <= p <= 1.0:
        raise ValueError("edge probability must lie in [0, 1]")
    for _ in range(max_tries):
        edges = [
            (i, j)
            for i in range(n)
            for j in range(i + 1, n)
            if rng.random() < p
        ]
        try:
            return Graph.from_edges(n, edges)
        except ValueError:
            continue
    raise GenerationFailed(f"no connected sample in {max_tries} tries (n={n}, p={p})")


def make_graph(spec: dict, rng: np.random.Generator) -> Graph:
    """Build a graph from a declarative spec, e.g. ``{"kind": "ring", "n": 5}``."""
    kind = spec.get("kind")
    if kind == "two_clique_bridge":
        return two_clique_bridge(rng)
    if kind == "ring":
        return ring(int(spec["n"]))
    if kind == "complete":
        return complete(int(spec["n"]))
    if kind == "erdos_renyi":
        return erdos_renyi(int(spec["n"]), float(spec["p"]), rng)
    raise ValueError(f"unknown graph kind: {kind!r}")
