"""Finite weighted graphs: construction, validation and integration.

Vertices are dense 0-based indices. Edges are stored once, canonically as
``(i, j)`` with ``i < j``; the weight matrix is symmetric by construction.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    Disconnected,
    DuplicateEdge,
    IndexOutOfRange,
    InvalidP,
    LengthMismatch,
    NonPositiveMeasure,
    NonPositiveWeight,
    SelfLoop,
    TooFewVertices,
)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Validated connected simple graph with vertex measure ``mu``.

    Build instances with :func:`build_graph`; the constructor itself does
    not validate.
    """

    n: int
    mu: np.ndarray
    edges: np.ndarray  # (m, 2) int, rows (i, j) with i < j
    weights: np.ndarray  # (m,) float
    labels: tuple[str, ...] | None = field(default=None)

    @cached_property
    def weight_matrix(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        i, j = self.edges[:, 0], self.edges[:, 1]
        W[i, j] = self.weights
        W[j, i] = self.weights
        return _frozen(W)

    @cached_property
    def degree(self) -> np.ndarray:
        """Weighted degree ``sum_y w_xy``."""
        return _frozen(self.weight_matrix.sum(axis=1))

    @property
    def volume(self) -> float:
        """|V| = sum of the vertex measure."""
        return float(self.mu.sum())

    @property
    def mu_min(self) -> float:
        return float(self.mu.min())

    def neighbors(self, x: int) -> np.ndarray:
        return np.flatnonzero(self.weight_matrix[x])

    def edge_list(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(w)) for (i, j), w in zip(self.edges, self.weights)]


def _bfs_connected(n: int, adjacency: list[list[int]]) -> bool:
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        x = queue.popleft()
        for y in adjacency[x]:
            if not seen[y]:
                seen[y] = True
                count += 1
                queue.append(y)
    return count == n


def build_graph(
    n: int,
    mu: Sequence[float] | np.ndarray,
    edges: Iterable[tuple[int, int, float]],
    labels: Sequence[str] | None = None,
) -> Graph:
    """Validate inputs and return an immutable :class:`Graph`.

    Raises the matching :class:`~fracmfe.errors.GraphError` subclass for a
    vertex count below 2, non-positive measure or weight, self-loops,
    duplicate edges, out-of-range indices, or a disconnected graph.
    ``edge_index`` on the raised error identifies the offending edge.
    """
    n = int(n)
    if n < 2:
        raise TooFewVertices(f"need at least 2 vertices, got {n}")
    mu = np.asarray(mu, dtype=float).copy()
    if mu.shape != (n,):
        raise LengthMismatch(f"mu has {mu.size} entries, expected {n}")
    bad = np.flatnonzero(~(mu > 0) | ~np.isfinite(mu))
    if bad.size:
        x = int(bad[0])
        raise NonPositiveMeasure(f"mu[{x}] = {mu[x]!r} is not positive", vertex=x)

    seen: set[tuple[int, int]] = set()
    rows: list[tuple[int, int]] = []
    ws: list[float] = []
    adjacency: list[list[int]] = [[] for _ in range(n)]
    for k, (i, j, w) in enumerate(edges):
        i, j, w = int(i), int(j), float(w)
        if not (0 <= i < n and 0 <= j < n):
            raise IndexOutOfRange(f"edge {k} ({i}, {j}) out of range for n={n}", edge_index=k)
        if i == j:
            raise SelfLoop(f"edge {k} is a self-loop at vertex {i}", edge_index=k)
        if not (w > 0 and np.isfinite(w)):
            raise NonPositiveWeight(f"edge {k} ({i}, {j}) has weight {w!r}", edge_index=k)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateEdge(f"edge {k} duplicates ({key[0]}, {key[1]})", edge_index=k)
        seen.add(key)
        rows.append(key)
        ws.append(w)
        adjacency[i].append(j)
        adjacency[j].append(i)

    if not _bfs_connected(n, adjacency):
        raise Disconnected("graph is not connected")

    if labels is not None:
        labels = tuple(str(s) for s in labels)
        if len(labels) != n:
            raise LengthMismatch(f"{len(labels)} labels for {n} vertices")

    edge_arr = np.array(rows, dtype=np.int64).reshape(-1, 2)
    return Graph(
        n=n,
        mu=_frozen(mu),
        edges=_frozen(edge_arr),
        weights=_frozen(np.array(ws, dtype=float)),
        labels=labels,
    )


def as_function(g: Graph, f) -> np.ndarray:
    """Coerce ``f`` to a float vector on ``g`` (scalars broadcast)."""
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        return np.full(g.n, float(arr))
    if arr.shape != (g.n,):
        raise LengthMismatch(f"function has shape {arr.shape}, graph has {g.n} vertices")
    return arr


def integrate(g: Graph, f) -> float:
    """Return the integral ``sum_x mu(x) f(x)``."""
    return float(g.mu @ as_function(g, f))


def mean(g: Graph, f) -> float:
    """mu-weighted average of ``f``."""
    return integrate(g, f) / g.volume


def lp_norm(g: Graph, f, p: float = 2.0) -> float:
    """The mu-weighted l^p norm; ``p = inf`` gives ``max |f|``."""
    f = as_function(g, f)
    p = float(p)
    if np.isnan(p) or p < 1:
        raise InvalidP(f"p must be >= 1 or inf, got {p}")
    if np.isinf(p):
        return float(np.max(np.abs(f)))
    if p == 2.0:
        return float(np.sqrt(g.mu @ (f * f)))
    return float((g.mu @ np.abs(f) ** p) ** (1.0 / p))


# ---------------------------------------------------------------------------
# test-family generators

def path_graph(n: int, mu=1.0, w=1.0) -> Graph:
    return build_graph(n, np.broadcast_to(mu, (n,)), [(k, k + 1, w) for k in range(n - 1)])


def cycle_graph(n: int, mu=1.0, w=1.0) -> Graph:
    if n < 3:
        raise TooFewVertices(f"cycle needs n >= 3, got {n}")
    return build_graph(n, np.broadcast_to(mu, (n,)), [(k, (k + 1) % n, w) for k in range(n)])


def complete_graph(n: int, mu=1.0, w=1.0) -> Graph:
    edges = [(i, j, w) for i in range(n) for j in range(i + 1, n)]
    return build_graph(n, np.broadcast_to(mu, (n,)), edges)


def star_graph(leaves: int, mu=1.0, w=1.0) -> Graph:
    """K_{1,leaves} with the hub at vertex 0."""
    n = leaves + 1
    return build_graph(n, np.broadcast_to(mu, (n,)), [(0, k, w) for k in range(1, n)])


def random_connected_graph(
    n: int,
    rng: np.random.Generator,
    mu_range: tuple[float, float] = (0.5, 2.0),
    w_range: tuple[float, float] = (0.5, 2.0),
    p_extra: float = 0.3,
) -> Graph:
    """Random spanning tree plus independent extra edges with probability ``p_extra``."""
    mu = rng.uniform(*mu_range, size=n)
    order = rng.permutation(n)
    pairs = set()
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(0, k)])
        pairs.add((min(a, b), max(a, b)))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in pairs and rng.random() < p_extra:
                pairs.add((i, j))
    edges = [(i, j, float(rng.uniform(*w_range))) for i, j in sorted(pairs)]
    return build_graph(n, mu, edges)
