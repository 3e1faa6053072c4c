"""Finite graphs the walkers and the Laplacian solver run on.

Three flavours share a small duck-typed surface (``num_vertices``,
``neighbors``, ``step_from``, ``adjacent``):

* :class:`FiniteGraph` - explicit adjacency lists, for small graphs.
* :class:`CompleteGraph` - K_n, never materialised.
* :class:`TorusGraph` - T_N^d addressed by encoded vertex index.

``step_from(v, u)`` maps a uniform ``u`` in [0, 1) to a uniformly chosen
neighbour of ``v``.  Every sampler in the package goes through this rule (or
a jitted copy of it), which keeps Python and compiled walks bit-identical.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from lerwtorus.lattice import TorusParams, decode, encode, neighbors as torus_neighbors


class FiniteGraph:
    """Undirected simple graph on vertices 0..n-1 given by adjacency lists."""

    def __init__(self, adjacency: Sequence[Iterable[int]]):
        adj = tuple(tuple(sorted(set(int(u) for u in nbrs))) for nbrs in adjacency)
        n = len(adj)
        if n < 2:
            raise ValueError("graph needs at least two vertices")
        for v, nbrs in enumerate(adj):
            for u in nbrs:
                if not 0 <= u < n:
                    raise ValueError(f"edge {v}-{u} leaves the vertex range")
                if u == v:
                    raise ValueError(f"self-loop at vertex {v}")
                if v not in adj[u]:
                    raise ValueError(f"edge {v}-{u} is not symmetric")
        self.adjacency = adj
        if not self.is_connected():
            raise ValueError("graph is not connected")
        self._indptr = np.cumsum([0] + [len(a) for a in adj]).astype(np.int64)
        self._indices = np.array([u for a in adj for u in a], dtype=np.int64)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]], n: int | None = None) -> "FiniteGraph":
        edges = [(int(a), int(b)) for a, b in edges]
        if n is None:
            n = 1 + max(max(e) for e in edges)
        adj = [set() for _ in range(n)]
        for a, b in edges:
            adj[a].add(b)
            adj[b].add(a)
        return cls(adj)

    @classmethod
    def from_edgelist(cls, path: str | Path) -> "FiniteGraph":
        """Read ``u v`` pairs, one per line, 0-based.  ``#`` starts a comment."""
        edges = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v', got {line!r}")
            edges.append((int(parts[0]), int(parts[1])))
        if not edges:
            raise ValueError(f"{path}: no edges")
        return cls.from_edges(edges)

    @classmethod
    def path(cls, n: int) -> "FiniteGraph":
        return cls.from_edges([(i, i + 1) for i in range(n - 1)], n)

    @classmethod
    def cycle(cls, n: int) -> "FiniteGraph":
        return cls.from_edges([(i, (i + 1) % n) for i in range(n)], n)

    @classmethod
    def complete(cls, n: int) -> "FiniteGraph":
        return cls([[u for u in range(n) if u != v] for v in range(n)])

    @property
    def num_vertices(self) -> int:
        return len(self.adjacency)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def adjacent(self, v: int, w: int) -> bool:
        return w in self.adjacency[v]

    def step_from(self, v: int, u: float) -> int:
        nbrs = self.adjacency[v]
        return nbrs[int(u * len(nbrs))]

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        return self._indptr, self._indices

    def is_connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for u in self.adjacency[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return len(seen) == len(self.adjacency)

    def edges(self) -> list[tuple[int, int]]:
        return [(v, u) for v, nbrs in enumerate(self.adjacency) for u in nbrs if v < u]


class CompleteGraph:
    """K_n without storing edges.  A step picks uniformly among the n-1 other vertices."""

    def __init__(self, n: int):
        if n < 2:
            raise ValueError("complete graph needs n >= 2")
        self.n = int(n)

    @property
    def num_vertices(self) -> int:
        return self.n

    def neighbors(self, v: int) -> list[int]:
        return [u for u in range(self.n) if u != v]

    def degree(self, v: int) -> int:
        return self.n - 1

    def adjacent(self, v: int, w: int) -> bool:
        return v != w

    def step_from(self, v: int, u: float) -> int:
        j = int(u * (self.n - 1))
        return j + 1 if j >= v else j

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.n
        indptr = np.arange(0, n * (n - 1) + 1, n - 1, dtype=np.int64)
        grid = np.tile(np.arange(n - 1, dtype=np.int64), n).reshape(n, n - 1)
        grid += grid >= np.arange(n)[:, None]
        return indptr, grid.ravel()


class TorusGraph:
    """T_N^d with vertices addressed by their row-major encoded index."""

    def __init__(self, params: TorusParams):
        self.params = params

    @property
    def num_vertices(self) -> int:
        return self.params.volume

    def neighbors(self, v: int) -> list[int]:
        p = decode(v, self.params)
        return [encode(q, self.params) for q in torus_neighbors(p, self.params)]

    def degree(self, v: int) -> int:
        return 2 * self.params.dim

    def adjacent(self, v: int, w: int) -> bool:
        return w in self.neighbors(v)

    def step_from(self, v: int, u: float) -> int:
        return self.neighbors(v)[int(u * 2 * self.params.dim)]

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        n, d = self.params.side, self.params.dim
        idx = np.arange(self.params.volume, dtype=np.int64)
        cols = []
        for k, stride in enumerate(self.params.strides):
            coord = (idx // stride) % n
            for delta in (1, -1):
                cols.append(idx + (((coord + delta) % n) - coord) * stride)
        indices = np.stack(cols, axis=1).ravel()
        indptr = np.arange(0, 2 * d * self.params.volume + 1, 2 * d, dtype=np.int64)
        return indptr, indices
