"""Laplacian random walk, its alpha-power variant, and the complete-graph laws.

The Laplacian walk from b to e grows a simple path gamma.  At every step it
solves the Dirichlet problem f = 0 on gamma, f(e) = 1, f harmonic elsewhere,
and moves to a neighbour w of the tip with probability proportional to
f(w)**alpha.  alpha = 1 gives loop-erased random walk in law.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import cg

from lerwtorus import _kernels
from lerwtorus.graphs import CompleteGraph, FiniteGraph, TorusGraph
from lerwtorus.walker import as_generator

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class DirichletField:
    values: np.ndarray
    zero_set: frozenset
    one_vertex: int
    residual: float

    def __getitem__(self, v) -> float:
        return float(self.values[v])


def _check_alpha(alpha) -> float:
    alpha = float(alpha)
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ValueError(f"alpha must be positive and finite, got {alpha}")
    return alpha


def _adjacency(graph) -> sp.csr_matrix:
    indptr, indices = graph.csr()
    n = graph.num_vertices
    return sp.csr_matrix((np.ones(len(indices)), indices, indptr), shape=(n, n))


class DirichletSolver:
    """Reusable solver for one graph; keeps the adjacency matrix around."""

    def __init__(self, graph):
        self.graph = graph
        self.adj = _adjacency(graph)
        self.degree = np.asarray(self.adj.sum(axis=1)).ravel()
        if np.any(self.degree == 0):
            raise ValueError("degenerate graph: isolated vertex")

    def solve(self, zero_set, one_vertex: int, tol: float = DEFAULT_TOL,
              x0: np.ndarray | None = None) -> DirichletField:
        n = self.graph.num_vertices
        zero_set = frozenset(int(v) for v in zero_set)
        if not zero_set:
            raise ValueError("zero set must be nonempty")
        if one_vertex in zero_set:
            raise ValueError("the one-vertex cannot be in the zero set")
        if tol <= 0:
            raise ValueError("tolerance must be positive")
        fixed = np.zeros(n, bool)
        fixed[list(zero_set)] = True
        fixed[one_vertex] = True
        free = np.flatnonzero(~fixed)
        values = np.zeros(n)
        values[one_vertex] = 1.0
        if free.size:
            # free vertices cut off from the target by the zero set stay at 0
            keep = ~fixed
            keep[one_vertex] = True
            sub = self.adj[keep][:, keep]
            _, label = connected_components(sub, directed=False)
            kept = np.flatnonzero(keep)
            target_label = label[np.searchsorted(kept, one_vertex)]
            live = kept[(label == target_label) & (kept != one_vertex)]
            if live.size:
                values[live] = self._solve_block(live, one_vertex, tol, x0)
        residual = self.defect(values, free)
        if residual > tol:
            raise RuntimeError(f"Dirichlet solve stalled with defect {residual:.3e} > {tol:.1e}")
        if values.min() < -tol or values.max() > 1 + tol:
            raise RuntimeError("maximum principle violated beyond tolerance")
        np.clip(values, 0.0, 1.0, out=values)
        values[list(zero_set)] = 0.0
        values[one_vertex] = 1.0
        return DirichletField(values, zero_set, int(one_vertex), residual)

    def _solve_block(self, live, one_vertex, tol, x0):
        a = self.adj[live][:, live]
        deg = self.degree[live]
        m = sp.diags(deg) - a
        rhs = np.asarray(self.adj[live][:, [one_vertex]].todense()).ravel()
        start = None if x0 is None else np.asarray(x0, float)[live]
        precond = sp.diags(1.0 / deg)
        rtol = min(tol, DEFAULT_TOL)
        x = start
        for _ in range(6):
            x, info = cg(m, rhs, x0=x, rtol=rtol, atol=0.0, M=precond, maxiter=20 * len(live) + 100)
            defect = np.abs((m @ x - rhs) / deg).max()
            if defect <= tol / 2:
                break
            rtol /= 100
        return x

    def defect(self, values: np.ndarray, free: np.ndarray) -> float:
        """Largest |f(v) - mean of f over neighbours of v| over free vertices."""
        if free.size == 0:
            return 0.0
        avg = (self.adj[free] @ values) / self.degree[free]
        return float(np.abs(values[free] - avg).max())


def dirichlet_solve(graph, zero_set, one_vertex: int, tol: float = DEFAULT_TOL) -> DirichletField:
    """Solve f = 0 on ``zero_set``, f(one_vertex) = 1, f harmonic elsewhere."""
    return DirichletSolver(graph).solve(zero_set, one_vertex, tol)


def transition_probabilities(field: DirichletField, graph, current: int, alpha: float = 1.0):
    """Neighbours of ``current`` and their step probabilities f(w)**alpha / sum."""
    alpha = _check_alpha(alpha)
    nbrs = list(graph.neighbors(current))
    weights = field.values[nbrs] ** alpha
    total = weights.sum()
    if not total > 0:
        raise ValueError(f"every neighbour of {current} has zero weight; the walk is trapped")
    return nbrs, weights / total


def laplacian_step(field: DirichletField, graph, current: int, alpha: float, rng) -> int:
    nbrs, probs = transition_probabilities(field, graph, current, alpha)
    u = as_generator(rng).random()
    k = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return nbrs[min(k, len(nbrs) - 1)]


def laplacian_walk(graph, b: int, e: int, alpha: float = 1.0, tol: float = DEFAULT_TOL,
                   rng=None, solver: DirichletSolver | None = None,
                   cache: dict | None = None) -> tuple[int, ...]:
    """Sample one alpha-power Laplacian walk path from b to e.

    ``cache`` may map frozenset(path) -> field values across calls on the same
    graph and target; the field only depends on the zero set, so reusing it
    leaves the law unchanged.
    """
    if b == e:
        raise ValueError("laplacian_walk needs b != e")
    alpha = _check_alpha(alpha)
    rng = as_generator(rng if rng is not None else 0)
    solver = solver or DirichletSolver(graph)
    path = [int(b)]
    on_path = {int(b)}
    field = None
    while True:
        key = frozenset(on_path)
        if cache is not None and key in cache:
            field = cache[key]
        else:
            field = solver.solve(on_path, e, tol, x0=None if field is None else field.values)
            if cache is not None:
                cache[key] = field
        nxt = laplacian_step(field, graph, path[-1], alpha, rng)
        path.append(nxt)
        if nxt == e:
            return tuple(path)
        on_path.add(nxt)


class LaplacianWalkSampler:
    """Repeated Laplacian walks from b to e on one small graph.

    Transition tables are memoized per partial path, so after warm-up a
    sample costs one uniform and one table lookup per step.  Uniforms are
    consumed exactly as in :func:`laplacian_walk`: the same generator state
    gives the same paths.
    """

    def __init__(self, graph, b: int, e: int, alpha: float = 1.0, tol: float = DEFAULT_TOL):
        if b == e:
            raise ValueError("laplacian walk needs b != e")
        self.graph, self.b, self.e = graph, int(b), int(e)
        self.alpha = _check_alpha(alpha)
        self.tol = tol
        self._solver = DirichletSolver(graph)
        self._fields: dict[frozenset, DirichletField] = {}
        self._tables: dict[tuple, tuple[list[int], list[float]]] = {}

    def _table(self, path: tuple) -> tuple[list[int], list[float]]:
        table = self._tables.get(path)
        if table is None:
            key = frozenset(path)
            field = self._fields.get(key)
            if field is None:
                field = self._fields[key] = self._solver.solve(key, self.e, self.tol)
            nbrs, probs = transition_probabilities(field, self.graph, path[-1], self.alpha)
            table = self._tables[path] = (nbrs, np.cumsum(probs).tolist())
        return table

    def sample(self, rng) -> tuple[int, ...]:
        rng = as_generator(rng)
        path = (self.b,)
        while path[-1] != self.e:
            nbrs, cum = self._table(path)
            k = bisect.bisect_right(cum, rng.random())
            path += (nbrs[min(k, len(nbrs) - 1)],)
        return path

    def counts(self, samples: int, rng) -> dict[tuple, int]:
        rng = as_generator(rng)
        out: dict[tuple, int] = {}
        for _ in range(samples):
            p = self.sample(rng)
            out[p] = out.get(p, 0) + 1
        return out


def complete_graph_pmf(n: int) -> np.ndarray:
    """P(#LE = k) = (k-1)/n * prod_{i=1}^{k-2} (1 - i/n), for k = 2..n+1.

    Returned as an array ``p`` of length n+2 with ``p[k]`` the mass at k.

    The formula is exact for the loop-erasure of a walk on K_n that enters
    from an extra root vertex joined to every vertex of K_n and never
    revisited, the root counted as the first vertex.  Equivalently: b fixed,
    e uniform on all n vertices (e = b allowed), and the length is #LE + 1.
    For b and e distinct vertices of K_n see :func:`complete_graph_exact_pmf`.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(2, n + 2)
    log_surv = np.concatenate([[0.0], np.cumsum(np.log1p(-np.arange(1, n) / n))])
    p = np.zeros(n + 2)
    with np.errstate(divide="ignore"):
        p[2:] = np.exp(np.log((k - 1) / n) + log_surv[: len(k)])
    return p


def complete_graph_exact_pmf(n: int) -> np.ndarray:
    """Law of #LE for LERW between two distinct vertices of K_n.

    P(#LE = k) = k/n * prod_{j=2}^{k-1} (1 - j/n), k = 2..n; array indexed by k.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    k = np.arange(2, n + 1)
    log_surv = np.concatenate([[0.0], np.cumsum(np.log1p(-np.arange(2, n) / n))])
    p = np.zeros(n + 1)
    p[2:] = np.exp(np.log(k / n) + log_surv[: len(k)])
    return p


def complete_graph_limit_cdf(t):
    """CDF of the density t exp(-t^2/2): the limit law of #LE / sqrt(n)."""
    t = np.asarray(t, float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    out = -np.expm1(-0.5 * t * t)
    return float(out) if out.ndim == 0 else out


LIMIT_MEAN = math.sqrt(math.pi / 2)


def complete_graph_alpha_length(n: int, alpha: float, rng, rooted: bool = True) -> int:
    """One alpha-walk path length on K_n, sampled from the stopping hazard.

    With ``rooted`` (the default) the walk enters K_n from an extra root, the
    convention under which alpha = 1 reproduces :func:`complete_graph_pmf`
    exactly.  ``rooted=False`` starts at a vertex of K_n.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    return int(_kernels.alpha_length(as_generator(rng), int(n), _check_alpha(alpha), bool(rooted)))


def sample_alpha_lengths(n: int, alpha: float, count: int, rng, rooted: bool = True) -> np.ndarray:
    rng = as_generator(rng)
    alpha = _check_alpha(alpha)
    return np.array([_kernels.alpha_length(rng, int(n), alpha, bool(rooted)) for _ in range(count)])


__all__ = [
    "CompleteGraph", "DirichletField", "DirichletSolver", "FiniteGraph", "LIMIT_MEAN",
    "LaplacianWalkSampler", "TorusGraph",
    "complete_graph_alpha_length", "complete_graph_exact_pmf", "complete_graph_limit_cdf",
    "complete_graph_pmf", "dirichlet_solve", "laplacian_step", "laplacian_walk",
    "sample_alpha_lengths", "transition_probabilities",
]
