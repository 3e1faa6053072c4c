"""Exact ground truth on tiny graphs.

:func:`exact_lerw_distribution` expands the alpha = 1 Laplacian walk over
every simple path from b to e, solving each Dirichlet problem by exact
elimination.  Graphs with at most ``RATIONAL_LIMIT`` vertices use
:class:`fractions.Fraction`; larger ones use 128-bit mpmath floats.
"""

from __future__ import annotations

import logging
from collections import Counter
from fractions import Fraction
from typing import IO, Iterable, Mapping

import mpmath
import numpy as np

from lerwtorus import _kernels
from lerwtorus.graphs import CompleteGraph, FiniteGraph
from lerwtorus.laplacian import complete_graph_pmf
from lerwtorus.walker import as_generator

log = logging.getLogger(__name__)

RATIONAL_LIMIT = 12
MPF_PREC = 128
DEFAULT_PATH_CAP = 10**5


class PathDistribution(dict):
    """Mapping from a simple path (tuple of vertices) to its probability.

    Empirical distributions keep their raw tallies in ``counts``.
    """

    counts: Counter | None = None

    def total(self):
        return sum(self.values())

    def check_normalized(self, tol: float = 1e-10) -> None:
        if any(p < 0 for p in self.values()):
            raise ValueError("negative probability")
        if abs(float(self.total()) - 1.0) > tol:
            raise ValueError(f"probabilities sum to {float(self.total())!r}, not 1")

    def as_float(self) -> dict[tuple, float]:
        return {path: float(p) for path, p in self.items()}

    def length_marginal(self) -> dict[int, object]:
        out: dict[int, object] = {}
        for path, p in self.items():
            out[len(path)] = out.get(len(path), 0) + p
        return out

    def dump(self, fh: IO[str]) -> None:
        """Text table, one ``probability<TAB>v0 v1 ...`` line per path, most likely first."""
        for path, p in sorted(self.items(), key=lambda kv: (-float(kv[1]), kv[0])):
            fh.write(f"{float(p):.17g}\t{' '.join(map(str, path))}\n")


def _eliminate(matrix: list[list], rhs: list) -> list:
    """Gaussian elimination over an exact (or high precision) field."""
    n = len(rhs)
    a = [row[:] + [b] for row, b in zip(matrix, rhs)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(a[r][col]))
        if a[pivot][col] == 0:
            raise ZeroDivisionError("singular Dirichlet system")
        a[col], a[pivot] = a[pivot], a[col]
        piv = a[col][col]
        for r in range(col + 1, n):
            factor = a[r][col] / piv
            if factor:
                for c in range(col, n + 1):
                    a[r][c] -= factor * a[col][c]
    x = [0] * n
    for r in range(n - 1, -1, -1):
        acc = a[r][n] - sum(a[r][c] * x[c] for c in range(r + 1, n))
        x[r] = acc / a[r][r]
    return x


def _exact_field(graph: FiniteGraph, zero_set: frozenset, e: int, one) -> dict[int, object]:
    """Harmonic values on the vertices joined to e off the zero set."""
    live, stack = {e}, [e]
    while stack:
        v = stack.pop()
        for u in graph.neighbors(v):
            if u not in live and u not in zero_set:
                live.add(u)
                stack.append(u)
    free = sorted(live - {e})
    pos = {v: i for i, v in enumerate(free)}
    zero = one - one
    matrix = [[zero] * len(free) for _ in free]
    rhs = [zero] * len(free)
    for v in free:
        i = pos[v]
        matrix[i][i] = one * graph.degree(v)
        for u in graph.neighbors(v):
            if u == e:
                rhs[i] += one
            elif u in pos:
                matrix[i][pos[u]] -= one
    values = dict(zip(free, _eliminate(matrix, rhs))) if free else {}
    values[e] = one
    return values


def _as_small_graph(graph) -> FiniteGraph:
    if isinstance(graph, CompleteGraph):
        return FiniteGraph.complete(graph.n)
    if not isinstance(graph, FiniteGraph):
        raise TypeError("the exact oracle needs an explicit FiniteGraph or CompleteGraph")
    return graph


def exact_lerw_distribution(graph, b: int, e: int, cap: int = DEFAULT_PATH_CAP) -> PathDistribution:
    """Exact law of LE(random walk from b stopped at e) as a PathDistribution."""
    graph = _as_small_graph(graph)
    if b == e:
        raise ValueError("b and e must differ")
    if graph.num_vertices <= RATIONAL_LIMIT:
        one = Fraction(1)
    else:
        log.info("graph has %d > %d vertices; switching to %d-bit floats",
                 graph.num_vertices, RATIONAL_LIMIT, MPF_PREC)
        mpmath.mp.prec = MPF_PREC
        one = mpmath.mpf(1)
    fields: dict[frozenset, dict] = {}
    dist = PathDistribution()
    stack = [((b,), one)]
    while stack:
        path, prob = stack.pop()
        zero_set = frozenset(path)
        values = fields.get(zero_set)
        if values is None:
            values = fields[zero_set] = _exact_field(graph, zero_set, e, one)
        nbrs = [(w, values.get(w, 0)) for w in graph.neighbors(path[-1])]
        total = sum(f for _, f in nbrs)
        for w, f in nbrs:
            if not f:
                continue
            q = prob * f / total
            if w == e:
                dist[path + (w,)] = q
                if len(dist) > cap:
                    raise OverflowError(f"more than {cap} simple paths from {b} to {e} "
                                        f"(reached {len(dist)})")
            else:
                stack.append((path + (w,), q))
    dist.check_normalized()
    return dist


def mc_lerw_distribution(graph, b: int, e: int, samples: int, seed) -> PathDistribution:
    """Empirical law of LE(walk from b stopped at e) over ``samples`` walks."""
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = as_generator(seed)
    indptr, indices = graph.csr()
    rows = _kernels.lerw_graph_batch(rng, indptr, indices, int(b), int(e), int(samples))
    counts: Counter = Counter()
    base = rows.shape[1] + 1
    if base ** rows.shape[1] < 2**62:
        # pack each padded row into one integer key; much faster than unique over rows
        keys = (rows + 1) @ (base ** np.arange(rows.shape[1], dtype=np.int64))
        uniq, first, tallies = np.unique(keys, return_index=True, return_counts=True)
        uniq_rows = rows[first]
    else:
        uniq_rows, tallies = np.unique(rows, axis=0, return_counts=True)
    for row, c in zip(uniq_rows.tolist(), tallies.tolist()):
        counts[tuple(v for v in row if v >= 0)] = c
    dist = PathDistribution({p: c / samples for p, c in counts.items()})
    dist.counts = counts
    return dist


def reference_loop_erase(gamma, origin: int = 0) -> tuple:
    """Quadratic transcription of the last-occurrence recursion (test oracle).

    ``gamma`` is a sequence indexed from time -origin.
    """
    verts = list(gamma.vertices if hasattr(gamma, "vertices") else gamma)
    if not verts:
        raise ValueError("path must be nonempty")
    n = len(verts) - 1
    out = [verts[0]]
    while True:
        j = max(k for k in range(n + 1) if verts[k] == out[-1])
        if j == n:
            return tuple(out)
        out.append(verts[j + 1])


def complete_graph_convention_check(n_values: Iterable[int] = range(2, 9)) -> dict:
    """Compare exact K_n length marginals with the closed formula.

    Candidates, for K_n with n vertices:

    * ``distinct``: b != e fixed, k = #LE, formula at N = n.
    * ``non_target``: same law, formula at N = n - 1.
    * ``rooted``: e uniform on all of K_n (e = b allowed), k = #LE + 1,
      formula at N = n.  This is the walk entering from an outside root.

    Returns the largest absolute pmf discrepancy per candidate and the
    candidates within 1e-9.
    """
    worst = {"distinct": 0.0, "non_target": 0.0, "rooted": 0.0}
    for n in n_values:
        exact = exact_lerw_distribution(FiniteGraph.complete(n), 0, 1).length_marginal()
        rooted = {1 + 1: Fraction(1, n)}
        for k, p in exact.items():
            rooted[k + 1] = rooted.get(k + 1, 0) + p * Fraction(n - 1, n)
        for name, law, big_n in (("distinct", exact, n), ("non_target", exact, n - 1),
                                 ("rooted", rooted, n)):
            pmf = complete_graph_pmf(big_n)
            support = set(law) | set(range(2, len(pmf)))
            diff = max(abs(float(law.get(k, 0)) - (pmf[k] if k < len(pmf) else 0.0))
                       for k in support)
            worst[name] = max(worst[name], diff)
    return {"max_abs_diff": worst, "matching": sorted(k for k, v in worst.items() if v <= 1e-9)}
