"""Chronological loop-erasure, batch and online.

The batch routines follow the last-occurrence recursion directly::

    LE_0     = gamma(-m)
    LE_{i+1} = gamma(j_i + 1),   j_i = max{j : gamma(j) = LE_i}

stopping once j_i = n.  :class:`OnlineLoopEraser` instead truncates the held
path back to the earlier occurrence whenever a vertex is revisited.  The two
agree on every prefix: if v = LE_i is revisited at time s, every vertex pushed
after LE_i's entry was pushed at a time in (j, s) and cannot be on LE of the
prefix, because the recursion jumps from LE_i straight to the successor of
its last occurrence, which is now s.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence


@dataclass(frozen=True)
class IndexedPath:
    """A path gamma: {-m, ..., n} -> vertices, stored as a tuple.

    ``vertices[k]`` is gamma(k - m); ``origin`` is m.
    """

    vertices: tuple
    origin: int = 0

    def __post_init__(self):
        if not self.vertices:
            raise ValueError("path must be nonempty")
        if not 0 <= self.origin < len(self.vertices):
            raise ValueError("origin must index a vertex of the path")

    @classmethod
    def two_sided(cls, negative: Sequence, positive: Sequence) -> "IndexedPath":
        """Join gamma(-m..-1) and gamma(0..n)."""
        return cls(tuple(negative) + tuple(positive), len(negative))


def _as_indexed(gamma) -> IndexedPath:
    return gamma if isinstance(gamma, IndexedPath) else IndexedPath(tuple(gamma))


def _erase_with_indices(gamma: IndexedPath) -> tuple[list, list[int]]:
    verts = gamma.vertices
    last = {v: k for k, v in enumerate(verts)}
    out = [verts[0]]
    js = []
    end = len(verts) - 1
    while True:
        j = last[out[-1]]
        js.append(j)
        if j == end:
            return out, js
        out.append(verts[j + 1])


def loop_erase(gamma) -> tuple:
    """LE(gamma) as a tuple of vertices.  Accepts an IndexedPath or any sequence."""
    out, _ = _erase_with_indices(_as_indexed(gamma))
    return tuple(out)


def loop_erase_continued(gamma) -> tuple:
    """LE+(gamma): the suffix of LE(gamma) from the first entry whose last
    occurrence lies at a nonnegative time."""
    gamma = _as_indexed(gamma)
    out, js = _erase_with_indices(gamma)
    first = next(i for i, j in enumerate(js) if j >= gamma.origin)
    return tuple(out[first:])


class OnlineLoopEraser:
    """Loop-erasure maintained one pushed vertex at a time.

    ``adjacent(u, v)`` is checked on every push when given; pass ``None`` on
    graphs where any two distinct vertices are adjacent.
    """

    def __init__(self, adjacent: Callable[[Hashable, Hashable], bool] | None = None):
        self.adjacent = adjacent
        self.path: list = []
        self._position: dict = {}

    def push(self, v) -> "OnlineLoopEraser":
        path = self.path
        if path and self.adjacent is not None and not self.adjacent(path[-1], v):
            raise ValueError(f"cannot push {v!r}: not adjacent to path end {path[-1]!r}")
        j = self._position.get(v)
        if j is not None:
            for u in path[j + 1:]:
                del self._position[u]
            del path[j + 1:]
        else:
            self._position[v] = len(path)
            path.append(v)
        return self

    def extend(self, vertices: Iterable) -> "OnlineLoopEraser":
        for v in vertices:
            self.push(v)
        return self

    def __len__(self) -> int:
        return len(self.path)

    def __contains__(self, v) -> bool:
        return v in self._position

    def snapshot(self) -> tuple:
        return tuple(self.path)


def le_length(eraser: OnlineLoopEraser) -> int:
    return len(eraser.path)
