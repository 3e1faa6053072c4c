"""Simple random walks with reproducible seeds, and annulus stopping times.

Walks are streams: nothing here stores a trajectory unless the caller does.
On the torus the stream emits points (tuples); on the other graphs it emits
integer vertices.

Seeds: ``SeedSpec(master_seed, replica_index)`` feeds
``numpy.random.SeedSequence(master_seed, spawn_key=(replica_index,))`` into a
Philox counter-based bit generator.  Distinct replica indices are distinct
spawn keys, hence independent streams, on every platform numpy supports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

from lerwtorus.graphs import CompleteGraph, FiniteGraph, TorusGraph
from lerwtorus.lattice import Ball, Membership, TorusParams, as_radius, ball_membership

_SEED_LIMIT = 2**64


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    replica_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < _SEED_LIMIT:
            raise ValueError(f"master seed must fit in 64 unsigned bits, got {self.master_seed}")
        if self.replica_index < 0:
            raise ValueError(f"replica index must be nonnegative, got {self.replica_index}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.replica_index,))
        return np.random.Generator(np.random.Philox(ss))


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, SeedSpec):
        return seed.generator()
    return SeedSpec(int(seed)).generator()


class WalkStream:
    """A single-owner random walk.

    ``graph`` is a :class:`TorusParams` (vertices are points), or any graph
    from :mod:`lerwtorus.graphs` (vertices are ints).
    """

    def __init__(self, graph, start, seed):
        self.graph = graph
        self.rng = as_generator(seed)
        self.step_count = 0
        if isinstance(graph, TorusParams):
            self.current = graph.point(start)
            self._two_d = 2 * graph.dim
        else:
            if not 0 <= start < graph.num_vertices:
                raise ValueError(f"start vertex {start} not in graph")
            self.current = int(start)

    def step(self):
        u = self.rng.random()
        if isinstance(self.graph, TorusParams):
            k = int(u * self._two_d)
            p = list(self.current)
            p[k >> 1] = (p[k >> 1] + (1 if k % 2 == 0 else -1)) % self.graph.side
            self.current = tuple(p)
        else:
            self.current = self.graph.step_from(self.current, u)
        self.step_count += 1
        return self.current

    def __iter__(self) -> Iterator:
        yield self.current
        while True:
            yield self.step()


def default_cap(graph) -> int:
    n = graph.volume if isinstance(graph, TorusParams) else graph.num_vertices
    return 100 * n


class HitWalk:
    """Trajectory of a walk run until it first visits ``target``.

    Iterating yields the start vertex, then every vertex up to and including
    the first visit to ``target``.  If ``cap`` steps pass first, iteration
    stops and ``truncated`` is set.  A handle can be iterated once.
    """

    def __init__(self, graph, start, target, seed, cap: int | None = None):
        self.stream = WalkStream(graph, start, seed)
        self.target = graph.point(target) if isinstance(graph, TorusParams) else int(target)
        if self.stream.current == self.target:
            raise ValueError("walk_until_hit needs start != target")
        self.cap = default_cap(graph) if cap is None else int(cap)
        self.truncated = False
        self._used = False

    @property
    def steps(self) -> int:
        return self.stream.step_count

    def __iter__(self) -> Iterator:
        if self._used:
            raise RuntimeError("trajectory handle already consumed")
        self._used = True
        s = self.stream
        yield s.current
        while s.step_count < self.cap:
            v = s.step()
            yield v
            if v == self.target:
                return
        self.truncated = True


def walk_until_hit(graph, start, target, seed, cap: int | None = None) -> HitWalk:
    return HitWalk(graph, start, target, seed, cap)


class FixedWalk:
    """Trajectory of exactly ``length`` steps."""

    def __init__(self, graph, start, length: int, seed):
        if length < 0:
            raise ValueError("walk length must be nonnegative")
        self.stream = WalkStream(graph, start, seed)
        self.length = int(length)

    def __iter__(self) -> Iterator:
        s = self.stream
        yield s.current
        for _ in range(self.length):
            yield s.step()


def walk_fixed_length(graph, start, length: int, seed) -> FixedWalk:
    return FixedWalk(graph, start, length, seed)


@dataclass
class StoppingTimeTape:
    """t_0 = 0 < t_1 < t_2 < ...; odd entries are first visits to the inner
    boundary of B(v, 2r), even entries (after 0) first visits to that of
    B(v, 4r)."""

    center: tuple
    radius: Fraction
    times: list[int] = field(default_factory=lambda: [0])

    def cycles(self) -> list[int]:
        """Durations t_{2j+2} - t_{2j} of the completed even-to-even cycles."""
        even = self.times[0::2]
        return [b - a for a, b in zip(even, even[1:])]


def check_annulus(params: TorusParams, v, r) -> tuple[Ball, Ball, Ball]:
    """Validate an annulus anchor and return B(v,r), B(v,2r), B(v,4r).

    Requires 0 < r <= N/8.  The closed end is needed because the
    concentration experiment runs r = 4 on T_32.
    """
    r = as_radius(r)
    if not 0 < r <= Fraction(params.side, 8):
        raise ValueError(f"annulus radius must satisfy 0 < r <= N/8 = {params.side / 8}, got {r}")
    return Ball(v, r, params), Ball(v, 2 * r, params), Ball(v, 4 * r, params)


def annulus_stopping_times(traj: Iterable, params: TorusParams, v, r) -> StoppingTimeTape:
    """Alternating first visits to the spheres of B(v, 2r) and B(v, 4r).

    ``traj`` yields torus points starting at time 0; it must start outside
    B(v, 2r).  The tape ends when the trajectory does.
    """
    _, inner, outer = check_annulus(params, v, r)
    tape = StoppingTimeTape(center=inner.center, radius=inner.radius / 2)
    it = iter(traj)
    try:
        start = next(it)
    except StopIteration:
        raise ValueError("empty trajectory") from None
    if start in inner:
        raise ValueError(
            f"trajectory starts at {start}, inside B({inner.center}, {inner.radius}); "
            "stopping times assume the start lies outside the inner ball"
        )
    looking_at = inner
    for t, p in enumerate(it, 1):
        if ball_membership(looking_at, p) is Membership.INNER_BOUNDARY:
            tape.times.append(t)
            looking_at = outer if looking_at is inner else inner
    return tape
