"""Geometry of the discrete torus T_N^d.

Points are plain tuples of ints, every coordinate reduced mod N.  Vertex
indices use row-major mixed radix with coordinate 0 most significant, so
``encode((1, 2))`` on T_3^2 is ``1*3 + 2 = 5``.

Distances are handled as exact squared integers; ball radii are stored as
:class:`fractions.Fraction` so membership never depends on float rounding.
"""

from __future__ import annotations

import enum
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from math import sqrt
from typing import Iterator, Sequence

import numpy as np

Point = tuple[int, ...]

_INDEX_LIMIT = np.iinfo(np.int64).max


@dataclass(frozen=True)
class TorusParams:
    side: int
    dim: int

    def __post_init__(self):
        if not isinstance(self.side, (int, np.integer)) or self.side < 2:
            raise ValueError(f"torus side must be an integer >= 2, got {self.side!r}")
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ValueError(f"torus dimension must be an integer >= 1, got {self.dim!r}")
        if self.side ** self.dim > min(_INDEX_LIMIT, sys.maxsize):
            raise OverflowError(f"T_{self.side}^{self.dim} has too many vertices to index")

    @property
    def volume(self) -> int:
        return self.side ** self.dim

    @property
    def strides(self) -> tuple[int, ...]:
        n, d = self.side, self.dim
        return tuple(n ** (d - 1 - k) for k in range(d))

    def point(self, coords: Sequence[int]) -> Point:
        """Validate and reduce a coordinate sequence into a torus point."""
        if len(coords) != self.dim:
            raise ValueError(f"expected {self.dim} coordinates, got {len(coords)}")
        return tuple(int(c) % self.side for c in coords)

    def origin(self) -> Point:
        return (0,) * self.dim

    def antipode(self) -> Point:
        return (self.side // 2,) * self.dim

    def points(self) -> Iterator[Point]:
        for i in range(self.volume):
            yield decode(i, self)


def encode(p: Sequence[int], params: TorusParams) -> int:
    idx = 0
    for c in p:
        idx = idx * params.side + c
    return idx


def decode(index: int, params: TorusParams) -> Point:
    if not 0 <= index < params.volume:
        raise ValueError(f"index {index} outside [0, {params.volume})")
    coords = [0] * params.dim
    for k in range(params.dim - 1, -1, -1):
        index, coords[k] = divmod(index, params.side)
    return tuple(coords)


def neighbors(p: Point, params: TorusParams) -> list[Point]:
    """The 2d lattice neighbours of ``p``, ordered (+e_0, -e_0, +e_1, -e_1, ...).

    The order matches the step encoding used by the walkers: direction
    ``k`` moves coordinate ``k // 2`` by ``+1`` if ``k`` is even, else ``-1``.
    """
    n = params.side
    out = []
    for k in range(params.dim):
        for delta in (1, -1):
            q = list(p)
            q[k] = (q[k] + delta) % n
            out.append(tuple(q))
    return out


def wrapped_offset(a: int, b: int, side: int) -> int:
    """Length of the shorter way around the circle Z/side between a and b."""
    diff = abs(a - b) % side
    return min(diff, side - diff)


def torus_distance_sq(v: Sequence[int], w: Sequence[int], params: TorusParams) -> int:
    return sum(wrapped_offset(a, b, params.side) ** 2 for a, b in zip(v, w))


def torus_distance(v: Sequence[int], w: Sequence[int], params: TorusParams) -> float:
    return sqrt(torus_distance_sq(v, w, params))


def l1_parity(v: Sequence[int], w: Sequence[int], params: TorusParams) -> int:
    """Parity of the wrapped l1 distance between v and w.

    Only meaningful as a bipartition on tori with even side; nothing in the
    estimators depends on it.
    """
    return sum(wrapped_offset(a, b, params.side) for a, b in zip(v, w)) % 2


class Membership(enum.Enum):
    INTERIOR = "interior"
    INNER_BOUNDARY = "inner_boundary"
    OUTSIDE = "outside"


def as_radius(r) -> Fraction:
    if isinstance(r, float):
        # floats from config files like "1.5" are meant as decimals
        return Fraction(str(r))
    return Fraction(r)


@dataclass(frozen=True)
class Ball:
    """Closed l2 ball B(center, radius) on a torus.

    ``radius`` accepts ints, Fractions, decimal strings or floats (read
    through their decimal repr).  Balls must not wrap around the torus:
    ``2 * radius <= side``.  Equality is allowed, the antipodal identification
    then only glues boundary points.
    """

    center: Point
    radius: Fraction
    params: TorusParams
    radius_sq: Fraction = field(init=False, repr=False)

    def __init__(self, center: Sequence[int], radius, params: TorusParams):
        r = as_radius(radius)
        if r < 0:
            raise ValueError(f"ball radius must be nonnegative, got {radius!r}")
        if 2 * r > params.side:
            raise ValueError(
                f"ball of radius {r} wraps around T_{params.side}^{params.dim} (need 2r <= N)"
            )
        object.__setattr__(self, "center", params.point(center))
        object.__setattr__(self, "radius", r)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "radius_sq", r * r)

    def __contains__(self, p: Sequence[int]) -> bool:
        return torus_distance_sq(self.center, p, self.params) <= self.radius_sq

    def members(self) -> list[Point]:
        """All vertices of the ball, enumerated from the centre outwards in a box."""
        n = self.params.side
        reach = min(int(self.radius), n // 2)
        offsets = range(-reach, reach + 1)
        seen = set()
        out = []
        for delta in np.ndindex(*([len(offsets)] * self.params.dim)):
            q = tuple((c + offsets[i]) % n for c, i in zip(self.center, delta))
            if q not in seen and q in self:
                seen.add(q)
                out.append(q)
        return out

    def boundary(self) -> list[Point]:
        return [p for p in self.members() if ball_membership(self, p) is Membership.INNER_BOUNDARY]


def ball_membership(b: Ball, p: Sequence[int]) -> Membership:
    if p not in b:
        return Membership.OUTSIDE
    for q in neighbors(tuple(p), b.params):
        if q not in b:
            return Membership.INNER_BOUNDARY
    return Membership.INTERIOR
