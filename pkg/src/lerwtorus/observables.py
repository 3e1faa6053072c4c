"""Measured quantities: LERW lengths, cut times, local ball counts, pair
counts, annulus stopping-time moments, exit points and ball hitting.

Each Monte Carlo estimator comes in two layers: a per-replica sampler that
takes a :class:`SeedSpec` and returns plain numbers, and a summariser that
merges replica outputs in replica-index order.  The harness drives the same
two layers, so library calls and persisted runs agree bit for bit.
"""

from __future__ import annotations

import math
import threading
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import permutations, product
from typing import Iterable, Sequence

import numpy as np

from lerwtorus import _kernels
from lerwtorus.erasure import loop_erase
from lerwtorus.lattice import Ball, TorusParams, as_radius, decode, encode, torus_distance_sq
from lerwtorus.scaling import SurvivalCurve, survival, wilson_interval
from lerwtorus.walker import SeedSpec, as_generator, check_annulus

_buffers = threading.local()


def _scratch(size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-thread pos/path/count buffers of at least ``size`` slots."""
    dtype = np.int32 if size < 2**31 - 1 else np.int64
    have = getattr(_buffers, "arrays", None)
    if have is None or have[0].size < size or have[0].dtype != dtype:
        have = _buffers.arrays = tuple(np.empty(size, dtype) for _ in range(3))
    return have


def _coords(p) -> np.ndarray:
    return np.asarray(p, dtype=np.int64)


def _sq_floor(r: Fraction) -> int:
    """floor(r^2): for integer d2, d2 <= r^2 iff d2 <= floor(r^2)."""
    return math.floor(r * r)


def _core_floor(r: Fraction) -> int:
    """Points with d2 <= this are at distance <= r - 1, hence interior to B(., r)."""
    return math.floor((r - 1) ** 2) if r >= 1 else -1


# ---------------------------------------------------------------- LERW lengths

@dataclass
class LerwSample:
    length: int
    steps: int
    truncated: bool


def lerw_length_torus(params: TorusParams, b, e, seed, cap: int | None = None) -> LerwSample:
    """#LE of a walk on the torus from b stopped at e."""
    b, e = params.point(b), params.point(e)
    if b == e:
        raise ValueError("b and e must differ")
    cap = 100 * params.volume if cap is None else cap
    pos, path, _ = _scratch(params.volume)
    length, steps, truncated = _kernels.lerw_torus(
        as_generator(seed), params.side, params.dim, _coords(b), encode(e, params), cap, pos, path)
    return LerwSample(int(length), int(steps), bool(truncated))


def lerw_length_complete(n: int, seed, rooted: bool = True, target=None,
                         cap: int | None = None) -> LerwSample:
    """#LE on K_n from vertex 0 to ``target`` (default n - 1).

    ``rooted`` starts from an outside root instead (counted in the length),
    the convention of :func:`lerwtorus.laplacian.complete_graph_pmf`.  With
    ``target="uniform"`` the target is first drawn uniformly from all n
    vertices; drawing vertex 0 itself gives the one-vertex path.
    """
    n = int(n)
    rng = as_generator(seed)
    if target == "uniform":
        target = int(rng.integers(n))
    elif target is None:
        target = n - 1
    if not 0 <= target < n:
        raise ValueError(f"target {target} outside K_{n}")
    if target == 0 and not rooted:
        return LerwSample(1, 0, False)
    cap = 100 * n if cap is None else cap
    pos, path, _ = _scratch(n)
    length, steps, truncated = _kernels.lerw_complete(
        rng, n, -1 if rooted else 0, target, cap, pos, path)
    return LerwSample(int(length), int(steps), bool(truncated))


# ---------------------------------------------------------------- cut times

@dataclass
class CutTimeReport:
    """Cut times t in [0, L) of a stored trajectory of length L.

    t = L is always a cut time (nothing comes after it); it is not in
    ``count`` or ``positions``.
    """

    walk_length: int
    count: int
    positions: list[int] = field(default_factory=list)
    positions_truncated: bool = False

    @property
    def count_with_endpoint(self) -> int:
        return self.count + 1


def cut_times(traj: Sequence, max_positions: int = 10_000) -> CutTimeReport:
    """t is a cut time iff no vertex of R[0, t] occurs again in R(t+1..L].

    Two passes: record each vertex's last occurrence, then sweep a running
    maximum of last occurrences; t is a cut time iff that maximum equals t.
    """
    traj = list(traj)
    if not traj:
        raise ValueError("empty trajectory")
    last = {v: t for t, v in enumerate(traj)}
    reach = -1
    positions = []
    count = 0
    walk_length = len(traj) - 1
    for t in range(walk_length):
        reach = max(reach, last[traj[t]])
        if reach == t:
            count += 1
            if len(positions) < max_positions:
                positions.append(t)
    return CutTimeReport(walk_length, count, positions, count > len(positions))


def cut_time_replica(params: TorusParams, length: int, seed) -> dict:
    """Cut-time count and erased length of one walk of ``length`` steps from the origin."""
    traj = _kernels.walk_torus_fixed(as_generator(seed), params.side, params.dim,
                                     _coords(params.origin()), int(length)).tolist()
    report = cut_times(traj, max_positions=0)
    return {"L": int(length), "X": report.count, "le_length": len(loop_erase(traj))}


def cut_time_length(params: TorusParams, epsilon: float) -> int:
    """Walk length L = round(epsilon * N^{d/2}), at least 1."""
    return max(1, round(epsilon * params.side ** (params.dim / 2)))


# ---------------------------------------------------------------- local counts

def f_scale(r, dim: int, epsilon: float = 0.1) -> float:
    """Scaling function: r^{d/2} for d > 4, r^{2 + epsilon} for d = 4."""
    r = float(r)
    if dim > 4:
        return r ** (dim / 2)
    if dim == 4:
        return r ** (2 + epsilon)
    raise ValueError("the scaling function is only defined for d >= 4")


def local_ball_count(path: Iterable, ball: Ball) -> int:
    """Number of path vertices inside the ball."""
    return sum(1 for p in path if p in ball)


def local_count_replica(params: TorusParams, v, r, max_i: int, seed, b=None,
                        cap: int | None = None) -> list[int]:
    """L_{i,v,r} = #(LE(R[0, t_i]) n B(v, r)) for i = 1..max_i, -1 if t_i was not reached.

    The walk starts at ``b`` (default: the antipode of v).
    """
    ball, inner, outer = check_annulus(params, v, r)
    center = ball.center
    if b is None:
        b = tuple((c + params.side // 2) % params.side for c in center)
    b = params.point(b)
    if b in inner:
        raise ValueError(f"start {b} lies inside B(v, 2r)")
    cap = 1000 * params.volume * max(1, max_i) if cap is None else cap
    pos, path, inside = _scratch(params.volume)
    counts = _kernels.local_counts(
        as_generator(seed), params.side, params.dim, _coords(b), _coords(center),
        _sq_floor(ball.radius), _sq_floor(inner.radius), _core_floor(inner.radius),
        _sq_floor(outer.radius), _core_floor(outer.radius), int(max_i), cap, pos, path, inside)
    return counts[1:].tolist()


@dataclass
class FPropertyTable:
    """Survival of L_{i,v,r} / f(r) per stopping index i.

    Cells with fewer than ``min_replicas`` replicas reaching t_i hold None and
    are listed in ``flagged``.
    """

    scale: float
    curves: dict[int, SurvivalCurve | None]
    reached: dict[int, int]
    flagged: list[int]

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "reached": self.reached,
            "flagged": self.flagged,
            "curves": {i: (c.to_dict() if c is not None else None) for i, c in self.curves.items()},
        }


def summarize_f_property(rows: Sequence[Sequence[int]], r, dim: int, grid, epsilon: float = 0.1,
                         min_replicas: int = 30) -> FPropertyTable:
    """Unconditional tail P(L_{i,v,r} > lambda f(r)) from replica rows of counts."""
    scale = f_scale(as_radius(r), dim, epsilon)
    arr = np.asarray(rows, dtype=np.int64)
    curves, reached, flagged = {}, {}, []
    for i in range(arr.shape[1]):
        col = arr[:, i]
        col = col[col >= 0]
        reached[i + 1] = int(col.size)
        if col.size < min_replicas:
            curves[i + 1] = None
            flagged.append(i + 1)
        else:
            curves[i + 1] = survival(col, scale, grid)
    return FPropertyTable(scale, curves, reached, flagged)


def f_property_survey(params: TorusParams, v, r, max_i: int, grid, replicas: int, seed: int,
                      epsilon: float = 0.1, min_replicas: int = 30) -> FPropertyTable:
    rows = [local_count_replica(params, v, r, max_i, SeedSpec(seed, k)) for k in range(replicas)]
    return summarize_f_property(rows, r, params.dim, grid, epsilon, min_replicas)


# ---------------------------------------------------------------- pair counts

def pair_count(path: Sequence, s, params: TorusParams, chunk: int = 2048) -> int:
    """V_s: ordered pairs (w1, w2) of path vertices, w1 = w2 included, with |w1 - w2| <= s."""
    if not len(path):
        return 0
    pts = np.asarray(path, dtype=np.int64).reshape(len(path), params.dim)
    s = as_radius(s)
    if s < 0:
        raise ValueError("scale must be nonnegative")
    limit = _sq_floor(s)
    n = params.side
    total = 0
    for lo in range(0, len(pts), chunk):
        diff = np.abs(pts[lo:lo + chunk, None, :] - pts[None, :, :]) % n
        diff = np.minimum(diff, n - diff)
        total += int(((diff**2).sum(axis=2) <= limit).sum())
    return total


# ---------------------------------------------------------------- stopping times

def annulus_replica(params: TorusParams, v, r, n_cycles: int, seed, b=None,
                    cap: int | None = None) -> list[int] | None:
    """Even stopping times t_2, t_4, ..., t_{2n}; None if the walk gave up first."""
    _, inner, outer = check_annulus(params, v, r)
    center = inner.center
    if b is None:
        b = tuple((c + params.side // 2) % params.side for c in center)
    b = params.point(b)
    if b in inner:
        raise ValueError(f"start {b} lies inside B(v, 2r)")
    cap = 100 * params.volume * n_cycles if cap is None else cap
    times, reached = _kernels.annulus_times(
        as_generator(seed), params.side, params.dim, _coords(b), _coords(center),
        _sq_floor(inner.radius), _core_floor(inner.radius),
        _sq_floor(outer.radius), _core_floor(outer.radius), 2 * n_cycles, cap)
    if reached < 2 * n_cycles:
        return None
    return times[2::2].tolist()


@dataclass
class StoppingMomentEstimate:
    """Cycle-length mean E and spread sigma of t_{2n} around n E.

    ``mean`` averages every even-to-even cycle; ``sigma`` is the sample
    standard deviation of t_{2n} - n * mean divided by sqrt(n).  Half-widths
    are 95% normal approximations (sigma uses se = sigma / sqrt(2(m - 1))).
    """

    radius: float
    n_cycles: int
    mean: float
    sigma: float
    mean_halfwidth: float
    sigma_halfwidth: float
    replicas: int
    excluded: int
    tail: SurvivalCurve | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["tail"] = self.tail.to_dict() if self.tail is not None else None
        return out


def summarize_stopping_times(rows: Sequence[list[int] | None], r, n_cycles: int,
                             grid=(1.0, 1.5, 2.0, 2.5, 3.0)) -> StoppingMomentEstimate:
    kept = [row for row in rows if row is not None]
    excluded = len(rows) - len(kept)
    if len(kept) < 2:
        raise ValueError("fewer than two replicas completed their cycles")
    even = np.asarray(kept, dtype=float)
    cycles = np.diff(np.concatenate([np.zeros((len(kept), 1)), even], axis=1), axis=1).ravel()
    mean = float(cycles.mean())
    dev = even[:, -1] - n_cycles * mean
    sigma = float(dev.std(ddof=1) / math.sqrt(n_cycles))
    z = np.abs(dev) / (sigma * math.sqrt(n_cycles))
    return StoppingMomentEstimate(
        radius=float(as_radius(r)),
        n_cycles=n_cycles,
        mean=mean,
        sigma=sigma,
        mean_halfwidth=float(1.959963984540054 * cycles.std(ddof=1) / math.sqrt(cycles.size)),
        sigma_halfwidth=float(1.959963984540054 * sigma / math.sqrt(2 * (len(kept) - 1))),
        replicas=len(kept),
        excluded=excluded,
        tail=survival(z, 1.0, grid),
    )


def stopping_time_moments(params: TorusParams, v, r, n_cycles: int, replicas: int, seed: int,
                          grid=(1.0, 1.5, 2.0, 2.5, 3.0)) -> StoppingMomentEstimate:
    rows = [annulus_replica(params, v, r, n_cycles, SeedSpec(seed, k)) for k in range(replicas)]
    return summarize_stopping_times(rows, r, n_cycles, grid)


# ---------------------------------------------------------------- exit points

@dataclass
class ExitEstimate:
    """Exit law of a walk on Z^d started at ``start`` and run until it leaves B(0, r).

    The exit point is the last vertex of the ball before the first step out,
    always an inner-boundary point.  ``probability`` is the raw estimate at
    ``target``; ``orbit_probability`` averages over the images of ``target``
    under coordinate permutations and sign changes, which all have the same
    exit probability when the start is the origin.
    """

    radius: float
    target: tuple
    probability: float
    orbit_probability: float
    orbit_size: int
    samples: int
    distribution: dict[tuple, float]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["distribution"] = {" ".join(map(str, k)): v for k, v in self.distribution.items()}
        return out


def _orbit(w: tuple) -> set[tuple]:
    out = set()
    for perm in permutations(w):
        for signs in product((1, -1), repeat=len(w)):
            out.add(tuple(s * c for s, c in zip(signs, perm)))
    return out


def _exit_setup(dim: int, r, target, start):
    r = as_radius(r)
    if r < 1:
        raise ValueError("radius must be at least 1")
    start = (0,) * dim if start is None else tuple(int(c) for c in start)
    radius_sq = _sq_floor(r)
    if sum(c * c for c in start) > radius_sq:
        raise ValueError("start lies outside the ball")
    half = math.floor(r)
    target = (half,) + (0,) * (dim - 1) if target is None else tuple(int(c) for c in target)
    t2 = sum(c * c for c in target)
    if t2 > radius_sq or all(t2 - c * c + (abs(c) + 1) ** 2 <= radius_sq for c in target):
        raise ValueError(f"{target} is not on the inner boundary of B(0, {r})")
    orbit = _orbit(target) if all(c == 0 for c in start) else {target}
    return r, start, radius_sq, half, target, orbit


def _exit_counts(dim, start, radius_sq, half, samples, seed) -> np.ndarray:
    counts = _kernels.exit_points_zd(as_generator(seed), dim, _coords(start), radius_sq,
                                     int(samples), half)
    return counts.reshape((2 * half + 1,) * dim)


def exit_point_probability(dim: int, r, samples: int, seed, target=None, start=None) -> ExitEstimate:
    r, start, radius_sq, half, target, orbit = _exit_setup(dim, r, target, start)
    counts = _exit_counts(dim, start, radius_sq, half, samples, seed)
    dist = {}
    for coords in zip(*np.nonzero(counts)):
        dist[tuple(int(c) - half for c in coords)] = int(counts[coords]) / samples
    orbit_p = sum(dist.get(w, 0.0) for w in orbit) / len(orbit)
    return ExitEstimate(float(r), target, dist.get(target, 0.0), orbit_p, len(orbit), int(samples), dist)


def exit_replica(dim: int, r, samples: int, seed, target=None) -> dict:
    """Exit tallies of one batch of walks from the origin: hits at ``target`` and on its orbit."""
    r, start, radius_sq, half, target, orbit = _exit_setup(dim, r, target, None)
    counts = _exit_counts(dim, start, radius_sq, half, samples, seed)

    def at(w):
        return int(counts[tuple(c + half for c in w)])

    return {"samples": int(samples), "target_hits": at(target),
            "orbit_hits": sum(at(w) for w in orbit), "orbit_size": len(orbit)}


def summarize_exit(rows: Sequence[dict], r, target) -> dict:
    """Merge :func:`exit_replica` batches.

    The orbit interval treats the orbit total as one binomial count and
    divides by the orbit size, which is conservative.
    """
    samples = sum(row["samples"] for row in rows)
    hits = sum(row["target_hits"] for row in rows)
    orbit_hits = sum(row["orbit_hits"] for row in rows)
    size = rows[0]["orbit_size"]
    lo, hi = wilson_interval(orbit_hits, samples)
    return {"radius": float(as_radius(r)), "target": list(target), "samples": samples,
            "probability": hits / samples, "orbit_probability": orbit_hits / (samples * size),
            "orbit_size": size, "orbit_lower": float(lo) / size, "orbit_upper": float(hi) / size}


# ---------------------------------------------------------------- ball hitting

def hitting_walk_length(params: TorusParams, r, c1: float = 10.0) -> int:
    """ceil(c1 * N^d * r^{2-d})."""
    return math.ceil(c1 * params.volume * float(as_radius(r)) ** (2 - params.dim))


def ball_hit_replica(params: TorusParams, start, r, length: int, seed, center=None) -> int:
    """First time the walk from ``start`` is inside B(center, r) within ``length`` steps, else -1."""
    ball = Ball(params.origin() if center is None else center, r, params)
    return int(_kernels.hit_ball_torus(as_generator(seed), params.side, params.dim,
                                       _coords(params.point(start)), _coords(ball.center),
                                       _sq_floor(ball.radius), int(length)))


@dataclass
class HitCheck:
    """Per-start estimates of P(walk of ``length`` steps hits B(0, r))."""

    radius: float
    length: int
    starts: list[tuple]
    estimates: list[float]
    lower: list[float]
    upper: list[float]
    replicas: int

    def to_dict(self) -> dict:
        return asdict(self)


def summarize_hits(starts, first_hits: Sequence[Sequence[int]], r, length: int) -> HitCheck:
    hits = np.array([[t >= 0 for t in row] for row in first_hits], dtype=float)
    k = hits.sum(axis=1)
    lo, hi = wilson_interval(k, hits.shape[1])
    return HitCheck(float(as_radius(r)), int(length), [tuple(s) for s in starts],
                    (k / hits.shape[1]).tolist(), lo.tolist(), hi.tolist(), int(hits.shape[1]))


def random_starts(params: TorusParams, count: int, seed: int) -> list[tuple]:
    rng = SeedSpec(seed, 2**32).generator()
    idx = rng.integers(0, params.volume, size=count)
    return [decode(int(i), params) for i in idx]


def ball_hitting_time_check(params: TorusParams, r, replicas: int, seed: int, c1: float = 10.0,
                            n_starts: int = 20, starts=None) -> HitCheck:
    Ball(params.origin(), r, params)
    length = hitting_walk_length(params, r, c1)
    starts = random_starts(params, n_starts, seed) if starts is None else [params.point(s) for s in starts]
    rows = []
    k = 0
    for s in starts:
        row = []
        for _ in range(replicas):
            row.append(ball_hit_replica(params, s, r, length, SeedSpec(seed, k)))
            k += 1
        rows.append(row)
    return summarize_hits(starts, rows, r, length)
