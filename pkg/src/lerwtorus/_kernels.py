"""Compiled inner loops.

Each kernel consumes ``rng.random()`` draws with exactly the step rules of
:mod:`lerwtorus.graphs` / :class:`lerwtorus.walker.WalkStream`, so a kernel
and the pure-Python stream fed the same generator visit the same vertices.
Torus direction ``k = int(u * 2d)`` moves coordinate ``k >> 1`` by +1 when
``k`` is even and by -1 when odd.

Dense ``pos`` buffers (one slot per vertex) index into the held path and are
validated lazily, so they never need clearing between replicas.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _strides(side, dim):
    s = np.empty(dim, np.int64)
    acc = 1
    for k in range(dim - 1, -1, -1):
        s[k] = acc
        acc *= side
    return s


@njit(cache=True, nogil=True)
def _encode(coords, side):
    idx = 0
    for c in coords:
        idx = idx * side + c
    return idx


@njit(cache=True, nogil=True)
def _wrap_abs(off, side):
    return off if 2 * off <= side else side - off


@njit(cache=True, nogil=True)
def _step(rng, coords, idx, side, dim, strides):
    """Advance ``coords`` in place; returns (new index, coordinate moved, old coordinate).

    Branch-free wraparound: the direction is random, so a branch on it
    mispredicts half the time.
    """
    k = int(rng.random() * 2 * dim)
    c = k >> 1
    old = coords[c]
    new = old + 1 - 2 * (k & 1)
    new += side * ((new < 0) - (new == side))
    coords[c] = new
    return idx + (new - old) * strides[c], c, old


@njit(cache=True, nogil=True)
def _push(v, pos, path, length):
    j = pos[v]
    if 0 <= j < length and path[j] == v:
        return j + 1
    pos[v] = length
    path[length] = v
    return length + 1


@njit(cache=True, nogil=True)
def lerw_torus(rng, side, dim, start, target, cap, pos, path):
    """Walk from ``start`` (coords) until index ``target``; erase online.

    Returns (LE vertex count, steps, truncated).  The erased path is left in
    ``path[:count]``.
    """
    strides = _strides(side, dim)
    coords = start.copy()
    idx = _encode(coords, side)
    length = _push(idx, pos, path, 0)
    steps = 0
    while idx != target:
        if steps >= cap:
            return length, steps, True
        idx, _, _ = _step(rng, coords, idx, side, dim, strides)
        steps += 1
        length = _push(idx, pos, path, length)
    return length, steps, False


@njit(cache=True, nogil=True)
def walk_torus_fixed(rng, side, dim, start, length):
    strides = _strides(side, dim)
    coords = start.copy()
    out = np.empty(length + 1, np.int64)
    idx = _encode(coords, side)
    out[0] = idx
    for t in range(1, length + 1):
        idx, _, _ = _step(rng, coords, idx, side, dim, strides)
        out[t] = idx
    return out


@njit(cache=True, nogil=True)
def _dist_sq(coords, center, side):
    s = 0
    for k in range(coords.shape[0]):
        a = _wrap_abs((coords[k] - center[k]) % side, side)
        s += a * a
    return s


@njit(cache=True, nogil=True)
def _on_sphere(coords, center, side, d2, radius_sq, core_sq):
    """Inner-boundary test of B(center, sqrt(radius_sq)) for a point at squared distance d2."""
    if d2 > radius_sq or d2 <= core_sq:
        return False
    for k in range(coords.shape[0]):
        a = _wrap_abs((coords[k] - center[k]) % side, side)
        for delta in (1, -1):
            b = _wrap_abs((coords[k] - center[k] + delta) % side, side)
            if d2 - a * a + b * b > radius_sq:
                return True
    return False


@njit(cache=True, nogil=True)
def _moved_dist_sq(d2, coords, center, side, c, old):
    a = _wrap_abs((old - center[c]) % side, side)
    b = _wrap_abs((coords[c] - center[c]) % side, side)
    return d2 - a * a + b * b


@njit(cache=True, nogil=True)
def annulus_times(rng, side, dim, start, center, in_sq, in_core, out_sq, out_core, n_times, cap):
    """Stopping times t_1..t_{n_times} for the annulus of ``center``.

    Returns (times array with times[0] = 0, number of stopping times reached).
    Gives up after ``cap`` steps.
    """
    strides = _strides(side, dim)
    coords = start.copy()
    idx = _encode(coords, side)
    d2 = _dist_sq(coords, center, side)
    times = np.zeros(n_times + 1, np.int64)
    i = 0
    t = 0
    while i < n_times and t < cap:
        idx, c, old = _step(rng, coords, idx, side, dim, strides)
        t += 1
        d2 = _moved_dist_sq(d2, coords, center, side, c, old)
        if i % 2 == 0:
            hit = _on_sphere(coords, center, side, d2, in_sq, in_core)
        else:
            hit = _on_sphere(coords, center, side, d2, out_sq, out_core)
        if hit:
            i += 1
            times[i] = t
    return times, i


@njit(cache=True, nogil=True)
def local_counts(rng, side, dim, start, center, ball_sq, in_sq, in_core, out_sq, out_core,
                 n_times, cap, pos, path, inside):
    """#(LE(R[0, t_i]) n B(center, r)) for i = 1..n_times; -1 where t_i was not reached.

    ``inside[k]`` holds the running count of ball vertices on ``path[:k+1]``.
    """
    strides = _strides(side, dim)
    coords = start.copy()
    idx = _encode(coords, side)
    d2 = _dist_sq(coords, center, side)
    counts = np.full(n_times + 1, -1, np.int64)
    length = _push(idx, pos, path, 0)
    inside[0] = 1 if d2 <= ball_sq else 0
    counts[0] = inside[0]
    i = 0
    t = 0
    while i < n_times and t < cap:
        idx, c, old = _step(rng, coords, idx, side, dim, strides)
        t += 1
        d2 = _moved_dist_sq(d2, coords, center, side, c, old)
        new_length = _push(idx, pos, path, length)
        if new_length == length + 1:
            inside[length] = (inside[length - 1] if length > 0 else 0) + (1 if d2 <= ball_sq else 0)
        length = new_length
        if i % 2 == 0:
            hit = _on_sphere(coords, center, side, d2, in_sq, in_core)
        else:
            hit = _on_sphere(coords, center, side, d2, out_sq, out_core)
        if hit:
            i += 1
            counts[i] = inside[length - 1]
    return counts


@njit(cache=True, nogil=True)
def hit_ball_torus(rng, side, dim, start, center, radius_sq, length):
    """First time within ``length`` steps the walk is in the ball, or -1."""
    strides = _strides(side, dim)
    coords = start.copy()
    idx = _encode(coords, side)
    d2 = _dist_sq(coords, center, side)
    if d2 <= radius_sq:
        return 0
    for t in range(1, length + 1):
        idx, c, old = _step(rng, coords, idx, side, dim, strides)
        d2 = _moved_dist_sq(d2, coords, center, side, c, old)
        if d2 <= radius_sq:
            return t
    return -1


@njit(cache=True, nogil=True)
def exit_points_zd(rng, dim, start, radius_sq, samples, half):
    """Walk on Z^d from ``start`` until leaving the ball; tally the last point inside.

    Tallies live in a box of side 2*half+1 indexed row-major with offset half.
    """
    width = 2 * half + 1
    counts = np.zeros(width ** dim, np.int64)
    coords = np.empty(dim, np.int64)
    for s in range(samples):
        d2 = 0
        for k in range(dim):
            coords[k] = start[k]
            d2 += start[k] * start[k]
        while True:
            kk = int(rng.random() * 2 * dim)
            c = kk >> 1
            old = coords[c]
            new = old + 1 if kk & 1 == 0 else old - 1
            nd2 = d2 - old * old + new * new
            if nd2 > radius_sq:
                idx = 0
                for k in range(dim):
                    idx = idx * width + coords[k] + half
                counts[idx] += 1
                break
            coords[c] = new
            d2 = nd2
    return counts


@njit(cache=True, nogil=True)
def lerw_complete(rng, n, start, target, cap, pos, path):
    """LERW on K_n from ``start`` to ``target``.

    ``start = -1`` starts from an extra root joined to every vertex and never
    revisited; the root is counted in the returned length.
    Returns (LE vertex count, steps, truncated).
    """
    steps = 0
    extra = 0
    if start < 0:
        cur = int(rng.random() * n)
        steps = 1
        extra = 1
    else:
        cur = start
    length = _push(cur, pos, path, 0)
    while cur != target:
        if steps >= cap:
            return length + extra, steps, True
        j = int(rng.random() * (n - 1))
        cur = j + 1 if j >= cur else j
        steps += 1
        length = _push(cur, pos, path, length)
    return length + extra, steps, False


@njit(cache=True, nogil=True)
def alpha_length(rng, n, alpha, rooted):
    """Length of the alpha-power Laplacian walk on K_n via its stopping hazard.

    With i path vertices, free vertices carry harmonic value 1/i (rooted) or
    1/(i+1) (start inside K_n); the target carries 1.
    """
    i = 1
    while True:
        if rooted:
            free = n - i
            h = 1.0 / (1.0 + free * (float(i) ** -alpha))
        else:
            free = n - i - 1
            h = 1.0 / (1.0 + free * (float(i + 1) ** -alpha))
        if free <= 0 or rng.random() < h:
            return i + 1
        i += 1


@njit(cache=True, nogil=True)
def lerw_graph(rng, indptr, indices, start, target, cap, pos, path):
    """LERW on an explicit CSR graph.  Returns (LE vertex count, steps, truncated)."""
    cur = start
    length = _push(cur, pos, path, 0)
    steps = 0
    while cur != target:
        if steps >= cap:
            return length, steps, True
        lo = indptr[cur]
        deg = indptr[cur + 1] - lo
        cur = indices[lo + int(rng.random() * deg)]
        steps += 1
        length = _push(cur, pos, path, length)
    return length, steps, False


@njit(cache=True, nogil=True)
def lerw_graph_batch(rng, indptr, indices, start, target, samples):
    """``samples`` erased paths as rows of an (samples, n) array padded with -1."""
    n = indptr.shape[0] - 1
    out = np.full((samples, n), -1, np.int64)
    pos = np.empty(n, np.int64)
    path = np.empty(n, np.int64)
    cap = np.iinfo(np.int64).max
    for s in range(samples):
        length, _, _ = lerw_graph(rng, indptr, indices, start, target, cap, pos, path)
        out[s, :length] = path[:length]
    return out
