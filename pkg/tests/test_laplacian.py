import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lerwtorus.graphs import CompleteGraph, FiniteGraph, TorusGraph
from lerwtorus.lattice import TorusParams
from lerwtorus.laplacian import (
    LIMIT_MEAN, DirichletSolver, LaplacianWalkSampler, complete_graph_alpha_length,
    complete_graph_exact_pmf, complete_graph_limit_cdf, complete_graph_pmf, dirichlet_solve,
    laplacian_step, laplacian_walk, sample_alpha_lengths, transition_probabilities,
)
from lerwtorus.observables import lerw_length_complete
from lerwtorus.scaling import tv_distance
from lerwtorus.walker import SeedSpec

C5 = FiniteGraph.cycle(5)


def dense_solution(graph, zero_set, one):
    n = graph.num_vertices
    free = [v for v in range(n) if v not in zero_set and v != one]
    values = np.zeros(n)
    values[one] = 1.0
    if free:
        idx = {v: k for k, v in enumerate(free)}
        m = np.zeros((len(free), len(free)))
        rhs = np.zeros(len(free))
        for v in free:
            m[idx[v], idx[v]] = graph.degree(v)
            for u in graph.neighbors(v):
                if u in idx:
                    m[idx[v], idx[u]] -= 1
                elif u == one:
                    rhs[idx[v]] += 1
        values[free] = np.linalg.solve(m, rhs)
    return values


def random_connected_graph(rng, n):
    order = rng.permutation(n)
    edges = {tuple(sorted((int(order[k]), int(order[k + 1])))) for k in range(n - 1)}
    for _ in range(int(rng.integers(0, 2 * n))):
        a, b = rng.integers(0, n, 2)
        if a != b:
            edges.add(tuple(sorted((int(a), int(b)))))
    return FiniteGraph.from_edges(edges, n)


def test_field_examples():
    f = dirichlet_solve(FiniteGraph.path(3), {0}, 2)
    assert f[1] == pytest.approx(0.5, abs=1e-12)
    f = dirichlet_solve(C5, {0}, 2)
    assert np.allclose(f.values, [0, 1 / 2, 1, 2 / 3, 1 / 3], atol=1e-10)
    assert f.residual <= 1e-10
    n = 9
    for i in range(1, n - 1):
        f = dirichlet_solve(CompleteGraph(n), set(range(i)), n - 1)
        assert np.allclose(f.values[i:n - 1], 1 / (i + 1), atol=1e-10)


def test_field_boundary_values_exact_and_cutoff_region_zero():
    # vertex 4 of a path is cut off from the target by the zero set at 3
    g = FiniteGraph.path(5)
    f = dirichlet_solve(g, {0, 3}, 2)
    assert f[0] == 0.0 and f[3] == 0.0 and f[2] == 1.0
    assert f[4] == 0.0
    assert f[1] == pytest.approx(0.5)


def test_solver_rejects_bad_input():
    with pytest.raises(ValueError):
        dirichlet_solve(C5, set(), 2)
    with pytest.raises(ValueError):
        dirichlet_solve(C5, {2}, 2)
    with pytest.raises(ValueError):
        FiniteGraph([[1], [0], []])


def test_solver_matches_dense_solve():
    rng = np.random.default_rng(5)
    for _ in range(40):
        n = int(rng.integers(3, 61))
        g = random_connected_graph(rng, n)
        one = int(rng.integers(n))
        others = [v for v in range(n) if v != one]
        zero = set(rng.choice(others, size=int(rng.integers(1, len(others) + 1)), replace=False).tolist())
        f = DirichletSolver(g).solve(zero, one)
        assert np.abs(f.values - dense_solution(g, zero, one)).max() < 1e-8
        assert f.values.min() >= 0 and f.values.max() <= 1


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 12), st.data())
def test_maximum_principle_on_cycles(n, data):
    g = FiniteGraph.cycle(n)
    one = data.draw(st.integers(0, n - 1))
    zero = data.draw(st.sets(st.integers(0, n - 1).filter(lambda v: v != one), min_size=1))
    f = dirichlet_solve(g, zero, one)
    assert np.all((0 <= f.values) & (f.values <= 1))
    assert all(f[v] == 0 for v in zero) and f[one] == 1


def test_torus_field_symmetry():
    params = TorusParams(4, 2)
    g = TorusGraph(params)
    f = dirichlet_solve(g, {0}, 2)  # target (2, 0)
    # reflection y -> -y fixes both boundary points
    for x in range(4):
        for y in range(4):
            assert f[x + 4 * y] == pytest.approx(f[x + 4 * ((-y) % 4)], abs=1e-9)


def test_step_probability_examples():
    f = dirichlet_solve(C5, {0}, 2)
    nbrs, probs = transition_probabilities(f, C5, 0)
    assert dict(zip(nbrs, probs)) == pytest.approx({1: 3 / 5, 4: 2 / 5})
    f = dirichlet_solve(FiniteGraph.path(3), {0}, 2)
    assert all(laplacian_step(f, FiniteGraph.path(3), 0, 1.0, SeedSpec(s)) == 1 for s in range(20))


def test_large_alpha_concentrates_on_max_neighbour():
    f = dirichlet_solve(C5, {0}, 2)
    nbrs, probs = transition_probabilities(f, C5, 0, alpha=8)
    p1 = dict(zip(nbrs, probs))[1]
    assert p1 == pytest.approx(1 / (1 + (2 / 3) ** 8))
    assert p1 > 0.95
    rng = SeedSpec(3).generator()
    hits = sum(laplacian_step(f, C5, 0, 8, rng) == 1 for _ in range(10**4))
    assert abs(hits / 10**4 - p1) < 0.01


def test_alpha_validation():
    f = dirichlet_solve(C5, {0}, 2)
    for bad in (0, -1, float("inf"), float("nan")):
        with pytest.raises(ValueError):
            transition_probabilities(f, C5, 0, alpha=bad)


def test_walk_examples():
    g = FiniteGraph.path(3)
    assert laplacian_walk(g, 0, 2, rng=SeedSpec(1)) == (0, 1, 2)
    with pytest.raises(ValueError):
        laplacian_walk(g, 1, 1)


def test_walk_frequencies_c4_c5():
    rng = SeedSpec(11).generator()
    c4 = LaplacianWalkSampler(FiniteGraph.cycle(4), 0, 2).counts(10**5, rng)
    assert set(c4) == {(0, 1, 2), (0, 3, 2)}
    assert abs(c4[(0, 1, 2)] / 10**5 - 0.5) < 0.01
    c5 = LaplacianWalkSampler(C5, 0, 2).counts(10**5, rng)
    assert set(c5) == {(0, 1, 2), (0, 4, 3, 2)}
    assert abs(c5[(0, 1, 2)] / 10**5 - 0.6) < 0.01


def test_sampler_reproduces_laplacian_walk():
    g = FiniteGraph.from_edges([(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (3, 4), (4, 5), (5, 1)])
    sampler = LaplacianWalkSampler(g, 0, 4, alpha=1.5)
    a, b = SeedSpec(8).generator(), SeedSpec(8).generator()
    cache = {}
    for _ in range(300):
        assert sampler.sample(a) == laplacian_walk(g, 0, 4, alpha=1.5, rng=b, cache=cache)


def test_walks_are_simple_paths_ending_at_target():
    params = TorusParams(4, 2)
    g = TorusGraph(params)
    rng = SeedSpec(2).generator()
    for _ in range(20):
        p = laplacian_walk(g, 0, 10, rng=rng)
        assert p[0] == 0 and p[-1] == 10 and len(set(p)) == len(p)
        assert all(g.adjacent(u, v) for u, v in zip(p, p[1:]))


def test_pmf_examples():
    p = complete_graph_pmf(3)
    assert p[2:] == pytest.approx([1 / 3, 4 / 9, 2 / 9], abs=1e-15)
    assert complete_graph_pmf(1)[2] == 1.0
    for n in (1, 2, 5, 50, 1000, 10**5):
        p = complete_graph_pmf(n)
        assert len(p) == n + 2 and np.all(p >= 0)
        assert abs(p.sum() - 1) < 1e-12
    for n in (2, 3, 10, 500):
        assert abs(complete_graph_exact_pmf(n).sum() - 1) < 1e-12


def test_limit_cdf():
    assert complete_graph_limit_cdf(0) == 0.0
    assert complete_graph_limit_cdf(50) == 1.0
    t = np.linspace(0, 10, 200001)
    density = t * np.exp(-t * t / 2)
    assert np.trapezoid(t * density, t) == pytest.approx(LIMIT_MEAN, abs=1e-8)
    assert LIMIT_MEAN == pytest.approx(1.2533, abs=1e-4)
    with pytest.raises(ValueError):
        complete_graph_limit_cdf(-1)


def test_pmf_mean_approaches_limit():
    n = 10**6
    p = complete_graph_pmf(n)
    mean = (np.arange(n + 2) * p).sum() / math.sqrt(n)
    assert mean == pytest.approx(LIMIT_MEAN, abs=2e-3)


def test_hazard_sampler_alpha_one_matches_pmf():
    n, count = 100, 10**5
    lengths = sample_alpha_lengths(n, 1.0, count, SeedSpec(21))
    emp = np.bincount(lengths, minlength=n + 2) / count
    assert tv_distance(emp, complete_graph_pmf(n)) < 0.01


def test_hazard_sampler_small_cases():
    rng = SeedSpec(4).generator()
    assert all(complete_graph_alpha_length(2, a, rng, rooted=False) == 2 for a in (0.5, 1, 3) for _ in range(50))
    with pytest.raises(ValueError):
        complete_graph_alpha_length(1, 1.0, rng)
    # non-rooted alpha = 1 against the exact two-distinct-vertex law
    lengths = sample_alpha_lengths(30, 1.0, 5 * 10**4, rng, rooted=False)
    emp = np.bincount(lengths, minlength=31) / lengths.size
    assert tv_distance(emp, complete_graph_exact_pmf(30)) < 0.02


def test_hazard_sampler_deterministic():
    a = sample_alpha_lengths(1000, 2.0, 100, SeedSpec(6, 1))
    b = sample_alpha_lengths(1000, 2.0, 100, SeedSpec(6, 1))
    assert np.array_equal(a, b)


def test_pmf_matches_walk_and_erasure_on_complete_graph():
    n, samples = 50, 10**6
    rng = SeedSpec(71).generator()
    counts = Counter(lerw_length_complete(n, rng, rooted=False, target="uniform").length + 1
                     for _ in range(samples))
    emp = {k: c / samples for k, c in counts.items()}
    pmf = complete_graph_pmf(n)
    assert tv_distance(emp, {k: pmf[k] for k in range(2, n + 2)}) < 0.005


def test_rooted_walk_matches_pmf():
    n, samples = 20, 2 * 10**5
    rng = SeedSpec(73).generator()
    counts = Counter(lerw_length_complete(n, rng, rooted=True).length for _ in range(samples))
    emp = {k: c / samples for k, c in counts.items()}
    pmf = complete_graph_pmf(n)
    assert tv_distance(emp, {k: pmf[k] for k in range(2, n + 2)}) < 0.01
