import io
import logging
from fractions import Fraction

import numpy as np
import pytest

from lerwtorus import _kernels
from lerwtorus.erasure import loop_erase
from lerwtorus.graphs import CompleteGraph, FiniteGraph
from lerwtorus.laplacian import LaplacianWalkSampler, complete_graph_exact_pmf, complete_graph_pmf
from lerwtorus.oracle import (
    RATIONAL_LIMIT, PathDistribution, complete_graph_convention_check, exact_lerw_distribution,
    mc_lerw_distribution, reference_loop_erase,
)
from lerwtorus.scaling import tv_distance
from lerwtorus.walker import SeedSpec

C5 = FiniteGraph.cycle(5)


def test_exact_examples():
    assert exact_lerw_distribution(FiniteGraph.path(3), 0, 2) == {(0, 1, 2): 1}
    assert exact_lerw_distribution(FiniteGraph.cycle(4), 0, 2) == {
        (0, 1, 2): Fraction(1, 2), (0, 3, 2): Fraction(1, 2)}
    assert exact_lerw_distribution(C5, 0, 2) == {(0, 1, 2): Fraction(3, 5), (0, 4, 3, 2): Fraction(2, 5)}


def test_exact_distribution_invariants():
    g = FiniteGraph.from_edges([(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (3, 4), (4, 5), (5, 1), (5, 6)])
    dist = exact_lerw_distribution(g, 6, 3)
    assert sum(dist.values()) == 1
    for path, p in dist.items():
        assert p > 0 and path[0] == 6 and path[-1] == 3 and len(set(path)) == len(path)
        assert all(g.adjacent(u, v) for u, v in zip(path, path[1:]))


def test_k4_length_marginal():
    dist = exact_lerw_distribution(CompleteGraph(4), 0, 3)
    # P(#LE = k) = k/n prod_{j=2}^{k-1} (1 - j/n) for distinct endpoints
    assert dist.length_marginal() == {2: Fraction(1, 2), 3: Fraction(3, 8), 4: Fraction(1, 8)}
    exact = complete_graph_exact_pmf(4)
    assert all(abs(float(p) - exact[k]) < 1e-15 for k, p in dist.length_marginal().items())
    assert len(dist) == 1 + 2 + 2


def test_exact_rejects_bad_input():
    with pytest.raises(ValueError):
        exact_lerw_distribution(C5, 1, 1)
    with pytest.raises(OverflowError, match="reached"):
        exact_lerw_distribution(CompleteGraph(7), 0, 6, cap=10)
    with pytest.raises(TypeError):
        exact_lerw_distribution(object(), 0, 1)


def test_high_precision_above_rational_limit(caplog):
    g = FiniteGraph.cycle(RATIONAL_LIMIT + 1)
    with caplog.at_level(logging.INFO, logger="lerwtorus.oracle"):
        dist = exact_lerw_distribution(g, 0, 3)
    assert "switching" in caplog.text
    # gambler's ruin on the cycle: the short arc is taken with probability (n - 3) / n
    short = dist[(0, 1, 2, 3)]
    assert not isinstance(short, Fraction)
    assert abs(float(short) - (g.num_vertices - 3) / g.num_vertices) < 1e-12
    assert abs(float(sum(dist.values())) - 1) < 1e-10


def test_dump_format():
    buf = io.StringIO()
    exact_lerw_distribution(C5, 0, 2).dump(buf)
    assert buf.getvalue() == "0.59999999999999998\t0 1 2\n0.40000000000000002\t0 4 3 2\n"


def test_check_normalized():
    PathDistribution({(0, 1): 0.5, (0, 2, 1): 0.5}).check_normalized()
    with pytest.raises(ValueError):
        PathDistribution({(0, 1): 0.6}).check_normalized()
    with pytest.raises(ValueError):
        PathDistribution({(0, 1): 1.5, (0, 2, 1): -0.5}).check_normalized()


def test_mc_examples():
    dist = mc_lerw_distribution(FiniteGraph.path(3), 0, 2, 1000, SeedSpec(1))
    assert dist == {(0, 1, 2): 1.0}
    assert dist.counts[(0, 1, 2)] == 1000
    with pytest.raises(ValueError):
        mc_lerw_distribution(C5, 0, 2, 0, SeedSpec(1))


def test_mc_matches_exact_on_c5_and_across_seeds():
    exact = exact_lerw_distribution(C5, 0, 2).as_float()
    a = mc_lerw_distribution(C5, 0, 2, 10**6, SeedSpec(101))
    b = mc_lerw_distribution(C5, 0, 2, 10**6, SeedSpec(102))
    assert tv_distance(a, exact) < 0.01
    assert tv_distance(a, b) < 0.01
    assert sum(a.counts.values()) == 10**6


def test_mc_batch_equals_walk_then_erase():
    # the batch kernel's paths equal loop_erase of the walk traced with the same uniforms
    g = FiniteGraph.from_edges([(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (3, 4)])
    indptr, indices = g.csr()
    rows = _kernels.lerw_graph_batch(SeedSpec(5).generator(), indptr, indices, 0, 4, 200)
    rng = SeedSpec(5).generator()
    for row in rows.tolist():
        walk = [0]
        while walk[-1] != 4:
            walk.append(g.step_from(walk[-1], rng.random()))
        assert tuple(v for v in row if v >= 0) == loop_erase(walk)


def test_three_way_agreement_k4():
    g = FiniteGraph.complete(4)
    exact = exact_lerw_distribution(g, 0, 2).as_float()
    mc = mc_lerw_distribution(g, 0, 2, 2 * 10**5, SeedSpec(9))
    lap = LaplacianWalkSampler(g, 0, 2).counts(2 * 10**5, SeedSpec(10).generator())
    lap = {p: c / 2e5 for p, c in lap.items()}
    assert tv_distance(exact, mc) < 0.01
    assert tv_distance(exact, lap) < 0.01
    assert tv_distance(mc, lap) < 0.01


def test_reference_examples():
    assert reference_loop_erase((0, 1, 2, 1, 3)) == (0, 1, 3)
    assert reference_loop_erase((4, 5, 6)) == (4, 5, 6)
    assert reference_loop_erase((0, 1, 0)) == (0,)
    with pytest.raises(ValueError):
        reference_loop_erase(())


def test_reference_agrees_on_random_walks():
    z = np.zeros(3, np.int64)
    rng = SeedSpec(13).generator()
    for length in rng.integers(0, 400, 10**4):
        w = _kernels.walk_torus_fixed(rng, 6, 3, z, int(length)).tolist()
        assert reference_loop_erase(w) == loop_erase(w)


def test_complete_graph_convention():
    report = complete_graph_convention_check(range(2, 9))
    assert report["matching"] == ["rooted"]
    assert report["max_abs_diff"]["rooted"] <= 1e-9
    assert report["max_abs_diff"]["distinct"] > 1e-3 and report["max_abs_diff"]["non_target"] > 1e-3


def test_rooted_convention_by_hand_k3():
    # b fixed, e uniform on all 3 vertices, k = #LE + 1
    pmf = complete_graph_pmf(3)
    lengths = {}
    for e in range(3):
        if e == 0:
            marginal = {1: Fraction(1)}
        else:
            marginal = exact_lerw_distribution(CompleteGraph(3), 0, e).length_marginal()
        for k, p in marginal.items():
            lengths[k + 1] = lengths.get(k + 1, 0) + Fraction(1, 3) * p
    assert {k: float(p) for k, p in lengths.items()} == pytest.approx({2: 1 / 3, 3: 4 / 9, 4: 2 / 9})
    assert all(abs(float(lengths[k]) - pmf[k]) < 1e-12 for k in lengths)
