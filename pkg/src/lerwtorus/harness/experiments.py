"""Canned experiments.

Every experiment expands a config into an ordered list of replica tasks,
runs one replica from ``(task, SeedSpec(seed, index))`` and reduces the
replica observables, in index order, to a summary.  Summaries carry a
``checks`` mapping from check name to True/False, or None when the band
that drives the check is absent from the config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from lerwtorus.graphs import FiniteGraph
from lerwtorus.harness.config import ExperimentConfig
from lerwtorus.lattice import TorusParams, decode
from lerwtorus.laplacian import (
    LIMIT_MEAN, LaplacianWalkSampler, complete_graph_alpha_length, complete_graph_limit_cdf,
    complete_graph_pmf,
)
from lerwtorus.observables import (
    annulus_replica, ball_hit_replica, cut_time_length, cut_time_replica, exit_replica,
    hitting_walk_length, lerw_length_complete, lerw_length_torus, local_count_replica,
    random_starts, summarize_exit, summarize_f_property, summarize_hits, summarize_stopping_times,
)
from lerwtorus.oracle import complete_graph_convention_check, exact_lerw_distribution, mc_lerw_distribution
from lerwtorus.scaling import exponent_fit, ks_distance, line_fit, survival, tv_distance, wilson_interval
from lerwtorus.walker import SeedSpec


@dataclass(frozen=True)
class Experiment:
    name: str
    tasks: Callable[[ExperimentConfig], list[dict]]
    replica: Callable[[ExperimentConfig, dict, SeedSpec], dict]
    summarize: Callable[[ExperimentConfig, list[dict], list[dict]], dict]


def _check(value: bool, *bands) -> bool | None:
    return None if any(b is None for b in bands) else bool(value)


def _group(tasks, obs, key) -> dict:
    out: dict = {}
    for task, o in zip(tasks, obs):
        out.setdefault(key(task), []).append(o)
    return out


def _mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, float)
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else float("nan")
    return float(x.mean()), se


# ---------------------------------------------------------------- torus LERW

def _per_side(cfg: ExperimentConfig) -> list[dict]:
    return [{"n": n} for n in cfg.n_list for _ in range(cfg.replicas)]


def _lerw_torus_replica(cfg: ExperimentConfig, task: dict, seed: SeedSpec) -> dict:
    params = TorusParams(task["n"], cfg.d)
    rng = seed.generator()
    b = params.origin()
    e = decode(int(rng.integers(params.volume)), params) if cfg.target == "uniform" else params.antipode()
    if e == b:
        return {"length": 1, "steps": 0, "truncated": False}
    s = lerw_length_torus(params, b, e, rng, cap=cfg.cap_factor * params.volume)
    return {"length": s.length, "steps": s.steps, "truncated": s.truncated}


def _lengths(obs) -> tuple[np.ndarray, int]:
    kept = [o["length"] for o in obs if not o["truncated"]]
    return np.asarray(kept, float), len(obs) - len(kept)


def _mean_rows(cfg, tasks, obs) -> list[dict]:
    groups = _group(tasks, obs, lambda t: t["n"])
    rows = []
    for n in cfg.n_list:
        x, truncated = _lengths(groups[n])
        mean, se = _mean_se(x)
        rows.append({"n": n, "replicas": len(groups[n]), "truncated": truncated, "mean": mean, "se": se})
    return rows


def _mean_summary(cfg, tasks, obs) -> dict:
    rows = _mean_rows(cfg, tasks, obs)
    fit = exponent_fit([(r["n"], r["mean"]) for r in rows]) if len(rows) >= 2 else None
    lo, hi, r2 = cfg.band("slope_lo"), cfg.band("slope_hi"), cfg.band("r2_min")
    checks = {}
    if fit is not None:
        checks["slope_in_band"] = _check(lo is not None and hi is not None and lo <= fit.slope <= hi, lo, hi)
        checks["r_squared"] = _check(r2 is not None and fit.r_squared > r2, r2)
    return {"rows": rows, "fit": fit.to_dict() if fit else None, "checks": checks,
            "target_slope": cfg.d / 2}


def _tail_summary(cfg, tasks, obs) -> dict:
    groups = _group(tasks, obs, lambda t: t["n"])
    out = {"sides": [], "checks": {}}
    r2_band, lower_band = cfg.band("tail_r2"), cfg.band("lower")
    for n in cfg.n_list:
        x, truncated = _lengths(groups[n])
        median = float(np.median(x))
        curve = survival(x, median, cfg.lambda_grid)
        pos = curve.estimates > 0
        fit = line_fit(curve.thresholds[pos], np.log(curve.estimates[pos])) if pos.sum() >= 2 else None
        scale = float(n) ** (cfg.d / 2)
        below = np.array([(x <= lam * scale).sum() for lam in cfg.lower_grid])
        p_low = below / x.size
        lo, hi = wilson_interval(below, x.size)
        lam = np.asarray(cfg.lower_grid)
        shape = lam * np.log(1 / lam)
        ratio = p_low / shape
        increasing = bool(np.all(np.diff(p_low) > 0))
        bounded = lower_band is not None and bool(np.all(p_low <= lower_band * shape))
        side = {
            "n": n, "replicas": len(groups[n]), "truncated": truncated, "median": median,
            "survival": curve.to_dict(), "tail_fit": fit.to_dict() if fit else None,
            "lower": {"thresholds": lam.tolist(), "scale": scale, "estimates": p_low.tolist(),
                      "lower": lo.tolist(), "upper": hi.tolist(), "ratio_to_shape": ratio.tolist(),
                      "band": lower_band},
        }
        out["sides"].append(side)
        tag = f"n{n}"
        out["checks"][f"{tag}_tail_r2"] = _check(fit is not None and r2_band is not None
                                                 and fit.r_squared > r2_band, r2_band)
        out["checks"][f"{tag}_tail_slope_negative"] = fit is not None and fit.slope < 0
        out["checks"][f"{tag}_lower_increasing"] = increasing
        out["checks"][f"{tag}_lower_bounded"] = _check(bounded, lower_band)
    return out


def _d4_summary(cfg, tasks, obs) -> dict:
    """Exploratory: mean #LE / N^2 against log N, fitted as C (log N)^a."""
    rows = _mean_rows(cfg, tasks, obs)
    for r in rows:
        r["normalized"] = r["mean"] / r["n"] ** 2
        r["log_n"] = math.log(r["n"])
    fit = None
    if len(rows) >= 2 and all(r["normalized"] > 0 for r in rows):
        fit = exponent_fit([(r["log_n"], r["normalized"]) for r in rows]).to_dict()
    return {"rows": rows, "log_exponent_fit": fit, "conjectured_exponent": 1 / 6, "checks": {}}


# ---------------------------------------------------------------- complete graph

def _complete_replica(cfg, task, seed) -> dict:
    s = lerw_length_complete(task["n"], seed, rooted=False, target="uniform",
                             cap=cfg.cap_factor * task["n"])
    return {"le_length": s.length, "steps": s.steps, "truncated": s.truncated}


def _tv_noise_floor(pmf: np.ndarray, samples: int) -> float:
    """Expected TV of an unbiased empirical pmf from ``samples`` draws (normal approximation)."""
    p = pmf[pmf > 0]
    return float(0.5 * np.sqrt(2 * p * (1 - p) / (math.pi * samples)).sum())


def _complete_summary(cfg, tasks, obs) -> dict:
    groups = _group(tasks, obs, lambda t: t["n"])
    rows, checks = [], {}
    tv_band, ks_band = cfg.band("tv"), cfg.band("ks")
    for n in cfg.n_list:
        le = np.asarray([o["le_length"] for o in groups[n] if not o["truncated"]], np.int64)
        pmf = complete_graph_pmf(n)
        emp = np.bincount(le + 1, minlength=pmf.size) / le.size
        tv = tv_distance(emp, pmf)
        ks = ks_distance(le / math.sqrt(n), complete_graph_limit_cdf)
        rows.append({"n": n, "samples": int(le.size), "tv": tv, "tv_noise_floor": _tv_noise_floor(pmf, le.size),
                     "ks": ks, "mean_scaled": float(le.mean() / math.sqrt(n)), "limit_mean": LIMIT_MEAN})
        checks[f"n{n}_tv"] = _check(tv_band is not None and tv < tv_band, tv_band)
        checks[f"n{n}_ks"] = _check(ks_band is not None and ks < ks_band, ks_band)
    return {"rows": rows, "checks": checks}


def _alpha_tasks(cfg) -> list[dict]:
    return [{"alpha": a, "n": n} for a in cfg.alpha for n in cfg.n_list for _ in range(cfg.replicas)]


def _alpha_replica(cfg, task, seed) -> dict:
    return {"length": complete_graph_alpha_length(task["n"], task["alpha"], seed.generator())}


def _alpha_summary(cfg, tasks, obs) -> dict:
    groups = _group(tasks, obs, lambda t: (t["alpha"], t["n"]))
    tol = cfg.band("alpha_tol")
    fits, checks = [], {}
    for a in cfg.alpha:
        rows = []
        for n in cfg.n_list:
            mean, se = _mean_se([o["length"] for o in groups[(a, n)]])
            rows.append({"n": n, "mean": mean, "se": se})
        fit = exponent_fit([(r["n"], r["mean"]) for r in rows]) if len(rows) >= 2 else None
        target = 1 / (1 + a)
        fits.append({"alpha": a, "target": target, "rows": rows, "fit": fit.to_dict() if fit else None})
        if fit is not None:
            checks[f"alpha{a:g}_slope"] = _check(tol is not None and abs(fit.slope - target) <= tol, tol)
    return {"fits": fits, "checks": checks}


# ---------------------------------------------------------------- cut times

def _cut_replica(cfg, task, seed) -> dict:
    params = TorusParams(task["n"], cfg.d)
    return cut_time_replica(params, cut_time_length(params, cfg.epsilon), seed)


def _cut_summary(cfg, tasks, obs) -> dict:
    groups = _group(tasks, obs, lambda t: t["n"])
    rows = []
    for n in cfg.n_list:
        length = groups[n][0]["L"]
        x = np.asarray([o["X"] for o in groups[n]], float)
        mean, se = _mean_se(x / length)
        rows.append({"n": n, "L": length, "replicas": int(x.size), "mean_density": mean, "se": se,
                     "var_ratio": float(x.var(ddof=1) / length**2)})
    var_band = cfg.band("var_factor")
    limit = None if var_band is None else var_band * cfg.epsilon**2
    non_decaying = all(b["mean_density"] - a["mean_density"] >= -2 * math.hypot(a["se"], b["se"])
                       for a, b in zip(rows, rows[1:]))
    checks = {
        "density_positive": all(r["mean_density"] > 0 for r in rows),
        "density_non_decaying": non_decaying,
        "variance_bound": _check(limit is not None and all(r["var_ratio"] < limit for r in rows), var_band),
    }
    # diagnostic only: density = limit + a / sqrt(L) extrapolated to long walks
    limit_fit = None
    if len(rows) >= 2:
        fit = line_fit([r["L"] ** -0.5 for r in rows], [r["mean_density"] for r in rows])
        limit_fit = {"limit": fit.intercept, "coefficient": fit.slope, "r_squared": fit.r_squared}
    return {"rows": rows, "variance_limit": limit, "density_limit_fit": limit_fit, "checks": checks}


# ---------------------------------------------------------------- local counts

def _n_r_tasks(cfg) -> list[dict]:
    return [{"n": n, "r": r} for n in cfg.n_list for r in cfg.r for _ in range(cfg.replicas)]


def _f_replica(cfg, task, seed) -> dict:
    params = TorusParams(task["n"], cfg.d)
    return {"counts": local_count_replica(params, params.origin(), Fraction(task["r"]), cfg.max_i, seed)}


def _f_summary(cfg, tasks, obs) -> dict:
    groups = _group(tasks, obs, lambda t: (t["n"], t["r"]))
    cells = []
    for n in cfg.n_list:
        for r in cfg.r:
            table = summarize_f_property([o["counts"] for o in groups[(n, r)]], Fraction(r), cfg.d,
                                         cfg.lambda_grid, cfg.epsilon)
            cells.append({"n": n, "r": r, **table.to_dict()})
    return {"cells": cells, "checks": {}}


# ---------------------------------------------------------------- stopping times

def _stopping_replica(cfg, task, seed) -> dict:
    params = TorusParams(task["n"], cfg.d)
    return {"even_times": annulus_replica(params, params.origin(), Fraction(task["r"]), cfg.cycles, seed)}


def _tail_shape(curve) -> dict | None:
    """Linear and quadratic fits of log-survival in lambda on the nonzero points.

    Points are weighted by 1 / Var(log p_hat) = n p / (1 - p), so the sparse
    far tail does not dominate the curvature estimate.
    """
    pos = (curve.estimates > 0) & (curve.estimates < 1)
    lam, p = curve.thresholds[pos], curve.estimates[pos]
    if lam.size < 3:
        return None
    logs = np.log(p)
    w = np.sqrt(curve.n * p / (1 - p))
    lin = np.polyfit(lam, logs, 1, w=w)
    quad = np.polyfit(lam, logs, 2, w=w)
    return {"linear": [float(c) for c in lin], "quadratic": [float(c) for c in quad],
            "quadratic_unweighted": [float(c) for c in np.polyfit(lam, logs, 2)],
            "last_residual": float(logs[-1] - np.polyval(lin, lam[-1]))}


def _stopping_summary(cfg, tasks, obs) -> dict:
    groups = _group(tasks, obs, lambda t: (t["n"], t["r"]))
    tol = cfg.band("ratio_tol")
    cells, checks = [], {}
    for n in cfg.n_list:
        by_r = {}
        for r in cfg.r:
            est = summarize_stopping_times([o["even_times"] for o in groups[(n, r)]], Fraction(r),
                                           cfg.cycles, cfg.lambda_grid)
            shape = _tail_shape(est.tail)
            by_r[r] = est
            cells.append({"n": n, "r": r, **est.to_dict(), "tail_shape": shape})
            checks[f"n{n}_r{r}_tail_superexponential"] = shape is not None and shape["quadratic"][0] < 0
        radii = sorted(cfg.r, key=Fraction)
        for r1, r2 in zip(radii, radii[1:]):
            ratio = by_r[r2].mean / by_r[r1].mean
            target = float(Fraction(r2) / Fraction(r1)) ** (2 - cfg.d)
            cells.append({"n": n, "ratio": [r1, r2], "value": ratio, "target": target,
                          "relative_error": abs(ratio / target - 1)})
            checks[f"n{n}_ratio_r{r2}_r{r1}"] = _check(tol is not None and abs(ratio / target - 1) <= tol, tol)
    return {"cells": cells, "checks": checks}


# ---------------------------------------------------------------- appendix checks

def _appendix_tasks(cfg) -> list[dict]:
    tasks = []
    for r in cfg.exit_radii:
        left = cfg.exit_samples
        while left > 0:
            size = min(cfg.exit_chunk, left)
            tasks.append({"part": "exit", "r": r, "samples": size})
            left -= size
    n, r = cfg.n_list[0], cfg.r[0]
    params = TorusParams(n, cfg.d)
    for start in random_starts(params, cfg.starts, cfg.seed):
        tasks += [{"part": "hit", "n": n, "r": r, "start": list(start)}] * cfg.replicas
    return tasks


def _appendix_replica(cfg, task, seed) -> dict:
    if task["part"] == "exit":
        return exit_replica(cfg.exit_dim, Fraction(task["r"]), task["samples"], seed)
    params = TorusParams(task["n"], cfg.d)
    length = hitting_walk_length(params, Fraction(task["r"]), cfg.c1)
    return {"first_hit": ball_hit_replica(params, tuple(task["start"]), Fraction(task["r"]), length, seed)}


def _appendix_summary(cfg, tasks, obs) -> dict:
    exit_rows = _group([t for t in tasks if t["part"] == "exit"],
                       [o for t, o in zip(tasks, obs) if t["part"] == "exit"], lambda t: t["r"])
    exits = {}
    for r in cfg.exit_radii:
        half = math.floor(Fraction(r))
        exits[r] = summarize_exit(exit_rows[r], Fraction(r), (half,) + (0,) * (cfg.exit_dim - 1))
    tol, hit_min = cfg.band("exit_tol"), cfg.band("hit_min")
    checks, ratios = {}, []
    radii = sorted(cfg.exit_radii, key=Fraction)
    for r1, r2 in zip(radii, radii[1:]):
        ratio = exits[r2]["orbit_probability"] / exits[r1]["orbit_probability"]
        target = float(Fraction(r2) / Fraction(r1)) ** (1 - cfg.exit_dim)
        ratios.append({"radii": [r1, r2], "value": ratio, "target": target,
                       "relative_error": abs(ratio / target - 1)})
        checks[f"exit_ratio_r{r2}_r{r1}"] = _check(tol is not None and abs(ratio / target - 1) <= tol, tol)
    hit_pairs = [(t, o) for t, o in zip(tasks, obs) if t["part"] == "hit"]
    starts, rows = [], []
    for t, o in hit_pairs:
        if not starts or list(starts[-1]) != t["start"] or len(rows[-1]) == cfg.replicas:
            starts.append(tuple(t["start"]))
            rows.append([])
        rows[-1].append(o["first_hit"])
    n, r = cfg.n_list[0], Fraction(cfg.r[0])
    hits = summarize_hits(starts, rows, r, hitting_walk_length(TorusParams(n, cfg.d), r, cfg.c1))
    checks["hit_probability"] = _check(hit_min is not None and min(hits.estimates) >= hit_min, hit_min)
    return {"exit": {"dim": cfg.exit_dim, "radii": exits, "ratios": ratios},
            "hitting": {"n": n, "d": cfg.d, "c1": cfg.c1, **hits.to_dict()}, "checks": checks}


# ---------------------------------------------------------------- oracle

ORACLE_INSTANCES = (("C5", 0, 2), ("K4", 0, 1))


def named_graph(name: str) -> FiniteGraph:
    """``C<n>`` cycle, ``K<n>`` complete graph, ``P<n>`` path."""
    kinds = {"C": FiniteGraph.cycle, "K": FiniteGraph.complete, "P": FiniteGraph.path}
    try:
        return kinds[name[0]](int(name[1:]))
    except (KeyError, ValueError):
        raise ValueError(f"unknown graph name {name!r}") from None


def _path_key(path) -> str:
    return "-".join(map(str, path))


def _oracle_tasks(cfg) -> list[dict]:
    return [{"graph": g, "b": b, "e": e} for g, b, e in ORACLE_INSTANCES]


def _oracle_replica(cfg, task, seed) -> dict:
    """Exact law, walk-and-erase law and Laplacian-walk law on one graph.

    ``replicas`` is the number of samples per Monte Carlo law here.
    """
    g = named_graph(task["graph"])
    b, e = task["b"], task["e"]
    rng = seed.generator()
    exact = exact_lerw_distribution(g, b, e)
    exact.check_normalized()
    mc = mc_lerw_distribution(g, b, e, cfg.replicas, rng)
    lap = LaplacianWalkSampler(g, b, e).counts(cfg.replicas, rng)
    return {"exact": {_path_key(p): float(v) for p, v in sorted(exact.items())},
            "mc": {_path_key(p): c for p, c in sorted(mc.counts.items())},
            "laplacian": {_path_key(p): c for p, c in sorted(lap.items())}}


def _oracle_summary(cfg, tasks, obs) -> dict:
    tv_band = cfg.band("tv")
    rows, checks = [], {}
    for task, o in zip(tasks, obs):
        laws = {"exact": o["exact"],
                "mc": {k: c / cfg.replicas for k, c in o["mc"].items()},
                "laplacian": {k: c / cfg.replicas for k, c in o["laplacian"].items()}}
        pairs = {}
        for a, b in (("exact", "mc"), ("exact", "laplacian"), ("mc", "laplacian")):
            pairs[f"{a}_vs_{b}"] = tv_distance(laws[a], laws[b])
        rows.append({"graph": task["graph"], "b": task["b"], "e": task["e"], "tv": pairs})
        for name, tv in pairs.items():
            checks[f"{task['graph']}_{name}"] = _check(tv_band is not None and tv < tv_band, tv_band)
    conv = complete_graph_convention_check()
    checks["complete_graph_convention"] = conv["matching"] == ["rooted"] and \
        conv["max_abs_diff"]["rooted"] <= 1e-9
    return {"rows": rows, "convention": conv, "checks": checks}


EXPERIMENTS: dict[str, Experiment] = {e.name: e for e in (
    Experiment("lerw-torus-mean", _per_side, _lerw_torus_replica, _mean_summary),
    Experiment("lerw-torus-tail", _per_side, _lerw_torus_replica, _tail_summary),
    Experiment("d4-correction", _per_side, _lerw_torus_replica, _d4_summary),
    Experiment("complete-graph-law", _per_side, _complete_replica, _complete_summary),
    Experiment("alpha-laplacian", _alpha_tasks, _alpha_replica, _alpha_summary),
    Experiment("cut-times", _per_side, _cut_replica, _cut_summary),
    Experiment("f-property", _n_r_tasks, _f_replica, _f_summary),
    Experiment("stopping-times", _n_r_tasks, _stopping_replica, _stopping_summary),
    Experiment("appendix-checks", _appendix_tasks, _appendix_replica, _appendix_summary),
    Experiment("oracle-check", _oracle_tasks, _oracle_replica, _oracle_summary),
)}
