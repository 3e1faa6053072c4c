"""Human-readable tables and SVG plots from a persisted record."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterator

from lerwtorus.harness.runner import RunRecord, load_record


def _scalar(v) -> bool:
    return v is None or isinstance(v, (int, float, str, bool))


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "pass" if v else "FAIL"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _flat_row(row: dict) -> dict:
    out = {}
    for k, v in row.items():
        if _scalar(v):
            out[k] = v
        elif isinstance(v, dict) and all(_scalar(x) for x in v.values()):
            out.update({f"{k}.{kk}": vv for kk, vv in v.items()})
    return out


def format_table(rows: list[dict], title: str | None = None) -> str:
    flat = [_flat_row(r) for r in rows]
    columns: list[str] = []
    for r in flat:
        columns += [c for c in r if c not in columns]
    lines = [title] if title else []
    if not columns:
        lines.append("(empty table)")
        return "\n".join(lines)
    cells = [[_fmt(r.get(c)) for c in columns] for r in flat]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    lines.append("  ".join(c.rjust(w) for c, w in zip(columns, widths)))
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(x.rjust(w) for x, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _walk(obj, path: str = "") -> Iterator[tuple[str, object]]:
    yield path, obj
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _walk(v, f"{path}.{k}" if path else str(k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _walk(v, f"{path}[{i}]")


def find_curves(summary: dict) -> list[tuple[str, dict]]:
    """Survival-style curves: dicts with parallel ``thresholds`` and ``estimates``."""
    return [(p, v) for p, v in _walk(summary)
            if isinstance(v, dict) and isinstance(v.get("thresholds"), list)
            and isinstance(v.get("estimates"), list)]


def find_fits(summary: dict) -> list[tuple[str, dict]]:
    """Log-log fits: dicts with ``rows`` of (n, mean) points and a ``fit``."""
    return [(p, v) for p, v in _walk(summary)
            if isinstance(v, dict) and isinstance(v.get("fit"), dict) and isinstance(v.get("rows"), list)
            and all(isinstance(r, dict) and "n" in r and "mean" in r for r in v["rows"])]


def render(record: RunRecord | None) -> str:
    if record is None:
        return "(no records)\n(empty table)"
    out = [f"experiment   {record.experiment}",
           f"config hash  {record.config_hash}",
           f"version      {record.software_version}   rng {record.rng_algorithm}",
           f"replicas     {len(record.replicas)}" + ("" if record.complete else "   (incomplete)")]
    summary = record.summary or {}
    if not summary:
        out.append("(empty table)")
        return "\n".join(out)
    for key, val in summary.items():
        if key == "checks":
            continue
        if isinstance(val, list) and val and all(isinstance(r, dict) for r in val):
            out += ["", format_table(val, f"[{key}]")]
        elif isinstance(val, dict) and all(_scalar(v) for v in val.values()):
            out += ["", format_table([val], f"[{key}]")]
        elif _scalar(val):
            out.append(f"{key}: {_fmt(val)}")
    for path, fit in find_fits(summary):
        if not path:
            continue  # top-level rows and fit are already printed
        out += ["", format_table(fit["rows"], f"[fit {path or 'summary'}]"),
                format_table([fit["fit"]])]
    for path, curve in find_curves(summary):
        rows = [{"lambda": t, "estimate": e,
                 "lower": curve.get("lower", [None] * len(curve["thresholds"]))[i],
                 "upper": curve.get("upper", [None] * len(curve["thresholds"]))[i]}
                for i, (t, e) in enumerate(zip(curve["thresholds"], curve["estimates"]))]
        out += ["", format_table(rows, f"[curve {path}]")]
    checks = summary.get("checks") or {}
    out += ["", format_table([{"check": k, "result": v} for k, v in checks.items()], "[checks]")]
    return "\n".join(out)


def _slug(path: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", path).strip("_") or "summary"


def render_svg(record: RunRecord, directory: str | Path) -> list[Path]:
    """One SVG per survival curve and per log-log fit."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    summary = record.summary or {}
    written = []
    for path, curve in find_curves(summary):
        lam = np.asarray(curve["thresholds"], float)
        est = np.asarray(curve["estimates"], float)
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.step(lam, est, where="post", label="estimate")
        if curve.get("lower") and curve.get("upper"):
            ax.fill_between(lam, curve["lower"], curve["upper"], step="post", alpha=0.3, label="95% interval")
        if np.any(est > 0):
            ax.set_yscale("log")
        ax.set_xlabel("lambda")
        ax.set_ylabel("survival")
        ax.set_title(path, fontsize=8)
        ax.legend(fontsize=7)
        target = directory / f"{record.experiment}_{_slug(path)}.svg"
        fig.savefig(target, format="svg")
        plt.close(fig)
        written.append(target)
    for path, block in find_fits(summary):
        n = np.asarray([r["n"] for r in block["rows"]], float)
        mean = np.asarray([r["mean"] for r in block["rows"]], float)
        fit = block["fit"]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.loglog(n, mean, "o", label="mean")
        grid = np.geomspace(n.min(), n.max(), 50)
        ax.loglog(grid, np.exp(fit["intercept"]) * grid ** fit["slope"], "-",
                  label=f"slope {fit['slope']:.3f}, R2 {fit['r_squared']:.3f}")
        ax.set_xlabel("N")
        ax.set_ylabel("mean")
        ax.set_title(path or record.experiment, fontsize=8)
        ax.legend(fontsize=7)
        target = directory / f"{record.experiment}_fit_{_slug(path)}.svg"
        fig.savefig(target, format="svg")
        plt.close(fig)
        written.append(target)
    return written


def report(path: str | Path, svg_dir: str | Path | None = None) -> tuple[str, list[Path]]:
    """Table text for the record at ``path`` and any SVG files written."""
    record, _ = load_record(path, strict=True)
    text = render(record)
    files = render_svg(record, svg_dir) if svg_dir is not None and record is not None else []
    return text, files
