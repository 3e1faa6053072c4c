"""Replica execution and the persistent record.

A record is a line-delimited JSON file::

    {"record": "header", "config_hash": ..., "experiment": ..., "config": {...},
     "software_version": ..., "rng_algorithm": ..., "replica_count": ...}
    {"record": "replica", "index": 0, "task": {...}, "obs": {...}}
    ...
    {"record": "summary", "summary": {...}}

Replica lines appear in index order and the summary comes last.  Records
contain no wall-clock data, so an identical config reproduces an identical
file byte for byte; start/finish times go to ``<out>.times.json``.  A flat
``<out>.summary.csv`` (``key,value``) mirrors the scalar summary fields.

Re-running a config whose record already exists resumes after the last
complete replica line (a torn trailing line is dropped); a record whose
header hash differs is refused rather than overwritten.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from lerwtorus import RNG_ALGORITHM, __version__
from lerwtorus.harness.config import ConfigError, ExperimentConfig
from lerwtorus.harness.experiments import EXPERIMENTS
from lerwtorus.walker import SeedSpec

log = logging.getLogger(__name__)

FLUSH_EVERY = 256


class RecordError(OSError):
    """Unreadable or inconsistent record file."""


@dataclass
class RunRecord:
    config_hash: str
    experiment: str
    config: dict
    software_version: str
    rng_algorithm: str
    replicas: list[dict] = field(default_factory=list)
    summary: dict | None = None
    timestamps: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return self.summary is not None

    def observables(self) -> list[dict]:
        return [r["obs"] for r in self.replicas]


def _plain(x):
    """Numpy scalars to Python, non-finite floats to None, tuples to lists."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _line(obj: dict) -> str:
    return json.dumps(_plain(obj), separators=(",", ":"), allow_nan=False) + "\n"


def _header(cfg: ExperimentConfig, count: int) -> dict:
    return {"record": "header", "config_hash": cfg.hash(), "experiment": cfg.experiment,
            "config": cfg.identity(), "software_version": __version__,
            "rng_algorithm": RNG_ALGORITHM, "replica_count": count}


def _iter_lines(path: Path) -> Iterator[tuple[int, bytes]]:
    offset = 0
    with open(path, "rb") as fh:
        for raw in fh:
            yield offset, raw
            offset += len(raw)


def load_record(path: str | Path, strict: bool = True) -> tuple[RunRecord | None, int]:
    """Parse a record.

    Returns the record (None for an empty file) and the byte length of its
    valid prefix.  With ``strict`` any malformed line raises
    :class:`RecordError` naming its byte offset; otherwise parsing stops at
    a torn final line, which is what a crash mid-write leaves behind.
    """
    path = Path(path)
    record, good = None, 0
    lines = list(_iter_lines(path))
    for i, (offset, raw) in enumerate(lines):
        last = i == len(lines) - 1
        try:
            if not raw.endswith(b"\n"):
                raise ValueError("unterminated line")
            obj = json.loads(raw)
            if not isinstance(obj, dict):
                raise ValueError("not a JSON object")
            kind = obj.get("record")
            if record is None:
                if kind != "header":
                    raise ValueError("first line is not a header")
                record = RunRecord(obj["config_hash"], obj["experiment"], obj["config"],
                                   obj["software_version"], obj["rng_algorithm"])
            elif kind == "replica":
                if record.summary is not None:
                    raise ValueError("replica after summary")
                if obj["index"] != len(record.replicas):
                    raise ValueError(f"replica index {obj['index']}, expected {len(record.replicas)}")
                record.replicas.append(obj)
            elif kind == "summary":
                if record.summary is not None:
                    raise ValueError("second summary")
                record.summary = obj["summary"]
            else:
                raise ValueError(f"unknown record kind {kind!r}")
        except (ValueError, KeyError, TypeError) as exc:
            if strict or not last:
                raise RecordError(f"{path}: corrupt record at byte offset {offset}: {exc}") from None
            log.warning("dropping torn line at byte offset %d of %s", offset, path)
            break
        good = offset + len(raw)
    if record is not None:
        times = path.with_name(path.name + ".times.json")
        if times.exists():
            try:
                record.timestamps = json.loads(times.read_text())
            except ValueError:
                log.warning("ignoring unreadable %s", times)
    return record, good


def _flatten(obj, prefix: str = "") -> Iterator[tuple[str, object]]:
    if isinstance(obj, dict):
        for k in sorted(obj, key=str):
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list) and obj and all(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    elif isinstance(obj, list):
        yield prefix, " ".join("" if v is None else repr(v) for v in obj)
    else:
        yield prefix, obj


def write_summary_csv(summary: dict, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value"])
        for k, v in _flatten(_plain(summary)):
            w.writerow([k, "" if v is None else v])


def _resolve_threads(cfg: ExperimentConfig, threads: int | None) -> int:
    n = cfg.threads if threads is None else threads
    if n < 1:
        raise ConfigError("threads must be >= 1")
    return n


def run(cfg: ExperimentConfig, threads: int | None = None, stop_after: int | None = None) -> RunRecord:
    """Execute (or resume) the experiment and persist its record.

    ``stop_after`` halts after that many replicas in total, leaving a
    resumable checkpoint; it exists to exercise resume.
    """
    cfg.validate()
    exp = EXPERIMENTS[cfg.experiment]
    tasks = exp.tasks(cfg)
    if not tasks:
        raise ConfigError("experiment expands to no replicas")
    workers = _resolve_threads(cfg, threads)
    out = Path(cfg.out)
    header = _header(cfg, len(tasks))
    times_path = out.with_name(out.name + ".times.json")
    times = {"started": time.strftime("%Y-%m-%dT%H:%M:%S%z")}

    done: list[dict] = []
    record = None
    if out.exists() and out.stat().st_size > 0:
        record, good = load_record(out, strict=False)
    if record is not None:
        if record.config_hash != header["config_hash"]:
            raise ConfigError(f"{out} holds a different experiment (config hash mismatch); "
                              "choose another output path")
        if record.complete:
            log.info("%s already complete; nothing to do", out)
            return record
        if good < out.stat().st_size:
            with open(out, "r+b") as fh:
                fh.truncate(good)
        done = record.replicas
        log.info("resuming %s after %d of %d replicas", out, len(done), len(tasks))
        if record.timestamps.get("started"):
            times["started"] = record.timestamps["started"]
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(_line(header))

    start = len(done)
    stop = len(tasks) if stop_after is None else min(len(tasks), stop_after)

    def one(i: int) -> dict:
        obs = exp.replica(cfg, tasks[i], SeedSpec(cfg.seed, i))
        return {"record": "replica", "index": i, "task": tasks[i], "obs": _plain(obs)}

    pending = []
    with open(out, "a") as fh:
        def flush():
            fh.write("".join(_line(r) for r in pending))
            fh.flush()
            done.extend(pending)
            pending.clear()

        try:
            if workers == 1:
                results = map(one, range(start, stop))
                pool = None
            else:
                pool = ThreadPoolExecutor(workers)
                results = pool.map(one, range(start, stop))
            try:
                for rec in results:  # map yields in index order
                    pending.append(rec)
                    if len(pending) >= FLUSH_EVERY:
                        flush()
            finally:
                if pool is not None:
                    pool.shutdown(cancel_futures=True)
        finally:
            flush()

    record = RunRecord(header["config_hash"], cfg.experiment, header["config"], __version__,
                       RNG_ALGORITHM, done)
    if len(done) < len(tasks):
        times["checkpoint"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        times_path.write_text(json.dumps(times))
        record.timestamps = times
        return record
    summary = exp.summarize(cfg, tasks, record.observables())
    record.summary = _plain(summary)
    with open(out, "a") as fh:
        fh.write(_line({"record": "summary", "summary": record.summary}))
    write_summary_csv(record.summary, out.with_name(out.name + ".summary.csv"))
    times["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    times_path.write_text(json.dumps(times))
    record.timestamps = times
    return record
