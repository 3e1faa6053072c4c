"""Flat ``key = value`` experiment configs.

Blank lines and ``#`` comments are ignored.  Lists are comma separated.
Unknown keys are errors, as are keys given twice.  Keys starting with
``band_`` are free-form float thresholds read by the experiment summaries.

==============  =========================================================
key             meaning
==============  =========================================================
experiment      one of :data:`KINDS` (required)
d               torus dimension
n_list          torus sides (or complete-graph sizes), e.g. ``6,8,10``
alpha           alpha values for alpha-laplacian, e.g. ``0.5,1,2``
epsilon         d = 4 exponent slack; cut-time walk length factor
replicas        replicas per unit of work (samples for oracle-check)
seed            master seed, 0 <= seed < 2^64
lambda_grid     increasing tail thresholds
lower_grid      increasing lower-tail thresholds (lerw-torus-tail)
threads         worker threads (default: $LERWTORUS_THREADS or 1)
out             results file (line-delimited JSON)
c1              ball-hitting walk length factor
r               radii, e.g. ``2,4`` (fractions like ``3/2`` allowed)
max_i           stopping-time indices surveyed by f-property
cycles          annulus cycles per replica for stopping-times
target          ``uniform`` or ``antipode`` endpoint for torus LERW
starts          random start vertices for the ball-hitting check
exit_dim        dimension of the exit-point check
exit_radii      radii of the exit-point check
exit_samples    walks per exit-point radius
exit_chunk      walks per persisted exit-point replica
cap_factor      walk cap as a multiple of the vertex count
==============  =========================================================
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

KINDS = (
    "lerw-torus-tail", "lerw-torus-mean", "complete-graph-law", "alpha-laplacian", "cut-times",
    "f-property", "stopping-times", "appendix-checks", "d4-correction", "oracle-check",
)

THREADS_ENV = "LERWTORUS_THREADS"


class ConfigError(ValueError):
    pass


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"${THREADS_ENV} must be an integer, got {raw!r}") from None


@dataclass
class ExperimentConfig:
    experiment: str
    d: int = 5
    n_list: tuple[int, ...] = (8,)
    alpha: tuple[float, ...] = (1.0,)
    epsilon: float = 0.1
    replicas: int = 100
    seed: int = 0
    lambda_grid: tuple[float, ...] = (1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)
    lower_grid: tuple[float, ...] = (0.05, 0.1, 0.2)
    threads: int = field(default_factory=_default_threads)
    out: str = "run.jsonl"
    c1: float = 10.0
    r: tuple[str, ...] = ("2",)
    max_i: int = 4
    cycles: int = 8
    target: str = "uniform"
    starts: int = 20
    exit_dim: int = 4
    exit_radii: tuple[str, ...] = ("6", "12")
    exit_samples: int = 10**6
    exit_chunk: int = 10**5
    cap_factor: int = 100
    bands: dict[str, float] = field(default_factory=dict)

    @property
    def radii(self) -> list[Fraction]:
        return [Fraction(x) for x in self.r]

    def band(self, name: str, default: float | None = None) -> float | None:
        return self.bands.get(name, default)

    def identity(self) -> dict:
        """Fields that determine the results; ``threads`` and ``out`` do not."""
        out = asdict(self)
        out.pop("threads")
        out.pop("out")
        return out

    def hash(self) -> str:
        blob = json.dumps(self.identity(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in KINDS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {', '.join(KINDS)}")
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if not self.n_list or any(n < 2 for n in self.n_list):
            raise ConfigError("n_list must hold sides >= 2")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must satisfy 0 <= seed < 2^64")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        for name in ("lambda_grid", "lower_grid"):
            grid = getattr(self, name)
            if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
                raise ConfigError(f"{name} must be nonempty and strictly increasing")
        if any(a <= 0 for a in self.alpha) or any(a != a or a == float("inf") for a in self.alpha):
            raise ConfigError("alpha values must be positive and finite")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        try:
            radii = self.radii + [Fraction(x) for x in self.exit_radii]
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad radius: {exc}") from None
        if any(x <= 0 for x in radii):
            raise ConfigError("radii must be positive")
        if self.target not in ("uniform", "antipode"):
            raise ConfigError("target must be 'uniform' or 'antipode'")
        for name in ("max_i", "cycles", "starts", "exit_dim", "exit_samples", "exit_chunk", "cap_factor"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.c1 <= 0:
            raise ConfigError("c1 must be positive")
        self._validate_kind()
        return self

    def _validate_kind(self) -> None:
        kind = self.experiment
        if kind in ("f-property", "stopping-times"):
            for n in self.n_list:
                for r in self.radii:
                    if not r <= Fraction(n, 8):
                        raise ConfigError(f"radius {r} exceeds N/8 for N = {n}")
        if kind in ("f-property", "d4-correction") and self.d < 4:
            raise ConfigError(f"{kind} needs d >= 4")
        if kind == "d4-correction" and self.d != 4:
            raise ConfigError("d4-correction runs in d = 4")
        if kind == "appendix-checks":
            for n in self.n_list:
                for r in self.radii:
                    if not 2 * r <= n:
                        raise ConfigError(f"ball radius {r} wraps T_{n}")


_INT = {"d", "replicas", "seed", "threads", "max_i", "cycles", "starts", "exit_dim",
        "exit_samples", "exit_chunk", "cap_factor"}
_FLOAT = {"epsilon", "c1"}
_INT_LIST = {"n_list"}
_FLOAT_LIST = {"alpha", "lambda_grid", "lower_grid"}
_STR_LIST = {"r", "exit_radii"}
_STR = {"experiment", "out", "target"}


def _int(text: str) -> int:
    value = float(text) if any(c in text for c in ".eE") else int(text)
    if value != int(value):
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    values: dict = {}
    bands: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values or key in bands:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            if key.startswith("band_"):
                bands[key[5:]] = float(value)
            elif key in _INT:
                values[key] = _int(value)
            elif key in _FLOAT:
                values[key] = float(value)
            elif key in _INT_LIST:
                values[key] = tuple(_int(v) for v in value.split(","))
            elif key in _FLOAT_LIST:
                values[key] = tuple(float(v) for v in value.split(","))
            elif key in _STR_LIST:
                values[key] = tuple(str(Fraction(v.strip())) for v in value.split(","))
            elif key in _STR:
                values[key] = value
            else:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        except (ValueError, ZeroDivisionError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    if "experiment" not in values:
        raise ConfigError(f"{source}: missing 'experiment'")
    cfg = ExperimentConfig(**values, bands=bands)
    return cfg.validate()


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    path = Path(path)
    cfg = parse_config(path.read_text(), str(path))
    for key, value in overrides.items():
        if key not in {f.name for f in fields(ExperimentConfig)}:
            raise ConfigError(f"unknown override {key!r}")
        setattr(cfg, key, value)
    return cfg.validate()
