"""Experiment configuration: parsing, validation and the reproducibility hash.

Config files are JSON or TOML with these keys (all optional except ``kind``)::

    kind = "diagonal"          # diagonal | near-diagonal | spectrum | filter | zeta-sweep
    n = 1
    p = [16, 32, 64, 128]
    precision = "auto"         # auto | double | extended
    threads = 1
    [weight]
    name = "family"            # zero | psi | harmonic | family
    zeta = [0.5]               # family only
    psi = "psi"                # family only
    amplitude = 0.1            # harmonic only
    [grid]                     # residual grid per chart coordinate
    n_radial = 48              # default 48 x 48 on CP^1, 5 x 6 on CP^2
    n_angular = 48
    [quadrature]               # overrides of the default node counts
    n_radial = 0
    n_angular = 0
    [options]                  # per-kind knobs, see DEFAULT_OPTIONS
    [output]
    dir = "results"
    json = false
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from ..errors import ConfigError

KINDS = ("diagonal", "near-diagonal", "spectrum", "filter", "zeta-sweep")
WEIGHTS = ("zero", "psi", "harmonic", "family")
PRECISIONS = ("auto", "double", "extended")

DEFAULT_GRID = {1: {"n_radial": 48, "n_angular": 48}, 2: {"n_radial": 5, "n_angular": 6}}

DEFAULT_OPTIONS = {
    "diagonal": {},
    "near-diagonal": {"sigma": 3.0, "x0": [0.0]},
    "spectrum": {"d": None},
    "filter": {"eps0": 0.5},
    "zeta-sweep": {"norm_order": None},
}


@dataclass
class ExperimentConfig:
    kind: str
    n: int = 1
    p: list = field(default_factory=lambda: [8, 16, 32])
    weight: dict = field(default_factory=lambda: {"name": "zero"})
    grid: Optional[dict] = None     # default depends on n
    quadrature: dict = field(default_factory=dict)
    precision: str = "auto"
    options: dict = field(default_factory=dict)
    output: dict = field(default_factory=lambda: {"dir": "results", "json": False})
    threads: int = 1

    def __post_init__(self):
        self.validate()

    # -- validation ---------------------------------------------------------
    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.n not in (1, 2):
            raise ConfigError("n must be 1 or 2")
        if self.kind == "spectrum" and self.n != 1:
            raise ConfigError("spectrum experiments run on CP^1 only")
        try:
            self.p = [int(v) for v in self.p]
        except (TypeError, ValueError):
            raise ConfigError(f"p must be a list of integers, got {self.p!r}") from None
        if not self.p or any(v < 1 for v in self.p):
            raise ConfigError("p values must be positive")
        if any(b <= a for a, b in zip(self.p, self.p[1:])):
            raise ConfigError(f"p list must be strictly increasing, got {self.p}")
        w = self.weight
        if not isinstance(w, dict) or w.get("name") not in WEIGHTS:
            raise ConfigError(f"weight name must be one of {WEIGHTS}, got {w!r}")
        if w["name"] == "family":
            z = w.get("zeta", [0.5])
            z = [z] if isinstance(z, (int, float)) else list(z)
            if not z or any(not (0 < float(v) <= 1) for v in z):
                raise ConfigError(f"zeta values must lie in (0, 1], got {z}")
            w["zeta"] = [float(v) for v in z]
            if w.setdefault("psi", "psi") not in ("psi",):
                raise ConfigError(f"unknown family generator {w['psi']!r}")
        if self.kind == "zeta-sweep" and w["name"] != "family":
            raise ConfigError("zeta-sweep needs a family weight")
        if self.grid is None:
            self.grid = dict(DEFAULT_GRID[self.n])
        if self.precision not in PRECISIONS:
            raise ConfigError(f"precision must be one of {PRECISIONS}")
        for key in ("n_radial", "n_angular"):
            if int(self.grid.get(key, 1)) < 1:
                raise ConfigError(f"grid.{key} must be positive")
        opts = dict(DEFAULT_OPTIONS[self.kind])
        unknown = set(self.options) - set(opts)
        if unknown:
            raise ConfigError(f"unknown options for {self.kind}: {sorted(unknown)}")
        opts.update(self.options)
        self.options = opts
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    @property
    def zetas(self) -> list:
        if self.weight["name"] == "family":
            return list(self.weight["zeta"])
        return [None]

    # -- hashing ------------------------------------------------------------
    def canonical(self) -> dict:
        """Everything that affects numbers; outputs and threads excluded."""
        return {"kind": self.kind, "n": self.n, "p": self.p, "weight": self.weight,
                "grid": self.grid, "quadrature": self.quadrature,
                "precision": self.precision, "options": self.options}

    @property
    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        d = self.canonical()
        d.update(output=self.output, threads=self.threads)
        return copy.deepcopy(d)


def config_from_dict(d: dict) -> ExperimentConfig:
    d = copy.deepcopy(d)
    known = {"kind", "n", "p", "weight", "grid", "quadrature", "precision", "options",
             "output", "threads"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    if "kind" not in d:
        raise ConfigError("config needs an experiment 'kind'")
    if isinstance(d.get("weight"), str):
        d["weight"] = {"name": d["weight"]}
    try:
        return ExperimentConfig(**d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(text)
        else:
            data = json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    data.update(overrides or {})
    return config_from_dict(data)
