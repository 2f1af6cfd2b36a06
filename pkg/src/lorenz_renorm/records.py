"""Run configuration and the on-disk result record (``result.json``, schema v1).

Floats are written with ``repr`` semantics (shortest decimal that parses
back to the same double), so a record survives a write/read cycle exactly.

Schema v1 keys: ``schema``, ``config``, ``rho``, ``r_star``, ``lambda_star``,
``mu_star``, ``a``, ``b``, ``y``, ``scalings``, ``residuals``, ``checks``,
``iterations``, ``wall_time``, ``U_samples``, ``V_samples``, ``trace``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError, SchemaError

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "LORENZ_RENORM_OUTPUT_DIR"
EMIT_CHOICES = frozenset({"json", "csv"})


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


@dataclass(frozen=True)
class RunConfig:
    rho: float
    degree: int = 64
    iterate_tol: float = 1e-12
    tol_r: float = 1e-8
    bracket_lo: float = 0.05
    bracket_hi: float = 2.0
    grid_out: int = 200
    max_iter: int = 200
    output_dir: Path = field(default_factory=default_output_dir)
    emit: frozenset = frozenset({"json"})

    def __post_init__(self):
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        object.__setattr__(self, "emit", frozenset(self.emit))
        problems = []
        if not (self.rho > 1 and math.isfinite(self.rho)):
            problems.append(f"rho must exceed 1 (got {self.rho})")
        if not 16 <= self.degree <= 512:
            problems.append(f"degree must lie in [16, 512] (got {self.degree})")
        if not self.bracket_lo < self.bracket_hi:
            problems.append(f"bracket must satisfy lo < hi (got {self.bracket_lo}, {self.bracket_hi})")
        if self.bracket_lo <= 0:
            problems.append("bracket must lie in r > 0")
        if not (self.iterate_tol > 0 and self.tol_r > 0):
            problems.append("tolerances must be positive")
        if self.grid_out < 2 or self.max_iter < 1:
            problems.append("grid_out must be >= 2 and max_iter >= 1")
        if not self.emit <= EMIT_CHOICES:
            problems.append(f"emit must be a subset of {sorted(EMIT_CHOICES)}")
        if problems:
            raise ConfigError("; ".join(problems), problems=problems)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["output_dir"] = str(self.output_dir)
        d["emit"] = sorted(self.emit)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class ResultRecord:
    config: dict
    rho: float
    r_star: float
    lambda_star: float
    mu_star: float
    a: float
    b: float
    y: float
    scalings: dict
    residuals: dict
    checks: list
    iterations: int
    wall_time: float
    U_samples: list
    V_samples: list
    trace: Optional[list] = None
    schema: int = SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ResultRecord":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"result file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise SchemaError("result file must hold a JSON object")
        if data.get("schema") != SCHEMA_VERSION:
            raise SchemaError(f"unsupported schema version {data.get('schema')!r}")
        names = {f.name for f in fields(cls)}
        required = {f.name for f in fields(cls) if f.name not in ("trace", "schema")}
        missing = sorted(required - data.keys())
        if missing:
            raise SchemaError(f"result file lacks fields {missing}", missing=missing)
        return cls(**{k: v for k, v in data.items() if k in names})

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        return path

    @classmethod
    def read(cls, path) -> "ResultRecord":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise SchemaError(f"cannot read {path}: {exc}") from exc
        return cls.from_json(text)
