"""Experiment configuration: a JSON tree with problem, algorithm and execution sections."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .grid_hamiltonian import (
    POTENTIAL_FAMILIES,
    GridSpec,
    Potential,
    constant_potential,
    load_tabulated,
    product_sine_potential,
    well_potential,
    zero_potential,
)
from .qpe_engine import BACKENDS


@dataclass(frozen=True)
class PotentialSpec:
    family: str
    params: dict = field(default_factory=dict)
    path: Optional[str] = None

    def __post_init__(self):
        if self.family not in POTENTIAL_FAMILIES:
            raise ConfigError(f"potential.family must be one of {POTENTIAL_FAMILIES}, got {self.family!r}")
        if self.family == "tabulated" and not self.path:
            raise ConfigError("tabulated potential needs potential.path")

    def build(self, grid: GridSpec, base_dir: Path, M: Optional[float], C: Optional[float]) -> Potential:
        p = dict(self.params)
        if self.family == "zero":
            return zero_potential()
        if self.family == "constant":
            return constant_potential(p.get("value", 1.0))
        if self.family == "product-sine":
            return product_sine_potential(p.get("amplitude", 1.0))
        if self.family == "well":
            return well_potential(p.get("amplitude", 1.0), p.get("profile", "harmonic"), grid.d)
        return load_tabulated(base_dir / self.path, grid, M=M, C=0.0 if C is None else C)


@dataclass(frozen=True)
class ProblemConfig:
    d: int
    potential: PotentialSpec
    N: Optional[int] = None
    eps: Optional[float] = None
    M: Optional[float] = None
    C: Optional[float] = None

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError("problem.d must be >= 1")
        if (self.N is None) == (self.eps is None):
            raise ConfigError("give exactly one of problem.N and problem.eps")
        if self.eps is not None and not 0 < self.eps < 1:
            raise ConfigError("problem.eps must lie in (0, 1)")

    def resolved_N(self) -> int:
        if self.N is not None:
            return int(self.N)
        return 2 ** math.ceil(2 * math.log2(self.d / self.eps))


@dataclass(frozen=True)
class AlgorithmConfig:
    j: int = 1
    b: Optional[int] = None
    t0: Optional[int] = None
    g: Optional[float] = None
    r: Optional[int] = None
    c: float = 2.0
    backend: str = "exact"
    k: int = 1
    reuse_records: bool = False

    def __post_init__(self):
        if self.j < 1:
            raise ConfigError("algorithm.j must be >= 1")
        if (self.t0 is None) == (self.g is None):
            raise ConfigError("give exactly one of algorithm.t0 and algorithm.g")
        if self.backend not in BACKENDS:
            raise ConfigError(f"algorithm.backend must be one of {BACKENDS}")
        if self.k < 1:
            raise ConfigError("algorithm.k must be >= 1")
        if self.c <= 1:
            raise ConfigError("algorithm.c must exceed 1")
        if self.r is not None and self.r < 1:
            raise ConfigError("algorithm.r must be >= 1")


@dataclass(frozen=True)
class ExecutionConfig:
    seed: int = 0
    trials: int = 0
    out: str = "out"
    workers: int = 1
    scan_d: tuple = ()

    def __post_init__(self):
        if self.trials < 0 or self.workers < 1:
            raise ConfigError("execution.trials must be >= 0 and execution.workers >= 1")
        object.__setattr__(self, "scan_d", tuple(int(x) for x in self.scan_d))


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemConfig
    algorithm: AlgorithmConfig
    execution: ExecutionConfig = field(default_factory=ExecutionConfig)
    base_dir: Path = field(default=Path("."), compare=False)

    @classmethod
    def from_dict(cls, tree: dict, base_dir=".") -> "ExperimentConfig":
        try:
            prob = dict(tree["problem"])
        except (KeyError, TypeError):
            raise ConfigError("config needs a 'problem' section") from None
        if "potential" not in prob:
            raise ConfigError("problem.potential is required")
        try:
            prob["potential"] = PotentialSpec(**prob["potential"])
            return cls(
                ProblemConfig(**prob),
                AlgorithmConfig(**tree.get("algorithm", {})),
                ExecutionConfig(**tree.get("execution", {})),
                Path(base_dir),
            )
        except TypeError as exc:
            raise ConfigError(f"malformed config: {exc}") from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            tree = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(tree, path.parent)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name != "base_dir":
                out[f.name] = asdict(getattr(self, f.name))
        out["execution"]["scan_d"] = list(out["execution"]["scan_d"])
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:12]

    @property
    def g_value(self) -> float:
        """Polynomial ``g(d)``; defaults to ``d^3`` when ``t0`` is given directly."""
        return float(self.algorithm.g) if self.algorithm.g is not None else float(self.problem.d**3)
