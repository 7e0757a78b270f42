"""Experiment configuration: one JSON-serializable record per run."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .experiments import DESK_ENV_INDICES, STANDARD_COUPLINGS, FULL_ENV_INDICES, REFERENCE_COUPLING, InitialConditionSpec
from .hamiltonian import ModelParams

EXPERIMENTS = ("all", "build", "evolve", "distributions", "report")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    N_s: int = 10
    N_e: int = 120
    E_e: float = 0.5
    couplings: list = field(default_factory=lambda: list(STANDARD_COUPLINGS))
    E0_e: float = 0.0
    E0_I: float = 0.0
    seed: int = 0
    env_indices: list = field(default_factory=lambda: list(DESK_ENV_INDICES))
    target_energy: float = 5.0
    alpha_phase: float = 0.0
    t_max: float | None = None
    n_samples: int = 1000
    late_fraction: float = 0.25
    n_env_bins: int = 30
    n_world_bins: int = 30
    n_scan_eigenstates: int = 12
    phase_seeds: list = field(default_factory=lambda: [1])
    reference_coupling: float = REFERENCE_COUPLING
    entropy_base: str = "e"
    memory_cap_gb: float | None = None
    output_dir: str = "acl-out"
    cache_dir: str = "acl-cache"
    experiment: str = "all"

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("N_s", "N_e", "seed", "n_samples", "n_env_bins", "n_world_bins", "n_scan_eigenstates"):
            if isinstance(getattr(self, name), bool) or not isinstance(getattr(self, name), int):
                raise ConfigError(f"{name} must be an integer")
        if self.N_s < 2 or self.N_e < 1:
            raise ConfigError(f"need N_s >= 2 and N_e >= 1, got ({self.N_s}, {self.N_e})")
        if not self.couplings:
            raise ConfigError("couplings must not be empty")
        bad = [i for i in self.env_indices if not 0 <= i < self.N_e]
        if bad:
            raise ConfigError(f"env_indices {bad} outside [0, {self.N_e})")
        if self.n_samples < 2:
            raise ConfigError("n_samples must be >= 2")
        if not 0 < self.late_fraction <= 1:
            raise ConfigError("late_fraction must lie in (0, 1]")
        if self.n_env_bins < 1 or self.n_world_bins < 1:
            raise ConfigError("bin counts must be >= 1")
        if self.entropy_base not in ("e", "2"):
            raise ConfigError("entropy_base must be 'e' or '2'")
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
        if self.t_max is not None and not self.t_max > 0:
            raise ConfigError("t_max must be positive")

    # presets -----------------------------------------------------------
    @classmethod
    def desk_scale(cls, **overrides) -> "ExperimentConfig":
        return cls(**overrides)

    @classmethod
    def full_scale(cls, **overrides) -> "ExperimentConfig":
        base = dict(N_s=30, N_e=600, E_e=1.0, env_indices=list(FULL_ENV_INDICES), target_energy=25.0)
        base.update(overrides)
        return cls(**base)

    # serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.dumps() + "\n")
        return path

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    # derived -------------------------------------------------------------
    def model_params(self, coupling: float) -> ModelParams:
        return ModelParams(self.N_s, self.N_e, float(self.E_e), float(coupling), float(self.E0_e),
                           float(self.E0_I), int(self.seed))

    def initial_conditions(self) -> list:
        return [InitialConditionSpec(int(i), float(self.target_energy), float(self.alpha_phase))
                for i in self.env_indices]

    @property
    def memory_cap(self) -> int | None:
        return None if self.memory_cap_gb is None else int(self.memory_cap_gb * 1e9)

    @property
    def log_base(self) -> float:
        return 2.0 if self.entropy_base == "2" else math.e

    def resolve_dirs(self, output_dir=None, cache_dir=None):
        """CLI flag > environment variable > config value."""
        self.output_dir = output_dir or os.environ.get("ACL_OUTPUT_DIR") or self.output_dir
        self.cache_dir = cache_dir or os.environ.get("ACL_CACHE_DIR") or self.cache_dir
