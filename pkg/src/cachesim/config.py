"""Experiment configuration: JSON schema, validation, round-tripping.

A config file is one JSON object:

    {
      "master_seed": 42,
      "policies": ["gpt-4o", { ...inline policy object... }],
      "modes": ["no-cache", "full-context", "system-prompt",
                "exclude-tool-results"],
      "workload": { ...WorkloadSpec fields, seed optional... },
      "latency": {"default": { ...LatencyModel fields... },
                  "gpt-4o": { ... }},
      "warmup_sessions": 1,
      "alpha": 0.05,
      "output_dir": "out/main",
      "jobs": 1
    }

Policies may be built-in names or inline policy objects (see the policy
JSON schema in :mod:`cachesim.policies`). Unset workload and latency
seeds are derived from the master seed, one label per purpose, so runs
are reproducible from the single master value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .policies import ProviderPolicy, builtin_policy, policy_from_dict, policy_to_dict
from .replay import LatencyModel
from .seeding import derive_seed
from .strategies import StrategyMode
from .workload import WorkloadSpec

DEFAULT_GRIDS: dict[str, tuple[int, ...]] = {
    "prompt-size": (500, 2_000, 5_000, 10_000, 20_000, 50_000),
    "tool-count": (3, 5, 10, 20, 50),
}


@dataclass(frozen=True)
class AblationGrid:
    """One swept dimension and its values, ascending."""

    dimension: str
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.dimension not in DEFAULT_GRIDS:
            raise ConfigError(
                f"unknown ablation dimension {self.dimension!r}; "
                f"expected one of {sorted(DEFAULT_GRIDS)}")
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ConfigError("ablation grid needs at least one value")
        if list(self.values) != sorted(self.values):
            raise ConfigError("ablation grid values must be sorted ascending")
        floor = 1 if self.dimension == "prompt-size" else 0
        if any(v < floor for v in self.values):
            raise ConfigError(f"{self.dimension} values must be >= {floor}")

    @classmethod
    def default(cls, dimension: str) -> "AblationGrid":
        if dimension not in DEFAULT_GRIDS:
            raise ConfigError(f"unknown ablation dimension {dimension!r}")
        return cls(dimension, DEFAULT_GRIDS[dimension])


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int
    policies: tuple[ProviderPolicy, ...]
    modes: tuple[StrategyMode, ...]
    workload: WorkloadSpec
    latency: dict[str, LatencyModel] = field(default_factory=dict)
    warmup_sessions: int = 1
    alpha: float = 0.05
    output_dir: str = "out"
    jobs: int = 1
    # TTFT samples per condition: one mean per session, or every call pooled.
    ttft_aggregation: str = "session-mean"

    def __post_init__(self) -> None:
        if not self.policies:
            raise ConfigError("config needs at least one policy")
        if not self.modes:
            raise ConfigError("config needs at least one mode")
        names = [p.name for p in self.policies]
        if len(set(names)) != len(names):
            raise ConfigError("policy names must be unique")
        if len(self.modes) != len(set(self.modes)):
            raise ConfigError("modes must be unique")
        if len(self.modes) > 1 and StrategyMode.NO_CACHE not in self.modes:
            raise ConfigError(
                "baseline-relative reports need the no-cache mode in the mode list")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must be in (0, 1)")
        if self.warmup_sessions < 0:
            raise ConfigError("warmup_sessions must be >= 0")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.ttft_aggregation not in ("session-mean", "per-call"):
            raise ConfigError("ttft_aggregation must be 'session-mean' or 'per-call'")
        if "default" not in self.latency:
            missing = [n for n in names if n not in self.latency]
            if missing:
                raise ConfigError(
                    f"latency config missing for {missing} and no 'default' given")

    def latency_for(self, policy_name: str) -> LatencyModel:
        if policy_name in self.latency:
            return self.latency[policy_name]
        return self.latency["default"]


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        master_seed = int(data.get("master_seed", 0))

        policies = []
        for entry in data.get("policies", []):
            if isinstance(entry, str):
                try:
                    policies.append(builtin_policy(entry))
                except KeyError as exc:
                    raise ConfigError(str(exc)) from exc
            elif isinstance(entry, dict):
                policies.append(policy_from_dict(entry))
            else:
                raise ConfigError(f"policy entries must be names or objects, got {entry!r}")

        modes = []
        for name in data.get("modes", []):
            try:
                modes.append(StrategyMode(name))
            except ValueError as exc:
                known = ", ".join(m.value for m in StrategyMode)
                raise ConfigError(f"unknown mode {name!r}; expected one of: {known}") from exc

        workload_raw = dict(data.get("workload", {}))
        workload_raw.setdefault("seed", derive_seed(master_seed, "workload"))
        workload = WorkloadSpec.from_dict(workload_raw)

        latency = {}
        for key, params in dict(data.get("latency", {})).items():
            params = dict(params)
            params.setdefault("seed", derive_seed(master_seed, "latency"))
            latency[key] = LatencyModel.from_dict(params)
        if not latency:
            latency["default"] = LatencyModel(seed=derive_seed(master_seed, "latency"))

        return ExperimentConfig(
            master_seed=master_seed,
            policies=tuple(policies),
            modes=tuple(modes),
            workload=workload,
            latency=latency,
            warmup_sessions=int(data.get("warmup_sessions", 1)),
            alpha=float(data.get("alpha", 0.05)),
            output_dir=str(data.get("output_dir", "out")),
            jobs=int(data.get("jobs", 1)),
            ttft_aggregation=str(data.get("ttft_aggregation", "session-mean")),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "master_seed": config.master_seed,
        "policies": [policy_to_dict(p) for p in config.policies],
        "modes": [m.value for m in config.modes],
        "workload": config.workload.to_dict(),
        "latency": {key: model.to_dict() for key, model in config.latency.items()},
        "warmup_sessions": config.warmup_sessions,
        "alpha": config.alpha,
        "output_dir": config.output_dir,
        "jobs": config.jobs,
        "ttft_aggregation": config.ttft_aggregation,
    }


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return config_from_dict(data)


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(config), fh, indent=2, sort_keys=True)
        fh.write("\n")


def override_workload(config: ExperimentConfig, **changes) -> ExperimentConfig:
    """Copy of the config with workload fields replaced (used by ablations)."""
    return replace(config, workload=replace(config.workload, **changes))
