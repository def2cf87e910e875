"""Experiment configuration.

A config is a JSON object. Only ``kind`` and ``generator`` are required;
everything else has a default::

    {
      "kind": "threshold_scan",          # see KINDS
      "generator": {"kind": "complete"}, # or gnw / blowup / sample_dense + "kernel"
      "c_values": [0.8, 1.25],
      "n_values": [20000],
      "reps": 20,
      "base_seed": 0,
      "omega": "log2",                   # log | log2 | quarter
      "output": null,
      "params": {}                       # experiment-specific knobs
    }

``generator.n`` is ignored; sizes come from ``n_values``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from graphperc.graphon import StepKernel

KINDS = ("threshold_scan", "component_census", "log_scaling", "reducible_demo",
         "branching_validation", "convergence")
GENERATOR_KINDS = ("complete", "blowup", "sample_dense", "gnw")
OMEGA_RULES = ("log", "log2", "quarter")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    generator: dict = field(default_factory=lambda: {"kind": "complete"})
    c_values: list[float] = field(default_factory=lambda: [1.0])
    n_values: list[int] = field(default_factory=lambda: [1000])
    reps: int = 20
    base_seed: int = 0
    omega: str = "log2"
    output: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if any(int(n) < 2 for n in self.n_values):
            raise ConfigError("every n must be at least 2")
        if any(c < 0 for c in self.c_values):
            raise ConfigError("c values must be nonnegative")
        if self.omega not in OMEGA_RULES:
            raise ConfigError(f"unknown omega rule {self.omega!r}")
        gk = self.generator.get("kind")
        if gk not in GENERATOR_KINDS:
            raise ConfigError(f"unknown generator kind {gk!r}; expected one of {GENERATOR_KINDS}")
        if gk != "complete" and "kernel" not in self.generator:
            raise ConfigError(f"generator {gk!r} needs a kernel")
        self.n_values = [int(n) for n in self.n_values]
        self.c_values = [float(c) for c in self.c_values]
        self.base_seed = int(self.base_seed)

    def kernel(self) -> StepKernel:
        """The limit graphon of the generator (``W = 1`` for complete graphs)."""
        if self.generator["kind"] == "complete":
            return StepKernel.constant(1.0)
        k = self.generator["kernel"]
        try:
            return k if isinstance(k, StepKernel) else StepKernel.from_dict(k)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad kernel: {exc}") from exc

    def param(self, name: str, default):
        return self.params.get(name, default)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"kind", "generator", "c_values", "n_values", "reps", "base_seed",
                 "omega", "output", "params"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        k = d["generator"].get("kernel")
        if isinstance(k, StepKernel):
            d["generator"]["kernel"] = k.to_dict()
        return d
