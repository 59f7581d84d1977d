"""Experiment configuration: a flat JSON record per campaign."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .integrators import SCHEMES, StepperConfig, n_steps_for
from .kernel import HorizonPolicy
from .models import make_system

__all__ = ["ExperimentConfig", "load_config", "available_configs"]

MODELS = ("linear", "brusselator", "burgers", "ks")
FIXED_SIZES = {"linear": (2, 1), "brusselator": (2, 1)}


@dataclass
class ExperimentConfig:
    model: str
    N: int
    m: int
    dt: float
    t_f: float
    params: dict = field(default_factory=dict)
    epsilon: float = 1e-8
    policy: str = "full"
    scheme: str = "rk4"
    seed: int = 0
    workers: int = 1
    output_dir: str = "runs/out"
    name: str = ""
    snapshot_times: list = field(default_factory=list)
    profile_scaling: str = "peak"
    row_chunk: int = 128
    etd_contour_points: int = 32
    notes: str = ""

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.model in FIXED_SIZES and (self.N, self.m) != FIXED_SIZES[self.model]:
            raise ValueError(f"{self.model} has fixed (N, m) = {FIXED_SIZES[self.model]}")
        if not 1 <= self.m < self.N:
            raise ValueError(f"need 1 <= m < N, got m={self.m}, N={self.N}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.profile_scaling not in ("peak", "row"):
            raise ValueError("profile_scaling must be 'peak' or 'row'")
        if self.row_chunk < 1:
            raise ValueError("row_chunk must be positive")
        HorizonPolicy.parse(self.policy)
        n_steps_for(self.t_f, self.dt)

    @property
    def n_steps(self):
        return n_steps_for(self.t_f, self.dt)

    @property
    def horizon_policy(self):
        return HorizonPolicy.parse(self.policy)

    @property
    def stepper(self):
        return StepperConfig(self.dt, self.scheme, self.etd_contour_points)

    def system(self):
        return make_system(self.model, self.N, self.m, self.params)

    def snapshot_indices(self):
        n_t = self.n_steps
        out = sorted({min(max(int(round(t / self.dt)), 1), n_t) for t in self.snapshot_times})
        return out

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")


def available_configs():
    files = resources.files("mzmem").joinpath("configs")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def load_config(name_or_path):
    """Load a config from a JSON path or the name of a shipped campaign."""
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        return ExperimentConfig.from_json(path.read_text())
    shipped = resources.files("mzmem").joinpath("configs", f"{name_or_path}.json")
    if shipped.is_file():
        return ExperimentConfig.from_json(shipped.read_text())
    raise FileNotFoundError(f"no config file or shipped campaign named {name_or_path!r}; "
                            f"shipped: {', '.join(available_configs())}")
