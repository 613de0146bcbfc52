"""Experiment configuration loaded from a YAML key-value document."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import yaml

from ..errors import InvalidConfiguration
from ..lds import DISTURBANCE_KINDS, SystemBounds

METHODS = ("non-adaptive", "independent-oc", "moc1", "moc2")
B_RULES = ("fixed", "uniform")
CONSTANTS_MODES = ("empirical", "theory")


@dataclass
class ExperimentConfig:
    n: int = 2
    m: int = 1
    N: int = 30
    T: Union[int, List[int]] = 25
    seeds: List[int] = field(default_factory=lambda: list(range(10)))
    methods: List[str] = field(default_factory=lambda: list(METHODS))
    D_star: Optional[float] = None
    epsilon: float = 0.05
    zeta: Optional[float] = None
    bounds: Optional[dict] = None
    disturbance: str = "sinusoidal"
    frequency: float = 0.6
    # one disturbance stream per suite (tasks differ through A_i and costs) or one per task
    shared_disturbance: bool = True
    constants: str = "empirical"
    calibration_tasks: int = 5
    B_rule: str = "fixed"
    d: Optional[float] = None
    output_dir: str = "results"

    def __post_init__(self):
        self.validate()

    @property
    def T_values(self):
        return [self.T] if isinstance(self.T, int) else list(self.T)

    @property
    def dimension(self):
        return float(self.n if self.d is None else self.d)

    def system_bounds(self):
        """Bounds for the suite; unspecified entries take the benchmark defaults."""
        overrides = dict(self.bounds or {})
        try:
            return SystemBounds.default_for(self.n, self.m, **overrides)
        except TypeError as exc:
            raise InvalidConfiguration(f"bad bounds entry: {exc}") from exc
        except ValueError as exc:
            raise InvalidConfiguration(str(exc)) from exc

    def validate(self):
        def fail(msg):
            raise InvalidConfiguration(msg)

        for name in ("n", "m", "N"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                fail(f"{name} must be a positive integer, got {v!r}")
        Ts = self.T_values
        if not Ts or any(not isinstance(t, int) or isinstance(t, bool) or t < 2 for t in Ts):
            fail(f"T must be an integer >= 2 or a non-empty list of them, got {self.T!r}")
        if not isinstance(self.seeds, list) or not self.seeds or any(
            not isinstance(s, int) or isinstance(s, bool) or s < 0 for s in self.seeds
        ):
            fail("seeds must be a non-empty list of non-negative integers")
        unknown = [mth for mth in self.methods if mth not in METHODS]
        if not isinstance(self.methods, list) or unknown or not self.methods:
            fail(f"methods must be drawn from {METHODS}, got {self.methods!r}")
        if self.D_star is not None and not self.D_star > 0:
            fail("D_star must be positive (or omitted for the calibrated default)")
        if not self.epsilon > 0:
            fail("epsilon must be positive")
        if self.zeta is not None and not self.zeta > 1:
            fail("zeta must exceed 1")
        if self.disturbance not in DISTURBANCE_KINDS:
            fail(f"disturbance must be one of {DISTURBANCE_KINDS}")
        if self.constants not in CONSTANTS_MODES:
            fail(f"constants must be one of {CONSTANTS_MODES}")
        if not isinstance(self.shared_disturbance, bool):
            fail("shared_disturbance must be true or false")
        if not isinstance(self.calibration_tasks, int) or self.calibration_tasks < 1:
            fail("calibration_tasks must be a positive integer")
        if not (math.isfinite(self.frequency) and self.frequency > 0):
            fail("frequency must be positive")
        if self.B_rule not in B_RULES:
            fail(f"B_rule must be one of {B_RULES}")
        if self.d is not None and not self.d > 0:
            fail("d must be positive")
        if self.bounds is not None and not isinstance(self.bounds, dict):
            fail("bounds must be a mapping")
        self.system_bounds()

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise InvalidConfiguration("configuration must be a key-value mapping")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise InvalidConfiguration(f"unknown configuration keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InvalidConfiguration(str(exc)) from exc

    @classmethod
    def load(cls, path):
        try:
            data = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise InvalidConfiguration(f"cannot read {path}: {exc}") from exc
        return cls.from_dict(data or {})

    def dump(self, path):
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))
