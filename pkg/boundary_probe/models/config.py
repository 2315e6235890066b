"""
Experiment configuration - one JSON document drives every CLI stage
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from ..exceptions import ConfigError
from ..utils.helpers import coerce_fields, config_hash
from .adversarial import AttackConfig, AttackKind
from .network import Architecture, TrainConfig
from .region import BaseMode, RegionThresholds

# Fixed neighbourhood radius offered as a preset (sized for a digit 1)
PRESET_DELTA = 6.0
# Diameter scale of [0,1]^784
MAX_DELTA = 28.0

MNIST_MIRROR = "https://ossci-datasets.s3.amazonaws.com/mnist/"


@dataclass
class DataConfig:
    """Where the MNIST IDX files live and whether to fetch them"""
    data_dir: str = "data/mnist"
    download: bool = False
    mirror: str = MNIST_MIRROR
    request_timeout_seconds: float = 60.0
    retries: int = 3


@dataclass
class ImageSelector:
    """Pick a clean image by index, or by label and ordinal among that label"""
    split: str = "test"
    index: Optional[int] = None
    label: Optional[int] = None
    ordinal: int = 0

    def is_valid(self) -> bool:
        if self.split not in ("train", "test"):
            return False
        if self.index is None and self.label is None:
            return False
        if self.label is not None and not 0 <= self.label <= 9:
            return False
        return self.ordinal >= 0 and (self.index is None or self.index >= 0)

    def describe(self) -> str:
        if self.index is not None:
            return f"{self.split}[{self.index}]"
        return f"{self.split} label={self.label} #{self.ordinal}"


@dataclass
class RegionConfig:
    tau: float = 0.036
    theta_high: float = 0.8
    theta_low: float = 0.05
    n_samples: int = 1000
    sample_seed: int = 0
    base_mode: str = BaseMode.MEDIAN.value
    enforce_delta: bool = True
    min_set_size: int = 2
    sweep_b: List[int] = field(default_factory=list)

    @property
    def thresholds(self) -> RegionThresholds:
        return RegionThresholds(self.theta_high, self.theta_low)


@dataclass
class AuditConfig:
    control_delta: float = PRESET_DELTA
    control_samples: int = 1000
    control_seed: int = 0
    clean_limit: Optional[int] = None


def _default_roster() -> List[AttackConfig]:
    return [AttackConfig.default(kind) for kind in AttackKind]


@dataclass
class ExperimentConfig:
    """
    The whole experiment. delta None means automatic (1.2x the largest attack
    L2 of each set, capped at 28); the string "preset" selects 6.0.
    """
    name: str = "experiment"
    architecture: str = "LENET"
    seeds: List[int] = field(default_factory=lambda: list(range(1, 11)))
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    images: List[ImageSelector] = field(default_factory=lambda: [ImageSelector(label=1)])
    attacks: List[AttackConfig] = field(default_factory=_default_roster)
    delta: Optional[float] = None
    min_count: int = 80
    regions: RegionConfig = field(default_factory=RegionConfig)
    audit: AuditConfig = field(default_factory=AuditConfig)
    out_dir: str = "runs/experiment"
    jobs: int = 1

    @property
    def arch(self) -> Architecture:
        return Architecture.from_kind(self.architecture)

    def validate(self) -> None:
        self.arch
        if len(self.seeds) < 2:
            raise ConfigError(f"an ensemble needs at least 2 seeds, got {self.seeds}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"seeds must be distinct: {self.seeds}")
        self.train.validate()
        for selector in self.images:
            if not selector.is_valid():
                raise ConfigError(f"invalid image selector: {selector}")
        for attack in self.attacks:
            attack.validate()
        if self.delta is not None and self.delta < 0:
            raise ConfigError(f"delta must be >= 0, got {self.delta}")
        if self.min_count < 1:
            raise ConfigError("min_count must be >= 1")
        r = self.regions
        for name in ("tau", "theta_high", "theta_low"):
            value = getattr(r, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"regions.{name} must lie in [0,1], got {value}")
        if r.theta_low >= r.theta_high:
            raise ConfigError("regions.theta_low must be below regions.theta_high")
        if r.n_samples < 1:
            raise ConfigError("regions.n_samples must be >= 1")
        try:
            BaseMode(r.base_mode)
        except ValueError:
            raise ConfigError(f"regions.base_mode must be median or clean, got {r.base_mode}")
        if any(b < 1 for b in r.sweep_b):
            raise ConfigError("regions.sweep_b entries must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def with_overrides(self, out_dir: Optional[str] = None, seed_override: Optional[int] = None,
                       jobs: Optional[int] = None) -> "ExperimentConfig":
        """CLI flags win over the document"""
        config = self
        if out_dir is not None:
            config = replace(config, out_dir=out_dir)
        if seed_override is not None:
            config = replace(config, seeds=[seed_override + i for i in range(len(config.seeds))])
        if jobs is not None:
            config = replace(config, jobs=jobs)
        return config

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "architecture": self.architecture,
            "seeds": list(self.seeds),
            "train": self.train.to_dict(),
            "data": dict(vars(self.data)),
            "images": [dict(vars(s)) for s in self.images],
            "attacks": [a.to_dict() for a in self.attacks],
            "delta": self.delta,
            "min_count": self.min_count,
            "regions": dict(vars(self.regions)),
            "audit": dict(vars(self.audit)),
            "out_dir": self.out_dir,
            "jobs": self.jobs,
        }

    @property
    def config_hash(self) -> str:
        """Hash of everything that shapes the results (not out_dir or jobs)"""
        data = self.to_dict()
        data.pop("out_dir")
        data.pop("jobs")
        return config_hash(data)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """
        Build and validate a config document. Every failure, including a
        value of the wrong type in a nested section, is a ConfigError.
        """
        if not isinstance(data, dict):
            raise ConfigError(f"configuration must be a JSON object, got {type(data).__name__}")
        data = dict(data)
        delta = data.get("delta")
        if isinstance(delta, str):
            if delta.lower() != "preset":
                raise ConfigError(f"delta must be a number, null or \"preset\", got {delta!r}")
            data["delta"] = PRESET_DELTA
        values = coerce_fields(cls, data, "config")
        try:
            values.update(
                architecture=values.get("architecture", "LENET").upper(),
                train=TrainConfig.from_dict(values.get("train", {})),
                data=DataConfig(**coerce_fields(DataConfig, values.get("data", {}), "data")),
                images=[ImageSelector(**coerce_fields(ImageSelector, s, "images"))
                        for s in values.get("images", [{"label": 1}])],
                attacks=[AttackConfig.from_dict(a) for a in values["attacks"]]
                if "attacks" in values else _default_roster(),
                regions=RegionConfig(**coerce_fields(RegionConfig, values.get("regions", {}), "regions")),
                audit=AuditConfig(**coerce_fields(AuditConfig, values.get("audit", {}), "audit")),
            )
            config = cls(**values)
            config.validate()
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid configuration: {e}")
        return config

    def min_count_for(self, attack: AttackConfig) -> int:
        """An attack entry's own count wins over the experiment-wide min_count"""
        return self.min_count if attack.count is None else attack.count

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}")
        return cls.from_dict(data)
