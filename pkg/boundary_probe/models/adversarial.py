"""
Adversarial models - attack configuration and adversarial sets I_k(t)
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

from ..exceptions import ConfigError
from ..utils.helpers import coerce_fields, l2_distances, perturbed_mask, transition_label
from .image import ImageVec


class AttackKind(Enum):
    PW = "PW"
    CW2 = "CW2"
    NF = "NF"
    FGSM = "FGSM"
    BIM_L1 = "BIM_L1"
    BIM_L2 = "BIM_L2"
    BIM_LINF = "BIM_LINF"
    MI = "MI"

    @property
    def display_name(self) -> str:
        return {
            AttackKind.BIM_L1: "BIM L1",
            AttackKind.BIM_L2: "BIM L2",
            AttackKind.BIM_LINF: "BIM Linf",
        }.get(self, self.value)

    @property
    def norm(self) -> Optional[str]:
        """Budget norm for the gradient-sign family"""
        return {
            AttackKind.FGSM: "linf",
            AttackKind.BIM_L1: "l1",
            AttackKind.BIM_L2: "l2",
            AttackKind.BIM_LINF: "linf",
            AttackKind.MI: "linf",
        }.get(self)

    @classmethod
    def for_bim_norm(cls, norm: str) -> "AttackKind":
        try:
            return {"l1": cls.BIM_L1, "l2": cls.BIM_L2, "linf": cls.BIM_LINF}[norm.lower()]
        except KeyError:
            raise ConfigError(f"BIM norm must be l1, l2 or linf, got {norm}")


# Per-kind budgets sized for MNIST in [0,1]^784
_DEFAULT_EPSILON = {
    AttackKind.FGSM: 0.8,
    AttackKind.BIM_L1: 60.0,
    AttackKind.BIM_L2: 4.0,
    AttackKind.BIM_LINF: 0.3,
    AttackKind.MI: 0.3,
}


@dataclass(frozen=True)
class AttackConfig:
    """
    One attack family's settings.

    target is the class t of a single run (None = untargeted); targets lists
    the classes a roster entry covers (empty = every class except the true
    one). count, when set, replaces the experiment-wide min_count for this
    entry.
    """
    kind: AttackKind
    epsilon: float = 0.3
    epsilons: List[float] = field(default_factory=list)
    grid_size: int = 10
    iterations: int = 10
    step_size: Optional[float] = None
    restarts: int = 10
    random_start: float = 0.01
    momentum: float = 1.0
    confidence: float = 0.0
    initial_const: float = 1e-2
    binary_search_steps: int = 9
    max_iterations: int = 1000
    learning_rate: float = 1e-2
    abort_early: bool = True
    eta: float = 0.01
    noise_steps: int = 100
    target: Optional[int] = None
    targets: List[int] = field(default_factory=list)
    count: Optional[int] = None
    seed: int = 0
    delta: Optional[float] = None

    @classmethod
    def default(cls, kind: AttackKind, **overrides) -> "AttackConfig":
        """Per-kind defaults (CW2: 9 binary-search steps from 1e-2, 1000 iterations)"""
        settings: Dict[str, Any] = {"kind": kind}
        if kind in _DEFAULT_EPSILON:
            settings["epsilon"] = _DEFAULT_EPSILON[kind]
        if kind is AttackKind.FGSM:
            settings.update(grid_size=40, restarts=4, iterations=1)
        elif kind in (AttackKind.BIM_L1, AttackKind.BIM_L2, AttackKind.BIM_LINF, AttackKind.MI):
            settings.update(grid_size=10, restarts=12, iterations=10)
        elif kind is AttackKind.NF:
            settings.update(restarts=100, iterations=100, eta=0.01)
        elif kind is AttackKind.PW:
            settings.update(restarts=100, noise_steps=100)
        elif kind is AttackKind.CW2:
            settings.update(restarts=12, binary_search_steps=9, max_iterations=1000,
                            initial_const=1e-2, confidence=0.0)
        settings.update(overrides)
        return cls(**settings)

    @property
    def epsilon_grid(self) -> np.ndarray:
        """Explicit epsilons, or grid_size evenly spaced values up to epsilon"""
        if self.epsilons:
            return np.asarray(self.epsilons, dtype=np.float64)
        return np.linspace(self.epsilon / self.grid_size, self.epsilon, self.grid_size)

    def with_target(self, target: Optional[int]) -> "AttackConfig":
        return replace(self, target=None if target is None else int(target))

    def validate(self) -> None:
        if self.epsilon <= 0 or any(e < 0 for e in self.epsilons):
            raise ConfigError(f"{self.kind.value}: epsilon must be > 0")
        if self.grid_size < 1 or self.iterations < 1 or self.restarts < 1:
            raise ConfigError(f"{self.kind.value}: grid_size, iterations and restarts must be >= 1")
        if self.step_size is not None and self.step_size <= 0:
            raise ConfigError(f"{self.kind.value}: step_size must be > 0")
        if self.count is not None and self.count < 1:
            raise ConfigError(f"{self.kind.value}: count must be >= 1")
        if self.delta is not None and self.delta < 0:
            raise ConfigError(f"{self.kind.value}: delta must be >= 0")
        if self.random_start < 0:
            raise ConfigError(f"{self.kind.value}: random_start must be >= 0")
        for t in ([self.target] if self.target is not None else []) + list(self.targets):
            if not 0 <= t <= 9:
                raise ConfigError(f"{self.kind.value}: target class {t} outside 0-9")

    def to_dict(self) -> Dict[str, Any]:
        data = {name: getattr(self, name) for name in self.__dataclass_fields__}
        data["kind"] = self.kind.value
        data["epsilons"] = list(self.epsilons)
        data["targets"] = list(self.targets)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AttackConfig":
        if not isinstance(data, dict) or "kind" not in data:
            raise ConfigError(f"attack entry without kind: {data!r}")
        try:
            kind = AttackKind(str(data["kind"]).upper())
        except ValueError:
            raise ConfigError(f"unknown attack kind: {data['kind']}")
        overrides = coerce_fields(cls, {k: v for k, v in data.items() if k != "kind"},
                                  f"attacks.{kind.value}")
        return cls.default(kind, **overrides)


@dataclass(frozen=True)
class L2Stats:
    minimum: float
    maximum: float
    mean: float

    @classmethod
    def of(cls, distances: np.ndarray) -> "L2Stats":
        distances = np.asarray(distances, dtype=np.float64)
        if distances.size == 0:
            return cls(0.0, 0.0, 0.0)
        return cls(float(distances.min()), float(distances.max()), float(distances.mean()))

    def to_dict(self) -> Dict[str, float]:
        return {"min": self.minimum, "max": self.maximum, "mean": self.mean}

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> "L2Stats":
        return cls(float(data["min"]), float(data["max"]), float(data["mean"]))


@dataclass(frozen=True)
class AdversarialSet:
    """
    I_k(t): adversarial examples from attack k that the target model assigns
    to class t, with provenance. target_class None marks a raw untargeted run
    (examples are only known to be misclassified).
    """
    clean: ImageVec
    true_class: int
    target_model_id: str
    kind: AttackKind
    target_class: Optional[int]
    examples: np.ndarray
    labels: np.ndarray
    config: AttackConfig
    delta: Optional[float] = None
    shortfall: bool = False

    def __post_init__(self):
        examples = np.array(self.examples, dtype=np.float32, copy=True).reshape(-1, self.clean.h)
        labels = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
        if labels.shape[0] != examples.shape[0]:
            raise ValueError(f"{examples.shape[0]} examples but {labels.shape[0]} labels")
        examples.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "examples", examples)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.examples.shape[0])

    @property
    def distances(self) -> np.ndarray:
        return l2_distances(self.examples, self.clean.pixels)

    @property
    def l2_stats(self) -> L2Stats:
        return L2Stats.of(self.distances)

    @property
    def perturbed_pixels(self) -> np.ndarray:
        """Indices perturbed by at least one example"""
        if len(self) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(np.any(perturbed_mask(self.examples, self.clean.pixels), axis=0))

    @property
    def perturbed_pixel_count(self) -> int:
        """The 'd' in row labels such as 'CW2 286d 1→2'"""
        return int(self.perturbed_pixels.size)

    @property
    def transition(self) -> str:
        return transition_label(self.true_class, self.target_class)

    @property
    def row_label(self) -> str:
        return f"{self.kind.display_name} {self.perturbed_pixel_count}d {self.transition}"

    @property
    def file_stem(self) -> str:
        target = "any" if self.target_class is None else str(self.target_class)
        return f"{self.kind.value}_{self.true_class}to{target}"

    def header(self) -> Dict[str, Any]:
        return {
            "clean_id": self.clean.source_id,
            "clean_label": self.clean.label,
            "true_class": self.true_class,
            "target_model_id": self.target_model_id,
            "kind": self.kind.value,
            "target_class": self.target_class,
            "attack_config": self.config.to_dict(),
            "delta": self.delta,
            "shortfall": self.shortfall,
            "count": len(self),
            "labels": [int(v) for v in self.labels],
            "l2": [float(v) for v in self.distances],
        }
