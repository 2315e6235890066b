"""
Ensemble models - the seed-varied model set and its decisions
"""

from dataclasses import dataclass
from typing import Optional, Tuple

from ..exceptions import EnsembleError
from .network import Architecture, Model


@dataclass(frozen=True)
class Ensemble:
    """Models sharing one architecture; models[0] (M_1) is the attack target"""
    models: Tuple[Model, ...]
    architecture: Architecture

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        if not self.models:
            raise EnsembleError("ensemble needs at least one model")
        for model in self.models:
            if model.architecture != self.architecture:
                raise EnsembleError(f"{model.model_id} does not share the ensemble architecture")

    @property
    def seeds(self) -> Tuple[int, ...]:
        return tuple(m.seed for m in self.models)

    @property
    def target(self) -> Model:
        return self.models[0]

    @property
    def size(self) -> int:
        return len(self.models)

    @property
    def column_names(self) -> Tuple[str, ...]:
        return tuple(f"M{i + 1}" for i in range(self.size))

    def require_distinct_seeds(self) -> None:
        if len(set(self.seeds)) != len(self.seeds):
            raise EnsembleError(f"ensemble seeds must be pairwise distinct: {list(self.seeds)}")


@dataclass(frozen=True)
class EnsembleDecision:
    """Unanimous label, or an alert with every member's label attached"""
    labels: Tuple[int, ...]
    label: Optional[int]
    alert: bool


@dataclass(frozen=True)
class AlertSummary:
    """
    Alert strategy over a batch of images with known true class. An empty
    batch has no coverage and no sufficiency verdict.
    """
    n: int
    alert_rate: float
    coverage: Optional[float]
    unalerted_accuracy: Optional[float]
    unanimous_wrong: int

    @property
    def sufficient(self) -> Optional[bool]:
        """Every image either alerted or unanimously correct"""
        if self.n == 0 or self.coverage is None:
            return None
        return self.coverage >= 1.0
