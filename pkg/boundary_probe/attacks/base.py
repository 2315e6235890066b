"""
Attack base class - shared precondition, candidate filtering and set assembly
"""

from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from ..core.network import input_gradient, predict, predict_batch
from ..exceptions import AttackPreconditionError
from ..models import AdversarialSet, AttackConfig, AttackKind, ImageVec, Model
from ..utils.filters import CandidateFilterContext, apply_filters, membership_filters
from ..utils.helpers import make_rng
from ..utils.logger import logger

UNTARGETED_STREAM = 10


class Attack(ABC):
    """
    One attack family run against one target model.

    Subclasses only generate raw candidates; run() checks the precondition,
    clips to [0,1], labels the candidates with the target model and keeps
    those satisfying the adversarial-set membership predicate.
    """

    kind: AttackKind

    def __init__(self, model: Model, config: AttackConfig):
        if config.kind is not self.kind and not self.accepts(config.kind):
            raise ValueError(f"{type(self).__name__} cannot run {config.kind.value}")
        self.model = model
        self.config = config

    @classmethod
    def accepts(cls, kind: AttackKind) -> bool:
        return kind is cls.kind

    @abstractmethod
    def candidates(self, clean: np.ndarray, true_class: int,
                   rng: np.random.Generator) -> np.ndarray:
        """Raw candidate images (m, h); may contain failures"""
        pass

    def rng_for(self, true_class: int) -> np.random.Generator:
        """Independent stream per (seed, kind, target)"""
        kind_index = list(AttackKind).index(self.config.kind)
        target = UNTARGETED_STREAM if self.config.target is None else self.config.target
        return make_rng(self.config.seed, kind_index, target, true_class)

    def objective_gradient(self, x: np.ndarray, true_class: int) -> np.ndarray:
        """
        Ascent direction: grad of -log p_c when untargeted, of log p_t when targeted
        """
        if self.config.target is None:
            return input_gradient(self.model, x, true_class).astype(np.float64)
        return -input_gradient(self.model, x, self.config.target).astype(np.float64)

    def is_adversarial(self, labels: np.ndarray, true_class: int) -> np.ndarray:
        if self.config.target is None:
            return labels != true_class
        return labels == self.config.target

    def check_precondition(self, clean: ImageVec, true_class: int) -> None:
        label = predict(self.model, clean)
        if label != true_class:
            raise AttackPreconditionError(
                f"{self.model.model_id} labels {clean.source_id} as {label}, not {true_class}"
            )
        if self.config.target is not None and self.config.target == true_class:
            raise AttackPreconditionError(f"target class {self.config.target} equals the true class")

    def run(self, clean: ImageVec, true_class: Optional[int] = None) -> AdversarialSet:
        true_class = clean.label if true_class is None else int(true_class)
        if true_class is None:
            raise AttackPreconditionError("clean image has no label and no true class was given")
        self.check_precondition(clean, true_class)

        raw = self.candidates(clean.pixels.astype(np.float64), true_class, self.rng_for(true_class))
        raw = np.asarray(raw, dtype=np.float64).reshape(-1, clean.h)
        raw = raw[np.all(np.isfinite(raw), axis=1)]
        candidates = np.clip(raw, 0.0, 1.0).astype(np.float32)
        labels = predict_batch(self.model, candidates) if len(candidates) else np.zeros(0, dtype=np.int64)

        context = CandidateFilterContext(
            clean=clean.pixels,
            true_class=true_class,
            labels=labels,
            target_class=self.config.target,
            delta=self.config.delta,
        )
        keep = apply_filters(candidates, membership_filters(self.config.delta is not None), context)
        logger.debug(f"{self.config.kind.value} target={self.config.target}: "
                     f"{keep.size} of {len(candidates)} candidates kept")
        return AdversarialSet(
            clean=clean,
            true_class=true_class,
            target_model_id=self.model.model_id,
            kind=self.config.kind,
            target_class=self.config.target,
            examples=candidates[keep],
            labels=labels[keep],
            config=self.config,
            delta=self.config.delta,
        )


def random_starts(clean: np.ndarray, rows: int, radius: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Row 0 is the clean image; the rest add U(-radius, radius) noise, clipped"""
    starts = np.repeat(clean[None, :], rows, axis=0)
    if rows > 1 and radius > 0:
        starts[1:] += rng.uniform(-radius, radius, size=(rows - 1, clean.size))
    return np.clip(starts, 0.0, 1.0)
