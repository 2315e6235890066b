"""
Candidate filters for adversarial examples

Every attack emits raw candidates; these filters decide which of them join an
adversarial set I_k(t).
"""

from abc import ABC, abstractmethod
from typing import List, Optional

import numpy as np

from .helpers import l2_distances, unique_rows


class CandidateFilterContext:
    """What the filters need to know about one batch of candidates"""

    def __init__(self, clean: np.ndarray, true_class: int, labels: np.ndarray,
                 target_class: Optional[int] = None, delta: Optional[float] = None):
        self.clean = clean
        self.true_class = true_class
        self.labels = labels
        self.target_class = target_class
        self.delta = delta


class CandidateFilter(ABC):
    """Base class for candidate filters"""

    @abstractmethod
    def apply_on(self, candidates: np.ndarray, context: CandidateFilterContext) -> np.ndarray:
        """Return a boolean keep-mask over the candidate rows"""
        pass


class MisclassifiedFilter(CandidateFilter):
    """Keep candidates the target model no longer assigns to the true class"""

    def apply_on(self, candidates: np.ndarray, context: CandidateFilterContext) -> np.ndarray:
        return context.labels != context.true_class


class TargetClassFilter(CandidateFilter):
    """Keep candidates assigned to the target class t (no-op when untargeted)"""

    def apply_on(self, candidates: np.ndarray, context: CandidateFilterContext) -> np.ndarray:
        if context.target_class is None:
            return np.ones(len(candidates), dtype=bool)
        return context.labels == context.target_class


class UnitBoxFilter(CandidateFilter):
    """Keep finite candidates inside [0,1]^h"""

    def apply_on(self, candidates: np.ndarray, context: CandidateFilterContext) -> np.ndarray:
        if candidates.size == 0:
            return np.zeros(len(candidates), dtype=bool)
        return np.all(np.isfinite(candidates) & (candidates >= 0.0) & (candidates <= 1.0), axis=1)


class DeltaBallFilter(CandidateFilter):
    """Keep candidates within L2 distance delta of the clean image"""

    def apply_on(self, candidates: np.ndarray, context: CandidateFilterContext) -> np.ndarray:
        if context.delta is None:
            return np.ones(len(candidates), dtype=bool)
        return l2_distances(candidates, context.clean) <= context.delta


class DuplicateFilter(CandidateFilter):
    """Keep the first occurrence of each distinct candidate"""

    def apply_on(self, candidates: np.ndarray, context: CandidateFilterContext) -> np.ndarray:
        mask = np.zeros(len(candidates), dtype=bool)
        mask[unique_rows(candidates)] = True
        return mask


class CandidateFilters:
    """Collection of common filters"""

    MISCLASSIFIED = MisclassifiedFilter()
    TARGET_CLASS = TargetClassFilter()
    UNIT_BOX = UnitBoxFilter()
    DELTA_BALL = DeltaBallFilter()
    DUPLICATES = DuplicateFilter()


def apply_filters(candidates: np.ndarray, filters: List[CandidateFilter],
                  context: CandidateFilterContext) -> np.ndarray:
    """
    Apply filters in order; each filter only sees the rows its predecessors kept.

    Returns:
        Indices of the surviving rows, in their original order
    """
    keep = np.arange(len(candidates))
    for filter_obj in filters:
        if keep.size == 0:
            break
        sub_context = CandidateFilterContext(
            clean=context.clean,
            true_class=context.true_class,
            labels=context.labels[keep],
            target_class=context.target_class,
            delta=context.delta,
        )
        mask = filter_obj.apply_on(candidates[keep], sub_context)
        keep = keep[mask]
    return keep


def membership_filters(with_delta: bool = False) -> List[CandidateFilter]:
    """Filters enforcing the I_k(t) membership predicate"""
    filters = [
        CandidateFilters.UNIT_BOX,
        CandidateFilters.MISCLASSIFIED,
        CandidateFilters.TARGET_CLASS,
        CandidateFilters.DUPLICATES,
    ]
    if with_delta:
        filters.append(CandidateFilters.DELTA_BALL)
    return filters
