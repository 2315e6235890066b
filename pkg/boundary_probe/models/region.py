"""
Region models - pixel intervals, hyper-rectangles R_k(t) and region reports
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..utils.helpers import rounded, transition_label
from .adversarial import AttackKind, L2Stats


class RegionType(Enum):
    TYPE1 = "TYPE1"   # target misclassifies, another model is correct
    TYPE2 = "TYPE2"   # target is correct, another model misclassifies
    TYPE3 = "TYPE3"   # every model misclassifies (transferable)
    UNCLASSIFIED = "UNCLASSIFIED"
    EMPTY = "EMPTY"   # no sample survived the delta ball; rates are undefined

    @property
    def is_uncertainty_region(self) -> bool:
        return self in (RegionType.TYPE1, RegionType.TYPE2)


class BaseMode(Enum):
    """Value given to perturbed pixels left out of the rectangle"""
    MEDIAN = "median"
    CLEAN = "clean"


@dataclass(frozen=True)
class PixelInterval:
    index: int
    lo: float
    hi: float
    median: float

    @property
    def size(self) -> float:
        return self.hi - self.lo

    def to_dict(self) -> Dict[str, Any]:
        return {"index": self.index, "lo": self.lo, "hi": self.hi, "median": self.median}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PixelInterval":
        return cls(int(data["index"]), float(data["lo"]), float(data["hi"]), float(data["median"]))


@dataclass(frozen=True)
class HyperRectangle:
    """
    The b largest intervals of an adversarial set; every other pixel is held
    at base (clean value, or the set median for perturbed-but-unselected
    pixels).
    """
    intervals: Tuple[PixelInterval, ...]
    base: np.ndarray
    clean: np.ndarray
    kind: Optional[AttackKind] = None
    true_class: Optional[int] = None
    target_class: Optional[int] = None
    target_model_id: Optional[str] = None
    base_mode: BaseMode = BaseMode.MEDIAN
    perturbed_count: int = 0

    def __post_init__(self):
        for name in ("base", "clean"):
            array = np.array(getattr(self, name), dtype=np.float32, copy=True).reshape(-1)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def b(self) -> int:
        return len(self.intervals)

    @property
    def smallest_size(self) -> float:
        """s_(b), the smallest selected interval size"""
        return self.intervals[-1].size if self.intervals else 0.0

    @property
    def indices(self) -> np.ndarray:
        return np.asarray([iv.index for iv in self.intervals], dtype=np.int64)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray([iv.lo for iv in self.intervals], dtype=np.float32)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray([iv.hi for iv in self.intervals], dtype=np.float32)

    def corners(self) -> Tuple[np.ndarray, np.ndarray]:
        """Lowest and highest corner as full images"""
        low = self.base.copy()
        high = self.base.copy()
        low[self.indices] = self.lower
        high[self.indices] = self.upper
        return low, high

    def contains(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float32).reshape(-1, self.base.size)
        low, high = self.corners()
        return np.all((batch >= low) & (batch <= high), axis=1)

    @property
    def row_label(self) -> str:
        kind = self.kind.display_name if self.kind else "R"
        if self.true_class is None:
            return f"{kind} {self.b}d"
        return f"{kind} {self.b}d {transition_label(self.true_class, self.target_class)}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value if self.kind else None,
            "true_class": self.true_class,
            "target_class": self.target_class,
            "target_model_id": self.target_model_id,
            "b": self.b,
            "smallest_size": self.smallest_size,
            "perturbed_count": self.perturbed_count,
            "base_mode": self.base_mode.value,
            "intervals": [iv.to_dict() for iv in self.intervals],
            "base": [float(v) for v in self.base],
            "clean": [float(v) for v in self.clean],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "HyperRectangle":
        return cls(
            intervals=tuple(PixelInterval.from_dict(iv) for iv in data["intervals"]),
            base=np.asarray(data["base"], dtype=np.float32),
            clean=np.asarray(data["clean"], dtype=np.float32),
            kind=AttackKind(data["kind"]) if data.get("kind") else None,
            true_class=data.get("true_class"),
            target_class=data.get("target_class"),
            target_model_id=data.get("target_model_id"),
            base_mode=BaseMode(data.get("base_mode", "median")),
            perturbed_count=int(data.get("perturbed_count", 0)),
        )


@dataclass(frozen=True)
class RegionThresholds:
    theta_high: float = 0.8
    theta_low: float = 0.05


@dataclass
class RegionReport:
    """One row of the rate table plus one row of the L2 table"""
    label: str
    rates: List[float]
    sample_l2: L2Stats
    attack_l2: L2Stats
    n_samples: int
    seed: int
    b: int = 0
    smallest_size: float = 0.0
    kind: Optional[AttackKind] = None
    true_class: Optional[int] = None
    target_class: Optional[int] = None
    region_type: RegionType = RegionType.UNCLASSIFIED
    thresholds: RegionThresholds = field(default_factory=RegionThresholds)
    delta: Optional[float] = None
    within_delta: float = 1.0
    rejected: int = 0

    @property
    def l2_label(self) -> str:
        kind = self.kind.display_name if self.kind else "R"
        if self.true_class is None:
            return kind
        return f"{kind} {transition_label(self.true_class, self.target_class)}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "kind": self.kind.value if self.kind else None,
            "true_class": self.true_class,
            "target_class": self.target_class,
            "b": self.b,
            "smallest_size": round(float(self.smallest_size), 6),
            "rates": rounded(self.rates),
            "sample_l2": {k: round(v, 4) for k, v in self.sample_l2.to_dict().items()},
            "attack_l2": {k: round(v, 4) for k, v in self.attack_l2.to_dict().items()},
            "region_type": self.region_type.value,
            "theta_high": self.thresholds.theta_high,
            "theta_low": self.thresholds.theta_low,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "delta": self.delta,
            "within_delta": round(float(self.within_delta), 6),
            "rejected": self.rejected,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RegionReport":
        return cls(
            label=data["label"],
            rates=[float(r) for r in data["rates"]],
            sample_l2=L2Stats.from_dict(data["sample_l2"]),
            attack_l2=L2Stats.from_dict(data["attack_l2"]),
            n_samples=int(data["n_samples"]),
            seed=int(data["seed"]),
            b=int(data.get("b", 0)),
            smallest_size=float(data.get("smallest_size", 0.0)),
            kind=AttackKind(data["kind"]) if data.get("kind") else None,
            true_class=data.get("true_class"),
            target_class=data.get("target_class"),
            region_type=RegionType(data.get("region_type", "UNCLASSIFIED")),
            thresholds=RegionThresholds(float(data.get("theta_high", 0.8)), float(data.get("theta_low", 0.05))),
            delta=data.get("delta"),
            within_delta=float(data.get("within_delta", 1.0)),
            rejected=int(data.get("rejected", 0)),
        )


@dataclass(frozen=True)
class DimensionSweepPoint:
    """Ensemble rates for the rectangle built from the b largest intervals"""
    b: int
    smallest_size: float
    rates: List[float]
    sample_l2_mean: float


@dataclass(frozen=True)
class BallVolume:
    """|B(delta, W)| in log space; value is inf/0.0 when not representable"""
    h: int
    delta: float
    log_volume: float
    value: float
    representable: bool
