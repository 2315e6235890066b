"""
Region Engine - hyper-rectangles R_k(t) built from adversarial sets

Flow:
1. compute_intervals(): per-pixel [min, max] over the set, ranked by size
2. choose_b() + build_rectangle(): keep the b largest intervals
3. sample() / evaluate(): uniform samples scored by every ensemble member
4. classify_region(): TYPE1 / TYPE2 (uncertainty regions) or TYPE3 (transferable)
"""

import json
import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import gammaln

from ..exceptions import RegionError
from ..models import (
    AdversarialSet, AttackKind, BallVolume, BaseMode, DimensionSweepPoint, Ensemble,
    HyperRectangle, L2Stats, PixelInterval, RegionReport, RegionThresholds, RegionType
)
from ..utils.helpers import PERTURBATION_TOLERANCE, canonical_json, l2_distances, make_rng
from ..utils.logger import logger
from .ensemble import misclassification_rates, predict_matrix

# Rejection sampling gives up after this many batches of n draws
MAX_REJECTION_ROUNDS = 100


def compute_intervals(adv_set: AdversarialSet) -> List[PixelInterval]:
    """
    One interval per perturbed pixel, sorted by size (descending) then pixel
    index. Pointwise sets use [0, 1] for every perturbed pixel.
    """
    if len(adv_set) == 0:
        raise RegionError(f"{adv_set.file_stem}: cannot build intervals from an empty set")
    examples = adv_set.examples
    clean = adv_set.clean.pixels
    perturbed = np.flatnonzero(np.any(
        np.abs(examples.astype(np.float64) - clean.astype(np.float64)) > PERTURBATION_TOLERANCE, axis=0
    ))
    lo = examples[:, perturbed].min(axis=0)
    hi = examples[:, perturbed].max(axis=0)
    median = np.median(examples[:, perturbed].astype(np.float64), axis=0).astype(np.float32)
    if adv_set.kind is AttackKind.PW:
        lo = np.zeros_like(lo)
        hi = np.ones_like(hi)

    sizes = hi.astype(np.float64) - lo.astype(np.float64)
    order = np.lexsort((perturbed, -sizes))
    return [
        PixelInterval(int(perturbed[j]), float(lo[j]), float(hi[j]), float(median[j]))
        for j in order
    ]


def choose_b(intervals: Sequence[PixelInterval], tau: float) -> int:
    """Largest b whose smallest selected size is still >= tau; at least 1"""
    if not intervals:
        raise RegionError("choose_b needs at least one interval")
    return max(1, sum(1 for iv in intervals if iv.size >= tau))


def build_rectangle(intervals: Sequence[PixelInterval], clean: np.ndarray, b: int,
                    base_mode: BaseMode = BaseMode.MEDIAN, **provenance) -> HyperRectangle:
    """
    Select the top-b intervals. Perturbed pixels left out are held at the set
    median (MEDIAN) or the clean value (CLEAN); all others stay clean.

    Raises:
        RegionError: b outside 1..len(intervals)
    """
    m = len(intervals)
    if not 1 <= b <= m:
        raise RegionError(f"b must lie in 1..{m}, got {b}")
    clean = np.asarray(clean, dtype=np.float32).reshape(-1)
    base = clean.copy()
    if base_mode is BaseMode.MEDIAN:
        for iv in intervals[b:]:
            base[iv.index] = iv.median
    selected = tuple(intervals[:b])
    for iv in selected:
        base[iv.index] = clean[iv.index]
    return HyperRectangle(selected, base, clean, base_mode=base_mode, perturbed_count=m, **provenance)


def rectangle_for_set(adv_set: AdversarialSet, tau: float, base_mode: BaseMode = BaseMode.MEDIAN,
                      b: Optional[int] = None) -> HyperRectangle:
    intervals = compute_intervals(adv_set)
    b = choose_b(intervals, tau) if b is None else b
    return build_rectangle(
        intervals, adv_set.clean.pixels, b, base_mode,
        kind=adv_set.kind, true_class=adv_set.true_class,
        target_class=adv_set.target_class, target_model_id=adv_set.target_model_id,
    )


def _draw(rect: HyperRectangle, n: int, rng: np.random.Generator) -> np.ndarray:
    samples = np.repeat(rect.base[None, :], n, axis=0)
    if rect.b:
        lower = rect.lower.astype(np.float64)
        upper = rect.upper.astype(np.float64)
        samples[:, rect.indices] = rng.uniform(lower, upper, size=(n, rect.b)).astype(np.float32)
    return samples


def sample_within_delta(rect: HyperRectangle, n: int, seed: int,
                        delta: Optional[float] = None) -> Tuple[np.ndarray, int]:
    """
    n uniform samples; with delta set, draws outside B(delta, W) are rejected.

    Returns:
        (samples (n', h) float32 with n' <= n, number of rejected draws)
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    rng = make_rng(seed)
    if delta is None:
        return _draw(rect, n, rng), 0

    kept: List[np.ndarray] = []
    total = rejected = 0
    for _ in range(MAX_REJECTION_ROUNDS):
        batch = _draw(rect, n, rng)
        inside = l2_distances(batch, rect.clean) <= delta
        rejected += int(np.sum(~inside))
        kept.append(batch[inside])
        total += int(np.sum(inside))
        if total >= n:
            break
    samples = np.concatenate(kept, axis=0)[:n]
    if len(samples) < n:
        logger.warning(f"{rect.row_label}: only {len(samples)} of {n} samples fall inside delta {delta:.3f}")
    return samples, rejected


def sample(rect: HyperRectangle, n: int, seed: int, delta: Optional[float] = None) -> np.ndarray:
    """Selected coordinates uniform in [lo, hi], others at base; deterministic per seed"""
    return sample_within_delta(rect, n, seed, delta)[0]


def classify_region(rates: Union[RegionReport, Sequence[float]], theta_high: float = 0.8,
                    theta_low: float = 0.05) -> RegionType:
    """
    rates[0] is the attack target M_1.
    TYPE1: target >= theta_high and some other model <= theta_low
    TYPE2: target <= theta_low and some other model >= theta_high
    TYPE3: every model >= theta_high
    """
    if isinstance(rates, RegionReport):
        rates = rates.rates
    if not rates:
        return RegionType.UNCLASSIFIED
    target, others = rates[0], list(rates[1:])
    if all(r >= theta_high for r in rates):
        return RegionType.TYPE3
    if target >= theta_high and any(r <= theta_low for r in others):
        return RegionType.TYPE1
    if target <= theta_low and any(r >= theta_high for r in others):
        return RegionType.TYPE2
    return RegionType.UNCLASSIFIED


def evaluate(rect: HyperRectangle, ens: Ensemble, n: int, seed: int,
             true_class: Optional[int] = None, adv_set: Optional[AdversarialSet] = None,
             thresholds: RegionThresholds = RegionThresholds(),
             delta: Optional[float] = None, samples: Optional[np.ndarray] = None) -> RegionReport:
    """
    Score n samples of the rectangle with every model. Pass samples to reuse
    a draw; pass delta to reject samples outside B(delta, W).
    """
    true_class = rect.true_class if true_class is None else true_class
    if true_class is None:
        raise RegionError("evaluate needs the true class of the clean image")
    rejected = 0
    if samples is None:
        samples, rejected = sample_within_delta(rect, n, seed, delta)

    labels = predict_matrix(ens, samples) if len(samples) else np.zeros((ens.size, 0), dtype=np.int64)
    rates = misclassification_rates(ens, samples, true_class, labels=labels)
    distances = l2_distances(samples, rect.clean)
    within = float(np.mean(distances <= delta)) if delta is not None and len(samples) else 1.0
    if len(samples):
        region_type = classify_region(rates, thresholds.theta_high, thresholds.theta_low)
    else:
        region_type = RegionType.EMPTY
        logger.warning(f"{rect.row_label}: no sample inside delta {delta}, region left empty")
    report = RegionReport(
        label=rect.row_label,
        rates=rates,
        sample_l2=L2Stats.of(distances),
        attack_l2=adv_set.l2_stats if adv_set is not None else L2Stats(0.0, 0.0, 0.0),
        n_samples=int(len(samples)),
        seed=seed,
        b=rect.b,
        smallest_size=rect.smallest_size,
        kind=rect.kind,
        true_class=true_class,
        target_class=rect.target_class,
        region_type=region_type,
        thresholds=thresholds,
        delta=delta,
        within_delta=within,
        rejected=rejected,
    )
    logger.info(f"{report.label}: {report.region_type.value}, rates {[round(r, 3) for r in rates]}")
    return report


def sweep_dimensions(intervals: Sequence[PixelInterval], clean: np.ndarray, ens: Ensemble,
                     b_grid: Sequence[int], n: int, seed: int, true_class: int,
                     base_mode: BaseMode = BaseMode.MEDIAN) -> List[DimensionSweepPoint]:
    """Rates as the rectangle grows; b values above the interval count are skipped"""
    points = []
    for b in sorted(set(int(v) for v in b_grid)):
        if not 1 <= b <= len(intervals):
            continue
        rect = build_rectangle(intervals, clean, b, base_mode)
        samples = sample(rect, n, seed)
        rates = misclassification_rates(ens, samples, true_class)
        points.append(DimensionSweepPoint(
            b=b,
            smallest_size=rect.smallest_size,
            rates=rates,
            sample_l2_mean=float(l2_distances(samples, rect.clean).mean()),
        ))
    return points


def sample_ball(clean: np.ndarray, delta: float, n: int, seed: int) -> np.ndarray:
    """
    Uniform draws from B(delta, W) (Gaussian direction, U^(1/h) radius),
    clipped to [0,1]^h; clipping toward the box never increases the distance.
    """
    clean = np.asarray(clean, dtype=np.float64).reshape(-1)
    h = clean.size
    rng = make_rng(seed, h)
    directions = rng.standard_normal((n, h))
    directions /= np.maximum(np.linalg.norm(directions, axis=1, keepdims=True), 1e-12)
    radii = delta * rng.random(n) ** (1.0 / h)
    points = clean[None, :] + radii[:, None] * directions
    return np.clip(points, 0.0, 1.0).astype(np.float32)


def ball_volume(h: int, delta: float) -> BallVolume:
    """
    |B(delta, W)| = pi^(h/2) / Gamma(1 + h/2) * delta^h, evaluated in log space.
    value is inf (overflow) or 0.0 (underflow) when not representable.
    """
    if h < 1 or not delta > 0:
        raise ValueError(f"ball_volume needs h >= 1 and delta > 0, got h={h}, delta={delta}")
    log_volume = 0.5 * h * math.log(math.pi) - float(gammaln(1.0 + 0.5 * h)) + h * math.log(delta)
    if log_volume > math.log(np.finfo(np.float64).max):
        logger.warning(f"ball volume overflows for h={h}, delta={delta} (log {log_volume:.2f})")
        return BallVolume(h, delta, log_volume, math.inf, False)
    if log_volume < math.log(np.finfo(np.float64).tiny):
        return BallVolume(h, delta, log_volume, 0.0, False)
    return BallVolume(h, delta, log_volume, math.exp(log_volume), True)


def ball_volume_monte_carlo(h: int, delta: float, n: int = 200_000, seed: int = 0,
                            chunk: int = 50_000) -> float:
    """Fraction of cube draws inside the ball, times the cube volume (2 delta)^h"""
    rng = make_rng(seed, h)
    inside = 0
    remaining = n
    while remaining > 0:
        size = min(chunk, remaining)
        points = rng.uniform(-delta, delta, size=(size, h))
        inside += int(np.sum(np.sum(points * points, axis=1) <= delta * delta))
        remaining -= size
    return inside / n * (2.0 * delta) ** h


def save_rectangle(rect: HyperRectangle, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(rect.to_dict()), encoding="utf-8")
    return path


def load_rectangle(path: Union[str, Path]) -> HyperRectangle:
    return HyperRectangle.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_report(report: RegionReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(report.to_dict()), encoding="utf-8")
    return path


def load_report(path: Union[str, Path]) -> RegionReport:
    return RegionReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
