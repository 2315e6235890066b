"""
Attack registry and adversarial-set assembly
"""

from typing import Dict, Optional, Type

import numpy as np

from ..exceptions import AttackPreconditionError
from ..models import AdversarialSet, AttackConfig, AttackKind, ImageVec, Model
from ..models.config import MAX_DELTA
from ..utils.filters import CandidateFilters, CandidateFilterContext, apply_filters
from ..utils.helpers import l2_distances
from ..utils.logger import logger
from .base import Attack
from .carlini import CarliniWagnerL2Attack
from .gradient import BIMAttack, FGSMAttack, MIAttack
from .newtonfool import NewtonFoolAttack
from .pointwise import PointwiseAttack

ATTACKS: Dict[AttackKind, Type[Attack]] = {
    AttackKind.PW: PointwiseAttack,
    AttackKind.CW2: CarliniWagnerL2Attack,
    AttackKind.NF: NewtonFoolAttack,
    AttackKind.FGSM: FGSMAttack,
    AttackKind.BIM_L1: BIMAttack,
    AttackKind.BIM_L2: BIMAttack,
    AttackKind.BIM_LINF: BIMAttack,
    AttackKind.MI: MIAttack,
}

# Automatic delta: this multiple of the largest attack L2 in the set
AUTO_DELTA_FACTOR = 1.2


def get_attack(model: Model, config: AttackConfig) -> Attack:
    return ATTACKS[config.kind](model, config)


def run_attack(model: Model, clean: ImageVec, config: AttackConfig,
               true_class: Optional[int] = None) -> AdversarialSet:
    return get_attack(model, config).run(clean, true_class)


def fgsm(model: Model, clean: ImageVec, config: Optional[AttackConfig] = None) -> AdversarialSet:
    return run_attack(model, clean, config or AttackConfig.default(AttackKind.FGSM))


def bim(model: Model, clean: ImageVec, config: Optional[AttackConfig] = None,
        norm: str = "linf") -> AdversarialSet:
    kind = AttackKind.for_bim_norm(norm)
    if config is None:
        config = AttackConfig.default(kind)
    elif config.kind is not kind:
        config = AttackConfig.from_dict(dict(config.to_dict(), kind=kind.value))
    return run_attack(model, clean, config)


def mi(model: Model, clean: ImageVec, config: Optional[AttackConfig] = None) -> AdversarialSet:
    return run_attack(model, clean, config or AttackConfig.default(AttackKind.MI))


def newtonfool(model: Model, clean: ImageVec, config: Optional[AttackConfig] = None) -> AdversarialSet:
    return run_attack(model, clean, config or AttackConfig.default(AttackKind.NF))


def pointwise(model: Model, clean: ImageVec, config: Optional[AttackConfig] = None) -> AdversarialSet:
    return run_attack(model, clean, config or AttackConfig.default(AttackKind.PW))


def cw2(model: Model, clean: ImageVec, config: Optional[AttackConfig] = None) -> AdversarialSet:
    return run_attack(model, clean, config or AttackConfig.default(AttackKind.CW2))


def resolve_delta(examples: np.ndarray, clean: np.ndarray, delta: Optional[float]) -> float:
    """Explicit delta, or 1.2x the largest example L2 capped at the [0,1]^h diameter scale"""
    if delta is not None:
        return float(delta)
    if len(examples) == 0:
        return 0.0
    return float(min(AUTO_DELTA_FACTOR * l2_distances(examples, clean).max(), MAX_DELTA))


def generate_set(model: Model, clean: ImageVec, kind: AttackKind, target_class: int,
                 delta: Optional[float] = None, min_count: int = 80,
                 config: Optional[AttackConfig] = None, true_class: Optional[int] = None,
                 untargeted: Optional[AdversarialSet] = None) -> AdversarialSet:
    """
    I_k(t): merge a targeted run toward t with an untargeted run, keep only
    examples the model assigns to t, dedupe, and filter to the delta ball.
    A result below min_count is flagged as a shortfall, not an error.

    untargeted may pass in an untargeted run already made for another t.
    """
    true_class = clean.label if true_class is None else int(true_class)
    if target_class == true_class:
        raise AttackPreconditionError(f"target class {target_class} equals the true class")
    config = (config or AttackConfig.default(kind)).with_target(None)

    targeted_set = run_attack(model, clean, config.with_target(target_class), true_class)
    if untargeted is None:
        untargeted = run_attack(model, clean, config, true_class)

    examples = np.concatenate([targeted_set.examples, untargeted.examples], axis=0)
    labels = np.concatenate([targeted_set.labels, untargeted.labels], axis=0)
    resolved = resolve_delta(examples[labels == target_class], clean.pixels, delta)

    context = CandidateFilterContext(clean.pixels, true_class, labels, target_class, resolved)
    keep = apply_filters(examples, [
        CandidateFilters.UNIT_BOX,
        CandidateFilters.MISCLASSIFIED,
        CandidateFilters.TARGET_CLASS,
        CandidateFilters.DUPLICATES,
        CandidateFilters.DELTA_BALL,
    ], context)

    shortfall = keep.size < min_count
    label = f"{kind.display_name} {true_class}→{target_class}"
    if shortfall:
        logger.warning(f"{label}: only {keep.size} examples (wanted {min_count})")
    else:
        logger.info(f"{label}: {keep.size} examples within delta {resolved:.3f}")
    return AdversarialSet(
        clean=clean,
        true_class=true_class,
        target_model_id=model.model_id,
        kind=kind,
        target_class=target_class,
        examples=examples[keep],
        labels=labels[keep],
        config=config.with_target(target_class),
        delta=resolved,
        shortfall=shortfall,
    )
