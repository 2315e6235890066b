"""
Pointwise - decision-based L0 attack: a salt-and-pepper start, then greedy
restoration of pixels to their clean values while the result stays adversarial.
"""

from typing import Optional

import numpy as np

from ..core.network import predict, predict_batch
from ..models import AttackKind, Model
from ..utils.helpers import PERTURBATION_TOLERANCE
from .base import Attack


def salt_and_pepper_starts(model: Model, clean: np.ndarray, restarts: int, noise_steps: int,
                           is_adversarial, rng: np.random.Generator) -> np.ndarray:
    """
    For each restart raise the corruption probability p over a grid until the
    corrupted image is adversarial. Restarts that never succeed are dropped.
    """
    uniforms = rng.random((restarts, clean.size))
    found: list = [None] * restarts
    for p in np.linspace(0.0, 1.0, noise_steps + 1)[1:]:
        pending = [r for r in range(restarts) if found[r] is None]
        if not pending:
            break
        batch = np.repeat(clean[None, :], len(pending), axis=0)
        u = uniforms[pending]
        batch[u < p / 2] = 0.0
        batch[u > 1.0 - p / 2] = 1.0
        hits = is_adversarial(predict_batch(model, batch))
        for row, r in enumerate(pending):
            if hits[row]:
                found[r] = batch[row]
    return np.asarray([x for x in found if x is not None]).reshape(-1, clean.size)


def greedy_restore(model: Model, start: np.ndarray, clean: np.ndarray, is_adversarial,
                   rng: np.random.Generator, max_passes: Optional[int] = None) -> np.ndarray:
    """
    Visit perturbed pixels in random order, restoring each one whose clean
    value keeps the image adversarial; repeat until a pass restores nothing.
    """
    x = start.copy()
    passes = 0
    while max_passes is None or passes < max_passes:
        passes += 1
        perturbed = np.flatnonzero(np.abs(x - clean) > PERTURBATION_TOLERANCE)
        restored = 0
        for i in rng.permutation(perturbed):
            saved = x[i]
            x[i] = clean[i]
            if is_adversarial(np.asarray([predict(model, x)]))[0]:
                restored += 1
            else:
                x[i] = saved
        if restored == 0:
            break
    return x


class PointwiseAttack(Attack):

    kind = AttackKind.PW

    def candidates(self, clean, true_class, rng):
        def adversarial(labels):
            return self.is_adversarial(labels, true_class)

        starts = salt_and_pepper_starts(self.model, clean, self.config.restarts,
                                        self.config.noise_steps, adversarial, rng)
        if len(starts) == 0:
            return starts
        return np.stack([greedy_restore(self.model, s, clean, adversarial, rng) for s in starts])
