"""
Gradient-sign family: FGSM, BIM (L1, L2, Linf) and momentum iterative (MI).

Each (epsilon, restart) pair is one batch row: restart 0 starts at the clean
image, the others at a tiny uniform perturbation of it.
"""

import numpy as np

from ..models import AttackKind
from ..utils.helpers import normalize_rows, project, project_linf, row_norms
from .base import Attack, random_starts


class GradientAttack(Attack):
    """Shared row layout for the epsilon grid"""

    def start_rows(self, clean: np.ndarray, rng: np.random.Generator):
        grid = self.config.epsilon_grid
        starts = random_starts(clean, self.config.restarts, self.config.random_start, rng)
        x0 = np.tile(starts, (grid.size, 1))
        eps = np.repeat(grid, self.config.restarts)
        return x0, eps

    def step_size(self, eps: np.ndarray) -> np.ndarray:
        if self.config.step_size is not None:
            return np.full_like(eps, self.config.step_size)
        return np.minimum(2.5 * eps / self.config.iterations, eps)


class FGSMAttack(GradientAttack):
    """One signed step of size epsilon from each start, kept inside the Linf ball"""

    kind = AttackKind.FGSM

    def candidates(self, clean, true_class, rng):
        x0, eps = self.start_rows(clean, rng)
        grad = self.objective_gradient(x0, true_class)
        stepped = x0 + eps[:, None] * np.sign(grad)
        return clean[None, :] + project_linf(stepped - clean[None, :], eps)


class BIMAttack(GradientAttack):
    """
    Iterated normalized steps; after every step the iterate is projected
    onto the norm ball around the clean image and clipped to [0,1].
    """

    kind = AttackKind.BIM_LINF

    @classmethod
    def accepts(cls, kind: AttackKind) -> bool:
        return kind in (AttackKind.BIM_L1, AttackKind.BIM_L2, AttackKind.BIM_LINF)

    def candidates(self, clean, true_class, rng):
        norm = self.config.kind.norm
        x, eps = self.start_rows(clean, rng)
        alpha = self.step_size(eps)
        for _ in range(self.config.iterations):
            grad = self.objective_gradient(x, true_class)
            x = x + alpha[:, None] * normalize_rows(grad, norm)
            x = clean[None, :] + project(x - clean[None, :], eps, norm)
            x = np.clip(x, 0.0, 1.0)
        return x


class MIAttack(GradientAttack):
    """BIM Linf with an accumulated, L1-normalized gradient (decay = momentum)"""

    kind = AttackKind.MI

    def candidates(self, clean, true_class, rng):
        x, eps = self.start_rows(clean, rng)
        alpha = self.step_size(eps)
        velocity = np.zeros_like(x)
        for _ in range(self.config.iterations):
            grad = self.objective_gradient(x, true_class)
            velocity = self.config.momentum * velocity + grad / np.maximum(row_norms(grad, "l1"), 1e-12)[:, None]
            x = x + alpha[:, None] * np.sign(velocity)
            x = clean[None, :] + project_linf(x - clean[None, :], eps)
            x = np.clip(x, 0.0, 1.0)
        return x
