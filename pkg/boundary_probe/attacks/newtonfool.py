"""
NewtonFool - shrink the true-class probability with Newton-style steps
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..core.network import forward, logit_gradients
from ..models import AttackKind, Model
from .base import Attack, random_starts


@dataclass(frozen=True)
class NewtonFoolPath:
    point: np.ndarray
    trace: np.ndarray      # true-class probability before each step, plus the final value
    converged: bool


def _true_class_gradient(model: Model, x: np.ndarray,
                         true_class: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Probabilities, p_c per row and the gradient of p_c with respect to the pixels"""
    probs = forward(model, x).astype(np.float64)
    p_c = probs[:, true_class]
    # dp_c/dz_j = p_c (1[j = c] - p_j)
    dlogits = -p_c[:, None] * probs
    dlogits[:, true_class] += p_c
    grad, _ = logit_gradients(model, x, dlogits)
    return probs, p_c, grad.astype(np.float64)


def newtonfool_batch(model: Model, starts: np.ndarray, clean: np.ndarray, true_class: int,
                     eta: float = 0.01, max_iter: int = 100):
    """
    Step along -grad p_c with magnitude min(eta * |W| * |grad|, p_c - 1/C) / |grad|^2
    until the label leaves the true class. Rows that converge stop moving.

    Returns:
        (points (n, h), traces (iterations + 1, n), converged mask)
    """
    x = np.array(starts, dtype=np.float64, copy=True)
    n = x.shape[0]
    num_classes = model.architecture.num_classes
    clean_norm = float(np.linalg.norm(clean))
    active = np.ones(n, dtype=bool)
    traces = []
    for _ in range(max_iter):
        probs, p_c, grad = _true_class_gradient(model, x, true_class)
        traces.append(p_c)
        active &= np.argmax(probs, axis=1) == true_class
        if not np.any(active):
            break
        grad_norm = np.linalg.norm(grad, axis=1)
        grad_sq = np.maximum(grad_norm ** 2, 1e-20)
        magnitude = np.minimum(eta * clean_norm * grad_norm, np.maximum(p_c - 1.0 / num_classes, 0.0))
        step = (magnitude / grad_sq)[:, None] * grad
        x[active] = np.clip(x[active] - step[active], 0.0, 1.0)
    probs = forward(model, x)
    traces.append(probs[:, true_class].astype(np.float64))
    converged = np.argmax(probs, axis=1) != true_class
    return x, np.stack(traces), converged


def newtonfool_path(model: Model, x0: np.ndarray, true_class: int,
                    eta: float = 0.01, max_iter: int = 100) -> NewtonFoolPath:
    """Single-image run from x0, keeping the per-step probability trace"""
    x0 = np.asarray(x0, dtype=np.float64).reshape(1, -1)
    points, traces, converged = newtonfool_batch(model, x0, x0[0], true_class, eta, max_iter)
    return NewtonFoolPath(points[0], traces[:, 0], bool(converged[0]))


class NewtonFoolAttack(Attack):
    """Untargeted by nature; a target only narrows which results are kept"""

    kind = AttackKind.NF

    def candidates(self, clean, true_class, rng):
        starts = random_starts(clean, self.config.restarts, self.config.random_start, rng)
        points, _, converged = newtonfool_batch(
            self.model, starts, clean, true_class, self.config.eta, self.config.iterations
        )
        return points[converged]
