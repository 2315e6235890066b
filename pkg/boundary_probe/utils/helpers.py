"""
Numeric and bookkeeping helpers shared across modules
"""

import hashlib
import json
from dataclasses import fields
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union, get_args, get_origin

import numpy as np

from ..exceptions import ConfigError

# A pixel counts as perturbed when it moves by more than this (float noise guard)
PERTURBATION_TOLERANCE = 1e-6

NUM_CLASSES = 10


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """
    Build a Philox (counter-based, 64-bit) generator for a task.

    The extra keys split one configured seed into independent streams, so
    concurrent tasks never share random state.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def as_batch(images: Union[np.ndarray, Sequence[Any]], dtype=np.float32) -> np.ndarray:
    """
    Stack ImageVecs or raw vectors into a 2-D (n, h) array. A single ImageVec
    or a Dataset is accepted as well.
    """
    if hasattr(images, "pixels"):
        batch = images.pixels
    elif hasattr(images, "images"):
        batch = images.images
    elif isinstance(images, np.ndarray):
        batch = images
    else:
        batch = np.stack([getattr(img, "pixels", img) for img in images]) if len(images) else np.zeros((0, 0))
    batch = np.asarray(batch, dtype=dtype)
    if batch.ndim == 1:
        batch = batch[None, :]
    return batch


def one_hot(labels: np.ndarray, num_classes: int = NUM_CLASSES, dtype=np.float64) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], num_classes), dtype=dtype)
    out[np.arange(labels.shape[0]), labels] = 1
    return out


def l2_distances(batch: np.ndarray, clean: np.ndarray) -> np.ndarray:
    """Row-wise L2 distance to the clean image, computed in 64-bit"""
    diff = np.asarray(batch, dtype=np.float64) - np.asarray(clean, dtype=np.float64)[None, :]
    return np.sqrt(np.sum(diff * diff, axis=1))


def perturbed_mask(batch: np.ndarray, clean: np.ndarray,
                   tolerance: float = PERTURBATION_TOLERANCE) -> np.ndarray:
    """Per-row boolean mask of pixels that differ from the clean image"""
    diff = np.abs(np.asarray(batch, dtype=np.float64) - np.asarray(clean, dtype=np.float64)[None, :])
    return diff > tolerance


def row_norms(delta: np.ndarray, norm: str) -> np.ndarray:
    if norm == "l1":
        return np.sum(np.abs(delta), axis=1)
    if norm == "l2":
        return np.sqrt(np.sum(delta * delta, axis=1))
    if norm == "linf":
        return np.max(np.abs(delta), axis=1)
    raise ValueError(f"unknown norm: {norm}")


def normalize_rows(grad: np.ndarray, norm: str) -> np.ndarray:
    """Scale each row to unit norm (zero rows stay zero)"""
    if norm == "linf":
        return np.sign(grad)
    norms = row_norms(grad, norm)
    return grad / np.maximum(norms, 1e-12)[:, None]


def project_linf(delta: np.ndarray, eps: Union[float, np.ndarray]) -> np.ndarray:
    eps = np.broadcast_to(np.asarray(eps, dtype=np.float64).reshape(-1, 1), (delta.shape[0], 1))
    return np.clip(delta, -eps, eps)


def project_l2(delta: np.ndarray, eps: Union[float, np.ndarray]) -> np.ndarray:
    eps = np.broadcast_to(np.asarray(eps, dtype=np.float64).reshape(-1), (delta.shape[0],))
    norms = row_norms(delta, "l2")
    scale = np.where(norms > eps, eps / np.maximum(norms, 1e-12), 1.0)
    return delta * scale[:, None]


def project_l1(delta: np.ndarray, eps: Union[float, np.ndarray]) -> np.ndarray:
    """
    Euclidean projection of each row onto the L1 ball (sort-and-threshold).
    """
    eps = np.broadcast_to(np.asarray(eps, dtype=np.float64).reshape(-1), (delta.shape[0],))
    magnitude = np.abs(delta)
    outside = magnitude.sum(axis=1) > eps
    if not np.any(outside):
        return delta

    out = delta.copy()
    rows = magnitude[outside]
    radius = eps[outside]
    sorted_desc = -np.sort(-rows, axis=1)
    cumulative = np.cumsum(sorted_desc, axis=1)
    ranks = np.arange(1, rows.shape[1] + 1)
    positive = sorted_desc - (cumulative - radius[:, None]) / ranks > 0
    rho = rows.shape[1] - 1 - np.argmax(positive[:, ::-1], axis=1)
    theta = (cumulative[np.arange(rows.shape[0]), rho] - radius) / (rho + 1)
    out[outside] = np.sign(delta[outside]) * np.maximum(rows - theta[:, None], 0.0)
    return out


def project(delta: np.ndarray, eps: Union[float, np.ndarray], norm: str) -> np.ndarray:
    if norm == "linf":
        return project_linf(delta, eps)
    if norm == "l2":
        return project_l2(delta, eps)
    if norm == "l1":
        return project_l1(delta, eps)
    raise ValueError(f"unknown norm: {norm}")


def unique_rows(batch: np.ndarray) -> np.ndarray:
    """Order-preserving row dedupe"""
    seen = set()
    keep = []
    for i, row in enumerate(batch):
        key = row.tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(i)
    return np.asarray(keep, dtype=np.int64)


def canonical_json(data: Any) -> str:
    """Byte-stable JSON (sorted keys, fixed separators)"""
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def config_hash(data: Any) -> str:
    return hashlib.sha256(json.dumps(data, sort_keys=True, separators=(",", ":")).encode("utf-8")).hexdigest()


def transition_label(true_class: int, target_class: Optional[int]) -> str:
    """'1→2' style label; untargeted sets read '1→*'"""
    return f"{true_class}→{'*' if target_class is None else target_class}"


def rounded(values: Iterable[float], digits: int = 4) -> list:
    return [round(float(v), digits) for v in values]


def _coerce(value: Any, kind: Any, name: str) -> Any:
    origin = get_origin(kind)
    if origin is Union:
        options = [a for a in get_args(kind) if a is not type(None)]
        return None if value is None else _coerce(value, options[0], name)
    if origin in (list, List):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{name} must be a list, got {value!r}")
        item = (get_args(kind) or (Any,))[0]
        return [_coerce(v, item, name) for v in value]
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false, got {value!r}")
        return value
    if kind is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, str):
            try:
                return int(value.strip())
            except ValueError:
                pass
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if kind is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value.strip())
            except ValueError:
                pass
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if kind is str and not isinstance(value, str):
        raise ConfigError(f"{name} must be a string, got {value!r}")
    return value


def coerce_fields(cls: type, data: Any, section: str) -> Dict[str, Any]:
    """
    Check one config section against a dataclass: unknown keys and values of
    the wrong type raise ConfigError; numeric strings become numbers.
    Nested dataclass fields pass through untouched.
    """
    if not isinstance(data, dict):
        raise ConfigError(f"{section} must be an object, got {data!r}")
    types = {f.name: f.type for f in fields(cls)}
    unknown = sorted(set(data) - set(types))
    if unknown:
        raise ConfigError(f"{section}: unknown field(s): {', '.join(unknown)}")
    return {key: _coerce(value, types[key], f"{section}.{key}") for key, value in data.items()}
