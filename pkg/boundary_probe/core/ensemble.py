"""
Ensemble Engine - seed-varied training, disagreement and alert-on-disagreement
"""

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from ..exceptions import EnsembleError, ModelFormatError
from ..formats.model_file import load_model, save_model
from ..models import AlertSummary, Architecture, Dataset, Ensemble, EnsembleDecision, ImageVec, TrainConfig
from ..utils.helpers import as_batch, canonical_json
from ..utils.logger import logger
from .network import predict_batch, train

MANIFEST_VERSION = 1


def train_ensemble(arch: Architecture, data: Dataset, seeds: Sequence[int], cfg: TrainConfig,
                   test_data: Optional[Dataset] = None, jobs: int = 1) -> Ensemble:
    """
    One model per seed, in seed-list order (the first is the attack target).
    Models train independently; jobs > 1 trains them on a thread pool.
    """
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise EnsembleError(f"an ensemble needs at least 2 seeds, got {seeds}")
    if len(set(seeds)) != len(seeds):
        raise EnsembleError(f"ensemble seeds must be pairwise distinct: {seeds}")

    def train_one(seed: int):
        return train(arch, data, cfg.with_seed(seed), test_data)

    logger.info(f"training {len(seeds)} {arch.kind.value} models with {jobs} job(s)")
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            models = list(executor.map(train_one, seeds))
    else:
        models = [train_one(seed) for seed in seeds]
    return Ensemble(tuple(models), arch)


def predict_matrix(ens: Ensemble, images) -> np.ndarray:
    """Labels shaped (models, images)"""
    batch = as_batch(images)
    return np.stack([predict_batch(model, batch) for model in ens.models])


def _disagrees(labels: np.ndarray) -> np.ndarray:
    """Per column: some pair of models disagrees"""
    return np.any(labels != labels[:1], axis=0)


def in_uncertainty_region(ens: Ensemble, image: Union[ImageVec, np.ndarray]) -> bool:
    return bool(_disagrees(predict_matrix(ens, image))[0])


def disagreement_rate(ens: Ensemble, images) -> float:
    labels = predict_matrix(ens, images)
    if labels.shape[1] == 0:
        raise ValueError("disagreement_rate needs at least one image")
    return float(np.mean(_disagrees(labels)))


def decisions_from_labels(labels: np.ndarray) -> List[EnsembleDecision]:
    decisions = []
    for column in labels.T:
        alert = bool(np.any(column != column[0]))
        decisions.append(EnsembleDecision(
            labels=tuple(int(v) for v in column),
            label=None if alert else int(column[0]),
            alert=alert,
        ))
    return decisions


def classify_with_alert(ens: Ensemble, image: Union[ImageVec, np.ndarray]) -> EnsembleDecision:
    """The unanimous label, or an alert carrying every member's label"""
    return decisions_from_labels(predict_matrix(ens, image))[0]


def classify_batch(ens: Ensemble, images) -> List[EnsembleDecision]:
    return decisions_from_labels(predict_matrix(ens, images))


def misclassification_rates(ens: Ensemble, images, true_class: int,
                            labels: Optional[np.ndarray] = None) -> List[float]:
    """Per-model fraction of images not assigned to true_class"""
    labels = predict_matrix(ens, images) if labels is None else labels
    if labels.shape[1] == 0:
        return [0.0] * ens.size
    return [float(v) for v in np.mean(labels != true_class, axis=1)]


def alert_summary(ens: Ensemble, images, true_class: Union[int, np.ndarray],
                  labels: Optional[np.ndarray] = None) -> AlertSummary:
    """
    coverage: fraction either alerted or unanimously correct (None for no images).
    unalerted_accuracy: accuracy on images that raised no alert (None if all alerted).
    """
    labels = predict_matrix(ens, images) if labels is None else labels
    n = labels.shape[1]
    if n == 0:
        return AlertSummary(0, 0.0, None, None, 0)
    truth = np.broadcast_to(np.asarray(true_class), (n,))
    alert = _disagrees(labels)
    correct = ~alert & (labels[0] == truth)
    unalerted = int(np.sum(~alert))
    return AlertSummary(
        n=n,
        alert_rate=float(np.mean(alert)),
        coverage=float(np.mean(alert | correct)),
        unalerted_accuracy=float(np.sum(correct) / unalerted) if unalerted else None,
        unanimous_wrong=int(np.sum(~alert & ~correct)),
    )


def save_ensemble(ens: Ensemble, directory: Union[str, Path],
                  manifest_name: str = "ensemble.json") -> Path:
    """Model files under <directory>/models/ plus a JSON manifest with relative paths"""
    directory = Path(directory)
    model_dir = directory / "models"
    entries = []
    for model in ens.models:
        path = save_model(model, model_dir / f"{model.model_id}.bin")
        entries.append({
            "model_id": model.model_id,
            "seed": model.seed,
            "path": path.relative_to(directory).as_posix(),
            "train_error": model.train_error,
            "test_error": model.test_error,
        })
    manifest = {
        "version": MANIFEST_VERSION,
        "architecture": ens.architecture.to_dict(),
        "seeds": list(ens.seeds),
        "models": entries,
    }
    manifest_path = directory / manifest_name
    manifest_path.write_text(canonical_json(manifest), encoding="utf-8")
    logger.success(f"saved {ens.size} models to {directory}")
    return manifest_path


def load_ensemble(manifest_path: Union[str, Path]) -> Ensemble:
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise EnsembleError(f"ensemble manifest not found: {manifest_path} (run train first)")
    try:
        architecture = Architecture.from_dict(manifest["architecture"])
        paths = [manifest_path.parent / entry["path"] for entry in manifest["models"]]
    except (KeyError, ValueError) as e:
        raise ModelFormatError(f"{manifest_path}: incomplete manifest ({e})")
    ens = Ensemble(tuple(load_model(path) for path in paths), architecture)
    ens.require_distinct_seeds()
    return ens
