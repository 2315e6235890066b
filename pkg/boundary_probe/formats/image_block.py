"""
Adversarial-set and sample-block files
"""

from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from ..exceptions import ModelFormatError
from ..models import AdversarialSet, AttackConfig, AttackKind, ImageVec
from .framed import FramedFileId, read_framed, write_framed


def save_adversarial_set(adv_set: AdversarialSet, path: Union[str, Path]) -> Path:
    """Header from AdversarialSet.header(); payload is the clean image then the examples"""
    path = Path(path)
    header = adv_set.header()
    header["h"] = adv_set.clean.h
    payload = np.concatenate([adv_set.clean.pixels, adv_set.examples.reshape(-1)])
    write_framed(path, FramedFileId.ADVERSARIAL_SET, header, payload)
    return path


def load_adversarial_set(path: Union[str, Path]) -> AdversarialSet:
    header, payload = read_framed(path, FramedFileId.ADVERSARIAL_SET)
    try:
        h = int(header["h"])
        count = int(header["count"])
        if payload.size != h * (count + 1):
            raise ModelFormatError(f"{path}: payload does not hold {count} images of {h} pixels")
        clean = ImageVec(payload[:h], header.get("clean_label"), header.get("clean_id"))
        return AdversarialSet(
            clean=clean,
            true_class=int(header["true_class"]),
            target_model_id=header["target_model_id"],
            kind=AttackKind(header["kind"]),
            target_class=header.get("target_class"),
            examples=payload[h:].reshape(count, h),
            labels=np.asarray(header["labels"], dtype=np.int64),
            config=AttackConfig.from_dict(header["attack_config"]),
            delta=header.get("delta"),
            shortfall=bool(header.get("shortfall", False)),
        )
    except (KeyError, ValueError) as e:
        raise ModelFormatError(f"{path}: incomplete adversarial-set header ({e})")


def save_samples(samples: np.ndarray, path: Union[str, Path], header: Dict[str, Any]) -> Path:
    samples = np.asarray(samples, dtype=np.float32)
    header = dict(header, count=int(samples.shape[0]), h=int(samples.shape[1]))
    write_framed(path, FramedFileId.SAMPLES, header, samples)
    return Path(path)


def load_samples(path: Union[str, Path]) -> Tuple[Dict[str, Any], np.ndarray]:
    header, payload = read_framed(path, FramedFileId.SAMPLES)
    count, h = int(header["count"]), int(header["h"])
    if payload.size != count * h:
        raise ModelFormatError(f"{path}: payload does not hold {count} samples of {h} pixels")
    return header, payload.reshape(count, h)


def load_sample_images(path: Union[str, Path]) -> List[ImageVec]:
    """Samples as validated ImageVecs"""
    header, samples = load_samples(path)
    stem = header.get("label", Path(path).stem)
    return [ImageVec(row, None, f"{stem}:{i}") for i, row in enumerate(samples)]
