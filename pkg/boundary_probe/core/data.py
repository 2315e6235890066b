"""
MNIST data - IDX loading, subset selection, clean-image picking and download
"""

from pathlib import Path
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
import requests
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from ..exceptions import ConfigError, DataDownloadError, IdxFormatError
from ..formats.idx import read_idx_images, read_idx_labels, write_idx_images, write_idx_labels
from ..models import Dataset, ImageSelector, ImageVec
from ..models.config import MNIST_MIRROR, DataConfig
from ..utils.logger import logger

MNIST_FILES: Dict[str, Tuple[str, str]] = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
MNIST_COUNTS = {"train": 60000, "test": 10000}


def load_idx(images_path: Union[str, Path], labels_path: Union[str, Path],
             split: str = "test") -> Dataset:
    """
    Load an image/label IDX pair; pixel v maps to v/255, image i pairs with label i.

    Raises:
        IdxFormatError: bad magic, truncated file or count mismatch between files
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"count mismatch: {images.shape[0]} images in {images_path}, "
            f"{labels.shape[0]} labels in {labels_path}"
        )
    if labels.size and labels.max() > 9:
        raise IdxFormatError(f"{labels_path}: label {int(labels.max())} outside 0-9")
    pixels = images.reshape(images.shape[0], -1).astype(np.float32) / np.float32(255.0)
    return Dataset(pixels, labels.astype(np.int64), split=split)


def write_idx(data: Dataset, images_path: Union[str, Path], labels_path: Union[str, Path],
              rows: int = 28, cols: int = 28) -> None:
    """Write a dataset back to IDX (pixels rounded to bytes); .gz paths are gzipped"""
    if rows * cols != data.h:
        raise IdxFormatError(f"{rows}x{cols} does not match {data.h} pixels")
    images = np.rint(np.asarray(data.images) * 255.0).astype(np.uint8).reshape(len(data), rows, cols)
    write_idx_images(images_path, images)
    write_idx_labels(labels_path, data.labels)


def select(data: Dataset, predicate: Callable[[ImageVec], bool]) -> Dataset:
    """Order-preserving filter; rows keep their source index"""
    keep = np.asarray([i for i, image in enumerate(data) if predicate(image)], dtype=np.int64)
    return data.take(keep)


def select_label(data: Dataset, label: int) -> Dataset:
    """Vectorized select(data, lambda img: img.label == label)"""
    return data.take(np.flatnonzero(data.labels == label))


def pick_image(data: Dataset, index: Optional[int] = None, label: Optional[int] = None,
               ordinal: int = 0) -> ImageVec:
    """A clean image by source index, or the ordinal-th image of a label"""
    if index is not None:
        matches = np.flatnonzero(data.indices == index)
        if matches.size == 0:
            raise ConfigError(f"{data.split} split has no image with index {index}")
        return data[int(matches[0])]
    if label is None:
        raise ConfigError("image selector needs an index or a label")
    matches = np.flatnonzero(data.labels == label)
    if ordinal >= matches.size:
        raise ConfigError(f"{data.split} split has only {matches.size} images of label {label}")
    return data[int(matches[ordinal])]


def resolve_selector(data: Dataset, selector: ImageSelector) -> ImageVec:
    return pick_image(data, selector.index, selector.label, selector.ordinal)


def _find(data_dir: Path, name: str) -> Optional[Path]:
    for candidate in (data_dir / name, data_dir / f"{name}.gz"):
        if candidate.exists():
            return candidate
    return None


def load_mnist(config: DataConfig, split: str) -> Dataset:
    """Load one MNIST split from config.data_dir, downloading first if enabled"""
    if split not in MNIST_FILES:
        raise ConfigError(f"unknown split: {split}")
    data_dir = Path(config.data_dir)
    images_name, labels_name = MNIST_FILES[split]
    images_path, labels_path = _find(data_dir, images_name), _find(data_dir, labels_name)
    if (images_path is None or labels_path is None) and config.download:
        download_mnist(data_dir, config.mirror, config.request_timeout_seconds, config.retries)
        images_path, labels_path = _find(data_dir, images_name), _find(data_dir, labels_name)
    if images_path is None or labels_path is None:
        raise ConfigError(f"MNIST {split} files not found in {data_dir} (set data.download or fetch them)")

    data = load_idx(images_path, labels_path, split=split)
    if len(data) != MNIST_COUNTS[split]:
        logger.warning(f"MNIST {split} has {len(data)} images, expected {MNIST_COUNTS[split]}")
    logger.info(f"loaded MNIST {split}: {len(data)} images from {data_dir}")
    return data


def _retrying_session(retries: int) -> requests.Session:
    session = requests.Session()
    retry = Retry(total=retries, backoff_factor=0.5, status_forcelist=[429, 500, 502, 503, 504])
    session.mount("https://", HTTPAdapter(max_retries=retry))
    session.mount("http://", HTTPAdapter(max_retries=retry))
    session.headers.update({"User-Agent": "boundary-probe/1.0"})
    return session


def download_mnist(dest_dir: Union[str, Path], mirror: str = MNIST_MIRROR,
                   timeout: float = 60.0, retries: int = 3,
                   session: Optional[requests.Session] = None) -> Dict[str, Path]:
    """
    Fetch the four gzipped MNIST archives; files already present are skipped.

    Raises:
        DataDownloadError: an archive could not be fetched
    """
    dest_dir = Path(dest_dir)
    dest_dir.mkdir(parents=True, exist_ok=True)
    session = session or _retrying_session(retries)
    fetched: Dict[str, Path] = {}
    for names in MNIST_FILES.values():
        for name in names:
            target = dest_dir / f"{name}.gz"
            if target.exists() or (dest_dir / name).exists():
                logger.debug(f"{name} already present")
                fetched[name] = target
                continue
            url = mirror.rstrip("/") + f"/{name}.gz"
            logger.info(f"downloading {url}")
            try:
                response = session.get(url, timeout=timeout)
                response.raise_for_status()
            except requests.RequestException as e:
                raise DataDownloadError(f"failed to download {url}: {e}")
            partial = target.with_suffix(".gz.part")
            partial.write_bytes(response.content)
            partial.replace(target)
            fetched[name] = target
    logger.success(f"MNIST archives ready in {dest_dir}")
    return fetched
