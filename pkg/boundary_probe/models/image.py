"""
Image models - vectorized images and datasets
"""

from dataclasses import dataclass
from typing import Dict, Iterator, Optional

import numpy as np

from ..exceptions import ShapeMismatchError


@dataclass(frozen=True)
class ImageVec:
    """A vectorized image in [0,1]^h with optional label and source id"""
    pixels: np.ndarray
    label: Optional[int] = None
    source_id: Optional[str] = None

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=np.float32, copy=True).reshape(-1)
        if not np.all(np.isfinite(pixels)):
            raise ValueError("image contains non-finite pixels")
        if pixels.size and (pixels.min() < 0.0 or pixels.max() > 1.0):
            raise ValueError(f"pixels outside [0,1]: min {pixels.min()}, max {pixels.max()}")
        if self.label is not None and not 0 <= int(self.label) <= 9:
            raise ValueError(f"label must be 0-9, got {self.label}")
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)
        if self.label is not None:
            object.__setattr__(self, "label", int(self.label))

    @property
    def h(self) -> int:
        return int(self.pixels.size)

    @property
    def file_stem(self) -> str:
        """Filesystem-safe id, e.g. test-00002"""
        if not self.source_id:
            return "image"
        split, _, index = self.source_id.partition(":")
        return f"{split}-{int(index):05d}" if index.isdigit() else self.source_id.replace(":", "-")


@dataclass(frozen=True)
class Dataset:
    """
    Flattened images (n, h) with labels. Rows keep the index they had in the
    source file so subsets still report their origin.
    """
    images: np.ndarray
    labels: np.ndarray
    split: str = "test"
    indices: Optional[np.ndarray] = None

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float32)
        labels = np.asarray(self.labels, dtype=np.int64)
        if images.ndim != 2:
            raise ShapeMismatchError(f"dataset images must be (n, h), got {images.shape}")
        if labels.shape != (images.shape[0],):
            raise ShapeMismatchError(f"{images.shape[0]} images but {labels.shape[0]} labels")
        if labels.size and (labels.min() < 0 or labels.max() > 9):
            raise ValueError("labels must be 0-9")
        indices = np.arange(images.shape[0]) if self.indices is None else np.asarray(self.indices, dtype=np.int64)
        for array in (images, labels, indices):
            array.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "indices", indices)

    def __len__(self) -> int:
        return int(self.images.shape[0])

    def __getitem__(self, i: int) -> ImageVec:
        return ImageVec(self.images[i], int(self.labels[i]), f"{self.split}:{int(self.indices[i])}")

    def __iter__(self) -> Iterator[ImageVec]:
        for i in range(len(self)):
            yield self[i]

    @property
    def h(self) -> int:
        return int(self.images.shape[1])

    @property
    def counts(self) -> Dict[int, int]:
        """Images per label"""
        values, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def take(self, rows: np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.images[rows], self.labels[rows], self.split, self.indices[rows])

    def head(self, n: int) -> "Dataset":
        return self.take(np.arange(min(n, len(self))))
