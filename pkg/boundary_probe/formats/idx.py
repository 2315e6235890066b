"""
IDX reader/writer (MNIST distribution format), gzip accepted transparently.

Layout: big-endian u32 magic (0x00000803 images, 0x00000801 labels),
big-endian u32 dimension sizes, then raw unsigned bytes.
"""

import gzip
import struct
from pathlib import Path
from typing import Union

import numpy as np

from ..exceptions import IdxFormatError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
GZIP_MAGIC = b"\x1f\x8b"

PathLike = Union[str, Path]


def _read_bytes(path: PathLike) -> bytes:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise IdxFormatError(f"IDX file not found: {path}")
    if raw[:2] == GZIP_MAGIC:
        try:
            return gzip.decompress(raw)
        except (OSError, EOFError) as e:
            raise IdxFormatError(f"{path}: truncated or corrupt gzip stream ({e})")
    return raw


def read_idx_images(path: PathLike) -> np.ndarray:
    """Return uint8 images shaped (n, rows, cols)"""
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise IdxFormatError(f"{path}: truncated header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGES_MAGIC:
        raise IdxFormatError(f"{path}: bad magic 0x{magic:08x} (expected 0x{IMAGES_MAGIC:08x})")
    expected = count * rows * cols
    payload = raw[16:]
    if len(payload) < expected:
        raise IdxFormatError(f"{path}: truncated, {len(payload)} of {expected} pixel bytes")
    return np.frombuffer(payload, dtype=np.uint8, count=expected).reshape(count, rows, cols)


def read_idx_labels(path: PathLike) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise IdxFormatError(f"{path}: truncated header")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != LABELS_MAGIC:
        raise IdxFormatError(f"{path}: bad magic 0x{magic:08x} (expected 0x{LABELS_MAGIC:08x})")
    payload = raw[8:]
    if len(payload) < count:
        raise IdxFormatError(f"{path}: truncated, {len(payload)} of {count} label bytes")
    return np.frombuffer(payload, dtype=np.uint8, count=count).copy()


def _write_bytes(path: PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".gz":
        data = gzip.compress(data, mtime=0)
    path.write_bytes(data)


def write_idx_images(path: PathLike, images: np.ndarray) -> None:
    """images: uint8 (n, rows, cols); a .gz suffix writes gzip"""
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise IdxFormatError(f"IDX images must be (n, rows, cols), got {images.shape}")
    n, rows, cols = images.shape
    _write_bytes(path, struct.pack(">IIII", IMAGES_MAGIC, n, rows, cols) + images.tobytes())


def write_idx_labels(path: PathLike, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1)
    _write_bytes(path, struct.pack(">II", LABELS_MAGIC, labels.size) + labels.tobytes())
