"""
Framed binary files: magic | u32 LE version | u32 LE header length |
canonical JSON header | little-endian float payload (float32 unless
the header says payload_dtype float64).

Used for model files, adversarial sets and sample blocks.
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

from ..exceptions import ModelFormatError

FORMAT_VERSION = 1
PREAMBLE = struct.Struct("<II")
PAYLOAD_DTYPES = {"float32": "<f4", "float64": "<f8"}


class FramedFileId:
    """Magic constants, one per file kind"""
    MODEL = b"BPMODEL\0"
    ADVERSARIAL_SET = b"BPADVSET"
    SAMPLES = b"BPSAMPLE"


def write_framed(path: Union[str, Path], magic: bytes, header: Dict[str, Any],
                 payload: np.ndarray, dtype: str = "float32") -> None:
    if dtype not in PAYLOAD_DTYPES:
        raise ModelFormatError(f"unsupported payload dtype: {dtype}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    block = np.ascontiguousarray(payload, dtype=PAYLOAD_DTYPES[dtype]).reshape(-1)
    header = dict(header, payload_floats=int(block.size))
    if dtype != "float32":
        header["payload_dtype"] = dtype
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":"),
                              ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as f:
        f.write(magic)
        f.write(PREAMBLE.pack(FORMAT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        f.write(block.tobytes())


def read_framed(path: Union[str, Path], magic: bytes) -> Tuple[Dict[str, Any], np.ndarray]:
    """
    Returns:
        (header, payload as a flat native-order float32 or float64 array)

    Raises:
        ModelFormatError: wrong magic, unsupported version or truncated payload
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise ModelFormatError(f"file not found: {path}")
    start = len(magic) + PREAMBLE.size
    if len(raw) < start or raw[:len(magic)] != magic:
        raise ModelFormatError(f"{path}: not a {magic.rstrip(bytes(1)).decode()} file")
    version, header_len = PREAMBLE.unpack(raw[len(magic):start])
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {version}")
    try:
        header = json.loads(raw[start:start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"{path}: unreadable header ({e})")
    dtype = header.get("payload_dtype", "float32")
    if dtype not in PAYLOAD_DTYPES:
        raise ModelFormatError(f"{path}: unsupported payload dtype {dtype}")
    wire = np.dtype(PAYLOAD_DTYPES[dtype])
    expected = int(header.get("payload_floats", 0))
    body = raw[start + header_len:]
    if len(body) != expected * wire.itemsize:
        raise ModelFormatError(f"{path}: payload has {len(body)} bytes, expected {expected * wire.itemsize}")
    payload = np.frombuffer(body, dtype=wire).astype(np.dtype(dtype))
    return header, payload
