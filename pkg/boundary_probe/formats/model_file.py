"""
Model files: a framed header (architecture, seed, training config, parameter
shapes) plus parameters in declared order, with a JSON sidecar for errors.
Parameters keep their precision: float32 and float64 models both reload
bit-exactly.
"""

import json
from pathlib import Path
from typing import Union

import numpy as np

from ..exceptions import ConfigError, ModelFormatError
from ..models import Architecture, Model, TrainConfig
from ..utils.helpers import canonical_json
from .framed import PAYLOAD_DTYPES, FramedFileId, read_framed, write_framed


def sidecar_path(path: Union[str, Path]) -> Path:
    return Path(path).with_suffix(".json")


def save_model(model: Model, path: Union[str, Path]) -> Path:
    """Write model + sidecar in the parameters' own precision"""
    path = Path(path)
    dtype = model.dtype.name
    if dtype not in PAYLOAD_DTYPES:
        raise ModelFormatError(f"{model.model_id}: cannot store {dtype} parameters")
    header = {
        "architecture": model.architecture.to_dict(),
        "seed": model.seed,
        "train_config": model.train_config.to_dict(),
        "param_shapes": [list(p.shape) for p in model.params],
    }
    payload = np.concatenate([p.reshape(-1) for p in model.params]) \
        if model.params else np.zeros(0, dtype=model.dtype)
    write_framed(path, FramedFileId.MODEL, header, payload, dtype=dtype)
    sidecar = {
        "model_id": model.model_id,
        "seed": model.seed,
        "train_error": model.train_error,
        "test_error": model.test_error,
    }
    sidecar_path(path).write_text(canonical_json(sidecar), encoding="utf-8")
    return path


def load_model(path: Union[str, Path]) -> Model:
    header, payload = read_framed(path, FramedFileId.MODEL)
    try:
        architecture = Architecture.from_dict(header["architecture"])
        shapes = [tuple(s) for s in header["param_shapes"]]
        train_config = TrainConfig.from_dict(header.get("train_config", {}))
        seed = int(header["seed"])
    except (KeyError, ValueError, TypeError, ConfigError) as e:
        raise ModelFormatError(f"{path}: incomplete model header ({e})")

    params = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        params.append(payload[offset:offset + size].reshape(shape))
        offset += size
    if offset != payload.size:
        raise ModelFormatError(f"{path}: {payload.size - offset} trailing parameter values")

    train_error = test_error = None
    sidecar = sidecar_path(path)
    if sidecar.exists():
        data = json.loads(sidecar.read_text(encoding="utf-8"))
        train_error = data.get("train_error")
        test_error = data.get("test_error")
    return Model(architecture, tuple(params), seed=seed, train_config=train_config,
                 train_error=train_error, test_error=test_error)
