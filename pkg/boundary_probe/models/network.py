"""
Network models - architecture descriptors, training configuration and trained models
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..exceptions import ConfigError, ShapeMismatchError
from ..utils.helpers import coerce_fields


class ArchitectureKind(Enum):
    MLP = "MLP"
    LENET = "LENET"
    CUSTOM = "CUSTOM"


class LayerOp(Enum):
    DENSE = "dense"
    CONV = "conv"
    MAXPOOL = "maxpool"
    RELU = "relu"
    FLATTEN = "flatten"


@dataclass(frozen=True)
class LayerSpec:
    """One layer. in_size/out_size are features for dense, channels for conv."""
    op: LayerOp
    in_size: int = 0
    out_size: int = 0
    kernel: int = 0

    @classmethod
    def dense(cls, in_features: int, out_features: int) -> "LayerSpec":
        return cls(LayerOp.DENSE, in_features, out_features)

    @classmethod
    def conv(cls, in_channels: int, out_channels: int, kernel: int) -> "LayerSpec":
        return cls(LayerOp.CONV, in_channels, out_channels, kernel)

    @classmethod
    def maxpool(cls) -> "LayerSpec":
        return cls(LayerOp.MAXPOOL)

    @classmethod
    def relu(cls) -> "LayerSpec":
        return cls(LayerOp.RELU)

    @classmethod
    def flatten(cls) -> "LayerSpec":
        return cls(LayerOp.FLATTEN)

    @property
    def has_params(self) -> bool:
        return self.op in (LayerOp.DENSE, LayerOp.CONV)

    @property
    def fan_in(self) -> int:
        if self.op is LayerOp.CONV:
            return self.in_size * self.kernel * self.kernel
        return self.in_size

    def param_shapes(self) -> List[Tuple[int, ...]]:
        if self.op is LayerOp.DENSE:
            return [(self.in_size, self.out_size), (self.out_size,)]
        if self.op is LayerOp.CONV:
            return [(self.out_size, self.in_size, self.kernel, self.kernel), (self.out_size,)]
        return []

    def output_shape(self, shape: Tuple[int, ...]) -> Tuple[int, ...]:
        """Shape after this layer, or ShapeMismatchError"""
        if self.op is LayerOp.DENSE:
            if shape != (self.in_size,):
                raise ShapeMismatchError(f"dense layer expects ({self.in_size},), got {shape}")
            return (self.out_size,)
        if self.op is LayerOp.CONV:
            if len(shape) != 3 or shape[0] != self.in_size:
                raise ShapeMismatchError(f"conv layer expects ({self.in_size}, H, W), got {shape}")
            if shape[1] < self.kernel or shape[2] < self.kernel:
                raise ShapeMismatchError(f"conv kernel {self.kernel} larger than input {shape}")
            return (self.out_size, shape[1] - self.kernel + 1, shape[2] - self.kernel + 1)
        if self.op is LayerOp.MAXPOOL:
            if len(shape) != 3 or shape[1] % 2 or shape[2] % 2:
                raise ShapeMismatchError(f"2x2 max pooling needs even (C, H, W), got {shape}")
            return (shape[0], shape[1] // 2, shape[2] // 2)
        if self.op is LayerOp.FLATTEN:
            return (int(np.prod(shape)),)
        return shape

    def to_dict(self) -> Dict[str, Any]:
        return {"op": self.op.value, "in_size": self.in_size, "out_size": self.out_size, "kernel": self.kernel}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LayerSpec":
        return cls(LayerOp(data["op"]), int(data.get("in_size", 0)),
                   int(data.get("out_size", 0)), int(data.get("kernel", 0)))


@dataclass(frozen=True)
class Architecture:
    """Layer stack ending in logits over num_classes; softmax is applied by the engine"""
    kind: ArchitectureKind
    input_shape: Tuple[int, ...]
    layers: Tuple[LayerSpec, ...]
    num_classes: int = 10

    @classmethod
    def mlp(cls) -> "Architecture":
        """784 -> 512 -> 512 -> 512 -> 10 with ReLU"""
        return cls(
            kind=ArchitectureKind.MLP,
            input_shape=(784,),
            layers=(
                LayerSpec.dense(784, 512), LayerSpec.relu(),
                LayerSpec.dense(512, 512), LayerSpec.relu(),
                LayerSpec.dense(512, 512), LayerSpec.relu(),
                LayerSpec.dense(512, 10),
            ),
        )

    @classmethod
    def lenet(cls) -> "Architecture":
        """Two-conv LeNet: conv5-pool-relu, conv5-pool-relu, dense 320-50-10"""
        return cls(
            kind=ArchitectureKind.LENET,
            input_shape=(1, 28, 28),
            layers=(
                LayerSpec.conv(1, 10, 5), LayerSpec.maxpool(), LayerSpec.relu(),
                LayerSpec.conv(10, 20, 5), LayerSpec.maxpool(), LayerSpec.relu(),
                LayerSpec.flatten(),
                LayerSpec.dense(320, 50), LayerSpec.relu(),
                LayerSpec.dense(50, 10),
            ),
        )

    @classmethod
    def custom(cls, input_shape: Tuple[int, ...], layers: Tuple[LayerSpec, ...],
               num_classes: int = 10) -> "Architecture":
        arch = cls(ArchitectureKind.CUSTOM, tuple(input_shape), tuple(layers), num_classes)
        arch.validate()
        return arch

    @classmethod
    def from_kind(cls, kind: str) -> "Architecture":
        kind = kind.upper()
        if kind == ArchitectureKind.MLP.value:
            return cls.mlp()
        if kind == ArchitectureKind.LENET.value:
            return cls.lenet()
        raise ConfigError(f"unknown architecture kind: {kind} (expected MLP or LENET)")

    @property
    def input_size(self) -> int:
        return int(np.prod(self.input_shape))

    def param_shapes(self) -> List[Tuple[int, ...]]:
        shapes: List[Tuple[int, ...]] = []
        for layer in self.layers:
            shapes.extend(layer.param_shapes())
        return shapes

    def validate(self) -> None:
        shape = tuple(self.input_shape)
        for layer in self.layers:
            shape = layer.output_shape(shape)
        if shape != (self.num_classes,):
            raise ShapeMismatchError(f"architecture ends in {shape}, expected ({self.num_classes},)")

    def is_valid(self) -> bool:
        try:
            self.validate()
            return True
        except ShapeMismatchError:
            return False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "input_shape": list(self.input_shape),
            "layers": [layer.to_dict() for layer in self.layers],
            "num_classes": self.num_classes,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Architecture":
        return cls(
            kind=ArchitectureKind(data["kind"]),
            input_shape=tuple(int(v) for v in data["input_shape"]),
            layers=tuple(LayerSpec.from_dict(layer) for layer in data["layers"]),
            num_classes=int(data.get("num_classes", 10)),
        )


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; the seed drives both init and data order"""
    seed: int = 0
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    precision: str = "float32"
    train_limit: Optional[int] = None

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.precision)

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.optimizer != "adam":
            raise ConfigError(f"unsupported optimizer: {self.optimizer}")
        if self.precision not in ("float32", "float64"):
            raise ConfigError(f"precision must be float32 or float64, got {self.precision}")
        if self.train_limit is not None and self.train_limit < 1:
            raise ConfigError(f"train_limit must be >= 1, got {self.train_limit}")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=int(seed))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "optimizer": self.optimizer,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "adam_eps": self.adam_eps,
            "precision": self.precision,
            "train_limit": self.train_limit,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        return cls(**coerce_fields(cls, data, "train"))


@dataclass(frozen=True)
class Model:
    """
    A trained network. Parameters are read-only arrays in the architecture's
    declared order (weight then bias for each dense/conv layer).
    """
    architecture: Architecture
    params: Tuple[np.ndarray, ...]
    seed: int = 0
    train_config: TrainConfig = field(default_factory=TrainConfig)
    train_error: Optional[float] = None
    test_error: Optional[float] = None

    def __post_init__(self):
        shapes = self.architecture.param_shapes()
        if len(shapes) != len(self.params):
            raise ShapeMismatchError(f"expected {len(shapes)} parameter tensors, got {len(self.params)}")
        frozen = []
        for expected, param in zip(shapes, self.params):
            array = np.array(param, copy=True)
            if array.shape != tuple(expected):
                raise ShapeMismatchError(f"parameter shape {array.shape} != {tuple(expected)}")
            array.setflags(write=False)
            frozen.append(array)
        object.__setattr__(self, "params", tuple(frozen))

    @classmethod
    def zeros(cls, architecture: Architecture, dtype=np.float32) -> "Model":
        """All-zero weights and biases (uniform output)"""
        return cls(architecture, tuple(np.zeros(s, dtype=dtype) for s in architecture.param_shapes()))

    @property
    def model_id(self) -> str:
        return f"{self.architecture.kind.value}-seed{self.seed}"

    @property
    def dtype(self) -> np.dtype:
        return self.params[0].dtype if self.params else np.dtype(np.float32)

    def with_errors(self, train_error: Optional[float], test_error: Optional[float]) -> "Model":
        return replace(self, train_error=train_error, test_error=test_error)
