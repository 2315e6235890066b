"""
Network Engine - dense/conv forward and reverse passes, seeded init and Adam training

Flow:
1. init_params(): He-normal weights from a Philox stream keyed by the seed
2. logits()/forward()/predict(): batched inference in the model's precision
3. logit_gradients(): reverse pass for any upstream gradient on the logits
4. train(): minibatch Adam on cross-entropy, data order keyed by the same seed
"""

import time
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ShapeMismatchError, TrainingDivergedError
from ..models import Architecture, Dataset, ImageVec, LayerOp, Model, TrainConfig
from ..utils.helpers import as_batch, one_hot
from ..utils.logger import logger

# Inference chunk; bounds the im2col copy made by the conv layers
EVAL_CHUNK = 256

ImageInput = Union[ImageVec, np.ndarray, Sequence[ImageVec]]


def init_params(arch: Architecture, seed: int, dtype=np.float32) -> List[np.ndarray]:
    """
    He-normal weights (std sqrt(2 / fan_in)) and zero biases, drawn in
    declared layer order from Generator(Philox(seed)).
    """
    arch.validate()
    rng = np.random.Generator(np.random.Philox(int(seed)))
    params: List[np.ndarray] = []
    for layer in arch.layers:
        if not layer.has_params:
            continue
        weight_shape, bias_shape = layer.param_shapes()
        std = np.sqrt(2.0 / layer.fan_in)
        params.append(rng.normal(0.0, std, size=weight_shape).astype(dtype))
        params.append(np.zeros(bias_shape, dtype=dtype))
    return params


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - np.max(z, axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / np.sum(exps, axis=1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - np.max(z, axis=1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))


# ---------------------------------------------------------------- layers

def _dense_forward(x, weight, bias):
    return x @ weight + bias, x


def _dense_backward(dy, cache, weight):
    x = cache
    return dy @ weight.T, [x.T @ dy, dy.sum(axis=0)]


def _conv_forward(x, weight, bias):
    k = weight.shape[2]
    windows = sliding_window_view(x, (k, k), axis=(2, 3))       # (N, C, Ho, Wo, k, k)
    out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))  # (N, Ho, Wo, F)
    out = out.transpose(0, 3, 1, 2) + bias[None, :, None, None]
    return np.ascontiguousarray(out), (x.shape, windows)


def _conv_backward(dy, cache, weight):
    x_shape, windows = cache
    k = weight.shape[2]
    ho, wo = dy.shape[2], dy.shape[3]
    d_weight = np.tensordot(dy, windows, axes=([0, 2, 3], [0, 2, 3]))  # (F, C, k, k)
    d_bias = dy.sum(axis=(0, 2, 3))
    dx = np.zeros(x_shape, dtype=dy.dtype)
    for i in range(k):
        for j in range(k):
            contribution = np.tensordot(dy, weight[:, :, i, j], axes=([1], [0]))  # (N, Ho, Wo, C)
            dx[:, :, i:i + ho, j:j + wo] += contribution.transpose(0, 3, 1, 2)
    return dx, [d_weight, d_bias]


def _pool_blocks(x):
    n, c, h, w = x.shape
    blocks = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return blocks.reshape(n, c, h // 2, w // 2, 4)


def _maxpool_forward(x):
    blocks = _pool_blocks(x)
    winner = np.argmax(blocks, axis=-1)[..., None]
    return np.take_along_axis(blocks, winner, axis=-1)[..., 0], (x.shape, winner)


def _maxpool_backward(dy, cache):
    (n, c, h, w), winner = cache
    d_blocks = np.zeros((n, c, h // 2, w // 2, 4), dtype=dy.dtype)
    np.put_along_axis(d_blocks, winner, dy[..., None], axis=-1)
    dx = d_blocks.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return dx.reshape(n, c, h, w)


def _run_layers(model_arch: Architecture, params: Sequence[np.ndarray], x: np.ndarray):
    """Forward through every layer, keeping what the reverse pass needs"""
    caches = []
    p = 0
    for layer in model_arch.layers:
        if layer.op is LayerOp.DENSE:
            x, cache = _dense_forward(x, params[p], params[p + 1])
            p += 2
        elif layer.op is LayerOp.CONV:
            x, cache = _conv_forward(x, params[p], params[p + 1])
            p += 2
        elif layer.op is LayerOp.MAXPOOL:
            x, cache = _maxpool_forward(x)
        elif layer.op is LayerOp.RELU:
            cache = x > 0
            x = x * cache
        else:
            cache = x.shape
            x = x.reshape(x.shape[0], -1)
        caches.append(cache)
    return x, caches


def _reverse_layers(arch: Architecture, params: Sequence[np.ndarray], caches, dy: np.ndarray):
    """Reverse pass; returns (dx, parameter gradients in declared order)"""
    grads: List[Optional[np.ndarray]] = [None] * len(params)
    p = len(params)
    for layer, cache in zip(reversed(arch.layers), reversed(caches)):
        if layer.op is LayerOp.DENSE:
            p -= 2
            dy, (d_weight, d_bias) = _dense_backward(dy, cache, params[p])
            grads[p], grads[p + 1] = d_weight, d_bias
        elif layer.op is LayerOp.CONV:
            p -= 2
            dy, (d_weight, d_bias) = _conv_backward(dy, cache, params[p])
            grads[p], grads[p + 1] = d_weight, d_bias
        elif layer.op is LayerOp.MAXPOOL:
            dy = _maxpool_backward(dy, cache)
        elif layer.op is LayerOp.RELU:
            dy = dy * cache
        else:
            dy = dy.reshape(cache)
    return dy, grads


def _shape_input(arch: Architecture, batch: np.ndarray) -> np.ndarray:
    if batch.ndim != 2 or batch.shape[1] != arch.input_size:
        raise ShapeMismatchError(
            f"expected a batch of {arch.input_size}-pixel vectors, got shape {batch.shape}"
        )
    return batch.reshape((batch.shape[0],) + tuple(arch.input_shape))


# ---------------------------------------------------------------- inference

def logits(model: Model, images: ImageInput) -> np.ndarray:
    """Pre-softmax scores, (n, num_classes), in the model's precision"""
    batch = as_batch(images, dtype=model.dtype)
    arch = model.architecture
    _shape_input(arch, batch)
    chunks = []
    for start in range(0, batch.shape[0], EVAL_CHUNK):
        x = _shape_input(arch, batch[start:start + EVAL_CHUNK])
        out, _ = _run_layers(arch, model.params, x)
        chunks.append(out)
    if not chunks:
        return np.zeros((0, arch.num_classes), dtype=model.dtype)
    return np.concatenate(chunks, axis=0)


def forward(model: Model, images: ImageInput) -> np.ndarray:
    """Class probabilities; each row sums to 1"""
    return softmax(logits(model, images))


def predict_batch(model: Model, images: ImageInput) -> np.ndarray:
    """Argmax labels; ties resolve to the lowest class index"""
    return np.argmax(logits(model, images), axis=1).astype(np.int64)


def predict(model: Model, image: Union[ImageVec, np.ndarray]) -> int:
    return int(predict_batch(model, image)[0])


def error_rate(model: Model, data: Dataset) -> float:
    if len(data) == 0:
        return 0.0
    return float(np.mean(predict_batch(model, data.images) != data.labels))


# ---------------------------------------------------------------- gradients

def logit_gradients(model: Model, images: ImageInput,
                    dlogits: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Pull an upstream gradient on the logits back to the input pixels and the
    parameters. dlogits has shape (n, num_classes).

    Returns:
        (input gradient (n, h), parameter gradients in declared order)
    """
    batch = as_batch(images, dtype=model.dtype)
    arch = model.architecture
    x = _shape_input(arch, batch)
    dlogits = np.asarray(dlogits, dtype=model.dtype).reshape(batch.shape[0], arch.num_classes)
    _, caches = _run_layers(arch, model.params, x)
    dx, grads = _reverse_layers(arch, model.params, caches, dlogits)
    return dx.reshape(batch.shape[0], -1), grads


def input_gradient(model: Model, images: Union[ImageVec, np.ndarray],
                   labels: Union[int, np.ndarray]) -> np.ndarray:
    """
    Gradient of the cross-entropy loss -log p_label with respect to the input
    pixels. A single image gives an (h,) vector; a batch gives (n, h).
    """
    single = isinstance(images, ImageVec) or np.ndim(images) == 1
    batch = as_batch(images, dtype=model.dtype)
    labels = np.broadcast_to(np.asarray(labels, dtype=np.int64).reshape(-1), (batch.shape[0],))
    probs = forward(model, batch)
    dlogits = probs - one_hot(labels, model.architecture.num_classes, dtype=probs.dtype)
    dx, _ = logit_gradients(model, batch, dlogits)
    return dx[0] if single else dx


def cross_entropy(model: Model, images: ImageInput, labels: np.ndarray) -> float:
    """Mean cross-entropy of a batch"""
    log_probs = log_softmax(logits(model, images))
    labels = np.asarray(labels, dtype=np.int64)
    return float(-np.mean(log_probs[np.arange(labels.shape[0]), labels]))


# ---------------------------------------------------------------- training

class Adam:
    """Adam with bias correction; updates the parameter arrays in place"""

    def __init__(self, params: List[np.ndarray], learning_rate: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]) -> None:
        self.step_count += 1
        correction1 = 1.0 - self.beta1 ** self.step_count
        correction2 = 1.0 - self.beta2 ** self.step_count
        for param, grad, m, v in zip(params, grads, self.m, self.v):
            grad = grad.astype(param.dtype, copy=False)
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            m_hat = m / correction1
            v_hat = v / correction2
            param -= (self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)).astype(param.dtype)


def train(arch: Architecture, data: Dataset, cfg: TrainConfig,
          test_data: Optional[Dataset] = None) -> Model:
    """
    Train one model. Deterministic in (arch, data, cfg): init draws from
    Philox(seed), minibatch order from Philox(seed).jumped().

    Raises:
        TrainingDivergedError: an epoch's mean loss was NaN or infinite
    """
    cfg.validate()
    arch.validate()
    if len(data) == 0:
        raise ValueError("training data is empty")
    if cfg.train_limit is not None:
        data = data.head(cfg.train_limit)

    dtype = cfg.dtype
    images = np.asarray(data.images, dtype=dtype)
    labels = np.asarray(data.labels, dtype=np.int64)
    n = images.shape[0]
    params = init_params(arch, cfg.seed, dtype=dtype)
    optimizer = Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    order_rng = np.random.Generator(np.random.Philox(int(cfg.seed)).jumped())

    logger.info(f"training {arch.kind.value} seed={cfg.seed} on {n} images "
                f"({cfg.epochs} epochs, batch {cfg.batch_size})")
    started = time.time()
    for epoch in range(cfg.epochs):
        order = order_rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            x = _shape_input(arch, images[rows])
            out, caches = _run_layers(arch, params, x)
            log_probs = log_softmax(out)
            batch_labels = labels[rows]
            total_loss += float(-np.sum(log_probs[np.arange(rows.size), batch_labels]))
            dlogits = (np.exp(log_probs) - one_hot(batch_labels, arch.num_classes, dtype=dtype)) / rows.size
            _, grads = _reverse_layers(arch, params, caches, dlogits.astype(dtype))
            optimizer.step(params, grads)

        mean_loss = total_loss / n
        if not np.isfinite(mean_loss):
            logger.error(f"seed={cfg.seed}: loss {mean_loss} at epoch {epoch}")
            raise TrainingDivergedError(epoch, cfg.seed, mean_loss)
        logger.debug(f"seed={cfg.seed} epoch {epoch + 1}/{cfg.epochs} loss {mean_loss:.5f}")

    model = Model(arch, tuple(params), seed=cfg.seed, train_config=cfg)
    train_error = error_rate(model, data)
    test_error = error_rate(model, test_data) if test_data is not None else None
    logger.success(f"trained {model.model_id} in {time.time() - started:.1f}s: "
                   f"train error {train_error:.4f}"
                   + (f", test error {test_error:.4f}" if test_error is not None else ""))
    return model.with_errors(train_error, test_error)
