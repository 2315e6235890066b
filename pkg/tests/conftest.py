"""
Shared fixtures: tiny hand-built models and synthetic MNIST-shaped data
"""

import os
from pathlib import Path

import numpy as np
import pytest

from boundary_probe.core.data import MNIST_FILES, write_idx
from boundary_probe.models import Architecture, Dataset, ImageVec, LayerSpec, Model


def linear_model(weight, bias=None, seed: int = 0) -> Model:
    """Single dense layer; logits = x @ weight + bias"""
    weight = np.asarray(weight, dtype=np.float32)
    h, classes = weight.shape
    arch = Architecture.custom((h,), (LayerSpec.dense(h, classes),), num_classes=classes)
    bias = np.zeros(classes, dtype=np.float32) if bias is None else np.asarray(bias, dtype=np.float32)
    return Model(arch, (weight, bias), seed=seed)


def constant_model(label: int, h: int = 10, seed: int = 0) -> Model:
    """Predicts `label` for every input"""
    bias = np.zeros(10, dtype=np.float32)
    bias[label] = 1.0
    return linear_model(np.zeros((h, 10)), bias, seed=seed)


def bar_images(labels, rng: np.random.Generator) -> np.ndarray:
    """28x28 images: class k is a bright horizontal bar at rows 2k+3 .. 2k+4, plus noise"""
    labels = np.asarray(labels)
    images = rng.uniform(0.0, 0.15, size=(labels.size, 28, 28))
    for i, k in enumerate(labels):
        images[i, 2 * k + 3:2 * k + 5, 4:24] = rng.uniform(0.8, 1.0, size=(2, 20))
    return np.round(images.reshape(labels.size, -1) * 255.0) / 255.0


def write_synthetic_mnist(directory: Path, n_train: int = 400, n_test: int = 100, seed: int = 0) -> Path:
    rng = np.random.default_rng(seed)
    for split, n in (("train", n_train), ("test", n_test)):
        labels = rng.permutation(np.arange(n) % 10)
        data = Dataset(bar_images(labels, rng), labels, split=split)
        images_name, labels_name = MNIST_FILES[split]
        write_idx(data, directory / images_name, directory / labels_name)
    return directory


@pytest.fixture
def identity_model() -> Model:
    """10 pixels, 10 classes; the brightest pixel wins"""
    return linear_model(np.eye(10) * 5.0)


@pytest.fixture
def clean_one() -> ImageVec:
    """Correctly classified as 1 by identity_model"""
    pixels = np.full(10, 0.1, dtype=np.float32)
    pixels[1] = 0.9
    return ImageVec(pixels, 1, "test:7")


@pytest.fixture
def small_mlp_arch() -> Architecture:
    return Architecture.custom((6,), (
        LayerSpec.dense(6, 8), LayerSpec.relu(),
        LayerSpec.dense(8, 10),
    ))


@pytest.fixture
def small_conv_arch() -> Architecture:
    return Architecture.custom((1, 6, 6), (
        LayerSpec.conv(1, 2, 3), LayerSpec.maxpool(), LayerSpec.relu(),
        LayerSpec.flatten(),
        LayerSpec.dense(8, 10),
    ))


@pytest.fixture
def synthetic_mnist_dir(tmp_path_factory) -> Path:
    return write_synthetic_mnist(tmp_path_factory.mktemp("mnist"))


@pytest.fixture
def mnist_dir() -> Path:
    """Real MNIST IDX files, only when BOUNDARY_PROBE_MNIST points at them"""
    location = os.environ.get("BOUNDARY_PROBE_MNIST")
    if not location:
        pytest.skip("BOUNDARY_PROBE_MNIST not set")
    return Path(location)
