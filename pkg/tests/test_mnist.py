"""
Real-data checks. Point BOUNDARY_PROBE_MNIST at a directory holding the four
IDX files and run with `pytest -m slow`.
"""

import numpy as np
import pytest

from boundary_probe.core.data import load_mnist, select_label
from boundary_probe.core.network import error_rate, train
from boundary_probe.models import Architecture, TrainConfig
from boundary_probe.models.config import DataConfig

pytestmark = pytest.mark.slow


def test_split_sizes(mnist_dir):
    config = DataConfig(data_dir=str(mnist_dir))
    train_data = load_mnist(config, "train")
    test_data = load_mnist(config, "test")
    assert len(train_data) == 60000
    assert len(test_data) == 10000
    assert train_data.images.shape[1] == 784
    assert 0.0 <= float(np.min(test_data.images)) and float(np.max(test_data.images)) <= 1.0


def test_mlp_reaches_a_low_test_error(mnist_dir):
    config = DataConfig(data_dir=str(mnist_dir))
    test_data = load_mnist(config, "test")
    model = train(Architecture.mlp(), load_mnist(config, "train"), TrainConfig(seed=1, epochs=3),
                  test_data=test_data)
    assert error_rate(model, test_data) <= 0.05
    assert error_rate(model, select_label(test_data, 1)) <= 0.05
