import numpy as np
import pytest

from boundary_probe.core.ensemble import (
    alert_summary, classify_batch, classify_with_alert, disagreement_rate, in_uncertainty_region,
    load_ensemble, misclassification_rates, predict_matrix, save_ensemble, train_ensemble
)
from boundary_probe.core.network import error_rate
from boundary_probe.exceptions import EnsembleError
from boundary_probe.models import Architecture, Dataset, Ensemble, LayerSpec, Model, TrainConfig

from conftest import constant_model, linear_model


def _ensemble(*models: Model) -> Ensemble:
    return Ensemble(models, models[0].architecture)


def test_unanimous_ensemble_has_no_disagreement():
    ens = _ensemble(constant_model(3, seed=1), constant_model(3, seed=2))
    images = np.random.default_rng(0).random((5, 10))
    assert disagreement_rate(ens, images) == 0.0
    decision = classify_with_alert(ens, images[0])
    assert decision.label == 3 and not decision.alert


def test_disagreement_raises_an_alert():
    ens = _ensemble(constant_model(3, seed=1), constant_model(3, seed=2), constant_model(4, seed=3))
    images = np.zeros((4, 10))
    assert disagreement_rate(ens, images) == 1.0
    assert in_uncertainty_region(ens, images[0])
    decision = classify_with_alert(ens, images[0])
    assert decision.alert
    assert decision.label is None
    assert decision.labels == (3, 3, 4)
    assert len(classify_batch(ens, images)) == 4


def test_predict_matrix_shape():
    ens = _ensemble(constant_model(1, seed=1), constant_model(2, seed=2))
    labels = predict_matrix(ens, np.zeros((6, 10)))
    assert labels.shape == (2, 6)
    assert labels[:, 0].tolist() == [1, 2]


def test_misclassification_rates_per_model():
    ens = _ensemble(constant_model(1, seed=1), constant_model(2, seed=2))
    assert misclassification_rates(ens, np.zeros((3, 10)), true_class=1) == [0.0, 1.0]


def test_alert_summary_counts_unanimous_mistakes():
    ens = _ensemble(constant_model(2, seed=1), constant_model(2, seed=2))
    summary = alert_summary(ens, np.zeros((4, 10)), true_class=1)
    assert summary.alert_rate == 0.0
    assert summary.coverage == 0.0
    assert summary.unalerted_accuracy == 0.0
    assert summary.unanimous_wrong == 4

    mixed = _ensemble(constant_model(1, seed=1), constant_model(2, seed=2))
    summary = alert_summary(mixed, np.zeros((4, 10)), true_class=1)
    assert summary.coverage == 1.0
    assert summary.unalerted_accuracy is None


def test_disagreement_never_exceeds_the_union_bound():
    rng = np.random.default_rng(5)
    models = [linear_model(rng.normal(size=(10, 10)), seed=s) for s in range(4)]
    ens = _ensemble(*models)
    data = Dataset(rng.random((200, 10)), rng.integers(0, 10, size=200))
    bound = sum(error_rate(m, data) for m in models)
    assert disagreement_rate(ens, data) <= bound


def test_mixed_architectures_are_rejected():
    with pytest.raises(EnsembleError):
        Ensemble((constant_model(1, h=10), constant_model(1, h=4)), constant_model(1, h=10).architecture)
    with pytest.raises(EnsembleError):
        Ensemble((), constant_model(1).architecture)


def test_train_ensemble_needs_distinct_seeds(small_mlp_arch):
    data = Dataset(np.random.default_rng(0).random((20, 6)), np.arange(20) % 10)
    with pytest.raises(EnsembleError):
        train_ensemble(small_mlp_arch, data, [1], TrainConfig(epochs=1))
    with pytest.raises(EnsembleError):
        train_ensemble(small_mlp_arch, data, [1, 1], TrainConfig(epochs=1))


def test_threaded_training_matches_sequential(small_mlp_arch):
    data = Dataset(np.random.default_rng(0).random((40, 6)), np.arange(40) % 10)
    cfg = TrainConfig(epochs=2, batch_size=8)
    sequential = train_ensemble(small_mlp_arch, data, [3, 1, 2], cfg)
    threaded = train_ensemble(small_mlp_arch, data, [3, 1, 2], cfg, jobs=3)
    assert sequential.seeds == (3, 1, 2)
    assert sequential.target.seed == 3
    for a, b in zip(sequential.models, threaded.models):
        assert all(np.array_equal(x, y) for x, y in zip(a.params, b.params))


def test_ensemble_manifest_round_trip(tmp_path):
    arch = Architecture.custom((10,), (LayerSpec.dense(10, 10),))
    rng = np.random.default_rng(1)
    models = tuple(
        Model(arch, (rng.normal(size=(10, 10)).astype(np.float32), np.zeros(10, np.float32)),
              seed=s, test_error=0.01 * s)
        for s in (1, 2)
    )
    ens = Ensemble(models, arch)
    manifest = save_ensemble(ens, tmp_path)
    assert (tmp_path / "models" / "CUSTOM-seed1.bin").exists()

    loaded = load_ensemble(manifest)
    assert loaded.seeds == (1, 2)
    assert loaded.column_names == ("M1", "M2")
    assert loaded.models[1].test_error == pytest.approx(0.02)
    images = rng.random((5, 10))
    np.testing.assert_array_equal(predict_matrix(loaded, images), predict_matrix(ens, images))


def test_missing_manifest(tmp_path):
    with pytest.raises(EnsembleError, match="run train first"):
        load_ensemble(tmp_path / "ensemble.json")


def test_alert_summary_verdicts():
    mixed = _ensemble(constant_model(1, seed=1), constant_model(2, seed=2))
    assert alert_summary(mixed, np.zeros((4, 10)), true_class=1).sufficient is True
    fooled = _ensemble(constant_model(2, seed=1), constant_model(2, seed=2))
    assert alert_summary(fooled, np.zeros((4, 10)), true_class=1).sufficient is False

    empty = alert_summary(mixed, np.zeros((0, 10)), true_class=1)
    assert empty.n == 0
    assert empty.coverage is None
    assert empty.sufficient is None


def test_loading_an_ensemble_with_repeated_seeds_fails(tmp_path):
    arch = Architecture.custom((10,), (LayerSpec.dense(10, 10),))
    models = tuple(
        Model(arch, (np.full((10, 10), v, np.float32), np.zeros(10, np.float32)), seed=1)
        for v in (0.1, 0.2)
    )
    manifest = save_ensemble(Ensemble(models, arch), tmp_path)
    with pytest.raises(EnsembleError, match="distinct"):
        load_ensemble(manifest)
