import numpy as np
import pytest

from boundary_probe.utils.filters import (
    CandidateFilterContext, CandidateFilters, apply_filters, membership_filters
)
from boundary_probe.utils.helpers import (
    as_batch, config_hash, make_rng, normalize_rows, perturbed_mask, project, project_l1,
    row_norms, transition_label, unique_rows
)


def test_make_rng_streams_are_independent_and_repeatable():
    a = make_rng(0, 1, 2).random(4)
    b = make_rng(0, 1, 2).random(4)
    c = make_rng(0, 1, 3).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_as_batch_promotes_single_vectors(clean_one):
    assert as_batch(clean_one).shape == (1, 10)
    assert as_batch(np.zeros(4)).shape == (1, 4)
    assert as_batch([clean_one, clean_one]).shape == (2, 10)


def test_project_l1_known_value():
    np.testing.assert_allclose(project_l1(np.array([[3.0, 1.0]]), 2.0), [[2.0, 0.0]])


@pytest.mark.parametrize("norm", ["l1", "l2", "linf"])
def test_projection_respects_budget(norm):
    rng = np.random.default_rng(0)
    delta = rng.normal(size=(20, 30))
    eps = rng.uniform(0.1, 2.0, size=20)
    projected = project(delta, eps, norm)
    assert np.all(row_norms(projected, norm) <= eps + 1e-9)
    inside = project(delta * 1e-6, 10.0, norm)
    np.testing.assert_allclose(inside, delta * 1e-6)


def test_normalize_rows():
    grad = np.array([[3.0, -4.0], [0.0, 0.0]])
    np.testing.assert_allclose(normalize_rows(grad, "l2"), [[0.6, -0.8], [0.0, 0.0]])
    np.testing.assert_allclose(normalize_rows(grad, "linf"), [[1.0, -1.0], [0.0, 0.0]])


def test_perturbed_mask_ignores_float_noise():
    clean = np.array([0.5, 0.5])
    batch = np.array([[0.5 + 1e-8, 0.6]])
    assert perturbed_mask(batch, clean).tolist() == [[False, True]]


def test_unique_rows_keeps_first_occurrence():
    batch = np.array([[1, 2], [3, 4], [1, 2], [5, 6]])
    assert unique_rows(batch).tolist() == [0, 1, 3]


def test_transition_label():
    assert transition_label(1, 2) == "1→2"
    assert transition_label(1, None) == "1→*"


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})


def test_filters_apply_in_order():
    clean = np.zeros(2, dtype=np.float32)
    candidates = np.array([
        [0.1, 0.1],    # target class, close
        [0.1, 0.1],    # duplicate
        [0.9, 0.9],    # target class, far
        [0.2, 0.0],    # still the true class
        [1.5, 0.0],    # outside the unit box
        [0.0, 0.3],    # another wrong class
    ], dtype=np.float32)
    labels = np.array([2, 2, 2, 1, 2, 3])
    context = CandidateFilterContext(clean, true_class=1, labels=labels, target_class=2, delta=0.5)

    keep = apply_filters(candidates, membership_filters(with_delta=True), context)
    assert keep.tolist() == [0]

    untargeted = CandidateFilterContext(clean, true_class=1, labels=labels)
    assert apply_filters(candidates, membership_filters(), untargeted).tolist() == [0, 2, 5]


def test_delta_filter_is_a_no_op_without_delta():
    context = CandidateFilterContext(np.zeros(1), 1, np.array([2]))
    assert CandidateFilters.DELTA_BALL.apply_on(np.array([[5.0]]), context).tolist() == [True]
