import numpy as np
import pytest

from boundary_probe.attacks import (
    bim, cw2, fgsm, generate_set, get_attack, mi, newtonfool, newtonfool_path, pointwise,
    resolve_delta, run_attack
)
from boundary_probe.core.network import predict, predict_batch
from boundary_probe.exceptions import AttackPreconditionError
from boundary_probe.models import AttackConfig, AttackKind, ImageVec
from boundary_probe.utils.helpers import l2_distances, make_rng, row_norms

from conftest import linear_model


@pytest.fixture
def two_class_model():
    """Class 1 wins when x . w + b1 - b0 > 0 with w = (1, -2, 0.5, 1)"""
    weight = np.zeros((4, 2))
    weight[:, 1] = [1.0, -2.0, 0.5, 1.0]
    return linear_model(weight, bias=[1.15, 0.0])


def _assert_members(adv_set, model, delta=None):
    """Every example is in the unit box, labelled t by the model and inside delta"""
    assert np.all((adv_set.examples >= 0.0) & (adv_set.examples <= 1.0))
    assert np.all(predict_batch(model, adv_set.examples) == adv_set.labels)
    if adv_set.target_class is not None:
        assert np.all(adv_set.labels == adv_set.target_class)
    assert np.all(adv_set.labels != adv_set.true_class)
    if delta is not None:
        assert np.all(adv_set.distances <= delta + 1e-6)


def test_fgsm_zero_step_yields_nothing(identity_model, clean_one):
    config = AttackConfig.default(AttackKind.FGSM, epsilons=[0.0], restarts=1)
    assert len(fgsm(identity_model, clean_one, config)) == 0


def test_fgsm_flips_exactly_past_the_linear_margin(two_class_model):
    clean = ImageVec(np.full(4, 0.5), 0, "test:0")
    assert predict(two_class_model, clean) == 0
    # margin -0.9 closes at eps * |w|_1 = eps * 4.5, i.e. eps = 0.2
    grid = [0.1, 0.15, 0.19, 0.21, 0.25, 0.3]
    config = AttackConfig.default(AttackKind.FGSM, epsilons=grid, restarts=1, random_start=0.0)
    adv_set = fgsm(two_class_model, clean, config)

    linf = np.max(np.abs(adv_set.examples - clean.pixels), axis=1)
    assert sorted(np.round(linf, 4).tolist()) == [0.21, 0.25, 0.3]
    assert adv_set.labels.tolist() == [1, 1, 1]


def test_fgsm_respects_linf_budget(identity_model, clean_one):
    config = AttackConfig.default(AttackKind.FGSM, epsilon=0.5, grid_size=5, restarts=3)
    adv_set = fgsm(identity_model, clean_one, config)
    assert len(adv_set) > 0
    _assert_members(adv_set, identity_model)
    assert np.max(np.abs(adv_set.examples - clean_one.pixels)) <= 0.5 + 1e-6


def test_single_step_bim_is_fgsm(identity_model, clean_one):
    common = dict(epsilons=[0.3], restarts=3, random_start=0.01, seed=4)
    f = get_attack(identity_model, AttackConfig.default(AttackKind.FGSM, **common))
    b = get_attack(identity_model, AttackConfig.default(AttackKind.BIM_LINF, iterations=1, step_size=0.3, **common))
    clean = clean_one.pixels.astype(np.float64)
    fgsm_rows = np.clip(f.candidates(clean, 1, make_rng(9)), 0.0, 1.0)
    bim_rows = b.candidates(clean, 1, make_rng(9))
    np.testing.assert_allclose(fgsm_rows, bim_rows, atol=1e-12)


def test_momentum_free_mi_is_bim_linf(identity_model, clean_one):
    common = dict(epsilons=[0.2, 0.4], restarts=2, iterations=5, seed=1)
    m = get_attack(identity_model, AttackConfig.default(AttackKind.MI, momentum=0.0, **common))
    b = get_attack(identity_model, AttackConfig.default(AttackKind.BIM_LINF, **common))
    clean = clean_one.pixels.astype(np.float64)
    np.testing.assert_allclose(m.candidates(clean, 1, make_rng(2)), b.candidates(clean, 1, make_rng(2)))


@pytest.mark.parametrize("norm,eps", [("l1", 1.5), ("l2", 0.8), ("linf", 0.4)])
def test_bim_stays_in_its_norm_ball(identity_model, clean_one, norm, eps):
    config = AttackConfig.default(AttackKind.for_bim_norm(norm), epsilon=eps, grid_size=3, restarts=3)
    attack = get_attack(identity_model, config)
    clean = clean_one.pixels.astype(np.float64)
    rows = attack.candidates(clean, 1, make_rng(0))
    assert np.all(row_norms(rows - clean[None, :], norm) <= eps + 1e-9)
    assert np.all((rows >= 0.0) & (rows <= 1.0))

    adv_set = bim(identity_model, clean_one, config, norm=norm)
    _assert_members(adv_set, identity_model)


def test_mi_outputs_are_valid(identity_model, clean_one):
    adv_set = mi(identity_model, clean_one, AttackConfig.default(AttackKind.MI, epsilon=0.5, grid_size=3, restarts=2))
    assert len(adv_set) > 0
    _assert_members(adv_set, identity_model)


def test_attacks_are_deterministic(identity_model, clean_one):
    config = AttackConfig.default(AttackKind.BIM_L2, epsilon=0.8, grid_size=3, restarts=4, seed=3)
    a = run_attack(identity_model, clean_one, config)
    b = run_attack(identity_model, clean_one, config)
    np.testing.assert_array_equal(a.examples, b.examples)


def test_misclassified_clean_image_is_rejected(identity_model):
    pixels = np.full(10, 0.1)
    pixels[4] = 0.9
    with pytest.raises(AttackPreconditionError):
        fgsm(identity_model, ImageVec(pixels, 1, "test:3"))


def test_newtonfool_lowers_the_true_class_probability(identity_model, clean_one):
    path = newtonfool_path(identity_model, clean_one.pixels, 1, eta=0.01, max_iter=100)
    trace = path.trace
    assert trace[-1] < trace[0]
    steps = np.diff(trace)
    assert np.mean(steps <= 1e-9) >= 0.95


def test_newtonfool_keeps_converged_points(identity_model, clean_one):
    config = AttackConfig.default(AttackKind.NF, restarts=4, iterations=200, eta=0.05)
    adv_set = newtonfool(identity_model, clean_one, config)
    assert len(adv_set) > 0
    _assert_members(adv_set, identity_model)


def test_pointwise_results_are_locally_minimal(identity_model, clean_one):
    config = AttackConfig.default(AttackKind.PW, restarts=10, noise_steps=20)
    adv_set = pointwise(identity_model, clean_one, config)
    assert len(adv_set) > 0
    _assert_members(adv_set, identity_model)
    for example in adv_set.examples:
        changed = np.flatnonzero(np.abs(example - clean_one.pixels) > 1e-6)
        for i in changed:
            restored = example.copy()
            restored[i] = clean_one.pixels[i]
            assert predict(identity_model, restored) == 1


def test_cw2_reaches_the_target_with_small_distortion(identity_model, clean_one):
    config = AttackConfig.default(
        AttackKind.CW2, target=2, restarts=2, binary_search_steps=3, max_iterations=100,
        learning_rate=0.05, initial_const=1.0,
    )
    adv_set = cw2(identity_model, clean_one, config)
    assert len(adv_set) > 0
    _assert_members(adv_set, identity_model)
    assert np.all(adv_set.labels == 2)
    assert adv_set.l2_stats.maximum < 1.5


def test_cw2_with_zero_margin_and_a_large_constant_finds_the_target(identity_model, clean_one):
    config = AttackConfig.default(
        AttackKind.CW2, target=2, confidence=0.0, restarts=1, binary_search_steps=1,
        max_iterations=200, learning_rate=0.05, initial_const=1e4, abort_early=False,
    )
    adv_set = cw2(identity_model, clean_one, config)
    assert len(adv_set) > 0
    assert np.all(predict_batch(identity_model, adv_set.examples) == 2)
    assert np.all((adv_set.examples >= 0.0) & (adv_set.examples <= 1.0))


def test_generate_set_members(identity_model, clean_one):
    config = AttackConfig.default(AttackKind.FGSM, epsilon=0.8, grid_size=8, restarts=4)
    adv_set = generate_set(identity_model, clean_one, AttackKind.FGSM, 0, min_count=1, config=config)
    assert adv_set.target_class == 0
    _assert_members(adv_set, identity_model, adv_set.delta)
    stats = adv_set.l2_stats
    assert stats.minimum <= stats.mean <= stats.maximum


def test_generate_set_with_zero_delta_is_empty(identity_model, clean_one):
    config = AttackConfig.default(AttackKind.FGSM, epsilon=0.8, grid_size=8, restarts=4)
    adv_set = generate_set(identity_model, clean_one, AttackKind.FGSM, 0, delta=0.0, config=config)
    assert len(adv_set) == 0
    assert adv_set.shortfall


def test_generate_set_rejects_the_true_class(identity_model, clean_one):
    with pytest.raises(AttackPreconditionError):
        generate_set(identity_model, clean_one, AttackKind.FGSM, 1)


def test_resolve_delta():
    clean = np.zeros(2)
    examples = np.array([[3.0, 4.0], [0.0, 1.0]])
    assert resolve_delta(examples, clean, None) == pytest.approx(6.0)
    assert resolve_delta(examples, clean, 2.5) == 2.5
    assert resolve_delta(np.zeros((0, 2)), clean, None) == 0.0
    assert resolve_delta(examples * 100, clean, None) == 28.0


def test_set_labels(identity_model, clean_one):
    config = AttackConfig.default(AttackKind.FGSM, epsilon=0.8, grid_size=8, restarts=4)
    adv_set = generate_set(identity_model, clean_one, AttackKind.FGSM, 0, min_count=1, config=config)
    assert adv_set.file_stem == "FGSM_1to0"
    assert adv_set.row_label.startswith("FGSM ")
    assert adv_set.row_label.endswith("d 1→0")
    assert np.all(l2_distances(adv_set.examples, clean_one.pixels) == adv_set.distances)
