import math

import numpy as np
import pytest

from boundary_probe.core.regions import (
    ball_volume, ball_volume_monte_carlo, build_rectangle, choose_b, classify_region,
    compute_intervals, evaluate, load_rectangle, load_report, rectangle_for_set, sample,
    sample_ball, sample_within_delta, save_rectangle, save_report, sweep_dimensions
)
from boundary_probe.exceptions import RegionError
from boundary_probe.models import (
    AdversarialSet, AttackConfig, AttackKind, BaseMode, Ensemble, ImageVec, PixelInterval,
    RegionThresholds, RegionType
)
from boundary_probe.utils.helpers import l2_distances

from conftest import constant_model


def _set(clean: np.ndarray, examples: np.ndarray, kind: AttackKind = AttackKind.CW2) -> AdversarialSet:
    examples = np.asarray(examples, dtype=np.float32)
    return AdversarialSet(
        clean=ImageVec(clean, 1, "test:2"), true_class=1, target_model_id="CUSTOM-seed1", kind=kind,
        target_class=2, examples=examples, labels=np.full(len(examples), 2),
        config=AttackConfig.default(kind, target=2),
    )


def _random_set(seed: int, h: int = 12, n: int = 5) -> AdversarialSet:
    rng = np.random.default_rng(seed)
    clean = np.round(rng.random(h), 3)
    examples = np.tile(clean, (n, 1))
    touched = rng.choice(h, size=h // 2, replace=False)
    examples[:, touched] = rng.random((n, touched.size))
    return _set(clean, examples)


def _interval(index: int, size: float) -> PixelInterval:
    return PixelInterval(index, 0.0, size, size / 2)


def test_interval_bounds_from_examples():
    clean = np.array([0.3, 0.7])
    examples = [[0.2, 0.7], [0.5, 0.7], [0.4, 0.7]]
    intervals = compute_intervals(_set(clean, examples))
    assert len(intervals) == 1
    interval = intervals[0]
    assert interval.index == 0
    assert interval.lo == pytest.approx(0.2, abs=1e-6)
    assert interval.hi == pytest.approx(0.5, abs=1e-6)
    assert interval.size == pytest.approx(0.3, abs=1e-6)


@pytest.mark.parametrize("seed", range(100))
def test_intervals_match_a_brute_force_scan(seed):
    adv_set = _random_set(seed)
    expected = {}
    for i in range(adv_set.clean.h):
        column = [float(row[i]) for row in adv_set.examples]
        if any(abs(v - float(adv_set.clean.pixels[i])) > 1e-6 for v in column):
            expected[i] = (min(column), max(column))

    intervals = compute_intervals(adv_set)
    assert {iv.index: (iv.lo, iv.hi) for iv in intervals} == expected
    sizes = [iv.size for iv in intervals]
    assert sizes == sorted(sizes, reverse=True)


def test_ranking_ties_break_on_pixel_index():
    clean = np.zeros(4)
    examples = [[0.0, 0.5, 0.0, 0.5], [0.0, 0.0, 0.0, 0.0]]
    intervals = compute_intervals(_set(clean, examples))
    assert [iv.index for iv in intervals] == [1, 3]


def test_intervals_ignore_example_order():
    adv_set = _random_set(3)
    shuffled = _set(adv_set.clean.pixels, adv_set.examples[::-1])
    assert compute_intervals(adv_set) == compute_intervals(shuffled)


def test_pointwise_intervals_span_the_unit_range():
    clean = np.array([0.3, 0.7])
    intervals = compute_intervals(_set(clean, [[0.0, 0.7], [1.0, 0.7]], kind=AttackKind.PW))
    assert (intervals[0].lo, intervals[0].hi) == (0.0, 1.0)


def test_empty_set_has_no_intervals():
    with pytest.raises(RegionError):
        compute_intervals(_set(np.zeros(3), np.zeros((0, 3))))


def test_choose_b():
    intervals = [_interval(0, 0.5), _interval(1, 0.4), _interval(2, 0.01)]
    assert choose_b(intervals, 0.05) == 2
    assert choose_b(intervals, 0.0) == 3
    assert choose_b(intervals, 0.9) == 1


def test_build_rectangle_bounds_and_base():
    clean = np.array([0.3, 0.3, 0.3, 0.3])
    examples = [[0.1, 0.3, 0.30, 0.6], [0.9, 0.3, 0.32, 0.7], [0.5, 0.3, 0.34, 0.8]]
    intervals = compute_intervals(_set(clean, examples))
    assert [iv.index for iv in intervals] == [0, 3, 2]

    rect = build_rectangle(intervals, clean, 2)
    assert rect.b == 2
    assert rect.smallest_size == pytest.approx(0.2, abs=1e-6)
    assert rect.base[2] == pytest.approx(0.32, abs=1e-6)
    assert rect.base[1] == pytest.approx(0.3)

    clean_mode = build_rectangle(intervals, clean, 2, BaseMode.CLEAN)
    assert clean_mode.base[2] == pytest.approx(0.3)

    everything = build_rectangle(intervals, clean, 3)
    assert sorted(everything.indices.tolist()) == [0, 2, 3]

    low, high = rect.corners()
    assert np.all((low >= 0.0) & (high <= 1.0))
    for bad in (0, 4):
        with pytest.raises(RegionError):
            build_rectangle(intervals, clean, bad)


def test_zero_width_rectangle_gives_identical_samples():
    intervals = [PixelInterval(0, 0.4, 0.4, 0.4), PixelInterval(1, 0.6, 0.6, 0.6)]
    rect = build_rectangle(intervals, np.array([0.1, 0.2, 0.3]), 2)
    samples = sample(rect, 20, seed=0)
    assert np.all(samples == samples[0])


def test_samples_are_uniform_inside_the_rectangle():
    clean = np.full(6, 0.5)
    intervals = [PixelInterval(0, 0.1, 0.9, 0.5), PixelInterval(3, 0.2, 0.6, 0.4),
                 PixelInterval(5, 0.45, 0.55, 0.5)]
    rect = build_rectangle(intervals, clean, 3)
    samples = sample(rect, 1000, seed=7)

    assert samples.shape == (1000, 6)
    assert np.all(rect.contains(samples))
    for iv in intervals:
        column = samples[:, iv.index].astype(np.float64)
        standard_error = (iv.hi - iv.lo) / math.sqrt(12.0) / math.sqrt(1000)
        assert abs(column.mean() - (iv.lo + iv.hi) / 2) <= 3 * standard_error
    np.testing.assert_array_equal(samples, sample(rect, 1000, seed=7))


def test_delta_rejection_keeps_samples_in_the_ball():
    clean = np.zeros(4)
    intervals = [PixelInterval(i, 0.0, 1.0, 0.5) for i in range(4)]
    rect = build_rectangle(intervals, clean, 4)
    samples, rejected = sample_within_delta(rect, 200, seed=1, delta=1.0)
    assert len(samples) == 200
    assert rejected > 0
    assert np.all(l2_distances(samples, clean) <= 1.0)


def test_evaluate_identical_models_share_rates():
    models = tuple(constant_model(2, h=2, seed=s) for s in (1, 2, 3))
    ens = Ensemble(models, models[0].architecture)
    adv_set = _set(np.array([0.3, 0.7]), [[0.2, 0.7], [0.5, 0.7]])
    rect = rectangle_for_set(adv_set, tau=0.0)
    report = evaluate(rect, ens, 50, seed=0, adv_set=adv_set)

    assert report.rates == [1.0, 1.0, 1.0]
    assert report.region_type is RegionType.TYPE3
    assert report.label == "CW2 1d 1→2"
    assert report.l2_label == "CW2 1→2"
    assert report.sample_l2.minimum <= report.sample_l2.mean <= report.sample_l2.maximum
    assert report.attack_l2 == adv_set.l2_stats


def test_rectangle_and_report_files_round_trip(tmp_path):
    ens = Ensemble((constant_model(1, h=2, seed=1), constant_model(2, h=2, seed=2)),
                   constant_model(1, h=2).architecture)
    adv_set = _set(np.array([0.3, 0.7]), [[0.2, 0.7], [0.5, 0.7]])
    rect = rectangle_for_set(adv_set, tau=0.0)
    report = evaluate(rect, ens, 30, seed=0, adv_set=adv_set, delta=5.0)
    assert report.region_type is RegionType.TYPE2

    loaded_rect = load_rectangle(save_rectangle(rect, tmp_path / "r.rect.json"))
    assert loaded_rect.intervals == rect.intervals
    np.testing.assert_array_equal(loaded_rect.base, rect.base)
    loaded_report = load_report(save_report(report, tmp_path / "r.report.json"))
    assert loaded_report.region_type is RegionType.TYPE2
    assert loaded_report.rates == report.rates


def test_region_with_no_sample_inside_delta_is_empty():
    ens = Ensemble((constant_model(1, h=2, seed=1), constant_model(2, h=2, seed=2)),
                   constant_model(1, h=2).architecture)
    adv_set = _set(np.array([0.3, 0.7]), [[0.2, 0.7], [0.5, 0.7]])
    rect = rectangle_for_set(adv_set, tau=0.0)
    report = evaluate(rect, ens, 20, seed=0, adv_set=adv_set, delta=0.0)

    assert report.n_samples == 0
    assert report.rejected > 0
    assert report.region_type is RegionType.EMPTY
    assert not report.region_type.is_uncertainty_region


@pytest.mark.parametrize("rates,expected", [
    ([0.929, 0, 0, 0, 0, 0, 0, 0, 0, 0], RegionType.TYPE1),
    ([0, 0, 0, 0.001, 0.004, 0.925, 1, 0.58, 0.991, 1], RegionType.TYPE2),
    ([0.826, 0.81, 0.824, 0.812, 0.832, 0.811, 0.825, 0.813, 0.801, 0.828], RegionType.TYPE3),
    ([0.5, 0.5, 0.5], RegionType.UNCLASSIFIED),
])
def test_classify_region_on_reported_rows(rates, expected):
    assert classify_region(rates, 0.8, 0.05) is expected


def test_raising_theta_high_never_creates_type3():
    rng = np.random.default_rng(0)
    for _ in range(200):
        rates = list(rng.random(5))
        low = classify_region(rates, 0.5, 0.05)
        high = classify_region(rates, 0.9, 0.05)
        if low is RegionType.UNCLASSIFIED:
            assert high is not RegionType.TYPE3


def test_thresholds_default():
    assert RegionThresholds() == RegionThresholds(0.8, 0.05)


def test_dimension_sweep():
    ens = Ensemble((constant_model(2, h=3, seed=1), constant_model(2, h=3, seed=2)),
                   constant_model(2, h=3).architecture)
    adv_set = _set(np.array([0.5, 0.5, 0.5]), [[0.1, 0.4, 0.5], [0.9, 0.6, 0.45]])
    intervals = compute_intervals(adv_set)
    points = sweep_dimensions(intervals, adv_set.clean.pixels, ens, [1, 2, 3, 9], 20, 0, 1)
    assert [p.b for p in points] == [1, 2, 3]
    assert all(p.rates == [1.0, 1.0] for p in points)


def test_ball_volume_small_dimensions():
    assert ball_volume(1, 1.0).value == pytest.approx(2.0)
    assert ball_volume(2, 1.0).value == pytest.approx(math.pi)
    assert ball_volume(3, 0.5).value == pytest.approx(4.0 / 3.0 * math.pi * 0.125)


@pytest.mark.parametrize("h", [3, 4, 5])
def test_ball_volume_matches_monte_carlo(h):
    exact = ball_volume(h, 0.5).value
    assert ball_volume_monte_carlo(h, 0.5, n=200_000, seed=h) == pytest.approx(exact, rel=0.02)


def test_ball_volume_shrinks_with_dimension():
    values = [ball_volume(h, 0.5).log_volume for h in range(1, 785)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert ball_volume(784, 0.5).value < 1e-300 or not ball_volume(784, 0.5).representable


def test_ball_volume_overflow_keeps_the_log_value():
    volume = ball_volume(784, 28.0)
    assert not volume.representable
    assert volume.value == math.inf
    assert math.isfinite(volume.log_volume)


def test_ball_samples_stay_within_delta():
    clean = np.full(20, 0.5)
    points = sample_ball(clean, 0.3, 500, seed=0)
    assert points.shape == (500, 20)
    assert np.all(l2_distances(points, clean) <= 0.3 + 1e-6)
    assert np.all((points >= 0.0) & (points <= 1.0))
