import json

import numpy as np
import pytest

from boundary_probe.core.network import init_params
from boundary_probe.exceptions import ModelFormatError
from boundary_probe.formats.framed import FramedFileId, read_framed, write_framed
from boundary_probe.formats.image_block import (
    load_adversarial_set, load_sample_images, load_samples, save_adversarial_set, save_samples
)
from boundary_probe.formats.model_file import load_model, save_model, sidecar_path
from boundary_probe.formats.tables import Table, format_cell, read_csv_rows
from boundary_probe.models import AdversarialSet, AttackConfig, AttackKind, Model, TrainConfig


def test_framed_file_rejects_other_magic(tmp_path):
    path = tmp_path / "block.bin"
    write_framed(path, FramedFileId.SAMPLES, {"count": 1}, np.zeros(3))
    header, payload = read_framed(path, FramedFileId.SAMPLES)
    assert header["payload_floats"] == 3
    with pytest.raises(ModelFormatError):
        read_framed(path, FramedFileId.MODEL)


def test_framed_file_detects_truncation(tmp_path):
    path = tmp_path / "block.bin"
    write_framed(path, FramedFileId.SAMPLES, {}, np.arange(4))
    path.write_bytes(path.read_bytes()[:-2])
    with pytest.raises(ModelFormatError, match="payload"):
        read_framed(path, FramedFileId.SAMPLES)


def test_model_round_trip_is_bit_exact(tmp_path, small_conv_arch):
    cfg = TrainConfig(seed=4, epochs=3)
    model = Model(small_conv_arch, tuple(init_params(small_conv_arch, 4)), seed=4,
                  train_config=cfg, train_error=0.1, test_error=0.125)
    path = save_model(model, tmp_path / "models" / f"{model.model_id}.bin")

    loaded = load_model(path)
    assert loaded.architecture == model.architecture
    assert loaded.train_config == cfg
    assert loaded.seed == 4
    assert loaded.test_error == 0.125
    for a, b in zip(model.params, loaded.params):
        assert a.tobytes() == b.tobytes()

    sidecar = json.loads(sidecar_path(path).read_text())
    assert sidecar["model_id"] == "CUSTOM-seed4"


def test_float64_model_round_trip_keeps_precision(tmp_path, small_mlp_arch):
    cfg = TrainConfig(seed=3, precision="float64")
    model = Model(small_mlp_arch, tuple(init_params(small_mlp_arch, 3, dtype=np.float64)), seed=3,
                  train_config=cfg)
    path = save_model(model, tmp_path / "m.bin")
    header, _ = read_framed(path, FramedFileId.MODEL)
    assert header["payload_dtype"] == "float64"

    loaded = load_model(path)
    assert loaded.dtype == np.float64
    assert loaded.train_config.precision == "float64"
    for a, b in zip(model.params, loaded.params):
        assert a.tobytes() == b.tobytes()


def test_model_file_with_missing_header_field(tmp_path):
    path = tmp_path / "broken.bin"
    write_framed(path, FramedFileId.MODEL, {"seed": 1}, np.zeros(2))
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_adversarial_set_round_trip(tmp_path, clean_one):
    examples = np.tile(clean_one.pixels, (3, 1))
    examples[:, 2] = [0.95, 0.97, 0.99]
    adv_set = AdversarialSet(
        clean=clean_one, true_class=1, target_model_id="CUSTOM-seed0", kind=AttackKind.CW2,
        target_class=2, examples=examples, labels=np.array([2, 2, 2]),
        config=AttackConfig.default(AttackKind.CW2, target=2), delta=1.5,
    )
    path = save_adversarial_set(adv_set, tmp_path / "sets" / f"{adv_set.file_stem}.bin")
    assert path.name == "CW2_1to2.bin"

    loaded = load_adversarial_set(path)
    np.testing.assert_array_equal(loaded.examples, adv_set.examples)
    np.testing.assert_array_equal(loaded.clean.pixels, clean_one.pixels)
    assert loaded.clean.source_id == "test:7"
    assert loaded.config == adv_set.config
    assert loaded.delta == 1.5
    assert loaded.row_label == "CW2 1d 1→2"


def test_samples_round_trip(tmp_path):
    samples = np.random.default_rng(0).random((5, 4)).astype(np.float32)
    path = save_samples(samples, tmp_path / "s.bin", {"label": "R 2d 1→2", "seed": 0})
    header, loaded = load_samples(path)
    np.testing.assert_array_equal(loaded, samples)
    assert header["count"] == 5
    images = load_sample_images(path)
    assert len(images) == 5
    assert images[0].source_id == "R 2d 1→2:0"


def test_format_cell():
    assert format_cell(0.5) == "0.5000"
    assert format_cell(None) == ""
    assert format_cell(True) == "yes"
    assert format_cell(3) == "3"


def test_table_writes_csv_and_markdown(tmp_path):
    table = Table("regions", "Misclassification rates", ["region", "M1", "M2"])
    table.add_row(["CW2 280d 1→2", 0.929, 0.0])
    csv_path, md_path = table.write(tmp_path)

    assert read_csv_rows(csv_path) == [["region", "M1", "M2"], ["CW2 280d 1→2", "0.9290", "0.0000"]]
    markdown = md_path.read_text(encoding="utf-8")
    assert markdown.startswith("### Misclassification rates")
    assert "| CW2 280d 1→2 | 0.9290 | 0.0000 |" in markdown


def test_table_rejects_ragged_rows():
    table = Table("t", "t", ["a", "b"])
    with pytest.raises(ValueError):
        table.add_row([1])
