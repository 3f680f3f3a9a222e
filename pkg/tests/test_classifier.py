"""Tests for the glyph classifier."""

import numpy as np
import pytest

from glyphshield.classifier import (
    GlyphClassifierCheckpoint,
    GlyphTrainConfig,
    build_glyph_dataset,
    canonical_probe,
    charset_manifest_path,
    classify,
    extract_embedding,
    extract_embeddings,
    glyph_cnn_network,
    glyph_cnn_specs,
    train_glyph_classifier,
)
from glyphshield.codepoints import desk_charset
from glyphshield.errors import (
    CheckpointError,
    DidNotConverge,
    EmptyCharset,
    InvalidSplit,
    UnknownCodepoint,
    WrongCanvas,
)
from glyphshield.nn.checkpoint import parameters_equal
from glyphshield.nn.network import layer_index
from glyphshield.raster import AugmentationSpec, FontSet, GlyphBitmap, load_font_set


def blank_bitmap(cp=ord("x"), size=100):
    pixels = np.zeros((size, size), dtype=np.float32)
    pixels[40:60, 45:55] = 1.0
    return GlyphBitmap(cp, size, size, pixels)


def small_checkpoint(charset=(ord("b"), ord("c"), ord("d"))):
    return GlyphClassifierCheckpoint(
        network=glyph_cnn_network(len(charset), width_scale=0.1, seed=1),
        charset=tuple(charset),
        val_accuracy=0.5,
    )


class TestNetworkLayout:
    def test_final_conv_block(self):
        net = glyph_cnn_network(10)
        flatten = layer_index(net.specs, "flatten")
        assert net.shapes[flatten] == (128, 3, 3)
        assert net.shapes[flatten + 1] == (1152,)
        assert net.output_shape == (10,)

    def test_hidden_width(self):
        specs = glyph_cnn_specs(7)
        assert specs[-2].out_features == 500
        assert specs[-1].in_features == 500

    def test_width_scale(self):
        specs = glyph_cnn_specs(4, width_scale=0.5)
        channels = [s.out_channels for s in specs if s.type == "conv2d"]
        assert channels == [8, 16, 32, 64, 64]
        assert specs[-2].in_features == 64 * 9

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            glyph_cnn_specs(0)
        with pytest.raises(ValueError):
            glyph_cnn_specs(3, width_scale=0)


class TestCheckpoint:
    def test_save_and_load(self, tmp_path):
        ckpt = small_checkpoint()
        path = ckpt.save(tmp_path / "glyph.ckpt")
        assert charset_manifest_path(path).name == "glyph.charset.json"
        loaded = GlyphClassifierCheckpoint.load(path)
        assert loaded.charset == ckpt.charset
        assert loaded.val_accuracy == 0.5
        assert parameters_equal(loaded.network, ckpt.network)
        assert loaded.checkpoint_id == ckpt.checkpoint_id

    def test_missing_manifest(self, tmp_path):
        path = small_checkpoint().save(tmp_path / "glyph.ckpt")
        charset_manifest_path(path).unlink()
        with pytest.raises(CheckpointError, match="manifest"):
            GlyphClassifierCheckpoint.load(path)

    def test_class_count_must_match(self):
        with pytest.raises(CheckpointError):
            GlyphClassifierCheckpoint(
                network=glyph_cnn_network(2, width_scale=0.1),
                charset=(1, 2, 3),
                val_accuracy=0.0,
            )

    def test_class_index(self):
        ckpt = small_checkpoint()
        assert ckpt.class_index(ord("c")) == 1
        with pytest.raises(UnknownCodepoint):
            ckpt.class_index(ord("z"))


class TestExtraction:
    def test_conv_embedding_width(self):
        ckpt = GlyphClassifierCheckpoint(
            network=glyph_cnn_network(3), charset=(1, 2, 3), val_accuracy=0.0
        )
        assert extract_embedding(ckpt, blank_bitmap()).shape == (1152,)
        assert extract_embedding(ckpt, blank_bitmap(), "linear").shape == (3,)

    def test_rows_follow_input_order(self):
        ckpt = small_checkpoint()
        a = blank_bitmap()
        b = GlyphBitmap(1, 100, 100, np.ones((100, 100), np.float32))
        both = extract_embeddings(ckpt, [a, b])
        for row, bitmap in zip(both, (a, b)):
            single = extract_embedding(ckpt, bitmap)
            np.testing.assert_allclose(row, single, rtol=1e-5, atol=1e-5)

    def test_wrong_canvas(self):
        with pytest.raises(WrongCanvas):
            extract_embeddings(small_checkpoint(), [blank_bitmap(size=24)])

    def test_classify_returns_charset_members(self):
        ckpt = small_checkpoint()
        assert classify(ckpt, [blank_bitmap()])[0] in ckpt.charset


class TestDatasetValidation:
    def test_val_fraction_bounds(self):
        spec = AugmentationSpec(fonts=[0], sizes_pt=[60], rotation_deg=[-2, 2])
        for fraction in (0.0, 1.0):
            with pytest.raises(InvalidSplit):
                build_glyph_dataset(
                    [ord("a")], FontSet([]), spec, val_fraction=fraction
                )

    def test_one_view_cannot_be_split(self):
        spec = AugmentationSpec(fonts=[0], sizes_pt=[60], rotation_deg=[2])
        with pytest.raises(InvalidSplit):
            build_glyph_dataset([ord("a")], FontSet([]), spec)

    def test_train_config_defaults(self):
        config = GlyphTrainConfig()
        assert config.target_acc == 0.90
        assert config.momentum == 0.9


class TestWithDejaVu:
    @pytest.fixture
    def spec(self, dejavu):
        return AugmentationSpec(
            fonts=[dejavu.id], sizes_pt=[60], rotation_deg=[-4.0, 4.0], seed=3
        )

    @pytest.fixture
    def dataset(self, dejavu, spec):
        return build_glyph_dataset(
            [ord("l"), ord("o"), 0x20, 0x0378],
            FontSet([dejavu]),
            spec,
            val_fraction=0.5,
        )

    def test_unrenderable_codepoints_are_dropped(self, dataset):
        assert dataset.charset == (ord("l"), ord("o"))
        assert set(dataset.dropped) == {0x20, 0x0378}

    def test_split_is_stratified(self, dataset):
        assert len(dataset) == 4
        val = [dataset.samples[i] for i in dataset.indices("val")]
        assert sorted(s.label for s in val) == [0, 1]

    def test_materialize_is_repeatable(self, dataset):
        x1, labels = dataset.materialize([0, 1, 2])
        x2, _ = dataset.materialize([0, 1, 2])
        assert x1.shape == (3, 1, 100, 100)
        np.testing.assert_array_equal(x1, x2)
        assert labels.tolist() == [0, 0, 1]

    def test_nothing_renders(self, dejavu, spec):
        with pytest.raises(EmptyCharset):
            build_glyph_dataset([0x20], FontSet([dejavu]), spec)

    def test_zero_epochs_does_not_converge(self, dataset):
        config = GlyphTrainConfig(max_epochs=0, width_scale=0.05)
        with pytest.raises(DidNotConverge) as info:
            train_glyph_classifier(dataset, config)
        ckpt = info.value.checkpoint
        assert not ckpt.converged
        assert ckpt.history == []
        assert ckpt.charset == dataset.charset

    def test_training_is_deterministic(self, dataset):
        config = GlyphTrainConfig(
            max_epochs=2, target_acc=1.0, width_scale=0.05, batch_size=2, lr=0.05
        )
        runs = []
        for _ in range(2):
            with pytest.raises(DidNotConverge) as info:
                train_glyph_classifier(dataset, config)
            runs.append(info.value.checkpoint)
        assert [h["epoch"] for h in runs[0].history] == [1, 2]
        assert parameters_equal(runs[0].network, runs[1].network)

    def test_canonical_probe(self, dejavu):
        probe = canonical_probe(ord("b"), dejavu)
        assert (probe.width, probe.height) == (100, 100)
        assert probe.size_pt == 80
        assert probe.rotation_deg == 0.0


@pytest.mark.slow
def test_desk_charset_reaches_target_accuracy(dejavu):
    """Full augmentation over the desk charset converges above 90%."""
    fonts = load_font_set()
    spec = AugmentationSpec(fonts=fonts.ids)
    dataset = build_glyph_dataset(desk_charset(), fonts, spec)
    assert len(dataset.charset) >= 150
    ckpt = train_glyph_classifier(dataset, GlyphTrainConfig())
    assert ckpt.converged
    assert ckpt.val_accuracy > 0.90
