"""Tests for names parsing, DCES, embedding spaces and neighbor search."""

from unittest.mock import MagicMock, patch

import numpy as np
import pytest
import requests

from glyphshield.classifier import GlyphClassifierCheckpoint, glyph_cnn_network
from glyphshield.errors import (
    EmptySpace,
    LengthMismatch,
    MalformedLine,
    NamesFetchError,
    NoBaseLetter,
    NoCaseToken,
    UnknownCodepoint,
    ZeroVector,
)
from glyphshield.spaces import (
    EmbeddingSpace,
    NeighborSet,
    SpaceBuildMeta,
    build_i2ces,
    build_ices,
    cosine,
    dces_key,
    dces_neighbors,
    dces_space,
    fetch_names_list,
    i2ces_vector,
    load_neighbor_sets,
    neighbor_sets,
    parse_names_list,
    save_neighbor_sets,
    top_k,
)
from glyphshield.spaces.i2ces import probe_spec
from glyphshield.spaces.names import names_table_from_unicodedata, parse_names_lines


def _toy_space(kind: str = "i2ces") -> EmbeddingSpace:
    matrix = np.array(
        [
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ],
        dtype=np.float32,
    )
    return EmbeddingSpace(
        kind=kind, dim=3, codepoints=(0x61, 0x62, 0x63, 0x64, 0x65), matrix=matrix
    )


class TestNames:
    """UnicodeData.txt parsing."""

    def test_parse_excerpt(self, names_file):
        table = parse_names_list(names_file)
        assert table.tokens(0x62) == ("LATIN", "SMALL", "LETTER", "B")
        assert table.name(0x180) == "LATIN SMALL LETTER B WITH STROKE"
        assert 0x4E00 not in table
        assert 0x20 in table

    def test_malformed_line_number(self):
        lines = ["0041;LATIN CAPITAL LETTER A;Lu", "zz;BROKEN;Lu"]
        with pytest.raises(MalformedLine) as excinfo:
            parse_names_lines(lines)
        assert excinfo.value.line_number == 2

    def test_fetch_names_caches(self, tmp_path):
        response = MagicMock()
        response.text = "0062;LATIN SMALL LETTER B;Ll;0;L;;;;;N;;;0042;;0042\n"
        response.raise_for_status.return_value = None
        target = "glyphshield.spaces.names.requests.get"
        with patch(target, return_value=response) as get:
            first = fetch_names_list("11.0.0", cache_dir=tmp_path)
            second = fetch_names_list("11.0.0", cache_dir=tmp_path)
        assert first == second
        assert get.call_count == 1
        assert "11.0.0" in get.call_args.args[0]
        assert parse_names_list(first).tokens(0x62)[-1] == "B"

    def test_fetch_names_http_error(self, tmp_path):
        with patch(
            "glyphshield.spaces.names.requests.get",
            side_effect=requests.ConnectionError("offline"),
        ):
            with pytest.raises(NamesFetchError):
                fetch_names_list("11.0.0", cache_dir=tmp_path)


class TestDces:
    """Description-based neighbors."""

    def test_small_b_neighbors(self, names_file):
        table = parse_names_list(names_file)
        found = dces_neighbors(0x62, table)
        assert found.neighbors == (0x180, 0x183, 0x253, 0x1E03)
        assert set(found.similarities) == {1.0}
        assert 0x42 not in found.neighbors
        assert 0x299 not in found.neighbors

    def test_small_capital_groups_with_capitals(self, names_file):
        table = parse_names_list(names_file)
        assert dces_key(table.tokens(0x299)) == ("CAPITAL", "B")
        assert dces_neighbors(0x42, table).neighbors == (0x181, 0x299)

    def test_symmetry(self, names_file):
        table = parse_names_list(names_file)
        space = dces_space(table)
        for cp, found in space.items():
            for other in found.neighbors:
                assert cp in space[other].neighbors

    def test_errors(self, names_file):
        table = parse_names_list(names_file)
        with pytest.raises(NoCaseToken):
            dces_neighbors(0x20, table)
        with pytest.raises(NoBaseLetter):
            dces_neighbors(0x432, table)
        with pytest.raises(UnknownCodepoint):
            dces_neighbors(0x4E00, table)

    def test_dces_space_skips_ineligible(self, names_file):
        space = dces_space(parse_names_list(names_file), [0x20, 0x61, 0x62, 0x432])
        assert sorted(space) == [0x61, 0x62]
        assert space[0x61].neighbors == ()


class TestDcesFromUnicodedata:
    """DCES over the Unicode database bundled with the interpreter."""

    @pytest.fixture(scope="class")
    def table(self):
        return names_table_from_unicodedata()

    def test_small_b(self, table):
        found = dces_neighbors(ord("b"), table)
        assert 0x180 in found.neighbors
        assert all("CAPITAL" not in table.tokens(cp) for cp in found.neighbors)

    def test_latin_symmetry(self, table):
        space = dces_space(table, range(0x41, 0x250))
        assert space
        for cp, found in space.items():
            for other in found.neighbors:
                assert cp in dces_neighbors(other, table).neighbors


class TestEmbeddingSpace:
    """Space invariants and persistence."""

    def test_rejects_zero_rows(self):
        with pytest.raises(ValueError, match="all-zero"):
            EmbeddingSpace(
                kind="i2ces", dim=2, codepoints=(1, 2), matrix=np.zeros((2, 2))
            )

    def test_rejects_unsorted_codepoints(self):
        with pytest.raises(ValueError, match="ascending"):
            EmbeddingSpace(
                kind="i2ces", dim=1, codepoints=(2, 1), matrix=np.ones((2, 1))
            )

    def test_ices_dim_matches_canvas(self):
        meta = SpaceBuildMeta(canvas=(2, 2))
        with pytest.raises(ValueError, match="canvas area"):
            EmbeddingSpace(
                kind="ices",
                dim=3,
                codepoints=(1,),
                matrix=np.ones((1, 3)),
                build_meta=meta,
            )

    def test_save_load(self, tmp_path):
        space = _toy_space()
        loaded = EmbeddingSpace.load(space.save(tmp_path / "toy.space"))
        assert loaded.codepoints == space.codepoints
        np.testing.assert_array_equal(loaded.matrix, space.matrix)
        assert loaded.kind == "i2ces"

    def test_vector_unknown(self):
        with pytest.raises(UnknownCodepoint):
            _toy_space().vector(0x7A)


class TestSearch:
    """Cosine and exact top-k."""

    def test_cosine_values(self):
        assert cosine(np.array([1, 0]), np.array([0, 1])) == 0.0
        assert cosine(np.array([1, 2, 3]), np.array([2, 4, 6])) == pytest.approx(1.0)
        assert -1.0 <= cosine(np.array([1e-8, 3.0]), np.array([-1e-8, -3.0])) <= 1.0

    def test_cosine_errors(self):
        with pytest.raises(LengthMismatch):
            cosine(np.ones(2), np.ones(3))
        with pytest.raises(ZeroVector):
            cosine(np.zeros(2), np.ones(2))

    def test_top_k_ties_break_by_codepoint(self):
        found = top_k(_toy_space(), 0x61, 3)
        assert found.neighbors == (0x62, 0x64, 0x63)
        assert found.similarities[0] == pytest.approx(found.similarities[1])

    def test_top_k_exhaustive_on_small_space(self):
        found = top_k(_toy_space(), 0x65, 10)
        assert len(found) == 4
        assert 0x65 not in found.neighbors

    def test_top_k_matches_brute_force(self):
        rng = np.random.default_rng(3)
        matrix = rng.normal(size=(40, 6)).astype(np.float32)
        space = EmbeddingSpace(
            kind="i2ces", dim=6, codepoints=tuple(range(100, 140)), matrix=matrix
        )
        normed = matrix.astype(np.float64)
        normed /= np.linalg.norm(normed, axis=1, keepdims=True)
        sims = normed @ normed[7]
        order = [i for i in np.lexsort((np.arange(40), -sims)) if i != 7][:5]
        assert top_k(space, 107, 5).neighbors == tuple(100 + i for i in order)

    def test_top_k_errors(self):
        with pytest.raises(ValueError):
            top_k(_toy_space(), 0x61, 0)
        with pytest.raises(UnknownCodepoint):
            top_k(_toy_space(), 0x7A, 1)

    def test_neighbor_sets_round_trip(self, tmp_path):
        sets = neighbor_sets(_toy_space(), 2)
        assert sorted(sets) == [0x61, 0x62, 0x63, 0x64, 0x65]
        path = save_neighbor_sets(tmp_path / "n.json", list(sets.values()))
        assert load_neighbor_sets(path) == sets


class TestNeighborSet:
    def test_invariants(self):
        with pytest.raises(ValueError):
            NeighborSet(1, (1,), (1.0,))
        with pytest.raises(ValueError):
            NeighborSet(1, (2, 3), (0.5, 0.9))
        with pytest.raises(ValueError):
            NeighborSet(1, (2,), (0.5, 0.4))

    def test_above(self):
        found = NeighborSet(1, (2, 3, 4), (0.9, 0.75, 0.2))
        assert found.above(0.75) == (2, 3)


class TestIces:
    """Pixel-flatten spaces from DejaVu Sans."""

    def test_build_abc(self, dejavu):
        space = build_ices([ord("a"), ord("b"), ord("c")], dejavu)
        assert space.kind == "ices"
        assert space.dim == 576
        assert len(space) == 3

    def test_blank_is_skipped(self, dejavu):
        space = build_ices([ord(" "), ord("a")], dejavu)
        assert space.codepoints == (ord("a"),)
        assert "U+0020" in space.build_meta.skipped

    def test_empty(self, dejavu):
        with pytest.raises(EmptySpace):
            build_ices([ord(" ")], dejavu)


def _glyph_checkpoint(charset, width_scale=0.1):
    return GlyphClassifierCheckpoint(
        network=glyph_cnn_network(len(charset), width_scale=width_scale, seed=1),
        charset=tuple(charset),
        val_accuracy=0.5,
    )


class TestI2ces:
    """Feature spaces read off an untrained glyph classifier."""

    def test_conv_dim_at_full_width(self, dejavu):
        ckpt = _glyph_checkpoint((ord("b"), ord("c")), width_scale=1.0)
        space = build_i2ces(ckpt.charset, ckpt, font=dejavu)
        assert space.kind == "i2ces"
        assert space.dim == 1152
        assert space.codepoints == (ord("b"), ord("c"))
        assert space.build_meta.layer_choice == "conv"

    def test_linear_dim_is_class_count(self, dejavu):
        ckpt = _glyph_checkpoint((ord("b"), ord("c"), ord("d")))
        space = build_i2ces(ckpt.charset, ckpt, layer_choice="linear", font=dejavu)
        assert space.dim == 3

    def test_single_angle_ave_matches_single(self, dejavu):
        ckpt = _glyph_checkpoint((ord("b"), ord("c")))
        spec = probe_spec(dejavu).model_copy(update={"rotation_deg": [0.0]})
        single = i2ces_vector(ord("b"), ckpt, dejavu, "conv", "single")
        ave = i2ces_vector(ord("b"), ckpt, dejavu, "conv", "ave", spec)
        np.testing.assert_allclose(ave, single, rtol=1e-6, atol=1e-6)

    def test_averaged_views_are_noise_free(self, dejavu):
        spec = probe_spec(dejavu)
        assert spec.noise_density == 0.0
        assert len(spec.rotation_deg) == 20
        assert spec.sizes_pt == [80]

    def test_codepoint_outside_charset(self, dejavu):
        ckpt = _glyph_checkpoint((ord("b"), ord("c")))
        with pytest.raises(UnknownCodepoint):
            build_i2ces([ord("b"), ord("z")], ckpt, font=dejavu)

    def test_unrenderable_are_skipped(self, dejavu):
        ckpt = _glyph_checkpoint((0x20, ord("b"), 0x4E00))
        space = build_i2ces(ckpt.charset, ckpt, font=dejavu)
        assert space.codepoints == (ord("b"),)
        assert space.build_meta.skipped == {
            "U+0020": "unrenderable",
            "U+4E00": "unrenderable",
        }

    def test_empty(self, dejavu):
        ckpt = _glyph_checkpoint((0x20, 0x4E00))
        with pytest.raises(EmptySpace):
            build_i2ces(ckpt.charset, ckpt, font=dejavu)
