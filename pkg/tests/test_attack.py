"""Tests for replacement sets, the perturbation attack and the fair split."""

import json
import math

import numpy as np
import pytest

from glyphshield.attack import (
    SHIPPED_HSET,
    AttackSpec,
    HSet,
    SplitResult,
    curate_hset,
    hset_from_dict,
    intersection_split,
    load_hset,
    perturb_dataset,
    save_hset,
    vp_perturb,
)
from glyphshield.codepoints import letters
from glyphshield.errors import LeakageError, MalformedHSetFile
from glyphshield.spaces.models import NeighborSet

B = ord("b")
C = ord("c")


def ones(cp, neighbors):
    return NeighborSet(cp, tuple(neighbors), tuple(1.0 for _ in neighbors))


@pytest.fixture
def cyrillic_a():
    return AttackSpec(p=1.0, neighbors={ord("a"): (0x430,)}, seed=0)


class TestHSet:
    def test_shipped_set_covers_letters(self):
        hset = load_hset()
        assert hset.codepoints == sorted(letters())
        assert hset.provenance["curation"] == "file"
        assert all(len(hset[cp]) >= 1 for cp in hset.codepoints)

    def test_invariants(self):
        with pytest.raises(ValueError, match="empty"):
            HSet(replacements={B: ()})
        with pytest.raises(ValueError, match="itself"):
            HSet(replacements={B: (B,)})
        with pytest.raises(ValueError, match="repeats"):
            HSet(replacements={B: (0x180, 0x180)})
        with pytest.raises(ValueError):
            HSet(replacements={B: (0xD800,)})

    def test_pair_count(self):
        hset = HSet(replacements={B: (0x180, 0x183), C: (0x441,)})
        assert hset.pair_count == 3
        assert len(hset) == 2
        assert C in hset

    def test_save_and_load(self, tmp_path):
        hset = HSet(
            replacements={B: (0x183, 0x180)},
            provenance={
                "space_kind": "i2ces",
                "curation": "threshold",
                "threshold": 0.8,
            },
        )
        path = save_hset(hset, tmp_path / "sets" / "b.json")
        data = json.loads(path.read_text(encoding="utf-8"))
        assert data["U+0062"] == ["U+0183", "U+0180"]
        loaded = load_hset(path)
        assert loaded.replacements == {B: (0x183, 0x180)}
        assert loaded.provenance["threshold"] == 0.8

    def test_schema_violations(self):
        with pytest.raises(MalformedHSetFile, match="provenance"):
            hset_from_dict({"U+0062": ["U+0180"]})
        base = {"provenance": {"space_kind": "x", "curation": "file"}}
        with pytest.raises(MalformedHSetFile):
            hset_from_dict({**base, "U+0062": []})
        with pytest.raises(MalformedHSetFile):
            hset_from_dict({**base, "b": ["U+0180"]})
        with pytest.raises(MalformedHSetFile):
            hset_from_dict({**base, "U+0062": ["U+0062"]})

    def test_unreadable_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(MalformedHSetFile):
            load_hset(path)
        with pytest.raises(MalformedHSetFile):
            load_hset(tmp_path / "absent.json")


class TestCurate:
    def test_threshold_mode(self):
        neighbors = {
            B: NeighborSet(B, (0x180, 0x183, 0x253), (0.9, 0.8, 0.5)),
            C: NeighborSet(C, (0x441,), (0.6,)),
        }
        hset = curate_hset(neighbors, threshold=0.75, space_kind="i2ces")
        assert hset.replacements == {B: (0x180, 0x183)}
        assert hset.provenance == {
            "space_kind": "i2ces",
            "curation": "threshold",
            "threshold": 0.75,
        }

    def test_threshold_is_inclusive(self):
        hset = curate_hset({B: NeighborSet(B, (0x180,), (0.75,))}, threshold=0.75)
        assert hset[B] == (0x180,)

    def test_file_mode(self):
        assert len(curate_hset(mode="file", path=SHIPPED_HSET)) == 52

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            curate_hset({}, threshold=0.0)
        with pytest.raises(ValueError):
            curate_hset(None)
        with pytest.raises(ValueError):
            curate_hset({}, mode="vote")


class TestPerturb:
    def test_zero_probability_is_identity(self):
        spec = AttackSpec(p=0.0, neighbors={ord("a"): (0x430,)})
        assert vp_perturb("banana", spec) == "banana"

    def test_full_probability_replaces_every_candidate(self, cyrillic_a):
        assert vp_perturb("banana", cyrillic_a) == "b\u0430n\u0430n\u0430"

    def test_length_is_preserved(self):
        spec = AttackSpec(p=0.5, neighbors={ord("a"): (0x1F170,)}, seed=4)
        text = "a cat ate a pancake"
        assert len(vp_perturb(text, spec)) == len(text)

    def test_only_listed_characters_change(self):
        spec = AttackSpec(p=1.0, neighbors={B: (0x180, 0x183)}, seed=2)
        out = vp_perturb("abcb", spec)
        assert out[0] == "a" and out[2] == "c"
        assert {out[1], out[3]} <= {"\u0180", "\u0183"}

    def test_replacement_rate(self):
        spec = AttackSpec(p=0.3, neighbors={ord("a"): (0x430,)}, seed=11)
        out = vp_perturb("a" * 10000, spec)
        assert 2800 <= out.count("\u0430") <= 3200

    def test_choices_are_uniform(self):
        spec = AttackSpec(p=1.0, neighbors={ord("a"): (0x430, 0x251)}, seed=5)
        out = vp_perturb("a" * 4000, spec)
        assert 1800 <= out.count("\u0251") <= 2200

    def test_draws_are_shared_across_probabilities(self):
        table = {ord("a"): (0x430, 0x251, 0x3B1)}
        text = "a" * 200
        low = vp_perturb(text, AttackSpec(p=0.2, neighbors=table, seed=9))
        high = vp_perturb(text, AttackSpec(p=0.6, neighbors=table, seed=9))
        changed = [i for i, ch in enumerate(low) if ch != "a"]
        assert changed
        assert all(high[i] == low[i] for i in changed)

    def test_seed_changes_result(self):
        table = {ord("a"): (0x430,)}
        a = vp_perturb("a" * 64, AttackSpec(p=0.5, neighbors=table, seed=1))
        b = vp_perturb("a" * 64, AttackSpec(p=0.5, neighbors=table, seed=2))
        assert a != b

    def test_probability_range(self):
        with pytest.raises(ValueError):
            AttackSpec(p=1.5, neighbors={})

    @pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
    def test_rate_within_binomial_bounds(self, p):
        table = {ord("a"): (0x430,)}
        n, seeds = 10000, 100
        replaced = 0
        for seed in range(seeds):
            out = vp_perturb("a" * n, AttackSpec(p=p, neighbors=table, seed=seed))
            replaced += out.count("\u0430")
        total = n * seeds
        sigma = math.sqrt(total * p * (1 - p))
        assert abs(replaced - total * p) <= 3 * sigma

    def test_zero_probability_on_random_unicode(self):
        rng = np.random.default_rng(0)
        scalars = np.concatenate([np.arange(0x20, 0xD800), np.arange(0xE000, 0x30000)])
        table = {int(cp): (0x41,) for cp in scalars[::97]}
        spec = AttackSpec(p=0.0, neighbors=table, seed=1)
        for key in range(1000):
            text = "".join(chr(int(cp)) for cp in rng.choice(scalars, size=20))
            assert vp_perturb(text, spec, key) == text

    def test_from_neighbor_sets(self):
        spec = AttackSpec.from_source(
            1.0, {B: ones(B, [0x180]), C: NeighborSet(C)}, seed=0
        )
        assert spec.neighbors == {B: (0x180,)}
        assert vp_perturb("bc", spec) == "\u0180c"

    def test_perturb_dataset_is_keyed_by_index(self, tiny_dataset):
        spec = AttackSpec(p=0.5, neighbors={ord("a"): (0x430,), ord("e"): (0x435,)})
        whole = perturb_dataset(tiny_dataset, spec)
        tail = perturb_dataset(tiny_dataset.subset(range(6, 12)), spec, key_offset=6)
        assert whole.texts[6:] == tail.texts
        assert whole.labels.tolist() == tiny_dataset.labels.tolist()


class TestIntersectionSplit:
    @pytest.fixture
    def sources(self):
        hset = HSet(
            replacements={
                B: (1, 2, 3, 4, 5),
                C: (7, 8, 9),
                ord("d"): (10, 11),
            }
        )
        dces = {
            B: ones(B, [2, 3, 4, 5, 20]),
            C: ones(C, [7, 8, 9]),
            ord("d"): ones(ord("d"), [11, 12]),
            ord("e"): ones(ord("e"), [30, 31]),
        }
        return hset, dces

    def test_halves(self, sources):
        result = intersection_split(*sources, seed=0)
        train, ev = result.halves[B]
        assert len(ev) == 2 and len(train) == 2
        assert set(train) | set(ev) == {2, 3, 4, 5}
        train, ev = result.halves[C]
        assert (len(train), len(ev)) == (2, 1)
        result.verify_disjoint()

    def test_small_intersections_are_excluded(self, sources):
        result = intersection_split(*sources, seed=0)
        assert result.excluded == {ord("d"): 1, ord("e"): 0}

    def test_split_is_seeded(self, sources):
        assert intersection_split(*sources, seed=3) == intersection_split(
            *sources, seed=3
        )

    def test_hsets_from_halves(self, sources):
        result = intersection_split(*sources, seed=1)
        train, ev = result.train_hset(), result.eval_hset()
        assert train.codepoints == ev.codepoints == [B, C]
        assert not set(train[B]) & set(ev[B])

    def test_leakage_detected(self):
        result = SplitResult(halves={B: ((1, 2), (2,))}, seed=0)
        with pytest.raises(LeakageError):
            result.verify_disjoint()

    def test_to_dict(self, sources):
        data = intersection_split(*sources, seed=0).to_dict()
        assert data["seed"] == 0
        assert set(data["halves"]) == {"U+0062", "U+0063"}
        assert data["excluded"] == {"U+0064": 1, "U+0065": 0}
