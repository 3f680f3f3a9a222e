"""Tests for degradation curves, adversarial training and full experiment runs."""

import json

import numpy as np
import pytest

from glyphshield.attack import HSet, load_hset
from glyphshield.classifier import GlyphClassifierCheckpoint, glyph_cnn_network
from glyphshield.config import ExperimentConfig
from glyphshield.errors import InsufficientSamples
from glyphshield.experiments import (
    METRICS_COLUMNS,
    MetricsRow,
    MetricsTable,
    adversarial_train,
    build_attack_plan,
    compare_extraction,
    degradation_curve,
    load_dataset,
    resolve_charset,
    run_experiment,
)
from glyphshield.nn.checkpoint import parameters_equal
from glyphshield.runtime import set_runtime
from glyphshield.text import (
    TextModelCheckpoint,
    TextTrainConfig,
    evaluate,
    train_text_classifier,
)

QUICK = TextTrainConfig(max_len=45, epochs=2, batch_size=4, lr=0.05, val_fraction=0.0)
FRUIT_ATTACK = HSet(
    replacements={
        ord("a"): (0x430, 0x251),
        ord("e"): (0x435,),
        ord("o"): (0x43E, 0x3BF),
        ord("s"): (0x455,),
    }
)


@pytest.fixture
def clean_ckpt(tiny_dataset):
    return train_text_classifier(tiny_dataset, "charcnn", QUICK)


def row(model_kind, p, seed, accuracy):
    return MetricsRow(
        experiment_id="exp",
        model_kind=model_kind,
        attack_space="hset",
        p=p,
        seed=seed,
        accuracy=accuracy,
        n_samples=10,
    )


def experiment_config(tmp_path, toy_dataset_dir, **extra):
    data = {
        "experiment_id": "toy",
        "output_dir": str(tmp_path / "runs"),
        "dataset": {"path": str(toy_dataset_dir), "train_n": None, "test_n": None},
        "models": [{"kind": "charcnn"}, {"kind": "charcnn", "adversarial": True}],
        "attack": {"p_train": 0.5, "adv_epochs": 1},
        "p_grid": [0.0, 0.5, 1.0],
        "seeds": [0, 1],
        "train": QUICK.model_dump(),
    }
    data.update(extra)
    return ExperimentConfig.model_validate(data)


class TestDatasets:
    def test_load_dataset(self, toy_dataset_dir):
        train, test = load_dataset(toy_dataset_dir)
        assert (len(train), len(test)) == (12, 4)
        assert test.num_classes == train.num_classes == 2

    def test_subsampling(self, toy_dataset_dir):
        train, test = load_dataset(toy_dataset_dir, train_n=4, test_n=2, seed=1)
        assert train.class_counts() == {0: 2, 1: 2}
        assert test.class_counts() == {0: 1, 1: 1}

    def test_oversized_subsample(self, toy_dataset_dir):
        with pytest.raises(InsufficientSamples):
            load_dataset(toy_dataset_dir, train_n=100)

    def test_resolve_charset(self, tmp_path):
        assert len(resolve_charset("letters")) == 52
        assert ord("0") in resolve_charset("desk")
        path = tmp_path / "chars.txt"
        path.write_text("# comment\nU+0062\nxy\n", encoding="utf-8")
        assert resolve_charset(str(path)) == [ord("b"), ord("x"), ord("y")]


class TestMetricsTable:
    def test_plot_data_uses_population_std(self):
        table = MetricsTable(
            rows=[
                row("vb", 0.0, 0, 0.9),
                row("vb", 0.0, 1, 0.9),
                row("vb", 0.5, 0, 0.6),
                row("vb", 0.5, 1, 0.4),
            ]
        )
        plot = table.plot_data("exp.vb.hset")
        assert plot["x"] == [0.0, 0.5]
        assert plot["mean"] == pytest.approx([0.9, 0.5])
        assert plot["std"] == pytest.approx([0.0, 0.1])

    def test_curve_ids_keep_first_seen_order(self):
        table = MetricsTable(rows=[row("vb", 0.0, 0, 1.0), row("at+vb", 0.0, 0, 1.0)])
        assert table.curve_ids() == ["exp.vb.hset", "exp.at+vb.hset"]

    def test_unknown_curve(self):
        with pytest.raises(KeyError):
            MetricsTable().plot_data("exp.nope.hset")

    def test_csv(self, tmp_path):
        table = MetricsTable(rows=[row("vb", 0.1, 2, 0.75)])
        path = table.write_csv(tmp_path / "out" / "metrics.csv")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == ",".join(METRICS_COLUMNS)
        assert lines[1] == "exp,vb,hset,0.1,2,0.75,10"
        assert MetricsTable.read_csv(path).rows == table.rows


class TestDegradationCurve:
    def test_rows_cover_grid(self, clean_ckpt, tiny_dataset):
        table = degradation_curve(
            clean_ckpt,
            tiny_dataset,
            FRUIT_ATTACK,
            [0.0, 0.5, 1.0],
            [0, 1, 2],
            experiment_id="exp",
            attack_space="hset",
        )
        assert [(r.p, r.seed) for r in table.rows] == [
            (p, s) for p in (0.0, 0.5, 1.0) for s in (0, 1, 2)
        ]
        assert {r.model_kind for r in table.rows} == {"charcnn"}
        assert table.metadata["pairs"] == 6

    def test_zero_probability_is_clean_accuracy(self, clean_ckpt, tiny_dataset):
        table = degradation_curve(clean_ckpt, tiny_dataset, FRUIT_ATTACK, [0.0], [0, 1])
        clean = evaluate(clean_ckpt, tiny_dataset).accuracy
        assert [r.accuracy for r in table.rows] == [clean, clean]

    def test_threads_match_serial(self, clean_ckpt, tiny_dataset):
        args = (clean_ckpt, tiny_dataset, FRUIT_ATTACK, [0.0, 0.6, 1.0], [0, 1])
        threaded = degradation_curve(*args, workers=3)
        set_runtime(serial=True)
        serial = degradation_curve(*args, workers=3)
        assert threaded.rows == serial.rows

    def test_rejects_bad_grid(self, clean_ckpt, tiny_dataset):
        for grid in ([], [0.5, 0.1], [0.0, 1.5]):
            with pytest.raises(ValueError):
                degradation_curve(clean_ckpt, tiny_dataset, FRUIT_ATTACK, grid, [0])


class TestAdversarialTraining:
    def test_zero_probability_equals_extended_training(
        self, clean_ckpt, tiny_dataset, tmp_path
    ):
        path = clean_ckpt.save(tmp_path / "clean.ckpt")
        adversarial = adversarial_train(
            TextModelCheckpoint.load(path), tiny_dataset, FRUIT_ATTACK, 0.0, QUICK
        )
        extended = train_text_classifier(
            tiny_dataset,
            config=QUICK,
            model=TextModelCheckpoint.load(path).model,
            epoch_offset=len(clean_ckpt.history),
        )
        assert parameters_equal(adversarial.model.network, extended.model.network)

    def test_history_is_tagged_by_phase(self, clean_ckpt, tiny_dataset):
        ckpt = adversarial_train(
            clean_ckpt, tiny_dataset, FRUIT_ATTACK, 0.5, QUICK, adv_epochs=1
        )
        assert [h["phase"] for h in ckpt.history] == ["clean", "clean", "adversarial"]
        assert [h["epoch"] for h in ckpt.history] == [1, 2, 3]
        assert ckpt.config["adversarial"] == {"p_train": 0.5, "pairs": 6}

    def test_trains_from_scratch_without_base(self, tiny_dataset):
        ckpt = adversarial_train(
            None, tiny_dataset, FRUIT_ATTACK, 0.5, QUICK, kind="charcnn"
        )
        assert len(ckpt.history) == 4
        assert ckpt.kind == "charcnn"

    def test_probability_range(self, clean_ckpt, tiny_dataset):
        with pytest.raises(ValueError):
            adversarial_train(clean_ckpt, tiny_dataset, FRUIT_ATTACK, 1.2, QUICK)


class TestRunExperiment:
    def test_artifacts(self, tmp_path, toy_dataset_dir):
        out = run_experiment(experiment_config(tmp_path, toy_dataset_dir))
        assert out == tmp_path / "runs" / "toy"
        for name in ("config.yaml", "metrics.csv", "summary.json", "hset_eval.json"):
            assert (out / name).is_file()
        assert (out / "checkpoints" / "charcnn.ckpt").is_file()
        assert (out / "checkpoints" / "at_charcnn.ckpt").is_file()
        assert not (out / "split.json").exists()

        metrics = MetricsTable.read_csv(out / "metrics.csv")
        assert len(metrics.rows) == 2 * 3 * 2
        assert metrics.curve_ids() == ["toy.charcnn.hset", "toy.at+charcnn.hset"]
        plot_path = out / "plots" / "toy.at+charcnn.hset.json"
        plot = json.loads(plot_path.read_text())
        assert plot["x"] == [0.0, 0.5, 1.0]

        summary = json.loads((out / "summary.json").read_text())
        assert summary["rows"] == 12
        assert summary["test_samples"] == 4
        assert summary["attack"]["eval_pairs"] == load_hset().pair_count
        clean_rows = [
            r for r in metrics.rows if r.p == 0.0 and r.model_kind == "charcnn"
        ]
        clean = summary["clean_accuracy"]["charcnn"]
        assert all(r.accuracy == clean for r in clean_rows)

    def test_reruns_are_byte_identical(self, tmp_path, toy_dataset_dir):
        first = run_experiment(experiment_config(tmp_path / "a", toy_dataset_dir))
        second = run_experiment(experiment_config(tmp_path / "b", toy_dataset_dir))
        first_bytes = (first / "metrics.csv").read_bytes()
        assert first_bytes == (second / "metrics.csv").read_bytes()

    def test_dces_attack(self, tmp_path, toy_dataset_dir, names_file):
        config = experiment_config(
            tmp_path,
            toy_dataset_dir,
            models=[{"kind": "charcnn"}],
            attack={"space": "dces", "names_file": str(names_file)},
            p_grid=[0.0, 1.0],
            seeds=[0],
        )
        out = run_experiment(config)
        hset = json.loads((out / "hset_eval.json").read_text())
        assert hset["U+0062"] == ["U+0180", "U+0183", "U+0253", "U+1E03"]
        assert hset["provenance"]["space_kind"] == "dces"
        assert len(MetricsTable.read_csv(out / "metrics.csv").rows) == 2

    def test_intersection_protocol(self, tmp_path, toy_dataset_dir, names_file):
        config = experiment_config(
            tmp_path,
            toy_dataset_dir,
            attack={
                "space": "hset",
                "names_file": str(names_file),
                "protocol": "intersection",
            },
        )
        plan = build_attack_plan(config)
        train, ev = plan.train_hset[ord("b")], plan.eval_hset[ord("b")]
        assert len(train) == 2 and len(ev) == 1
        assert set(train) | set(ev) == {0x180, 0x253, 0x1E03}
        assert plan.split.excluded[ord("B")] == 0

        out = run_experiment(config)
        summary = json.loads((out / "summary.json").read_text())
        assert summary["split"]["characters"] == 1
        assert summary["attack"] == {
            "space": "hset",
            "protocol": "intersection",
            "train_pairs": 2,
            "eval_pairs": 1,
        }
        assert (out / "split.json").is_file()
        evaluated = json.loads((out / "hset_eval.json").read_text())
        assert evaluated["provenance"]["space_kind"] == "hset+dces"
        assert evaluated["provenance"]["notes"] == "eval half"


class TestCompareExtraction:
    def test_report(self, dejavu):
        charset = (ord("b"), ord("c"), ord("d"))
        ckpt = GlyphClassifierCheckpoint(
            network=glyph_cnn_network(3, width_scale=0.1, seed=2),
            charset=charset,
            val_accuracy=0.0,
        )
        report = compare_extraction(ckpt, [ord("b")], k=2, font=dejavu)
        assert report["checkpoint_id"] == ckpt.checkpoint_id
        assert [o["option"] for o in report["options"]] == [
            "conv+single",
            "conv+ave",
            "linear+single",
            "linear+ave",
        ]
        linear = report["options"][2]
        assert linear["dim"] == 3
        neighbors = linear["neighbors"]["U+0062"]
        assert {n["codepoint"] for n in neighbors} == {"U+0063", "U+0064"}
        sims = [n["similarity"] for n in neighbors]
        assert sims == sorted(sims, reverse=True)
        assert np.isfinite(sims).all()
