"""Tests for the co-trained classifier trio, its loss, and checkpoints."""

import json
import math

import numpy as np
import pytest

from taxograft import (
    CheckpointError,
    ContextDims,
    CoTrainModel,
    ModelSpec,
    TrainConfig,
    TrainingError,
    aggregate,
    load_checkpoint,
    save_checkpoint,
    train,
)
from taxograft.autodiff import Tensor
from taxograft.checkpoint import MAGIC, read_header
from taxograft.model import EpochStats, format_trace

from gradcheck import relative_errors
from synth import micro_context


def fresh_model(ctx, spec):
    return CoTrainModel(spec, ctx.dep_store.vocab)


def batch_items(ctx, instances):
    return [(ctx.taxonomy.surface(i.query_id), i.path) for i in instances]


def param_bytes(model):
    return b"".join(p.data.tobytes() for p in model.parameters())


class TestAggregate:
    def test_equal_logits_give_uniform(self):
        logits = Tensor(np.array([[1.0, 1.0, 1.0], [5.0, 5.0, 5.0]]))
        out = aggregate([logits, logits, logits])
        np.testing.assert_allclose(out.data, np.full((2, 3), 1 / 3))

    def test_mean_of_views(self):
        a = Tensor(np.array([[3.0, 0.0]]))
        b = Tensor(np.array([[0.0, 0.0]]))
        c = Tensor(np.array([[0.0, 3.0]]))
        out = aggregate([a, b, c]).data
        # mean logits are (1, 1): uniform
        np.testing.assert_allclose(out, [[0.5, 0.5]])

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        views = [Tensor(rng.normal(size=(4, 5))) for _ in range(3)]
        out = aggregate(views).data
        np.testing.assert_allclose(out.sum(axis=1), np.ones(4))

    def test_requires_three_views(self):
        with pytest.raises(ValueError):
            aggregate([Tensor(np.zeros((1, 2)))] * 2)


class TestSpecAndConfig:
    def test_spec_round_trip(self):
        spec = ModelSpec(path_length=2, embed_dim=4, context=ContextDims(lemma=3))
        again = ModelSpec.from_dict(spec.to_dict())
        assert again == spec

    def test_classes_and_propagated_defaults(self):
        spec = ModelSpec(path_length=3, embed_dim=6, propagated_dim=0)
        assert spec.classes == 4
        assert spec.propagated == 6

    def test_train_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=-1)
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(dropout=1.0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(view_loss_weight=-0.1)


class TestForward:
    def test_view_widths_enforced(self, tmp_path):
        ctx, spec, _ = micro_context(tmp_path)
        model = fresh_model(ctx, spec)
        with pytest.raises(ValueError, match="width"):
            model.classifiers["distributed"].logits(Tensor(np.zeros((1, 3))))

    def test_wrong_path_length_rejected(self, tmp_path):
        ctx, spec, instances = micro_context(tmp_path)
        model = fresh_model(ctx, spec)
        from taxograft import MiniPath

        bad = [(ctx.taxonomy.surface(0), MiniPath((ctx.taxonomy.root,)))]
        with pytest.raises(ValueError, match="length"):
            model.feature_bundle(ctx, bad)

    def test_bundle_shapes(self, tmp_path):
        ctx, spec, instances = micro_context(tmp_path)
        model = fresh_model(ctx, spec)
        bundle = model.feature_bundle(ctx, batch_items(ctx, instances))
        assert bundle.batch_size == 3
        assert bundle.distributed.shape == (3, spec.embed_dim + 2 * spec.propagated)
        assert bundle.context.shape == (3, 2 * spec.context.hidden)
        assert bundle.lexsyn.shape == (3, 2 * 7)

    def test_eval_forward_deterministic(self, tmp_path):
        ctx, spec, instances = micro_context(tmp_path)
        model = fresh_model(ctx, spec)
        items = batch_items(ctx, instances)
        a = model.forward_views(model.feature_bundle(ctx, items))
        b = model.forward_views(model.feature_bundle(ctx, items))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.data, y.data)


class TestLoss:
    def views_and_labels(self, tmp_path):
        ctx, spec, instances = micro_context(tmp_path)
        model = fresh_model(ctx, spec)
        bundle = model.feature_bundle(ctx, batch_items(ctx, instances))
        views = model.forward_views(bundle)
        labels = np.array([i.label for i in instances])
        return model, views, labels

    def test_zero_weights_reduce_to_aggregate_nll(self, tmp_path):
        model, views, labels = self.views_and_labels(tmp_path)
        parts = model.loss(views, labels, 0.0, 0.0)
        assert parts.total_value == parts.agg_nll

    def test_weighted_sum_recomposes(self, tmp_path):
        model, views, labels = self.views_and_labels(tmp_path)
        parts = model.loss(views, labels, 0.1, 0.1)
        expected = parts.agg_nll + 0.1 * parts.view_nll + 0.1 * parts.consistency
        assert parts.total_value == pytest.approx(expected, rel=1e-12)

    def test_identical_views_have_zero_consistency(self, tmp_path):
        model, views, labels = self.views_and_labels(tmp_path)
        same = (views[0], views[0], views[0])
        parts = model.loss(same, labels, 0.1, 0.1)
        assert parts.consistency == 0.0
        # and the per-view sum is three times the aggregate
        assert parts.view_nll == pytest.approx(3 * parts.agg_nll, rel=1e-12)

    def test_uniform_logits_cost_log_classes(self, tmp_path):
        model, views, labels = self.views_and_labels(tmp_path)
        zeros = Tensor(np.zeros_like(views[0].data))
        parts = model.loss((zeros, zeros, zeros), labels, 0.0, 0.0)
        assert parts.agg_nll == pytest.approx(math.log(model.spec.classes))

    def test_batch_order_irrelevant(self, tmp_path):
        ctx, spec, instances = micro_context(tmp_path)
        model = fresh_model(ctx, spec)
        labels = np.array([i.label for i in instances])
        perm = [2, 0, 1]
        v1 = model.forward_views(model.feature_bundle(ctx, batch_items(ctx, instances)))
        shuffled = [instances[i] for i in perm]
        v2 = model.forward_views(model.feature_bundle(ctx, batch_items(ctx, shuffled)))
        p1 = model.loss(v1, labels, 0.1, 0.1)
        p2 = model.loss(v2, labels[perm], 0.1, 0.1)
        assert p1.total_value == pytest.approx(p2.total_value, rel=1e-12)

    def test_label_validation(self, tmp_path):
        model, views, labels = self.views_and_labels(tmp_path)
        with pytest.raises(ValueError):
            model.loss(views, np.array([0, 1, 2]), 0.1, 0.1)
        with pytest.raises(ValueError):
            model.loss(views, np.array([1, 2, 4]), 0.1, 0.1)
        with pytest.raises(ValueError):
            model.loss(views, np.array([1, 2]), 0.1, 0.1)

    def test_full_objective_gradients(self, tmp_path):
        """Finite differences across every trainable tensor at once."""
        ctx, spec, instances = micro_context(tmp_path)
        model = fresh_model(ctx, spec)
        labels = np.array([i.label for i in instances])
        items = batch_items(ctx, instances)

        def loss():
            views = model.forward_views(model.feature_bundle(ctx, items))
            return model.loss(views, labels, 0.1, 0.1).total

        errors = relative_errors(loss, model.parameters())
        for name, err in errors.items():
            assert err < 1e-4, (name, err)


class TestTraining:
    def config(self, **kwargs):
        base = dict(epochs=2, batch_size=2, dropout=0.0, seed=3)
        base.update(kwargs)
        return TrainConfig(**base)

    def test_trace_layout(self, tmp_path):
        ctx, spec, instances = micro_context(tmp_path)
        model = fresh_model(ctx, spec)
        result = train(model, ctx, instances, self.config())
        assert [row.epoch for row in result.trace] == [1, 2]
        assert all(np.isfinite(row.total) for row in result.trace)
        assert set(result.rng_states) == {"epoch_shuffle", "dropout"}

    def test_loss_decreases_on_micro_world(self, tmp_path):
        ctx, spec, instances = micro_context(tmp_path)
        model = fresh_model(ctx, spec)
        result = train(model, ctx, instances, self.config(epochs=30, learning_rate=0.01))
        assert result.trace[-1].total < result.trace[0].total

    def test_same_seed_identical_runs(self, tmp_path):
        ctx, spec, instances = micro_context(tmp_path)
        cfg = self.config(dropout=0.4)
        m1 = fresh_model(ctx, spec)
        r1 = train(m1, ctx, instances, cfg)
        m2 = fresh_model(ctx, spec)
        r2 = train(m2, ctx, instances, cfg)
        assert [(s.total, s.agg_nll) for s in r1.trace] == [
            (s.total, s.agg_nll) for s in r2.trace
        ]
        assert param_bytes(m1) == param_bytes(m2)

    def test_different_seed_differs(self, tmp_path):
        ctx, spec, instances = micro_context(tmp_path)
        m1 = fresh_model(ctx, spec)
        r1 = train(m1, ctx, instances, self.config(dropout=0.4, seed=3))
        m2 = fresh_model(ctx, spec)
        r2 = train(m2, ctx, instances, self.config(dropout=0.4, seed=4))
        assert [s.total for s in r1.trace] != [s.total for s in r2.trace]

    def test_zero_learning_rate_freezes_parameters(self, tmp_path):
        ctx, spec, instances = micro_context(tmp_path)
        model = fresh_model(ctx, spec)
        before = param_bytes(model)
        train(model, ctx, instances, self.config(learning_rate=0.0, weight_decay=0.0))
        assert param_bytes(model) == before

    def test_non_finite_parameter_aborts(self, tmp_path):
        ctx, spec, instances = micro_context(tmp_path)
        model = fresh_model(ctx, spec)
        model.gat.projection.data[0, 0] = np.nan
        with pytest.raises(TrainingError):
            train(model, ctx, instances, self.config())

    def test_requires_instances(self, tmp_path):
        ctx, spec, _ = micro_context(tmp_path)
        with pytest.raises(ValueError):
            train(fresh_model(ctx, spec), ctx, [], self.config())

    def test_trace_formatting(self):
        trace = [EpochStats(1, 1.5, 1.0, 0.4, 0.1), EpochStats(2, 1.25, 0.9, 0.3, 0.05)]
        text = format_trace(trace)
        lines = text.splitlines()
        assert lines[0] == "epoch\ttotal\tagg_nll\tview_nll\tconsistency"
        assert lines[1].startswith("1\t1.5\t")
        assert len(lines) == 3
        assert float(lines[2].split("\t")[1]) == 1.25


class TestPathScorer:
    def test_probability_vector(self, tmp_path):
        ctx, spec, instances = micro_context(tmp_path)
        model = fresh_model(ctx, spec)
        score = model.path_scorer(ctx)
        probs = score("c", instances[0].path)
        assert probs.shape == (spec.classes,)
        assert probs.sum() == pytest.approx(1.0)
        assert (probs > 0).all()

    def test_repeat_calls_identical(self, tmp_path):
        ctx, spec, instances = micro_context(tmp_path)
        model = fresh_model(ctx, spec)
        score = model.path_scorer(ctx)
        a = score("c", instances[0].path)
        b = score("c", instances[0].path)
        np.testing.assert_array_equal(a, b)
        fresh = model.path_scorer(ctx)
        np.testing.assert_array_equal(a, fresh("c", instances[0].path))


class TestCheckpoint:
    def trained(self, tmp_path):
        ctx, spec, instances = micro_context(tmp_path)
        model = fresh_model(ctx, spec)
        train(model, ctx, instances, TrainConfig(epochs=1, batch_size=2, dropout=0.0, seed=5))
        return ctx, model

    def test_round_trip_bit_exact(self, tmp_path):
        ctx, model = self.trained(tmp_path)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, model, extra={"note": "x"})
        loaded, extra = load_checkpoint(path)
        assert extra == {"note": "x"}
        assert loaded.spec == model.spec
        assert loaded.vocab.to_dict() == model.vocab.to_dict()
        for p, q in zip(model.parameters(), loaded.parameters()):
            assert p.name == q.name
            assert p.decay == q.decay
            np.testing.assert_array_equal(p.data, q.data)

    def test_repeat_saves_byte_identical(self, tmp_path):
        ctx, model = self.trained(tmp_path)
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(a, model, extra={"k": 1})
        save_checkpoint(b, model, extra={"k": 1})
        assert a.read_bytes() == b.read_bytes()

    def test_loaded_model_scores_identically(self, tmp_path):
        ctx, model = self.trained(tmp_path)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, model)
        loaded, _ = load_checkpoint(path)
        from taxograft import MiniPath

        p = MiniPath((ctx.taxonomy.root, ctx.taxonomy.id_of("a")))
        np.testing.assert_array_equal(
            model.path_scorer(ctx)("d", p), loaded.path_scorer(ctx)("d", p)
        )

    def test_header_readable_without_body(self, tmp_path):
        ctx, model = self.trained(tmp_path)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, model)
        header = read_header(path)
        assert header["spec"]["path_length"] == 2
        assert {t["name"] for t in header["tensors"]} == {
            p.name for p in model.parameters()
        }

    def test_rejects_wrong_magic(self, tmp_path):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"NOTACKPT\n" + b"\x00" * 32)
        with pytest.raises(CheckpointError, match="not a model checkpoint"):
            load_checkpoint(bad)

    def test_rejects_truncated_body(self, tmp_path):
        ctx, model = self.trained(tmp_path)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, model)
        data = path.read_bytes()
        path.write_bytes(data[:-16])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(path)

    def test_rejects_corrupt_header(self, tmp_path):
        bad = tmp_path / "bad.ckpt"
        blob = b"{not json"
        bad.write_bytes(MAGIC + len(blob).to_bytes(8, "little") + blob)
        with pytest.raises(CheckpointError, match="corrupt header"):
            load_checkpoint(bad)

    def rewrite_header(self, path, mutate):
        raw = path.read_bytes()
        length = int.from_bytes(raw[len(MAGIC) : len(MAGIC) + 8], "little")
        start = len(MAGIC) + 8
        header = json.loads(raw[start : start + length])
        mutate(header)
        blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        path.write_bytes(MAGIC + len(blob).to_bytes(8, "little") + blob + raw[start + length :])

    def test_rejects_unknown_tensor_name(self, tmp_path):
        ctx, model = self.trained(tmp_path)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, model)
        self.rewrite_header(path, lambda h: h["tensors"][0].update(name="mystery"))
        with pytest.raises(CheckpointError, match="names do not match"):
            load_checkpoint(path)

    def test_rejects_shape_mismatch(self, tmp_path):
        ctx, model = self.trained(tmp_path)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, model)
        self.rewrite_header(path, lambda h: h["tensors"][0].update(shape=[1, 1]))
        with pytest.raises(CheckpointError, match="shape"):
            load_checkpoint(path)

    def test_rejects_future_format(self, tmp_path):
        ctx, model = self.trained(tmp_path)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, model)
        self.rewrite_header(path, lambda h: h.update(format=99))
        with pytest.raises(CheckpointError, match="unsupported format"):
            load_checkpoint(path)
