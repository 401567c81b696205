"""Tests for dependency-path storage, encoding and attention pooling."""

import numpy as np
import pytest

from taxograft import DepPathError, DepPathStore, DepVocab, attend_pool, context_bundle, encode_path
from taxograft.autodiff import Tensor
from taxograft.context import ContextDims, ContextEncoderParams, DepEdge, pair_block
from taxograft.seeding import derive_rng

from gradcheck import relative_errors


def write_store(tmp_path, text, max_len=10):
    p = tmp_path / "paths.tsv"
    p.write_text(text, encoding="utf-8")
    return DepPathStore.load(p, max_len=max_len)


def small_params(vocab, hidden=4, path_length=2, seed=3):
    dims = ContextDims(lemma=3, pos=2, dep=2, direction=1, hidden=hidden, attention=3)
    return ContextEncoderParams(vocab, dims, path_length, derive_rng(seed, "ctx-test"))


class TestStoreParsing:
    def test_basic_load(self, tmp_path):
        store = write_store(
            tmp_path,
            "storm\tweather\tbe|verb|attr|>;kind|noun|pobj|<\n"
            "storm\tweather\tsuch_as|adp|prep|<\n"
            "rain\tweather\tbring|verb|dobj|>\n",
        )
        assert len(store) == 2
        assert len(store.sequences("storm", "weather")) == 2
        assert len(store.sequences("rain", "weather")) == 1
        assert store.sequences("storm", "weather")[0][0].direction == 1

    def test_keys_are_case_folded(self, tmp_path):
        store = write_store(tmp_path, "Storm\tWEATHER\tbe|verb|attr|>\n")
        assert store.sequences("storm", "weather")
        assert store.sequences(" Storm ", "weather")

    def test_missing_pair_is_empty(self, tmp_path):
        store = write_store(tmp_path, "a\tb\tx|n|d|<\n")
        assert store.sequences("a", "c") == []

    def test_comments_and_blanks_skipped(self, tmp_path):
        store = write_store(tmp_path, "# header\n\na\tb\tx|n|d|<\n")
        assert len(store) == 1

    def test_wrong_column_count(self, tmp_path):
        with pytest.raises(DepPathError, match="line 1"):
            write_store(tmp_path, "a\tb\n")

    def test_bad_edge_token(self, tmp_path):
        with pytest.raises(DepPathError, match="lemma"):
            write_store(tmp_path, "a\tb\tonly|three|fields\n")

    def test_bad_direction(self, tmp_path):
        with pytest.raises(DepPathError, match="direction"):
            write_store(tmp_path, "a\tb\tx|n|d|^\n")

    def test_empty_lemma(self, tmp_path):
        with pytest.raises(DepPathError, match="empty lemma"):
            write_store(tmp_path, "a\tb\t|n|d|<\n")

    def test_empty_sequence(self, tmp_path):
        with pytest.raises(DepPathError, match="line 2"):
            write_store(tmp_path, "a\tb\tx|n|d|<\na\tc\t;\n")

    def test_truncation(self, tmp_path, caplog):
        edges = ";".join(f"w{i}|n|d|<" for i in range(12))
        with caplog.at_level("WARNING"):
            store = write_store(tmp_path, f"a\tb\t{edges}\n", max_len=10)
        assert len(store.sequences("a", "b")[0]) == 10
        assert any("truncated" in r.message for r in caplog.records)
        # symbols dropped by truncation never enter the vocabulary
        assert "w11" not in store.vocab.lemmas
        assert "w9" in store.vocab.lemmas

    def test_rejects_bad_max_len(self, tmp_path):
        (tmp_path / "p.tsv").write_text("a\tb\tx|n|d|<\n", encoding="utf-8")
        with pytest.raises(ValueError):
            DepPathStore.load(tmp_path / "p.tsv", max_len=0)

    def test_empty_store(self):
        store = DepPathStore.empty()
        assert len(store) == 0
        assert store.vocab.sizes() == (1, 1, 1)


class TestVocab:
    def test_sorted_with_reserved_slot(self):
        vocab = DepVocab.from_symbols({"zebra", "apple"}, {"noun"}, {"dobj", "amod"})
        assert vocab.lemmas == ["<unk>", "apple", "zebra"]
        assert vocab.dep_labels == ["<unk>", "amod", "dobj"]

    def test_oov_maps_to_zero(self):
        vocab = DepVocab.from_symbols({"known"}, {"noun"}, {"dobj"})
        edge = vocab.encode("never_seen", "also_new", "nope", "<")
        assert (edge.lemma, edge.pos_tag, edge.dep_label) == (0, 0, 0)
        assert vocab.encode("known", "noun", "dobj", ">") == DepEdge(1, 1, 1, 1)

    def test_encode_rejects_bad_direction(self):
        vocab = DepVocab.from_symbols(set(), set(), set())
        with pytest.raises(ValueError):
            vocab.encode("a", "b", "c", "x")

    def test_round_trip(self):
        vocab = DepVocab.from_symbols({"a", "b"}, {"n"}, {"d"})
        again = DepVocab.from_dict(vocab.to_dict())
        assert again.lemmas == vocab.lemmas
        assert again.pos_tags == vocab.pos_tags
        assert again.dep_labels == vocab.dep_labels

    def test_requires_reserved_first_slot(self):
        with pytest.raises(ValueError):
            DepVocab(["a"], ["<unk>"], ["<unk>"])


class TestEncodePath:
    def test_zero_parameters_give_zero_state(self):
        vocab = DepVocab.from_symbols({"x"}, {"n"}, {"d"})
        params = small_params(vocab)
        for p in params.parameters():
            p.data[...] = 0.0
        out = encode_path(params, [vocab.encode("x", "n", "d", "<")])
        np.testing.assert_allclose(out.data, np.zeros((1, 4)))

    def test_output_shape(self):
        vocab = DepVocab.from_symbols({"x", "y"}, {"n"}, {"d"})
        params = small_params(vocab, hidden=5)
        edges = [vocab.encode("x", "n", "d", "<"), vocab.encode("y", "n", "d", ">")]
        assert encode_path(params, edges).data.shape == (1, 5)

    def test_empty_path_rejected(self):
        vocab = DepVocab.from_symbols(set(), set(), set())
        with pytest.raises(ValueError):
            encode_path(small_params(vocab), [])

    def test_order_sensitive(self):
        vocab = DepVocab.from_symbols({"x", "y"}, {"n"}, {"d"})
        params = small_params(vocab)
        e1 = vocab.encode("x", "n", "d", "<")
        e2 = vocab.encode("y", "n", "d", ">")
        a = encode_path(params, [e1, e2]).data
        b = encode_path(params, [e2, e1]).data
        assert not np.allclose(a, b)


class TestAttendPool:
    def make(self, hidden=4):
        vocab = DepVocab.from_symbols({"x"}, {"n"}, {"d"})
        return small_params(vocab, hidden=hidden)

    def test_identical_encodings_pool_to_themselves(self):
        params = self.make()
        enc = Tensor(np.array([[0.3, -0.7, 0.1, 0.9]]))
        pooled = attend_pool(params, [enc, enc])
        np.testing.assert_allclose(pooled.data, enc.data, atol=1e-12)

    def test_single_encoding_identity(self):
        params = self.make()
        enc = Tensor(np.array([[1.0, 2.0, 3.0, 4.0]]))
        np.testing.assert_allclose(attend_pool(params, [enc]).data, enc.data)

    def test_pooled_inside_coordinate_hull(self):
        params = self.make()
        rng = np.random.default_rng(0)
        encs = [Tensor(rng.normal(size=(1, 4))) for _ in range(5)]
        pooled = attend_pool(params, encs).data
        stacked = np.vstack([e.data for e in encs])
        assert (pooled >= stacked.min(axis=0) - 1e-12).all()
        assert (pooled <= stacked.max(axis=0) + 1e-12).all()

    def test_permutation_invariant(self):
        params = self.make()
        rng = np.random.default_rng(1)
        encs = [Tensor(rng.normal(size=(1, 4))) for _ in range(4)]
        a = attend_pool(params, encs).data
        b = attend_pool(params, [encs[2], encs[0], encs[3], encs[1]]).data
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            attend_pool(self.make(), [])


class TestPairBlock:
    def setup_store(self, tmp_path):
        return write_store(tmp_path, "q\ta\tx|n|d|<\nq\ta\ty|n|d|>\n")

    def test_no_path_uses_slot_row(self, tmp_path):
        store = self.setup_store(tmp_path)
        params = small_params(store.vocab, path_length=2)
        blk0 = pair_block(params, store, "q", "missing", 0)
        blk1 = pair_block(params, store, "q", "missing", 1)
        np.testing.assert_allclose(blk0.data, params.no_path.data[0:1])
        np.testing.assert_allclose(blk1.data, params.no_path.data[1:2])
        assert not np.allclose(blk0.data, blk1.data)

    def test_real_pair_pools_paths(self, tmp_path):
        store = self.setup_store(tmp_path)
        params = small_params(store.vocab, path_length=2)
        blk = pair_block(params, store, "q", "a", 0)
        assert blk.data.shape == (1, 4)
        assert not np.allclose(blk.data, params.no_path.data[0:1])

    def test_cache_only_holds_real_pairs(self, tmp_path):
        store = self.setup_store(tmp_path)
        params = small_params(store.vocab, path_length=2)
        cache = {}
        pair_block(params, store, "q", "missing", 0, cache)
        assert not cache
        first = pair_block(params, store, "q", "a", 0, cache)
        assert ("q", "a") in cache
        assert pair_block(params, store, "q", "a", 1, cache) is first


class TestContextBundle:
    def test_shape_and_slots(self, tmp_path):
        store = write_store(tmp_path, "q\ta\tx|n|d|<\n")
        params = small_params(store.vocab, path_length=2)
        bundle = context_bundle(params, store, "q", ["a", "b"])
        assert bundle.data.shape == (1, 2 * 4)
        # second slot had no evidence, so it equals the slot-1 fallback row
        np.testing.assert_allclose(bundle.data[:, 4:], params.no_path.data[1:2])

    def test_wrong_path_length(self, tmp_path):
        store = write_store(tmp_path, "q\ta\tx|n|d|<\n")
        params = small_params(store.vocab, path_length=2)
        with pytest.raises(ValueError):
            context_bundle(params, store, "q", ["a"])


class TestGradients:
    def test_bundle_gradients_match_finite_differences(self, tmp_path):
        store = write_store(tmp_path, "q\ta\tx|n|d|<;y|v|e|>\nq\ta\ty|v|d|<\n")
        params = small_params(store.vocab, hidden=3, path_length=2, seed=9)

        def loss():
            bundle = context_bundle(params, store, "q", ["a", "b"])
            return (bundle * bundle).sum()

        errors = relative_errors(loss, params.parameters())
        for name, err in errors.items():
            assert err < 1e-4, (name, err)
