"""Subword tokenizer, encoder forward invariants, gradient correctness, and
seeded training behavior.

The gradient check runs a deliberately tiny configuration (d_model 8, one
layer, two heads, sequence length 8) so central finite differences over every
parameter tensor stay fast. The key-projection bias is a known special case:
softmax is invariant to per-row score shifts, so its true gradient is zero
and both sides of the check are numerical noise; the floored denominator
below treats that correctly instead of dividing noise by noise.
"""
import numpy as np
import pytest

from abusivetext import encoder as enc
from abusivetext.corpus import Label, VocabProfile, synth_corpus
from abusivetext.errors import DimensionMismatch, EmptyCorpus, EmptyData
from abusivetext.textprep import preprocess

MICRO_CONFIG = enc.EncoderConfig(
    d_model=8, n_heads=2, n_layers=1, d_ff=16, max_length=8
)


@pytest.fixture(scope="module")
def toy_tokenizer():
    return enc.train_subword(["aaab bcd xyz", "hello aaab world"], vocab_size=24)


def micro_batch(tokenizer, seed=11, batch=4):
    rng = np.random.default_rng(seed)
    ids = rng.integers(0, tokenizer.vocab_size, size=(batch, MICRO_CONFIG.max_length))
    ids[:, 0] = enc.CLS_ID
    mask = np.ones((batch, MICRO_CONFIG.max_length))
    mask[0, 5:] = 0.0
    mask[2, 3:] = 0.0
    labels = rng.integers(0, 2, size=batch).astype(np.float64)
    return ids, mask, labels


class TestTrainSubword:
    def test_first_merge_is_most_frequent_pair(self):
        # "aaab" has pairs (a,a) x2 and (a,b) x1 per copy; (a,a) wins 4 to 2.
        tokenizer = enc.train_subword(["aaab", "aaab"], vocab_size=16)
        assert tokenizer.merges[0] == (b"a", b"a")

    def test_unknown_bytes_become_unk(self):
        tokenizer = enc.train_subword(["abc"], vocab_size=8)
        ids, _ = enc.encode(tokenizer, "q", max_length=4)
        assert ids[1] == enc.UNK_ID

    def test_deterministic_inventory(self):
        corpus = ["the quick brown fox", "the slow brown dog"]
        assert enc.train_subword(corpus, 40) == enc.train_subword(corpus, 40)

    def test_tie_breaks_lexicographically(self):
        # "ab" and "cd" both occur once; (a,b) < (c,d) as byte pairs.
        tokenizer = enc.train_subword(["ab cd"], vocab_size=8)
        assert tokenizer.merges[0] == (b"a", b"b")

    def test_vocab_size_cap_respected(self):
        tokenizer = enc.train_subword(["abcdefgh " * 3], vocab_size=12)
        assert tokenizer.vocab_size <= 12

    def test_empty_corpus_rejected(self):
        with pytest.raises(EmptyCorpus):
            enc.train_subword([], vocab_size=8)

    def test_vocab_size_too_small_rejected(self):
        with pytest.raises(ValueError):
            enc.train_subword(["a"], vocab_size=3)

    def test_multibyte_script_roundtrips_through_pieces(self):
        word = "அம்மா"
        tokenizer = enc.train_subword([word, word], vocab_size=64)
        pieces = tokenizer.pieces_of_word(word)
        assert b"".join(pieces) == word.encode("utf-8")


class TestEncode:
    def test_empty_text(self, toy_tokenizer):
        ids, mask = enc.encode(toy_tokenizer, "", max_length=128)
        assert ids[0] == enc.CLS_ID
        assert np.all(ids[1:] == enc.PAD_ID)
        assert mask[0] == 1.0 and np.all(mask[1:] == 0.0)

    def test_long_text_truncates_to_exact_length(self, toy_tokenizer):
        ids, mask = enc.encode(toy_tokenizer, "aaab " * 400, max_length=128)
        assert ids.shape == (128,)
        assert mask.sum() == 128
        assert ids[127] != enc.PAD_ID

    def test_length_and_mask_accounting(self, toy_tokenizer):
        text = "hello world"
        pieces = sum(
            len(toy_tokenizer.pieces_of_word(w)) for w in text.split()
        )
        ids, mask = enc.encode(toy_tokenizer, text, max_length=128)
        assert ids.shape == (128,)
        assert mask.sum() == 1 + pieces

    def test_only_known_ids(self, toy_tokenizer):
        ids, _ = enc.encode(toy_tokenizer, "completely novel éé", max_length=32)
        assert np.all(ids < toy_tokenizer.vocab_size)
        assert np.all(ids >= 0)


class TestForward:
    def test_zero_head_gives_half(self, toy_tokenizer):
        params = enc.init_params(MICRO_CONFIG, toy_tokenizer.vocab_size, seed=0)
        params["head.w"][:] = 0.0
        params["head.b"] = np.zeros(())
        model = enc.EncoderModel(params, MICRO_CONFIG, toy_tokenizer.vocab_size)
        ids, mask = enc.encode(toy_tokenizer, "aaab", MICRO_CONFIG.max_length)
        assert enc.forward(model, ids, mask) == 0.5

    def test_attention_rows_sum_to_one(self, toy_tokenizer):
        model = enc.EncoderModel(
            enc.init_params(MICRO_CONFIG, toy_tokenizer.vocab_size, seed=1),
            MICRO_CONFIG,
            toy_tokenizer.vocab_size,
        )
        ids, mask = enc.encode(toy_tokenizer, "aaab bcd", MICRO_CONFIG.max_length)
        for attn in enc.attention_maps(model, ids, mask):
            np.testing.assert_allclose(attn.sum(axis=-1), 1.0, atol=1e-5)

    def test_masked_keys_get_zero_attention(self, toy_tokenizer):
        model = enc.EncoderModel(
            enc.init_params(MICRO_CONFIG, toy_tokenizer.vocab_size, seed=1),
            MICRO_CONFIG,
            toy_tokenizer.vocab_size,
        )
        ids, mask = enc.encode(toy_tokenizer, "xyz", MICRO_CONFIG.max_length)
        padded = mask == 0.0
        for attn in enc.attention_maps(model, ids, mask):
            assert np.all(attn[:, :, padded] == 0.0)

    def test_pad_tail_mutation_is_invisible(self, toy_tokenizer):
        model = enc.EncoderModel(
            enc.init_params(MICRO_CONFIG, toy_tokenizer.vocab_size, seed=2),
            MICRO_CONFIG,
            toy_tokenizer.vocab_size,
        )
        ids, mask = enc.encode(toy_tokenizer, "hello", MICRO_CONFIG.max_length)
        reference = enc.forward(model, ids, mask)
        rng = np.random.default_rng(5)
        tail = int(mask.sum())
        for _ in range(10):
            mutated = ids.copy()
            mutated[tail:] = rng.integers(0, toy_tokenizer.vocab_size, ids.size - tail)
            assert abs(enc.forward(model, mutated, mask) - reference) < 1e-6

    def test_output_strictly_inside_unit_interval(self, toy_tokenizer):
        params = enc.init_params(MICRO_CONFIG, toy_tokenizer.vocab_size, seed=3)
        params["head.b"] = np.array(80.0)  # force a saturating logit
        model = enc.EncoderModel(params, MICRO_CONFIG, toy_tokenizer.vocab_size)
        ids, mask = enc.encode(toy_tokenizer, "aaab", MICRO_CONFIG.max_length)
        p = enc.forward(model, ids, mask)
        assert 0.0 < p < 1.0

    def test_wrong_length_rejected(self, toy_tokenizer):
        model = enc.EncoderModel(
            enc.init_params(MICRO_CONFIG, toy_tokenizer.vocab_size, seed=1),
            MICRO_CONFIG,
            toy_tokenizer.vocab_size,
        )
        with pytest.raises(DimensionMismatch):
            enc.forward(model, np.zeros(4, dtype=np.int64), np.ones(4))

    def test_shapes_at_layer_boundaries(self, toy_tokenizer):
        ids, mask, _ = micro_batch(toy_tokenizer, batch=3)
        params = enc.init_params(MICRO_CONFIG, toy_tokenizer.vocab_size, seed=4)
        probs, cache = enc.forward_batch(params, MICRO_CONFIG, ids, mask)
        b, length, d = 3, MICRO_CONFIG.max_length, MICRO_CONFIG.d_model
        heads, d_head = MICRO_CONFIG.n_heads, MICRO_CONFIG.d_head
        assert probs.shape == (b,)
        for layer in cache["layers"]:
            assert layer["qh"].shape == (b, heads, length, d_head)
            assert layer["attn"].shape == (b, heads, length, length)
            assert layer["ctx"].shape == (b, length, d)
            assert layer["x1"].shape == (b, length, d)
            assert layer["h1"].shape == (b, length, MICRO_CONFIG.d_ff)
        assert cache["cls"].shape == (b, d)


def gradient_check(params, config, ids, mask, labels, step=1e-5):
    """Central finite differences across every tensor; returns worst
    relative error with a floor so true-zero gradients compare as noise."""
    probs, cache = enc.forward_batch(params, config, ids, mask)
    grads = enc.backward_batch(params, config, cache, probs, labels)

    def loss_now() -> float:
        p, _ = enc.forward_batch(params, config, ids, mask)
        return enc.batch_loss(p, labels)

    worst = 0.0
    for name, analytic in grads.items():
        numeric = np.zeros_like(analytic)
        flat_param = params[name].reshape(-1)
        flat_numeric = numeric.reshape(-1)
        for i in range(flat_param.size):
            original = flat_param[i]
            flat_param[i] = original + step
            up = loss_now()
            flat_param[i] = original - step
            down = loss_now()
            flat_param[i] = original
            flat_numeric[i] = (up - down) / (2 * step)
        denom = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-6)
        worst = max(worst, np.linalg.norm(analytic - numeric) / denom)
    return worst


class TestGradients:
    def test_all_tensors_match_finite_differences(self, toy_tokenizer):
        ids, mask, labels = micro_batch(toy_tokenizer)
        params = enc.init_params(MICRO_CONFIG, toy_tokenizer.vocab_size, seed=5)
        assert gradient_check(params, MICRO_CONFIG, ids, mask, labels) < 1e-4

    def test_gradients_flow_to_embeddings_of_used_tokens_only(self, toy_tokenizer):
        ids, mask, labels = micro_batch(toy_tokenizer)
        params = enc.init_params(MICRO_CONFIG, toy_tokenizer.vocab_size, seed=6)
        probs, cache = enc.forward_batch(params, MICRO_CONFIG, ids, mask)
        grads = enc.backward_batch(params, MICRO_CONFIG, cache, probs, labels)
        used = np.unique(ids)
        unused = np.setdiff1d(np.arange(toy_tokenizer.vocab_size), used)
        assert np.all(grads["tok_emb"][unused] == 0.0)
        assert np.any(grads["tok_emb"][used] != 0.0)


class TestTrainEncoder:
    def small_pairs(self, n_per_class=8):
        split = synth_corpus(
            13, n_per_class,
            profile=VocabProfile(words_min=2, words_max=4, url_rate=0.0, punct_rate=0.0),
        )
        texts = [preprocess(t) for t in split.texts()]
        return list(zip(texts, split.labels()))

    def test_lr_zero_leaves_parameters_at_init(self):
        pairs = self.small_pairs()
        tokenizer = enc.train_subword([t for t, _ in pairs], vocab_size=64)
        config = enc.EncoderConfig(d_model=8, n_heads=2, n_layers=1, d_ff=16, max_length=8)
        train_config = enc.TrainConfigEnc(learning_rate=0.0, epochs=2, batch_size=4, seed=9)
        model, _ = enc.train_encoder(pairs, pairs, tokenizer, config, train_config)
        init = enc.init_params(config, tokenizer.vocab_size, seed=9)
        assert all(np.array_equal(model.params[k], init[k]) for k in init)

    def test_same_seed_bit_identical(self):
        pairs = self.small_pairs()
        tokenizer = enc.train_subword([t for t, _ in pairs], vocab_size=64)
        config = enc.EncoderConfig(d_model=8, n_heads=2, n_layers=2, d_ff=16, max_length=8)
        train_config = enc.TrainConfigEnc(learning_rate=1e-3, epochs=3, batch_size=4, seed=1)
        m1, r1 = enc.train_encoder(pairs, pairs, tokenizer, config, train_config)
        m2, r2 = enc.train_encoder(pairs, pairs, tokenizer, config, train_config)
        assert m1 == m2
        assert r1 == r2

    def test_report_tracks_every_epoch(self):
        pairs = self.small_pairs()
        tokenizer = enc.train_subword([t for t, _ in pairs], vocab_size=64)
        config = enc.EncoderConfig(d_model=8, n_heads=2, n_layers=1, d_ff=16, max_length=8)
        train_config = enc.TrainConfigEnc(learning_rate=1e-3, epochs=4, batch_size=4, seed=0)
        _, report = enc.train_encoder(pairs, pairs, tokenizer, config, train_config)
        assert len(report.epoch_train_losses) == 4
        assert len(report.epoch_dev_macro_f1) == 4
        assert all(0.0 <= f1 <= 1.0 for f1 in report.epoch_dev_macro_f1)

    def test_empty_train_or_dev_rejected(self):
        tokenizer = enc.train_subword(["a"], vocab_size=8)
        with pytest.raises(EmptyData):
            enc.train_encoder([], [("a", Label(1))], tokenizer)
        with pytest.raises(EmptyData):
            enc.train_encoder([("a", Label(1))], [], tokenizer)

    def test_dropout_training_is_seeded_and_eval_deterministic(self):
        pairs = self.small_pairs()
        tokenizer = enc.train_subword([t for t, _ in pairs], vocab_size=64)
        config = enc.EncoderConfig(
            d_model=8, n_heads=2, n_layers=1, d_ff=16, max_length=8, dropout=0.2
        )
        train_config = enc.TrainConfigEnc(learning_rate=1e-3, epochs=2, batch_size=4, seed=2)
        m1, _ = enc.train_encoder(pairs, pairs, tokenizer, config, train_config)
        m2, _ = enc.train_encoder(pairs, pairs, tokenizer, config, train_config)
        assert m1 == m2

    def test_defaults_match_published_regime(self):
        config = enc.TrainConfigEnc()
        assert config.learning_rate == 1e-5
        assert config.epochs == 5
        assert config.batch_size == 32
        assert config.eval_strategy == "epoch"
        assert enc.EncoderConfig().max_length == 128
