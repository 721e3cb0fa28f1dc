"""Desk-scale transformer-encoder classifier trained from scratch.

The stack is deliberately plain so every gradient is checkable against
finite differences: learned token + position embeddings, post-layer-norm
blocks of masked multi-head self-attention and a ReLU feed-forward, and a
single-logit sigmoid head read off the CLS position. Padding keys receive a
-1e30 additive score before the softmax, which makes the output exactly
invariant to whatever sits in the PAD tail.

Tokenization is a corpus-trained byte-pair encoder: specials (CLS/PAD/UNK),
then the corpus's single bytes, then merged pieces. Bytes never seen in
training encode as UNK, so encoding cannot fail.

All arithmetic is float64 and every random draw flows from one seeded
generator, so training is bit-reproducible.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Label
from .errors import DimensionMismatch, EmptyCorpus, EmptyData
from .metrics import confusion, macro_f1

CLS_ID = 0
PAD_ID = 1
UNK_ID = 2

_MASK_BIAS = 1e30
_LN_EPS = 1e-5


# ---------------------------------------------------------------------------
# Subword tokenizer
# ---------------------------------------------------------------------------

class SubwordTokenizer:
    """Byte-pair tokenizer. ``pieces`` maps ids 3.. in order; ``merges`` is
    the learned merge list, whose order doubles as merge priority."""

    def __init__(
        self,
        pieces: Sequence[bytes],
        merges: Sequence[tuple[bytes, bytes]] = (),
    ):
        self.pieces = tuple(pieces)
        self.merges = tuple((bytes(a), bytes(b)) for a, b in merges)
        if len(set(self.pieces)) != len(self.pieces):
            raise ValueError("tokenizer pieces must be unique")
        self.piece_to_id = {piece: i + 3 for i, piece in enumerate(self.pieces)}
        self._merge_rank = {pair: rank for rank, pair in enumerate(self.merges)}

    @property
    def vocab_size(self) -> int:
        return 3 + len(self.pieces)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SubwordTokenizer):
            return NotImplemented
        return self.pieces == other.pieces and self.merges == other.merges

    def pieces_of_word(self, word: str) -> list[bytes]:
        """Split one word into byte pieces by applying merges in rank order."""
        symbols = [bytes([b]) for b in word.encode("utf-8")]
        while len(symbols) >= 2:
            best_rank = None
            best_pair = None
            for left, right in zip(symbols, symbols[1:]):
                rank = self._merge_rank.get((left, right))
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank, best_pair = rank, (left, right)
            if best_pair is None:
                break
            symbols = _apply_merge(symbols, best_pair)
        return symbols


def _apply_merge(symbols: list[bytes], pair: tuple[bytes, bytes]) -> list[bytes]:
    merged = pair[0] + pair[1]
    out: list[bytes] = []
    i = 0
    while i < len(symbols):
        if (
            i + 1 < len(symbols)
            and symbols[i] == pair[0]
            and symbols[i + 1] == pair[1]
        ):
            out.append(merged)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def train_subword(corpus: Sequence[str], vocab_size: int) -> SubwordTokenizer:
    """Greedy byte-pair-merge training until the inventory reaches vocab_size.

    Ties in pair counts break toward the lexicographically smallest pair, so
    training is fully deterministic. vocab_size counts the whole inventory:
    the three specials, the corpus's single bytes, and learned merges.
    """
    if len(corpus) == 0:
        raise EmptyCorpus("cannot train a tokenizer on an empty corpus")
    if vocab_size < 4:
        raise ValueError("vocab_size must be >= 4")

    word_freqs: Counter[str] = Counter()
    for text in corpus:
        word_freqs.update(text.split())
    words: list[tuple[list[bytes], int]] = [
        ([bytes([b]) for b in word.encode("utf-8")], freq)
        for word, freq in sorted(word_freqs.items())
    ]

    pieces: list[bytes] = sorted({s for symbols, _ in words for s in symbols})
    known = set(pieces)
    merges: list[tuple[bytes, bytes]] = []
    while 3 + len(pieces) < vocab_size:
        pair_counts: Counter[tuple[bytes, bytes]] = Counter()
        for symbols, freq in words:
            for pair in zip(symbols, symbols[1:]):
                pair_counts[pair] += freq
        if not pair_counts:
            break
        top = max(pair_counts.values())
        best = min(pair for pair, count in pair_counts.items() if count == top)
        merges.append(best)
        merged = best[0] + best[1]
        if merged not in known:
            known.add(merged)
            pieces.append(merged)
        words = [(_apply_merge(symbols, best), freq) for symbols, freq in words]
    return SubwordTokenizer(pieces=pieces, merges=merges)


def encode(
    tokenizer: SubwordTokenizer, text: str, max_length: int = 128
) -> tuple[np.ndarray, np.ndarray]:
    """Encode text as [CLS] + pieces, truncated and PAD-filled to exactly
    max_length. Returns (ids, mask) with mask 1 on real tokens, 0 on padding."""
    ids = [CLS_ID]
    for word in text.split():
        for piece in tokenizer.pieces_of_word(word):
            ids.append(tokenizer.piece_to_id.get(piece, UNK_ID))
            if len(ids) == max_length:
                break
        if len(ids) == max_length:
            break
    n_real = len(ids)
    ids.extend([PAD_ID] * (max_length - n_real))
    mask = [1.0] * n_real + [0.0] * (max_length - n_real)
    return np.array(ids, dtype=np.int64), np.array(mask, dtype=np.float64)


# ---------------------------------------------------------------------------
# Model configuration and parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EncoderConfig:
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 128
    max_length: int = 128
    dropout: float = 0.0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads


@dataclass(frozen=True)
class TrainConfigEnc:
    """Fine-tuning-style regime: fixed epoch count, per-epoch dev evaluation,
    no early stopping. The 1e-5 default step size is far too small for
    from-scratch training; raise it explicitly for desk-scale runs."""

    learning_rate: float = 1e-5
    epochs: int = 5
    batch_size: int = 32
    eval_strategy: str = "epoch"
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.eval_strategy != "epoch":
            raise ValueError("only per-epoch evaluation is supported")


@dataclass
class TrainReportEnc:
    epoch_train_losses: list[float] = field(default_factory=list)
    epoch_dev_macro_f1: list[float] = field(default_factory=list)


class EncoderModel:
    """Parameter tensors plus the architecture they instantiate."""

    def __init__(
        self, params: dict[str, np.ndarray], config: EncoderConfig, vocab_size: int
    ):
        self.params = params
        self.config = config
        self.vocab_size = vocab_size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EncoderModel):
            return NotImplemented
        return (
            self.config == other.config
            and self.vocab_size == other.vocab_size
            and self.params.keys() == other.params.keys()
            and all(
                np.array_equal(self.params[k], other.params[k]) for k in self.params
            )
        )


def parameter_shapes(config: EncoderConfig, vocab_size: int) -> dict[str, tuple]:
    """Declared shape of every parameter tensor, in serialization order."""
    d, f = config.d_model, config.d_ff
    shapes: dict[str, tuple] = {
        "tok_emb": (vocab_size, d),
        "pos_emb": (config.max_length, d),
    }
    for i in range(config.n_layers):
        prefix = f"layer{i}."
        shapes[prefix + "attn.wq"] = (d, d)
        shapes[prefix + "attn.bq"] = (d,)
        shapes[prefix + "attn.wk"] = (d, d)
        shapes[prefix + "attn.bk"] = (d,)
        shapes[prefix + "attn.wv"] = (d, d)
        shapes[prefix + "attn.bv"] = (d,)
        shapes[prefix + "attn.wo"] = (d, d)
        shapes[prefix + "attn.bo"] = (d,)
        shapes[prefix + "ln1.gamma"] = (d,)
        shapes[prefix + "ln1.beta"] = (d,)
        shapes[prefix + "ffn.w1"] = (d, f)
        shapes[prefix + "ffn.b1"] = (f,)
        shapes[prefix + "ffn.w2"] = (f, d)
        shapes[prefix + "ffn.b2"] = (d,)
        shapes[prefix + "ln2.gamma"] = (d,)
        shapes[prefix + "ln2.beta"] = (d,)
    shapes["head.w"] = (d,)
    shapes["head.b"] = ()
    return shapes


def init_params(
    config: EncoderConfig, vocab_size: int, seed: int
) -> dict[str, np.ndarray]:
    """Scaled-uniform initialization: Glorot limits for matrices, 1/sqrt(d)
    scale for embeddings, zeros for biases, identity layer norms."""
    rng = np.random.default_rng(seed)

    def uniform(shape: tuple, limit: float) -> np.ndarray:
        return rng.uniform(-limit, limit, size=shape).astype(np.float64)

    params: dict[str, np.ndarray] = {}
    for name, shape in parameter_shapes(config, vocab_size).items():
        if name in ("tok_emb", "pos_emb"):
            params[name] = uniform(shape, math.sqrt(3.0 / config.d_model))
        elif name.endswith(("gamma",)):
            params[name] = np.ones(shape, dtype=np.float64)
        elif name.endswith(("beta",)) or name.endswith(
            (".bq", ".bk", ".bv", ".bo", ".b1", ".b2")
        ):
            params[name] = np.zeros(shape, dtype=np.float64)
        elif name == "head.w":
            params[name] = uniform(shape, math.sqrt(6.0 / (config.d_model + 1)))
        elif name == "head.b":
            params[name] = np.zeros(shape, dtype=np.float64)
        else:
            fan_in, fan_out = shape
            params[name] = uniform(shape, math.sqrt(6.0 / (fan_in + fan_out)))
    return params


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

def _layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mu) * inv
    return gamma * xhat + beta, (xhat, inv)


def _layer_norm_backward(dy: np.ndarray, cache, gamma: np.ndarray):
    xhat, inv = cache
    dgamma = (dy * xhat).sum(axis=(0, 1))
    dbeta = dy.sum(axis=(0, 1))
    dxhat = dy * gamma
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgamma, dbeta


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    b, length, d = x.shape
    return x.reshape(b, length, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, length, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, length, h * dh)


def forward_batch(
    params: dict[str, np.ndarray],
    config: EncoderConfig,
    ids: np.ndarray,
    mask: np.ndarray,
    dropout_rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, dict]:
    """Run the encoder on a batch. Returns (probabilities, cache); the cache
    holds every intermediate the backward pass needs. Dropout is applied only
    when a generator is passed (training mode) and the configured rate is
    nonzero."""
    if ids.ndim != 2 or ids.shape[1] != config.max_length:
        raise DimensionMismatch(
            f"ids must have shape (batch, {config.max_length}), got {ids.shape}"
        )
    if mask.shape != ids.shape:
        raise DimensionMismatch("mask shape must match ids shape")

    scale = 1.0 / math.sqrt(config.d_head)
    score_bias = (mask[:, None, None, :] - 1.0) * _MASK_BIAS
    drop_rate = config.dropout if dropout_rng is not None else 0.0

    def dropout_mask(shape: tuple) -> np.ndarray | None:
        if drop_rate == 0.0:
            return None
        keep = dropout_rng.random(shape) >= drop_rate
        return keep.astype(np.float64) / (1.0 - drop_rate)

    x = params["tok_emb"][ids] + params["pos_emb"][None, :, :]
    layers = []
    for i in range(config.n_layers):
        p = f"layer{i}."
        x_in = x
        q = x @ params[p + "attn.wq"] + params[p + "attn.bq"]
        k = x @ params[p + "attn.wk"] + params[p + "attn.bk"]
        v = x @ params[p + "attn.wv"] + params[p + "attn.bv"]
        qh = _split_heads(q, config.n_heads)
        kh = _split_heads(k, config.n_heads)
        vh = _split_heads(v, config.n_heads)
        scores = qh @ kh.transpose(0, 1, 3, 2) * scale + score_bias
        scores -= scores.max(axis=-1, keepdims=True)
        exp = np.exp(scores)
        attn = exp / exp.sum(axis=-1, keepdims=True)
        ctx = _merge_heads(attn @ vh)
        proj = ctx @ params[p + "attn.wo"] + params[p + "attn.bo"]
        attn_drop = dropout_mask(proj.shape)
        if attn_drop is not None:
            proj = proj * attn_drop
        x1, ln1 = _layer_norm(
            x_in + proj, params[p + "ln1.gamma"], params[p + "ln1.beta"]
        )
        h1 = x1 @ params[p + "ffn.w1"] + params[p + "ffn.b1"]
        h1r = np.maximum(h1, 0.0)
        f = h1r @ params[p + "ffn.w2"] + params[p + "ffn.b2"]
        ffn_drop = dropout_mask(f.shape)
        if ffn_drop is not None:
            f = f * ffn_drop
        x, ln2 = _layer_norm(
            x1 + f, params[p + "ln2.gamma"], params[p + "ln2.beta"]
        )
        layers.append(
            dict(
                x_in=x_in, qh=qh, kh=kh, vh=vh, attn=attn, ctx=ctx,
                ln1=ln1, x1=x1, h1=h1, h1r=h1r, ln2=ln2,
                attn_drop=attn_drop, ffn_drop=ffn_drop,
            )
        )
    cls = x[:, 0, :]
    logits = cls @ params["head.w"] + params["head.b"]
    probs = 1.0 / (1.0 + np.exp(-np.abs(logits)))
    probs = np.where(logits >= 0, probs, 1.0 - probs)
    # Keep probabilities strictly inside (0, 1) even for saturating logits.
    probs = np.clip(probs, 5e-324, np.nextafter(1.0, 0.0))
    cache = dict(ids=ids, layers=layers, cls=cls, logits=logits)
    return probs, cache


def batch_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy, clipped away from log(0)."""
    p = np.clip(probs, 1e-12, 1.0 - 1e-12)
    return float(-(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p)).mean())


def backward_batch(
    params: dict[str, np.ndarray],
    config: EncoderConfig,
    cache: dict,
    probs: np.ndarray,
    labels: np.ndarray,
) -> dict[str, np.ndarray]:
    """Gradients of the mean cross-entropy w.r.t. every parameter tensor."""
    ids = cache["ids"]
    batch = ids.shape[0]
    scale = 1.0 / math.sqrt(config.d_head)

    grads = {name: np.zeros_like(value) for name, value in params.items()}
    dlogits = (probs - labels) / batch
    grads["head.w"] += cache["cls"].T @ dlogits
    grads["head.b"] += dlogits.sum()
    dx = np.zeros((batch, config.max_length, config.d_model))
    dx[:, 0, :] = dlogits[:, None] * params["head.w"][None, :]

    for i in reversed(range(config.n_layers)):
        p = f"layer{i}."
        layer = cache["layers"][i]
        dr2, dg2, db2 = _layer_norm_backward(dx, layer["ln2"], params[p + "ln2.gamma"])
        grads[p + "ln2.gamma"] += dg2
        grads[p + "ln2.beta"] += db2

        df = dr2 if layer["ffn_drop"] is None else dr2 * layer["ffn_drop"]
        grads[p + "ffn.w2"] += np.einsum("blf,bld->fd", layer["h1r"], df)
        grads[p + "ffn.b2"] += df.sum(axis=(0, 1))
        dh1 = (df @ params[p + "ffn.w2"].T) * (layer["h1"] > 0.0)
        grads[p + "ffn.w1"] += np.einsum("bld,blf->df", layer["x1"], dh1)
        grads[p + "ffn.b1"] += dh1.sum(axis=(0, 1))
        dx1 = dr2 + dh1 @ params[p + "ffn.w1"].T

        dr1, dg1, db1 = _layer_norm_backward(dx1, layer["ln1"], params[p + "ln1.gamma"])
        grads[p + "ln1.gamma"] += dg1
        grads[p + "ln1.beta"] += db1

        dproj = dr1 if layer["attn_drop"] is None else dr1 * layer["attn_drop"]
        grads[p + "attn.wo"] += np.einsum("bld,ble->de", layer["ctx"], dproj)
        grads[p + "attn.bo"] += dproj.sum(axis=(0, 1))
        dctx = _split_heads(dproj @ params[p + "attn.wo"].T, config.n_heads)

        attn, vh, qh, kh = layer["attn"], layer["vh"], layer["qh"], layer["kh"]
        dattn = dctx @ vh.transpose(0, 1, 3, 2)
        dvh = np.einsum("bhql,bhqd->bhld", attn, dctx)
        dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
        dqh = dscores @ kh * scale
        dkh = np.einsum("bhql,bhqd->bhld", dscores, qh) * scale

        x_in = layer["x_in"]
        dx = dr1
        for name, dhead in (("wq", dqh), ("wk", dkh), ("wv", dvh)):
            dmat = _merge_heads(dhead)
            grads[p + f"attn.{name}"] += np.einsum("bld,ble->de", x_in, dmat)
            grads[p + f"attn.b{name[1]}"] += dmat.sum(axis=(0, 1))
            dx = dx + dmat @ params[p + f"attn.{name}"].T

    np.add.at(grads["tok_emb"], ids, dx)
    grads["pos_emb"] += dx.sum(axis=0)
    return grads


def forward(model: EncoderModel, ids: np.ndarray, mask: np.ndarray) -> float:
    """Probability that one encoded sequence is Abusive."""
    ids = np.asarray(ids, dtype=np.int64)
    mask = np.asarray(mask, dtype=np.float64)
    if ids.shape != (model.config.max_length,):
        raise DimensionMismatch(
            f"ids must have length {model.config.max_length}, got {ids.shape}"
        )
    probs, _ = forward_batch(
        model.params, model.config, ids[None, :], mask[None, :]
    )
    return float(probs[0])


def predict_probs(model: EncoderModel, ids: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Probabilities for a whole (n, max_length) batch, no dropout."""
    probs, _ = forward_batch(model.params, model.config, ids, mask)
    return probs


def attention_maps(
    model: EncoderModel, ids: np.ndarray, mask: np.ndarray
) -> list[np.ndarray]:
    """Per-layer attention probabilities (n_heads, L, L) for one sequence."""
    _, cache = forward_batch(
        model.params, model.config, ids[None, :], mask[None, :]
    )
    return [layer["attn"][0] for layer in cache["layers"]]


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def _encode_all(
    data: Sequence[tuple[str, Label]],
    tokenizer: SubwordTokenizer,
    max_length: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ids = np.empty((len(data), max_length), dtype=np.int64)
    mask = np.empty((len(data), max_length), dtype=np.float64)
    labels = np.empty(len(data), dtype=np.float64)
    for row, (text, label) in enumerate(data):
        ids[row], mask[row] = encode(tokenizer, text, max_length)
        labels[row] = float(label)
    return ids, mask, labels


def train_encoder(
    train: Sequence[tuple[str, Label]],
    dev: Sequence[tuple[str, Label]],
    tokenizer: SubwordTokenizer,
    enc_config: EncoderConfig = EncoderConfig(),
    train_config: TrainConfigEnc = TrainConfigEnc(),
) -> tuple[EncoderModel, TrainReportEnc]:
    """Minimize cross-entropy with plain mini-batch gradient descent for a
    fixed number of epochs, recording dev macro-F1 after each one. No early
    stopping and no model selection: the final-epoch model is returned."""
    if len(train) == 0:
        raise EmptyData("encoder training data is empty")
    if len(dev) == 0:
        raise EmptyData("encoder training requires a dev split")

    train_ids, train_mask, train_labels = _encode_all(
        train, tokenizer, enc_config.max_length
    )
    dev_ids, dev_mask, _ = _encode_all(dev, tokenizer, enc_config.max_length)
    dev_gold = [label for _, label in dev]

    rng = np.random.default_rng(train_config.seed)
    params = init_params(enc_config, tokenizer.vocab_size, train_config.seed)
    report = TrainReportEnc()
    model = EncoderModel(params, enc_config, tokenizer.vocab_size)

    for _ in range(train_config.epochs):
        order = rng.permutation(len(train))
        for start in range(0, len(order), train_config.batch_size):
            pick = order[start : start + train_config.batch_size]
            probs, cache = forward_batch(
                params, enc_config, train_ids[pick], train_mask[pick],
                dropout_rng=rng,
            )
            grads = backward_batch(
                params, enc_config, cache, probs, train_labels[pick]
            )
            for name in params:
                params[name] -= train_config.learning_rate * grads[name]
        epoch_probs = predict_probs(model, train_ids, train_mask)
        report.epoch_train_losses.append(batch_loss(epoch_probs, train_labels))
        dev_pred = [
            Label.ABUSIVE if p >= 0.5 else Label.NON_ABUSIVE
            for p in predict_probs(model, dev_ids, dev_mask)
        ]
        report.epoch_dev_macro_f1.append(macro_f1(confusion(dev_gold, dev_pred)))
    return model, report
