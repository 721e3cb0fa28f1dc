"""Whitespace tokenization and TF-IDF feature extraction.

The variant is pinned so fitted models are fully reproducible: raw term
counts for tf, smoothed idf = ln((1 + N) / (1 + df)) + 1, and L2 document
normalization. Vocabulary indices are assigned in lexicographic token order,
so serialized models are byte-stable across runs.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .errors import EmptyCorpus

# Joins the words of an n-gram; preprocessing strips this code point from
# real text, so joined n-grams can never collide with a literal token.
NGRAM_SEPARATOR = "␟"


@dataclass(frozen=True)
class TfIdfConfig:
    min_df: int = 1
    max_vocab: int | None = None
    ngram_max: int = 1
    l2_normalize: bool = True

    def __post_init__(self):
        if self.min_df < 1:
            raise ValueError("min_df must be >= 1")
        if self.ngram_max < 1:
            raise ValueError("ngram_max must be >= 1")
        if self.max_vocab is not None and self.max_vocab < 0:
            raise ValueError("max_vocab must be >= 0")


@dataclass(frozen=True)
class Vocabulary:
    """Token inventory with dense indices 0..V-1 and per-token document counts."""

    token_to_index: dict[str, int]
    document_frequency: dict[str, int]
    n_documents: int

    def __post_init__(self):
        if sorted(self.token_to_index.values()) != list(range(len(self.token_to_index))):
            raise ValueError("vocabulary indices must be dense 0..V-1")
        for token in self.token_to_index:
            df = self.document_frequency.get(token, 0)
            if not 1 <= df <= self.n_documents:
                raise ValueError(
                    f"token {token!r} has document frequency {df}, "
                    f"expected 1..{self.n_documents}"
                )

    @property
    def size(self) -> int:
        return len(self.token_to_index)

    def tokens_in_index_order(self) -> list[str]:
        return sorted(self.token_to_index, key=self.token_to_index.__getitem__)


@dataclass(frozen=True)
class TfIdfModel:
    vocab: Vocabulary
    idf: tuple[float, ...]
    config: TfIdfConfig = field(default_factory=TfIdfConfig)

    def __post_init__(self):
        if len(self.idf) != self.vocab.size:
            raise ValueError("idf length must equal vocabulary size")
        if any(v <= 0.0 for v in self.idf):
            raise ValueError("smoothed idf weights must be positive")

    @property
    def dimension(self) -> int:
        return self.vocab.size


@dataclass(frozen=True)
class SparseVector:
    """Sparse document vector: (index, weight) entries with strictly
    increasing indices and no stored zeros."""

    entries: tuple[tuple[int, float], ...]
    dimension: int

    def __post_init__(self):
        previous = -1
        for index, weight in self.entries:
            if not previous < index < self.dimension:
                raise ValueError("entry indices must strictly increase and stay < dimension")
            if weight == 0.0:
                raise ValueError("zero weights must not be stored")
            previous = index

    def norm(self) -> float:
        return math.sqrt(sum(w * w for _, w in self.entries))


def tokenize(text: str, ngram_max: int = 1) -> list[str]:
    """Split on whitespace and emit word n-grams up to ngram_max.

    Unigrams come first, then bigrams, and so on; n-gram words are joined
    with NGRAM_SEPARATOR. Empty text yields an empty list.
    """
    words = text.split()
    tokens = list(words)
    for n in range(2, ngram_max + 1):
        tokens.extend(
            NGRAM_SEPARATOR.join(words[i : i + n])
            for i in range(len(words) - n + 1)
        )
    return tokens


def fit(corpus: Sequence[str], config: TfIdfConfig = TfIdfConfig()) -> TfIdfModel:
    """Fit vocabulary and idf weights on a corpus of (preprocessed) documents.

    Tokens with df < min_df are dropped; when max_vocab caps the size, the
    survivors are the top tokens by (df descending, token ascending). The
    smoothed idf keeps every weight finite and positive even at df = N.
    """
    if len(corpus) == 0:
        raise EmptyCorpus("cannot fit TF-IDF on an empty corpus")
    n_documents = len(corpus)
    document_frequency: Counter[str] = Counter()
    for document in corpus:
        document_frequency.update(set(tokenize(document, config.ngram_max)))

    kept = [t for t, df in document_frequency.items() if df >= config.min_df]
    if config.max_vocab is not None and len(kept) > config.max_vocab:
        kept.sort(key=lambda t: (-document_frequency[t], t))
        kept = kept[: config.max_vocab]
    kept.sort()

    vocab = Vocabulary(
        token_to_index={token: index for index, token in enumerate(kept)},
        document_frequency={token: document_frequency[token] for token in kept},
        n_documents=n_documents,
    )
    idf = tuple(
        math.log((1 + n_documents) / (1 + document_frequency[token])) + 1.0
        for token in kept
    )
    return TfIdfModel(vocab=vocab, idf=idf, config=config)


def transform(model: TfIdfModel, text: str) -> SparseVector:
    """Weight in-vocabulary tokens by raw count x idf; out-of-vocabulary
    tokens contribute nothing. L2-normalized when configured; an all-OOV
    document becomes the zero vector."""
    counts = Counter(tokenize(text, model.config.ngram_max))
    token_to_index = model.vocab.token_to_index
    entries = sorted(
        (token_to_index[token], count * model.idf[token_to_index[token]])
        for token, count in counts.items()
        if token in token_to_index
    )
    if model.config.l2_normalize and entries:
        norm = math.sqrt(sum(w * w for _, w in entries))
        entries = [(i, w / norm) for i, w in entries]
    return SparseVector(entries=tuple(entries), dimension=model.dimension)
