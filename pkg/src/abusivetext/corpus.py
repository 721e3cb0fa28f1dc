"""Labeled-dataset handling: label mapping, TSV/CSV parsing, statistics, and a
deterministic synthetic-corpus generator for desk-scale runs.

Input files are UTF-8 with a header row naming at least ``text`` and, for
labeled data, ``label``; an ``id`` column is optional (row index is used
otherwise). TSV is the default format since social-media text is full of
commas; TSV cells must not contain tabs or newlines, while CSV follows
standard quoting rules (embedded newlines inside quotes are fine).
"""
from __future__ import annotations

import csv
import enum
import io
import re
from dataclasses import dataclass
from random import Random
from typing import BinaryIO, Iterable

from .errors import EncodingError, MalformedRow, UnknownLabel


class Label(enum.IntEnum):
    NON_ABUSIVE = 0
    ABUSIVE = 1

    def to_text(self) -> str:
        return "Abusive" if self is Label.ABUSIVE else "Non-Abusive"


_LABEL_NORMALIZER = re.compile(r"[\s\-]+")


def map_label(raw: str) -> Label:
    """Map a label string to its binary value: Abusive -> 1, Non-Abusive -> 0.

    Matching is case-insensitive and tolerant of hyphen/space variation
    ("Non-Abusive", "Non-abusive", "non abusive" all map to 0). Anything
    else raises UnknownLabel.
    """
    normalized = _LABEL_NORMALIZER.sub(" ", raw.strip().lower())
    if normalized == "abusive":
        return Label.ABUSIVE
    if normalized == "non abusive":
        return Label.NON_ABUSIVE
    raise UnknownLabel(raw)


class SplitName(str, enum.Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


@dataclass(frozen=True)
class LabeledExample:
    """One comment. ``label`` is None for unlabeled test data."""

    id: str
    text: str
    label: Label | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("example id must be non-empty")


@dataclass(frozen=True)
class DatasetSplit:
    name: SplitName
    examples: tuple[LabeledExample, ...]
    language_tag: str = ""

    def __post_init__(self):
        seen: set[str] = set()
        for ex in self.examples:
            if ex.id in seen:
                raise ValueError(f"duplicate example id: {ex.id!r}")
            seen.add(ex.id)
        if self.name in (SplitName.TRAIN, SplitName.DEV):
            for ex in self.examples:
                if ex.label is None:
                    raise ValueError(
                        f"{self.name.value} split requires a label on every example "
                        f"(example {ex.id!r} has none)"
                    )

    def texts(self) -> list[str]:
        return [ex.text for ex in self.examples]

    def labels(self) -> list[Label]:
        return [ex.label for ex in self.examples if ex.label is not None]


@dataclass(frozen=True)
class DatasetStats:
    total: int
    per_label: dict[Label, int]
    unlabeled: int


def compute_stats(split: DatasetSplit) -> DatasetStats:
    """Exact per-label and unlabeled counts; total always reconciles."""
    per_label = {Label.NON_ABUSIVE: 0, Label.ABUSIVE: 0}
    unlabeled = 0
    for ex in split.examples:
        if ex.label is None:
            unlabeled += 1
        else:
            per_label[ex.label] += 1
    return DatasetStats(
        total=len(split.examples), per_label=per_label, unlabeled=unlabeled
    )


class FileFormat(str, enum.Enum):
    TSV = "tsv"
    CSV = "csv"


def _rows_from_text(text: str, format: FileFormat) -> Iterable[tuple[int, list[str]]]:
    """Yield (1-based row number, cells). The header is row 1. Blank rows are
    skipped so trailing newlines do not count as data."""
    if format is FileFormat.TSV:
        for number, line in enumerate(text.split("\n"), start=1):
            line = line.rstrip("\r")
            if line == "":
                continue
            yield number, line.split("\t")
    else:
        reader = csv.reader(io.StringIO(text, newline=""))
        for cells in reader:
            if not cells:
                continue
            yield reader.line_num, cells


def parse_dataset(
    source: BinaryIO | bytes,
    format: FileFormat = FileFormat.TSV,
    has_labels: bool = True,
    name: SplitName | None = None,
    language_tag: str = "",
) -> DatasetSplit:
    """Parse a UTF-8 TSV/CSV byte stream into a DatasetSplit, preserving row order.

    Raises MalformedRow (with the offending row number) for wrong column
    counts, unknown labels, empty text, or duplicate ids, and EncodingError
    for invalid UTF-8. When no ``id`` column exists, ids are synthesized as
    ``row-<k>`` from the 0-based data-row index.
    """
    data = source if isinstance(source, bytes) else source.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"input is not valid UTF-8: {exc}") from exc
    if text.startswith("﻿"):
        text = text[1:]

    rows = _rows_from_text(text, format)
    try:
        header_row = next(rows)
    except StopIteration:
        raise MalformedRow(1, "missing header row") from None
    header_num, header = header_row
    columns = {cell.strip(): i for i, cell in enumerate(header)}
    if "text" not in columns:
        raise MalformedRow(header_num, "header does not name a 'text' column")
    if has_labels and "label" not in columns:
        raise MalformedRow(header_num, "header does not name a 'label' column")

    examples: list[LabeledExample] = []
    seen_ids: set[str] = set()
    for index, (number, cells) in enumerate(rows):
        if len(cells) != len(header):
            raise MalformedRow(
                number, f"expected {len(header)} columns, found {len(cells)}"
            )
        example_id = (
            cells[columns["id"]].strip() if "id" in columns else f"row-{index}"
        )
        if not example_id:
            raise MalformedRow(number, "empty id")
        if example_id in seen_ids:
            raise MalformedRow(number, f"duplicate id {example_id!r}")
        seen_ids.add(example_id)
        text_value = cells[columns["text"]]
        if text_value == "":
            raise MalformedRow(number, "empty text")
        label: Label | None = None
        if has_labels:
            try:
                label = map_label(cells[columns["label"]])
            except UnknownLabel as exc:
                raise MalformedRow(number, str(exc)) from exc
        examples.append(LabeledExample(id=example_id, text=text_value, label=label))

    if name is None:
        name = SplitName.TRAIN if has_labels else SplitName.TEST
    return DatasetSplit(
        name=name, examples=tuple(examples), language_tag=language_tag
    )


# Token pools for the synthetic generator. The class pools never overlap, so
# any linear model can separate the two classes; fillers are shared and
# include Dravidian-script words to exercise the Unicode path end to end.
_ABUSIVE_POOL = (
    "grawk", "snerv", "plonkish", "druvel", "moxprat", "skolv",
    "tarnip", "blugg", "vexmor", "crindle", "zorvat", "gnashpel",
)
_NON_ABUSIVE_POOL = (
    "melith", "soravel", "quimbra", "lunareth", "fenwick", "opralin",
    "tessily", "windgrove", "halcyon", "brightle", "serenth", "calmora",
)
_FILLER_POOL = (
    "the", "video", "song", "really", "comment", "watch", "today",
    "always", "people", "channel", "movie", "scene", "actor", "story",
    "நல்ல", "படம்", "பாடல்", "சூப்பர்", "നല്ല", "പാട്ട്", "സിനിമ", "കൊള്ളാം",
)
_URL_HOSTS = ("https://t.co/", "http://bit.ly/", "www.example.com/")
_PUNCT_NOISE = ("!!!", "???", "...", "!!", "<3", ":)", "#tag")


@dataclass(frozen=True)
class VocabProfile:
    """Generator settings for synthetic corpora."""

    words_min: int = 4
    words_max: int = 10
    keywords_min: int = 1
    keywords_max: int = 3
    url_rate: float = 0.15
    punct_rate: float = 0.3

    def __post_init__(self):
        if not 1 <= self.words_min <= self.words_max:
            raise ValueError("need 1 <= words_min <= words_max")
        if not 1 <= self.keywords_min <= self.keywords_max:
            raise ValueError("need 1 <= keywords_min <= keywords_max")
        for rate in (self.url_rate, self.punct_rate):
            if not 0.0 <= rate <= 1.0:
                raise ValueError("noise rates must be in [0, 1]")


def synth_corpus(
    seed: int,
    n_per_class: int,
    profile: VocabProfile = VocabProfile(),
    name: SplitName = SplitName.TRAIN,
    language_tag: str = "synthetic",
) -> DatasetSplit:
    """Generate a balanced, lexically separable corpus. Pure function of its
    arguments: the same seed always yields byte-identical examples."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    rng = Random(seed)
    drafts: list[tuple[str, Label]] = []
    for label in (Label.ABUSIVE, Label.NON_ABUSIVE):
        pool = _ABUSIVE_POOL if label is Label.ABUSIVE else _NON_ABUSIVE_POOL
        for _ in range(n_per_class):
            n_words = rng.randint(profile.words_min, profile.words_max)
            n_keywords = min(
                n_words, rng.randint(profile.keywords_min, profile.keywords_max)
            )
            words = [rng.choice(pool) for _ in range(n_keywords)]
            words += [
                rng.choice(_FILLER_POOL) for _ in range(n_words - n_keywords)
            ]
            rng.shuffle(words)
            if words and rng.random() < profile.punct_rate:
                slot = rng.randrange(len(words))
                words[slot] = words[slot] + rng.choice(_PUNCT_NOISE)
            if rng.random() < profile.url_rate:
                url = rng.choice(_URL_HOSTS) + format(rng.randrange(16**6), "06x")
                words.insert(rng.randrange(len(words) + 1), url)
            drafts.append((" ".join(words), label))
    rng.shuffle(drafts)
    examples = tuple(
        LabeledExample(id=f"synth-{i:04d}", text=text, label=label)
        for i, (text, label) in enumerate(drafts)
    )
    return DatasetSplit(name=name, examples=examples, language_tag=language_tag)


def write_dataset(split: DatasetSplit, format: FileFormat = FileFormat.TSV) -> bytes:
    """Serialize a split back to file bytes (id, text, and label when present).

    Inverse of parse_dataset for round-trip tooling; TSV refuses texts
    containing tabs or newlines rather than corrupting the table.
    """
    labeled = all(ex.label is not None for ex in split.examples)
    header = ["id", "text"] + (["label"] if labeled else [])
    if format is FileFormat.TSV:
        lines = ["\t".join(header)]
        for ex in split.examples:
            if "\t" in ex.text or "\n" in ex.text or "\t" in ex.id:
                raise ValueError(f"example {ex.id!r} cannot be written as TSV")
            row = [ex.id, ex.text]
            if labeled:
                row.append(ex.label.to_text())
            lines.append("\t".join(row))
        return ("\n".join(lines) + "\n").encode("utf-8")
    buffer = io.StringIO(newline="")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for ex in split.examples:
        row = [ex.id, ex.text]
        if labeled:
            row.append(ex.label.to_text())
        writer.writerow(row)
    return buffer.getvalue().encode("utf-8")
