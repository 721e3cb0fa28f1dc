"""Deterministic text cleaning: URL removal, special-character stripping, and
whitespace normalization, in that fixed order.

All rules are Unicode-aware so Tamil and Malayalam script content (letters
and their dependent vowel signs) survives intact. Removed characters become
spaces, never deletions, so "word!word" does not fuse into "wordword";
a final whitespace collapse cleans up the slack.
"""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache

# A URL is http://, https://, or www. followed by everything up to whitespace.
_URL_RE = re.compile(r"(?:https?://|www\.)\S*", re.IGNORECASE)


@dataclass(frozen=True)
class CleanPolicy:
    """Which cleaning steps to apply. The defaults enable the full pipeline.

    strip_digits is off by default: digits carry signal in code-mixed
    social-media text (years, counts), while emoji and punctuation do not.
    """

    remove_urls: bool = True
    strip_specials: bool = True
    collapse_whitespace: bool = True
    lowercase_latin: bool = True
    strip_digits: bool = False


DEFAULT_POLICY = CleanPolicy()


def remove_urls(text: str) -> str:
    """Replace every URL (up to the next whitespace) with a single space."""
    return _URL_RE.sub(" ", text)


@lru_cache(maxsize=None)
def _survives_strip(ch: str) -> bool:
    # Keep letters of any script, combining marks (Tamil/Malayalam vowel
    # signs are Mc/Mn), decimal digits, and whitespace.
    category = unicodedata.category(ch)
    return category[0] in ("L", "M") or category == "Nd" or ch.isspace()


def strip_specials(text: str) -> str:
    """Replace every code point that is not letter/mark/digit/whitespace
    with a single space."""
    return "".join(ch if _survives_strip(ch) else " " for ch in text)


def _strip_digits(text: str) -> str:
    return "".join(
        " " if unicodedata.category(ch) == "Nd" else ch for ch in text
    )


@lru_cache(maxsize=None)
def _latin_lower(ch: str) -> str:
    # Latin-only lowercasing: Tamil/Malayalam have no case, and other cased
    # scripts are left alone. One-to-many lowerings (e.g. U+0130) are skipped
    # so cleaning never grows the text.
    if "LATIN" not in unicodedata.name(ch, ""):
        return ch
    lowered = ch.lower()
    return lowered if len(lowered) == 1 else ch


def lowercase_latin(text: str) -> str:
    """Lowercase Latin-script letters only."""
    return "".join(_latin_lower(ch) for ch in text)


def collapse_whitespace(text: str) -> str:
    """Collapse every whitespace run to one space and trim the ends."""
    return " ".join(text.split())


def preprocess(text: str, policy: CleanPolicy = DEFAULT_POLICY) -> str:
    """Apply the enabled cleaning steps in their fixed order.

    URLs go first so their punctuation is not shredded into stray tokens,
    then special characters, digit stripping (when enabled), Latin
    lowercasing, and finally whitespace collapse.
    """
    if policy.remove_urls:
        text = remove_urls(text)
    if policy.strip_specials:
        text = strip_specials(text)
    if policy.strip_digits:
        text = _strip_digits(text)
    if policy.lowercase_latin:
        text = lowercase_latin(text)
    if policy.collapse_whitespace:
        text = collapse_whitespace(text)
    return text
