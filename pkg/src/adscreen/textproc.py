"""Tokenization, Porter stemming and n-gram counting shared by every feature."""
from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

_WORD_RE = re.compile(r"[^\W_]+(?:'[^\W_]+)*")
_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'"})


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens; apostrophes survive only inside a word."""
    if not text:
        return []
    text = unicodedata.normalize("NFC", text).translate(_APOSTROPHES).lower()
    return _WORD_RE.findall(text)


# ---------------------------------------------------------------------------
# Porter (1980) stemmer, original rule set.

_VOWELS = frozenset("aeiou")


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        # y is a vowel when preceded by a consonant
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of VC sequences in ``[C](VC)^m[V]``."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        cons = _is_consonant(stem, i)
        if cons and prev_vowel:
            m += 1
        prev_vowel = not cons
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return len(word) >= 2 and word[-1] == word[-2] and _is_consonant(word, len(word) - 1)


def _ends_cvc(word: str) -> bool:
    return (
        len(word) >= 3
        and _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


def _m_gt0(stem: str) -> bool:
    return _measure(stem) > 0


def _m_gt1(stem: str) -> bool:
    return _measure(stem) > 1


def _apply_first(word: str, rules) -> str:
    # rules are ordered so the longest matching suffix is seen first; once a
    # suffix matches, no other rule in the step is tried
    for suffix, repl, cond in rules:
        if word.endswith(suffix):
            stem = word[: len(word) - len(suffix)]
            return stem + repl if cond(stem) else word
    return word


_STEP2 = [
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
]
_STEP3 = [
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
]
_STEP4 = [
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment",
    "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
]


def _sorted_rules(pairs, cond):
    return sorted(((s, r, cond) for s, r in pairs), key=lambda t: -len(t[0]))


_STEP2_RULES = _sorted_rules(_STEP2, _m_gt0)
_STEP3_RULES = _sorted_rules(_STEP3, _m_gt0)


def _step4_cond(suffix):
    if suffix == "ion":
        return lambda stem: _m_gt1(stem) and stem[-1:] in ("s", "t")
    return _m_gt1


_STEP4_RULES = sorted(((s, "", _step4_cond(s)) for s in _STEP4), key=lambda t: -len(t[0]))


def _step1a(w: str) -> str:
    if w.endswith("sses"):
        return w[:-2]
    if w.endswith("ies"):
        return w[:-2]
    if w.endswith("ss"):
        return w
    if w.endswith("s"):
        return w[:-1]
    return w


def _step1b(w: str) -> str:
    if w.endswith("eed"):
        return w[:-1] if _m_gt0(w[:-3]) else w
    for suffix in ("ed", "ing"):
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if not _has_vowel(stem):
                return w
            if stem.endswith(("at", "bl", "iz")):
                return stem + "e"
            if _ends_double_consonant(stem) and stem[-1] not in "lsz":
                return stem[:-1]
            if _measure(stem) == 1 and _ends_cvc(stem):
                return stem + "e"
            return stem
    return w


def _step1c(w: str) -> str:
    if w.endswith("y") and _has_vowel(w[:-1]):
        return w[:-1] + "i"
    return w


def _step5(w: str) -> str:
    if w.endswith("e"):
        stem = w[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            w = stem
    if w.endswith("ll") and _measure(w) > 1:
        w = w[:-1]
    return w


@lru_cache(maxsize=65536)
def stem(token: str) -> str:
    """Porter stem of a lowercase token. Tokens of length <= 2 are returned as is."""
    if len(token) <= 2:
        return token
    w = _step1a(token)
    w = _step1b(w)
    w = _step1c(w)
    w = _apply_first(w, _STEP2_RULES)
    w = _apply_first(w, _STEP3_RULES)
    w = _apply_first(w, _STEP4_RULES)
    return _step5(w)


def ngrams(tokens, n: int) -> Counter:
    """Multiset of contiguous n-grams (as tuples)."""
    if n < 1:
        raise ValueError(f"n-gram order must be >= 1, got {n}")
    tokens = list(tokens)
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


@dataclass(frozen=True)
class TokenizedDoc:
    subject_id: str
    tokens: tuple[str, ...]
    stems: tuple[str, ...] = field(default=())

    def __post_init__(self):
        tokens = tuple(self.tokens)
        object.__setattr__(self, "tokens", tokens)
        if not self.stems and tokens:
            object.__setattr__(self, "stems", tuple(stem(t) for t in tokens))
        else:
            object.__setattr__(self, "stems", tuple(self.stems))
        if len(self.stems) != len(self.tokens):
            raise ValueError("tokens and stems must be parallel")

    @classmethod
    def from_text(cls, text: str, subject_id: str = "") -> "TokenizedDoc":
        return cls(subject_id, tuple(tokenize(text)))

    def __len__(self):
        return len(self.tokens)
