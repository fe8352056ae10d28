"""Sentence-level BLEU-1..4 and METEOR (exact + stem stages) against golden references.

Each reference is scored on its own and the per-reference scores are averaged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .textproc import TokenizedDoc, ngrams, stem, tokenize

SMOOTH_EPSILON = 0.1
METRICS = ("bleu1", "bleu2", "bleu3", "bleu4", "meteor")


@dataclass(frozen=True)
class ReferenceSet:
    references: tuple[tuple[str, ...], ...]
    source: str = ""

    def __post_init__(self):
        if not self.references:
            raise ValueError("reference set is empty")
        for i, ref in enumerate(self.references):
            if not ref:
                raise ValueError(f"reference {i} has no tokens")

    def __len__(self):
        return len(self.references)

    @classmethod
    def from_texts(cls, texts: Sequence[str], source: str = "") -> "ReferenceSet":
        return cls(tuple(tuple(tokenize(t)) for t in texts), source)


def load_references(path) -> ReferenceSet:
    """One description per line; blank lines and ``#`` comments are skipped."""
    path = Path(path)
    texts = []
    for line in path.read_text(encoding="utf-8").splitlines():
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        texts.append(s)
    return ReferenceSet.from_texts(texts, source=str(path))


def _tokens(x) -> list[str]:
    return list(x.tokens) if isinstance(x, TokenizedDoc) else list(x)


def modified_precision(candidate: Sequence[str], reference: Sequence[str], k: int) -> tuple[int, int]:
    """Clipped k-gram matches and the candidate k-gram count."""
    cand = ngrams(candidate, k)
    ref = ngrams(reference, k)
    matched = sum(min(c, ref[g]) for g, c in cand.items())
    return matched, sum(cand.values())


def brevity_penalty(c: int, r: int) -> float:
    if c > r:
        return 1.0
    if c == 0:
        return 0.0
    return math.exp(1.0 - r / c)


def bleu_n(candidate, reference, n: int, smoothing: bool = True, mode: str = "cumulative") -> float:
    """Single-reference sentence BLEU of order ``n``.

    ``mode="cumulative"`` is the uniform geometric mean of the 1..n precisions;
    ``mode="individual"`` uses the order-n precision alone. With smoothing a
    zero numerator at order k >= 2 is replaced by 0.1; a zero unigram
    precision always gives 0. An order at which neither side has any
    k-grams is vacuous and contributes p_k = 1.
    """
    if not 1 <= n <= 4:
        raise ValueError(f"BLEU order must be in 1..4, got {n}")
    if mode not in ("cumulative", "individual"):
        raise ValueError(f"unknown BLEU mode {mode!r}")
    cand = _tokens(candidate)
    ref = _tokens(reference)
    if not ref:
        raise ValueError("reference is empty")
    if not cand:
        return 0.0

    orders = range(1, n + 1) if mode == "cumulative" else (1, n)
    logs = {}
    for k in orders:
        num, den = modified_precision(cand, ref, k)
        if den == 0 and len(ref) < k:
            logs[k] = 0.0
            continue
        if num == 0:
            if k == 1 or not smoothing:
                return 0.0
            num = SMOOTH_EPSILON
        logs[k] = math.log(num / max(den, 1))
    if mode == "cumulative":
        log_mean = sum(logs.values()) / n
    else:
        log_mean = logs[n]
    return brevity_penalty(len(cand), len(ref)) * math.exp(log_mean)


# ---------------------------------------------------------------------------
# METEOR

def _align_stage(cand_keys, ref_keys, cand_free, ref_free, align):
    """Greedily match equal keys left to right among unaligned positions.

    Each candidate word takes the free reference position that continues the
    previous match if possible, else the one opening the longest run of
    further equal keys; ties go to the leftmost position.
    """
    positions: dict = {}
    for j in sorted(ref_free):
        positions.setdefault(ref_keys[j], []).append(j)

    def run_length(i, j):
        length = 0
        while (i < len(cand_keys) and j < len(ref_keys) and i in cand_free
               and j in ref_free and cand_keys[i] == ref_keys[j]):
            length += 1
            i += 1
            j += 1
        return length

    for i in sorted(cand_free):
        options = positions.get(cand_keys[i])
        if not options:
            continue
        prev = align.get(i - 1)
        if prev is not None and prev + 1 in options:
            j = prev + 1
        else:
            j = max(options, key=lambda jj: (run_length(i, jj), -jj))
        options.remove(j)
        align[i] = j
        cand_free.discard(i)
        ref_free.discard(j)


def align(candidate: Sequence[str], reference: Sequence[str]) -> dict[int, int]:
    """Unigram alignment: exact matches first, then Porter-stem matches."""
    cand_free = set(range(len(candidate)))
    ref_free = set(range(len(reference)))
    mapping: dict[int, int] = {}
    _align_stage(list(candidate), list(reference), cand_free, ref_free, mapping)
    _align_stage([stem(t) for t in candidate], [stem(t) for t in reference],
                 cand_free, ref_free, mapping)
    return mapping


def count_chunks(mapping: dict[int, int]) -> int:
    chunks = 0
    prev = None
    for i in sorted(mapping):
        j = mapping[i]
        if prev is None or not (i == prev[0] + 1 and j == prev[1] + 1):
            chunks += 1
        prev = (i, j)
    return chunks


def meteor(candidate, reference, alpha: float = 0.9, beta: float = 3.0, gamma: float = 0.5) -> float:
    """METEOR without synonym stages.

    F_mean = PR / (alpha*P + (1-alpha)*R), i.e. 10PR/(R+9P) at the default
    alpha, and penalty = gamma * (chunks/m)^beta.
    """
    cand = _tokens(candidate)
    ref = _tokens(reference)
    if not ref:
        raise ValueError("reference is empty")
    if not cand:
        return 0.0
    mapping = align(cand, ref)
    m = len(mapping)
    if m == 0:
        return 0.0
    p = m / len(cand)
    r = m / len(ref)
    f_mean = p * r / (alpha * p + (1 - alpha) * r)
    penalty = gamma * (count_chunks(mapping) / m) ** beta
    return f_mean * (1.0 - penalty)


def score_against_references(candidate, refs: ReferenceSet, smoothing: bool = True,
                             mode: str = "cumulative") -> dict[str, float]:
    """Average BLEU-1..4 and METEOR over every reference in ``refs``."""
    if not refs.references:
        raise ValueError("reference set is empty")
    cand = _tokens(candidate)
    totals = dict.fromkeys(METRICS, 0.0)
    for ref in refs.references:
        for n in range(1, 5):
            totals[f"bleu{n}"] += bleu_n(cand, ref, n, smoothing=smoothing, mode=mode)
        totals["meteor"] += meteor(cand, ref)
    k = len(refs.references)
    return {name: total / k for name, total in totals.items()}
