"""Task-specific features and assembly of the 15-column feature row."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .ingest import DEFAULT_FILLERS, Transcript
from .refscore import ReferenceSet, score_against_references
from .textproc import TokenizedDoc, stem, tokenize
from .tfidf import TfIdfModel, keyword_hit_rate, similarity_features, tfidf_keyword_hit_rate

FEATURE_NAMES = (
    "topic1_hit_rate", "topic2_hit_rate", "topic3_hit_rate",
    "bleu1", "bleu2", "bleu3", "bleu4", "meteor",
    "tfidf_sim_hc", "tfidf_sim_ad", "tfidf_kw_hit_rate",
    "avg_depth", "filled_pauses", "filled_pauses_ratio", "wer",
)
TOPICS = ("T1", "T2", "T3")


class TreeParseError(ValueError):
    pass


@dataclass(frozen=True)
class KeywordSet:
    id: int
    words: tuple[str, ...]
    topic: str = ""

    def __post_init__(self):
        words = tuple(w.strip().lower() for w in self.words)
        if not words or not all(words):
            raise ValueError(f"keyword set {self.id} is empty")
        stems = [stem(w) for w in words]
        if len(set(stems)) != len(stems):
            raise ValueError(f"keyword set {self.id} repeats a word after stemming")
        object.__setattr__(self, "words", words)


def load_keyword_sets(path=None) -> list[KeywordSet]:
    """Read a keyword JSON file; ``None`` loads the bundled Cookie Theft sets."""
    if path is None:
        text = resources.files("adscreen.data").joinpath("keywords.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text)
    return [KeywordSet(int(s["id"]), tuple(s["words"]), s.get("topic", "")) for s in data["sets"]]


def dump_keyword_sets(sets: Sequence[KeywordSet]) -> str:
    payload = {"sets": [{"id": s.id, "topic": s.topic, "words": list(s.words)} for s in sets]}
    return json.dumps(payload, indent=2) + "\n"


def _union(words) -> tuple[str, ...]:
    out, seen = [], set()
    for w in words:
        s = stem(w)
        if s not in seen:
            seen.add(s)
            out.append(w)
    return tuple(out)


def resolve_topics(sets: Sequence[KeywordSet], mapping: str = "union") -> list[KeywordSet]:
    """Map keyword sets to the three picture topics.

    ``union`` merges all sets sharing a topic tag (T1, T2, T3); ``literal``
    takes the sets with ids 1, 2 and 3.
    """
    by_id = {s.id: s for s in sets}
    if mapping == "literal":
        missing = [i for i in (1, 2, 3) if i not in by_id]
        if missing:
            raise ValueError(f"literal topic mapping needs keyword sets {missing}")
        return [KeywordSet(k, by_id[i].words, TOPICS[k - 1]) for k, i in enumerate((1, 2, 3), start=1)]
    if mapping == "union":
        topics = []
        for k, tag in enumerate(TOPICS, start=1):
            words = [w for s in sets if s.topic == tag for w in s.words]
            if not words:
                raise ValueError(f"no keyword set is tagged with topic {tag}")
            topics.append(KeywordSet(k, _union(words), tag))
        return topics
    raise ValueError(f"unknown topic mapping {mapping!r}")


def topic_hit_rate(doc: TokenizedDoc, kw: KeywordSet) -> float:
    return keyword_hit_rate(kw.words, doc)


def filled_pause_features(doc: TokenizedDoc, chat_filler_indices=(), lexicon=DEFAULT_FILLERS) -> tuple[int, float]:
    lexical = {i for i, t in enumerate(doc.tokens) if t in lexicon}
    marked = {i for i in chat_filler_indices if 0 <= i < len(doc.tokens)}
    count = len(lexical | marked)
    ratio = count / len(doc.tokens) if doc.tokens else 0.0
    return count, ratio


# ---------------------------------------------------------------------------
# bracketed trees

def tree_depth(text: str) -> int:
    """Depth of one bracketed tree: leaves are 0, a node is 1 + deepest child."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    if not tokens or tokens[0] != "(":
        raise TreeParseError("tree must start with '('")
    # stack of [depth of deepest child so far, child count]
    stack: list[list[int]] = []
    root_depth = None
    expect_label = False
    for pos, tok in enumerate(tokens):
        if root_depth is not None:
            raise TreeParseError("text after the end of the tree")
        if tok == "(":
            if stack:
                stack[-1][1] += 1
            stack.append([0, 0])
            expect_label = True
        elif tok == ")":
            if not stack:
                raise TreeParseError("unbalanced ')'")
            deepest, n_children = stack.pop()
            if n_children == 0:
                raise TreeParseError("empty node")
            depth = 1 + deepest
            if stack:
                stack[-1][0] = max(stack[-1][0], depth)
            else:
                root_depth = depth
            expect_label = False
        else:
            if not stack:
                raise TreeParseError(f"bare token {tok!r} outside brackets")
            if expect_label:
                expect_label = False
            else:
                stack[-1][1] += 1
    if root_depth is None:
        raise TreeParseError("unbalanced '('")
    return root_depth


def avg_parse_depth(trees: Sequence[str]) -> float:
    """Mean tree depth over utterance trees; 0.0 for no trees."""
    if not trees:
        return 0.0
    depths = []
    for i, tree in enumerate(trees):
        try:
            depths.append(tree_depth(tree))
        except TreeParseError as exc:
            raise TreeParseError(f"tree {i}: {exc}") from None
    return sum(depths) / len(depths)


def load_trees(path) -> list[str]:
    return [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


# ---------------------------------------------------------------------------
# WER

def edit_distance(ref: Sequence[str], hyp: Sequence[str]) -> int:
    prev = list(range(len(hyp) + 1))
    for i in range(1, len(ref) + 1):
        cur = [i] + [0] * len(hyp)
        for j in range(1, len(hyp) + 1):
            sub = prev[j - 1] + (ref[i - 1] != hyp[j - 1])
            cur[j] = min(sub, prev[j] + 1, cur[j - 1] + 1)
        prev = cur
    return prev[-1]


def word_error_rate(reference_tokens: Sequence[str], hypothesis_tokens: Sequence[str]) -> float:
    if len(reference_tokens) == 0:
        raise ValueError("WER undefined for empty reference")
    return edit_distance(list(reference_tokens), list(hypothesis_tokens)) / len(reference_tokens)


# ---------------------------------------------------------------------------
# assembly

@dataclass
class FeatureVector:
    subject_id: str
    label: Optional[str]
    topic1_hit_rate: float
    topic2_hit_rate: float
    topic3_hit_rate: float
    bleu1: float
    bleu2: float
    bleu3: float
    bleu4: float
    meteor: float
    tfidf_sim_hc: float
    tfidf_sim_ad: float
    tfidf_kw_hit_rate: float
    avg_depth: float
    filled_pauses: float
    filled_pauses_ratio: float
    wer: float

    def values(self) -> list[float]:
        return [getattr(self, name) for name in FEATURE_NAMES]

    @classmethod
    def from_values(cls, subject_id, label, values) -> "FeatureVector":
        values = list(values)
        if len(values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} feature values, got {len(values)}")
        return cls(subject_id, label, *values)


assert tuple(f.name for f in fields(FeatureVector))[2:] == FEATURE_NAMES


@dataclass(frozen=True)
class FeatureOptions:
    filler_lexicon: frozenset = DEFAULT_FILLERS
    wer_strip_fillers: bool = False
    bleu_smoothing: bool = True
    bleu_mode: str = "cumulative"


def assemble_features(
    doc: TokenizedDoc,
    transcript: Optional[Transcript],
    tfidf_model: TfIdfModel,
    refs: ReferenceSet,
    topics: Sequence[KeywordSet],
    trees: Optional[Sequence[str]] = None,
    asr_doc: Optional[TokenizedDoc] = None,
    label: Optional[str] = None,
    options: FeatureOptions = FeatureOptions(),
) -> FeatureVector:
    """All fifteen features for one subject.

    A missing tree list or ASR transcript leaves ``avg_depth`` / ``wer`` as
    NaN; the caller imputes or rejects them.
    """
    if len(topics) != 3:
        raise ValueError(f"need exactly three topic keyword sets, got {len(topics)}")
    t1, t2, t3 = (topic_hit_rate(doc, kw) for kw in topics)
    ref_scores = score_against_references(doc, refs, smoothing=options.bleu_smoothing, mode=options.bleu_mode)
    sim_hc, sim_ad = similarity_features(doc, tfidf_model)
    kw_rate = tfidf_keyword_hit_rate(doc, tfidf_model)
    depth = avg_parse_depth(trees) if trees is not None else math.nan

    marked = transcript.fillers_marked if transcript is not None else ()
    n_fill, fill_ratio = filled_pause_features(doc, marked, options.filler_lexicon)

    wer = math.nan
    if asr_doc is not None and doc.tokens:
        ref_tokens, hyp_tokens = list(doc.tokens), list(asr_doc.tokens)
        if options.wer_strip_fillers:
            drop = set(marked)
            ref_tokens = [t for i, t in enumerate(ref_tokens)
                          if t not in options.filler_lexicon and i not in drop]
            hyp_tokens = [t for t in hyp_tokens if t not in options.filler_lexicon]
        if ref_tokens:
            wer = word_error_rate(ref_tokens, hyp_tokens)

    return FeatureVector(
        subject_id=doc.subject_id,
        label=label,
        topic1_hit_rate=t1,
        topic2_hit_rate=t2,
        topic3_hit_rate=t3,
        bleu1=ref_scores["bleu1"],
        bleu2=ref_scores["bleu2"],
        bleu3=ref_scores["bleu3"],
        bleu4=ref_scores["bleu4"],
        meteor=ref_scores["meteor"],
        tfidf_sim_hc=sim_hc,
        tfidf_sim_ad=sim_ad,
        tfidf_kw_hit_rate=kw_rate,
        avg_depth=depth,
        filled_pauses=float(n_fill),
        filled_pauses_ratio=fill_ratio,
        wer=wer,
    )


def doc_from_transcript(transcript: Transcript) -> TokenizedDoc:
    return TokenizedDoc(transcript.subject_id, tuple(tokenize(transcript.text)))
