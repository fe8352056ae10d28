"""TF-IDF reference vectors, cosine similarity features and the TF-IDF keyword hit rate."""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .textproc import TokenizedDoc, stem

TOP_K = 30


@dataclass(frozen=True)
class TermOptions:
    """How a document is turned into TF-IDF terms. Defaults use raw tokens."""

    use_stems: bool = False
    stopwords: frozenset = frozenset()

    def terms(self, doc: TokenizedDoc) -> list[str]:
        seq = doc.stems if self.use_stems else doc.tokens
        if self.stopwords:
            return [t for t, tok in zip(seq, doc.tokens) if tok not in self.stopwords]
        return list(seq)


def term_frequency(term: str, doc) -> float:
    """Raw count of ``term`` over the document length.

    ``doc`` is a TokenizedDoc or a plain sequence of terms.
    """
    terms = doc.tokens if isinstance(doc, TokenizedDoc) else doc
    if len(terms) == 0:
        raise ValueError("empty document has no TF")
    return sum(1 for t in terms if t == term) / len(terms)


@dataclass
class TfIdfModel:
    vocab: list[str]
    idf: np.ndarray
    v_hc: np.ndarray
    v_ad: np.ndarray
    top30: list[str]
    n_train_docs: int
    n_hc_docs: int
    n_ad_docs: int
    options: TermOptions = field(default_factory=TermOptions)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.vocab)}

    def vector(self, doc: TokenizedDoc) -> np.ndarray:
        """Document vector over the fitted vocabulary; unseen terms are dropped."""
        return _doc_vector(self.options.terms(doc), self.index, self.idf)

    def to_dict(self) -> dict:
        return {
            "vocab": list(self.vocab),
            "idf": [float(x) for x in self.idf],
            "v_hc": [float(x) for x in self.v_hc],
            "v_ad": [float(x) for x in self.v_ad],
            "top30": list(self.top30),
            "n_train": self.n_train_docs,
            "n_hc": self.n_hc_docs,
            "n_ad": self.n_ad_docs,
            "options": {
                "use_stems": self.options.use_stems,
                "stopwords": sorted(self.options.stopwords),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TfIdfModel":
        required = ["vocab", "idf", "v_hc", "v_ad", "top30", "n_train", "n_hc", "n_ad"]
        missing = [k for k in required if k not in d]
        if missing:
            raise ValueError(f"TF-IDF model is missing keys: {missing}")
        n = len(d["vocab"])
        if not (len(d["idf"]) == len(d["v_hc"]) == len(d["v_ad"]) == n):
            raise ValueError("TF-IDF model vectors do not match vocabulary size")
        opts = d.get("options", {})
        return cls(
            vocab=list(d["vocab"]),
            idf=np.asarray(d["idf"], dtype=float),
            v_hc=np.asarray(d["v_hc"], dtype=float),
            v_ad=np.asarray(d["v_ad"], dtype=float),
            top30=list(d["top30"]),
            n_train_docs=int(d["n_train"]),
            n_hc_docs=int(d["n_hc"]),
            n_ad_docs=int(d["n_ad"]),
            options=TermOptions(
                use_stems=bool(opts.get("use_stems", False)),
                stopwords=frozenset(opts.get("stopwords", [])),
            ),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def loads(cls, text: str) -> "TfIdfModel":
        return cls.from_dict(json.loads(text))


def _doc_vector(terms: Sequence[str], index: dict, idf: np.ndarray) -> np.ndarray:
    v = np.zeros(len(index))
    if not terms:
        return v
    total = len(terms)
    for term, count in Counter(terms).items():
        i = index.get(term)
        if i is not None:
            v[i] = (count / total) * idf[i]
    return v


def _top_terms(vocab, weights, k=TOP_K) -> list[str]:
    order = sorted(range(len(vocab)), key=lambda i: (-weights[i], vocab[i]))
    return [vocab[i] for i in order[:k]]


def fit(train_docs: Sequence[TokenizedDoc], labels: Sequence[str],
        options: Optional[TermOptions] = None) -> TfIdfModel:
    """Fit vocabulary, natural-log IDF and the HC/AD mean vectors on a training set."""
    options = options or TermOptions()
    if len(train_docs) != len(labels):
        raise ValueError("train_docs and labels differ in length")
    if len(train_docs) < 2:
        raise ValueError("need at least two training documents")
    labels = list(labels)
    for lab in labels:
        if lab not in ("HC", "AD"):
            raise ValueError(f"training label must be HC or AD, got {lab!r}")
    if "HC" not in labels or "AD" not in labels:
        raise ValueError("training set must contain both HC and AD documents")

    term_lists = []
    for doc in train_docs:
        terms = options.terms(doc)
        if not terms:
            raise ValueError(f"empty document in training set: {doc.subject_id!r}")
        term_lists.append(terms)

    vocab: list[str] = []
    index: dict[str, int] = {}
    df: Counter = Counter()
    for terms in term_lists:
        for t in terms:
            if t not in index:
                index[t] = len(vocab)
                vocab.append(t)
        df.update(set(terms))

    n_docs = len(term_lists)
    idf = np.array([math.log(n_docs / df[t]) for t in vocab])
    vectors = np.array([_doc_vector(terms, index, idf) for terms in term_lists])
    is_hc = np.array([lab == "HC" for lab in labels])
    v_hc = vectors[is_hc].mean(axis=0)
    v_ad = vectors[~is_hc].mean(axis=0)
    return TfIdfModel(
        vocab=vocab,
        idf=idf,
        v_hc=v_hc,
        v_ad=v_ad,
        top30=_top_terms(vocab, v_hc),
        n_train_docs=n_docs,
        n_hc_docs=int(is_hc.sum()),
        n_ad_docs=int((~is_hc).sum()),
        options=options,
    )


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return min(1.0, max(-1.0, float(np.dot(a, b)) / (na * nb)))


def similarity_features(doc: TokenizedDoc, model: TfIdfModel) -> tuple[float, float]:
    v = model.vector(doc)
    return cosine(v, model.v_hc), cosine(v, model.v_ad)


def keyword_hit_rate(keywords: Iterable[str], doc: TokenizedDoc) -> float:
    """Fraction of keywords whose Porter stem appears among the document stems."""
    keywords = list(keywords)
    if not keywords:
        return 0.0
    doc_stems = set(doc.stems)
    hits = sum(1 for k in keywords if stem(k) in doc_stems)
    return hits / len(keywords)


def tfidf_keyword_hit_rate(doc: TokenizedDoc, model: TfIdfModel) -> float:
    return keyword_hit_rate(model.top30, doc)
