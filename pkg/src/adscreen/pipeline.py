"""Manifest-level glue: fitting, featurizing, imputation and feature-CSV I/O."""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import tfidf
from .config import RunConfig
from .ingest import IngestError, ManifestEntry, Transcript, load_manifest, load_transcript
from .refscore import ReferenceSet, load_references
from .taskfeat import (
    FEATURE_NAMES,
    FeatureOptions,
    FeatureVector,
    TreeParseError,
    assemble_features,
    avg_parse_depth,
    doc_from_transcript,
    load_keyword_sets,
    load_trees,
    resolve_topics,
)
from .textproc import TokenizedDoc, tokenize

FEATURE_HEADER = ["subject_id", "label", *FEATURE_NAMES]
IMPUTABLE = ("avg_depth", "wer")


class PipelineError(RuntimeError):
    pass


def atomic_write_text(path, text: str) -> None:
    """Write to a temp file beside ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def bundled_stopwords() -> frozenset:
    text = resources.files("adscreen.data").joinpath("stopwords.txt").read_text(encoding="utf-8")
    return frozenset(text.split())


def bundled_references() -> ReferenceSet:
    ref = resources.files("adscreen.data").joinpath("example_references.txt")
    with resources.as_file(ref) as p:
        return load_references(p)


def term_options(cfg: RunConfig) -> tfidf.TermOptions:
    return tfidf.TermOptions(
        use_stems=cfg.tfidf_use_stems,
        stopwords=bundled_stopwords() if cfg.tfidf_stopwords else frozenset(),
    )


def feature_options(cfg: RunConfig) -> FeatureOptions:
    return FeatureOptions(
        filler_lexicon=cfg.fillers,
        wer_strip_fillers=cfg.wer_strip_fillers,
        bleu_smoothing=cfg.bleu_smoothing,
        bleu_mode=cfg.bleu_mode,
    )


def read_subject(entry: ManifestEntry, cfg: RunConfig) -> tuple[Transcript, TokenizedDoc]:
    try:
        tr = load_transcript(entry.transcript_path, entry.subject_id, cfg.speaker_codes, cfg.fillers)
    except IngestError as exc:
        raise PipelineError(f"{entry.subject_id}: {exc}") from None
    return tr, doc_from_transcript(tr)


def fit_from_manifest(manifest_path, cfg: RunConfig) -> tfidf.TfIdfModel:
    entries = load_manifest(manifest_path)
    unlabeled = [e.subject_id for e in entries if e.label is None]
    if unlabeled:
        raise PipelineError(f"training manifest has unlabeled rows: {', '.join(unlabeled)}")
    docs = [read_subject(e, cfg)[1] for e in entries]
    return tfidf.fit(docs, [e.label for e in entries], term_options(cfg))


@dataclass
class FeaturizeResult:
    rows: list[FeatureVector]
    notes: list[str] = field(default_factory=list)


def featurize_manifest(manifest_path, model: tfidf.TfIdfModel, cfg: RunConfig,
                       impute_means: Optional[dict] = None) -> FeaturizeResult:
    """One feature row per manifest entry, in manifest order.

    Missing or unreadable trees / ASR transcripts are an error in strict mode;
    otherwise the value is imputed with ``impute_means`` (typically the
    training-set column means) or, failing that, the mean over this manifest.
    """
    entries = load_manifest(manifest_path)
    refs = load_references(cfg.references_path) if cfg.references_path else bundled_references()
    topics = resolve_topics(load_keyword_sets(cfg.keywords_path or None), cfg.topic_mapping)
    opts = feature_options(cfg)

    rows, notes, problems = [], [], []
    for e in entries:
        tr, doc = read_subject(e, cfg)
        trees = None
        if e.parse_trees_path is None:
            problems.append(f"{e.subject_id}: no parse trees")
        else:
            try:
                trees = load_trees(e.parse_trees_path)
                avg_parse_depth(trees)
            except (TreeParseError, OSError, UnicodeDecodeError) as exc:
                problems.append(f"{e.subject_id}: unreadable parse trees ({exc})")
                trees = None
        asr_doc = None
        if e.asr_transcript_path is None:
            problems.append(f"{e.subject_id}: no ASR transcript")
        else:
            text = e.asr_transcript_path.read_text(encoding="utf-8")
            asr_doc = TokenizedDoc(e.subject_id, tuple(tokenize(text)))
        rows.append(assemble_features(doc, tr, model, refs, topics, trees, asr_doc, e.label, opts))

    if problems and cfg.strict:
        raise PipelineError("strict mode: missing annotations\n  " + "\n  ".join(problems))
    notes.extend(problems)
    notes.extend(impute(rows, impute_means))
    return FeaturizeResult(rows, notes)


def column_means(rows: Sequence[FeatureVector], names=IMPUTABLE) -> dict:
    means = {}
    for name in names:
        vals = [getattr(r, name) for r in rows if not math.isnan(getattr(r, name))]
        means[name] = sum(vals) / len(vals) if vals else math.nan
    return means


def impute(rows: Sequence[FeatureVector], means: Optional[dict] = None) -> list[str]:
    """Fill NaN avg_depth / wer in place; returns one note per filled cell."""
    own = column_means(rows)
    notes = []
    for name in IMPUTABLE:
        value = (means or {}).get(name, math.nan)
        source = "supplied mean"
        if math.isnan(value):
            value, source = own[name], "manifest mean"
        if math.isnan(value):
            value, source = 0.0, "no observed values, 0.0"
        for r in rows:
            if math.isnan(getattr(r, name)):
                setattr(r, name, value)
                notes.append(f"{r.subject_id}: {name} imputed = {value:.6f} ({source})")
    return notes


def features_to_csv(rows: Sequence[FeatureVector]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FEATURE_HEADER)
    for r in rows:
        w.writerow([r.subject_id, r.label or "", *(f"{v:.6f}" for v in r.values())])
    return buf.getvalue()


def read_features_csv(path) -> list[FeatureVector]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != FEATURE_HEADER:
            raise PipelineError(
                f"feature CSV header mismatch in {path}\n"
                f"  expected: {','.join(FEATURE_HEADER)}\n"
                f"  found:    {','.join(header or [])}"
            )
        rows = []
        for line_no, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(FEATURE_HEADER):
                raise PipelineError(f"{path}:{line_no}: expected {len(FEATURE_HEADER)} fields")
            label = rec[1].strip().upper() or None
            rows.append(FeatureVector.from_values(rec[0], label, [float(v) for v in rec[2:]]))
    return rows


def matrix(rows: Sequence[FeatureVector], need_labels: bool = True):
    X = np.array([r.values() for r in rows], dtype=float)
    if not need_labels:
        return X, None
    missing = [r.subject_id for r in rows if r.label is None]
    if missing:
        raise PipelineError(f"rows without labels: {', '.join(missing)}")
    return X, [r.label for r in rows]
