"""Manifest and transcript loading (CHAT subset and plain text)."""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .textproc import tokenize

LABELS = ("HC", "AD")
MANIFEST_HEADER = ["subject_id", "label", "transcript", "asr", "trees"]
DEFAULT_FILLERS = frozenset({"uh", "um", "er", "eh", "ah", "hm", "hmm", "mm", "mhm", "uhm"})


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    subject_id: str
    label: Optional[str]
    transcript_path: Path
    asr_transcript_path: Optional[Path] = None
    parse_trees_path: Optional[Path] = None


@dataclass(frozen=True)
class Transcript:
    """Participant speech of one subject.

    ``fillers_marked`` indexes into ``tokenize`` applied to the utterances
    in order, i.e. into the token stream every feature sees.
    """

    subject_id: str
    utterances: tuple[str, ...]
    fillers_marked: tuple[int, ...] = ()
    raw_source: str = "plain"

    @property
    def text(self) -> str:
        return "\n".join(self.utterances)


def parse_label(token: str) -> Optional[str]:
    t = token.strip().upper()
    if t == "":
        return None
    if t not in LABELS:
        raise IngestError(f"unknown label {token!r} (expected HC, AD or empty)")
    return t


def load_manifest(path) -> list[ManifestEntry]:
    """Read a manifest CSV; relative paths resolve against the manifest's folder."""
    path = Path(path)
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()

    def resolve(value: str, row_no: int, column: str) -> Optional[Path]:
        value = (value or "").strip()
        if not value:
            return None
        p = Path(value)
        if not p.is_absolute():
            p = base / p
        if not p.is_file():
            raise IngestError(f"row {row_no}: {column} file not found: {p}")
        return p

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MANIFEST_HEADER:
            raise IngestError(
                f"manifest header must be {','.join(MANIFEST_HEADER)}, found {header}"
            )
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            row = (row + [""] * 5)[:5]
            sid = row[0].strip()
            if not sid:
                raise IngestError(f"row {row_no}: empty subject_id")
            if sid in seen:
                raise IngestError(f"duplicate subject_id {sid}")
            seen.add(sid)
            transcript = resolve(row[2], row_no, "transcript")
            if transcript is None:
                raise IngestError(f"row {row_no}: missing transcript path for {sid}")
            entries.append(
                ManifestEntry(
                    subject_id=sid,
                    label=parse_label(row[1]),
                    transcript_path=transcript,
                    asr_transcript_path=resolve(row[3], row_no, "asr"),
                    parse_trees_path=resolve(row[4], row_no, "trees"),
                )
            )
    return entries


# ---------------------------------------------------------------------------
# CHAT

_TIMESTAMP = re.compile("\x15[^\x15]*\x15")
_BRACKET_CODE = re.compile(r"\[[^\]]*\]")
_PAUSE = re.compile(r"\(\.+\)")
_UNINTELLIGIBLE = frozenset({"xxx", "yyy", "www"})


def _clean_chat_line(text: str, fillers: frozenset[str]):
    """Return (cleaned utterance, per-item filler flags)."""
    text = _TIMESTAMP.sub(" ", text).replace("\x15", " ")
    text = _BRACKET_CODE.sub(" ", text)
    text = _PAUSE.sub(" ", text)
    # retraced material is kept; only the scope markers go
    text = re.sub(r"[<>\[\]]", " ", text)

    items: list[str] = []
    flags: list[bool] = []
    for raw in text.split():
        is_filler = False
        if raw.startswith("&-"):
            raw = raw[2:]
            is_filler = True
        elif raw.startswith("&="):
            continue
        elif raw.startswith("&"):
            # older transcripts write fillers as &uh; anything else is a fragment
            bare = raw.lstrip("&+")
            if raw[1:2] != "+" and bare.lower() in fillers:
                raw, is_filler = bare, True
            else:
                continue
        if raw.startswith("+"):
            continue
        if re.match(r"0[^\W\d_]", raw):
            continue
        raw = raw.split("@", 1)[0]
        raw = raw.replace("(", "").replace(")", "").replace(":", "").replace("^", "")
        raw = raw.replace("&", "").replace("%", "")
        if not raw or raw.lower() in _UNINTELLIGIBLE:
            continue
        items.append(raw)
        flags.append(is_filler)
    return " ".join(items), flags, items


def parse_chat(text: str, subject_id: str, speakers=("PAR",), fillers=DEFAULT_FILLERS) -> Transcript:
    """Participant-tier speech from a CHAT transcript.

    Dependent tiers, timestamps, bracketed codes, event codes and
    unintelligible markers are removed. ``&-uh`` becomes ``uh`` and its
    token index is recorded in ``fillers_marked``.
    """
    prefixes = tuple(f"*{s}:" for s in speakers)
    tiers: list[str] = []
    keep = False
    for line in text.splitlines():
        if line.startswith(("\t", " ")):
            if keep and tiers:
                tiers[-1] += " " + line.strip()
            continue
        keep = line.startswith(prefixes)
        if keep:
            tiers.append(line.split(":", 1)[1])
    if not tiers:
        raise IngestError("empty participant speech")

    utterances: list[str] = []
    fillers_marked: list[int] = []
    offset = 0
    for tier in tiers:
        utt, flags, items = _clean_chat_line(tier, frozenset(fillers))
        n_tokens = 0
        for item, flag in zip(items, flags):
            toks = tokenize(item)
            if flag:
                fillers_marked.extend(range(offset + n_tokens, offset + n_tokens + len(toks)))
            n_tokens += len(toks)
        if n_tokens == 0:
            continue
        utterances.append(utt)
        offset += n_tokens
    if not utterances:
        raise IngestError("empty participant speech")
    return Transcript(subject_id, tuple(utterances), tuple(fillers_marked), "CHAT")


def parse_plain(text: str, subject_id: str) -> Transcript:
    """One utterance per non-blank line."""
    utterances = tuple(line.strip() for line in text.splitlines() if line.strip())
    if not utterances:
        raise IngestError("empty participant speech")
    return Transcript(subject_id, utterances, (), "plain")


def load_transcript(path, subject_id: str, speakers=("PAR",), fillers=DEFAULT_FILLERS) -> Transcript:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".cha":
        return parse_chat(text, subject_id, speakers=speakers, fillers=fillers)
    return parse_plain(text, subject_id)
