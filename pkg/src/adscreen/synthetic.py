"""Seeded synthetic Cookie Theft corpus for end-to-end checks.

Both groups describe the picture with the same sentence templates; HC
subjects fill most keyword slots with the picture's content words, AD
subjects mostly use vague substitutes and pause far more often. Files are written
as a mix of CHAT and plain text, with parse trees and noisy "ASR" copies.
"""
from __future__ import annotations

import csv
import random
import re
from dataclasses import dataclass
from pathlib import Path

# [keyword|vague substitute] slots; every bundled topic keyword appears somewhere
TEMPLATES = [
    "the [boy|kid] is [standing|up] on the [stool|chair]",
    "he is [reaching|going] up to [grab|get] a cookie from the [jar|box]",
    "the [stool|chair] is [tipping|moving] over",
    "the [girl|other one] is [looking|there] up at him",
    "she is [smiling|happy] but a bit [worried|funny]",
    "the [mother|lady] is [washing|doing] the [dishes|stuff] at the [sink|place]",
    "the [water|stuff] is [overflowing|coming out] onto the [floor|ground]",
    "she is [busy|there] and does not [turn|shut] the tap off",
    "the [cupboard|door] is open above them",
    "there is [soap|something] by the [counter|side]",
    "the [window|thing] has [curtains|cloth] and you can see [trees|stuff] outside",
    "it is [light|nice] outside today",
    "the [mom|lady] does not see it",
]
GENERIC = ["thing", "stuff", "something", "it", "that", "one", "them", "this", "there", "whatever"]
# off-topic chatter: no keywords, so hit rates ignore it while TF-IDF and BLEU get diluted
CHATTER_WORDS = (
    "my daughter used to bake on sundays we lived near the river back then "
    "grandson visits every week weather was cold last winter church garden "
    "neighbors dog barked radio played old songs sister married young farm "
    "cows chickens school teacher retired nineteen fifty train station "
    "husband worked factory shift bus downtown market bread milk doctor"
).split()
FILLERS = ["uh", "um", "er", "hmm"]
KEYWORD_RATE = {"HC": 0.9, "AD": 0.2}
FILLER_RATE = {"HC": 0.03, "AD": 0.15}


@dataclass
class Subject:
    subject_id: str
    label: str
    utterances: list[list[str]]
    filler_positions: list[set[int]]


def _fill(template: str, keyword_rate: float, rng: random.Random) -> list[str]:
    def pick(m):
        keyword, vague = m.group(1).split("|")
        if rng.random() < keyword_rate:
            return keyword
        return vague if rng.random() < 0.5 else rng.choice(GENERIC)
    return re.sub(r"\[([^\]]+)\]", pick, template).split()


def _insert_fillers(words, rate, rng):
    out, marks = [], set()
    for w in words:
        if rng.random() < rate:
            marks.add(len(out))
            out.append(rng.choice(FILLERS))
        out.append(w)
    return out, marks


def make_subject(subject_id: str, label: str, rng: random.Random) -> Subject:
    n = len(TEMPLATES)
    utts, marks = [], []
    sentences = [_fill(t, KEYWORD_RATE[label], rng) for t in rng.sample(TEMPLATES, n)]
    for _ in range(rng.randint(0, 12)):
        sentences.insert(rng.randrange(len(sentences) + 1), rng.sample(CHATTER_WORDS, rng.randint(4, 9)))
    for sentence in sentences:
        words, m = _insert_fillers(sentence, FILLER_RATE[label], rng)
        utts.append(words)
        marks.append(m)
    return Subject(subject_id, label, utts, marks)


def to_chat(s: Subject) -> str:
    lines = ["@UTF8", "@Begin", "@Participants:\tPAR Participant, INV Investigator",
             "*INV:\tjust tell me everything you see happening in the picture ."]
    t = 0
    for words, marks in zip(s.utterances, s.filler_positions):
        coded = [f"&-{w}" if i in marks else w for i, w in enumerate(words)]
        lines.append(f"*PAR:\t{' '.join(coded)} . \x15{t}_{t + 1500}\x15")
        lines.append(f"%mor:\t{' '.join('n|' + w for w in words)}")
        t += 1500
    lines.append("@End")
    return "\n".join(lines) + "\n"


def to_plain(s: Subject) -> str:
    return "".join(" ".join(words) + "\n" for words in s.utterances)


def to_tree(words) -> str:
    """Right-branching tree whose depth grows with utterance length."""
    words = [w.replace("'", "") or "x" for w in words]
    tree = f"(NN {words[-1]})"
    for w in reversed(words[:-1]):
        tree = f"(XP (W {w}) {tree})"
    return f"(ROOT (S {tree}))"


def to_asr(s: Subject, rng: random.Random) -> str:
    err = 0.1
    lines = []
    for words in s.utterances:
        out = []
        for w in words:
            r = rng.random()
            if r < err / 2:
                continue
            if r < err:
                out.append(rng.choice(["and", "the", "a", "it"]))
            else:
                out.append(w)
        lines.append(" ".join(out))
    return "\n".join(lines) + "\n"


def make_corpus(root, n_per_class: int = 60, seed: int = 0, test_fraction: float = 0.3):
    """Write transcripts, trees, ASR copies and ``train.csv`` / ``test.csv`` manifests.

    Returns (train manifest path, test manifest path).
    """
    root = Path(root)
    (root / "data").mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    subjects = []
    for label in ("HC", "AD"):
        for k in range(n_per_class):
            subjects.append(make_subject(f"{label}{k:03d}", label, rng))

    n_test = round(n_per_class * test_fraction)
    test_ids = set()
    for label in ("HC", "AD"):
        ids = [s.subject_id for s in subjects if s.label == label]
        test_ids.update(rng.sample(ids, n_test))

    rows = {"train": [], "test": []}
    for i, s in enumerate(subjects):
        ext = ".cha" if i % 2 == 0 else ".txt"
        text = to_chat(s) if ext == ".cha" else to_plain(s)
        (root / "data" / f"{s.subject_id}{ext}").write_text(text, encoding="utf-8")
        (root / "data" / f"{s.subject_id}.trees").write_text(
            "".join(to_tree(words) + "\n" for words in s.utterances), encoding="utf-8")
        (root / "data" / f"{s.subject_id}_asr.txt").write_text(to_asr(s, rng), encoding="utf-8")
        split = "test" if s.subject_id in test_ids else "train"
        rows[split].append([s.subject_id, s.label, f"data/{s.subject_id}{ext}",
                            f"data/{s.subject_id}_asr.txt", f"data/{s.subject_id}.trees"])

    paths = []
    for split in ("train", "test"):
        path = root / f"{split}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["subject_id", "label", "transcript", "asr", "trees"])
            w.writerows(rows[split])
        paths.append(path)
    return tuple(paths)
