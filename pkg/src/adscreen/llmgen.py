"""Keyword and golden-description generation against a chat-completions endpoint.

Every raw response is appended to a JSONL run log before anything else looks at
it; aggregation and curation only ever read that log.
"""
from __future__ import annotations

import base64
import csv
import json
import logging
import mimetypes
import os
import time
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import httpx

from .taskfeat import KeywordSet
from .textproc import stem, tokenize

log = logging.getLogger(__name__)

KEYWORD_PROMPT = (
    "Imagine you are an expert on cognitive assessment using Cookie Theft picture "
    "description task. You have the knowledge of the Cookie Theft picture and the key "
    "point to assess the AD. Now I will provide you with a sub-picture of the Cookie "
    "Theft picture, please give me some key content words related to that part. These "
    "words should be helpful for people to distinguish AD patients that the missing of "
    "the words may indicate potential cognitive impairment. Please only give the "
    "keywords list separated by comma without any further explanation."
)
DESCRIPTION_PROMPT = (
    "This is the picture of the Cookie Theft description task which is widely used for "
    "cognitive assessment. Now imagine that you are an elderly people with healthy "
    "cognitive state. Please give me a verbal description of this picture to cover as "
    "much content as possible in the picture."
)
PROMPTS = {"keywords": ("keywords-v1", KEYWORD_PROMPT), "descriptions": ("descriptions-v1", DESCRIPTION_PROMPT)}
DEFAULT_ITERATIONS = {"keywords": 50, "descriptions": 15}


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    endpoint_url: str = "https://api.openai.com/v1/chat/completions"
    model_name: str = "gpt-4o-2024-05-13"
    temperature: float = 1.0
    api_key_env: str = "OPENAI_API_KEY"
    max_retries: int = 3
    retry_backoff: float = 1.0
    timeout: float = 60.0
    parallelism: int = 1


@dataclass
class GenerationRun:
    kind: str
    prompt_template_id: str
    image_path: Optional[str]
    iterations: int
    endpoint_url: str
    model_name: str
    timestamp: str
    responses: list[str] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)


def encode_image(path) -> str:
    path = Path(path)
    mime = mimetypes.guess_type(path.name)[0] or "image/png"
    data = base64.b64encode(path.read_bytes()).decode("ascii")
    return f"data:{mime};base64,{data}"


def build_request(prompt: str, config: EndpointConfig, image_url: Optional[str] = None) -> dict:
    content = [{"type": "text", "text": prompt}]
    if image_url is not None:
        content.append({"type": "image_url", "image_url": {"url": image_url}})
    return {
        "model": config.model_name,
        "temperature": config.temperature,
        "messages": [{"role": "user", "content": content}],
    }


def _post(client: httpx.Client, config: EndpointConfig, payload: dict, api_key: str) -> str:
    last = None
    for attempt in range(config.max_retries + 1):
        try:
            resp = client.post(
                config.endpoint_url,
                json=payload,
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=config.timeout,
            )
            if resp.status_code == 429 or resp.status_code >= 500:
                raise httpx.HTTPStatusError(f"HTTP {resp.status_code}", request=resp.request, response=resp)
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except (httpx.TransportError, httpx.HTTPStatusError) as exc:
            last = exc
            status = getattr(getattr(exc, "response", None), "status_code", None)
            if status is not None and 400 <= status < 500 and status != 429:
                break
            if attempt < config.max_retries and config.retry_backoff > 0:
                time.sleep(config.retry_backoff * 2 ** attempt)
    raise GenerationError(str(last))


def generate(kind: str, iterations: int, config: EndpointConfig, log_path,
             image_path=None, client: Optional[httpx.Client] = None) -> GenerationRun:
    """Send ``iterations`` independent requests and append each outcome to ``log_path``."""
    if kind not in PROMPTS:
        raise ValueError(f"unknown generation kind {kind!r}")
    if kind == "keywords" and image_path is None:
        raise ValueError("keyword generation needs a sub-picture image")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    api_key = os.environ.get(config.api_key_env, "").strip()
    if not api_key:
        raise GenerationError(f"missing API key: set ${config.api_key_env}")

    template_id, prompt = PROMPTS[kind]
    image_url = encode_image(image_path) if image_path is not None else None
    payload = build_request(prompt, config, image_url)
    run = GenerationRun(
        kind=kind,
        prompt_template_id=template_id,
        image_path=str(image_path) if image_path is not None else None,
        iterations=iterations,
        endpoint_url=config.endpoint_url,
        model_name=config.model_name,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    log_path = Path(log_path)
    log_path.parent.mkdir(parents=True, exist_ok=True)
    owns_client = client is None
    client = client or httpx.Client()

    def one(i):
        try:
            return i, _post(client, config, payload, api_key), None
        except GenerationError as exc:
            return i, None, str(exc)

    try:
        with open(log_path, "a", encoding="utf-8") as fh:
            def record(i, text, error):
                rec = {
                    "iteration": i,
                    "kind": run.kind,
                    "prompt_template_id": run.prompt_template_id,
                    "image_path": run.image_path,
                    "iterations": run.iterations,
                    "endpoint_url": run.endpoint_url,
                    "model_name": run.model_name,
                    "run_timestamp": run.timestamp,
                    "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                    "ok": error is None,
                    "response": text,
                    "error": error,
                }
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
                fh.flush()
                if error is None:
                    run.responses.append(text)
                else:
                    log.warning("iteration %d failed: %s", i, error)
                    run.failures.append({"iteration": i, "error": error})

            if config.parallelism > 1:
                with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
                    futures = [pool.submit(one, i) for i in range(iterations)]
                    for fut in as_completed(futures):
                        record(*fut.result())
            else:
                for i in range(iterations):
                    record(*one(i))
    finally:
        if owns_client:
            client.close()

    if not run.responses:
        raise GenerationError(f"all {iterations} requests failed; see {log_path}")
    return run


def load_run(log_path) -> GenerationRun:
    """Rebuild a run from its JSONL log (the last run in the file)."""
    records = [json.loads(line) for line in Path(log_path).read_text(encoding="utf-8").splitlines() if line.strip()]
    if not records:
        raise GenerationError(f"run log {log_path} is empty")
    stamp = records[-1]["run_timestamp"]
    records = [r for r in records if r["run_timestamp"] == stamp]
    first = records[0]
    run = GenerationRun(
        kind=first["kind"],
        prompt_template_id=first["prompt_template_id"],
        image_path=first.get("image_path"),
        iterations=int(first["iterations"]),
        endpoint_url=first["endpoint_url"],
        model_name=first["model_name"],
        timestamp=stamp,
    )
    for r in sorted(records, key=lambda r: r["iteration"]):
        if r["ok"]:
            run.responses.append(r["response"])
        else:
            run.failures.append({"iteration": r["iteration"], "error": r["error"]})
    return run


# ---------------------------------------------------------------------------
# aggregation and curation

@dataclass(frozen=True)
class Candidate:
    keyword: str
    stem: str
    count: int
    frequency: float


def aggregate_keywords(run: GenerationRun, min_frequency: float = 0.1) -> list[Candidate]:
    """Response-level keyword frequencies, keyed by Porter stem.

    Each comma-separated item is tokenized; a stem counts at most once per
    response. The surface form shown is the most common one for the stem.
    """
    if run.kind != "keywords":
        raise ValueError("aggregation applies to keyword runs only")
    if not 0 < min_frequency <= 1:
        raise ValueError("min_frequency must be in (0, 1]")
    if not run.responses:
        raise ValueError("run has no responses")
    counts: Counter = Counter()
    surfaces: dict[str, Counter] = defaultdict(Counter)
    for response in run.responses:
        seen = set()
        for item in response.replace("\n", ",").split(","):
            for tok in tokenize(item.strip()):
                s = stem(tok)
                surfaces[s][tok] += 1
                seen.add(s)
        counts.update(seen)
    n = len(run.responses)
    out = []
    for s, c in counts.items():
        if c >= min_frequency * n:
            surface = min(surfaces[s].items(), key=lambda kv: (-kv[1], kv[0]))[0]
            out.append(Candidate(surface, s, c, c / n))
    out.sort(key=lambda cand: (-cand.count, cand.keyword))
    return out


def write_candidates(candidates, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["keyword", "stem", "count", "frequency"])
        for c in candidates:
            w.writerow([c.keyword, c.stem, c.count, f"{c.frequency:.6f}"])


def read_candidates(path) -> list[Candidate]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [Candidate(r["keyword"], r["stem"], int(r["count"]), float(r["frequency"]))
                for r in csv.DictReader(fh)]


def write_decision_template(candidates, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["keyword", "decision"])
        for c in candidates:
            w.writerow([c.keyword, ""])


def curate(candidates, decisions_file, set_id: int = 0, topic: str = "") -> KeywordSet:
    """Keep only candidates a reviewer accepted; every candidate needs a decision.

    ``decisions_file`` is a CSV with columns ``keyword,decision`` where the
    decision is ``accept`` or ``reject``.
    """
    decisions = {}
    with open(decisions_file, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            d = (row.get("decision") or "").strip().lower()
            if d:
                if d not in ("accept", "reject"):
                    raise ValueError(f"decision for {row['keyword']!r} must be accept or reject, got {d!r}")
                decisions[row["keyword"].strip().lower()] = d
    undecided = [c.keyword for c in candidates if c.keyword not in decisions]
    if undecided:
        raise ValueError(f"no decision for candidates: {', '.join(undecided)}")
    accepted = [c.keyword for c in candidates if decisions[c.keyword] == "accept"]
    if not accepted:
        raise ValueError("empty keyword set")
    return KeywordSet(set_id, tuple(accepted), topic)


def responses_to_reference_lines(run: GenerationRun) -> list[str]:
    """One line per description response, internal whitespace collapsed."""
    if run.kind != "descriptions":
        raise ValueError("reference files come from description runs")
    lines = [" ".join(r.split()) for r in run.responses]
    return [ln for ln in lines if ln]
