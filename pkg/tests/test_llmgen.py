import json

import httpx
import pytest
from hypothesis import given, strategies as st

from adscreen.llmgen import (
    DEFAULT_ITERATIONS, EndpointConfig, GenerationError, GenerationRun, aggregate_keywords,
    build_request, curate, generate, load_run, read_candidates, responses_to_reference_lines,
    write_candidates, write_decision_template,
)

URL = "http://llm.test/v1/chat/completions"
CFG = EndpointConfig(endpoint_url=URL, api_key_env="TEST_LLM_KEY", retry_backoff=0.0, max_retries=2)


def reply(text):
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


def mock_client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def make_run(responses, kind="keywords"):
    return GenerationRun(kind, f"{kind}-v1", None, len(responses), URL, "m", "t0", list(responses))


@pytest.fixture
def key(monkeypatch):
    monkeypatch.setenv("TEST_LLM_KEY", "sk-test")


@pytest.fixture
def image(tmp_path):
    p = tmp_path / "sub1.png"
    p.write_bytes(b"\x89PNG\r\n\x1a\nfake")
    return p


def test_defaults():
    assert DEFAULT_ITERATIONS == {"keywords": 50, "descriptions": 15}
    assert EndpointConfig().model_name == "gpt-4o-2024-05-13"
    assert EndpointConfig().temperature == 1.0


def test_request_shape(key, image, tmp_path):
    seen = []

    def handler(request):
        seen.append((request.headers["authorization"], json.loads(request.content)))
        return reply("boy, jar, stool")

    run = generate("keywords", 3, CFG, tmp_path / "run.jsonl", image, mock_client(handler))
    assert run.responses == ["boy, jar, stool"] * 3
    auth, body = seen[0]
    assert auth == "Bearer sk-test"
    assert body["model"] == "gpt-4o-2024-05-13" and body["temperature"] == 1.0
    parts = body["messages"][0]["content"]
    assert parts[0]["type"] == "text" and "Cookie Theft" in parts[0]["text"]
    assert parts[1]["image_url"]["url"].startswith("data:image/png;base64,")


def test_description_run_has_no_image():
    body = build_request("describe", EndpointConfig())
    assert len(body["messages"][0]["content"]) == 1


def test_missing_key_before_any_request(monkeypatch, tmp_path):
    monkeypatch.delenv("TEST_LLM_KEY", raising=False)
    calls = []

    def handler(request):
        calls.append(1)
        return reply("x")

    with pytest.raises(GenerationError, match="TEST_LLM_KEY"):
        generate("descriptions", 2, CFG, tmp_path / "r.jsonl", client=mock_client(handler))
    assert calls == []
    assert not (tmp_path / "r.jsonl").exists()


def test_keywords_need_image(key, tmp_path):
    with pytest.raises(ValueError):
        generate("keywords", 1, CFG, tmp_path / "r.jsonl", client=mock_client(lambda r: reply("x")))


def test_retry_then_success(key, tmp_path):
    statuses = iter([429, 503, 200])

    def handler(request):
        code = next(statuses)
        return reply("the boy") if code == 200 else httpx.Response(code)

    run = generate("descriptions", 1, CFG, tmp_path / "r.jsonl", client=mock_client(handler))
    assert run.responses == ["the boy"]


def test_unreachable_endpoint(key, tmp_path):
    attempts = []

    def handler(request):
        attempts.append(1)
        raise httpx.ConnectError("refused", request=request)

    with pytest.raises(GenerationError, match="all 2 requests failed"):
        generate("descriptions", 2, CFG, tmp_path / "r.jsonl", client=mock_client(handler))
    assert len(attempts) == 2 * (CFG.max_retries + 1)
    records = [json.loads(x) for x in (tmp_path / "r.jsonl").read_text().splitlines()]
    assert [r["ok"] for r in records] == [False, False]


def test_client_error_not_retried(key, tmp_path):
    attempts = []

    def handler(request):
        attempts.append(1)
        return httpx.Response(401)

    with pytest.raises(GenerationError):
        generate("descriptions", 1, CFG, tmp_path / "r.jsonl", client=mock_client(handler))
    assert len(attempts) == 1


def test_partial_failures_logged(key, tmp_path):
    n = iter(range(100))

    def handler(request):
        return httpx.Response(400) if next(n) % 2 else reply("a girl")

    run = generate("descriptions", 4, CFG, tmp_path / "r.jsonl", client=mock_client(handler))
    assert len(run.responses) == 2 and len(run.failures) == 2


def test_log_persistence_and_offline_reaggregation(key, image, tmp_path):
    answers = iter(["boy, cookie jar", "Boys, stool", "boy, stool, mother"])
    log = tmp_path / "r.jsonl"
    run = generate("keywords", 3, CFG, log, image, mock_client(lambda r: reply(next(answers))))
    first = aggregate_keywords(run)
    assert [r["iteration"] for r in map(json.loads, log.read_text().splitlines())] == [0, 1, 2]
    # a second run appended later does not disturb the first run's records
    generate("keywords", 1, CFG, tmp_path / "other.jsonl", image, mock_client(lambda r: reply("window")))
    reloaded = load_run(log)
    assert reloaded.responses == run.responses
    assert aggregate_keywords(reloaded) == first
    assert (first[0].keyword, first[0].count) == ("boy", 3)


def test_parallel_generation(key, tmp_path):
    cfg = EndpointConfig(endpoint_url=URL, api_key_env="TEST_LLM_KEY", parallelism=4)
    run = generate("descriptions", 8, cfg, tmp_path / "r.jsonl", client=mock_client(lambda r: reply("the boy")))
    assert len(run.responses) == 8
    assert sorted(r["iteration"] for r in map(json.loads, (tmp_path / "r.jsonl").read_text().splitlines())) == list(range(8))


def test_aggregation_examples():
    out = aggregate_keywords(make_run(["boy, jar"] * 50), min_frequency=1.0)
    assert [(c.keyword, c.count, c.frequency) for c in out] == [("boy", 50, 1.0), ("jar", 50, 1.0)]
    rare = make_run(["boy"] * 49 + ["boy, kite"])
    assert [c.keyword for c in aggregate_keywords(rare, min_frequency=0.2)] == ["boy"]
    norm = aggregate_keywords(make_run(["boy, jar", "Boy , jar"]))
    assert [(c.keyword, c.count) for c in norm] == [("boy", 2), ("jar", 2)]
    with pytest.raises(ValueError):
        aggregate_keywords(make_run(["a"], kind="descriptions"))


@given(st.lists(st.lists(st.sampled_from(["boy", "Boys", "jar", "sink", "mother", "stool"]), max_size=5)
                .map(", ".join), min_size=1, max_size=20), st.floats(0.01, 1.0))
def test_aggregation_properties(responses, thr):
    out = aggregate_keywords(make_run(responses), thr)
    assert all(c.count <= len(responses) for c in out)
    assert [(-c.count, c.keyword) for c in out] == sorted((-c.count, c.keyword) for c in out)
    assert len({c.stem for c in out}) == len(out)


def test_candidates_roundtrip(tmp_path):
    cands = aggregate_keywords(make_run(["boy, jar", "boy"]))
    write_candidates(cands, tmp_path / "c.csv")
    assert read_candidates(tmp_path / "c.csv") == cands


def test_curate(tmp_path):
    cands = aggregate_keywords(make_run(["boy, jar, kite", "boy, jar"]))
    d = tmp_path / "d.csv"
    d.write_text("keyword,decision\nboy,accept\njar,accept\nkite,accept\n")
    assert curate(cands, d, 7, "T1").words == ("boy", "jar", "kite")
    d.write_text("keyword,decision\nboy,accept\njar,reject\n")
    with pytest.raises(ValueError, match="no decision for candidates: kite"):
        curate(cands, d)
    d.write_text("keyword,decision\nboy,reject\njar,reject\nkite,reject\n")
    with pytest.raises(ValueError, match="empty keyword set"):
        curate(cands, d)
    write_decision_template(cands, d)
    with pytest.raises(ValueError, match="no decision"):
        curate(cands, d)


def test_reference_lines():
    run = make_run(["The boy\n  is on a stool.", "  ", "A girl."], kind="descriptions")
    assert responses_to_reference_lines(run) == ["The boy is on a stool.", "A girl."]
