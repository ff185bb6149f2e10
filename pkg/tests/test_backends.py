from __future__ import annotations

import json

import pytest

from goalact.backends import (
    BENCHMARK_TEMPERATURE,
    CassetteRecorder,
    CassetteReplayBackend,
    CompletionRequest,
    HttpChatBackend,
    Message,
    Rule,
    ScriptedBackend,
    load_rules_file,
    request_hash,
    save_rules_file,
    strip_code_fences,
    user_request,
)
from goalact.errors import AuthFailure, BackendUnavailable, CassetteMiss, RuleMiss


def _req(text: str, model: str = "scripted") -> CompletionRequest:
    return user_request(text, model=model)


# --- scripted backend ------------------------------------------------------------

def test_substring_rule_requires_every_key():
    backend = ScriptedBackend([
        Rule.on_substrings("both", "alpha", "beta"),
        Rule.on_substrings("only-alpha", "alpha"),
    ])
    assert backend.complete(_req("alpha and beta together")) == "both"
    assert backend.complete(_req("alpha alone")) == "only-alpha"


def test_first_matching_rule_wins_in_listing_order():
    backend = ScriptedBackend([
        Rule.on_substrings("specific", "needle", "haystack"),
        Rule.on_substrings("generic", "needle"),
    ])
    assert backend.complete(_req("needle in a haystack")) == "specific"
    assert backend.complete(_req("just a needle")) == "generic"


def test_matcher_precedence_ordinal_hash_substring():
    request = _req("the quick brown fox")
    backend = ScriptedBackend([
        Rule(response="by-substring", substrings=("quick",)),
        Rule(response="by-hash", prompt_hash=request_hash(request)),
        Rule(response="by-ordinal", ordinal=1),
    ])
    assert backend.complete(request) == "by-ordinal"
    # second call: no ordinal match, hash wins over substring
    assert backend.complete(request) == "by-hash"
    other = _req("quick but different")
    assert backend.complete(other) == "by-substring"


def test_rule_miss_is_a_hard_error_naming_the_closest_rule():
    backend = ScriptedBackend([
        Rule.on_substrings("a", "alpha", "beta", name="pair-rule"),
    ])
    with pytest.raises(RuleMiss) as exc_info:
        backend.complete(_req("alpha only"))
    assert "pair-rule" in str(exc_info.value)


def test_request_hash_normalizes_whitespace():
    a = CompletionRequest(messages=(Message("user", "hello   world"),),
                          model="m")
    b = CompletionRequest(messages=(Message("user", "hello\n world"),),
                          model="m")
    c = CompletionRequest(messages=(Message("user", "hello world!"),),
                          model="m")
    assert request_hash(a) == request_hash(b)
    assert request_hash(a) != request_hash(c)


def test_benchmark_temperature_defaults_to_zero():
    assert _req("anything").temperature == BENCHMARK_TEMPERATURE == 0.0


# --- HTTP backend -----------------------------------------------------------------

def _ok_body(text: str) -> str:
    return json.dumps({"choices": [{"message": {"content": text}}]})


class _SequenceTransport:
    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.calls = 0

    def __call__(self, url, headers, body, timeout):
        self.calls += 1
        outcome = self.outcomes.pop(0)
        if isinstance(outcome, Exception):
            raise outcome
        return outcome


def _client(transport, **kwargs) -> HttpChatBackend:
    sleeps: list[float] = kwargs.pop("sleeps", [])
    return HttpChatBackend(endpoint="https://example.test/v1", api_key="k",
                           model="m", transport=transport,
                           sleeper=sleeps.append, **kwargs)


def test_http_retries_429_then_succeeds():
    transport = _SequenceTransport([(429, "slow down"), (200, _ok_body("hi"))])
    sleeps: list[float] = []
    client = HttpChatBackend(endpoint="https://example.test/v1", api_key="k",
                             model="m", transport=transport,
                             sleeper=sleeps.append)
    assert client.complete(_req("x", model="m")) == "hi"
    assert client.last_attempts == 2
    assert transport.calls == 2
    assert len(sleeps) == 1


def test_http_backoff_grows_exponentially():
    transport = _SequenceTransport([(500, ""), (503, ""), (200, _ok_body("ok"))])
    sleeps: list[float] = []
    client = HttpChatBackend(endpoint="https://example.test/v1", api_key="k",
                             model="m", transport=transport,
                             backoff_base=0.5, sleeper=sleeps.append)
    client.complete(_req("x", model="m"))
    assert sleeps == [0.5, 1.0]


def test_http_gives_up_after_the_attempt_budget():
    transport = _SequenceTransport([(503, "")] * 4)
    client = HttpChatBackend(endpoint="https://example.test/v1", api_key="k",
                             model="m", transport=transport, max_attempts=4,
                             sleeper=lambda s: None)
    with pytest.raises(BackendUnavailable):
        client.complete(_req("x", model="m"))
    assert client.last_attempts == 4


def test_http_auth_failures_never_retry():
    transport = _SequenceTransport([(401, "no")])
    client = HttpChatBackend(endpoint="https://example.test/v1", api_key="k",
                             model="m", transport=transport,
                             sleeper=lambda s: None)
    with pytest.raises(AuthFailure):
        client.complete(_req("x", model="m"))
    assert transport.calls == 1


def test_http_retries_connection_errors():
    transport = _SequenceTransport([ConnectionError("reset"),
                                    (200, _ok_body("back"))])
    client = HttpChatBackend(endpoint="https://example.test/v1", api_key="k",
                             model="m", transport=transport,
                             sleeper=lambda s: None)
    assert client.complete(_req("x", model="m")) == "back"


def test_http_token_bucket_throttles():
    transport = _SequenceTransport([(200, _ok_body("a")), (200, _ok_body("b"))])
    sleeps: list[float] = []
    clock = iter([0.0, 0.0, 1.0, 1.0, 1.0, 1.0]).__next__
    client = HttpChatBackend(endpoint="https://example.test/v1", api_key="k",
                             model="m", transport=transport,
                             requests_per_minute=1, sleeper=sleeps.append,
                             clock=clock)
    client.complete(_req("x", model="m"))
    client.complete(_req("y", model="m"))
    assert sleeps and sleeps[0] == pytest.approx(59.0)


# --- cassettes ----------------------------------------------------------------------

def test_record_then_replay_without_network(tmp_path):
    cassette = tmp_path / "session.jsonl"
    transport = _SequenceTransport([(200, _ok_body(f"answer-{i}"))
                                    for i in range(5)])
    live = HttpChatBackend(endpoint="https://example.test/v1", api_key="k",
                           model="m", transport=transport,
                           sleeper=lambda s: None)
    recorder = CassetteRecorder(live, cassette)
    prompts = [f"question {i}" for i in range(5)]
    recorded = [recorder.complete(_req(p, model="m")) for p in prompts]
    assert transport.calls == 5

    replay = CassetteReplayBackend(cassette)
    replayed = [replay.complete(_req(p, model="m")) for p in prompts]
    assert replayed == recorded
    assert transport.calls == 5  # nothing new went over the wire


def test_replay_misses_on_changed_prompt(tmp_path):
    cassette = tmp_path / "session.jsonl"
    live = HttpChatBackend(endpoint="https://example.test/v1", api_key="k",
                           model="m",
                           transport=_SequenceTransport([(200, _ok_body("a"))]),
                           sleeper=lambda s: None)
    CassetteRecorder(live, cassette).complete(_req("original", model="m"))
    replay = CassetteReplayBackend(cassette)
    with pytest.raises(CassetteMiss):
        replay.complete(_req("changed", model="m"))


def test_empty_cassette_misses_immediately(tmp_path):
    replay = CassetteReplayBackend(tmp_path / "missing.jsonl")
    with pytest.raises(CassetteMiss):
        replay.complete(_req("anything"))


def test_recorded_run_replays_to_an_identical_trajectory(tmp_path):
    """Record a live run once, then replay it entirely from the cassette."""
    from goalact.generator import generate_khop_task
    from goalact.oracle import oracle_backend
    from goalact.orchestrator import RunConfig, run_task
    from goalact.plan import encode_trajectory

    task, env = generate_khop_task(seed=61, k=2)
    oracle = oracle_backend(task)

    class _OracleTransport:
        """Fake chat-completions endpoint answered by the oracle rules."""

        def __init__(self):
            self.calls = 0

        def __call__(self, url, headers, body, timeout):
            self.calls += 1
            doc = json.loads(body.decode("utf-8"))
            request = CompletionRequest(
                messages=tuple(Message(m["role"], m["content"])
                               for m in doc["messages"]),
                model=doc["model"], temperature=doc["temperature"])
            return 200, _ok_body(oracle.complete(request))

    transport = _OracleTransport()
    live = HttpChatBackend(endpoint="https://example.test/v1", api_key="k",
                           model="m", transport=transport,
                           sleeper=lambda s: None)
    cassette = tmp_path / "run.jsonl"
    recorded = run_task(task, env, RunConfig(method="GoalAct"),
                        CassetteRecorder(live, cassette))
    live_calls = transport.calls
    assert live_calls > 0

    replay = CassetteReplayBackend(cassette)
    replayed = run_task(task, env, RunConfig(method="GoalAct"), replay)
    assert transport.calls == live_calls  # nothing new went over the wire
    assert encode_trajectory(replayed) == encode_trajectory(recorded)


def test_two_scripted_runs_yield_byte_identical_trajectories():
    from goalact.generator import generate_writing_task
    from goalact.oracle import oracle_backend
    from goalact.orchestrator import RunConfig, run_task
    from goalact.plan import encode_trajectory

    task, env = generate_writing_task(seed=62)
    first = run_task(task, env, RunConfig(method="GoalAct"),
                     oracle_backend(task))
    second = run_task(task, env, RunConfig(method="GoalAct"),
                      oracle_backend(task))
    assert encode_trajectory(first) == encode_trajectory(second)


# --- misc -----------------------------------------------------------------------------

def test_rules_file_round_trip(tmp_path):
    rules = [
        Rule.on_substrings("r1", "alpha", "beta", name="pair"),
        Rule(response="r2", ordinal=3, name="third-call"),
        Rule(response="r3", prompt_hash="ab" * 32),
    ]
    path = tmp_path / "rules.jsonl"
    save_rules_file(rules, path)
    assert load_rules_file(path) == rules


def test_strip_code_fences_variants():
    body = '[{"a": 1}]'
    assert strip_code_fences(f"```json\n{body}\n```") == body
    assert strip_code_fences(f"```\n{body}\n```") == body
    assert strip_code_fences(body) == body
    assert strip_code_fences(f"  {body}  ") == body
