import json
import math
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from hdlagent.errors import BackendError
from hdlagent.llm import (
    ChatRequest,
    CompletionResult,
    EchoBackend,
    HttpBackend,
    RecordingBackend,
    ReplayBackend,
    ScriptedBackend,
    TokenLedger,
    complete,
    estimate_tokens,
)


def test_request_validation():
    with pytest.raises(ValueError):
        ChatRequest("")
    with pytest.raises(ValueError):
        ChatRequest("x", temperature=-0.1)
    with pytest.raises(ValueError):
        ChatRequest("x", max_output_tokens=0)


def test_digest_covers_model_system_user_temperature():
    base = ChatRequest("hi", model="m", temperature=0.7, system_text="s")
    assert base.digest() == ChatRequest("hi", model="m", temperature=0.7, system_text="s").digest()
    assert base.digest() == ChatRequest("hi", model="m", temperature=0.7, system_text="s", max_output_tokens=9).digest()
    for other in (
        ChatRequest("hi!", model="m", temperature=0.7, system_text="s"),
        ChatRequest("hi", model="n", temperature=0.7, system_text="s"),
        ChatRequest("hi", model="m", temperature=0.2, system_text="s"),
        ChatRequest("hi", model="m", temperature=0.7),
    ):
        assert other.digest() != base.digest()


@pytest.mark.parametrize("chars", [1, 4, 1001])
def test_estimator_is_ceil_chars_over_four(chars):
    req = ChatRequest("x" * chars)
    result = complete(ScriptedBackend(["y" * (chars + 2)]), req)
    assert result.tokens_estimated
    assert result.prompt_tokens == math.ceil(chars / 4) == estimate_tokens(chars)
    assert result.completion_tokens == math.ceil((chars + 2) / 4)


def test_reported_usage_is_used_verbatim():
    result = complete(ScriptedBackend([("text", (11, 7))]), ChatRequest("q"))
    assert (result.prompt_tokens, result.completion_tokens, result.tokens_estimated) == (11, 7, False)


def test_retry_schedule():
    slept = []
    backend = ScriptedBackend([BackendError("rate_limited"), BackendError("network"), "ok"])
    assert complete(backend, ChatRequest("q"), sleep=slept.append).text == "ok"
    assert slept == [1.0, 2.0]


def test_retries_give_up_after_three():
    slept = []
    backend = ScriptedBackend([BackendError("network")] * 4 + ["never"])
    with pytest.raises(BackendError) as info:
        complete(backend, ChatRequest("q"), sleep=slept.append)
    assert info.value.kind == "network" and slept == [1.0, 2.0, 4.0]


def test_http_status_is_not_retried():
    slept = []
    backend = ScriptedBackend([BackendError("http_status", "HTTP 500"), "ok"])
    with pytest.raises(BackendError):
        complete(backend, ChatRequest("q"), sleep=slept.append)
    assert slept == []


def test_scripted_exhaustion():
    with pytest.raises(BackendError) as info:
        complete(ScriptedBackend([]), ChatRequest("q"))
    assert info.value.kind == "malformed_response"


def test_scripted_from_file(tmp_path):
    path = tmp_path / "r.json"
    path.write_text(json.dumps(["a", {"text": "b", "prompt_tokens": 3, "completion_tokens": 4}]))
    backend = ScriptedBackend.from_file(path)
    assert complete(backend, ChatRequest("q")).text == "a"
    assert complete(backend, ChatRequest("q")).total_tokens == 7


def test_echo():
    assert complete(EchoBackend(), ChatRequest("hello")).text == "hello"


def test_record_then_replay(tmp_path):
    cassette = tmp_path / "c.jsonl"
    rec = RecordingBackend(ScriptedBackend([("one", (5, 6)), "two"]), cassette)
    r1 = complete(rec, ChatRequest("first", model="m"))
    r2 = complete(rec, ChatRequest("second", model="m"))
    replay = ReplayBackend(cassette)
    assert complete(replay, ChatRequest("first", model="m")) == r1
    assert complete(replay, ChatRequest("second", model="m")) == r2
    assert r2.tokens_estimated
    with pytest.raises(BackendError) as info:
        complete(replay, ChatRequest("third", model="m"))
    assert info.value.kind == "malformed_response"


def test_replay_first_entry_wins(tmp_path):
    cassette = tmp_path / "c.jsonl"
    rec = RecordingBackend(ScriptedBackend(["first", "second"]), cassette)
    complete(rec, ChatRequest("same"))
    complete(rec, ChatRequest("same"))
    assert complete(ReplayBackend(cassette), ChatRequest("same")).text == "first"


def test_concurrent_recording_keeps_lines_whole(tmp_path):
    cassette = tmp_path / "c.jsonl"
    rec = RecordingBackend(ScriptedBackend([f"reply {i} " * 200 for i in range(40)]), cassette)
    threads = [threading.Thread(target=complete, args=(rec, ChatRequest(f"q{i}"))) for i in range(40)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    lines = cassette.read_text().splitlines()
    assert len(lines) == 40
    assert all(json.loads(line)["digest"] for line in lines)


def test_ledger():
    ledger = TokenLedger()
    ledger.record("initial", CompletionResult("a", 10, 2))
    ledger.record("repair", CompletionResult("b", 20, 3, True))
    assert (ledger.prompt_tokens, ledger.completion_tokens, ledger.total_tokens) == (30, 5, 35)
    assert TokenLedger.from_dict(ledger.to_dict()) == ledger


class _Handler(BaseHTTPRequestHandler):
    responses = []
    seen = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).seen.append((self.path, dict(self.headers), body))
        status, payload = type(self).responses.pop(0)
        raw = payload.encode() if isinstance(payload, str) else json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    _Handler.responses, _Handler.seen = [], []
    httpd = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_port}/v1", _Handler
    httpd.shutdown()


def _ok(text, usage=None):
    body = {"choices": [{"message": {"role": "assistant", "content": text}}]}
    if usage:
        body["usage"] = {"prompt_tokens": usage[0], "completion_tokens": usage[1]}
    return 200, body


def test_http_wire_format(server, monkeypatch):
    url, handler = server
    monkeypatch.setenv("HDLAGENT_API_KEY", "sk-test")
    handler.responses.append(_ok("module m; endmodule", (12, 4)))
    backend = HttpBackend(url, "some-model")
    req = ChatRequest("user text", model="some-model", temperature=0.7, system_text="sys")
    result = complete(backend, req)
    assert result == CompletionResult("module m; endmodule", 12, 4)
    path, headers, body = handler.seen[0]
    assert path == "/v1/chat/completions"
    assert headers["Authorization"] == "Bearer sk-test"
    assert body == {
        "model": "some-model",
        "messages": [{"role": "system", "content": "sys"}, {"role": "user", "content": "user text"}],
        "temperature": 0.7,
        "max_tokens": 4096,
    }


def test_http_missing_usage_is_estimated(server):
    url, handler = server
    handler.responses.append(_ok("abcdefgh"))
    result = complete(HttpBackend(url, "m", api_key=""), ChatRequest("12345", model="m"))
    assert result.tokens_estimated and result.prompt_tokens == 2 and result.completion_tokens == 2


@pytest.mark.parametrize(
    "status,payload,kind",
    [
        (500, {"error": "boom"}, "http_status"),
        (401, {"error": "nope"}, "http_status"),
        (200, {"choices": []}, "malformed_response"),
        (200, "not json", "malformed_response"),
    ],
)
def test_http_errors(server, status, payload, kind):
    url, handler = server
    handler.responses.append((status, payload))
    with pytest.raises(BackendError) as info:
        complete(HttpBackend(url, "m", api_key=""), ChatRequest("q", model="m"), sleep=lambda s: None)
    assert info.value.kind == kind


def test_http_429_then_success(server):
    url, handler = server
    handler.responses += [(429, {"error": "slow down"}), _ok("fine", (1, 1))]
    slept = []
    result = complete(HttpBackend(url, "m", api_key=""), ChatRequest("q", model="m"), sleep=slept.append)
    assert result.text == "fine" and slept == [1.0]


def test_http_network_error():
    backend = HttpBackend("http://127.0.0.1:9", "m", api_key="", timeout=2)
    with pytest.raises(BackendError) as info:
        complete(backend, ChatRequest("q", model="m"), sleep=lambda s: None)
    assert info.value.kind == "network"
