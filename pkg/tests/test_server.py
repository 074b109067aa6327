import hashlib
import threading
from concurrent.futures import ThreadPoolExecutor

import pytest
import requests

from emoxl.checkpoint import load_chatbot, load_classifier
from emoxl.dataset import COARSE_LABELS
from emoxl.pipeline import ChatPipeline
from emoxl.server import make_server


@pytest.fixture(scope="module")
def pipeline(trained_stack):
    clf, clf_vocab = load_classifier(trained_stack["classifier"])
    bot, bot_vocab = load_chatbot(trained_stack["chatbot"])
    return ChatPipeline(clf, clf_vocab, bot, bot_vocab)


@pytest.fixture()
def server_url(pipeline):
    server = make_server(pipeline, port=0, session_mode=True)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    thread.join(timeout=5)


def _checksum(pipeline):
    h = hashlib.sha256()
    for name in sorted(pipeline.classifier.named()):
        h.update(pipeline.classifier.named()[name].data.tobytes())
    for name in sorted(pipeline.chatbot.named()):
        h.update(pipeline.chatbot.named()[name].data.tobytes())
    return h.hexdigest()


class TestRoutes:
    def test_health(self, server_url):
        r = requests.get(f"{server_url}/health", timeout=10)
        assert r.status_code == 200
        assert r.json() == {"status": "ok"}
        assert r.headers["Access-Control-Allow-Origin"] == "*"

    def test_model_info(self, server_url, pipeline):
        r = requests.get(f"{server_url}/model-info", timeout=10)
        assert r.status_code == 200
        info = r.json()
        assert info["vocab_size"] == pipeline.chatbot_vocab.size
        assert info["d_model"] == pipeline.chatbot.config.d_model
        assert info["n_heads"] == pipeline.chatbot.config.n_heads
        assert info["emotions"] == list(COARSE_LABELS)

    def test_unknown_path_404(self, server_url):
        r = requests.get(f"{server_url}/nope", timeout=10)
        assert r.status_code == 404
        assert "error" in r.json()

    def test_options_preflight(self, server_url):
        r = requests.options(f"{server_url}/chat", timeout=10)
        assert r.status_code == 204
        assert r.headers["Access-Control-Allow-Origin"] == "*"


class TestChat:
    def test_basic_round_trip(self, server_url):
        r = requests.post(f"{server_url}/chat", json={"text": "i got a new job"},
                          timeout=30)
        assert r.status_code == 200
        body = r.json()
        assert body["emotion_coarse"] in COARSE_LABELS
        assert len(body["emotion_probs"]) == 8
        assert abs(sum(body["emotion_probs"]) - 1.0) < 1e-3
        assert isinstance(body["response"], str) and body["response"]
        assert body["token_count"] > 0
        assert isinstance(body["latency_ms"], int)

    def test_empty_body_400(self, server_url):
        r = requests.post(f"{server_url}/chat", json={}, timeout=10)
        assert r.status_code == 400
        assert "error" in r.json()
        assert r.headers["Access-Control-Allow-Origin"] == "*"

    def test_malformed_json_400(self, server_url):
        r = requests.post(f"{server_url}/chat", data=b"{not json",
                          headers={"Content-Type": "application/json"}, timeout=10)
        assert r.status_code == 400

    def test_non_object_body_400(self, server_url):
        r = requests.post(f"{server_url}/chat", json=["text"], timeout=10)
        assert r.status_code == 400

    def test_emotion_override_flows_through(self, server_url):
        r = requests.post(f"{server_url}/chat",
                          json={"text": "i was terrified all night",
                                "emotion_override": "grateful"}, timeout=30)
        assert r.status_code == 200
        assert r.json()["emotion_coarse"] == "grateful"

    def test_unknown_override_400(self, server_url):
        r = requests.post(f"{server_url}/chat",
                          json={"text": "hello", "emotion_override": "angry-ish"},
                          timeout=10)
        assert r.status_code == 400

    def test_detected_emotion_matches_classifier(self, server_url):
        r = requests.post(f"{server_url}/chat",
                          json={"text": "i was terrified all night"}, timeout=30)
        assert r.json()["emotion_coarse"] == "afraid"

    def test_identical_requests_identical_responses(self, server_url):
        def ask():
            return requests.post(f"{server_url}/chat",
                                 json={"text": "so thankful for my friend"},
                                 timeout=30).json()["response"]

        with ThreadPoolExecutor(max_workers=4) as pool:
            results = list(pool.map(lambda _: ask(), range(8)))
        assert len(set(results)) == 1

    def test_burst_does_not_mutate_parameters(self, server_url, pipeline):
        before = _checksum(pipeline)
        with ThreadPoolExecutor(max_workers=4) as pool:
            list(pool.map(
                lambda i: requests.post(f"{server_url}/chat",
                                        json={"text": f"message number {i}"},
                                        timeout=30),
                range(8)))
        assert _checksum(pipeline) == before

    def test_session_accumulates_memory(self, server_url, pipeline):
        for text in ("i planned the whole trip", "it felt really organized"):
            r = requests.post(f"{server_url}/chat",
                              json={"text": text, "session_id": "s-1"}, timeout=30)
            assert r.status_code == 200
        # reach into the server by asking again and checking stability instead
        r = requests.post(f"{server_url}/chat",
                          json={"text": "ready for it", "session_id": "s-1"}, timeout=30)
        assert r.status_code == 200

    def test_session_memory_changes_response_state(self, pipeline):
        server = make_server(pipeline, port=0, session_mode=True)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        url = f"http://127.0.0.1:{server.server_address[1]}"
        try:
            requests.post(f"{url}/chat", json={"text": "i was so thrilled",
                                               "session_id": "abc"}, timeout=30)
            session = server.get_session("abc")
            assert session.mem is not None and session.mem.n_rows > 0
        finally:
            server.shutdown()
            thread.join(timeout=5)

    def test_stateless_without_session_id(self, pipeline):
        server = make_server(pipeline, port=0, session_mode=False)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        url = f"http://127.0.0.1:{server.server_address[1]}"
        try:
            a = requests.post(f"{url}/chat", json={"text": "i was so thrilled"},
                              timeout=30).json()["response"]
            b = requests.post(f"{url}/chat", json={"text": "i was so thrilled"},
                              timeout=30).json()["response"]
            assert a == b
            assert not server._sessions
        finally:
            server.shutdown()
            thread.join(timeout=5)
