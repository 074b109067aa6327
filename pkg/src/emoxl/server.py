"""JSON-over-HTTP chat endpoint on the standard-library threading server.

Routes:
    GET  /health      -> {"status": "ok"}
    GET  /model-info  -> {"vocab_size", "d_model", "n_heads", "emotions"}
    POST /chat        -> {"emotion_coarse", "emotion_probs", "response",
                          "token_count", "latency_ms"}

Every response carries ``Access-Control-Allow-Origin: *``.  Parameters are
shared read-only between request threads; with session mode enabled, each
session id owns a recurrence memory guarded by its own lock (one in-flight
request per session).
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .dataset import COARSE_LABELS
from .model import MemoryState
from .pipeline import ChatPipeline


class _Session:
    def __init__(self):
        self.lock = threading.Lock()
        self.mem: MemoryState | None = None


class ChatHandler(BaseHTTPRequestHandler):
    server_version = "emoxl"
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        if self.server.verbose:
            super().log_message(fmt, *args)

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self):  # CORS preflight for browser clients
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        if self.path == "/health":
            self._send(200, {"status": "ok"})
        elif self.path == "/model-info":
            cfg = self.server.pipeline.chatbot.config
            self._send(200, {
                "vocab_size": self.server.pipeline.chatbot_vocab.size,
                "d_model": cfg.d_model,
                "n_heads": cfg.n_heads,
                "emotions": list(COARSE_LABELS),
            })
        else:
            self._send(404, {"error": f"no such path: {self.path}"})

    def do_POST(self):
        if self.path != "/chat":
            self._send(404, {"error": f"no such path: {self.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length).decode("utf-8")) if length else {}
        except (ValueError, UnicodeDecodeError):
            self._send(400, {"error": "request body is not valid JSON"})
            return
        if not isinstance(body, dict):
            self._send(400, {"error": "request body must be a JSON object"})
            return
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            self._send(400, {"error": "field 'text' (non-empty string) is required"})
            return
        override = body.get("emotion_override")
        if override is not None and override not in COARSE_LABELS:
            self._send(400, {"error": f"emotion_override must be one of {list(COARSE_LABELS)}"})
            return
        session_id = body.get("session_id")
        if session_id is not None and not isinstance(session_id, str):
            self._send(400, {"error": "session_id must be a string"})
            return

        pipeline: ChatPipeline = self.server.pipeline
        if self.server.session_mode and session_id:
            session = self.server.get_session(session_id)
            with session.lock:
                result = pipeline.respond(text, override, mem=session.mem)
                session.mem = result.new_mem
        else:
            result = pipeline.respond(text, override)
        self._send(200, {
            "emotion_coarse": result.emotion_label,
            "emotion_probs": result.emotion_probs,
            "response": result.response_text,
            "token_count": result.token_count,
            "latency_ms": result.latency_ms,
        })


class ChatServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, pipeline: ChatPipeline, session_mode: bool = False,
                 verbose: bool = False):
        super().__init__(address, ChatHandler)
        self.pipeline = pipeline
        self.session_mode = session_mode
        self.verbose = verbose
        self._sessions: dict[str, _Session] = {}
        self._sessions_lock = threading.Lock()

    def get_session(self, session_id: str) -> _Session:
        with self._sessions_lock:
            if session_id not in self._sessions:
                self._sessions[session_id] = _Session()
            return self._sessions[session_id]


def make_server(pipeline: ChatPipeline, port: int, session_mode: bool = False,
                host: str = "127.0.0.1", verbose: bool = False) -> ChatServer:
    return ChatServer((host, port), pipeline, session_mode, verbose)
