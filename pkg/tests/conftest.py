import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


class MockLLM:
    """Local chat-completions endpoint answering from a scripted queue.

    Script entries are reply strings, ``{"status": int}`` for an HTTP error, or
    ``{"delay": seconds, "reply": str}`` to stall.
    """

    def __init__(self):
        self.script = []
        self.default = None
        self.requests = []
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *a):
                pass

            def do_POST(self):
                n = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(n))
                outer.requests.append({"path": self.path, "auth": self.headers.get("Authorization"), "body": body})
                entry = outer.script.pop(0) if outer.script else outer.default
                if isinstance(entry, dict) and "status" in entry:
                    self.send_response(entry["status"])
                    self.end_headers()
                    self.wfile.write(b"{}")
                    return
                if isinstance(entry, dict):
                    time.sleep(entry["delay"])
                    entry = entry.get("reply", "")
                if callable(entry):
                    entry = entry(body)
                payload = json.dumps({"choices": [{"message": {"role": "assistant", "content": entry}}]}).encode()
                try:
                    self.send_response(200)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(payload)))
                    self.end_headers()
                    self.wfile.write(payload)
                except (BrokenPipeError, ConnectionResetError):
                    pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}/v1"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def mock_llm(monkeypatch):
    monkeypatch.setenv("LLM_API_KEY", "test-key")
    srv = MockLLM()
    yield srv
    srv.close()


@pytest.fixture
def no_network(monkeypatch):
    """Any attempt to open a socket connection fails the test."""
    import socket

    attempts = []

    def refuse(self, *args, **kwargs):
        attempts.append(args)
        raise AssertionError(f"network access attempted: {args}")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket.socket, "connect_ex", refuse)
    monkeypatch.setattr(socket, "create_connection", lambda *a, **k: refuse(None, *a))
    return attempts
