"""Deterministic local stand-in for an external reasoning endpoint.

The server speaks the same JSON contract as :class:`ExternalPolicy` expects.
Each prompt id maps to a fixed action distribution; samples are drawn i.i.d.
from a generator seeded by ``sha256(prompt_id, seed)``, so a given request
always gets the same answer.
"""

from __future__ import annotations

import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Mapping, Optional, Sequence

import numpy as np


def sample_labels(weights: Mapping[str, float], labels: Sequence[str], prompt_id: str, seed: int, n: int) -> list[str]:
    probs = np.array([float(weights.get(label, 0.0)) for label in labels])
    probs = probs / probs.sum()
    digest = hashlib.sha256(f"{prompt_id}\x00{seed}".encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
    return [labels[i] for i in rng.choice(len(labels), size=n, p=probs)]


class StubPolicyServer:
    """Threaded HTTP server answering sampling requests from fixed tables.

    Args:
        distributions: prompt id to ``{label: weight}``; unknown ids fall back
            to ``default`` (uniform over the requested labels when ``None``).
        responses: optional prompt id to a fixed list of raw sample strings,
            returned verbatim (cycled to length). Handy for malformed replies.

    Use as a context manager; ``url`` is valid while it is running.
    """

    def __init__(
        self,
        distributions: Optional[Mapping[str, Mapping[str, float]]] = None,
        default: Optional[Mapping[str, float]] = None,
        responses: Optional[Mapping[str, Sequence[str]]] = None,
        host: str = "127.0.0.1",
        port: int = 0,
    ) -> None:
        self.distributions = dict(distributions or {})
        self.default = default
        self.responses = dict(responses or {})
        self.request_count = 0
        self._lock = threading.Lock()
        self._server = ThreadingHTTPServer((host, port), self._handler())
        self._server.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/"

    def answer(self, body: dict) -> list[str]:
        labels = list(body["action_labels"])
        n = int(body["n_samples"])
        pid = str(body["prompt_id"])
        if pid in self.responses:
            raw = list(self.responses[pid])
            return [raw[i % len(raw)] for i in range(n)]
        weights = self.distributions.get(pid, self.default)
        if weights is None:
            weights = {label: 1.0 for label in labels}
        return sample_labels(weights, labels, pid, int(body["seed"]), n)

    def _handler(self):
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self) -> None:  # noqa: N802 - http.server naming
                with stub._lock:
                    stub.request_count += 1
                length = int(self.headers.get("Content-Length", 0))
                try:
                    body = json.loads(self.rfile.read(length))
                    payload = json.dumps({"samples": stub.answer(body)}).encode()
                    status = 200
                except (KeyError, ValueError, TypeError) as err:
                    payload = json.dumps({"error": str(err)}).encode()
                    status = 400
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, format, *args) -> None:  # silence per-request stderr lines
                pass

        return Handler

    def start(self) -> StubPolicyServer:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self) -> StubPolicyServer:
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
