"""Minimal JSON-over-HTTP front end for an immutable loaded graph."""
from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .packet import packet_dict, render_read_first
from .pipeline import Engine
from .retrieval import RetrievalError, TaskRequest

log = logging.getLogger("skillforge.server")

MAX_BODY = 1 << 20


class BadRequest(ValueError):
    pass


def _parse_task(body: bytes) -> tuple[TaskRequest, dict | None]:
    try:
        data = json.loads(body.decode("utf-8") or "{}")
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BadRequest(f"invalid JSON body: {exc}") from exc
    if not isinstance(data, dict):
        raise BadRequest("body must be a JSON object")
    task = data.get("task")
    if not isinstance(task, str) or not task.strip():
        raise BadRequest("'task' must be a non-empty string")
    task_id = data.get("task_id") or ""
    if not isinstance(task_id, str):
        raise BadRequest("'task_id' must be a string")
    contract = data.get("contract")
    if contract is not None and not isinstance(contract, dict):
        raise BadRequest("'contract' must be an object")
    return TaskRequest(task, task_id=task_id), contract


def handle(engine: Engine, fingerprint: str, method: str, path: str, body: bytes) -> tuple[int, dict]:
    """Route one request; returns (status, JSON body). Never raises."""
    try:
        if method == "GET" and path == "/v1/health":
            return 200, {"status": "ok", "graph": fingerprint}
        if method == "POST" and path == "/v1/retrieve":
            task, _ = _parse_task(body)
            return 200, engine.retrieve(task).to_dict()
        if method == "POST" and path == "/v1/compile":
            task, contract = _parse_task(body)
            out = engine.run(task, contract=contract)
            payload = packet_dict(out.context)
            payload["read_first"] = render_read_first(out.context)
            return 200, payload
        if path in ("/v1/health", "/v1/retrieve", "/v1/compile"):
            return 405, {"error": f"method {method} not allowed"}
        return 404, {"error": f"no route {path}"}
    except (BadRequest, RetrievalError) as exc:
        return 400, {"error": str(exc)}
    except Exception as exc:  # keep serving
        log.exception("request failed")
        return 500, {"error": f"{type(exc).__name__}: {exc}"}


def make_server(engine: Engine, host: str = "127.0.0.1", port: int = 8765) -> ThreadingHTTPServer:
    fingerprint = engine.graph.fingerprint()

    class Handler(BaseHTTPRequestHandler):
        def _respond(self, method: str) -> None:
            length = int(self.headers.get("Content-Length") or 0)
            if length > MAX_BODY:
                status, payload = 413, {"error": "request body too large"}
            else:
                body = self.rfile.read(length) if length else b""
                status, payload = handle(engine, fingerprint, method, self.path.split("?", 1)[0], body)
            data = (json.dumps(payload, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            self._respond("GET")

        def do_POST(self):
            self._respond("POST")

        def log_message(self, fmt, *args):
            log.info("%s %s", self.address_string(), fmt % args)

    server = ThreadingHTTPServer((host, port), Handler)
    server.daemon_threads = True
    return server
