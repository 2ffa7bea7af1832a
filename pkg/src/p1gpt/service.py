"""Human-in-the-loop review service.

Persistence is an append-only JSON-lines journal: every enqueue and
every resolution is one line, flushed before acknowledgment, and a
restart replays the journal to reconstruct exactly the pre-crash state.
No database.

The HTTP layer is a thin read-model plus one mutation:

    GET  /runs                     completed runs with metric summaries
    GET  /runs/{id}                config snapshot + metrics
    GET  /runs/{id}/equity         stored equity.csv
    GET  /runs/{id}/signals        non-Hold executed trades as CSV
    GET  /runs/{id}/reports/{date} stored investment report
    GET  /pending                  pending decision queue
    POST /pending/{id}/resolve     {action, new_action?, note?, operator_id}

Errors are JSON {code, message}. Localhost use only; no authentication.
"""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import unquote

APPROVE = "approve"
OVERRIDE = "override"


class ConflictError(ValueError):
    """Duplicate enqueue or double resolution."""


class NotFoundError(KeyError):
    pass


@dataclass
class Resolution:
    action: str  # executed action (Buy/Sell/Hold)
    operator_id: str
    note: str
    resolved_at: str
    kind: str  # approve | override | expire


@dataclass
class PendingDecision:
    id: str
    run_id: str
    ticker: str
    date: str
    proposed: dict
    status: str = "pending"  # pending | approved | overridden | expired
    resolution: Resolution | None = None

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "run_id": self.run_id,
            "ticker": self.ticker,
            "date": self.date,
            "proposed": self.proposed,
            "status": self.status,
        }
        if self.resolution is not None:
            d["resolution"] = {
                "action": self.resolution.action,
                "operator_id": self.resolution.operator_id,
                "note": self.resolution.note,
                "resolved_at": self.resolution.resolved_at,
                "kind": self.resolution.kind,
            }
        return d


class DecisionQueue:
    """Journal-backed pending-decision store; single writer, many readers."""

    def __init__(self, journal_path):
        self.journal_path = str(journal_path)
        self._items: dict[str, PendingDecision] = {}
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._replay()
        self._journal = open(self.journal_path, "a", encoding="utf-8")

    def _replay(self):
        if not os.path.exists(self.journal_path):
            return
        with open(self.journal_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn tail write from a crash; ignore
                self._apply(event)

    def _apply(self, event: dict):
        kind = event.get("event")
        if kind == "enqueue":
            item = PendingDecision(
                id=event["id"],
                run_id=event["run_id"],
                ticker=event["ticker"],
                date=event["date"],
                proposed=event["proposed"],
            )
            self._items[item.id] = item
        elif kind in ("resolve", "expire"):
            item = self._items.get(event["id"])
            if item is None:
                return
            item.status = event["status"]
            item.resolution = Resolution(
                action=event["action"],
                operator_id=event.get("operator_id", ""),
                note=event.get("note", ""),
                resolved_at=event.get("resolved_at", ""),
                kind=event.get("kind", kind),
            )

    def _append(self, event: dict):
        self._journal.write(json.dumps(event, sort_keys=True, separators=(",", ":")) + "\n")
        self._journal.flush()
        os.fsync(self._journal.fileno())

    # -- operations --------------------------------------------------------

    def enqueue(self, proposed: dict, run_id: str) -> str:
        """Queue a proposed decision; id is deterministic in (run, ticker, date)."""
        ticker = proposed["ticker"]
        date = proposed["date"]
        pid = f"{run_id}:{ticker}:{date}"
        with self._cond:
            if pid in self._items:
                raise ConflictError(f"decision already enqueued: {pid}")
            event = {
                "event": "enqueue",
                "id": pid,
                "run_id": run_id,
                "ticker": ticker,
                "date": date,
                "proposed": proposed,
            }
            self._append(event)
            self._apply(event)
            self._cond.notify_all()
        return pid

    def resolve(
        self,
        pid: str,
        action: str,
        operator_id: str,
        new_action: str | None = None,
        note: str | None = None,
    ) -> PendingDecision:
        """Approve or override a pending decision."""
        with self._cond:
            item = self._items.get(pid)
            if item is None:
                raise NotFoundError(pid)
            if item.status != "pending":
                raise ConflictError(f"{pid} already {item.status}")
            if action == APPROVE:
                executed = item.proposed["action"]
                status = "approved"
                note = note or ""
            elif action == OVERRIDE:
                if not new_action:
                    raise ValueError("override requires new_action")
                if not note:
                    raise ValueError("override requires a note")
                if new_action == item.proposed["action"]:
                    raise ValueError("override must change the action")
                executed = new_action
                status = "overridden"
            else:
                raise ValueError(f"unknown resolution action: {action!r}")
            event = {
                "event": "resolve",
                "id": pid,
                "status": status,
                "kind": action,
                "action": executed,
                "operator_id": operator_id,
                "note": note,
                "resolved_at": datetime.now(timezone.utc).isoformat(),
            }
            self._append(event)
            self._apply(event)
            self._cond.notify_all()
            return self._items[pid]

    def expire(self, pid: str) -> PendingDecision:
        """Timeout path: executed action becomes Hold."""
        with self._cond:
            item = self._items.get(pid)
            if item is None:
                raise NotFoundError(pid)
            if item.status != "pending":
                return item
            event = {
                "event": "expire",
                "id": pid,
                "status": "expired",
                "kind": "expire",
                "action": "Hold",
                "operator_id": "",
                "note": "expired: no operator resolution in time",
                "resolved_at": datetime.now(timezone.utc).isoformat(),
            }
            self._append(event)
            self._apply(event)
            self._cond.notify_all()
            return self._items[pid]

    def get(self, pid: str) -> PendingDecision:
        with self._lock:
            item = self._items.get(pid)
            if item is None:
                raise NotFoundError(pid)
            return item

    def pending(self) -> list[PendingDecision]:
        with self._lock:
            return [i for i in self._items.values() if i.status == "pending"]

    def all_items(self) -> list[PendingDecision]:
        with self._lock:
            return list(self._items.values())

    def wait_for(self, pid: str, timeout: float | None = None) -> PendingDecision | None:
        """Block until pid leaves pending; None on timeout."""
        deadline = None if timeout is None else datetime.now(timezone.utc).timestamp() + timeout
        with self._cond:
            while True:
                item = self._items.get(pid)
                if item is not None and item.status in ("approved", "overridden"):
                    return item
                if item is not None and item.status == "expired":
                    return None
                remaining = None
                if deadline is not None:
                    remaining = deadline - datetime.now(timezone.utc).timestamp()
                    if remaining <= 0:
                        return None
                self._cond.wait(timeout=remaining)

    def close(self):
        with self._lock:
            self._journal.close()


# -- HTTP layer ----------------------------------------------------------------

_ROUTES = [
    ("GET", re.compile(r"^/runs$"), "list_runs"),
    ("GET", re.compile(r"^/runs/([^/]+)$"), "get_run"),
    ("GET", re.compile(r"^/runs/([^/]+)/equity$"), "get_equity"),
    ("GET", re.compile(r"^/runs/([^/]+)/signals$"), "get_signals"),
    ("GET", re.compile(r"^/runs/([^/]+)/reports/([^/]+)$"), "get_report"),
    ("GET", re.compile(r"^/pending$"), "list_pending"),
    ("POST", re.compile(r"^/pending/([^/]+)/resolve$"), "resolve"),
]


class ReviewApp:
    """Route handlers over the runs directory and the decision queue."""

    def __init__(self, runs_root, queue: DecisionQueue):
        self.runs_root = str(runs_root)
        self.queue = queue

    def _run_dir(self, run_id: str) -> str:
        path = os.path.normpath(os.path.join(self.runs_root, run_id))
        if os.path.dirname(path) != os.path.normpath(self.runs_root) or not os.path.isdir(path):
            raise NotFoundError(run_id)
        return path

    def list_runs(self) -> tuple[int, object]:
        out = []
        if os.path.isdir(self.runs_root):
            for name in sorted(os.listdir(self.runs_root)):
                mpath = os.path.join(self.runs_root, name, "metrics.json")
                if not os.path.isfile(mpath):
                    continue
                with open(mpath, encoding="utf-8") as fh:
                    metrics = json.load(fh)
                out.append({"run_id": name, "metrics": metrics})
        return 200, {"runs": out}

    def get_run(self, run_id: str) -> tuple[int, object]:
        run_dir = self._run_dir(run_id)
        payload = {"run_id": run_id}
        cpath = os.path.join(run_dir, "config.snapshot")
        if os.path.isfile(cpath):
            with open(cpath, encoding="utf-8") as fh:
                payload["config"] = json.load(fh)
        mpath = os.path.join(run_dir, "metrics.json")
        if os.path.isfile(mpath):
            with open(mpath, encoding="utf-8") as fh:
                payload["metrics"] = json.load(fh)
        dates = []
        rdir = os.path.join(run_dir, "reports")
        if os.path.isdir(rdir):
            dates = sorted(f[:-4] for f in os.listdir(rdir) if f.endswith(".txt"))
        payload["report_dates"] = dates
        return 200, payload

    def get_equity(self, run_id: str) -> tuple[int, object]:
        path = os.path.join(self._run_dir(run_id), "equity.csv")
        if not os.path.isfile(path):
            raise NotFoundError(f"{run_id}/equity")
        with open(path, encoding="utf-8") as fh:
            return 200, ("text/csv", fh.read())

    def get_signals(self, run_id: str) -> tuple[int, object]:
        """Derived from the tradelog: single source, no duplicate state."""
        path = os.path.join(self._run_dir(run_id), "tradelog.jsonl")
        if not os.path.isfile(path):
            raise NotFoundError(f"{run_id}/tradelog")
        lines = ["date,action,price"]
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                raw = raw.strip()
                if not raw:
                    continue
                entry = json.loads(raw)
                if entry.get("executed") != "Hold":
                    lines.append(f"{entry['date']},{entry['executed']},{entry['price']!r}")
        return 200, ("text/csv", "\n".join(lines) + "\n")

    def get_report(self, run_id: str, date: str) -> tuple[int, object]:
        if not re.match(r"^\d{4}-\d{2}-\d{2}$", date):
            raise NotFoundError(date)
        path = os.path.join(self._run_dir(run_id), "reports", f"{date}.txt")
        if not os.path.isfile(path):
            raise NotFoundError(f"{run_id}/reports/{date}")
        with open(path, encoding="utf-8") as fh:
            return 200, ("text/plain", fh.read())

    def list_pending(self) -> tuple[int, object]:
        return 200, {"pending": [i.to_dict() for i in self.queue.pending()]}

    def resolve(self, pid: str, body: dict) -> tuple[int, object]:
        item = self.queue.resolve(
            pid,
            action=body.get("action", ""),
            operator_id=body.get("operator_id", ""),
            new_action=body.get("new_action"),
            note=body.get("note"),
        )
        return 200, item.to_dict()


class _Handler(BaseHTTPRequestHandler):
    app: ReviewApp = None  # injected by make_server

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, payload, content_type="application/json"):
        if isinstance(payload, tuple):  # (content_type, raw text)
            content_type, payload = payload
            body = payload.encode("utf-8")
        else:
            body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, code: str, message: str):
        self._send(status, {"code": code, "message": message})

    def _dispatch(self, method: str):
        path = self.path.split("?", 1)[0].rstrip("/") or "/"
        for verb, pattern, name in _ROUTES:
            if verb != method:
                continue
            m = pattern.match(path)
            if not m:
                continue
            handler = getattr(self.app, name)
            # clients may percent-encode segment characters (":" in ids)
            args = [unquote(g) for g in m.groups()]
            if method == "POST":
                length = int(self.headers.get("Content-Length") or 0)
                try:
                    body = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError:
                    return self._error(400, "bad_request", "request body is not valid JSON")
                args.append(body)
            try:
                status, payload = handler(*args)
                return self._send(status, payload)
            except NotFoundError as exc:
                return self._error(404, "not_found", str(exc))
            except ConflictError as exc:
                return self._error(409, "conflict", str(exc))
            except ValueError as exc:
                return self._error(400, "bad_request", str(exc))
        return self._error(404, "not_found", f"no route for {method} {path}")

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()


def make_server(host: str, port: int, app: ReviewApp) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"app": app})
    return ThreadingHTTPServer((host, port), handler)
