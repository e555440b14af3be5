"""HTTP facade: banner selection and event ingestion for webservers.

Endpoints (HTTP/1.1, JSON bodies):

    POST /v1/select   {"cookie": blob|null, "candidates": [ids],
                       "now": epoch-seconds (optional),
                       "objective": "clicks"|"profit"|"profit_plus" (optional)}
                      -> {"banner": id, "scores": [...], "cookie": blob}
    POST /v1/event    {"cookie": blob|null, "event": {"kind","obj","time"}}
                      -> {"cookie": blob}
    GET  /v1/stats    -> {"banners","features","cells","global"}

Per-user state travels in the cookie blob the client returns on each call;
the server holds only the global stats.  The served impression is ingested
before the response is written, so the returned cookie already contains it.
"""

from __future__ import annotations

import argparse
import json
import os
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

from .ingest import GlobalStats, ingest
from .model import EventKind, HistoryEvent, UserHistory
from .persistence import (
    DEFAULT_MAX_COOKIE_EVENTS,
    CookieError,
    decode_history,
    encode_history,
    restore,
    snapshot,
)
from .scoring import BannerEconomics, EngineConfig, SmoothingParams, ThrottleParams
from .selector import Objective, SelectionError, SelectionRequest, select_banner

DEFAULT_LISTEN = "127.0.0.1:8765"
MAX_EVENT_SKEW_SECONDS = 300
ANONYMOUS_USER = "anon"


@dataclass
class ServiceConfig:
    listen: str = DEFAULT_LISTEN
    engine: EngineConfig = field(default_factory=EngineConfig)
    snapshot_path: str | None = None
    snapshot_interval_seconds: int = 60
    max_cookie_events: int = DEFAULT_MAX_COOKIE_EVENTS

    def __post_init__(self) -> None:
        if self.snapshot_interval_seconds <= 0:
            raise ValueError("snapshot_interval_seconds must be > 0")
        if self.max_cookie_events <= 0:
            raise ValueError("max_cookie_events must be > 0")


def load_config(path: str) -> ServiceConfig:
    """Read a ServiceConfig from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    engine_raw = raw.get("engine", {})
    economics = {
        banner: BannerEconomics(
            cpc=float(econ.get("cpc", 0.0)),
            imp_profit=float(econ.get("imp_profit", 0.0)),
            reg_profit={int(k): float(v) for k, v in econ.get("reg_profit", {}).items()},
        )
        for banner, econ in engine_raw.get("economics", {}).items()
    }
    engine = EngineConfig(
        smoothing=SmoothingParams(**engine_raw.get("smoothing", {})),
        throttle=ThrottleParams(**engine_raw.get("throttle", {})),
        unique_only=bool(engine_raw.get("unique_only", False)),
        use_counter_weights=bool(engine_raw.get("use_counter_weights", False)),
        economics=economics,
    )
    return ServiceConfig(
        listen=raw.get("listen", DEFAULT_LISTEN),
        engine=engine,
        snapshot_path=raw.get("snapshot_path"),
        snapshot_interval_seconds=int(raw.get("snapshot_interval_seconds", 60)),
        max_cookie_events=int(raw.get("max_cookie_events", DEFAULT_MAX_COOKIE_EVENTS)),
    )


class BadRequest(ValueError):
    pass


class SkewedEvent(ValueError):
    pass


_WIRE_KINDS = {
    "imp": EventKind.IMPRESSION,
    "clk": EventKind.CLICK,
    "pv": EventKind.PAGE_VIEW,
    "kw": EventKind.SEARCH_QUERY,
}


def _require_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise BadRequest(f"{name} must be an integer")
    return value


class AdService:
    """The application behind the HTTP handlers.

    Handlers are plain dict-in / (status, dict)-out functions so the HTTP
    layer stays a thin adapter and tests can drive the service without a
    socket.  A single lock serializes stats access: selections therefore
    always read a consistent, current snapshot.
    """

    def __init__(
        self,
        config: ServiceConfig | None = None,
        stats: GlobalStats | None = None,
        clock: Callable[[], float] = time.time,
    ):
        self.config = config or ServiceConfig()
        self.clock = clock
        self._lock = threading.Lock()
        if stats is not None:
            self.stats = stats
        elif self.config.snapshot_path and os.path.exists(self.config.snapshot_path):
            with open(self.config.snapshot_path, "rb") as fh:
                self.stats = restore(fh.read())
        else:
            self.stats = GlobalStats()

    # -- request handlers -------------------------------------------------

    def handle_select(self, body) -> tuple[int, dict]:
        try:
            history, candidates, now, objective = self._parse_select(body)
        except CookieError as exc:
            return 400, {"error": str(exc)}
        except BadRequest as exc:
            return 400, {"error": str(exc)}
        if not candidates:
            return 422, {"error": "candidate list is empty"}
        try:
            request = SelectionRequest(
                history=history, candidates=tuple(candidates), now=now, objective=objective
            )
        except ValueError as exc:
            return 400, {"error": str(exc)}
        with self._lock:
            try:
                result = select_banner(self.stats, request, self.config.engine)
            except SelectionError as exc:
                return 422, {"error": str(exc)}
            except ValueError as exc:
                return 400, {"error": str(exc)}
            impression = HistoryEvent(kind=EventKind.IMPRESSION, obj=result.winner, time=now)
            self.stats, history = ingest(self.stats, history, impression, self.config.engine)
        return 200, {
            "banner": result.winner,
            "scores": [
                {"banner": s.banner, "val": s.val, "throttle": s.throttle, "score": s.score}
                for s in result.scored
            ],
            "cookie": encode_history(history),
        }

    def handle_event(self, body) -> tuple[int, dict]:
        try:
            history, event = self._parse_event(body)
        except (CookieError, BadRequest) as exc:
            return 400, {"error": str(exc)}
        except SkewedEvent as exc:
            return 409, {"error": str(exc)}
        with self._lock:
            self.stats, history = ingest(self.stats, history, event, self.config.engine)
        return 200, {"cookie": encode_history(history)}

    def handle_stats(self) -> tuple[int, dict]:
        with self._lock:
            stats = self.stats
            banners = set(stats.banner_imps) | set(stats.banner_clicks) | set(stats.banner_regs)
            features = {f for f, _ in stats.imp_matrix} | {f for f, _ in stats.click_matrix}
            cells = set(stats.imp_matrix) | set(stats.click_matrix)
            per_banner = {
                banner: {
                    "impressions": stats.banner_imps.get(banner, 0),
                    "clicks": stats.banner_clicks.get(banner, 0),
                    "registrations": {
                        str(level): count
                        for level, count in sorted(stats.banner_regs.get(banner, {}).items())
                    },
                }
                for banner in sorted(banners)
            }
        return 200, {
            "banners": len(banners),
            "features": len(features),
            "cells": len(cells),
            "global": per_banner,
        }

    # -- parsing ----------------------------------------------------------

    def _decode_cookie(self, blob) -> UserHistory:
        if blob is None:
            return UserHistory(user=ANONYMOUS_USER)
        if not isinstance(blob, str):
            raise BadRequest("cookie must be a string or null")
        return decode_history(blob, max_events=self.config.max_cookie_events)

    def _parse_select(self, body):
        if not isinstance(body, dict):
            raise BadRequest("request body must be a JSON object")
        history = self._decode_cookie(body.get("cookie"))
        candidates = body.get("candidates")
        if not isinstance(candidates, list) or not all(
            isinstance(c, str) and c and not any(ch in c for ch in "\t\n\r")
            for c in candidates
        ):
            raise BadRequest("candidates must be a list of non-empty banner ids")
        now = body.get("now")
        now = int(self.clock()) if now is None else _require_int(now, "now")
        if now < 0:
            raise BadRequest("now must be >= 0")
        objective_raw = body.get("objective", Objective.PROFIT.value)
        try:
            objective = Objective(objective_raw)
        except ValueError:
            raise BadRequest(f"unknown objective {objective_raw!r}") from None
        return history, candidates, now, objective

    def _parse_event(self, body):
        if not isinstance(body, dict):
            raise BadRequest("request body must be a JSON object")
        history = self._decode_cookie(body.get("cookie"))
        raw = body.get("event")
        if not isinstance(raw, dict):
            raise BadRequest("event must be a JSON object")
        tag = raw.get("kind")
        if not isinstance(tag, str):
            raise BadRequest("event kind must be a string")
        level = None
        if tag.startswith("reg:"):
            if not tag[4:].isdigit():
                raise BadRequest(f"bad registration tag {tag!r}")
            kind, level = EventKind.REGISTRATION, int(tag[4:])
        elif tag in _WIRE_KINDS:
            kind = _WIRE_KINDS[tag]
        else:
            raise BadRequest(f"unknown event kind {tag!r}")
        now = int(self.clock())
        event_time = raw.get("time")
        event_time = now if event_time is None else _require_int(event_time, "event time")
        if event_time > now + MAX_EVENT_SKEW_SECONDS:
            raise SkewedEvent(
                f"event time {event_time} is more than {MAX_EVENT_SKEW_SECONDS}s ahead of now {now}"
            )
        try:
            event = HistoryEvent(kind=kind, obj=raw.get("obj"), time=event_time, level=level)
        except ValueError as exc:
            raise BadRequest(str(exc)) from None
        return history, event

    # -- snapshots ----------------------------------------------------------

    def write_snapshot(self, path: str | None = None) -> str:
        """Write the current stats snapshot atomically; returns the path."""
        target = path or self.config.snapshot_path
        if not target:
            raise ValueError("no snapshot path configured")
        with self._lock:
            data = snapshot(self.stats)
        tmp = target + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, target)
        return target


class _Handler(BaseHTTPRequestHandler):
    def _reply(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self):
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length)
        try:
            return json.loads(raw)
        except ValueError:
            return None

    def do_POST(self) -> None:  # noqa: N802 - http.server naming
        body = self._read_body()
        if body is None:
            self._reply(400, {"error": "request body must be valid JSON"})
        elif self.path == "/v1/select":
            self._reply(*self.server.service.handle_select(body))
        elif self.path == "/v1/event":
            self._reply(*self.server.service.handle_event(body))
        else:
            self._reply(404, {"error": f"unknown path {self.path}"})

    def do_GET(self) -> None:  # noqa: N802
        if self.path == "/v1/stats":
            self._reply(*self.server.service.handle_stats())
        else:
            self._reply(404, {"error": f"unknown path {self.path}"})

    def log_message(self, fmt, *args) -> None:  # silence per-request stderr noise
        pass


class AdServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, service: AdService):
        host, _, port = service.config.listen.rpartition(":")
        super().__init__((host or "127.0.0.1", int(port)), _Handler)
        self.service = service
        self._stop = threading.Event()
        self._snapshot_thread: threading.Thread | None = None
        if service.config.snapshot_path:
            self._snapshot_thread = threading.Thread(
                target=self._snapshot_loop, daemon=True
            )
            self._snapshot_thread.start()

    @property
    def address(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def _snapshot_loop(self) -> None:
        interval = self.service.config.snapshot_interval_seconds
        while not self._stop.wait(interval):
            self.service.write_snapshot()

    def shutdown(self) -> None:
        self._stop.set()
        super().shutdown()
        if self.service.config.snapshot_path:
            self.service.write_snapshot()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="bbe-serve", description=__doc__)
    parser.add_argument("--config", help="path to the JSON service config", default=None)
    args = parser.parse_args(argv)
    config = load_config(args.config) if args.config else ServiceConfig()
    listen = os.environ.get("BBE_LISTEN")
    if listen:
        config.listen = listen
    server = AdServer(AdService(config))
    print(f"bbe: serving on http://{server.address}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
