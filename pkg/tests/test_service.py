"""HTTP facade: endpoint contracts, cookie-carried state, snapshot restart."""

from __future__ import annotations

import json
import threading

import pytest
import requests

from bbe.ingest import GlobalStats
from bbe.model import EventKind, HistoryEvent, UserHistory
from bbe.persistence import decode_history, encode_history
from bbe.scoring import BannerEconomics, EngineConfig, SmoothingParams
from bbe.service import AdServer, AdService, ServiceConfig, load_config

RAW = SmoothingParams(kappa=0.0, prior_ctr=0.01)

ENGINE_CFG = EngineConfig(
    smoothing=RAW,
    economics={
        "b1": BannerEconomics(cpc=0.5),
        "b2": BannerEconomics(cpc=0.5),
    },
)


def make_service(stats=None, clock=lambda: 5000.0, **config_kwargs):
    config = ServiceConfig(engine=ENGINE_CFG, **config_kwargs)
    return AdService(config, stats=stats, clock=clock)


def favoring_stats():
    """Stats where the cookie's features give b2 a clearly higher value."""
    s = GlobalStats()
    for b in ("b1", "b2"):
        s.banner_imps[b] = 100
        s.banner_clicks[b] = 10
    s.imp_matrix[("kw:shoes", "b1")] = 50
    s.click_matrix[("kw:shoes", "b1")] = 1
    s.imp_matrix[("kw:shoes", "b2")] = 50
    s.click_matrix[("kw:shoes", "b2")] = 25
    return s


class TestSelect:
    def test_cold_start_singleton(self):
        service = make_service()
        status, body = service.handle_select(
            {"cookie": None, "candidates": ["b1"], "now": 1000}
        )
        assert status == 200
        assert body["banner"] == "b1"
        history = decode_history(body["cookie"])
        assert len(history.events) == 1
        imp = history.events[0]
        assert imp.kind is EventKind.IMPRESSION and imp.obj == "b1" and imp.time == 1000
        assert service.stats.banner_imps == {"b1": 1}

    def test_history_favoring_banner_wins_with_diagnostics(self):
        service = make_service(stats=favoring_stats())
        cookie = encode_history(
            UserHistory(
                user="u", events=(HistoryEvent(EventKind.SEARCH_QUERY, "shoes", 10),)
            )
        )
        status, body = service.handle_select(
            {"cookie": cookie, "candidates": ["b1", "b2"], "now": 1000}
        )
        assert status == 200
        assert body["banner"] == "b2"
        assert [s["banner"] for s in body["scores"]] == ["b1", "b2"]
        scores = {s["banner"]: s for s in body["scores"]}
        assert scores["b2"]["score"] > scores["b1"]["score"]
        assert scores["b2"]["val"] == pytest.approx(0.5, abs=1e-12)
        assert scores["b2"]["throttle"] == 1.0

    def test_empty_candidates_422(self):
        status, body = make_service().handle_select(
            {"cookie": None, "candidates": [], "now": 1}
        )
        assert status == 422

    def test_unknown_economics_422_names_banner(self):
        status, body = make_service().handle_select(
            {"cookie": None, "candidates": ["mystery"], "now": 1}
        )
        assert status == 422
        assert "mystery" in body["error"]

    def test_clicks_objective_skips_economics(self):
        status, body = make_service().handle_select(
            {"cookie": None, "candidates": ["mystery"], "now": 1, "objective": "clicks"}
        )
        assert status == 200

    def test_malformed_cookie_400(self):
        status, _ = make_service().handle_select(
            {"cookie": "{broken", "candidates": ["b1"], "now": 1}
        )
        assert status == 400

    def test_bad_objective_400(self):
        status, _ = make_service().handle_select(
            {"cookie": None, "candidates": ["b1"], "now": 1, "objective": "fame"}
        )
        assert status == 400

    def test_duplicate_candidates_400(self):
        status, _ = make_service().handle_select(
            {"cookie": None, "candidates": ["b1", "b1"], "now": 1}
        )
        assert status == 400

    def test_tsv_breaking_candidate_400(self):
        status, _ = make_service().handle_select(
            {"cookie": None, "candidates": ["b\t1"], "now": 1}
        )
        assert status == 400

    def test_negative_now_400(self):
        status, _ = make_service().handle_select(
            {"cookie": None, "candidates": ["b1"], "now": -5}
        )
        assert status == 400

    def test_server_clock_used_when_now_absent(self):
        service = make_service(clock=lambda: 777.0)
        status, body = service.handle_select({"cookie": None, "candidates": ["b1"]})
        assert status == 200
        assert decode_history(body["cookie"]).events[0].time == 777

    def test_impression_ingested_before_response(self):
        service = make_service(stats=favoring_stats())
        cookie = encode_history(
            UserHistory(
                user="u", events=(HistoryEvent(EventKind.SEARCH_QUERY, "shoes", 10),)
            )
        )
        before = service.stats.imp_matrix[("kw:shoes", "b2")]
        service.handle_select({"cookie": cookie, "candidates": ["b1", "b2"], "now": 1000})
        assert service.stats.imp_matrix[("kw:shoes", "b2")] == before + 1


class TestEvent:
    def test_click_updates_matrices_and_cookie(self):
        service = make_service()
        _, body = service.handle_select(
            {"cookie": None, "candidates": ["b1"], "now": 1000}
        )
        cookie = body["cookie"]
        # grant a feature, then click the served banner
        status, body = service.handle_event(
            {"cookie": cookie, "event": {"kind": "kw", "obj": "shoes", "time": 1001}}
        )
        assert status == 200
        status, body = service.handle_event(
            {"cookie": body["cookie"], "event": {"kind": "clk", "obj": "b1", "time": 1002}}
        )
        assert status == 200
        assert service.stats.click_matrix == {("kw:shoes", "b1"): 1}
        assert service.stats.banner_clicks == {"b1": 1}
        history = decode_history(body["cookie"])
        assert [e.kind for e in history.events] == [
            EventKind.IMPRESSION,
            EventKind.SEARCH_QUERY,
            EventKind.CLICK,
        ]

    def test_new_page_view_retro_credits(self):
        service = make_service()
        _, body = service.handle_select(
            {"cookie": None, "candidates": ["b1"], "now": 1000}
        )
        status, _ = service.handle_event(
            {
                "cookie": body["cookie"],
                "event": {"kind": "pv", "obj": "a.com/x", "time": 1001},
            }
        )
        assert status == 200
        assert service.stats.imp_matrix == {("pv:a.com/x", "b1"): 1}

    def test_registration_tallied(self):
        service = make_service()
        status, _ = service.handle_event(
            {"cookie": None, "event": {"kind": "reg:2", "obj": "b1", "time": 100}}
        )
        assert status == 200
        assert service.stats.banner_regs == {"b1": {2: 1}}

    def test_future_event_409(self):
        service = make_service(clock=lambda: 5000.0)
        status, _ = service.handle_event(
            {"cookie": None, "event": {"kind": "clk", "obj": "b1", "time": 15000}}
        )
        assert status == 409

    def test_event_within_skew_accepted(self):
        service = make_service(clock=lambda: 5000.0)
        status, _ = service.handle_event(
            {"cookie": None, "event": {"kind": "clk", "obj": "b1", "time": 5200}}
        )
        assert status == 200

    def test_malformed_event_400(self):
        service = make_service()
        for event in (
            {"kind": "zzz", "obj": "b1", "time": 1},
            {"kind": "clk", "obj": "", "time": 1},
            {"kind": "clk", "obj": "b1", "time": "soon"},
            "not a dict",
        ):
            status, _ = service.handle_event({"cookie": None, "event": event})
            assert status == 400


class TestStats:
    def test_empty_engine_zeroes(self):
        status, body = make_service().handle_stats()
        assert status == 200
        assert body == {"banners": 0, "features": 0, "cells": 0, "global": {}}

    def test_counts_after_one_impression(self):
        service = make_service()
        service.handle_select({"cookie": None, "candidates": ["b1"], "now": 1})
        status, body = service.handle_stats()
        assert body["banners"] == 1
        assert body["cells"] == 0  # no features yet
        assert body["global"]["b1"]["impressions"] == 1

    def test_snapshot_restart_is_byte_identical(self, tmp_path):
        path = str(tmp_path / "stats.snapshot")
        service = make_service(stats=favoring_stats(), snapshot_path=path)
        service.handle_event(
            {"cookie": None, "event": {"kind": "reg:1", "obj": "b1", "time": 10}}
        )
        before = json.dumps(service.handle_stats()[1], sort_keys=True)
        service.write_snapshot()
        reborn = make_service(snapshot_path=path)
        after = json.dumps(reborn.handle_stats()[1], sort_keys=True)
        assert after == before


@pytest.fixture()
def live_server():
    config = ServiceConfig(listen="127.0.0.1:0", engine=ENGINE_CFG)
    service = AdService(config, clock=lambda: 5000.0)
    server = AdServer(service)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://{server.address}", service
    finally:
        server.shutdown()
        thread.join(timeout=5)


class TestHttp:
    def test_select_event_stats_round(self, live_server):
        url, service = live_server
        r = requests.post(
            f"{url}/v1/select",
            json={"cookie": None, "candidates": ["b1", "b2"], "now": 1000},
            timeout=5,
        )
        assert r.status_code == 200
        body = r.json()
        assert body["banner"] in ("b1", "b2")

        r = requests.post(
            f"{url}/v1/event",
            json={
                "cookie": body["cookie"],
                "event": {"kind": "clk", "obj": body["banner"], "time": 1001},
            },
            timeout=5,
        )
        assert r.status_code == 200

        r = requests.get(f"{url}/v1/stats", timeout=5)
        assert r.status_code == 200
        stats = r.json()
        assert stats["global"][body["banner"]]["clicks"] == 1

    def test_unknown_path_404(self, live_server):
        url, _ = live_server
        assert requests.get(f"{url}/v1/nope", timeout=5).status_code == 404
        assert requests.post(f"{url}/v1/nope", json={}, timeout=5).status_code == 404

    def test_invalid_json_400(self, live_server):
        url, _ = live_server
        r = requests.post(
            f"{url}/v1/select",
            data="{nope",
            headers={"Content-Type": "application/json"},
            timeout=5,
        )
        assert r.status_code == 400


class TestConfig:
    def test_interval_must_be_positive(self):
        with pytest.raises(ValueError):
            ServiceConfig(snapshot_interval_seconds=0)

    def test_load_config_round_trip(self, tmp_path):
        path = tmp_path / "service.json"
        path.write_text(
            json.dumps(
                {
                    "listen": "127.0.0.1:9999",
                    "snapshot_path": "/tmp/x.snap",
                    "snapshot_interval_seconds": 5,
                    "max_cookie_events": 100,
                    "engine": {
                        "smoothing": {"kappa": 5, "prior_ctr": 0.02},
                        "throttle": {"alpha": 0.4, "half_life_seconds": 3600},
                        "unique_only": True,
                        "economics": {
                            "b1": {"cpc": 0.5, "imp_profit": 0.001, "reg_profit": {"1": 10.0}}
                        },
                    },
                }
            )
        )
        config = load_config(str(path))
        assert config.listen == "127.0.0.1:9999"
        assert config.max_cookie_events == 100
        assert config.engine.smoothing.kappa == 5
        assert config.engine.unique_only is True
        assert config.engine.economics["b1"].reg_profit == {1: 10.0}

    def test_cookie_truncation_respected(self):
        service = make_service(max_cookie_events=3)
        events = [["imp", "b1", t] for t in range(10)]
        blob = json.dumps({"v": 1, "u": "x", "e": events}, separators=(",", ":"))
        status, body = service.handle_select(
            {"cookie": blob, "candidates": ["b1"], "now": 100}
        )
        assert status == 200
        # 3 newest retained at decode, plus the fresh impression
        assert len(decode_history(body["cookie"], max_events=10).events) == 4
