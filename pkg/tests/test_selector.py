"""Winner selection: argmax semantics, tie-breaking, and invariances."""

from __future__ import annotations

import numpy as np
import pytest

from bbe.ingest import GlobalStats
from bbe.model import EventKind, HistoryEvent, UserHistory
from bbe.scoring import (
    BannerEconomics,
    EngineConfig,
    SmoothingParams,
    score,
    score_plus,
)
from bbe.selector import (
    MissingEconomicsError,
    NoCandidatesError,
    Objective,
    SelectionRequest,
    select_banner,
)

RAW = SmoothingParams(kappa=0.0, prior_ctr=0.01)


def fixture_stats():
    """Stats where banner "hi" carries val 0.6 and "lo" val 0.6 as well;
    cpc separates them (0.3 vs 0.6 scores, from the scoring fixtures)."""
    s = GlobalStats()
    for b in ("hi", "lo"):
        s.banner_imps[b] = 100
        s.banner_clicks[b] = 10
        s.imp_matrix[("kw:f one", b)] = 20
        s.imp_matrix[("kw:f two", b)] = 20
        s.click_matrix[("kw:f one", b)] = 4
        s.click_matrix[("kw:f two", b)] = 6
    return s


def fixture_history():
    return UserHistory(
        user="u",
        events=(
            HistoryEvent(EventKind.SEARCH_QUERY, "f one", 1),
            HistoryEvent(EventKind.SEARCH_QUERY, "f two", 2),
        ),
    )


FIXTURE_CFG = EngineConfig(
    smoothing=RAW,
    economics={"hi": BannerEconomics(cpc=1.0), "lo": BannerEconomics(cpc=0.5)},
)


class TestSelectBanner:
    def test_singleton(self):
        req = SelectionRequest(
            history=fixture_history(), candidates=("lo",), now=100, objective=Objective.PROFIT
        )
        res = select_banner(fixture_stats(), req, FIXTURE_CFG)
        assert res.winner == "lo"
        assert not res.tie_broken
        assert len(res.scored) == 1

    def test_higher_score_wins(self):
        req = SelectionRequest(
            history=fixture_history(),
            candidates=("lo", "hi"),
            now=100,
            objective=Objective.PROFIT,
        )
        res = select_banner(fixture_stats(), req, FIXTURE_CFG)
        assert res.winner == "hi"
        by_banner = {s.banner: s for s in res.scored}
        assert by_banner["lo"].score == pytest.approx(0.3, abs=1e-12)
        assert by_banner["hi"].score == pytest.approx(0.6, abs=1e-12)

    def test_diagnostics_cover_all_candidates_in_request_order(self):
        req = SelectionRequest(
            history=fixture_history(),
            candidates=("lo", "hi"),
            now=100,
            objective=Objective.PROFIT,
        )
        res = select_banner(fixture_stats(), req, FIXTURE_CFG)
        assert [s.banner for s in res.scored] == ["lo", "hi"]
        assert res.winner in {s.banner for s in res.scored}
        assert max(s.score for s in res.scored) == next(
            s.score for s in res.scored if s.banner == res.winner
        )

    def test_bitwise_tie_breaks_lexicographically(self):
        cfg = EngineConfig(
            economics={"b": BannerEconomics(cpc=0.5), "a": BannerEconomics(cpc=0.5)}
        )
        req = SelectionRequest(
            history=UserHistory(user="u"), candidates=("b", "a"), now=100,
            objective=Objective.PROFIT,
        )
        res = select_banner(GlobalStats(), req, cfg)
        assert res.winner == "a"
        assert res.tie_broken

    def test_tie_prefers_banner_shown_less(self):
        # an ancient impression of "a": its decay factor underflows, so the
        # throttle is exactly 1.0 and scores tie bitwise; "a" was shown once
        # to this user, "b" never, so "b" wins despite sorting after "a"
        cfg = EngineConfig(
            throttle=FIXTURE_CFG.throttle,
            economics={"a": BannerEconomics(cpc=0.5), "b": BannerEconomics(cpc=0.5)},
        )
        history = UserHistory(
            user="u", events=(HistoryEvent(EventKind.IMPRESSION, "a", 0),)
        )
        req = SelectionRequest(
            history=history, candidates=("a", "b"), now=10_000_000_000,
            objective=Objective.PROFIT,
        )
        res = select_banner(GlobalStats(), req, cfg)
        scores = [s.score for s in res.scored]
        assert scores[0] == scores[1]
        assert res.winner == "b"
        assert res.tie_broken

    def test_empty_candidates_rejected(self):
        req = SelectionRequest.__new__(SelectionRequest)
        object.__setattr__(req, "history", UserHistory(user="u"))
        object.__setattr__(req, "candidates", ())
        object.__setattr__(req, "now", 100)
        object.__setattr__(req, "objective", Objective.PROFIT)
        with pytest.raises(NoCandidatesError):
            select_banner(GlobalStats(), req, FIXTURE_CFG)

    def test_duplicate_candidates_rejected(self):
        with pytest.raises(ValueError):
            SelectionRequest(
                history=UserHistory(user="u"), candidates=("a", "a"), now=100,
                objective=Objective.PROFIT,
            )

    def test_missing_economics_names_banner(self):
        req = SelectionRequest(
            history=UserHistory(user="u"), candidates=("ghost",), now=100,
            objective=Objective.PROFIT,
        )
        with pytest.raises(MissingEconomicsError) as exc_info:
            select_banner(GlobalStats(), req, FIXTURE_CFG)
        assert "ghost" in str(exc_info.value)

    def test_clicks_objective_needs_no_economics(self):
        req = SelectionRequest(
            history=UserHistory(user="u"), candidates=("ghost", "other"), now=100,
            objective=Objective.CLICKS,
        )
        res = select_banner(GlobalStats(), req, EngineConfig())
        assert res.winner in ("ghost", "other")


class TestScoreConsistency:
    """The selector's diagnostics must equal the scoring functions bitwise."""

    def test_profit_matches_score(self):
        stats, history = fixture_stats(), fixture_history()
        req = SelectionRequest(
            history=history, candidates=("lo", "hi"), now=100, objective=Objective.PROFIT
        )
        res = select_banner(stats, req, FIXTURE_CFG)
        for entry in res.scored:
            assert entry.score == score(stats, history, entry.banner, 100, FIXTURE_CFG)

    def test_profit_plus_matches_score_plus(self):
        stats, history = fixture_stats(), fixture_history()
        cfg = EngineConfig(
            smoothing=RAW,
            economics={
                "hi": BannerEconomics(cpc=1.0, imp_profit=0.002, reg_profit={1: 5.0}),
                "lo": BannerEconomics(cpc=0.5, imp_profit=0.004),
            },
        )
        stats.banner_regs["hi"] = {1: 2}
        req = SelectionRequest(
            history=history, candidates=("lo", "hi"), now=100,
            objective=Objective.PROFIT_PLUS,
        )
        res = select_banner(stats, req, cfg)
        for entry in res.scored:
            assert entry.score == score_plus(stats, history, entry.banner, 100, cfg)

    def test_throttle_after_impressions_matches_score(self):
        stats, base = fixture_stats(), fixture_history()
        events = base.events + (
            HistoryEvent(EventKind.IMPRESSION, "hi", 50),
            HistoryEvent(EventKind.IMPRESSION, "hi", 90),
        )
        history = UserHistory(user="u", events=events)
        req = SelectionRequest(
            history=history, candidates=("lo", "hi"), now=100, objective=Objective.PROFIT
        )
        res = select_banner(stats, req, FIXTURE_CFG)
        for entry in res.scored:
            assert entry.score == score(stats, history, entry.banner, 100, FIXTURE_CFG)
        assert {s.banner: s.throttle for s in res.scored}["hi"] < 1.0


class TestInvariances:
    def random_instance(self, rng):
        stats = GlobalStats()
        banners = [f"b{i}" for i in range(int(rng.integers(2, 6)))]
        features = [f"kw:w{i}" for i in range(int(rng.integers(0, 4)))]
        for b in banners:
            imps = int(rng.integers(10, 1000))
            stats.banner_imps[b] = imps
            stats.banner_clicks[b] = int(rng.integers(0, imps // 2 + 1))
            for f in features:
                cell_imps = int(rng.integers(1, 200))
                stats.imp_matrix[(f, b)] = cell_imps
                clicks = int(rng.integers(0, cell_imps + 1))
                if clicks:
                    stats.click_matrix[(f, b)] = clicks
        events = [
            HistoryEvent(EventKind.SEARCH_QUERY, f[3:], i) for i, f in enumerate(features)
        ]
        for _ in range(int(rng.integers(0, 5))):
            events.append(
                HistoryEvent(
                    EventKind.IMPRESSION,
                    banners[int(rng.integers(len(banners)))],
                    int(rng.integers(100, 200)),
                )
            )
        events.sort(key=lambda e: e.time)
        history = UserHistory(user="u", events=tuple(events))
        economics = {
            b: BannerEconomics(cpc=float(rng.uniform(0.05, 2.0))) for b in banners
        }
        cfg = EngineConfig(economics=economics)
        return stats, history, banners, cfg

    def test_cpc_rescaling_preserves_winner(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            stats, history, banners, cfg = self.random_instance(rng)
            req = SelectionRequest(
                history=history, candidates=tuple(banners), now=500,
                objective=Objective.PROFIT,
            )
            base = select_banner(stats, req, cfg)
            scale = float(rng.choice([0.25, 0.5, 2.0, 4.0, 1024.0]))
            scaled_cfg = EngineConfig(
                economics={
                    b: BannerEconomics(cpc=e.cpc * scale) for b, e in cfg.economics.items()
                }
            )
            assert select_banner(stats, req, scaled_cfg).winner == base.winner

    def test_candidate_reordering_preserves_winner(self):
        rng = np.random.default_rng(123)
        for _ in range(100):
            stats, history, banners, cfg = self.random_instance(rng)
            req = SelectionRequest(
                history=history, candidates=tuple(banners), now=500,
                objective=Objective.PROFIT,
            )
            base = select_banner(stats, req, cfg)
            shuffled = list(banners)
            rng.shuffle(shuffled)
            req2 = SelectionRequest(
                history=history, candidates=tuple(shuffled), now=500,
                objective=Objective.PROFIT,
            )
            assert select_banner(stats, req2, cfg).winner == base.winner

    def test_identical_inputs_identical_results(self):
        rng = np.random.default_rng(5)
        stats, history, banners, cfg = self.random_instance(rng)
        req = SelectionRequest(
            history=history, candidates=tuple(banners), now=500, objective=Objective.PROFIT
        )
        assert select_banner(stats, req, cfg) == select_banner(stats, req, cfg)
