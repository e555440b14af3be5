"""Winning-banner selection over a candidate set, with audit diagnostics
and deterministic tie-breaking."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

from .ingest import GlobalStats
from .model import BannerId, EventKind, UserHistory, derive_profile
from .scoring import EngineConfig, _economics, _weighted_val, registration_rate_bonus


class Objective(str, Enum):
    """What the selection maximizes.

    CLICKS ranks by value * throttle (unit cpc, no economics needed);
    PROFIT by the click-profit score; PROFIT_PLUS adds impression and
    registration profits.
    """

    CLICKS = "clicks"
    PROFIT = "profit"
    PROFIT_PLUS = "profit_plus"


class SelectionError(ValueError):
    """Selection could not be performed on this request."""


class NoCandidatesError(SelectionError):
    pass


class MissingEconomicsError(SelectionError):
    def __init__(self, banner: BannerId):
        super().__init__(f"no economics configured for banner {banner!r}")
        self.banner = banner


class ScoredBanner(NamedTuple):
    """Per-candidate audit record."""

    banner: BannerId
    val: float
    throttle: float
    score: float


@dataclass(frozen=True)
class SelectionRequest:
    history: UserHistory
    candidates: tuple[BannerId, ...]
    now: int
    objective: Objective = Objective.PROFIT

    def __post_init__(self) -> None:
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if len(set(self.candidates)) != len(self.candidates):
            raise ValueError("candidate list contains duplicates")


@dataclass(frozen=True)
class SelectionResult:
    winner: BannerId
    scored: tuple[ScoredBanner, ...]
    tie_broken: bool = field(default=False)


def select_banner(
    stats: GlobalStats, req: SelectionRequest, cfg: EngineConfig
) -> SelectionResult:
    """Pick the candidate maximizing the requested objective.

    Diagnostics are returned for every candidate in request order; the
    score column is the objective value itself.  Bitwise score ties are
    broken toward the banner this user has seen least, then toward the
    lexicographically smallest id, which gives mild cold-start rotation
    while staying fully deterministic.
    """
    if not req.candidates:
        raise NoCandidatesError("candidate set is empty")

    profile = derive_profile(req.history)

    # One pass for the throttle inputs: impression times per candidate,
    # kept in history order so the damping product multiplies in the same
    # order as scoring.throttle.
    imp_times: dict[BannerId, list[int]] = {b: [] for b in req.candidates}
    for event in req.history.events:
        if event.kind is EventKind.IMPRESSION and event.obj in imp_times:
            if event.time > req.now:
                raise ValueError(
                    f"impression at t={event.time} is in the future of now={req.now}"
                )
            imp_times[event.obj].append(event.time)

    tp = cfg.throttle
    scored: list[ScoredBanner] = []
    for banner in req.candidates:
        v = _weighted_val(stats, profile.features, banner, cfg, None)
        th = 1.0
        for t in imp_times[banner]:
            th *= 1.0 - tp.alpha * 0.5 ** ((req.now - t) / tp.half_life_seconds)
        if req.objective is Objective.CLICKS:
            s = v * th
        elif req.objective is Objective.PROFIT:
            econ = _economics_or_selection_error(cfg, banner)
            s = econ.cpc * v * th
        else:
            econ = _economics_or_selection_error(cfg, banner)
            effective_cpc = econ.cpc + registration_rate_bonus(stats, banner, econ)
            s = econ.imp_profit + effective_cpc * v * th
        scored.append(ScoredBanner(banner=banner, val=v, throttle=th, score=s))

    best = max(entry.score for entry in scored)
    contenders = [entry.banner for entry in scored if entry.score == best]
    winner = min(contenders, key=lambda b: (profile.impressions.get(b, 0), b))
    return SelectionResult(
        winner=winner, scored=tuple(scored), tie_broken=len(contenders) > 1
    )


def _economics_or_selection_error(cfg: EngineConfig, banner: BannerId):
    try:
        return _economics(cfg, banner)
    except ValueError:
        raise MissingEconomicsError(banner) from None
