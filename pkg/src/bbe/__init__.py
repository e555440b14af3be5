"""Behavioral banner-selection engine.

Estimates per-user click probabilities from per-feature CTR counters under
a naive-Bayes independence assumption, serves the banner maximizing
expected profit with an anti-boredom throttle, and ships with an HTTP
serving layer plus a seeded traffic simulator for validation.
"""

from .ingest import GlobalStats, apply_click, apply_feature_event, apply_impression, ingest
from .model import (
    BannerId,
    EventKind,
    FeatureId,
    HistoryEvent,
    UserHistory,
    UserProfile,
    derive_profile,
    feature_id,
    record_event,
)
from .persistence import decode_history, encode_history, restore, snapshot
from .scoring import (
    BannerEconomics,
    EngineConfig,
    SmoothingParams,
    ThrottleParams,
    counter_weight,
    ctr_feature,
    ctr_global,
    score,
    score_plus,
    throttle,
    val,
)
from .selector import Objective, SelectionRequest, SelectionResult, select_banner
from .sim import PopulationSpec, SimReport, generate_population, oracle_conditional_ctr, run_simulation

__all__ = [
    "BannerEconomics",
    "BannerId",
    "EngineConfig",
    "EventKind",
    "FeatureId",
    "GlobalStats",
    "HistoryEvent",
    "Objective",
    "PopulationSpec",
    "SelectionRequest",
    "SelectionResult",
    "SimReport",
    "SmoothingParams",
    "ThrottleParams",
    "UserHistory",
    "UserProfile",
    "apply_click",
    "apply_feature_event",
    "apply_impression",
    "counter_weight",
    "ctr_feature",
    "ctr_global",
    "decode_history",
    "derive_profile",
    "encode_history",
    "feature_id",
    "generate_population",
    "ingest",
    "oracle_conditional_ctr",
    "record_event",
    "restore",
    "run_simulation",
    "score",
    "score_plus",
    "select_banner",
    "snapshot",
    "throttle",
    "val",
]

__version__ = "0.1.0"
