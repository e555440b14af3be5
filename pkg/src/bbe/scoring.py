"""Scoring: smoothed CTR estimates, the naive-Bayes value, the impression
throttle, and the profit scores built from them.

All functions are pure over an immutable snapshot of the stats and can be
called concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .ingest import GlobalStats
from .model import BannerId, EventKind, FeatureId, UserHistory, derive_profile

# CTR estimates are clamped into (EPS, 1 - EPS): cells with clicks but no
# impressions (bot traffic, lost logs) would otherwise reach ctr >= 1 and
# corrupt the (1 - n) power in the value product.
EPS = 1e-9

# math.exp overflows above ~709.78; beyond that the value is +inf anyway.
_EXP_MAX = 709.0


@dataclass(frozen=True)
class SmoothingParams:
    """Additive smoothing: ``kappa`` pseudo-observations at ``prior_ctr``
    (global level) or at the banner's global CTR (feature level)."""

    kappa: float = 10.0
    prior_ctr: float = 0.01

    def __post_init__(self) -> None:
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if not 0.0 < self.prior_ctr < 1.0:
            raise ValueError("prior_ctr must be in (0, 1)")


@dataclass(frozen=True)
class ThrottleParams:
    """Anti-boredom damping: each past impression contributes a factor
    1 - alpha * (1/2) ** (age / half_life_seconds)."""

    alpha: float = 0.5
    half_life_seconds: int = 86400

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.half_life_seconds <= 0:
            raise ValueError("half_life_seconds must be > 0")


@dataclass(frozen=True)
class BannerEconomics:
    """Per-banner profit terms: per click, per impression, and per
    registration level."""

    cpc: float = 0.0
    imp_profit: float = 0.0
    reg_profit: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.cpc < 0 or self.imp_profit < 0 or any(v < 0 for v in self.reg_profit.values()):
            raise ValueError("profits must be >= 0")


@dataclass(frozen=True)
class EngineConfig:
    smoothing: SmoothingParams = SmoothingParams()
    throttle: ThrottleParams = ThrottleParams()
    unique_only: bool = False
    use_counter_weights: bool = False
    economics: Mapping[BannerId, BannerEconomics] = field(default_factory=dict)


def _clamp(p: float) -> float:
    return min(max(p, EPS), 1.0 - EPS)


def ctr_global(stats: GlobalStats, banner: BannerId, sp: SmoothingParams) -> float:
    """Smoothed all-users CTR of a banner, clamped into (EPS, 1 - EPS).

    (clicks + kappa * prior) / (imps + kappa); with no data and kappa = 0
    the prior itself is returned.
    """
    imps = stats.banner_imps.get(banner, 0)
    clicks = stats.banner_clicks.get(banner, 0)
    denom = imps + sp.kappa
    if denom == 0:
        return _clamp(sp.prior_ctr)
    return _clamp((clicks + sp.kappa * sp.prior_ctr) / denom)


def ctr_feature(
    stats: GlobalStats, feature: FeatureId, banner: BannerId, sp: SmoothingParams
) -> float:
    """Smoothed CTR of a banner among users carrying a feature.

    The pseudo-counts back off to the banner's global CTR, so a feature
    with no data contributes a ratio of exactly 1 to the value product.
    """
    g = ctr_global(stats, banner, sp)
    imps, clicks = stats.cell_counts(feature, banner)
    denom = imps + sp.kappa
    if denom == 0:
        return g
    return _clamp((clicks + sp.kappa * g) / denom)


def val(
    stats: GlobalStats,
    features: Iterable[FeatureId],
    banner: BannerId,
    sp: SmoothingParams,
) -> float:
    """Naive-Bayes click value: ctr(b)^(1-n) * prod_i ctr_{f_i}(b).

    Evaluated in log space (the product underflows in linear space once n
    reaches the hundreds).  Features are iterated in sorted order so the
    floating-point sum is reproducible regardless of the container passed
    in.  n = 0 returns the global CTR itself.
    """
    keys = sorted(features)
    g = ctr_global(stats, banner, sp)
    if not keys:
        return g
    log_value = (1 - len(keys)) * math.log(g)
    for f in keys:
        log_value += math.log(ctr_feature(stats, f, banner, sp))
    if log_value > _EXP_MAX:
        return math.inf
    return math.exp(log_value)


def counter_weight(counters: Iterable[float]) -> float:
    """Arithmetic mean of feature counters, used to scale the value when
    repeated page views / searches should count for more.  Callers
    normalize by population means beforehand when they have them."""
    values = list(counters)
    if not values:
        raise ValueError("counter_weight needs at least one counter")
    return sum(values) / len(values)


def throttle(
    history: UserHistory, banner: BannerId, now: int, tp: ThrottleParams
) -> float:
    """Multiplicative boredom damping from past impressions of a banner.

    Product over the user's impressions of the banner of
    1 - alpha * (1/2) ** ((now - t_i) / h); no impressions means 1.
    An impression dated after ``now`` is a clock-skew signal and raises.
    """
    result = 1.0
    for event in history.events:
        if event.kind is EventKind.IMPRESSION and event.obj == banner:
            if event.time > now:
                raise ValueError(
                    f"impression at t={event.time} is in the future of now={now}"
                )
            result *= 1.0 - tp.alpha * 0.5 ** ((now - event.time) / tp.half_life_seconds)
    return result


def _normalized_counters(
    features: Mapping[FeatureId, int],
    feature_means: Mapping[FeatureId, float] | None,
) -> list[float]:
    if not feature_means:
        return [float(c) for c in features.values()]
    out = []
    for f, c in features.items():
        mean = feature_means.get(f, 0.0)
        out.append(c / mean if mean > 0 else float(c))
    return out


def _weighted_val(
    stats: GlobalStats,
    features: Mapping[FeatureId, int],
    banner: BannerId,
    cfg: EngineConfig,
    feature_means: Mapping[FeatureId, float] | None,
) -> float:
    v = val(stats, features.keys(), banner, cfg.smoothing)
    if cfg.use_counter_weights and features:
        v *= counter_weight(_normalized_counters(features, feature_means))
    return v


def _economics(cfg: EngineConfig, banner: BannerId) -> BannerEconomics:
    econ = cfg.economics.get(banner)
    if econ is None:
        raise ValueError(f"no economics configured for banner {banner!r}")
    return econ


def registration_rate_bonus(stats: GlobalStats, banner: BannerId, econ: BannerEconomics) -> float:
    """Expected registration profit per click on a banner: sum over levels
    of reg_profit(level) times the observed registrations-per-click rate.
    Zero when there is no click or registration data."""
    clicks = stats.banner_clicks.get(banner, 0)
    if clicks <= 0:
        return 0.0
    per_level = stats.banner_regs.get(banner)
    if not per_level:
        return 0.0
    return sum(
        econ.reg_profit.get(level, 0.0) * count / clicks
        for level, count in per_level.items()
    )


def score(
    stats: GlobalStats,
    history: UserHistory,
    banner: BannerId,
    now: int,
    cfg: EngineConfig,
    feature_means: Mapping[FeatureId, float] | None = None,
) -> float:
    """Expected click profit: cpc(b) * value * throttle(b)."""
    econ = _economics(cfg, banner)
    profile = derive_profile(history)
    v = _weighted_val(stats, profile.features, banner, cfg, feature_means)
    return econ.cpc * v * throttle(history, banner, now, cfg.throttle)


def score_plus(
    stats: GlobalStats,
    history: UserHistory,
    banner: BannerId,
    now: int,
    cfg: EngineConfig,
    feature_means: Mapping[FeatureId, float] | None = None,
) -> float:
    """Total expected profit: impression profit plus the click term, with
    the cpc extended by the expected per-click registration profit."""
    econ = _economics(cfg, banner)
    profile = derive_profile(history)
    v = _weighted_val(stats, profile.features, banner, cfg, feature_means)
    effective_cpc = econ.cpc + registration_rate_bonus(stats, banner, econ)
    return econ.imp_profit + effective_cpc * v * throttle(history, banner, now, cfg.throttle)
