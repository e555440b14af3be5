"""Real-time maintenance of the global feature-by-banner counter matrices.

Three update rules drive everything:

* an impression on banner b credits the (f, b) impression cell for every
  feature f the user currently has;
* a click on b does the same for the click cells (optionally only the
  user's first click on that banner);
* a user's first occurrence of a feature retro-credits that feature's
  rows with the user's accumulated per-banner impressions and clicks.

The contract throughout is profile-first: the user's history and profile
are updated before the matrices, so the profile passed to the impression
and click rules already reflects the event being applied, while the
feature rule sees the profile from before the feature event.

GlobalStats is a mutable accumulator with a single-writer discipline;
readers see consistent snapshots as long as writes are serialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

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

if TYPE_CHECKING:  # pragma: no cover - type-only, avoids a runtime cycle
    from .scoring import EngineConfig


@dataclass
class GlobalStats:
    """Sparse impression/click matrices plus the global per-banner totals.

    Matrix cells are keyed by (feature, banner); only nonzero cells are
    materialized.  ``banner_imps``/``banner_clicks`` hold the all-users
    totals behind the global CTR, and ``banner_regs`` counts ingested
    registrations per banner and level (consumed by profit scoring).
    """

    imp_matrix: dict[tuple[FeatureId, BannerId], int] = field(default_factory=dict)
    click_matrix: dict[tuple[FeatureId, BannerId], int] = field(default_factory=dict)
    banner_imps: dict[BannerId, int] = field(default_factory=dict)
    banner_clicks: dict[BannerId, int] = field(default_factory=dict)
    banner_regs: dict[BannerId, dict[int, int]] = field(default_factory=dict)

    def cell_counts(self, feature: FeatureId, banner: BannerId) -> tuple[int, int]:
        """(impressions, clicks) for one cell; absent cells are zero."""
        key = (feature, banner)
        return self.imp_matrix.get(key, 0), self.click_matrix.get(key, 0)


def apply_impression(stats: GlobalStats, profile: UserProfile, banner: BannerId) -> GlobalStats:
    """Credit an impression of ``banner``.

    ``profile`` must already include this impression (profile-first).
    Every feature the user has gets its impression cell bumped, and the
    banner's global impression total grows by one.
    """
    imp_matrix = stats.imp_matrix
    for f in profile.features:
        key = (f, banner)
        imp_matrix[key] = imp_matrix.get(key, 0) + 1
    stats.banner_imps[banner] = stats.banner_imps.get(banner, 0) + 1
    return stats


def apply_click(
    stats: GlobalStats,
    profile: UserProfile,
    banner: BannerId,
    unique_only: bool = False,
) -> GlobalStats:
    """Credit a click on ``banner``.

    ``profile`` must already include this click, so the user's click count
    for the banner is >= 1 here.  With ``unique_only`` set, repeat clicks
    (count > 1) leave the stats untouched — including the global click
    total; otherwise every click counts.
    """
    if unique_only and profile.clicks.get(banner, 0) > 1:
        return stats
    click_matrix = stats.click_matrix
    for f in profile.features:
        key = (f, banner)
        click_matrix[key] = click_matrix.get(key, 0) + 1
    stats.banner_clicks[banner] = stats.banner_clicks.get(banner, 0) + 1
    return stats


def apply_feature_event(
    stats: GlobalStats, profile_before: UserProfile, feature: FeatureId
) -> GlobalStats:
    """Seed a feature's rows on its first occurrence for this user.

    ``profile_before`` is the profile from BEFORE the feature event.  If
    the user already had the feature, nothing happens (only the profile's
    own counter grows, which the caller handles).  Otherwise the feature's
    rows are retro-credited with the user's accumulated impressions and
    clicks, so matrices end up as if the user had carried the feature all
    along.
    """
    if feature in profile_before.features:
        return stats
    imp_matrix = stats.imp_matrix
    for banner, count in profile_before.impressions.items():
        key = (feature, banner)
        imp_matrix[key] = imp_matrix.get(key, 0) + count
    click_matrix = stats.click_matrix
    for banner, count in profile_before.clicks.items():
        key = (feature, banner)
        click_matrix[key] = click_matrix.get(key, 0) + count
    return stats


def apply_registration(stats: GlobalStats, banner: BannerId, level: int) -> GlobalStats:
    """Tally a registration for profit scoring; matrices are untouched."""
    per_level = stats.banner_regs.setdefault(banner, {})
    per_level[level] = per_level.get(level, 0) + 1
    return stats


def ingest(
    stats: GlobalStats,
    history: UserHistory,
    event: HistoryEvent,
    cfg: "EngineConfig",
) -> tuple[GlobalStats, UserHistory]:
    """Ingest one event: update the user's history first, then the stats.

    Dispatches to the rule each event kind requires, handing the
    impression/click rules the post-event profile and the feature rule the
    pre-event profile.  Registrations touch only the history and the
    per-banner registration tally.  A malformed event raises before any
    state changes.
    """
    if not isinstance(event, HistoryEvent):
        raise ValueError("event must be a HistoryEvent")
    new_history = record_event(history, event)
    if event.kind is EventKind.IMPRESSION:
        profile_after = derive_profile(new_history)
        apply_impression(stats, profile_after, event.obj)
    elif event.kind is EventKind.CLICK:
        profile_after = derive_profile(new_history)
        apply_click(stats, profile_after, event.obj, cfg.unique_only)
    elif event.is_feature:
        profile_before = derive_profile(history)
        apply_feature_event(stats, profile_before, feature_id(event))
    else:  # registration
        apply_registration(stats, event.obj, event.level)
    return stats, new_history
