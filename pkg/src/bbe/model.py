"""Domain types: user event histories and the profiles derived from them.

Everything here is an immutable value; the operations are pure functions,
so histories and profiles can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from urllib.parse import urlsplit

BannerId = str
FeatureId = str


class EventKind(Enum):
    """Event types a user history can carry.

    Only PAGE_VIEW and SEARCH_QUERY are feature events.  Impressions and
    clicks feed the CTR counters, registrations are click-like profit
    events; none of those three ever become features.
    """

    IMPRESSION = "imp"
    CLICK = "clk"
    REGISTRATION = "reg"
    PAGE_VIEW = "pv"
    SEARCH_QUERY = "kw"


FEATURE_KINDS = frozenset({EventKind.PAGE_VIEW, EventKind.SEARCH_QUERY})


@dataclass(frozen=True)
class HistoryEvent:
    """One typed, timestamped event.

    ``obj`` is the banner id for impression/click/registration events, the
    URL for page views and the keyword for search queries.  ``level`` is
    the registration level (>= 1) and must be None for every other kind.
    Timestamps are integer seconds since the epoch.
    """

    kind: EventKind
    obj: str
    time: int
    level: int | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.obj, str) or not self.obj:
            raise ValueError("event obj must be a non-empty string")
        if isinstance(self.time, bool) or not isinstance(self.time, int):
            raise ValueError("event time must be an integer")
        if self.time < 0:
            raise ValueError("event time must be >= 0")
        if self.kind is EventKind.REGISTRATION:
            if not isinstance(self.level, int) or isinstance(self.level, bool) or self.level < 1:
                raise ValueError("registration level must be an integer >= 1")
        elif self.level is not None:
            raise ValueError(f"{self.kind.value} events carry no level")
        # banner ids go verbatim into the TSV snapshot; feature objs are
        # whitespace-normalized at key derivation instead
        if self.kind not in FEATURE_KINDS and any(c in self.obj for c in "\t\n\r"):
            raise ValueError("banner ids must not contain tabs or newlines")

    @property
    def is_feature(self) -> bool:
        return self.kind in FEATURE_KINDS


@dataclass(frozen=True)
class UserHistory:
    """The per-user event log (the contents of the cookie).

    Events are kept in non-decreasing time order; equal timestamps keep
    arrival order.  ``truncated`` is decoder metadata (set when an
    oversized cookie was cut down) and is excluded from equality.
    """

    user: str
    events: tuple[HistoryEvent, ...] = ()
    truncated: bool = field(default=False, compare=False)

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class UserProfile:
    """Derived view of a history: feature counters plus per-banner
    impression and click counts.  Absent keys mean zero."""

    features: dict[FeatureId, int]
    impressions: dict[BannerId, int]
    clicks: dict[BannerId, int]

    @classmethod
    def empty(cls) -> UserProfile:
        return cls(features={}, impressions={}, clicks={})


def normalize_url(url: str) -> str:
    """Canonicalize a page-view URL: lowercase the host, drop the query
    string (and fragment).  Whitespace is stripped out entirely — URLs
    cannot legally contain it and feature keys must stay TSV-safe."""
    url = "".join(url.split())
    parts = urlsplit(url)
    if parts.netloc:
        out = f"{parts.scheme.lower()}://{parts.netloc.lower()}{parts.path}"
    elif "/" in url:
        host, _, rest = url.partition("/")
        out = f"{host.lower()}/{rest.split('?', 1)[0].split('#', 1)[0]}"
    else:
        out = url.split("?", 1)[0].split("#", 1)[0].lower()
    return out


def normalize_keyword(keyword: str) -> str:
    """Canonicalize a search keyword: lowercase, trim, and collapse inner
    whitespace runs to single spaces (keeps keys TSV-safe)."""
    return " ".join(keyword.split()).lower()


def feature_id(event: HistoryEvent) -> FeatureId:
    """Derive the canonical feature key for a feature event.

    Page views map to ``pv:<normalized url>`` and search queries to
    ``kw:<normalized keyword>``.  Total and deterministic over feature
    events; anything else is a contract violation.
    """
    if event.kind is EventKind.PAGE_VIEW:
        return "pv:" + normalize_url(event.obj)
    if event.kind is EventKind.SEARCH_QUERY:
        return "kw:" + normalize_keyword(event.obj)
    raise ValueError(f"{event.kind.value} events are not feature events")


def record_event(history: UserHistory, event: HistoryEvent) -> UserHistory:
    """Append an event and renormalize time order.

    Out-of-order timestamps are accepted (cookies come from client clocks)
    and re-sorted; the sort is stable, so equal timestamps keep arrival
    order.  Malformed events cannot exist (HistoryEvent validates on
    construction), so this never fails on a well-typed event.
    """
    if not isinstance(event, HistoryEvent):
        raise ValueError("event must be a HistoryEvent")
    events = history.events + (event,)
    if len(events) > 1 and event.time < events[-2].time:
        events = tuple(sorted(events, key=lambda e: e.time))
    return UserHistory(user=history.user, events=events, truncated=history.truncated)


def derive_profile(history: UserHistory) -> UserProfile:
    """Fold a history into its profile.

    Feature counters count occurrences of each derived feature key;
    impression/click maps count events per banner.  Pure and total; the
    result depends only on the event multiset, not on order.
    """
    features: dict[FeatureId, int] = {}
    impressions: dict[BannerId, int] = {}
    clicks: dict[BannerId, int] = {}
    for event in history.events:
        if event.kind is EventKind.IMPRESSION:
            impressions[event.obj] = impressions.get(event.obj, 0) + 1
        elif event.kind is EventKind.CLICK:
            clicks[event.obj] = clicks.get(event.obj, 0) + 1
        elif event.is_feature:
            key = feature_id(event)
            features[key] = features.get(key, 0) + 1
        # registrations contribute profit, not profile state
    return UserProfile(features=features, impressions=impressions, clicks=clicks)
