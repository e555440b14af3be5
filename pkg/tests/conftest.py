from __future__ import annotations

from bbe.ingest import GlobalStats, ingest
from bbe.model import EventKind, HistoryEvent, UserHistory


def replay_through_engine(log, cfg):
    """Fold a raw multi-user log through the public ingest operation."""
    stats = GlobalStats()
    histories: dict[str, UserHistory] = {}
    kinds = {
        "imp": EventKind.IMPRESSION,
        "clk": EventKind.CLICK,
        "pv": EventKind.PAGE_VIEW,
        "kw": EventKind.SEARCH_QUERY,
        "reg": EventKind.REGISTRATION,
    }
    for user, kind, obj, time, level in log:
        event = HistoryEvent(kind=kinds[kind], obj=obj, time=time, level=level)
        history = histories.get(user) or UserHistory(user=user)
        stats, histories[user] = ingest(stats, history, event, cfg)
    return stats, histories
