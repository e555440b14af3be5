"""Codecs: the cookie blob carrying a user history, and the line-oriented
snapshot of the global stats.

Cookie format (versioned, compact JSON, UTF-8):

    {"v":1,"u":"<user>","e":[["<kind>","<obj>",<time>],...]}

Kind tags are "imp", "clk", "pv", "kw" and "reg:<level>".  Events are
stored in normalized (time, arrival) order.

Snapshot format (canonical TSV, UTF-8, sorted, integers only):

    bbe-snapshot v1
    <feature>\t<banner>\t<imps>\t<clicks>        one line per nonzero cell
    #totals
    <banner>\t<imps>\t<clicks>                   per-banner global totals
    #registrations
    <banner>\t<level>\t<count>                   per-banner registration tallies

Equal stats always serialize to byte-identical snapshots, and both codecs
round-trip exactly.
"""

from __future__ import annotations

from .ingest import GlobalStats
from .model import EventKind, HistoryEvent, UserHistory

COOKIE_VERSION = 1
SNAPSHOT_HEADER = "bbe-snapshot v1"
DEFAULT_MAX_COOKIE_EVENTS = 500


class CookieError(ValueError):
    """The cookie blob could not be decoded."""


class SnapshotError(ValueError):
    """The snapshot stream could not be parsed."""


def _kind_tag(event: HistoryEvent) -> str:
    if event.kind is EventKind.REGISTRATION:
        return f"reg:{event.level}"
    return event.kind.value


def _parse_kind_tag(tag: str) -> tuple[EventKind, int | None]:
    if tag.startswith("reg:"):
        level_str = tag[4:]
        if not level_str.isdigit():
            raise CookieError(f"bad registration tag {tag!r}")
        return EventKind.REGISTRATION, int(level_str)
    for kind in (EventKind.IMPRESSION, EventKind.CLICK, EventKind.PAGE_VIEW, EventKind.SEARCH_QUERY):
        if tag == kind.value:
            return kind, None
    raise CookieError(f"unknown event kind tag {tag!r}")


def encode_history(history: UserHistory) -> str:
    """Serialize a history to its cookie blob.

    Events are written in normalized order, so encoding is canonical:
    re-encoding a decoded blob reproduces it byte for byte.
    """
    import json

    events = sorted(history.events, key=lambda e: e.time)
    payload = {
        "v": COOKIE_VERSION,
        "u": history.user,
        "e": [[_kind_tag(e), e.obj, e.time] for e in events],
    }
    return json.dumps(payload, separators=(",", ":"), ensure_ascii=False)


def decode_history(blob: str, max_events: int = DEFAULT_MAX_COOKIE_EVENTS) -> UserHistory:
    """Parse a cookie blob back into a history.

    Unknown versions, bad syntax, bad kind tags, or malformed events all
    raise CookieError.  Oversized blobs are cut down to the most recent
    ``max_events`` events and flagged via ``history.truncated``.
    """
    import json

    try:
        payload = json.loads(blob)
    except (TypeError, ValueError) as exc:
        raise CookieError(f"cookie is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise CookieError("cookie payload must be a JSON object")
    if payload.get("v") != COOKIE_VERSION:
        raise CookieError(f"unsupported cookie version {payload.get('v')!r}")
    user = payload.get("u")
    if not isinstance(user, str):
        raise CookieError("cookie user id must be a string")
    raw_events = payload.get("e")
    if not isinstance(raw_events, list):
        raise CookieError("cookie event list missing")

    events: list[HistoryEvent] = []
    for i, entry in enumerate(raw_events):
        if not isinstance(entry, list) or len(entry) != 3:
            raise CookieError(f"event #{i} is not a [kind, obj, time] triple")
        tag, obj, time = entry
        if not isinstance(tag, str):
            raise CookieError(f"event #{i} kind tag must be a string")
        kind, level = _parse_kind_tag(tag)
        try:
            events.append(HistoryEvent(kind=kind, obj=obj, time=time, level=level))
        except ValueError as exc:
            raise CookieError(f"event #{i} is malformed: {exc}") from None

    events.sort(key=lambda e: e.time)
    truncated = len(events) > max_events
    if truncated:
        events = events[-max_events:]
    return UserHistory(user=user, events=tuple(events), truncated=truncated)


def snapshot(stats: GlobalStats) -> bytes:
    """Serialize stats to the canonical snapshot byte stream.

    The caller must hold a quiescent view of the stats (no concurrent
    writer) while this runs.
    """
    lines = [SNAPSHOT_HEADER]
    cells = sorted(set(stats.imp_matrix) | set(stats.click_matrix))
    for feature, banner in cells:
        imps = stats.imp_matrix.get((feature, banner), 0)
        clicks = stats.click_matrix.get((feature, banner), 0)
        if imps == 0 and clicks == 0:
            continue
        lines.append(f"{feature}\t{banner}\t{imps}\t{clicks}")
    lines.append("#totals")
    banners = sorted(set(stats.banner_imps) | set(stats.banner_clicks))
    for banner in banners:
        imps = stats.banner_imps.get(banner, 0)
        clicks = stats.banner_clicks.get(banner, 0)
        if imps == 0 and clicks == 0:
            continue
        lines.append(f"{banner}\t{imps}\t{clicks}")
    lines.append("#registrations")
    for banner in sorted(stats.banner_regs):
        for level in sorted(stats.banner_regs[banner]):
            count = stats.banner_regs[banner][level]
            if count == 0:
                continue
            lines.append(f"{banner}\t{level}\t{count}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_count(text: str, line_no: int, what: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise SnapshotError(f"line {line_no}: {what} {text!r} is not an integer") from None
    if value < 0:
        raise SnapshotError(f"line {line_no}: negative {what} {value}")
    return value


def restore(data: bytes) -> GlobalStats:
    """Parse a snapshot stream back into stats; inverse of snapshot().

    Malformed lines raise SnapshotError naming the 1-based line number;
    duplicate cell/total/registration lines are rejected (the sort
    contract forbids them).
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise SnapshotError(f"snapshot is not UTF-8: {exc}") from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != SNAPSHOT_HEADER:
        raise SnapshotError("line 1: missing snapshot header")

    stats = GlobalStats()
    section = "cells"
    for line_no, line in enumerate(lines[1:], start=2):
        if line == "#totals":
            if section != "cells":
                raise SnapshotError(f"line {line_no}: unexpected #totals section")
            section = "totals"
            continue
        if line == "#registrations":
            if section != "totals":
                raise SnapshotError(f"line {line_no}: unexpected #registrations section")
            section = "regs"
            continue
        fields = line.split("\t")
        if section == "cells":
            if len(fields) != 4:
                raise SnapshotError(f"line {line_no}: expected 4 tab-separated fields")
            feature, banner, imps_s, clicks_s = fields
            if not feature or not banner:
                raise SnapshotError(f"line {line_no}: empty feature or banner id")
            imps = _parse_count(imps_s, line_no, "impression count")
            clicks = _parse_count(clicks_s, line_no, "click count")
            key = (feature, banner)
            if key in stats.imp_matrix or key in stats.click_matrix:
                raise SnapshotError(f"line {line_no}: duplicate cell {feature}/{banner}")
            if imps:
                stats.imp_matrix[key] = imps
            if clicks:
                stats.click_matrix[key] = clicks
        elif section == "totals":
            if len(fields) != 3:
                raise SnapshotError(f"line {line_no}: expected 3 tab-separated fields")
            banner, imps_s, clicks_s = fields
            if not banner:
                raise SnapshotError(f"line {line_no}: empty banner id")
            imps = _parse_count(imps_s, line_no, "impression count")
            clicks = _parse_count(clicks_s, line_no, "click count")
            if banner in stats.banner_imps or banner in stats.banner_clicks:
                raise SnapshotError(f"line {line_no}: duplicate totals for {banner}")
            if imps:
                stats.banner_imps[banner] = imps
            if clicks:
                stats.banner_clicks[banner] = clicks
        else:
            if len(fields) != 3:
                raise SnapshotError(f"line {line_no}: expected 3 tab-separated fields")
            banner, level_s, count_s = fields
            if not banner:
                raise SnapshotError(f"line {line_no}: empty banner id")
            level = _parse_count(level_s, line_no, "registration level")
            if level < 1:
                raise SnapshotError(f"line {line_no}: registration level must be >= 1")
            count = _parse_count(count_s, line_no, "registration count")
            per_level = stats.banner_regs.setdefault(banner, {})
            if level in per_level:
                raise SnapshotError(f"line {line_no}: duplicate registration line")
            if count:
                per_level[level] = count
            elif not per_level:
                del stats.banner_regs[banner]
    if section == "cells":
        raise SnapshotError("snapshot ended before the #totals section")
    return stats
