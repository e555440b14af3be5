## Quickstart: from raw events to a served banner

# This walkthrough builds one user's event history, feeds it through the
# counter matrices, and lets the engine pick a banner.  Everything runs
# in-memory; the HTTP layer is just a thin wrapper over these same calls
# (see `http_session.py`).

from bbe import (
    BannerEconomics,
    EngineConfig,
    EventKind,
    GlobalStats,
    HistoryEvent,
    Objective,
    SelectionRequest,
    UserHistory,
    derive_profile,
    ingest,
    select_banner,
)

### A user browses, searches, and sees some ads

# Histories are plain timestamped event logs.  Page views and search
# queries become *features*; impressions and clicks feed the CTR
# counters.  The engine config carries smoothing/throttle parameters and
# per-banner economics.

cfg = EngineConfig(
    economics={
        "sneaker-sale": BannerEconomics(cpc=0.40),
        "hiking-boots": BannerEconomics(cpc=0.55),
    }
)

events = [
    HistoryEvent(EventKind.SEARCH_QUERY, "trail running", 1_000),
    HistoryEvent(EventKind.PAGE_VIEW, "outdoors.example/reviews", 1_060),
    HistoryEvent(EventKind.IMPRESSION, "sneaker-sale", 1_120),
    HistoryEvent(EventKind.CLICK, "sneaker-sale", 1_125),
]

stats = GlobalStats()
history = UserHistory(user="demo-user")
for event in events:
    stats, history = ingest(stats, history, event, cfg)

# The profile is a pure function of the history: feature counters plus
# per-banner impression/click counts.

profile = derive_profile(history)
print("features:   ", profile.features)
print("impressions:", profile.impressions)
print("clicks:     ", profile.clicks)

# The global matrices now carry one cell per (feature, banner) pair this
# user touched.  Note the retro-credit: both features were present before
# the impression, so both rows saw it.

print("impression matrix:", stats.imp_matrix)
print("click matrix:     ", stats.click_matrix)

### Selecting the next banner

# Selection scores every candidate (naive-Bayes value x throttle x cpc for
# the profit objective) and returns per-candidate diagnostics.  The recent
# impression of "sneaker-sale" throttles it, so the fresh banner can win
# even before any of its own clicks arrive.

request = SelectionRequest(
    history=history,
    candidates=("sneaker-sale", "hiking-boots"),
    now=1_200,
    objective=Objective.PROFIT,
)
result = select_banner(stats, request, cfg)

print(f"\nwinner: {result.winner}  (tie_broken={result.tie_broken})")
for entry in result.scored:
    print(
        f"  {entry.banner:13s} val={entry.val:.4f} "
        f"throttle={entry.throttle:.4f} score={entry.score:.5f}"
    )
