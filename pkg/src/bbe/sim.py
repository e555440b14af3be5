"""Seeded synthetic-traffic harness.

Generates a user population whose click behavior composes per-feature
effects multiplicatively in odds space — the independence structure the
engine's naive-Bayes scoring assumes — then replays rounds of
(arrival -> selection -> Bernoulli click -> ingestion) against the engine
or a uniform-random baseline and reports the achieved CTR lift.

Everything is deterministic in the population seed: arrivals, clicks, and
policy draws come from fixed, separate substreams, and the two policies
share the arrival and click streams so their CTRs are directly comparable.

The Monte Carlo oracle estimates P(click on b | user has exactly these
features) from ground truth alone; it never looks at the engine, which is
driven as a black box through the public ingest/select operations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .ingest import GlobalStats, apply_click, apply_feature_event, apply_impression
from .model import EventKind, HistoryEvent, UserHistory, UserProfile, feature_id
from .scoring import EngineConfig, val
from .selector import Objective, SelectionRequest, select_banner

ORACLE_MAX_FEATURES = 4
ORACLE_MAX_BANNERS = 5
ORACLE_MIN_SAMPLES = 100_000

CSV_COLUMNS = (
    "round",
    "user",
    "banner",
    "clicked",
    "cum_impressions",
    "cum_clicks",
    "cum_ctr",
    "cum_profit",
)

# Simulation rounds are one second apart, starting well after the feature
# seeding timestamps so histories stay time-ordered.
_ROUND_EPOCH = 1_000_000


@dataclass(frozen=True)
class PopulationSpec:
    """Ground-truth population parameters.

    ``feature_prevalence[f]`` is the probability a user carries feature f,
    ``base_ctr[b]`` the no-feature click probability of banner b, and
    ``lift_matrix[f][b]`` the multiplicative odds factor feature f applies
    to banner b.  ``events_per_user`` is the target number of feature
    events seeded into each user's history (every owned feature appears at
    least once; extras are repeats).
    """

    seed: int
    num_users: int
    num_features: int
    num_banners: int
    feature_prevalence: tuple[float, ...]
    base_ctr: tuple[float, ...]
    lift_matrix: tuple[tuple[float, ...], ...]
    events_per_user: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "feature_prevalence", tuple(self.feature_prevalence))
        object.__setattr__(self, "base_ctr", tuple(self.base_ctr))
        object.__setattr__(self, "lift_matrix", tuple(tuple(row) for row in self.lift_matrix))
        if self.num_users < 1 or self.num_features < 0 or self.num_banners < 1:
            raise ValueError("population sizes must be positive")
        if len(self.feature_prevalence) != self.num_features:
            raise ValueError("feature_prevalence length must equal num_features")
        if len(self.base_ctr) != self.num_banners:
            raise ValueError("base_ctr length must equal num_banners")
        if len(self.lift_matrix) != self.num_features or any(
            len(row) != self.num_banners for row in self.lift_matrix
        ):
            raise ValueError("lift_matrix must be num_features x num_banners")
        if not all(0.0 < p < 1.0 for p in self.feature_prevalence):
            raise ValueError("feature prevalences must be in (0, 1)")
        if not all(0.0 < p < 1.0 for p in self.base_ctr):
            raise ValueError("base CTRs must be in (0, 1)")
        if not all(f > 0.0 for row in self.lift_matrix for f in row):
            raise ValueError("lift factors must be > 0")
        if self.events_per_user < 0:
            raise ValueError("events_per_user must be >= 0")

    @classmethod
    def from_dict(cls, raw: dict) -> PopulationSpec:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown population spec keys: {sorted(unknown)}")
        return cls(**raw)


@dataclass(frozen=True)
class Population:
    """A concrete population: who has which features, and each user's true
    click probability per banner."""

    spec: PopulationSpec
    feature_ids: tuple[str, ...]
    banner_ids: tuple[str, ...]
    has_feature: np.ndarray  # (num_users, num_features) bool
    click_prob: np.ndarray  # (num_users, num_banners) float

    def conditional_click_prob(self, feature_indices: Iterable[int], banner_index: int) -> float:
        """Exact P(click on banner | user has exactly these features) under
        the ground-truth odds composition."""
        base = self.spec.base_ctr[banner_index]
        odds = base / (1.0 - base)
        for f in feature_indices:
            odds *= self.spec.lift_matrix[f][banner_index]
        return odds / (1.0 + odds)


@dataclass(frozen=True)
class SimReport:
    """Outcome of one simulated run, plus the uniform-random baseline from
    the same population and streams."""

    impressions: int
    clicks: int
    ctr: float
    profit: float
    baseline_ctr: float
    lift: float | None
    ranking_agreement: float | None


def generate_population(spec: PopulationSpec) -> Population:
    """Materialize a population; deterministic in the spec's seed."""
    rng = np.random.default_rng(spec.seed)
    has_feature = rng.random((spec.num_users, spec.num_features)) < np.asarray(
        spec.feature_prevalence
    )
    base = np.asarray(spec.base_ctr)
    log_odds = np.log(base / (1.0 - base))[None, :]
    if spec.num_features:
        log_odds = log_odds + has_feature.astype(float) @ np.log(np.asarray(spec.lift_matrix))
    click_prob = 1.0 / (1.0 + np.exp(-log_odds))
    return Population(
        spec=spec,
        feature_ids=tuple(f"kw:f{i}" for i in range(spec.num_features)),
        banner_ids=tuple(f"b{j}" for j in range(spec.num_banners)),
        has_feature=has_feature,
        click_prob=click_prob,
    )


def oracle_conditional_ctr(
    population: Population,
    feature_indices: Iterable[int],
    banner_index: int,
    samples: int = ORACLE_MIN_SAMPLES,
    rng: np.random.Generator | None = None,
) -> float:
    """Brute-force Monte Carlo estimate of P(click | exactly these features).

    Draws ``samples`` Bernoulli clicks from the ground-truth probability
    and averages them; independent of every engine code path.  Guarded to
    small instances so nobody mistakes it for a production estimator.
    """
    spec = population.spec
    if spec.num_features > ORACLE_MAX_FEATURES or spec.num_banners > ORACLE_MAX_BANNERS:
        raise ValueError(
            f"oracle instance too large: needs <= {ORACLE_MAX_FEATURES} features "
            f"and <= {ORACLE_MAX_BANNERS} banners"
        )
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    p = population.conditional_click_prob(feature_indices, banner_index)
    return float((rng.random(samples) < p).mean())


class _UserState:
    """Per-user cookie-side state kept incrementally during a run.

    The profile dicts mirror derive_profile(history) exactly; the stats
    are only ever touched through the public apply_* rules.
    """

    __slots__ = ("user", "events", "features", "impressions", "clicks")

    def __init__(self, user: str):
        self.user = user
        self.events: list[HistoryEvent] = []
        self.features: dict[str, int] = {}
        self.impressions: dict[str, int] = {}
        self.clicks: dict[str, int] = {}

    def profile(self) -> UserProfile:
        return UserProfile(
            features=self.features, impressions=self.impressions, clicks=self.clicks
        )

    def history(self) -> UserHistory:
        return UserHistory(user=self.user, events=tuple(self.events))

    def add_feature_event(self, stats: GlobalStats, event: HistoryEvent) -> None:
        key = feature_id(event)
        apply_feature_event(stats, self.profile(), key)
        self.features[key] = self.features.get(key, 0) + 1
        self.events.append(event)

    def add_impression(self, stats: GlobalStats, banner: str, now: int) -> None:
        self.impressions[banner] = self.impressions.get(banner, 0) + 1
        apply_impression(stats, self.profile(), banner)
        self.events.append(HistoryEvent(kind=EventKind.IMPRESSION, obj=banner, time=now))

    def add_click(self, stats: GlobalStats, banner: str, now: int, unique_only: bool) -> None:
        self.clicks[banner] = self.clicks.get(banner, 0) + 1
        apply_click(stats, self.profile(), banner, unique_only)
        self.events.append(HistoryEvent(kind=EventKind.CLICK, obj=banner, time=now))


def _seed_feature_events(
    population: Population, users: list[_UserState], stats: GlobalStats, rng: np.random.Generator
) -> None:
    spec = population.spec
    for u, state in enumerate(users):
        owned = np.flatnonzero(population.has_feature[u])
        if owned.size == 0:
            continue
        extra = spec.events_per_user - owned.size
        indices = list(owned)
        if extra > 0:
            indices.extend(owned[rng.integers(0, owned.size, size=extra)])
        for t, f in enumerate(indices):
            event = HistoryEvent(kind=EventKind.SEARCH_QUERY, obj=f"f{f}", time=t)
            state.add_feature_event(stats, event)


def _run_policy(
    population: Population,
    engine_cfg: EngineConfig,
    policy: str,
    rounds: int,
    csv_path: str | None = None,
) -> tuple[int, int, float, GlobalStats]:
    """Replay ``rounds`` of traffic under one policy; returns
    (impressions, clicks, profit, final stats)."""
    spec = population.spec
    arrival_rng = np.random.default_rng([spec.seed, 1])
    click_rng = np.random.default_rng([spec.seed, 2])
    policy_rng = np.random.default_rng([spec.seed, 3])
    seeding_rng = np.random.default_rng([spec.seed, 4])

    stats = GlobalStats()
    users = [_UserState(f"u{i}") for i in range(spec.num_users)]
    _seed_feature_events(population, users, stats, seeding_rng)

    banner_ids = population.banner_ids
    banner_index = {b: j for j, b in enumerate(banner_ids)}
    impressions = clicks = 0
    profit = 0.0

    writer = None
    csv_file = None
    if csv_path is not None:
        csv_file = open(csv_path, "w", newline="", encoding="utf-8")
        writer = csv.writer(csv_file)
        writer.writerow(CSV_COLUMNS)

    try:
        for r in range(rounds):
            u = int(arrival_rng.integers(spec.num_users))
            state = users[u]
            now = _ROUND_EPOCH + r
            if policy == "engine":
                request = SelectionRequest(
                    history=state.history(),
                    candidates=banner_ids,
                    now=now,
                    objective=Objective.CLICKS,
                )
                winner = select_banner(stats, request, engine_cfg).winner
            else:
                winner = banner_ids[int(policy_rng.integers(spec.num_banners))]

            state.add_impression(stats, winner, now)
            impressions += 1
            clicked = bool(
                click_rng.random() < population.click_prob[u, banner_index[winner]]
            )
            if clicked:
                state.add_click(stats, winner, now, engine_cfg.unique_only)
                clicks += 1
                econ = engine_cfg.economics.get(winner)
                profit += econ.cpc if econ is not None else 1.0

            if writer is not None:
                writer.writerow(
                    (
                        r,
                        state.user,
                        winner,
                        int(clicked),
                        impressions,
                        clicks,
                        f"{clicks / impressions:.6f}",
                        f"{profit:.6f}",
                    )
                )
    finally:
        if csv_file is not None:
            csv_file.close()
    return impressions, clicks, profit, stats


def _ranking_agreement(
    population: Population, stats: GlobalStats, engine_cfg: EngineConfig
) -> float:
    """Fraction of the (feature subset x banner) grid where the engine's
    value ranking position matches the oracle's."""
    spec = population.spec
    oracle_rng = np.random.default_rng([spec.seed, 5])
    feature_range = range(spec.num_features)
    total = matches = 0
    for size in range(spec.num_features + 1):
        for subset in combinations(feature_range, size):
            fids = [population.feature_ids[f] for f in subset]
            engine_vals = [
                val(stats, fids, b, engine_cfg.smoothing) for b in population.banner_ids
            ]
            oracle_vals = [
                oracle_conditional_ctr(population, subset, j, rng=oracle_rng)
                for j in range(spec.num_banners)
            ]
            engine_rank = _rank_positions(engine_vals)
            oracle_rank = _rank_positions(oracle_vals)
            for j in range(spec.num_banners):
                total += 1
                matches += int(engine_rank[j] == oracle_rank[j])
    return matches / total if total else 1.0


def _rank_positions(values: Sequence[float]) -> list[int]:
    """Rank of each entry under descending sort, ties broken by index."""
    order = sorted(range(len(values)), key=lambda i: (-values[i], i))
    ranks = [0] * len(values)
    for position, i in enumerate(order):
        ranks[i] = position
    return ranks


def run_simulation(
    spec: PopulationSpec,
    engine_cfg: EngineConfig | None = None,
    policy: str = "engine",
    rounds: int = 10_000,
    csv_path: str | None = None,
    compute_agreement: bool = False,
) -> SimReport:
    """Run one policy over a seeded population and report CTR lift.

    The uniform-random baseline is always replayed on the same population
    with identical arrival and click streams, so ``lift`` compares like
    with like (a random-policy run is its own baseline and has lift 1).
    ``compute_agreement`` additionally scores the engine's value ranking
    against the Monte Carlo oracle; it requires an oracle-sized instance.

    Args:
        spec: population parameters (seed included).
        engine_cfg: engine configuration; defaults to EngineConfig().
        policy: "engine" or "random".
        rounds: impressions to serve.
        csv_path: optional per-round time series destination.
        compute_agreement: fill ``ranking_agreement`` (small instances only).
    """
    if policy not in ("engine", "random"):
        raise ValueError(f"unknown policy {policy!r}")
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    engine_cfg = engine_cfg or EngineConfig()
    population = generate_population(spec)

    impressions, clicks, profit, stats = _run_policy(
        population, engine_cfg, policy, rounds, csv_path=csv_path
    )
    if policy == "random":
        base_impressions, base_clicks = impressions, clicks
    else:
        base_impressions, base_clicks, _, _ = _run_policy(
            population, engine_cfg, "random", rounds
        )

    ctr = clicks / impressions if impressions else 0.0
    baseline_ctr = base_clicks / base_impressions if base_impressions else 0.0
    lift = ctr / baseline_ctr if baseline_ctr > 0 else None
    agreement = None
    if compute_agreement:
        agreement = _ranking_agreement(population, stats, engine_cfg)
    return SimReport(
        impressions=impressions,
        clicks=clicks,
        ctr=ctr,
        profit=profit,
        baseline_ctr=baseline_ctr,
        lift=lift,
        ranking_agreement=agreement,
    )
