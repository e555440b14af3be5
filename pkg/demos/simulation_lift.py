## Measuring CTR lift against a uniform-random baseline

# A synthetic population with three behavioral segments: each feature
# multiplies one banner's click odds (6x, 4x, 3x).  The engine has to
# discover that structure online, from its own served impressions, and
# the harness reports its CTR against a uniform-random policy replayed on
# the same arrival and click streams.
#
# The same run is available from the command line:
#
#   sim run --spec population.json --policy engine --rounds 50000 --out ts.csv

from dataclasses import asdict

from bbe import EngineConfig, PopulationSpec, run_simulation
from bbe.scoring import SmoothingParams, ThrottleParams

spec = PopulationSpec(
    seed=7,
    num_users=1500,
    num_features=3,
    num_banners=3,
    feature_prevalence=(0.2, 0.2, 0.2),
    base_ctr=(0.01, 0.03, 0.07),
    lift_matrix=((6.0, 1.0, 1.0), (1.0, 4.0, 1.0), (1.0, 1.0, 3.0)),
    events_per_user=1,
)

cfg = EngineConfig(
    smoothing=SmoothingParams(kappa=10, prior_ctr=0.01),
    throttle=ThrottleParams(alpha=0.5, half_life_seconds=600),
)

### Run both policies

# `run_simulation` replays the uniform-random baseline internally, so one
# call yields the comparison.

report = run_simulation(spec, cfg, policy="engine", rounds=50_000)

print("engine policy:")
for key, value in asdict(report).items():
    print(f"  {key:18s} {value}")

# Typical outcome: engine CTR ~0.093 vs baseline ~0.052, lift ~1.8.
# Users carrying a feature get their boosted banner once its cell CTRs
# separate from the prior; everyone else gets the best base-rate banner,
# modulo the throttle rotating away from recently shown ones.

### Ranking agreement needs unbiased traffic

# With three features and three banners the instance is small enough for
# the Monte Carlo oracle, so we can also score the engine's value ranking
# against ground truth.  That check trains on *random* traffic: under the
# engine's own policy, rarely-served cells never accumulate data and sit
# at the smoothing prior, so their rank is meaningless (the usual
# exploration/exploitation trade-off, not an estimator bug).

unbiased = run_simulation(
    spec, cfg, policy="random", rounds=50_000, compute_agreement=True
)
print(f"\nvalue-vs-oracle ranking agreement (random traffic): "
      f"{unbiased.ranking_agreement:.0%}")
