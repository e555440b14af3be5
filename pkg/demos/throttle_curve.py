## The anti-boredom throttle

# Each past impression of a banner multiplies its value by
# 1 - alpha * (1/2) ** (age / half_life): a fresh impression damps hard,
# and the damping relaxes back toward 1 as the impression ages.  This
# script tabulates the curve and shows how repeated impressions compound.

from bbe import EventKind, HistoryEvent, ThrottleParams, UserHistory, throttle

params = ThrottleParams(alpha=0.5, half_life_seconds=3600)

### One impression, aging away

print(f"alpha={params.alpha}, half-life={params.half_life_seconds}s\n")
print("age of single impression -> throttle")
for age_hours in (0, 0.5, 1, 2, 4, 8, 24):
    age = int(age_hours * 3600)
    h = UserHistory(user="u", events=(HistoryEvent(EventKind.IMPRESSION, "b", 0),))
    value = throttle(h, "b", age, params)
    bar = "#" * int(round(value * 40))
    print(f"  {age_hours:5.1f}h  {value:.4f}  {bar}")

### Impressions compound multiplicatively

# Serving the same banner repeatedly right now stacks factors of
# (1 - alpha): two immediate impressions with alpha = 0.5 leave only a
# quarter of the value.

print("\nback-to-back impressions -> throttle")
for m in range(0, 6):
    h = UserHistory(
        user="u",
        events=tuple(HistoryEvent(EventKind.IMPRESSION, "b", 100) for _ in range(m)),
    )
    print(f"  m={m}  {throttle(h, 'b', 100, params):.4f}")

# Optional: render the decay curve with matplotlib (pip install bbe[plot]).
if __name__ == "__main__":
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("\nmatplotlib not installed; skipping the plot")
    else:
        ages = range(0, 24 * 3600, 300)
        h = UserHistory(user="u", events=(HistoryEvent(EventKind.IMPRESSION, "b", 0),))
        values = [throttle(h, "b", a, params) for a in ages]
        plt.plot([a / 3600 for a in ages], values)
        plt.xlabel("impression age (hours)")
        plt.ylabel("throttle")
        plt.title("single-impression throttle vs age")
        plt.savefig("throttle_curve.png", dpi=120)
        print("\nwrote throttle_curve.png")
