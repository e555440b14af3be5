## A complete HTTP session against the serving layer

# The service is stateless per user: the client carries its history in the
# cookie blob and returns it on every call.  This script starts a server
# in-process, walks one cookie through select -> click -> page view ->
# select, and prints the global stats at the end.

import json
import threading

import requests

from bbe.scoring import BannerEconomics, EngineConfig
from bbe.service import AdServer, AdService, ServiceConfig

config = ServiceConfig(
    listen="127.0.0.1:0",  # ephemeral port
    engine=EngineConfig(
        economics={
            "sneaker-sale": BannerEconomics(cpc=0.40),
            "hiking-boots": BannerEconomics(cpc=0.55),
        }
    ),
)
server = AdServer(AdService(config))
threading.Thread(target=server.serve_forever, daemon=True).start()
base = f"http://{server.address}"
print(f"serving on {base}\n")

### First request: no cookie yet

body = {
    "cookie": None,
    "candidates": ["sneaker-sale", "hiking-boots"],
    "now": 1_000,
    "objective": "profit",
}
resp = requests.post(f"{base}/v1/select", json=body, timeout=5).json()
print("served:", resp["banner"])
print("cookie:", resp["cookie"])
cookie = resp["cookie"]

### The user clicks, then reads a review page

for event in (
    {"kind": "clk", "obj": resp["banner"], "time": 1_005},
    {"kind": "pv", "obj": "outdoors.example/reviews", "time": 1_060},
):
    resp = requests.post(
        f"{base}/v1/event", json={"cookie": cookie, "event": event}, timeout=5
    ).json()
    cookie = resp["cookie"]

### Second selection: the click history now shapes the scores

body = {
    "cookie": cookie,
    "candidates": ["sneaker-sale", "hiking-boots"],
    "now": 2_000,
    "objective": "profit",
}
resp = requests.post(f"{base}/v1/select", json=body, timeout=5).json()
print("\nsecond serve:", resp["banner"])
for entry in resp["scores"]:
    print(
        f"  {entry['banner']:13s} val={entry['val']:.4f} "
        f"throttle={entry['throttle']:.4f} score={entry['score']:.5f}"
    )

### Global counters so far

stats = requests.get(f"{base}/v1/stats", timeout=5).json()
print("\n/v1/stats:")
print(json.dumps(stats, indent=2, sort_keys=True))

server.shutdown()
