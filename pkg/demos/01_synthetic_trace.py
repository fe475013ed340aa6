"""A look at the synthetic tactic trace.

Latency is an AR(1) process around 50 ms with rare multiplicative spikes;
cost sits on a piecewise-constant level that shifts every 500 records.
"""

import numpy as np

from tva.datagen import SynthConfig, synth_trace
from tva.trace import normalize_fit_apply, split_chronological

cfg = SynthConfig(seed=42)
ds = synth_trace(cfg)
lat, cost = ds.column("latency"), ds.column("cost")
print(f"{len(ds)} records, channels {ds.channels}")

# The body of the latency distribution is tight, the tail is not.
q = np.percentile(lat, [50, 90, 99, 99.9])
print("latency percentiles 50/90/99/99.9:", np.round(q, 4))
print(f"spikes above 3x median: {np.sum(lat > 3 * q[0])}")

# Cost regimes: block means over the first few 500-record segments
blocks = cost[: 3000].reshape(6, 500).mean(axis=1)
print("cost level per 500-record block:", np.round(blocks, 3))

# Chronological 70/15/15 split, then min-max scaling fitted on train only
ds = split_chronological(ds)
norm = normalize_fit_apply(ds)
print("split (train, test, val):", ds.split)
val_lat = norm.column("latency")[ds.split_bounds()["val"][0]:]
print(f"normalized validation latency range: [{val_lat.min():.3f}, {val_lat.max():.3f}]")
