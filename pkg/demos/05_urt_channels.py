"""Does a side channel help?  URT ping as an extra network input.

In ``informative`` mode the ping carries a noisy copy of next cycle's
latency; in ``pure_noise`` mode it carries nothing.  The same seed gives the
same latency and cost series in all three modes.
"""

import numpy as np

from tva.datagen import SynthConfig, synth_trace
from tva.pipeline import PrepareConfig, TrainConfig, prepare, train, validation_mse
from tva.trace import downsample

evolve_cfg = {"max_evaluations": 100, "bptt_epochs": 5, "bptt_lr": 0.01}
for mode in ("none", "informative", "pure_noise"):
    ds = synth_trace(SynthConfig(seed=42, urt_mode=mode))
    if mode != "none":
        ping, lat = ds.column("urt_ping"), ds.column("latency")
        print(f"{mode}: corr(ping_t, latency_t+1) = {np.corrcoef(ping[:-1], lat[1:])[0, 1]:+.3f}")
    prep = prepare(ds, PrepareConfig(train_stride=4, use_urt=mode != "none"))
    p, _ = train(prep, TrainConfig(model="ernn", evolve=evolve_cfg), seed=1)
    print(f"  {mode:12s} inputs {prep.input_channels}  latency val MSE {validation_mse(p, prep)['latency']:.5f}")

# The second kind of uncertainty reduction: sample the tactic less often.
ds = synth_trace(SynthConfig(seed=42))
for n in (5, 10, 20):
    print(f"every {n:2d}th observation -> {len(downsample(ds, n))} records")
