"""Evolve a small recurrent network and compare it to fixed architectures.

The search starts from inputs wired straight to outputs and grows the graph
with node and edge mutations; every child gets a few epochs of BPTT and is
scored on the test split.  Budget here is small so it finishes in about
a minute; the acceptance run uses 500 evaluations.
"""

import time

from tva.datagen import SynthConfig, synth_trace
from tva.pipeline import PrepareConfig, TrainConfig, prepare, train, validation_mse
from tva.predictors import PersistencePredictor
from tva.rnn import count_params

prep = prepare(synth_trace(SynthConfig(seed=42)), PrepareConfig(train_stride=4))
print("training windows:", len(prep.windows["train"]))

t0 = time.monotonic()
ernn, slog = train(prep, TrainConfig(model="ernn", evolve={"max_evaluations": 200, "bptt_epochs": 5,
                                                            "bptt_lr": 0.01}), seed=1)
print(f"search took {time.monotonic() - t0:.0f} s")

# best-so-far fitness every 25 evaluations
curve = slog.best_so_far()
for k in range(0, len(curve), 25):
    print(f"  eval {k + 1:4d}  best test MSE {curve[k]:.5f}")

g = ernn.genome
print("best genome:", count_params(g), "(nodes, weights)")
print("hidden kinds:", sorted(n.kind for n in g.hidden()))
print("recurrent edges:", sorted(e.recurrent_depth for e in g.enabled_edges() if e.recurrent_depth))

mlp, _ = train(prep, TrainConfig(model="mlp", epochs=20, lr=0.01), seed=1)
for name, p in (("persistence", PersistencePredictor()), ("mlp-100", mlp), ("ernn", ernn)):
    print(f"{name:12s} validation MSE {validation_mse(p, prep)['mean']:.5f}")
print("mlp-100 size:", count_params(mlp.genome))
