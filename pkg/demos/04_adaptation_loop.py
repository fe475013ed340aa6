"""Run the per-cycle update/pass decision with different predictors.

Each cycle predicts latency and cost, turns them into a utility
150 / (latency + cost) and updates when that reaches 1000.  The truth
decision uses the observed values of the same cycle.
"""

from tva.datagen import SynthConfig, synth_trace
from tva.decision import UtilityParams
from tva.metrics import build_report
from tva.pipeline import PrepareConfig, TrainConfig, prepare, simulate, train

prep = prepare(synth_trace(SynthConfig(seed=42)), PrepareConfig(train_stride=4))
params = UtilityParams(reward=150.0, threshold=1000.0)

predictors = {
    "persistence": train(prep, TrainConfig(model="persistence"))[0],
    "arima": train(prep, TrainConfig(model="arima"))[0],
    "mlp": train(prep, TrainConfig(model="mlp", epochs=20, lr=0.01), seed=1)[0],
}
results = {"synthetic": {name: simulate(p, prep, params) for name, p in predictors.items()}}
results["synthetic"]["oracle"] = simulate(None, prep, params, oracle=True)

report = build_report(results)
print(f"{'model':12s} {'acc':>6s} {'FPR':>6s} {'FNR':>6s} {'U gain':>10s} {'U loss':>10s} {'U MAPE':>7s}")
for name, entry in report.sources["synthetic"].items():
    d = entry["decisions"]
    print(f"{name:12s} {d['accuracy']:6.3f} {d['fpr']:6.3f} {d['fnr']:6.3f} "
          f"{d['u_gain']:10.0f} {d['u_loss']:10.0f} {entry['utility_mape']:6.1f}%")

# FPR here is FP / (TP + FP): the share of updates that should not have happened.
