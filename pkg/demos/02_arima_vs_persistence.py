"""ARIMA(1,1,0) against the last-value forecast on the synthetic trace.

Both are fit (ARIMA) or defined (persistence) on the training split and then
scored with teacher-forced one-step forecasts on the validation split.
"""

from tva.datagen import SynthConfig, synth_trace
from tva.pipeline import PrepareConfig, TrainConfig, prepare, train, validation_mse
from tva.predictors import PersistencePredictor

prep = prepare(synth_trace(SynthConfig(seed=42)), PrepareConfig())

arima, _ = train(prep, TrainConfig(model="arima"))
for ch, m in arima.models.items():
    print(f"{ch}: phi = {m.phi:+.3f}")

# Negative phi on both channels: differencing a mean-reverting series
# leaves negatively correlated steps, so ARIMA pulls part of each jump back.
for name, p in (("persistence", PersistencePredictor()), ("arima", arima)):
    mse = validation_mse(p, prep)
    print(f"{name:12s} latency {mse['latency']:.5f}  cost {mse['cost']:.5f}  mean {mse['mean']:.5f}")
