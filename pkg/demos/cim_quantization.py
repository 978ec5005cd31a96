"""Running the sequential ensemble through a quantized crossbar pipeline.

Each layer is simulated as DAC-quantize, analog MAC, ADC-quantize, then
a counter-derived binary control word routes the result to one member's
normalization row (kept at full precision, as digital periphery would).
Fidelity against the exact float path improves monotonically with bits.
"""

import numpy as np

from tinyde.cim import QuantSpec, calibrate, run_sequential_inference
from tinyde.data import standardize, synth_regression, Dataset
from tinyde.ensemble import TinyDEModel
from tinyde.training import TrainConfig, train_two_phase

M = 4
ds = synth_regression(512, seed=7)
train, test, _ = standardize(Dataset(ds.X[:384], ds.y[:384]),
                             Dataset(ds.X[384:], ds.y[384:]))
model = TinyDEModel.build(train.Q, [32, 32], 1, M, seed=7)
train_two_phase(model, train.X, train.y,
                TrainConfig(epochs=20, batch_size=32, seed=7))

exact = model.forward_all_sequential(test.X)
base = calibrate(model, test.X)
print(f"calibrated DAC range {base.dac_range}, ADC range "
      f"({base.adc_range[0]:.2f}, {base.adc_range[1]:.2f})\n")

print(f"{'bits':>6s} {'mean |err|':>12s} {'task RMSE':>10s}")
for bits in (4, 6, 8, 10, 12, "ideal"):
    if bits == "ideal":
        q = QuantSpec.ideal()
    else:
        q = QuantSpec(dac_bits=bits, adc_bits=bits,
                      dac_range=base.dac_range, adc_range=base.adc_range)
    out = run_sequential_inference(model, test.X, q)
    mae = float(np.abs(out - exact).mean())
    rmse = float(np.sqrt(np.mean((out.mean(axis=0) - test.y) ** 2)))
    print(f"{bits!s:>6s} {mae:>12.6f} {rmse:>10.4f}")

# a routing trace shows the control words the counter generates
trace = []
run_sequential_inference(model, test.X[:1], QuantSpec.ideal(), Q=2, trace=trace)
print("\nrouting trace (first pass):")
for line in trace[:2]:
    print(" ", line)
