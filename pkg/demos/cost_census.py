"""What does an M-member ensemble cost, method by method?

The analytic census counts parameters and forward-pass MACs over an
abstract layer list (the shipped ResNet-32-shaped spec here) and reports
memory and latency relative to a single model.  The shared-weight
normalization ensemble pays only (M-1) extra sets of norm scalars.
"""

from tinyde.costmodel import METHODS, census, resnet32_spec

spec = resnet32_spec()
norm = spec.norm_params(include_buffers=True)
total = spec.total_params()
print(f"spec '{spec.name}': {total} parameters, "
      f"{norm} in normalization layers ({100 * norm / total:.2f}%)\n")

print(f"{'method':20s} {'M':>3s} {'rel. memory':>12s} {'rel. latency':>13s}")
for M in (1, 5, 10):
    for method in METHODS:
        c = census(spec, method, M)
        print(f"{method:20s} {M:>3d} {float(c.relative_memory):>12.4f} "
              f"{float(c.relative_latency):>13.4f}")
    print()
