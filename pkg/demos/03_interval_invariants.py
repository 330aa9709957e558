"""Interval invariant inference: sound per-neuron bounds from the input box.

The bounds account for the quantized semantics (weight quantization, rescale
rounding, overflow behaviour), so they can be injected into the SMT encoding
as redundant assume constraints and used to prune lookup trees.
"""

import numpy as np

from qnnv.fixedpoint import FxpConfig
from qnnv.interval import (
    Box,
    Interval,
    emit_invariant_constraints,
    format_invariant_report,
    infer_invariants,
)
from qnnv.lut import tables_for_model
from qnnv.model import DenseLayer, ModelIR

rng = np.random.default_rng(1)
model = ModelIR((
    DenseLayer(rng.uniform(-1, 1, size=(3, 2)).round(2),
               rng.uniform(-0.5, 0.5, 3).round(2), "relu"),
    DenseLayer(rng.uniform(-1, 1, size=(2, 3)).round(2),
               rng.uniform(-0.5, 0.5, 2).round(2), "sigmoid"),
))

cfg = FxpConfig(4, 4)
luts = tables_for_model(model)
H = Box((Interval(0.0, 1.0), Interval(-0.5, 0.5)))

inv = infer_invariants(model, H, luts, cfg.quantum, cfg)
print("per-neuron bounds (pre-activation u, post-activation y):")
for k, (pre, post) in enumerate(zip(inv.pre, inv.post)):
    for j, (u, y) in enumerate(zip(pre, post)):
        print(f"  layer {k} neuron {j}: u in [{u.lo:+.4f}, {u.hi:+.4f}]  "
              f"y in [{y.lo:+.4f}, {y.hi:+.4f}]")

print(f"\nmean post-activation interval width: {inv.mean_width():.4f}")
print(f"injectable constraints: {len(emit_invariant_constraints(inv))}")

print("\nannotated-code shape (what gets inserted back as assumes):")
print(format_invariant_report(inv))
