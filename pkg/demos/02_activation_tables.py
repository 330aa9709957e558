"""Discretizing activation functions into certified lookup tables.

Sample count per piece follows N = ceil(L * span / (2 * eps)) + 1, which
guarantees nearest-sample lookup stays within eps of the true function;
construction finishes with a dense million-point audit of that bound.
"""

import numpy as np

from qnnv.fixedpoint import FxpConfig, float_to_fxp
from qnnv.lut import build_custom_lut, build_lut, export_lut, lut_eval, lut_eval_fxp

sigmoid = build_lut("sigmoid")  # domain [-8, 8], Lipschitz 1/4, eps 0.002
tanh = build_lut("tanh")        # domain [-4, 4], Lipschitz 1, eps 0.002
for t in (sigmoid, tanh):
    a = t.audit
    print(f"{t.source_tag}: {t.num_samples} samples, "
          f"audited max error {a.max_error:.2e} over {a.points} points")

print(f"\nsigmoid(0) via table   = {lut_eval(sigmoid, 0.0)}")
print(f"sigmoid(-100) clamps to {lut_eval(sigmoid, -100.0):.6g} "
      f"(the first sample's output)")

# quantized lookup: evaluate on the fixed-point grid, round the output once
cfg = FxpConfig(4, 4)
u = float_to_fxp(1.0, cfg)
y = lut_eval_fxp(sigmoid, u)
print(f"sigmoid_fxp(1.0) in Q(4,4) = {y.value} (raw {y.raw})")

# custom activations: supply pieces with their own Lipschitz constants
def leaky_abs(u):
    u = np.asarray(u)
    return np.where(u < 0, -0.3 * u, u)

table = build_custom_lut(leaky_abs, [(-4.0, 4.0, 1.0)], epsilon=0.01, tag="leaky_abs")
print(f"\ncustom table: {table.num_samples} samples, "
      f"max error {table.audit.max_error:.2e}")

# tables export to a plain text format users can ship for their own AFs
text = export_lut(table)
print(f"export preview:\n" + "\n".join(text.splitlines()[:6]))
