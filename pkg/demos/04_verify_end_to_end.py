"""End-to-end verification: encode a robustness property, solve, replay.

Needs an SMT solver; run solvers/setup_z3js.sh once if none is installed.
The same flow is available from the command line:

    qnnv verify --model net.json --property prop.qnp --quant fxp:4.4
"""

import sys
from pathlib import Path

import numpy as np

from qnnv.encoder import encode_fxp
from qnnv.fixedpoint import FxpConfig
from qnnv.interval import Interval, infer_invariants
from qnnv.lut import tables_for_model
from qnnv.model import DenseLayer, ModelIR
from qnnv.properties import extract_box, robustness_property
from qnnv.solver import discover_solvers, run_solver

solvers = discover_solvers(
    extra_dirs=(str(Path(__file__).resolve().parents[1] / "solvers" / "z3js"),))
if not solvers:
    sys.exit("no SMT solver found; run solvers/setup_z3js.sh first")
solver = solvers[0]
print(f"solver: {solver.name} at {solver.path}")

# a tiny 2-class network and a reference input
rng = np.random.default_rng(8)
model = ModelIR((
    DenseLayer(rng.uniform(-1.5, 1.5, size=(3, 2)).round(2),
               rng.uniform(-0.5, 0.5, 3).round(2), "tanh"),
    DenseLayer(rng.uniform(-1.5, 1.5, size=(2, 3)).round(2),
               rng.uniform(-0.5, 0.5, 2).round(2), "linear"),
))
cfg = FxpConfig(4, 4)
luts = tables_for_model(model)
x0 = [0.25, -0.5]

# verify robustness of the class the quantized network itself predicts
from qnnv.oracle import interpret_quantized

outputs = interpret_quantized(model, cfg, luts, x0).outputs
predicted = int(np.argmax(outputs))
print(f"prediction at x0={x0}: class {predicted} (outputs {outputs})")

for radius in (0.0625, 0.25, 0.75):
    prop = robustness_property(x0, radius, target_class=predicted,
                               num_outputs=model.output_dim)
    box = extract_box(prop, model.input_dim,
                      Interval(cfg.value_min, cfg.value_max))
    invariants = infer_invariants(model, box, luts, cfg.quantum, cfg)
    script = encode_fxp(model, cfg, luts, prop, invariants)
    verdict = run_solver(script, solver, timeout=120)
    line = f"radius {radius:7}: {verdict.status}"
    if verdict.counterexample is not None:
        cex = verdict.counterexample
        xs = [qi.value for qi in cex.input_values]
        line += (f"  witness x={xs} outputs={cex.trace.outputs}"
                 f" (violates assert #{cex.violated_assert}, replay-checked)")
    print(line)
