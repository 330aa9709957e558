"""Cross-checking the SMT pipeline against the brute-force oracle.

For small input grids the property can be decided by running every
quantized input through the interpreter; the SMT route must agree exactly. This is
the toolkit's own acceptance methodology, usable from the CLI as
`qnnv oracle ...` with the same flags as `qnnv verify`.
"""

import sys
from pathlib import Path

import numpy as np

from qnnv.encoder import encode_fxp
from qnnv.fixedpoint import FxpConfig
from qnnv.lut import tables_for_model
from qnnv.model import DenseLayer, ModelIR
from qnnv.oracle import brute_force_verify
from qnnv.properties import parse_property
from qnnv.solver import discover_solvers, run_solver

solvers = discover_solvers(
    extra_dirs=(str(Path(__file__).resolve().parents[1] / "solvers" / "z3js"),))
if not solvers:
    sys.exit("no SMT solver found; run solvers/setup_z3js.sh first")

rng = np.random.default_rng(99)
model = ModelIR((
    DenseLayer(rng.uniform(-2, 2, size=(3, 2)).round(2),
               rng.uniform(-1, 1, 3).round(2), "sigmoid"),
    DenseLayer(rng.uniform(-2, 2, size=(1, 3)).round(2),
               rng.uniform(-1, 1, 1).round(2), "linear"),
))
cfg = FxpConfig(2, 4)
luts = tables_for_model(model)

properties = [
    "assume x[0] >= -1; assume x[0] <= 1; assume x[1] >= -1; assume x[1] <= 1; assert y[0] <= 2;",
    "assume x[0] >= 0; assume x[0] < 0.5; assume x[1] >= 0; assume x[1] <= 0.25; assert y[0] > 0;",
    "assert y[0] <= 1.5;",  # inputs fully nondeterministic
]

for text in properties:
    prop = parse_property(text)
    oracle = brute_force_verify(model, cfg, luts, prop)
    smt = run_solver(encode_fxp(model, cfg, luts, prop), solvers[0], 120)
    agree = "AGREE" if oracle.status == smt.status else "DISAGREE (bug!)"
    print(f"oracle={oracle.status:7} smt={smt.status:7} {agree}"
          f"   [{text[:60]}...]")
