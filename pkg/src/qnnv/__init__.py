"""qnnv: SMT-based verification of quantized feedforward neural networks.

The toolkit encodes a network's bit-exact quantized semantics (fixed-point
or IEEE binary32) together with assume/assert safety properties into
SMT-LIB2, prunes the search with interval invariants, dispatches external
solvers, and validates every counterexample against a built-in quantized
interpreter.
"""

from .errors import QnnvError
from .fixedpoint import FxpConfig, FxpValue, parse_quant_spec
from .model import ModelIR, DenseLayer, parse_nnet, parse_json_model, forward_real
from .lut import LookupTable, build_lut, lut_eval, lut_eval_fxp
from .interval import Interval, Box, InvariantMap, infer_invariants
from .properties import Property, LinearConstraint, parse_property, robustness_property
from .encoder import SmtScript, encode_fxp, encode_float, emit_c, decode_model
from .solver import SolverSpec, run_solver, run_batch
from .verdicts import Verdict, Counterexample, Trace
from .oracle import interpret_quantized, brute_force_verify

__version__ = "0.1.0"

__all__ = [
    "QnnvError",
    "FxpConfig",
    "FxpValue",
    "parse_quant_spec",
    "ModelIR",
    "DenseLayer",
    "parse_nnet",
    "parse_json_model",
    "forward_real",
    "LookupTable",
    "build_lut",
    "lut_eval",
    "lut_eval_fxp",
    "Interval",
    "Box",
    "InvariantMap",
    "infer_invariants",
    "Property",
    "LinearConstraint",
    "parse_property",
    "robustness_property",
    "SmtScript",
    "encode_fxp",
    "encode_float",
    "emit_c",
    "decode_model",
    "SolverSpec",
    "Verdict",
    "Counterexample",
    "Trace",
    "run_solver",
    "run_batch",
    "interpret_quantized",
    "brute_force_verify",
]
