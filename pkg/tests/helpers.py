"""Shared generators and reference oracles for the test suite.

The reference fixed-point oracle here is written independently of the
package (Fraction-based rounding, explicit two's-complement wrap) so the
exhaustive agreement tests compare two separately derived implementations.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction

import numpy as np

from qnnv.model import DenseLayer, ModelIR
from qnnv.properties import LinearConstraint, Property, robustness_property

# --- independent fixed-point reference ---------------------------------------


def ref_round(value: Fraction, mode: str) -> int:
    """Round an exact rational: floor ("tn") or half-to-even ("rne")."""
    floor = math.floor(value)
    if mode == "tn":
        return floor
    frac = value - floor
    if frac > Fraction(1, 2):
        return floor + 1
    if frac < Fraction(1, 2):
        return floor
    return floor if floor % 2 == 0 else floor + 1


def ref_overflow(raw: int, width: int, mode: str) -> int:
    lo = -(1 << (width - 1))
    hi = (1 << (width - 1)) - 1
    if mode == "sat":
        return min(max(raw, lo), hi)
    return ((raw - lo) % (1 << width)) + lo


def ref_add(a: int, b: int, width: int, overflow: str) -> int:
    return ref_overflow(a + b, width, overflow)


def ref_sub(a: int, b: int, width: int, overflow: str) -> int:
    return ref_overflow(a - b, width, overflow)


def ref_mult(a: int, b: int, width: int, frac: int, overflow: str, rounding: str) -> int:
    wide = Fraction(a * b, 1 << frac)
    return ref_overflow(ref_round(wide, rounding), width, overflow)


def ref_div(a: int, b: int, width: int, frac: int, overflow: str, rounding: str) -> int:
    assert b != 0
    exact = Fraction(a << frac, b)
    return ref_overflow(ref_round(exact, rounding), width, overflow)


def ref_float_to_raw(x: float, width: int, frac: int, overflow: str, rounding: str) -> int:
    return ref_overflow(ref_round(Fraction(x) * (1 << frac), rounding), width, overflow)


# --- random instance generators -----------------------------------------------


def random_model(rng: np.random.Generator, pyrng: random.Random,
                 max_layers: int = 3, max_neurons: int = 4, max_inputs: int = 2,
                 activations=("relu", "sigmoid", "tanh", "linear")) -> ModelIR:
    n_in = pyrng.randint(1, max_inputs)
    layers = []
    prev = n_in
    for _ in range(pyrng.randint(1, max_layers)):
        width = pyrng.randint(1, max_neurons)
        act = pyrng.choice(activations)
        w = rng.uniform(-2.0, 2.0, size=(width, prev)).round(2)
        b = rng.uniform(-1.0, 1.0, size=width).round(2)
        layers.append(DenseLayer(w, b, act))
        prev = width
    return ModelIR(tuple(layers))


def random_box_property(rng: np.random.Generator, pyrng: random.Random,
                        m: ModelIR) -> Property:
    assumes = []
    for i in range(m.input_dim):
        lo = round(rng.uniform(-2.0, 1.0), 2)
        hi = round(lo + rng.uniform(0.1, 2.0), 2)
        assumes.append(LinearConstraint(((1.0, "x", i),), ">=", lo))
        assumes.append(LinearConstraint(((1.0, "x", i),), pyrng.choice(("<=", "<")), hi))
    asserts = []
    for _ in range(pyrng.randint(1, 2)):
        j = pyrng.randrange(m.output_dim)
        cmp = pyrng.choice(("<=", ">=", ">", "<"))
        asserts.append(LinearConstraint(((1.0, "y", j),), cmp, round(rng.uniform(-2, 2), 2)))
    return Property(tuple(assumes), tuple(asserts), "box")


def random_robustness(rng: np.random.Generator, pyrng: random.Random,
                      m: ModelIR) -> Property | None:
    if m.output_dim < 2:
        return None
    x0 = rng.uniform(-1.0, 1.0, size=m.input_dim).round(2)
    radius = pyrng.choice((0.0, 0.125, 0.25, 0.5))
    target = pyrng.randrange(m.output_dim)
    return robustness_property(x0, radius, target, m.output_dim)


def random_instance(rng, pyrng, quant_choices):
    """One (model, cfg, property) acceptance-suite instance."""
    from qnnv.fixedpoint import FxpConfig

    m = random_model(rng, pyrng)
    cfg = FxpConfig(*pyrng.choice(list(quant_choices)))
    if pyrng.random() < 0.4:
        p = random_robustness(rng, pyrng, m)
        if p is not None:
            return m, cfg, p
    return m, cfg, random_box_property(rng, pyrng, m)
