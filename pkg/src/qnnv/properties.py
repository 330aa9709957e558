"""Safety properties in implication form: assume constraints on inputs,
assert obligations on outputs.

The DSL (v1) is line-oriented: ``assume <linexpr> <cmp> <bound>;`` and
``assert <linexpr> <cmp> <bound>;`` where ``<linexpr>`` is a +/- separated
sum of optionally scaled ``x[i]`` / ``y[j]`` terms, ``<cmp>`` is one of
``< <= > >=``, and ``<bound>`` is a constant or a further term sum
(``assert y[1] > y[0];`` normalizes to ``y[1] - y[0] > 0``).  ``#`` starts
a comment.  Assumes may only mention inputs, asserts only outputs.

Constraint semantics are exact: comparisons are over the denoted real
values of the quantized variables, evaluated in exact rational arithmetic
(every float is a dyadic rational).  The encoder mirrors this exactly in
integer bit-vector arithmetic; the float32 lane instead evaluates the
left-hand side as a left-to-right binary32 fold, mirrored by fp terms.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import PropertyError, VacuousPropertyError
from .fixedpoint import FxpConfig

COMPARATORS = ("<", "<=", ">", ">=")


@dataclass(frozen=True)
class LinearConstraint:
    """sum(coef * var) <cmp> bound over input (x) or output (y) variables."""

    terms: tuple  # ((coef: float, tier: 'x'|'y', index: int), ...)
    comparator: str
    bound: float

    def __post_init__(self):
        if not self.terms:
            raise PropertyError("constraint needs at least one term")
        if self.comparator not in COMPARATORS:
            raise PropertyError(f"unknown comparator {self.comparator!r}")
        for coef, tier, index in self.terms:
            if not math.isfinite(coef):
                raise PropertyError(f"non-finite coefficient {coef!r}")
            if tier not in ("x", "y"):
                raise PropertyError(f"unknown variable tier {tier!r}")
            if index < 0:
                raise PropertyError(f"negative variable index {index}")
        if not math.isfinite(self.bound):
            raise PropertyError(f"non-finite bound {self.bound!r}")

    @property
    def tier(self) -> str:
        return self.terms[0][1]

    def _compare(self, lhs, rhs) -> bool:
        if self.comparator == "<":
            return lhs < rhs
        if self.comparator == "<=":
            return lhs <= rhs
        if self.comparator == ">":
            return lhs > rhs
        return lhs >= rhs

    def satisfied_exact(self, x_values, y_values) -> bool:
        """Exact rational evaluation; values may be Fraction or float."""
        lhs = Fraction(0)
        for coef, tier, index in self.terms:
            v = x_values[index] if tier == "x" else y_values[index]
            lhs += Fraction(coef) * Fraction(v)
        return self._compare(lhs, Fraction(self.bound))

    def satisfied_f32(self, x_values, y_values) -> bool:
        """Binary32 left-to-right fold, matching the fp encoding.

        Returns False when the fold produces NaN (IEEE comparisons with NaN
        are unordered), which matches the SMT fp.* predicates.
        """
        acc = np.float32(0.0)
        for coef, tier, index in self.terms:
            v = x_values[index] if tier == "x" else y_values[index]
            acc = np.float32(acc + np.float32(np.float32(coef) * np.float32(v)))
        return bool(self._compare(acc, np.float32(self.bound)))

    def scaled_integer_form(self, frac_bits: int):
        """Rewrite over raw values: sum(n_i * raw_i) <cmp> M with exact ints.

        Multiplies through by 2**(frac_bits + S) where S clears every dyadic
        denominator; sound and exact because floats are dyadic rationals.
        """
        coefs = [Fraction(coef) for coef, _, _ in self.terms]
        bound = Fraction(self.bound)
        shift = 0
        for c in coefs:
            shift = max(shift, (c.denominator - 1).bit_length())
        b_exp = (bound.denominator - 1).bit_length()
        shift = max(shift, b_exp - frac_bits)
        ints = []
        for (coef, tier, index), c in zip(self.terms, coefs):
            scaled = c * (1 << shift)
            assert scaled.denominator == 1
            ints.append((int(scaled), tier, index))
        m_scaled = bound * (1 << (shift + frac_bits))
        assert m_scaled.denominator == 1
        return ints, self.comparator, int(m_scaled)

    def variables(self):
        return [(tier, index) for _, tier, index in self.terms]


def _fmt_coef(coef: float) -> str:
    return repr(coef)


def serialize_constraint(c: LinearConstraint) -> str:
    parts = []
    for i, (coef, tier, index) in enumerate(c.terms):
        mag = abs(coef)
        sign = "-" if coef < 0 or (coef == 0 and math.copysign(1, coef) < 0) else "+"
        var = f"{tier}[{index}]"
        body = var if mag == 1.0 else f"{_fmt_coef(mag)}*{var}"
        if i == 0:
            parts.append(body if sign == "+" else f"-{body}")
        else:
            parts.append(f"{sign} {body}")
    return f"{' '.join(parts)} {c.comparator} {_fmt_coef(c.bound)}"


@dataclass(frozen=True)
class Property:
    """Assume/assert constraint sets H => G."""

    assumes: tuple
    asserts: tuple
    name: str = "property"

    def __post_init__(self):
        if not self.asserts:
            raise PropertyError("property needs at least one assert")
        for c in self.assumes:
            if any(tier != "x" for _, tier, _ in c.terms):
                raise PropertyError("assumes constrain inputs (x) only")
        for c in self.asserts:
            if any(tier != "y" for _, tier, _ in c.terms):
                raise PropertyError("asserts constrain outputs (y) only")

    def max_index(self, tier: str) -> int:
        top = -1
        pool = self.assumes if tier == "x" else self.asserts
        for c in pool:
            for _, t, i in c.terms:
                if t == tier:
                    top = max(top, i)
        return top

    def validate_for_model(self, input_dim: int, output_dim: int):
        if self.max_index("x") >= input_dim:
            raise PropertyError(
                f"assume references x[{self.max_index('x')}] but the model has "
                f"{input_dim} inputs"
            )
        if self.max_index("y") >= output_dim:
            raise PropertyError(
                f"assert references y[{self.max_index('y')}] but the model has "
                f"{output_dim} outputs"
            )


def serialize_property(p: Property) -> str:
    lines = [f"# property: {p.name}"]
    for c in p.assumes:
        lines.append(f"assume {serialize_constraint(c)};")
    for c in p.asserts:
        lines.append(f"assert {serialize_constraint(c)};")
    return "\n".join(lines) + "\n"


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<keyword>assume|assert)
  | (?P<number>(\d+\.\d*|\.\d+|\d+)([eE][-+]?\d+)?)
  | (?P<var>[xy]\[\d+\])
  | (?P<cmp><=|>=|<|>)
  | (?P<op>[-+*;])
""",
    re.VERBOSE,
)


class _Tokens:
    def __init__(self, text: str):
        self.items = []  # (kind, value, line, col)
        line, col = 1, 1
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                raise PropertyError(f"unexpected character {text[pos]!r}", line, col)
            kind = m.lastgroup
            value = m.group()
            if kind not in ("ws", "comment"):
                self.items.append((kind, value, line, col))
            newlines = value.count("\n")
            if newlines:
                line += newlines
                col = len(value) - value.rfind("\n")
            else:
                col += len(value)
            pos = m.end()
        self.pos = 0

    def peek(self):
        return self.items[self.pos] if self.pos < len(self.items) else (None, None, None, None)

    def next(self, expected=None):
        kind, value, line, col = self.peek()
        if kind is None:
            raise PropertyError("unexpected end of property text")
        if expected is not None and kind != expected:
            raise PropertyError(f"expected {expected}, found {value!r}", line, col)
        self.pos += 1
        return kind, value, line, col

    def done(self) -> bool:
        return self.pos >= len(self.items)


def _parse_var(value: str):
    tier = value[0]
    index = int(value[2:-1])
    return tier, index


def _parse_linexpr(toks: _Tokens):
    terms = []
    sign = 1.0
    kind, value, line, col = toks.peek()
    if kind == "op" and value in "+-":
        toks.next()
        sign = -1.0 if value == "-" else 1.0
    while True:
        kind, value, line, col = toks.peek()
        if kind == "number":
            toks.next()
            coef = sign * float(value)
            k2, v2, l2, c2 = toks.peek()
            if k2 == "op" and v2 == "*":
                toks.next()
                _, var_text, _, _ = toks.next("var")
                tier, index = _parse_var(var_text)
                terms.append((coef, tier, index))
            else:
                raise PropertyError(
                    "bare constants are not terms; fold them into the bound", line, col
                )
        elif kind == "var":
            toks.next()
            tier, index = _parse_var(value)
            terms.append((sign, tier, index))
        else:
            raise PropertyError(f"expected a term, found {value!r}", line, col)
        kind, value, line, col = toks.peek()
        if kind == "op" and value in "+-":
            toks.next()
            sign = -1.0 if value == "-" else 1.0
            continue
        break
    return terms


def _parse_rhs(toks: _Tokens):
    """Signed sum of constants and scaled variables after the comparator."""
    const_sum = 0.0
    terms = []
    sign = 1.0
    kind, value, line, col = toks.peek()
    if kind == "op" and value in "+-":
        toks.next()
        sign = -1.0 if value == "-" else 1.0
    while True:
        kind, value, line, col = toks.next()
        if kind == "number":
            k2, v2, _, _ = toks.peek()
            if k2 == "op" and v2 == "*":
                toks.next()
                _, var_text, _, _ = toks.next("var")
                tier, index = _parse_var(var_text)
                terms.append((sign * float(value), tier, index))
            else:
                const_sum += sign * float(value)
        elif kind == "var":
            tier, index = _parse_var(value)
            terms.append((sign, tier, index))
        else:
            raise PropertyError(f"expected a bound term, found {value!r}", line, col)
        kind, value, line, col = toks.peek()
        if kind == "op" and value in "+-":
            toks.next()
            sign = -1.0 if value == "-" else 1.0
            continue
        return const_sum, terms


def parse_property(text: str, input_dim=None, output_dim=None,
                   name: str = "property") -> Property:
    """Parse DSL text; optional dims enable index range checking."""
    toks = _Tokens(text)
    assumes, asserts = [], []
    while not toks.done():
        kind, value, line, col = toks.next()
        if kind != "keyword":
            raise PropertyError(f"expected assume/assert, found {value!r}", line, col)
        is_assume = value == "assume"
        terms = _parse_linexpr(toks)
        _, cmp_text, _, _ = toks.next("cmp")
        # right-hand side may mix constants and variable terms; variable
        # terms fold onto the left with negated coefficients, so
        # "y[1] > y[0]" normalizes to "y[1] - y[0] > 0"
        bound, rhs_terms = _parse_rhs(toks)
        terms.extend((-coef, tier, index) for coef, tier, index in rhs_terms)
        skind, svalue, sline, scol = toks.next()
        if skind != "op" or svalue != ";":
            raise PropertyError(f"expected ';', found {svalue!r}", sline, scol)
        try:
            constraint = LinearConstraint(tuple(terms), cmp_text, bound)
        except PropertyError as exc:
            raise PropertyError(str(exc), line, col) from None
        if is_assume:
            if any(tier != "x" for _, tier, _ in terms):
                raise PropertyError("assumes constrain inputs (x[i]) only", line, col)
            assumes.append(constraint)
        else:
            if any(tier != "y" for _, tier, _ in terms):
                raise PropertyError("asserts constrain outputs (y[j]) only", line, col)
            asserts.append(constraint)
    if not asserts:
        raise PropertyError("property has no assert statement")
    prop = Property(tuple(assumes), tuple(asserts), name)
    if input_dim is not None and output_dim is not None:
        prop.validate_for_model(input_dim, output_dim)
    return prop


def robustness_property(x0, radius: float, target_class: int, num_outputs: int,
                        name=None) -> Property:
    """L-infinity ball around x0 must keep target_class the strict argmax."""
    if radius < 0:
        raise PropertyError(f"radius must be non-negative, got {radius}")
    if not 0 <= target_class < num_outputs:
        raise PropertyError(
            f"target class {target_class} out of range for {num_outputs} outputs"
        )
    assumes = []
    for i, v in enumerate(x0):
        v = float(v)
        assumes.append(LinearConstraint(((1.0, "x", i),), ">=", v - radius))
        assumes.append(LinearConstraint(((1.0, "x", i),), "<=", v + radius))
    asserts = []
    for j in range(num_outputs):
        if j == target_class:
            continue
        asserts.append(
            LinearConstraint(((1.0, "y", target_class), (-1.0, "y", j)), ">", 0.0)
        )
    if name is None:
        name = f"robust_r{radius}_c{target_class}"
    return Property(tuple(assumes), tuple(asserts), name)


def interval_assumes(p: Property):
    """Split assumes into single-variable interval constraints and the rest."""
    simple, general = [], []
    for c in p.assumes:
        if len(c.terms) == 1 and c.terms[0][0] != 0.0:
            simple.append(c)
        else:
            general.append(c)
    return simple, general


def extract_box(p: Property, input_dim: int, quant_range):
    """Tightest per-dimension closed box implied by interval-shaped assumes.

    Strict bounds are closed (outer approximation: the box feeds invariant
    inference and grid construction, both of which tolerate slack; exact
    strictness is enforced by the encoder and the per-point filter).  Raises
    VacuousPropertyError when some dimension's interval is empty.
    """
    from .interval import Box, Interval  # local import to avoid a cycle

    los = [quant_range.lo] * input_dim
    his = [quant_range.hi] * input_dim
    simple, _general = interval_assumes(p)
    for c in simple:
        coef, _, i = c.terms[0]
        if i >= input_dim:
            raise PropertyError(f"assume references x[{i}] beyond input_dim {input_dim}")
        limit = Fraction(c.bound) / Fraction(coef)
        cmp = c.comparator
        if coef < 0:  # dividing by a negative flips the comparison
            cmp = {"<": ">", "<=": ">=", ">": "<", ">=": "<="}[cmp]
        value = float(limit)
        if cmp in ("<", "<="):
            if value < limit:  # conversion rounded down; stay outer
                value = math.nextafter(value, math.inf)
            his[i] = min(his[i], value)
        else:
            if value > limit:
                value = math.nextafter(value, -math.inf)
            los[i] = max(los[i], value)
    dims = []
    for i in range(input_dim):
        if los[i] > his[i]:
            raise VacuousPropertyError(
                f"assumes on x[{i}] are contradictory: empty interval "
                f"[{los[i]}, {his[i]}]"
            )
        dims.append(Interval(los[i], his[i]))
    return Box(tuple(dims))


def exact_raw_bounds(p: Property, input_dim: int, cfg: FxpConfig):
    """Exact per-dimension raw-integer bounds from interval-shaped assumes.

    Returns (lo_raw, hi_raw) per dimension, intersected with the
    representable range.  Strictness is exact on the grid: x < c excludes
    the quantized point at c itself.
    """
    scale = 1 << cfg.frac_bits
    los = [cfg.raw_min] * input_dim
    his = [cfg.raw_max] * input_dim
    simple, _ = interval_assumes(p)
    for c in simple:
        coef, _, i = c.terms[0]
        if i >= input_dim:
            raise PropertyError(f"assume references x[{i}] beyond input_dim {input_dim}")
        limit = Fraction(c.bound) / Fraction(coef)
        cmp = c.comparator
        if coef < 0:
            cmp = {"<": ">", "<=": ">=", ">": "<", ">=": "<="}[cmp]
        scaled = limit * scale
        if cmp == "<=":
            his[i] = min(his[i], math.floor(scaled))
        elif cmp == "<":
            his[i] = min(his[i], math.ceil(scaled) - 1)
        elif cmp == ">=":
            los[i] = max(los[i], math.ceil(scaled))
        else:
            los[i] = max(los[i], math.floor(scaled) + 1)
    return list(zip(los, his))
