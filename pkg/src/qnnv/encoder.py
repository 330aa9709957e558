"""Lower (model, quantization, tables, property, invariants) to SMT-LIB2.

Fixed point targets QF_BV: every neuron potential is the same left-to-right
fold the interpreter executes - sign-extended wide multiply by the quantized
weight constant, arithmetic-shift (or round-to-nearest-even) rescale,
wrap-or-saturate back to width.  ReLU is a sign test; non-linear activations
become a balanced if-then-else comparison tree over the lookup table's
region thresholds.  Float32 targets QF_FPBV with binary32 terms under RNE.

Property constraints are translated exactly: fixed-point comparisons become
integer linear inequalities over the raw variables (scaled through by a
power of two), float32 comparisons replay the same binary32 fold the
interpreter uses.  The goal is the disjunction of the negated asserts; a
model of the script is a candidate counterexample, which the driver replays
through the interpreter before reporting anything.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DecodeError, EncodingError
from .fixedpoint import ROUND_NEAREST_EVEN, SATURATE, FxpConfig, float_to_fxp
from .interval import InvariantMap, emit_invariant_constraints
from .lut import f32_lookup_plan, fxp_lookup_plan
from .oracle import check_trace, interpret_quantized
from .properties import Property
from .verdicts import Counterexample, float32_from_bits

FLOAT32_SORT = "(_ FloatingPoint 8 24)"


@dataclass
class SmtScript:
    """An encoded verification query plus the context to decode models."""

    logic: str
    declarations: list = field(default_factory=list)
    definitions: list = field(default_factory=list)
    assumptions: list = field(default_factory=list)
    goal: str = ""
    symbol_table: dict = field(default_factory=dict)
    model: object = None
    quant: object = None  # FxpConfig or "float32"
    luts: dict | None = None
    prop: Property | None = None

    def input_symbols(self):
        return [f"in_{i}" for i in range(self.model.input_dim)]

    def to_text(self, get_model: bool = True, extra_asserts=(), get_values=(),
                include_goal: bool = True) -> str:
        lines = [f"(set-logic {self.logic})", "(set-option :produce-models true)"]
        lines += self.declarations
        lines += self.definitions
        lines += [f"(assert {a})" for a in self.assumptions]
        lines += [f"(assert {a})" for a in extra_asserts]
        if self.goal and include_goal:
            lines.append(f"(assert {self.goal})")
        lines.append("(check-sat)")
        if get_values:
            lines.append(f"(get-value ({' '.join(get_values)}))")
        elif get_model:
            lines.append("(get-model)")
        return "\n".join(lines) + "\n"

    def pin_input_assert(self, index: int, raw_or_bits: int) -> str:
        """Equality assertion fixing one input, for bisimulation checks."""
        sym = f"in_{index}"
        if self.quant == "float32":
            return f"(= {sym} {_fp_const_bits(raw_or_bits)})"
        return f"(= {sym} {_bv(raw_or_bits, self.quant.width)})"


# --- constant formatting -----------------------------------------------------


def _bv(value: int, width: int) -> str:
    return "#b" + format(value & ((1 << width) - 1), f"0{width}b")


def _fp_const_bits(bits: int) -> str:
    sign = (bits >> 31) & 1
    exp = (bits >> 23) & 0xFF
    sig = bits & 0x7FFFFF
    return f"(fp #b{sign} #b{exp:08b} #b{sig:023b})"


def _fp_const(value) -> str:
    bits = struct.unpack(">I", struct.pack(">f", float(value)))[0]
    return _fp_const_bits(bits)


# --- fixed-point term construction -------------------------------------------


def _fxp_mul_const_expr(x_sym: str, w_raw: int, cfg: FxpConfig) -> str:
    """Bit-exact (w_raw * x) rescaled and overflowed back to width W."""
    w = cfg.width
    f = cfg.frac_bits
    wide = 2 * w
    prod = f"(bvmul ((_ sign_extend {w}) {x_sym}) {_bv(w_raw, wide)})"
    if f == 0:
        shifted = prod
    elif cfg.rounding == ROUND_NEAREST_EVEN:
        q = f"(bvashr {prod} {_bv(f, wide)})"
        r = f"((_ extract {f - 1} 0) {prod})"
        half = _bv(1 << (f - 1), f)
        odd = f"(= ((_ extract {f} {f}) {prod}) #b1)"
        round_up = f"(or (bvugt {r} {half}) (and (= {r} {half}) {odd}))"
        shifted = f"(bvadd {q} (ite {round_up} {_bv(1, wide)} {_bv(0, wide)}))"
    else:
        shifted = f"(bvashr {prod} {_bv(f, wide)})"
    if cfg.overflow == SATURATE:
        lo = _bv(cfg.raw_min, wide)
        hi = _bv(cfg.raw_max, wide)
        clamped = (
            f"(ite (bvslt {shifted} {lo}) {lo} "
            f"(ite (bvsgt {shifted} {hi}) {hi} {shifted}))"
        )
        return f"((_ extract {w - 1} 0) {clamped})"
    return f"((_ extract {w - 1} 0) {shifted})"


def _fxp_add_expr(a: str, b: str, cfg: FxpConfig) -> str:
    w = cfg.width
    if cfg.overflow == SATURATE:
        s = f"(bvadd ((_ sign_extend 1) {a}) ((_ sign_extend 1) {b}))"
        lo = _bv(cfg.raw_min, w + 1)
        hi = _bv(cfg.raw_max, w + 1)
        clamped = f"(ite (bvslt {s} {lo}) {lo} (ite (bvsgt {s} {hi}) {hi} {s}))"
        return f"((_ extract {w - 1} 0) {clamped})"
    return f"(bvadd {a} {b})"


def _fxp_potential_expr(weights, bias: float, x_syms, cfg: FxpConfig) -> str:
    """Same fold as fxp_potential: zero-weight terms contribute exactly
    nothing under both overflow modes, so they are skipped."""
    acc = None
    for w_value, sym in zip(weights, x_syms):
        w_raw = float_to_fxp(float(w_value), cfg).raw
        if w_raw == 0:
            continue
        term = _fxp_mul_const_expr(sym, w_raw, cfg)
        acc = term if acc is None else _fxp_add_expr(acc, term, cfg)
    b_raw = float_to_fxp(float(bias), cfg).raw
    if acc is None:
        return _bv(b_raw, cfg.width)
    if b_raw == 0:
        return acc
    return _fxp_add_expr(acc, _bv(b_raw, cfg.width), cfg)


def _region_plan_fxp(table, cfg: FxpConfig, window=None):
    """Prune LUT regions to a reachable raw window and merge runs.

    Entries are (threshold, output): raw <= threshold selects output unless
    an earlier region claimed it; the tail output covers everything above
    the last threshold.  ``window`` narrows the reachable raws further (from
    sound invariant bounds); outside-window regions can never be selected by
    a feasible input, so dropping them is value-preserving.  Merging
    adjacent regions with equal quantized outputs likewise.
    """
    lo_raw, hi_raw = cfg.raw_min, cfg.raw_max
    if window is not None:
        lo_raw = max(lo_raw, window[0])
        hi_raw = min(hi_raw, window[1])
    thresholds, outputs = fxp_lookup_plan(table, cfg)
    entries = []
    tail = outputs[-1]
    prev_t = None
    for t, o in zip(thresholds, outputs):
        if t < lo_raw:
            continue  # region entirely below the reachable window
        if prev_t is not None and t == prev_t:
            continue  # empty region (duplicate threshold): keep the first
        if t >= hi_raw:
            tail = o  # region swallows the rest of the window
            break
        entries.append((t, o))
        prev_t = t
    merged = []
    for t, o in entries:
        if merged and merged[-1][1] == o:
            merged[-1] = (t, o)
        else:
            merged.append((t, o))
    if merged and merged[-1][1] == tail:
        merged.pop()
    return merged, tail


def _tree_select(u_sym: str, entries, tail_expr, fmt_threshold, fmt_output,
                 cmp_op: str) -> str:
    """Balanced comparison tree over ascending region thresholds.

    Semantics: the result is entries[k].output for the smallest k with
    ``u <= threshold_k``, else the tail.  Each split tests the middle
    threshold, giving depth log(len(entries)).
    """

    def build(lo: int, hi: int, default: str) -> str:
        if lo > hi:
            return default
        mid = (lo + hi) // 2
        t, o = entries[mid]
        cond = f"({cmp_op} {u_sym} {fmt_threshold(t)})"
        left = build(lo, mid - 1, fmt_output(o))
        right = build(mid + 1, hi, default)
        return f"(ite {cond} {left} {right})"

    return build(0, len(entries) - 1, tail_expr)


# --- property constraint translation ------------------------------------------


def _fxp_constraint_expr(c, syms_x, syms_y, cfg: FxpConfig) -> str:
    """Exact integer-linear translation of a constraint over raw symbols."""
    ints, cmp, bound = c.scaled_integer_form(cfg.frac_bits)
    w = cfg.width
    mag = sum(abs(n) for n, _, _ in ints) * (1 << (w - 1))
    v = max(w, mag.bit_length() + 2, abs(bound).bit_length() + 2)
    terms = []
    for n, tier, idx in ints:
        sym = syms_x[idx] if tier == "x" else syms_y[idx]
        ext = f"((_ sign_extend {v - w}) {sym})" if v > w else sym
        terms.append(ext if n == 1 else f"(bvmul {ext} {_bv(n, v)})")
    lhs = terms[0] if len(terms) == 1 else f"(bvadd {' '.join(terms)})"
    op = {"<": "bvslt", "<=": "bvsle", ">": "bvsgt", ">=": "bvsge"}[cmp]
    return f"({op} {lhs} {_bv(bound, v)})"


def _fp_constraint_expr(c, syms_x, syms_y) -> str:
    """Left-to-right binary32 fold, mirrored by Property.satisfied_f32."""
    acc = None
    for coef, tier, idx in c.terms:
        sym = syms_x[idx] if tier == "x" else syms_y[idx]
        coef32 = np.float32(coef)
        term = sym if float(coef32) == 1.0 else f"(fp.mul RNE {_fp_const(coef32)} {sym})"
        acc = term if acc is None else f"(fp.add RNE {acc} {term})"
    op = {"<": "fp.lt", "<=": "fp.leq", ">": "fp.gt", ">=": "fp.geq"}[c.comparator]
    return f"({op} {acc} {_fp_const(np.float32(c.bound))})"


def _goal_expr(assert_exprs, single_assert_index=None) -> str:
    if single_assert_index is not None:
        return f"(not {assert_exprs[single_assert_index]})"
    negs = [f"(not {a})" for a in assert_exprs]
    return negs[0] if len(negs) == 1 else f"(or {' '.join(negs)})"


def _invariant_raw_bounds(lo: float, hi: float, cfg: FxpConfig):
    scale = 1 << cfg.frac_bits
    lo_raw = math.ceil(Fraction(lo) * scale)
    hi_raw = math.floor(Fraction(hi) * scale)
    return lo_raw, hi_raw


def _pre_window_fxp(invariants, layer: int, neuron: int, cfg: FxpConfig):
    """Reachable raw window for a neuron potential, from sound invariants.

    Neuron terms are fully determined by the inputs, so any encoding
    simplification valid inside the window (stable ReLUs, pruned lookup
    trees) is valid for every feasible input - no extra assertion needed.
    """
    if invariants is None:
        return None
    iv = invariants.pre[layer][neuron]
    full = (invariants.value_range.lo, invariants.value_range.hi)
    if (iv.lo, iv.hi) == full:
        return None
    return _invariant_raw_bounds(iv.lo, iv.hi, cfg)


# --- encoders ------------------------------------------------------------------


def _neuron_symbols(m):
    """Deterministic symbol layout; returns (per-layer input syms, table)."""
    table = {}
    for i in range(m.input_dim):
        table[f"in_{i}"] = ("in", i)
    for k, layer in enumerate(m.layers):
        for j in range(layer.out_dim):
            table[f"l{k}_n{j}_u"] = ("u", k, j)
            table[f"l{k}_n{j}_y"] = ("y", k, j)
    return table


def encode_fxp(m, cfg: FxpConfig, luts, p: Property,
               invariants: InvariantMap | None = None,
               single_assert_index=None) -> SmtScript:
    """QF_BV script whose models are candidate property violations."""
    p.validate_for_model(m.input_dim, m.output_dim)
    if 2 * cfg.width > 128:
        raise EncodingError(f"width {cfg.width} too large for wide products")
    script = SmtScript(logic="QF_BV", model=m, quant=cfg, luts=luts, prop=p)
    script.symbol_table = _neuron_symbols(m)
    w = cfg.width
    sort = f"(_ BitVec {w})"
    in_syms = [f"in_{i}" for i in range(m.input_dim)]
    for sym in in_syms:
        script.declarations.append(f"(declare-const {sym} {sort})")

    x_syms = in_syms
    for k, layer in enumerate(m.layers):
        y_syms = []
        for j in range(layer.out_dim):
            u_sym, y_sym = f"l{k}_n{j}_u", f"l{k}_n{j}_y"
            u_expr = _fxp_potential_expr(layer.weights[j], float(layer.bias[j]),
                                         x_syms, cfg)
            script.definitions.append(f"(define-fun {u_sym} () {sort} {u_expr})")
            window = _pre_window_fxp(invariants, k, j, cfg)
            act = layer.activation
            if act == "relu":
                zero = _bv(0, w)
                if window is not None and window[1] <= 0:
                    y_expr = zero  # stable-off neuron
                elif window is not None and window[0] >= 0:
                    y_expr = u_sym  # stable-on neuron
                else:
                    y_expr = f"(ite (bvslt {u_sym} {zero}) {zero} {u_sym})"
            elif act == "linear":
                y_expr = u_sym
            else:
                if not luts or act not in luts:
                    raise EncodingError(f"no lookup table supplied for {act!r}")
                entries, tail = _region_plan_fxp(luts[act], cfg, window)
                y_expr = _tree_select(
                    u_sym, entries, _bv(tail, w),
                    lambda t: _bv(t, w), lambda o: _bv(o, w), "bvsle",
                )
            script.definitions.append(f"(define-fun {y_sym} () {sort} {y_expr})")
            y_syms.append(y_sym)
        x_syms = y_syms
    out_syms = x_syms

    for c in p.assumes:
        script.assumptions.append(_fxp_constraint_expr(c, in_syms, out_syms, cfg))
    for ic in emit_invariant_constraints(invariants):
        sym = f"l{ic.layer}_n{ic.neuron}_{'u' if ic.kind == 'pre' else 'y'}"
        lo_raw, hi_raw = _invariant_raw_bounds(ic.lo, ic.hi, cfg)
        if lo_raw > cfg.raw_min:
            script.assumptions.append(f"(bvsge {sym} {_bv(lo_raw, w)})")
        if hi_raw < cfg.raw_max:
            script.assumptions.append(f"(bvsle {sym} {_bv(hi_raw, w)})")
    assert_exprs = [_fxp_constraint_expr(c, in_syms, out_syms, cfg) for c in p.asserts]
    script.goal = _goal_expr(assert_exprs, single_assert_index)
    return script


def encode_float(m, luts, p: Property, invariants: InvariantMap | None = None,
                 single_assert_index=None) -> SmtScript:
    """QF_FPBV script over binary32 round-nearest-even terms."""
    p.validate_for_model(m.input_dim, m.output_dim)
    script = SmtScript(logic="QF_FPBV", model=m, quant="float32", luts=luts, prop=p)
    script.symbol_table = _neuron_symbols(m)
    sort = FLOAT32_SORT
    in_syms = [f"in_{i}" for i in range(m.input_dim)]
    for sym in in_syms:
        script.declarations.append(f"(declare-const {sym} {sort})")

    zero = _fp_const(0.0)
    x_syms = in_syms
    for k, layer in enumerate(m.layers):
        w32 = layer.weights.astype(np.float32)
        b32 = layer.bias.astype(np.float32)
        y_syms = []
        for j in range(layer.out_dim):
            u_sym, y_sym = f"l{k}_n{j}_u", f"l{k}_n{j}_y"
            acc = zero
            for i, x_sym in enumerate(x_syms):
                term = f"(fp.mul RNE {_fp_const(w32[j, i])} {x_sym})"
                acc = f"(fp.add RNE {acc} {term})"
            u_expr = f"(fp.add RNE {acc} {_fp_const(b32[j])})"
            script.definitions.append(f"(define-fun {u_sym} () {sort} {u_expr})")
            window = _pre_window_f32(invariants, k, j)
            act = layer.activation
            if act == "relu":
                if window is not None and window[1] <= 0.0:
                    y_expr = zero  # stable-off neuron
                elif window is not None and window[0] > 0.0:
                    y_expr = u_sym  # stable-on neuron
                else:
                    y_expr = f"(ite (fp.leq {u_sym} {zero}) {zero} {u_sym})"
            elif act == "linear":
                y_expr = u_sym
            else:
                if not luts or act not in luts:
                    raise EncodingError(f"no lookup table supplied for {act!r}")
                entries, tail = _region_plan_f32(luts[act], window)
                y_expr = _tree_select(
                    u_sym, entries, _fp_const_bits(tail),
                    lambda t: _fp_const_bits(t), lambda o: _fp_const_bits(o),
                    "fp.leq",
                )
            script.definitions.append(f"(define-fun {y_sym} () {sort} {y_expr})")
            y_syms.append(y_sym)
        x_syms = y_syms
    out_syms = x_syms

    for c in p.assumes:
        script.assumptions.append(_fp_constraint_expr(c, in_syms, out_syms))
    for ic in emit_invariant_constraints(invariants):
        sym = f"l{ic.layer}_n{ic.neuron}_{'u' if ic.kind == 'pre' else 'y'}"
        lo32 = np.float32(ic.lo)
        if float(lo32) > ic.lo:
            lo32 = np.nextafter(lo32, np.float32(-np.inf))
        hi32 = np.float32(ic.hi)
        if float(hi32) < ic.hi:
            hi32 = np.nextafter(hi32, np.float32(np.inf))
        script.assumptions.append(f"(fp.geq {sym} {_fp_const(lo32)})")
        script.assumptions.append(f"(fp.leq {sym} {_fp_const(hi32)})")
    assert_exprs = [_fp_constraint_expr(c, in_syms, out_syms) for c in p.asserts]
    script.goal = _goal_expr(assert_exprs, single_assert_index)
    return script


def _pre_window_f32(invariants, layer: int, neuron: int):
    if invariants is None:
        return None
    iv = invariants.pre[layer][neuron]
    full = (invariants.value_range.lo, invariants.value_range.hi)
    if (iv.lo, iv.hi) == full:
        return None
    return iv.lo, iv.hi


def _f32_bits(v) -> int:
    return int(np.frombuffer(np.float32(v).tobytes(), dtype=np.uint32)[0])


def _region_plan_f32(table, window=None):
    """Float32 region thresholds/outputs as bit patterns, runs merged.

    ``window`` prunes regions unreachable under sound potential bounds, same
    reasoning as the fixed-point planner.
    """
    mids, outs = f32_lookup_plan(table)
    entries = []
    prev = None
    tail = _f32_bits(outs[-1])
    for t, o in zip(mids, outs):
        if window is not None and float(t) < window[0]:
            continue  # region entirely below the reachable window
        tb = _f32_bits(t)
        if prev is not None and tb == prev:
            continue  # duplicate threshold after the cast: region is empty
        if window is not None and float(t) >= window[1]:
            tail = _f32_bits(o)  # region swallows the rest of the window
            break
        entries.append((tb, _f32_bits(o)))
        prev = tb
    merged = []
    for t, o in entries:
        if merged and merged[-1][1] == o:
            merged[-1] = (t, o)
        else:
            merged.append((t, o))
    if merged and merged[-1][1] == tail:
        merged.pop()
    return merged, tail


# --- solver model decoding -------------------------------------------------


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def _tokenize_sexpr(text: str):
    return _TOKEN.findall(text)


def _parse_sexpr(tokens, pos):
    if pos >= len(tokens):
        raise DecodeError("unbalanced model s-expression")
    tok = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            node, pos = _parse_sexpr(tokens, pos)
            items.append(node)
        if pos >= len(tokens):
            raise DecodeError("unbalanced model s-expression")
        return items, pos + 1
    if tok == ")":
        raise DecodeError("unexpected ')' in model text")
    return tok, pos + 1


def _parse_forms(text: str):
    tokens = _tokenize_sexpr(text)
    forms = []
    pos = 0
    while pos < len(tokens):
        node, pos = _parse_sexpr(tokens, pos)
        forms.append(node)
    return forms


def _bv_literal(node):
    """Return (unsigned value, width) for a bit-vector literal, else None."""
    if isinstance(node, str):
        if node.startswith("#b"):
            return int(node[2:], 2), len(node) - 2
        if node.startswith("#x"):
            return int(node[2:], 16), (len(node) - 2) * 4
        return None
    if (isinstance(node, list) and len(node) == 3 and node[0] == "_"
            and isinstance(node[1], str) and node[1].startswith("bv")):
        return int(node[1][2:]), int(node[2])
    return None


def _fp_literal_bits(node):
    """Return the 32-bit pattern for a binary32 literal, else None."""
    if isinstance(node, list) and len(node) == 4 and node[0] == "fp":
        parts = [_bv_literal(part) for part in node[1:]]
        if any(p is None for p in parts):
            return None
        (s, _), (e, ew), (m, mw) = parts
        return (s << (ew + mw)) | (e << mw) | m
    if isinstance(node, list) and len(node) == 4 and node[0] == "_":
        tag = node[1]
        specials = {
            "+zero": 0x00000000,
            "-zero": 0x80000000,
            "+oo": 0x7F800000,
            "-oo": 0xFF800000,
            "NaN": 0x7FC00000,
        }
        if tag in specials:
            return specials[tag]
    return None


def _collect_assignments(forms):
    """Symbol -> literal node from define-fun or (= sym value) shapes."""
    out = {}

    def walk(node):
        if not isinstance(node, list) or not node:
            return
        head = node[0]
        if head == "define-fun" and len(node) >= 5 and isinstance(node[1], str):
            out[node[1]] = node[-1]
            return
        if head == "=" and len(node) == 3 and isinstance(node[1], str):
            out[node[1]] = node[2]
            return
        if len(node) == 2 and isinstance(node[0], str) and node[0] != "model":
            # (sym value) pairs from get-value responses
            out.setdefault(node[0], node[1])
        for child in node:
            walk(child)

    for form in forms:
        walk(form)
    return out


def _to_signed(value: int, width: int) -> int:
    if value >= 1 << (width - 1):
        value -= 1 << width
    return value


def decode_symbol_values(script: SmtScript, text: str) -> dict:
    """Map declared/defined symbols found in solver output to raw values.

    Fixed point yields signed raw integers; float32 yields 32-bit patterns.
    """
    forms = _parse_forms(text)
    assignments = _collect_assignments(forms)
    decoded = {}
    for sym, node in assignments.items():
        if sym not in script.symbol_table:
            continue
        if script.quant == "float32":
            bits = _fp_literal_bits(node)
            if bits is not None:
                decoded[sym] = bits
            continue
        lit = _bv_literal(node)
        if lit is None:
            # solvers echo define-fun bodies for derived symbols; only
            # literal assignments carry model values
            continue
        value, width = lit
        if width != script.quant.width:
            raise DecodeError(
                f"literal width {width} for {sym} does not match format "
                f"width {script.quant.width}"
            )
        decoded[sym] = _to_signed(value, width)
    return decoded


def decode_model(script: SmtScript, model_text: str) -> Counterexample:
    """Map a sat model back to concrete inputs and replay it.

    The returned counterexample carries the full interpreter trace and the
    index of the first violated assert; the caller decides whether a replay
    mismatch is fatal (the driver downgrades it to SOLVER_ERROR).
    """
    decoded = decode_symbol_values(script, model_text)
    m = script.model
    raws = []
    for i in range(m.input_dim):
        sym = f"in_{i}"
        if sym not in decoded:
            raise DecodeError(f"solver model does not assign input symbol {sym}")
        raws.append(decoded[sym])
    if script.quant == "float32":
        xs = [float32_from_bits(b) for b in raws]
        trace = interpret_quantized(m, "float32", script.luts, xs)
    else:
        trace = interpret_quantized(m, script.quant, script.luts, raws)
    assumes_ok, violated = check_trace(script.prop, trace, script.quant)
    return Counterexample(trace.inputs, violated, trace, assumes_satisfied=assumes_ok)


# --- annotated C emission ----------------------------------------------------


def _c_float(v: float) -> str:
    return f"{float(np.float32(v))!r}f"


def _c_lut_block(name: str, table) -> str:
    ins = table.sample_inputs
    outs = table.sample_outputs
    lines = [f"static const float {name}_in[{ins.size}] = {{"]
    lines.append("  " + ", ".join(_c_float(v) for v in ins))
    lines.append("};")
    lines.append(f"static const float {name}_out[{outs.size}] = {{")
    lines.append("  " + ", ".join(_c_float(v) for v in outs))
    lines.append("};")
    lines.append(f"static float {name}(float u) {{")
    lines.append(f"  unsigned lo = 0, hi = {ins.size - 1}u;")
    lines.append(f"  if (u <= {name}_in[0]) return {name}_out[0];")
    lines.append(f"  if (u >= {name}_in[{ins.size - 1}]) return {name}_out[{ins.size - 1}];")
    lines.append("  while (hi - lo > 1u) {")
    lines.append("    unsigned mid = lo + (hi - lo) / 2u;")
    lines.append(f"    if (u <= {name}_in[mid]) hi = mid; else lo = mid;")
    lines.append("  }")
    lines.append(f"  return (u - {name}_in[lo] <= {name}_in[hi] - u) ? "
                 f"{name}_out[lo] : {name}_out[hi];")
    lines.append("}")
    return "\n".join(lines)


def _c_constraint(c, xs_name: str, ys_name: str) -> str:
    parts = []
    for coef, tier, idx in c.terms:
        arr = xs_name if tier == "x" else ys_name
        parts.append(f"({_c_float(coef)})*{arr}[{idx}]")
    lhs = " + ".join(parts)
    return f"({lhs}) {c.comparator} {_c_float(c.bound)}"


def emit_c(m, quant, p: Property, invariants: InvariantMap | None = None) -> str:
    """Self-contained annotated C mirror of the verification problem.

    The file compiles stand-alone with -DQNNV_STUB (deterministic stub
    inputs); without it the nondet/assume primitives are extern and the
    file is consumable by software model checkers.
    """
    p.validate_for_model(m.input_dim, m.output_dim)
    is_fxp = isinstance(quant, FxpConfig)
    lines = [
        "/* Quantized feedforward network with safety annotations. */",
        "#include <assert.h>",
        "#include <math.h>",
        "#include <stdint.h>",
        "",
        "#ifdef QNNV_STUB",
        "static unsigned qnnv_seed = 123456789u;",
        "static float nondet_float(void) {",
        "  qnnv_seed = qnnv_seed * 1664525u + 1013904223u;",
        "  return (float)(qnnv_seed >> 8) / 8388608.0f - 1.0f;",
        "}",
        "static void __ESBMC_assume(int cond) { (void)cond; }",
        "#else",
        "extern float nondet_float(void);",
        "extern void __ESBMC_assume(int cond);",
        "#endif",
        "",
    ]

    if is_fxp:
        cfg = quant
        lines += [
            f"/* fixed point Q({cfg.int_bits},{cfg.frac_bits}), "
            f"{cfg.overflow} overflow, {cfg.rounding} rescale */",
            "typedef int64_t fxp_t;",
            f"#define QNNV_FRAC_BITS {cfg.frac_bits}",
            f"#define QNNV_RAW_MIN ({cfg.raw_min}LL)",
            f"#define QNNV_RAW_MAX ({cfg.raw_max}LL)",
            "static fxp_t fxp_overflow(int64_t v) {",
        ]
        if cfg.overflow == SATURATE:
            lines += [
                "  if (v < QNNV_RAW_MIN) return QNNV_RAW_MIN;",
                "  if (v > QNNV_RAW_MAX) return QNNV_RAW_MAX;",
                "  return v;",
            ]
        else:
            span = 1 << cfg.width
            lines += [
                f"  uint64_t span = {span}ULL;",
                "  uint64_t u = ((uint64_t)(v - QNNV_RAW_MIN)) % span;",
                "  return (int64_t)u + QNNV_RAW_MIN;",
            ]
        lines += [
            "}",
            "static fxp_t fxp_rescale(int64_t wide) {",
        ]
        if cfg.rounding == ROUND_NEAREST_EVEN and cfg.frac_bits > 0:
            lines += [
                "  int64_t q = wide >> QNNV_FRAC_BITS;",
                "  int64_t r = wide & ((1LL << QNNV_FRAC_BITS) - 1);",
                "  int64_t half = 1LL << (QNNV_FRAC_BITS - 1);",
                "  if (r > half || (r == half && (q & 1))) q += 1;",
                "  return q;",
            ]
        elif cfg.frac_bits > 0:
            lines.append("  return wide >> QNNV_FRAC_BITS;")
        else:
            lines.append("  return wide;")
        lines += [
            "}",
            "static fxp_t fxp_float_to_fxp(float x) {",
            "  double scaled = (double)x * (double)(1LL << QNNV_FRAC_BITS);",
        ]
        if cfg.conv_rounding == ROUND_NEAREST_EVEN:
            lines.append("  return fxp_overflow((int64_t)rint(scaled));")
        else:
            lines.append("  return fxp_overflow((int64_t)floor(scaled));")
        lines += [
            "}",
            "static fxp_t fxp_add(fxp_t a, fxp_t b) { return fxp_overflow(a + b); }",
            "static fxp_t fxp_mult(fxp_t a, fxp_t b) "
            "{ return fxp_overflow(fxp_rescale(a * b)); }",
            "static float fxp_to_float(fxp_t a) "
            "{ return (float)((double)a / (double)(1LL << QNNV_FRAC_BITS)); }",
            "",
        ]

    lut_funcs = {}
    for layer in m.layers:
        act = layer.activation
        if act in ("relu", "linear") or act in lut_funcs:
            continue
        name = f"qnnv_lut_{act}"
        lut_funcs[act] = name

    # LUT blocks need the table data from the caller's context; emit from
    # the standard profile when available.
    if lut_funcs:
        from .lut import build_lut

        for act, name in lut_funcs.items():
            lines.append(_c_lut_block(name, build_lut(act)))
            lines.append("")

    lines += ["int main(void) {"]
    d = m.input_dim
    lines.append(f"  float x[{d}];")
    for i in range(d):
        lines.append(f"  x[{i}] = nondet_float();")
    for c in p.assumes:
        lines.append(f"  __ESBMC_assume({_c_constraint(c, 'x', 'y')});")

    prev = "x"
    prev_fxp = None
    if is_fxp:
        lines.append(f"  fxp_t x_fxp[{d}];")
        for i in range(d):
            lines.append(f"  x_fxp[{i}] = fxp_float_to_fxp(x[{i}]);")
        prev_fxp = "x_fxp"

    inv_entries = {}
    for ic in emit_invariant_constraints(invariants):
        inv_entries.setdefault((ic.layer, ic.kind), {})[ic.neuron] = ic

    for k, layer in enumerate(m.layers):
        rows = layer.out_dim
        name = f"layer{k + 1}"
        if is_fxp:
            lines.append(f"  fxp_t {name}[{rows}];")
            for j in range(rows):
                expr = None
                for i in range(layer.in_dim):
                    term = (f"fxp_mult(fxp_float_to_fxp({_c_float(layer.weights[j, i])}), "
                            f"{prev_fxp}[{i}])")
                    expr = term if expr is None else f"fxp_add({expr}, {term})"
                expr = f"fxp_add({expr}, fxp_float_to_fxp({_c_float(layer.bias[j])}))"
                lines.append(f"  {name}[{j}] = {expr};")
                if layer.activation == "relu":
                    lines.append(f"  if ({name}[{j}] < 0) {name}[{j}] = 0; /* ReLU */")
                elif layer.activation in lut_funcs:
                    lines.append(
                        f"  {name}[{j}] = fxp_float_to_fxp("
                        f"{lut_funcs[layer.activation]}(fxp_to_float({name}[{j}])));"
                    )
                post = inv_entries.get((k, "post"), {}).get(j)
                if post is not None:
                    lines.append(
                        f"  __ESBMC_assume((fxp_to_float({name}[{j}]) >= {_c_float(post.lo)})"
                        f" && (fxp_to_float({name}[{j}]) <= {_c_float(post.hi)}));"
                    )
            prev_fxp = name
        else:
            lines.append(f"  float {name}[{rows}];")
            for j in range(rows):
                terms = [
                    f"({_c_float(layer.weights[j, i])})*{prev}[{i}]"
                    for i in range(layer.in_dim)
                ]
                terms.append(f"({_c_float(layer.bias[j])})")
                lines.append(f"  {name}[{j}] = {' + '.join(terms)};")
                if layer.activation == "relu":
                    lines.append(f"  if ({name}[{j}] < 0) {name}[{j}] = 0; /* ReLU */")
                elif layer.activation in lut_funcs:
                    lines.append(
                        f"  {name}[{j}] = {lut_funcs[layer.activation]}({name}[{j}]);"
                    )
                post = inv_entries.get((k, "post"), {}).get(j)
                if post is not None:
                    lines.append(
                        f"  __ESBMC_assume(({name}[{j}] >= {_c_float(post.lo)}) && "
                        f"({name}[{j}] <= {_c_float(post.hi)}));"
                    )
            prev = name

    out = m.output_dim
    lines.append(f"  float y[{out}];")
    last = f"layer{len(m.layers)}"
    for j in range(out):
        if is_fxp:
            lines.append(f"  y[{j}] = fxp_to_float({last}[{j}]);")
        else:
            lines.append(f"  y[{j}] = {last}[{j}];")
    for c in p.asserts:
        lines.append(f"  assert({_c_constraint(c, 'x', 'y')});")
    lines.append("  return 0;")
    lines.append("}")
    return "\n".join(lines) + "\n"
