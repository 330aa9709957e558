"""Ground-truth brute-force verification for small instances.

``interpret_quantized`` is the single executable source of truth for the
quantized semantics: the SMT encoder must agree with it bit for bit, and
counterexample replay goes through it.  ``brute_force_verify`` enumerates
every quantized input in the property's domain and decides the property by
execution; the SMT pipeline is validated against it.

The scalar interpreter uses unbounded Python integers and is exact at any
width.  Grid enumeration uses an int64-vectorized twin when the format is
narrow enough (total width <= 31, so products fit int64); the two paths are
tested exhaustively against each other.
"""

from __future__ import annotations

import itertools
import math
import time
from bisect import bisect_left
from fractions import Fraction

import numpy as np

from .errors import DimensionError, GridTooLarge, QnnvError, VacuousPropertyError
from .fixedpoint import (
    SATURATE,
    TRUNCATE,
    FxpConfig,
    FxpValue,
    float_to_fxp,
    fxp_potential,
)
from .lut import f32_lookup_plan, fxp_lookup_plan
from .properties import Property, exact_raw_bounds, interval_assumes
from .verdicts import (
    SAFE,
    UNSAFE,
    Counterexample,
    QuantInput,
    Trace,
    Verdict,
    float32_bits,
    float32_from_bits,
)

DEFAULT_GRID_LIMIT = 1 << 20
_VECTOR_WIDTH_LIMIT = 31


class QuantGrid:
    """Per-dimension quantized values covering Box(H) in raw-integer form."""

    def __init__(self, raw_bounds, cfg: FxpConfig):
        self.cfg = cfg
        self.raw_bounds = list(raw_bounds)
        self.sizes = [max(0, hi - lo + 1) for lo, hi in self.raw_bounds]

    @property
    def size(self) -> int:
        return math.prod(self.sizes)

    def axes(self):
        return [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in self.raw_bounds]


def _lut_plans(m, quant, luts):
    plans = {}
    for layer in m.layers:
        act = layer.activation
        if act in ("relu", "linear") or act in plans:
            continue
        if not luts or act not in luts:
            raise QnnvError(f"activation {act!r} requires a lookup table")
        if quant == "float32":
            plans[act] = f32_lookup_plan(luts[act])
        else:
            plans[act] = fxp_lookup_plan(luts[act], quant)
    return plans


def interpret_quantized(m, quant, luts, x) -> Trace:
    """Bit-exact forward pass; ``quant`` is an FxpConfig or "float32".

    ``x`` may be FxpValue objects, raw integers, or reals (quantized on the
    way in).  Accumulation order is the same left-to-right fold the SMT
    encoder emits, so the two are bisimilar by construction.
    """
    if len(x) != m.input_dim:
        raise DimensionError(f"input length {len(x)} != input_dim {m.input_dim}")
    plans = _lut_plans(m, quant, luts) if luts is not None else {}

    if quant == "float32":
        return _interpret_float32(m, plans, x, luts)

    cfg = quant
    vals = []
    for v in x:
        if isinstance(v, FxpValue):
            if v.config != cfg:
                raise QnnvError("input FxpValue config differs from requested config")
            vals.append(v)
        elif isinstance(v, (int, np.integer)):
            vals.append(FxpValue(int(v), cfg))
        else:
            vals.append(float_to_fxp(float(v), cfg))

    inputs = tuple(QuantInput(v.raw, v.value) for v in vals)
    layers, raw_layers = [], []
    current = vals
    for layer in m.layers:
        us, ys = [], []
        for i in range(layer.out_dim):
            u = fxp_potential(layer.weights[i], current, float(layer.bias[i]), cfg)
            if layer.activation == "relu":
                y = u if u.raw > 0 else FxpValue(0, cfg)
            elif layer.activation == "linear":
                y = u
            else:
                thresholds, outputs = plans[layer.activation]
                y = FxpValue(outputs[bisect_left(thresholds, u.raw)], cfg)
            us.append(u)
            ys.append(y)
        layers.append((tuple(u.value for u in us), tuple(y.value for y in ys)))
        raw_layers.append((tuple(u.raw for u in us), tuple(y.raw for y in ys)))
        current = ys
    return Trace(inputs, tuple(layers), tuple(raw_layers))


def _f32_true_activation(act: str, u):
    if act == "sigmoid":
        return np.float32(1.0 / (1.0 + math.exp(-float(u))))
    if act == "tanh":
        return np.float32(math.tanh(float(u)))
    raise QnnvError(f"no true-function path for activation {act!r}")


def _interpret_float32(m, plans, x, luts) -> Trace:
    vals = [np.float32(v) for v in x]
    inputs = tuple(QuantInput(float32_bits(v), float(v)) for v in vals)
    layers, raw_layers = [], []
    current = vals
    for layer in m.layers:
        us, ys = [], []
        w32 = layer.weights.astype(np.float32)
        b32 = layer.bias.astype(np.float32)
        for i in range(layer.out_dim):
            acc = np.float32(0.0)
            for j in range(layer.in_dim):
                acc = np.float32(acc + np.float32(w32[i, j] * current[j]))
            u = np.float32(acc + b32[i])
            act = layer.activation
            if act == "relu":
                y = np.float32(0.0) if u <= 0.0 else u
            elif act == "linear":
                y = u
            elif luts is not None:
                mids, outs = plans[act]
                y = outs[int(np.searchsorted(mids, u, side="left"))]
            else:
                # reference mode: true activation evaluated in double,
                # rounded once to float32 (sanity baseline, never encoded)
                y = _f32_true_activation(act, u)
            us.append(u)
            ys.append(y)
        layers.append((tuple(float(u) for u in us), tuple(float(y) for y in ys)))
        raw_layers.append(
            (tuple(float32_bits(u) for u in us), tuple(float32_bits(y) for y in ys))
        )
        current = ys
    return Trace(inputs, tuple(layers), tuple(raw_layers))


def check_trace(p: Property, trace: Trace, quant) -> tuple:
    """(assumes_satisfied, first_violated_assert_or_None) for a trace.

    Fixed point compares exact rationals; float32 replays the binary32
    fold the encoder uses.
    """
    outputs = trace.outputs
    xs = trace.input_values()
    if quant == "float32":
        xs32 = [np.float32(v) for v in xs]
        ys32 = [np.float32(v) for v in outputs]
        assumes_ok = all(c.satisfied_f32(xs32, ys32) for c in p.assumes)
        violated = None
        for k, c in enumerate(p.asserts):
            if not c.satisfied_f32(xs32, ys32):
                violated = k
                break
        return assumes_ok, violated
    xf = [Fraction(v) for v in xs]
    yf = [Fraction(v) for v in outputs]
    assumes_ok = all(c.satisfied_exact(xf, yf) for c in p.assumes)
    violated = None
    for k, c in enumerate(p.asserts):
        if not c.satisfied_exact(xf, yf):
            violated = k
            break
    return assumes_ok, violated


# --- vectorized fixed-point grid execution ---------------------------------


def _v_overflow(vals, cfg):
    if cfg.overflow == SATURATE:
        return np.clip(vals, cfg.raw_min, cfg.raw_max)
    span = np.int64(1) << cfg.width
    return (vals - cfg.raw_min) % span + cfg.raw_min


def _v_rescale(vals, cfg):
    f = cfg.frac_bits
    if f == 0:
        return vals
    if cfg.rounding == TRUNCATE:
        return vals >> f
    q = vals >> f
    r = vals & ((np.int64(1) << f) - 1)
    half = np.int64(1) << (f - 1)
    up = (r > half) | ((r == half) & ((q & 1) == 1))
    return q + up


def _batch_forward(m, cfg, plans, columns, collect=False):
    """Run the whole grid at once; columns is a list of int64 raw arrays.

    Returns the output columns, or (outputs, per-layer (us, ys)) when
    ``collect`` is set.
    """
    current = columns
    trace = []
    for layer in m.layers:
        n = current[0].shape[0]
        us, ys = [], []
        for i in range(layer.out_dim):
            acc = np.zeros(n, dtype=np.int64)
            for j in range(layer.in_dim):
                w_raw = float_to_fxp(float(layer.weights[i, j]), cfg).raw
                if w_raw == 0:
                    continue
                term = _v_overflow(_v_rescale(w_raw * current[j], cfg), cfg)
                acc = _v_overflow(acc + term, cfg)
            b_raw = float_to_fxp(float(layer.bias[i]), cfg).raw
            u = _v_overflow(acc + b_raw, cfg)
            if layer.activation == "relu":
                y = np.where(u > 0, u, 0)
            elif layer.activation == "linear":
                y = u
            else:
                thresholds, outputs = plans[layer.activation]
                t = np.asarray(thresholds, dtype=np.int64)
                o = np.asarray(outputs, dtype=np.int64)
                y = o[np.searchsorted(t, u, side="left")]
            us.append(u)
            ys.append(y)
        if collect:
            trace.append((us, ys))
        current = ys
    if collect:
        return current, trace
    return current


def _constraint_mask(c, columns, frac_bits):
    """Vectorized exact evaluation of one constraint over raw columns."""
    ints, cmp, bound = c.scaled_integer_form(frac_bits)
    # int64 would overflow for monstrous scaled coefficients; fall back to
    # exact object (big-int) arithmetic in that case
    raw_cap = max(int(np.max(np.abs(col))) + 1 for col in columns)
    mag = sum(abs(n) for n, _, _ in ints) * raw_cap
    use_object = mag >= (1 << 62) or abs(bound) >= (1 << 62)
    dtype = object if use_object else np.int64
    lhs = np.zeros(columns[0].shape[0], dtype=dtype)
    for n, _tier, idx in ints:
        col = columns[idx]
        if dtype is object:
            col = col.astype(object)
            lhs = lhs + n * col
        else:
            lhs = lhs + np.int64(n) * col
    bound_v = bound if dtype is object else np.int64(bound)
    if cmp == "<":
        return lhs < bound_v
    if cmp == "<=":
        return lhs <= bound_v
    if cmp == ">":
        return lhs > bound_v
    return lhs >= bound_v


def brute_force_verify(m, quant, luts, p: Property,
                       limit: int = DEFAULT_GRID_LIMIT) -> Verdict:
    """Exhaustive verdict over the quantized input grid.

    UNSAFE returns the first violating point in lexicographic raw order
    (deterministic and diffable).  Refuses grids above ``limit`` rather
    than silently sampling.
    """
    start = time.monotonic()
    p.validate_for_model(m.input_dim, m.output_dim)
    if quant == "float32":
        return _brute_force_float32(m, luts, p, limit, start)

    cfg = quant
    raw_bounds = exact_raw_bounds(p, m.input_dim, cfg)
    grid = QuantGrid(raw_bounds, cfg)
    if grid.size > limit:
        raise GridTooLarge(grid.size, limit)
    if grid.size == 0:
        return Verdict(SAFE, wall_time=time.monotonic() - start, solver="oracle",
                       diagnostics="vacuous property: empty quantized input domain")

    mesh = np.meshgrid(*grid.axes(), indexing="ij")
    columns = [ax.reshape(-1) for ax in mesh]

    _, general_assumes = interval_assumes(p)
    keep = np.ones(columns[0].shape[0], dtype=bool)
    for c in general_assumes:
        keep &= np.asarray(_constraint_mask(c, columns, cfg.frac_bits), dtype=bool)
    if not keep.any():
        return Verdict(SAFE, wall_time=time.monotonic() - start, solver="oracle",
                       diagnostics="vacuous property: no quantized point satisfies "
                                   "the assumes")

    if cfg.width <= _VECTOR_WIDTH_LIMIT:
        plans = _lut_plans(m, cfg, luts)
        out_cols = _batch_forward(m, cfg, plans, columns)
        violation = np.zeros(columns[0].shape[0], dtype=bool)
        for c in p.asserts:
            violation |= ~np.asarray(
                _constraint_mask(c, out_cols, cfg.frac_bits), dtype=bool
            )
        violation &= keep
        if not violation.any():
            return Verdict(SAFE, wall_time=time.monotonic() - start, solver="oracle")
        first = int(np.argmax(violation))
        raws = [int(col[first]) for col in columns]
        return _unsafe_verdict(m, cfg, luts, p, raws, start)

    # wide formats: exact scalar sweep
    for raws in _iter_lex(grid, keep):
        trace = interpret_quantized(m, cfg, luts, raws)
        ok, violated = check_trace(p, trace, cfg)
        if ok and violated is not None:
            return _unsafe_verdict(m, cfg, luts, p, raws, start)
    return Verdict(SAFE, wall_time=time.monotonic() - start, solver="oracle")


def _iter_lex(grid: QuantGrid, keep):
    axes = grid.axes()
    for idx, combo in enumerate(itertools.product(*axes)):
        if keep[idx]:
            yield [int(v) for v in combo]


def _unsafe_verdict(m, quant, luts, p, raws, start) -> Verdict:
    trace = interpret_quantized(m, quant, luts, raws)
    ok, violated = check_trace(p, trace, quant)
    assert ok and violated is not None, "oracle found an invalid violation"
    cex = Counterexample(trace.inputs, violated, trace, assumes_satisfied=ok)
    return Verdict(UNSAFE, counterexample=cex,
                   wall_time=time.monotonic() - start, solver="oracle")


# --- float32 reduced-significand grid (1-D only) ----------------------------


def reduced_float_grid(lo: float, hi: float, sig_bits: int = 8) -> np.ndarray:
    """Every float32 in [lo, hi] whose significand uses only the top bits.

    The grid is a strict subset of the float32 values in range, so a SAFE
    answer from it is approximate by construction - callers use it only for
    cross-checking on instances with robust margins.
    """
    mask = (1 << (23 - sig_bits)) - 1
    values = []
    v = np.float32(lo)
    if float(v) < lo:
        v = np.nextafter(v, np.float32(np.inf))
    hi32 = np.float32(hi)
    while float(v) <= float(hi32):
        bits = float32_bits(v)
        if bits & mask:
            # jump to the next representable reduced-significand value
            if float(v) >= 0:
                bits = (bits | mask) + 1
            else:
                bits = bits & ~mask
            v = np.float32(float32_from_bits(bits))
            continue
        values.append(np.float32(v))
        nxt = np.nextafter(v, np.float32(np.inf))
        if nxt == v:
            break
        v = nxt
    if not values or float(values[-1]) != float(hi32):
        if lo <= float(hi32) <= hi:
            values.append(hi32)
    return np.array(values, dtype=np.float32)


def _brute_force_float32(m, luts, p, limit, start) -> Verdict:
    if m.input_dim != 1:
        raise GridTooLarge(float("inf"), limit)
    from .interval import Interval

    box = None
    from .properties import extract_box

    fmax = 3.4028234663852886e38
    try:
        box = extract_box(p, 1, Interval(-fmax, fmax))
    except VacuousPropertyError:
        return Verdict(SAFE, wall_time=time.monotonic() - start, solver="oracle",
                       diagnostics="vacuous property: empty input domain")
    grid = reduced_float_grid(box.dims[0].lo, box.dims[0].hi)
    if grid.size > limit:
        raise GridTooLarge(int(grid.size), limit)
    for v in grid:
        trace = interpret_quantized(m, "float32", luts, [v])
        ok, violated = check_trace(p, trace, "float32")
        if ok and violated is not None:
            cex = Counterexample(trace.inputs, violated, trace, assumes_satisfied=True)
            return Verdict(UNSAFE, counterexample=cex,
                           wall_time=time.monotonic() - start, solver="oracle")
    return Verdict(SAFE, wall_time=time.monotonic() - start, solver="oracle")
