"""Interval propagation: sound per-neuron bounds for the quantized semantics.

The input box is pushed layer by layer through the network.  Everything is
double precision with outward rounding (lo nudged down, hi nudged up by one
ulp per operation), and each step is widened by a quantization slack budget
so the bounds hold for the *quantized* execution, not just the real one:

* affine bounds use the quantized weight/bias denotations (exact in double),
  so the only per-term quantized error is the multiply-rescale rounding,
  covered by (row_len + 1) quanta;
* wrap-mode overflow invalidates any bound, so a pre-activation interval
  that escapes the representable range degrades to the full range (such
  entries are skipped at constraint emission - no claim, always sound);
* saturate mode clamps instead;
* float32 mode adds a relative widening per layer since float rounding
  error is scale-dependent, and drops (full-range) any neuron that may
  overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DimensionError, LutError, QnnvError
from .fixedpoint import FxpConfig, float_to_fxp
from .lut import LookupTable, lut_range

_FLOAT32_MAX = float(np.finfo(np.float32).max)
_FLOAT32_REL_SLACK = 2.0 ** -20


def _down(x: float) -> float:
    return math.nextafter(x, -math.inf)


def _up(x: float) -> float:
    return math.nextafter(x, math.inf)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise QnnvError(f"interval endpoints must be finite: [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise QnnvError(f"empty interval [{self.lo}, {self.hi}]")

    def widen(self, pad: float) -> "Interval":
        return Interval(_down(self.lo - pad), _up(self.hi + pad))

    def clamp(self, lo: float, hi: float) -> "Interval":
        return Interval(min(max(self.lo, lo), hi), max(min(self.hi, hi), lo))

    def contains(self, v: float) -> bool:
        return self.lo <= v <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class Box:
    dims: tuple

    def __post_init__(self):
        if not self.dims:
            raise DimensionError("box must have at least one dimension")
        object.__setattr__(self, "dims", tuple(self.dims))

    def __len__(self):
        return len(self.dims)

    def __iter__(self):
        return iter(self.dims)


@dataclass(frozen=True)
class InvariantMap:
    """Per-layer pre-activation (u) and post-activation (y) bounds."""

    pre: tuple  # tuple of layers, each a tuple of Interval
    post: tuple
    value_range: Interval  # representable range the entries were clamped to

    def layer_count(self) -> int:
        return len(self.pre)

    def mean_width(self) -> float:
        widths = [iv.width for layer in self.post for iv in layer]
        return float(np.mean(widths)) if widths else 0.0


def affine_bounds(w, b, box: Box) -> Box:
    """Endpoint interval arithmetic for W @ x + b, outward-rounded."""
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] != len(box):
        raise DimensionError(f"weight shape {w.shape} does not match box dim {len(box)}")
    if b.shape != (w.shape[0],):
        raise DimensionError(f"bias shape {b.shape} does not match {w.shape[0]} rows")
    out = []
    for i in range(w.shape[0]):
        lo = hi = 0.0
        for j, iv in enumerate(box):
            c = w[i, j]
            if c == 0.0:
                continue
            p1, p2 = c * iv.lo, c * iv.hi
            lo = _down(lo + _down(min(p1, p2)))
            hi = _up(hi + _up(max(p1, p2)))
        lo = _down(lo + b[i])
        hi = _up(hi + b[i])
        out.append(Interval(lo, hi))
    return Box(tuple(out))


def activation_bounds(act: str, iv: Interval, lut: LookupTable | None = None) -> Interval:
    """Sound output interval of an activation over an input interval.

    Non-exact activations go through their lookup table: the min/max of the
    samples reachable from [lo, hi] bounds the table output exactly, and the
    +/- epsilon widening additionally covers the true function.
    """
    if act == "relu":
        return Interval(max(iv.lo, 0.0), max(iv.hi, 0.0))
    if act == "linear":
        return iv
    if act in ("sigmoid", "tanh") or lut is not None:
        if lut is None:
            raise LutError(f"activation {act!r} needs a lookup table for bounds")
        mn, mx = lut_range(lut, iv.lo, iv.hi)
        return Interval(_down(mn - lut.epsilon), _up(mx + lut.epsilon))
    raise LutError(f"unknown activation {act!r}")


def _quantized_layer_params(layer, cfg: FxpConfig):
    """Denoted values of the quantized weights/bias (exact in double)."""
    wq = np.empty_like(layer.weights)
    rows, cols = layer.weights.shape
    for i in range(rows):
        for j in range(cols):
            wq[i, j] = float_to_fxp(float(layer.weights[i, j]), cfg).value
    bq = np.array([float_to_fxp(float(v), cfg).value for v in layer.bias])
    return wq, bq


def quantize_box_inward(box: Box, cfg: FxpConfig) -> Box:
    """Tighten a real box to the denoted values of its quantized grid points.

    If a dimension contains no representable point its endpoints collapse to
    the nearest representable value (the dimension is effectively empty; the
    encoder's exact constraints make such properties vacuous anyway).
    """
    scale = Fraction(1 << cfg.frac_bits)
    dims = []
    for iv in box:
        lo_raw = max(math.ceil(Fraction(iv.lo) * scale), cfg.raw_min)
        hi_raw = min(math.floor(Fraction(iv.hi) * scale), cfg.raw_max)
        if lo_raw > hi_raw:
            lo_raw = hi_raw = min(max(lo_raw, cfg.raw_min), cfg.raw_max)
        dims.append(Interval(lo_raw * cfg.quantum, hi_raw * cfg.quantum))
    return Box(tuple(dims))


def infer_invariants(m, H: Box, luts: dict, quant_slack: float,
                     cfg: FxpConfig | None = None) -> InvariantMap:
    """Propagate the input box through the network under quantized semantics.

    ``quant_slack`` is one quantization step (2**-F for fixed point); each
    layer is widened by (row_len + 1) * quant_slack after the affine stage
    and by one more step after the activation.  ``cfg=None`` selects the
    float32 path, which also applies a relative slack per layer.
    """
    if len(H) != m.input_dim:
        raise DimensionError(f"box dim {len(H)} does not match input_dim {m.input_dim}")

    if cfg is not None:
        value_range = Interval(cfg.value_min, cfg.value_max)
        box = quantize_box_inward(Box(tuple(
            iv.clamp(value_range.lo, value_range.hi) for iv in H)), cfg)
        wrap_mode = cfg.overflow == "wrap"
        rel = 0.0
    else:
        value_range = Interval(-_FLOAT32_MAX, _FLOAT32_MAX)
        box = Box(tuple(iv.clamp(value_range.lo, value_range.hi) for iv in H))
        wrap_mode = False
        rel = _FLOAT32_REL_SLACK

    pre_layers, post_layers = [], []
    for layer in m.layers:
        if cfg is not None:
            wq, bq = _quantized_layer_params(layer, cfg)
        else:
            wq = layer.weights.astype(np.float32).astype(np.float64)
            bq = layer.bias.astype(np.float32).astype(np.float64)
        row_len = layer.in_dim
        raw_bounds = affine_bounds(wq, bq, box)
        slack = (row_len + 1) * quant_slack
        pre = []
        for iv in raw_bounds:
            pad = slack + rel * (row_len + 2) * max(abs(iv.lo), abs(iv.hi), 1.0)
            iv = iv.widen(pad)
            if iv.lo < value_range.lo or iv.hi > value_range.hi:
                # escapes the representable range: wrap makes any tighter
                # claim unsound, float32 may produce inf; both degrade to
                # the full range (skipped at emission). Saturate clamps.
                if wrap_mode or cfg is None:
                    iv = value_range
                else:
                    iv = iv.clamp(value_range.lo, value_range.hi)
            pre.append(iv)
        pre = tuple(pre)

        lut = luts.get(layer.activation) if luts else None
        post = []
        for iv in pre:
            out = activation_bounds(layer.activation, iv, lut)
            pad = quant_slack + rel * max(abs(out.lo), abs(out.hi), 1.0)
            out = out.widen(pad).clamp(value_range.lo, value_range.hi)
            post.append(out)
        post = tuple(post)

        pre_layers.append(pre)
        post_layers.append(post)
        box = Box(post)
    return InvariantMap(tuple(pre_layers), tuple(post_layers), value_range)


@dataclass(frozen=True)
class InvariantConstraint:
    """Two-sided bound on one neuron symbol, ready for the encoder."""

    layer: int
    neuron: int
    kind: str  # "pre" (potential u) or "post" (activation y)
    lo: float
    hi: float


def emit_invariant_constraints(inv: InvariantMap | None):
    """One two-sided post-activation bound per neuron, in layer order.

    Pre-activation entries stay in the map for reports and analysis but are
    not injected: the injected form mirrors the annotated-code shape (bounds
    on the neuron's visible value).  Full-range entries (wrap fallbacks,
    float32 overflow) carry no pruning information and are omitted -
    omitting a redundant constraint is always sound.
    """
    if inv is None:
        return []
    out = []
    full = (inv.value_range.lo, inv.value_range.hi)
    for k, post in enumerate(inv.post):
        for j, iv in enumerate(post):
            if (iv.lo, iv.hi) != full:
                out.append(InvariantConstraint(k, j, "post", iv.lo, iv.hi))
    return out


def format_invariant_report(inv: InvariantMap) -> str:
    """Human-audit report: one assume line per neuron, C-annotation style."""
    lines = []
    for k, (pre, post) in enumerate(zip(inv.pre, inv.post)):
        for j, (u, y) in enumerate(zip(pre, post)):
            lines.append(f"// layer {k + 1} neuron {j}: potential in [{u.lo!r}, {u.hi!r}]")
            lines.append(
                f"__ESBMC_assume((layer{k + 1}[{j}] >= {y.lo!r}) && "
                f"(layer{k + 1}[{j}] <= {y.hi!r}));"
            )
    return "\n".join(lines) + "\n"
