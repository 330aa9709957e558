"""Discretization of non-linear activation functions into lookup tables.

A table holds uniformly spaced samples of a piecewise-Lipschitz function.
Sample count per piece is ``ceil(L * (hi - lo) / (2 * eps)) + 1`` so that
nearest-sample lookup is within ``eps`` of the true function everywhere on
the piece; a dense numerical sweep confirms the bound after construction
and is stored as a certificate.

Lookup is nearest-sample with ties broken toward the lower-input sample
(this makes the SMT encoding a pure comparison tree and fixes bit-exact
behaviour at region boundaries).  Below the first sample the table returns
the first sample's output, above the last the last's.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import LutError
from .fixedpoint import FxpConfig, FxpValue, float_to_fxp

DEFAULT_EPSILON = 0.002

# Shipped activation profiles: true function, default domain, Lipschitz bound.
_PROFILES = {
    "sigmoid": (lambda u: 1.0 / (1.0 + np.exp(-u)), (-8.0, 8.0), 0.25),
    "tanh": (np.tanh, (-4.0, 4.0), 1.0),
}

AUDIT_POINTS = 1_000_000


@dataclass(frozen=True)
class Piece:
    """One locally-Lipschitz segment with its uniform samples."""

    lo: float
    hi: float
    lipschitz: float
    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        ins = np.asarray(self.inputs, dtype=np.float64)
        outs = np.asarray(self.outputs, dtype=np.float64)
        if ins.shape != outs.shape or ins.ndim != 1 or ins.size < 2:
            raise LutError("piece needs matched 1-D input/output arrays with >= 2 samples")
        if ins[0] != self.lo or ins[-1] != self.hi:
            raise LutError("first/last sample must sit on the piece endpoints")
        if np.any(np.diff(ins) <= 0):
            raise LutError("piece samples must be strictly increasing")
        spacing = np.diff(ins)
        h = (self.hi - self.lo) / (ins.size - 1)
        # linspace points wobble by an ulp of the endpoint magnitude
        tol = 4 * np.spacing(max(abs(self.lo), abs(self.hi), abs(h)))
        if np.any(np.abs(spacing - h) > tol):
            raise LutError("piece samples must be uniformly spaced")
        ins.setflags(write=False)
        outs.setflags(write=False)
        object.__setattr__(self, "inputs", ins)
        object.__setattr__(self, "outputs", outs)

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.inputs.size - 1)


@dataclass(frozen=True)
class AuditCertificate:
    """Result of the post-construction dense error sweep."""

    max_error: float
    points: int


@dataclass(frozen=True)
class LookupTable:
    pieces: tuple
    epsilon: float
    source_tag: str
    audit: AuditCertificate | None = None

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise LutError("table needs at least one piece")
        for a, b in zip(pieces, pieces[1:]):
            if b.lo < a.hi:
                raise LutError("pieces must be disjoint and ascending")
        object.__setattr__(self, "pieces", pieces)
        inputs = np.concatenate([p.inputs for p in pieces])
        outputs = np.concatenate([p.outputs for p in pieces])
        inputs.setflags(write=False)
        outputs.setflags(write=False)
        mids = (inputs[:-1] + inputs[1:]) / 2.0
        mids.setflags(write=False)
        object.__setattr__(self, "_inputs", inputs)
        object.__setattr__(self, "_outputs", outputs)
        object.__setattr__(self, "_midpoints", mids)

    @property
    def sample_inputs(self) -> np.ndarray:
        return self._inputs

    @property
    def sample_outputs(self) -> np.ndarray:
        return self._outputs

    @property
    def midpoints(self) -> np.ndarray:
        """Region boundaries: sample i covers (mid[i-1], mid[i]]."""
        return self._midpoints

    @property
    def clamp_low(self) -> float:
        return float(self._outputs[0])

    @property
    def clamp_high(self) -> float:
        return float(self._outputs[-1])

    @property
    def domain(self):
        return float(self._inputs[0]), float(self._inputs[-1])

    @property
    def num_samples(self) -> int:
        return int(self._inputs.size)

    def is_monotone(self) -> bool:
        d = np.diff(self._outputs)
        return bool(np.all(d >= 0) or np.all(d <= 0))


def sample_count(lipschitz: float, lo: float, hi: float, epsilon: float) -> int:
    """N = ceil(L * (hi - lo) / (2 eps)) + 1 uniform samples."""
    return math.ceil(lipschitz * (hi - lo) / (2.0 * epsilon)) + 1


def true_function(tag: str):
    if tag not in _PROFILES:
        raise LutError(f"no shipped profile for activation {tag!r}")
    return _PROFILES[tag][0]


def build_lut(activation: str, domain=None, lipschitz=None,
              epsilon: float = DEFAULT_EPSILON) -> LookupTable:
    """Build and audit a single-piece table for a shipped activation.

    ``relu`` and ``linear`` are rejected: they are exact in the encoding and
    never go through a table.
    """
    if activation in ("relu", "linear"):
        raise LutError(f"{activation!r} is exact; lookup tables apply to non-linear AFs only")
    if activation not in _PROFILES:
        raise LutError(
            f"unknown activation {activation!r}: supply a custom table with its "
            f"Lipschitz constant (build_custom_lut)"
        )
    fn, default_domain, default_lipschitz = _PROFILES[activation]
    lo, hi = domain if domain is not None else default_domain
    lam = lipschitz if lipschitz is not None else default_lipschitz
    return build_custom_lut(fn, [(lo, hi, lam)], epsilon, tag=activation)


def build_custom_lut(fn, pieces, epsilon: float, tag: str = "custom") -> LookupTable:
    """Build a table from explicit (lo, hi, lipschitz) pieces and audit it."""
    if epsilon <= 0:
        raise LutError(f"epsilon must be positive, got {epsilon}")
    built = []
    for lo, hi, lam in pieces:
        if not hi > lo:
            raise LutError(f"piece [{lo}, {hi}] is empty")
        if not lam > 0:
            raise LutError(f"Lipschitz constant must be positive, got {lam}")
        n = sample_count(lam, lo, hi, epsilon)
        ins = np.linspace(lo, hi, n)
        outs = np.asarray(fn(ins), dtype=np.float64)
        built.append(Piece(lo, hi, lam, ins, outs))
    table = LookupTable(tuple(built), epsilon, tag)
    cert = audit_table(table, fn)
    if cert.max_error > epsilon:
        raise LutError(
            f"audit failed for {tag!r}: max error {cert.max_error:.3e} > epsilon {epsilon}"
        )
    return LookupTable(table.pieces, epsilon, tag, cert)


def audit_table(table: LookupTable, fn, points: int = AUDIT_POINTS) -> AuditCertificate:
    """Dense uniform sweep confirming |lookup - fn| <= epsilon on every piece."""
    total_span = sum(p.hi - p.lo for p in table.pieces)
    worst = 0.0
    used = 0
    for piece in table.pieces:
        n = max(2, int(points * (piece.hi - piece.lo) / total_span))
        u = np.linspace(piece.lo, piece.hi, n)
        approx = _eval_array(table, u)
        exact = np.asarray(fn(u), dtype=np.float64)
        worst = max(worst, float(np.max(np.abs(approx - exact))))
        used += n
    return AuditCertificate(worst, used)


def _eval_array(table: LookupTable, u: np.ndarray) -> np.ndarray:
    """Vectorized nearest-sample lookup (ties toward the lower sample)."""
    idx = np.searchsorted(table.midpoints, u, side="left")
    return table.sample_outputs[idx]


def lut_eval(table: LookupTable, u: float) -> float:
    """Total nearest-sample lookup; clamps outside the sampled domain."""
    idx = bisect_left(table.midpoints, u)
    return float(table.sample_outputs[idx])


def lut_range(table: LookupTable, lo: float, hi: float):
    """Exact (min, max) of the lookup output over inputs in [lo, hi]."""
    if hi < lo:
        raise LutError(f"empty query interval [{lo}, {hi}]")
    i0 = bisect_left(table.midpoints, lo)
    i1 = bisect_left(table.midpoints, hi)
    window = table.sample_outputs[i0:i1 + 1]
    return float(np.min(window)), float(np.max(window))


def fxp_lookup_plan(table: LookupTable, cfg: FxpConfig):
    """Integer thresholds and quantized outputs for fixed-point lookup.

    Region i is ``raw <= t[i]`` (minus previous regions) and maps to
    ``out[i]``; the final region ``raw > t[-1]`` maps to ``out[-1]``.
    Thresholds are exact: t[i] = floor(mid[i] * 2**F), so comparing raws
    against them is identical to comparing denoted values against the real
    midpoints.
    """
    scale = 1 << cfg.frac_bits
    thresholds = [
        (Fraction(float(m)) * scale).__floor__() for m in table.midpoints
    ]
    outputs = [float_to_fxp(float(y), cfg).raw for y in table.sample_outputs]
    return thresholds, outputs


def lut_eval_fxp(table: LookupTable, u: FxpValue) -> FxpValue:
    """Quantized lookup: float_to_fxp(lut_eval(table, denote(u))).

    Implemented over exact integer thresholds so the result is bit-exact
    even when denote(u) is not representable in double.
    """
    cfg = u.config
    thresholds, outputs = fxp_lookup_plan(table, cfg)
    idx = bisect_left(thresholds, u.raw)
    return FxpValue(outputs[idx], cfg)


def f32_lookup_plan(table: LookupTable):
    """Float32 midpoints/outputs shared by the binary32 encoder and interpreter."""
    mids = table.midpoints.astype(np.float32)
    outs = table.sample_outputs.astype(np.float32)
    return mids, outs


def export_lut(table: LookupTable) -> str:
    """Versioned text form: header, then one 'input output' pair per line."""
    lines = [
        "# qnnv lookup table v1",
        f"source {table.source_tag}",
        f"epsilon {table.epsilon!r}",
        f"pieces {len(table.pieces)}",
    ]
    for p in table.pieces:
        lines.append(f"piece {p.lo!r} {p.hi!r} {p.lipschitz!r} {p.inputs.size}")
        for x, y in zip(p.inputs, p.outputs):
            lines.append(f"{float(x)!r} {float(y)!r}")
    return "\n".join(lines) + "\n"


def import_lut(text: str) -> LookupTable:
    """Parse an exported table; validates structure but re-runs no audit.

    User-supplied tables for custom activations come in through here; the
    epsilon in the header is trusted as the supplier's certified bound.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    pos = 0

    def take(prefix):
        nonlocal pos
        if pos >= len(lines) or not lines[pos].startswith(prefix + " "):
            raise LutError(f"expected '{prefix} ...' at table line {pos + 1}")
        parts = lines[pos].split()[1:]
        pos += 1
        return parts

    (tag,) = take("source")
    (eps_text,) = take("epsilon")
    (count_text,) = take("pieces")
    epsilon = float(eps_text)
    pieces = []
    for _ in range(int(count_text)):
        lo_t, hi_t, lam_t, n_t = take("piece")
        n = int(n_t)
        ins = np.empty(n)
        outs = np.empty(n)
        for i in range(n):
            if pos >= len(lines):
                raise LutError("unexpected end of table data")
            try:
                x_t, y_t = lines[pos].split()
                ins[i], outs[i] = float(x_t), float(y_t)
            except ValueError:
                raise LutError(f"bad sample pair at table line {pos + 1}") from None
            pos += 1
        pieces.append(Piece(float(lo_t), float(hi_t), float(lam_t), ins, outs))
    if pos != len(lines):
        raise LutError("trailing content after table data")
    return LookupTable(tuple(pieces), epsilon, tag)


def standard_tables(epsilon: float = DEFAULT_EPSILON) -> dict:
    """The pre-computed sigmoid and tanh tables used throughout the pipeline."""
    return {name: build_lut(name, epsilon=epsilon) for name in _PROFILES}


def tables_for_model(model, epsilon: float = DEFAULT_EPSILON) -> dict:
    """Build only the tables the model's activations actually need."""
    needed = {a for a in model.activations_used() if a in _PROFILES}
    return {name: build_lut(name, epsilon=epsilon) for name in needed}
