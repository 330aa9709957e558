"""Bit-exact signed fixed-point arithmetic.

A value in format Q(I,F) is a two's-complement integer ``raw`` of width
``1 + I + F`` denoting the real number ``raw * 2**-F``.  All operations are
pure functions over immutable values; results are rescaled and then pushed
through the configured overflow behaviour, mirroring the C-style operational
model (declare, multiply wide, shift, wrap) that the SMT encoder replicates
bit for bit.

Python's unbounded integers make every intermediate exact; rounding is the
only place behaviour branches, controlled by two knobs:

* ``rounding``       -- rescaling after mult/div ("tn" arithmetic-shift floor,
                        or "rne" round-half-to-even),
* ``conv_rounding``  -- float -> fixed conversion (default "rne").
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import FxpError, FxpDivisionByZero

WRAP = "wrap"
SATURATE = "sat"
ROUND_NEAREST_EVEN = "rne"
TRUNCATE = "tn"

_OVERFLOW_MODES = (WRAP, SATURATE)
_ROUNDING_MODES = (ROUND_NEAREST_EVEN, TRUNCATE)

MAX_TOTAL_WIDTH = 64


@dataclass(frozen=True)
class FxpConfig:
    """Fixed-point format: sign bit + ``int_bits`` + ``frac_bits``."""

    int_bits: int
    frac_bits: int
    overflow: str = WRAP
    rounding: str = TRUNCATE
    conv_rounding: str = ROUND_NEAREST_EVEN

    def __post_init__(self):
        if self.int_bits < 1:
            raise FxpError(f"int_bits must be positive, got {self.int_bits}")
        if self.frac_bits < 0:
            raise FxpError(f"frac_bits must be non-negative, got {self.frac_bits}")
        if self.width > MAX_TOTAL_WIDTH:
            raise FxpError(
                f"total width {self.width} exceeds the {MAX_TOTAL_WIDTH}-bit limit"
            )
        if self.overflow not in _OVERFLOW_MODES:
            raise FxpError(f"unknown overflow mode {self.overflow!r}")
        if self.rounding not in _ROUNDING_MODES:
            raise FxpError(f"unknown rounding mode {self.rounding!r}")
        if self.conv_rounding not in _ROUNDING_MODES:
            raise FxpError(f"unknown conversion rounding mode {self.conv_rounding!r}")

    @property
    def width(self) -> int:
        return 1 + self.int_bits + self.frac_bits

    @property
    def raw_min(self) -> int:
        return -(1 << (self.width - 1))

    @property
    def raw_max(self) -> int:
        return (1 << (self.width - 1)) - 1

    @property
    def quantum(self) -> float:
        """Value of one least-significant fractional step, 2**-F."""
        return 2.0 ** -self.frac_bits

    @property
    def value_min(self) -> float:
        return self.raw_min * self.quantum

    @property
    def value_max(self) -> float:
        return self.raw_max * self.quantum

    def spec_string(self) -> str:
        parts = [f"fxp:{self.int_bits}.{self.frac_bits}", self.overflow, self.rounding]
        if self.conv_rounding != ROUND_NEAREST_EVEN:
            parts.append("c" + self.conv_rounding)
        return ":".join(parts)


def parse_quant_spec(spec: str) -> "FxpConfig | str":
    """Parse a CLI quantization spec.

    ``fxp:<int_bits>.<frac_bits>[:wrap|sat][:rne|tn][:crne|ctn]`` selects a
    fixed-point format; ``float32`` selects the IEEE binary32 path.
    """
    spec = spec.strip()
    if spec == "float32":
        return "float32"
    parts = spec.split(":")
    if not parts or parts[0] != "fxp" or len(parts) < 2:
        raise FxpError(f"unrecognised quantization spec {spec!r}")
    try:
        int_text, frac_text = parts[1].split(".")
        int_bits, frac_bits = int(int_text), int(frac_text)
    except ValueError:
        raise FxpError(f"bad format field {parts[1]!r} in {spec!r} (want I.F)") from None
    overflow, rounding, conv = WRAP, TRUNCATE, ROUND_NEAREST_EVEN
    for token in parts[2:]:
        if token in _OVERFLOW_MODES:
            overflow = token
        elif token in _ROUNDING_MODES:
            rounding = token
        elif token.startswith("c") and token[1:] in _ROUNDING_MODES:
            conv = token[1:]
        else:
            raise FxpError(f"unknown token {token!r} in quantization spec {spec!r}")
    return FxpConfig(int_bits, frac_bits, overflow, rounding, conv)


@dataclass(frozen=True)
class FxpValue:
    """A raw two's-complement integer under a fixed-point format."""

    raw: int
    config: FxpConfig

    def __post_init__(self):
        if not self.config.raw_min <= self.raw <= self.config.raw_max:
            raise FxpError(
                f"raw {self.raw} outside width-{self.config.width} range "
                f"[{self.config.raw_min}, {self.config.raw_max}]"
            )

    @property
    def value(self) -> float:
        """Denoted real value, raw * 2**-F (exact for widths <= 53)."""
        return self.raw * self.config.quantum

    def exact(self) -> Fraction:
        return Fraction(self.raw, 1 << self.config.frac_bits)

    def __repr__(self):
        return f"FxpValue({self.value}, raw={self.raw}, Q({self.config.int_bits},{self.config.frac_bits}))"


def apply_overflow(raw: int, cfg: FxpConfig) -> int:
    """Push an unbounded integer into the configured width."""
    if cfg.overflow == SATURATE:
        return min(max(raw, cfg.raw_min), cfg.raw_max)
    span = 1 << cfg.width
    return (raw - cfg.raw_min) % span + cfg.raw_min


def round_rational(num: int, den: int, mode: str) -> int:
    """Round num/den (den > 0) to an integer under the given mode."""
    if mode == TRUNCATE:
        return num // den
    q, rem = divmod(num, den)  # rem in [0, den)
    twice = 2 * rem
    if twice > den or (twice == den and q & 1):
        q += 1
    return q


def float_to_fxp(x: float, cfg: FxpConfig) -> FxpValue:
    """Quantize a finite real to the grid: round x * 2**F, then overflow."""
    if x != x or x in (float("inf"), float("-inf")):
        raise FxpError(f"cannot quantize non-finite value {x!r}")
    scaled = Fraction(x) * (1 << cfg.frac_bits)
    raw = round_rational(scaled.numerator, scaled.denominator, cfg.conv_rounding)
    return FxpValue(apply_overflow(raw, cfg), cfg)


def float_to_raw(x: float, cfg: FxpConfig) -> int:
    return float_to_fxp(x, cfg).raw


def _check_pair(a: FxpValue, b: FxpValue):
    if a.config != b.config:
        raise FxpError(f"config mismatch: {a.config} vs {b.config}")


def fxp_add(a: FxpValue, b: FxpValue) -> FxpValue:
    _check_pair(a, b)
    return FxpValue(apply_overflow(a.raw + b.raw, a.config), a.config)


def fxp_sub(a: FxpValue, b: FxpValue) -> FxpValue:
    _check_pair(a, b)
    return FxpValue(apply_overflow(a.raw - b.raw, a.config), a.config)


def fxp_mult(a: FxpValue, b: FxpValue) -> FxpValue:
    """Wide exact product, rescale by 2**-F under ``rounding``, overflow."""
    _check_pair(a, b)
    cfg = a.config
    wide = a.raw * b.raw
    raw = round_rational(wide, 1 << cfg.frac_bits, cfg.rounding)
    return FxpValue(apply_overflow(raw, cfg), cfg)


def fxp_div(a: FxpValue, b: FxpValue) -> FxpValue:
    """(a.raw << F) / b.raw under ``rounding``, then overflow."""
    _check_pair(a, b)
    cfg = a.config
    if b.raw == 0:
        raise FxpDivisionByZero(f"division by zero ({a!r} / raw 0)")
    num = a.raw << cfg.frac_bits
    den = b.raw
    if den < 0:
        num, den = -num, -den
    raw = round_rational(num, den, cfg.rounding)
    return FxpValue(apply_overflow(raw, cfg), cfg)


def fxp_potential(w, x, b, cfg: FxpConfig) -> FxpValue:
    """Neuron potential: left-to-right fold of quantized multiply-accumulate.

    Quantizes each weight, folds ``acc = acc + w_i * x_i`` in declaration
    order (order matters: wrap-mode addition is not associative at the
    overflow boundary), then adds the quantized bias last.
    """
    if len(w) != len(x):
        raise FxpError(f"length mismatch: {len(w)} weights vs {len(x)} inputs")
    acc = FxpValue(0, cfg)
    for wi, xi in zip(w, x):
        if xi.config != cfg:
            raise FxpError("input value config differs from potential config")
        acc = fxp_add(acc, fxp_mult(float_to_fxp(float(wi), cfg), xi))
    return fxp_add(acc, float_to_fxp(float(b), cfg))
