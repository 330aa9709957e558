"""In-memory network representation plus NNET and JSON interchange parsers.

Weights are parsed as decimal text into double precision and kept there;
quantization happens once, at encoding/interpretation time.  NNET
normalization constants are retained in ``metadata`` but never silently
applied (AcasXu-style properties are conventionally stated on normalized
inputs, so applying them implicitly would change property semantics).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ModelFormatError

ACTIVATIONS = ("relu", "sigmoid", "tanh", "linear")

JSON_FORMAT_VERSION = 1


@dataclass(frozen=True)
class NnetMetadata:
    """Per-input normalization constants from an NNET header."""

    input_mins: tuple
    input_maxs: tuple
    means: tuple
    ranges: tuple


@dataclass(frozen=True)
class DenseLayer:
    """One fully-connected layer: row-major weights, bias, activation tag."""

    weights: np.ndarray  # shape (out, in), float64
    bias: np.ndarray  # shape (out,), float64
    activation: str

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] == 0 or w.shape[1] == 0:
            raise DimensionError(f"weight matrix must be 2-D and non-empty, got shape {w.shape}")
        if b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise DimensionError(
                f"bias length {b.shape} inconsistent with {w.shape[0]} weight rows"
            )
        if self.activation not in ACTIVATIONS:
            raise ModelFormatError(f"unknown activation {self.activation!r}")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class ModelIR:
    """Layered feedforward network; immutable and safe to share."""

    layers: tuple
    metadata: NnetMetadata | None = field(default=None)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise DimensionError("network must have at least one layer")
        for i in range(1, len(layers)):
            if layers[i].in_dim != layers[i - 1].out_dim:
                raise DimensionError(
                    f"layer {i} expects {layers[i].in_dim} inputs but layer "
                    f"{i - 1} produces {layers[i - 1].out_dim}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def activations_used(self):
        return sorted({layer.activation for layer in self.layers})


def _parse_numbers(text: str, lineno: int):
    """Split a comma/whitespace-separated value line into floats."""
    tokens = [t for t in text.replace(",", " ").split() if t]
    values = []
    for tok in tokens:
        try:
            values.append(float(tok))
        except ValueError:
            raise ModelFormatError(f"non-numeric token {tok!r}", line=lineno) from None
    return values


def parse_nnet(text: str) -> ModelIR:
    """Parse the NNET text format (see package docs for the layout).

    Header: one line with the layer count followed by the layer sizes, then
    per-input minimums, maximums, means and ranges.  Body: for each layer,
    one line per weight row, then one line per bias entry.  ``//`` starts a
    comment line.
    """
    lines = []  # (lineno, content)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("//"):
            continue
        lines.append((lineno, stripped))
    if not lines:
        raise ModelFormatError("empty NNET file")

    cursor = 0

    def next_line(what):
        nonlocal cursor
        if cursor >= len(lines):
            last = lines[-1][0] if lines else 0
            raise ModelFormatError(f"unexpected end of file, expected {what}", line=last)
        entry = lines[cursor]
        cursor += 1
        return entry

    lineno, header = next_line("header")
    header_vals = _parse_numbers(header, lineno)
    if len(header_vals) < 2:
        raise ModelFormatError("header must list the layer count and layer sizes", line=lineno)
    num_layers = int(header_vals[0])
    if num_layers < 1:
        raise ModelFormatError(f"layer count must be positive, got {num_layers}", line=lineno)
    sizes = [int(v) for v in header_vals[1:]]
    if len(sizes) != num_layers + 1:
        raise ModelFormatError(
            f"expected {num_layers + 1} layer sizes for {num_layers} layers, got {len(sizes)}",
            line=lineno,
        )
    if any(s < 1 for s in sizes):
        raise ModelFormatError("layer sizes must be positive", line=lineno)
    input_dim = sizes[0]

    def header_vector(name, allow_extra):
        lineno, content = next_line(name)
        vals = _parse_numbers(content, lineno)
        if len(vals) == input_dim:
            return tuple(vals)
        if allow_extra and len(vals) == input_dim + 1:
            return tuple(vals)
        raise ModelFormatError(
            f"{name} must have {input_dim} entries, got {len(vals)}", line=lineno
        )

    mins = header_vector("input minimums", allow_extra=False)
    maxs = header_vector("input maximums", allow_extra=False)
    # AcasXu convention allows one extra mean/range entry for the outputs.
    means = header_vector("means", allow_extra=True)
    ranges = header_vector("ranges", allow_extra=True)
    metadata = NnetMetadata(mins, maxs, means, ranges)

    layers = []
    for k in range(num_layers):
        rows, cols = sizes[k + 1], sizes[k]
        weights = np.empty((rows, cols), dtype=np.float64)
        for r in range(rows):
            lineno, content = next_line(f"layer {k} weight row {r}")
            vals = _parse_numbers(content, lineno)
            if len(vals) != cols:
                raise ModelFormatError(
                    f"layer {k} weight row {r} has {len(vals)} entries, expected {cols}",
                    line=lineno,
                )
            weights[r] = vals
        bias = np.empty(rows, dtype=np.float64)
        for r in range(rows):
            lineno, content = next_line(f"layer {k} bias {r}")
            vals = _parse_numbers(content, lineno)
            if len(vals) != 1:
                raise ModelFormatError(
                    f"layer {k} bias line has {len(vals)} entries, expected 1", line=lineno
                )
            bias[r] = vals[0]
        # hidden layers are ReLU, the output layer linear; a single-layer
        # network is treated as one ReLU layer
        activation = "relu" if (k < num_layers - 1 or num_layers == 1) else "linear"
        layers.append(DenseLayer(weights, bias, activation))

    if cursor != len(lines):
        lineno = lines[cursor][0]
        raise ModelFormatError("trailing content after final layer", line=lineno)
    return ModelIR(tuple(layers), metadata)


def parse_json_model(text: str) -> ModelIR:
    """Parse the JSON interchange format (format_version 1)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"invalid JSON: {exc}", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ModelFormatError("top level must be an object")
    version = doc.get("format_version")
    if version != JSON_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {version!r} (expected 1)")
    raw_layers = doc.get("layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise ModelFormatError("'layers' must be a non-empty array")

    layers = []
    for i, entry in enumerate(raw_layers):
        if not isinstance(entry, dict):
            raise ModelFormatError(f"layer {i} must be an object")
        if entry.get("type") != "dense":
            raise ModelFormatError(f"layer {i}: unsupported type {entry.get('type')!r}")
        activation = entry.get("activation")
        if activation not in ACTIVATIONS:
            raise ModelFormatError(f"layer {i}: unknown activation {activation!r}")
        weights = entry.get("weights")
        bias = entry.get("bias")
        if not isinstance(weights, list) or not weights:
            raise ModelFormatError(f"layer {i}: 'weights' must be a non-empty array of rows")
        row_len = None
        for r, row in enumerate(weights):
            if not isinstance(row, list) or not row:
                raise ModelFormatError(f"layer {i}: weight row {r} must be a non-empty array")
            if row_len is None:
                row_len = len(row)
            elif len(row) != row_len:
                raise ModelFormatError(
                    f"layer {i}: jagged weight matrix (row {r} has {len(row)} entries, "
                    f"expected {row_len})"
                )
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in row):
                raise ModelFormatError(f"layer {i}: weight row {r} has a non-numeric entry")
        if not isinstance(bias, list) or len(bias) != len(weights):
            raise ModelFormatError(
                f"layer {i}: 'bias' must be an array of length {len(weights)}"
            )
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in bias):
            raise ModelFormatError(f"layer {i}: bias has a non-numeric entry")
        layers.append(DenseLayer(np.array(weights, dtype=np.float64),
                                 np.array(bias, dtype=np.float64), activation))
    try:
        return ModelIR(tuple(layers))
    except DimensionError as exc:
        raise ModelFormatError(str(exc)) from None


def to_json(m: ModelIR) -> str:
    """Serialize to the interchange format; floats round-trip exactly."""
    doc = {
        "format_version": JSON_FORMAT_VERSION,
        "layers": [
            {
                "type": "dense",
                "weights": [[float(v) for v in row] for row in layer.weights],
                "bias": [float(v) for v in layer.bias],
                "activation": layer.activation,
            }
            for layer in m.layers
        ],
    }
    return json.dumps(doc, indent=1)


def forward_real(m: ModelIR, x) -> np.ndarray:
    """Reference double-precision forward pass (the idealized baseline)."""
    v = np.asarray(x, dtype=np.float64)
    if v.shape != (m.input_dim,):
        raise DimensionError(f"input shape {v.shape} does not match input_dim {m.input_dim}")
    for layer in m.layers:
        u = layer.weights @ v + layer.bias
        v = _activate_real(layer.activation, u)
    return v


def _activate_real(activation: str, u: np.ndarray) -> np.ndarray:
    if activation == "relu":
        return np.maximum(u, 0.0)
    if activation == "sigmoid":
        return 1.0 / (1.0 + np.exp(-u))
    if activation == "tanh":
        return np.tanh(u)
    return u


def apply_input_normalization(m: ModelIR) -> ModelIR:
    """Fold NNET input normalization (x - mean) / range into the first layer.

    Produces a network over raw (unnormalized) inputs.  Input clipping to
    [min, max] is not folded (it is not affine); callers wanting the clip
    should intersect their input box with the metadata bounds instead.
    """
    if m.metadata is None:
        raise ModelFormatError("model carries no normalization metadata")
    d = m.input_dim
    means = np.array(m.metadata.means[:d], dtype=np.float64)
    ranges = np.array(m.metadata.ranges[:d], dtype=np.float64)
    if np.any(ranges == 0.0):
        raise ModelFormatError("normalization range of zero")
    first = m.layers[0]
    w = first.weights / ranges  # scales columns
    b = first.bias - (first.weights @ (means / ranges))
    layers = (DenseLayer(w, b, first.activation),) + m.layers[1:]
    return ModelIR(layers, m.metadata)
