"""Shared result types: traces, counterexamples, verdicts."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

SAFE = "SAFE"
UNSAFE = "UNSAFE"
UNKNOWN = "UNKNOWN"
TIMEOUT = "TIMEOUT"
SOLVER_ERROR = "SOLVER_ERROR"

STATUSES = (SAFE, UNSAFE, UNKNOWN, TIMEOUT, SOLVER_ERROR)


def float32_bits(v) -> int:
    return struct.unpack(">I", struct.pack(">f", float(v)))[0]


def float32_from_bits(bits: int):
    return np.frombuffer(struct.pack(">I", bits), dtype=">f4")[0].astype(np.float32)


@dataclass(frozen=True)
class QuantInput:
    """One input value: raw bit pattern plus denoted real."""

    raw: int
    value: float


@dataclass(frozen=True)
class Trace:
    """Full execution record of one quantized forward pass.

    ``layers`` holds (u_values, y_values) pairs of denoted reals per layer;
    ``raw_layers`` the matching raw integers (fixed point) or float32 bit
    patterns.
    """

    inputs: tuple  # QuantInput per input
    layers: tuple  # ((u tuple, y tuple), ...) denoted reals
    raw_layers: tuple

    @property
    def outputs(self) -> tuple:
        return self.layers[-1][1]

    def input_values(self) -> list:
        return [qi.value for qi in self.inputs]


@dataclass(frozen=True)
class Counterexample:
    input_values: tuple  # QuantInput per input
    violated_assert: int | None
    trace: Trace
    assumes_satisfied: bool = True

    def is_valid(self) -> bool:
        return self.assumes_satisfied and self.violated_assert is not None


@dataclass
class Verdict:
    status: str
    counterexample: Counterexample | None = None
    wall_time: float = 0.0
    solve_time: float | None = None
    solver: str = ""
    diagnostics: str | None = None

    def __post_init__(self):
        assert self.status in STATUSES, self.status
        # Hard gate: UNSAFE verdicts carry a validated witness, nothing else
        # carries one at all.
        if self.status == UNSAFE:
            assert self.counterexample is not None and self.counterexample.is_valid()
        else:
            assert self.counterexample is None

    def to_dict(self) -> dict:
        d = {
            "status": self.status,
            "wall_time": self.wall_time,
            "solve_time": self.solve_time,
            "solver": self.solver,
        }
        if self.diagnostics:
            d["diagnostics"] = self.diagnostics
        if self.counterexample is not None:
            cex = self.counterexample
            d["counterexample"] = {
                "inputs": [{"raw": qi.raw, "value": qi.value} for qi in cex.input_values],
                "violated_assert": cex.violated_assert,
                "outputs": list(cex.trace.outputs),
                "trace": [
                    {"u": list(u), "y": list(y)} for u, y in cex.trace.layers
                ],
            }
        return d
