import itertools
import random

import numpy as np
import pytest

from helpers import random_model
from qnnv.errors import DimensionError, LutError, QnnvError
from qnnv.fixedpoint import FxpConfig
from qnnv.interval import (
    Box,
    Interval,
    activation_bounds,
    affine_bounds,
    emit_invariant_constraints,
    format_invariant_report,
    infer_invariants,
    quantize_box_inward,
)
from qnnv.oracle import interpret_quantized


def box(*pairs):
    return Box(tuple(Interval(lo, hi) for lo, hi in pairs))


class TestInterval:
    def test_invariants(self):
        with pytest.raises(QnnvError):
            Interval(2.0, 1.0)
        with pytest.raises(QnnvError):
            Interval(float("-inf"), 0.0)

    def test_widen_and_clamp(self):
        iv = Interval(-1.0, 1.0).widen(0.5)
        assert iv.lo <= -1.5 and iv.hi >= 1.5
        assert Interval(-3.0, 9.0).clamp(-1.0, 2.0) == Interval(-1.0, 2.0)


class TestAffineBounds:
    def test_single_term(self):
        out = affine_bounds(np.array([[2.0]]), np.array([1.0]), box((-1, 1)))
        assert out.dims[0].lo == pytest.approx(-1.0, abs=1e-12)
        assert out.dims[0].hi == pytest.approx(3.0, abs=1e-12)
        assert out.dims[0].lo <= -1.0 <= 3.0 <= out.dims[0].hi

    def test_opposing_signs(self):
        out = affine_bounds(np.array([[1.0, -1.0]]), np.array([0.0]),
                            box((0, 1), (0, 1)))
        assert out.dims[0].lo == pytest.approx(-1.0, abs=1e-12)
        assert out.dims[0].hi == pytest.approx(1.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            affine_bounds(np.ones((2, 3)), np.zeros(2), box((0, 1)))

    def test_monte_carlo_soundness_10x10(self):
        rng = np.random.default_rng(5)
        w = rng.normal(size=(10, 10))
        b = rng.normal(size=10)
        in_box = box(*[(-1 - i * 0.1, 1 + i * 0.05) for i in range(10)])
        out = affine_bounds(w, b, in_box)
        los = np.array([iv.lo for iv in in_box])
        his = np.array([iv.hi for iv in in_box])
        xs = rng.uniform(los, his, size=(10_000, 10))
        ys = xs @ w.T + b
        for j, iv in enumerate(out.dims):
            assert float(ys[:, j].min()) >= iv.lo
            assert float(ys[:, j].max()) <= iv.hi


class TestActivationBounds:
    def test_relu(self):
        assert activation_bounds("relu", Interval(-1, 1)) == Interval(0.0, 1.0)
        assert activation_bounds("relu", Interval(-3, -1)) == Interval(0.0, 0.0)

    def test_linear_identity(self):
        iv = Interval(-2.5, 4.0)
        assert activation_bounds("linear", iv) == iv

    def test_sigmoid_endpoints_with_epsilon(self, std_luts):
        t = std_luts["sigmoid"]
        out = activation_bounds("sigmoid", Interval(0.0, 2.0), t)
        sig = lambda u: 1.0 / (1.0 + np.exp(-u))
        assert out.lo <= 0.5 - t.epsilon + 1e-12
        assert out.hi >= sig(2.0) + t.epsilon - 1e-12
        assert out.lo >= 0.5 - 2 * t.epsilon
        assert out.hi <= sig(2.0) + 2 * t.epsilon
        assert out.hi == pytest.approx(0.88080 + t.epsilon, abs=1e-3)

    def test_lut_required_for_nonlinear(self):
        with pytest.raises(LutError):
            activation_bounds("sigmoid", Interval(0, 1), None)

    def test_nonmonotone_custom_lut(self):
        from qnnv.lut import build_custom_lut

        t = build_custom_lut(lambda u: np.sin(3 * u), [(-2.0, 2.0, 3.0)], 0.01,
                             tag="wiggle")
        out = activation_bounds("wiggle", Interval(-2.0, 2.0), t)
        assert out.lo <= -1.0 + 0.02 and out.hi >= 1.0 - 0.02


class TestQuantizeInward:
    def test_tightens_to_grid(self):
        cfg = FxpConfig(4, 4)
        b = quantize_box_inward(box((0.01, 0.99)), cfg)
        assert b.dims[0].lo == 0.0625  # ceil(0.01*16)/16
        assert b.dims[0].hi == 0.9375  # floor(0.99*16)/16

    def test_empty_dimension_collapses(self):
        cfg = FxpConfig(4, 4)
        b = quantize_box_inward(box((0.01, 0.02)), cfg)
        assert b.dims[0].lo == b.dims[0].hi


class TestInferInvariants:
    def test_identity_network(self, std_luts):
        from qnnv.model import DenseLayer, ModelIR

        m = ModelIR((DenseLayer(np.array([[1.0]]), np.array([0.0]), "linear"),))
        cfg = FxpConfig(4, 4)
        inv = infer_invariants(m, box((0.0, 1.0)), std_luts, cfg.quantum, cfg)
        pre = inv.pre[0][0]
        post = inv.post[0][0]
        slack = 3 * cfg.quantum
        for iv in (pre, post):
            assert iv.lo <= 0.0 <= 1.0 <= iv.hi
            assert iv.lo >= -slack - 1e-9 and iv.hi <= 1.0 + slack + 1e-9

    def test_exhaustive_quantized_containment_q24(self, std_luts):
        """Core soundness: every reachable quantized value inside its interval."""
        rng = np.random.default_rng(21)
        pyrng = random.Random(21)
        cfg = FxpConfig(2, 4)
        for _ in range(6):
            m = random_model(rng, pyrng, max_layers=2, max_neurons=3, max_inputs=2)
            H = box(*[(-1.0, 1.0)] * m.input_dim)
            inv = infer_invariants(m, H, std_luts, cfg.quantum, cfg)
            axes = [range(-16, 17)] * m.input_dim  # raws for [-1, 1] at F=4
            for raws in itertools.product(*axes):
                trace = interpret_quantized(m, cfg, std_luts, list(raws))
                for k, (us, ys) in enumerate(trace.layers):
                    for j, u in enumerate(us):
                        assert inv.pre[k][j].contains(u), (k, j, u, inv.pre[k][j])
                    for j, y in enumerate(ys):
                        assert inv.post[k][j].contains(y), (k, j, y, inv.post[k][j])

    def test_monotone_in_box(self, std_luts):
        rng = np.random.default_rng(9)
        pyrng = random.Random(9)
        m = random_model(rng, pyrng, max_layers=3, max_neurons=4, max_inputs=2)
        cfg = FxpConfig(4, 6)
        big = box(*[(-2.0, 2.0)] * m.input_dim)
        small = box(*[(-0.5, 0.5)] * m.input_dim)
        inv_big = infer_invariants(m, big, std_luts, cfg.quantum, cfg)
        inv_small = infer_invariants(m, small, std_luts, cfg.quantum, cfg)
        for k in range(len(m.layers)):
            for j in range(m.layers[k].out_dim):
                assert inv_small.pre[k][j].lo >= inv_big.pre[k][j].lo
                assert inv_small.pre[k][j].hi <= inv_big.pre[k][j].hi

    def test_acas_style_box_stays_finite(self, std_luts, data_dir):
        """Figure-3-style input ranges propagate without blowing up."""
        from qnnv.model import parse_nnet

        m = parse_nnet((data_dir / "acas_style.nnet").read_text())
        H = box((0.0, 60760.0), (-3.141592, 3.141592), (-3.141592, 3.141592),
                (100.0, 1200.0), (0.0, 1200.0))
        cfg = FxpConfig(8, 23)
        inv = infer_invariants(m, H, std_luts, cfg.quantum, cfg)
        for layer in inv.pre + inv.post:
            for iv in layer:
                assert np.isfinite(iv.lo) and np.isfinite(iv.hi)

    def test_float32_fuzz_soundness(self, std_luts):
        rng = np.random.default_rng(33)
        pyrng = random.Random(33)
        for _ in range(4):
            m = random_model(rng, pyrng, max_layers=2, max_neurons=3, max_inputs=2)
            H = box(*[(-1.0, 1.0)] * m.input_dim)
            inv = infer_invariants(m, H, std_luts, 1e-6, None)
            for _ in range(2000):
                x = rng.uniform(-1.0, 1.0, size=m.input_dim).astype(np.float32)
                trace = interpret_quantized(m, "float32", std_luts, x)
                for k, (us, ys) in enumerate(trace.layers):
                    for j, u in enumerate(us):
                        assert inv.pre[k][j].contains(u)
                    for j, y in enumerate(ys):
                        assert inv.post[k][j].contains(y)


class TestEmission:
    def test_constraint_per_neuron(self, std_luts):
        from qnnv.model import DenseLayer, ModelIR

        m = ModelIR((
            DenseLayer(np.array([[1.0], [0.5]]), np.array([0.0, 0.1]), "relu"),
            DenseLayer(np.array([[1.0, -1.0]]), np.array([0.0]), "linear"),
        ))
        cfg = FxpConfig(4, 4)
        inv = infer_invariants(m, box((0.0, 1.0)), std_luts, cfg.quantum, cfg)
        constraints = emit_invariant_constraints(inv)
        assert len(constraints) == 3  # one per neuron, post only
        assert all(c.kind == "post" for c in constraints)
        assert all(c.lo <= c.hi for c in constraints)

    def test_empty_map(self):
        assert emit_invariant_constraints(None) == []

    def test_full_range_entries_skipped(self, std_luts):
        from qnnv.model import DenseLayer, ModelIR

        # wrap overflow: potential range [-12, 12] escapes [-4, 3.9375],
        # so the bound degrades to the full representable range
        m = ModelIR((DenseLayer(np.array([[3.0]]), np.array([0.0]), "linear"),))
        cfg = FxpConfig(2, 4, overflow="wrap")
        inv = infer_invariants(m, box((-4.0, 3.9375)), std_luts, cfg.quantum, cfg)
        assert inv.pre[0][0] == Interval(cfg.value_min, cfg.value_max)
        assert emit_invariant_constraints(inv) == []

    def test_report_is_figure_shaped(self, std_luts):
        from qnnv.model import DenseLayer, ModelIR

        m = ModelIR((DenseLayer(np.array([[1.0]]), np.array([0.0]), "relu"),))
        cfg = FxpConfig(4, 4)
        inv = infer_invariants(m, box((0.0, 0.25)), std_luts, cfg.quantum, cfg)
        report = format_invariant_report(inv)
        assert "__ESBMC_assume((layer1[0] >= " in report
        assert "&& (layer1[0] <= " in report
