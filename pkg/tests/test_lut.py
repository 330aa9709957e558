import math

import numpy as np
import pytest

from qnnv.errors import LutError
from qnnv.fixedpoint import FxpConfig, FxpValue, float_to_fxp
from qnnv.lut import (
    build_custom_lut,
    build_lut,
    export_lut,
    fxp_lookup_plan,
    import_lut,
    lut_eval,
    lut_eval_fxp,
    lut_range,
    sample_count,
)


def sigmoid(u):
    return 1.0 / (1.0 + np.exp(-u))


class TestBuild:
    def test_sigmoid_sample_count(self):
        # ceil(0.25 * 16 / 0.004) + 1 == 1001
        assert sample_count(0.25, -8.0, 8.0, 0.002) == 1001
        t = build_lut("sigmoid")
        assert t.num_samples == 1001

    def test_tanh_sample_count_and_audit(self):
        t = build_lut("tanh")
        assert t.num_samples == 2001
        assert t.audit is not None and t.audit.max_error <= 0.002
        assert t.audit.points >= 1_000_000

    def test_exact_functions_rejected(self):
        with pytest.raises(LutError):
            build_lut("linear")
        with pytest.raises(LutError):
            build_lut("relu")

    def test_unknown_activation_needs_custom_table(self):
        with pytest.raises(LutError) as err:
            build_lut("swish")
        assert "Lipschitz" in str(err.value)

    def test_bad_parameters(self):
        with pytest.raises(LutError):
            build_lut("sigmoid", epsilon=0.0)
        with pytest.raises(LutError):
            build_custom_lut(np.sin, [(2.0, 1.0, 1.0)], 0.01)
        with pytest.raises(LutError):
            build_custom_lut(np.sin, [(0.0, 1.0, -1.0)], 0.01)

    def test_custom_epsilon_shrinks_spacing(self):
        coarse = build_lut("sigmoid", epsilon=0.01)
        fine = build_lut("sigmoid", epsilon=0.001)
        assert fine.num_samples > coarse.num_samples
        assert fine.audit.max_error <= 0.001


class TestEval:
    def test_centre_sample(self, std_luts):
        assert lut_eval(std_luts["sigmoid"], 0.0) == 0.5

    def test_clamp_below(self, std_luts):
        t = std_luts["sigmoid"]
        v = lut_eval(t, -100.0)
        assert v == t.clamp_low == pytest.approx(3.3535013046647827e-4, rel=1e-9)
        assert lut_eval(t, 100.0) == t.clamp_high

    def test_clamps_equal_edge_samples(self, std_luts):
        for t in std_luts.values():
            assert t.clamp_low == t.sample_outputs[0]
            assert t.clamp_high == t.sample_outputs[-1]

    def test_exact_sample_hit(self, std_luts):
        t = std_luts["tanh"]
        for i in (0, 1, 700, 2000):
            u = float(t.sample_inputs[i])
            assert lut_eval(t, u) == float(t.sample_outputs[i])

    def test_tie_breaks_toward_lower_sample(self, std_luts):
        t = std_luts["sigmoid"]
        mid = float(t.midpoints[500])
        assert lut_eval(t, mid) == float(t.sample_outputs[500])

    def test_error_bound_dense_sweep(self, std_luts):
        t = std_luts["sigmoid"]
        u = np.linspace(-8, 8, 200_001)
        idx = np.searchsorted(t.midpoints, u, side="left")
        err = np.abs(t.sample_outputs[idx] - sigmoid(u))
        assert float(err.max()) <= 0.002

    def test_monotone_lookup_of_monotone_function(self, std_luts):
        t = std_luts["sigmoid"]
        us = np.linspace(-9, 9, 5001)
        vals = [lut_eval(t, float(u)) for u in us]
        assert all(a <= b for a, b in zip(vals, vals[1:]))

    def test_lut_range_exact(self, std_luts):
        t = std_luts["sigmoid"]
        mn, mx = lut_range(t, 0.0, 2.0)
        dense = [lut_eval(t, float(u)) for u in np.linspace(-0.01, 2.01, 4001)]
        # window covers every sample reachable from [0, 2]
        assert mn <= min(d for d in dense if d >= mn - 1e-12)
        assert mn == min(lut_eval(t, 0.0), lut_eval(t, 2.0))
        assert mx == max(lut_eval(t, 0.0), lut_eval(t, 2.0))


class TestFxpEval:
    def test_zero_through_sigmoid(self, std_luts):
        cfg = FxpConfig(4, 4)
        v = lut_eval_fxp(std_luts["sigmoid"], float_to_fxp(0.0, cfg))
        assert v.raw == 8 and v.value == 0.5

    def test_clamp_path(self, std_luts):
        cfg = FxpConfig(4, 4)
        t = std_luts["sigmoid"]
        v = lut_eval_fxp(t, float_to_fxp(-16.0, cfg))
        assert v.raw == float_to_fxp(t.clamp_low, cfg).raw

    def test_exhaustive_q24_matches_definition(self, std_luts):
        """Integer-threshold path == float_to_fxp(lut_eval(denote)) everywhere."""
        cfg = FxpConfig(2, 4)
        t = std_luts["sigmoid"]
        for raw in range(cfg.raw_min, cfg.raw_max + 1):
            v = FxpValue(raw, cfg)
            direct = float_to_fxp(lut_eval(t, v.value), cfg)
            assert lut_eval_fxp(t, v).raw == direct.raw

    def test_plan_thresholds_are_exact_floors(self, std_luts):
        cfg = FxpConfig(2, 4)
        t = std_luts["sigmoid"]
        thresholds, outputs = fxp_lookup_plan(t, cfg)
        assert len(thresholds) == t.num_samples - 1
        assert len(outputs) == t.num_samples
        for mid, thr in zip(t.midpoints[::97], thresholds[::97]):
            assert thr == math.floor(float(mid) * 16)


class TestMultiPiece:
    def piecewise(self):
        def f(u):
            u = np.asarray(u, dtype=np.float64)
            return np.where(u < 0, np.sin(u), 0.5 * u * u - 1.0)

        return build_custom_lut(
            f, [(-3.0, -0.5, 1.0), (0.5, 3.0, 3.0)], epsilon=0.01, tag="pw")

    def test_pieces_disjoint_and_audited(self):
        t = self.piecewise()
        assert len(t.pieces) == 2
        assert t.pieces[0].hi <= t.pieces[1].lo
        assert t.audit.max_error <= 0.01

    def test_eval_within_each_piece(self):
        t = self.piecewise()
        assert lut_eval(t, -2.0) == pytest.approx(math.sin(-2.0), abs=0.01)
        assert lut_eval(t, 2.0) == pytest.approx(0.5 * 4 - 1.0, abs=0.01)

    def test_gap_resolves_to_nearest_sample(self):
        t = self.piecewise()
        assert lut_eval(t, -0.4) == pytest.approx(math.sin(-0.5), abs=1e-12)
        assert lut_eval(t, 0.4) == pytest.approx(0.5 * 0.25 - 1.0, abs=1e-12)

    def test_overlapping_pieces_rejected(self):
        with pytest.raises(LutError):
            build_custom_lut(np.sin, [(-1.0, 0.5, 1.0), (0.0, 1.0, 1.0)], 0.01)


class TestExportImport:
    def test_round_trip(self, std_luts):
        t = std_luts["tanh"]
        again = import_lut(export_lut(t))
        assert again.source_tag == "tanh"
        assert again.epsilon == t.epsilon
        assert np.array_equal(again.sample_inputs, t.sample_inputs)
        assert np.array_equal(again.sample_outputs, t.sample_outputs)

    def test_multi_piece_round_trip(self):
        t = TestMultiPiece().piecewise()
        again = import_lut(export_lut(t))
        assert len(again.pieces) == 2
        assert np.array_equal(again.sample_outputs, t.sample_outputs)

    def test_malformed_header(self):
        with pytest.raises(LutError):
            import_lut("source sigmoid\npieces 1\n")

    def test_truncated_samples(self):
        text = export_lut(build_lut("sigmoid", domain=(-1, 1)))
        lines = text.splitlines()
        with pytest.raises(LutError):
            import_lut("\n".join(lines[:-5]))
