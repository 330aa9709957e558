import json
from pathlib import Path

import numpy as np
import pytest

import qnnv.cli as cli
from qnnv.lut import import_lut
from qnnv.model import DenseLayer, ModelIR, to_json

SOLVER_DIR = str(Path(__file__).resolve().parents[1] / "solvers" / "z3js")


@pytest.fixture()
def workdir(tmp_path):
    m = ModelIR((DenseLayer(np.array([[1.0]]), np.array([0.0]), "relu"),))
    model = tmp_path / "net.json"
    model.write_text(to_json(m))
    safe = tmp_path / "safe.qnp"
    safe.write_text("assume x[0] >= 0; assume x[0] <= 1;\nassert y[0] >= 0;\n")
    unsafe = tmp_path / "unsafe.qnp"
    unsafe.write_text("assume x[0] >= 0; assume x[0] <= 1;\nassert y[0] > 0.5;\n")
    return tmp_path


def _verify_args(workdir, prop, *extra):
    return [
        "verify", "--model", str(workdir / "net.json"),
        "--property", str(workdir / prop),
        "--quant", "fxp:4.4",
        "--solver-dir", SOLVER_DIR,
        "--out", str(workdir / "out"),
        *extra,
    ]


class TestVerify:
    def test_safe_exit_zero(self, workdir, solver_spec, capsys):
        code = cli.main(_verify_args(workdir, "safe.qnp"))
        assert code == 0
        out = capsys.readouterr().out
        assert "SAFE" in out
        report = (workdir / "out" / "report.jsonl").read_text().strip()
        entry = json.loads(report)
        assert entry["verdict"]["status"] == "SAFE"
        assert set(entry["times"]) >= {"invariants", "encode", "solve"}

    def test_unsafe_exit_ten_with_witness_file(self, workdir, solver_spec):
        code = cli.main(_verify_args(workdir, "unsafe.qnp"))
        assert code == 10
        cex_file = workdir / "out" / "unsafe.counterexample.json"
        assert cex_file.exists()
        cex = json.loads(cex_file.read_text())
        assert cex["violated_assert"] == 0
        assert cex["inputs"][0]["value"] == 0.0
        assert "trace" in cex and len(cex["trace"]) == 1

    def test_no_invariants_same_verdict(self, workdir, solver_spec):
        assert cli.main(_verify_args(workdir, "safe.qnp", "--no-invariants")) == 0
        assert cli.main(_verify_args(workdir, "unsafe.qnp", "--no-invariants")) == 10

    def test_timeout_exit_twenty(self, workdir, solver_spec):
        code = cli.main(_verify_args(workdir, "safe.qnp", "--timeout", "0.001"))
        assert code == 20

    def test_keep_artifacts(self, workdir, solver_spec):
        code = cli.main(_verify_args(workdir, "safe.qnp", "--keep-artifacts"))
        assert code == 0
        assert (workdir / "out" / "safe.smt2").exists()
        assert (workdir / "out" / "safe.stdout.txt").exists()

    def test_multiple_properties_parallel(self, workdir, solver_spec):
        code = cli.main(_verify_args(workdir, "safe.qnp", "--property",
                                     str(workdir / "unsafe.qnp"),
                                     "--parallel", "2"))
        assert code == 10  # UNSAFE dominates
        lines = (workdir / "out" / "report.jsonl").read_text().strip().splitlines()
        statuses = {json.loads(l)["property"]: json.loads(l)["verdict"]["status"]
                    for l in lines}
        assert statuses == {"safe": "SAFE", "unsafe": "UNSAFE"}

    def test_robustness_generated_property(self, workdir, solver_spec, tmp_path):
        m = ModelIR((DenseLayer(np.array([[1.0], [-1.0]]), np.array([0.0, 0.0]),
                                "linear"),))
        model = tmp_path / "two.json"
        model.write_text(to_json(m))
        x0 = tmp_path / "x0.csv"
        x0.write_text("0.5\n")
        code = cli.main([
            "verify", "--model", str(model), "--robustness", str(x0),
            "--radius", "0.125", "--target", "0", "--quant", "fxp:4.4",
            "--solver-dir", SOLVER_DIR, "--out", str(tmp_path / "out"),
        ])
        assert code == 0  # y0 = x > 0.375 > y1 = -x everywhere in the ball

    def test_vacuous_property_is_safe(self, workdir, solver_spec, tmp_path):
        prop = workdir / "vacuous.qnp"
        prop.write_text("assume x[0] >= 1; assume x[0] <= 0; assert y[0] > 99;\n")
        code = cli.main(_verify_args(workdir, "vacuous.qnp"))
        assert code == 0

    def test_float32_lane(self, workdir, solver_spec):
        code = cli.main(_verify_args(workdir, "safe.qnp", "--quant", "float32"))
        assert code == 0


class TestUsageErrors:
    def test_missing_property(self, workdir):
        code = cli.main(["verify", "--model", str(workdir / "net.json"),
                         "--solver-dir", SOLVER_DIR])
        assert code == 1

    def test_missing_model_file(self, workdir):
        code = cli.main(["verify", "--model", str(workdir / "ghost.json"),
                         "--property", str(workdir / "safe.qnp"),
                         "--solver-dir", SOLVER_DIR])
        assert code == 1

    def test_bad_quant_spec(self, workdir):
        code = cli.main(_verify_args(workdir, "safe.qnp", "--quant", "fxp:wat"))
        assert code == 1

    def test_bad_emit_target(self, workdir):
        code = cli.main(_verify_args(workdir, "safe.qnp", "--emit", "pdf"))
        assert code == 1

    def test_unknown_subcommand(self):
        assert cli.main(["frobnicate"]) == 1


class TestEmit:
    def test_emit_writes_smt2_without_solver(self, workdir, monkeypatch):
        # spawning any solver here would be a bug
        def boom(*a, **k):
            raise AssertionError("emit must not touch solvers")

        monkeypatch.setattr(cli, "select_solver", boom)
        code = cli.main([
            "emit", "--model", str(workdir / "net.json"),
            "--property", str(workdir / "safe.qnp"),
            "--quant", "fxp:4.4", "--out", str(workdir / "out"),
            "--emit", "smt2,c,invariants",
        ])
        assert code == 0
        out = workdir / "out"
        assert (out / "safe.smt2").read_text().startswith("(set-logic QF_BV)")
        assert "nondet_float" in (out / "safe.c").read_text()
        assert "__ESBMC_assume" in (out / "safe.invariants.txt").read_text()

    def test_emit_default_smt2(self, workdir, monkeypatch):
        monkeypatch.setattr(cli, "select_solver",
                            lambda rc: pytest.fail("no solver in emit"))
        code = cli.main([
            "emit", "--model", str(workdir / "net.json"),
            "--property", str(workdir / "safe.qnp"),
            "--out", str(workdir / "out2"),
        ])
        assert code == 0
        assert (workdir / "out2" / "safe.smt2").exists()


class TestOracleCommand:
    def test_oracle_agrees_with_verify(self, workdir, solver_spec):
        for prop, expected in (("safe.qnp", 0), ("unsafe.qnp", 10)):
            code = cli.main([
                "oracle", "--model", str(workdir / "net.json"),
                "--property", str(workdir / prop),
                "--quant", "fxp:4.4", "--out", str(workdir / "out_oracle"),
            ])
            assert code == expected

    def test_oracle_grid_limit(self, workdir):
        code = cli.main([
            "oracle", "--model", str(workdir / "net.json"),
            "--property", str(workdir / "safe.qnp"),
            "--quant", "fxp:12.12", "--limit", "100",
            "--out", str(workdir / "out_oracle"),
        ])
        assert code == 1  # refusal surfaces as a config-level error


class TestLutBuild:
    def test_build_and_reimport(self, tmp_path, capsys):
        out = tmp_path / "sigmoid.lut"
        code = cli.main(["lut-build", "--activation", "sigmoid",
                         "--out", str(out)])
        assert code == 0
        assert "1001 samples" in capsys.readouterr().out
        table = import_lut(out.read_text())
        assert table.num_samples == 1001

    def test_custom_domain(self, tmp_path):
        out = tmp_path / "t.lut"
        code = cli.main(["lut-build", "--activation", "tanh", "--domain", "-2", "2",
                         "--epsilon", "0.01", "--out", str(out)])
        assert code == 0
        t = import_lut(out.read_text())
        assert t.domain == (-2.0, 2.0)

    def test_rejects_exact_activation(self, tmp_path):
        code = cli.main(["lut-build", "--activation", "relu",
                         "--out", str(tmp_path / "r.lut")])
        assert code == 1


class TestConfigFile:
    def test_config_provides_defaults_flags_override(self, workdir, solver_spec):
        cfg = workdir / "qnnv.conf"
        cfg.write_text("quant = fxp:2.4\ntimeout = 60\n# comment\n")
        code = cli.main([
            "verify", "--model", str(workdir / "net.json"),
            "--property", str(workdir / "safe.qnp"),
            "--config", str(cfg),
            "--solver-dir", SOLVER_DIR,
            "--out", str(workdir / "out_cfg"),
        ])
        assert code == 0
        entry = json.loads((workdir / "out_cfg" / "report.jsonl").read_text())
        assert entry["quant"] == "fxp:2.4"  # config applied
        code = cli.main(_verify_args(workdir, "safe.qnp", "--config", str(cfg)))
        assert code == 0
        entry = json.loads((workdir / "out" / "report.jsonl").read_text())
        assert entry["quant"] == "fxp:4.4"  # explicit flag wins

    def test_bad_config_key(self, workdir):
        cfg = workdir / "bad.conf"
        cfg.write_text("warp_drive = on\n")
        code = cli.main(_verify_args(workdir, "safe.qnp", "--config", str(cfg)))
        assert code == 1
