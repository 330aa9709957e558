import os
import stat
import time

import numpy as np
import pytest

from qnnv.encoder import encode_fxp
from qnnv.errors import SolverNotFound
from qnnv.fixedpoint import FxpConfig
from qnnv.model import DenseLayer, ModelIR
from qnnv.properties import parse_property
from qnnv.solver import (
    BatchAudit,
    SolverSpec,
    discover_solvers,
    make_spec,
    probe_solver,
    run_batch,
    run_solver,
)

Q44 = FxpConfig(4, 4)


def _net():
    return ModelIR((DenseLayer(np.array([[1.0]]), np.array([0.0]), "relu"),))


def _script(std_luts, text="assume x[0] >= 0; assume x[0] <= 1; assert y[0] >= 0;"):
    return encode_fxp(_net(), Q44, std_luts, parse_property(text))


def _fake_solver(tmp_path, name, body):
    path = tmp_path / name
    path.write_text("#!/bin/sh\n" + body + "\n")
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return SolverSpec(name=name, path=str(path), args=("{file}",))


class TestProbe:
    def test_probe_real_solver(self, solver_spec):
        version = probe_solver(solver_spec)
        assert version  # any non-empty first line

    def test_probe_missing_executable(self):
        spec = make_spec("z3", "/nonexistent/z3")
        with pytest.raises(SolverNotFound):
            probe_solver(spec)

    def test_discovery_returns_probed_specs(self, solver_spec):
        found = discover_solvers(extra_dirs=(os.path.dirname(solver_spec.path),))
        assert any(s.name == solver_spec.name for s in found)


class TestRunSolver:
    def test_unsat_is_safe(self, std_luts, solver_spec):
        v = run_solver(_script(std_luts), solver_spec, 120)
        assert v.status == "SAFE" and v.counterexample is None
        assert v.wall_time > 0

    def test_sat_is_validated_unsafe(self, std_luts, solver_spec):
        script = _script(std_luts,
                         "assume x[0] >= 0; assume x[0] <= 1; assert y[0] > 0.5;")
        v = run_solver(script, solver_spec, 120)
        assert v.status == "UNSAFE"
        cex = v.counterexample
        assert cex.is_valid() and cex.violated_assert == 0

    def test_forced_timeout(self, std_luts, solver_spec):
        v = run_solver(_script(std_luts), solver_spec, 0.001)
        assert v.status == "TIMEOUT"
        assert v.wall_time == pytest.approx(0.001, abs=0.01)

    def test_spawn_failure_is_solver_error(self, std_luts):
        spec = SolverSpec(name="ghost", path="/nonexistent/solver")
        v = run_solver(_script(std_luts), spec, 10)
        assert v.status == "SOLVER_ERROR"
        assert "spawn" in v.diagnostics

    def test_garbage_output_is_solver_error(self, std_luts, tmp_path):
        spec = _fake_solver(tmp_path, "garbage", "echo 'segmentation fault'")
        v = run_solver(_script(std_luts), spec, 10)
        assert v.status == "SOLVER_ERROR"
        assert "no sat/unsat" in v.diagnostics

    def test_undecodable_model_is_solver_error(self, std_luts, tmp_path):
        spec = _fake_solver(tmp_path, "liar", "echo sat; echo '((= wrong 1))'")
        v = run_solver(_script(std_luts), spec, 10)
        assert v.status == "SOLVER_ERROR"
        assert "decoded" in v.diagnostics

    def test_invalid_witness_downgraded_loudly(self, std_luts, tmp_path):
        # fake solver answers sat with an input that satisfies the property:
        # replay validation must refuse to report UNSAFE
        spec = _fake_solver(
            tmp_path, "wrongmodel",
            "echo sat; echo '((define-fun in_0 () (_ BitVec 9) #b000010000))'")
        script = _script(std_luts,
                         "assume x[0] >= 0; assume x[0] <= 1; assert y[0] >= 0;")
        v = run_solver(script, spec, 10)
        assert v.status == "SOLVER_ERROR"
        assert "replay" in v.diagnostics

    def test_assume_violating_witness_downgraded(self, std_luts, tmp_path):
        spec = _fake_solver(
            tmp_path, "outofbox",
            "echo sat; echo '((define-fun in_0 () (_ BitVec 9) #b111000000))'")
        script = _script(std_luts,
                         "assume x[0] >= 0; assume x[0] <= 1; assert y[0] >= 0;")
        v = run_solver(script, spec, 10)
        assert v.status == "SOLVER_ERROR"
        assert "assumes violated" in v.diagnostics

    def test_keep_artifacts(self, std_luts, solver_spec, tmp_path):
        script = _script(std_luts)
        script.artifact_tag = "kept"
        v = run_solver(script, solver_spec, 120, keep_artifacts_dir=tmp_path)
        assert v.status == "SAFE"
        assert (tmp_path / "kept.smt2").exists()
        assert "unsat" in (tmp_path / "kept.stdout.txt").read_text()


class TestRunBatch:
    def test_identical_jobs_bounded_concurrency(self, std_luts, solver_spec):
        script = _script(std_luts)
        audit = BatchAudit()
        verdicts = run_batch([(script, solver_spec, 120)] * 8, parallelism=4,
                             audit=audit)
        assert [v.status for v in verdicts] == ["SAFE"] * 8
        assert audit.launched == 8
        assert audit.peak_live <= 4

    def test_parallel_equals_sequential(self, std_luts, solver_spec):
        scripts = [
            _script(std_luts, "assume x[0] >= 0; assume x[0] <= 1; assert y[0] >= 0;"),
            _script(std_luts, "assume x[0] >= 0; assume x[0] <= 1; assert y[0] > 0.5;"),
            _script(std_luts, "assert y[0] >= 0;"),
            _script(std_luts, "assume x[0] >= 0.5; assert y[0] > 0.25;"),
        ]
        jobs = [(s, solver_spec, 120) for s in scripts]
        seq = [v.status for v in run_batch(jobs, parallelism=1)]
        par = [v.status for v in run_batch(jobs, parallelism=3)]
        assert seq == par
        assert seq == ["SAFE", "UNSAFE", "SAFE", "SAFE"]

    def test_one_failure_does_not_abort_batch(self, std_luts, solver_spec):
        ghost = SolverSpec(name="ghost", path="/nonexistent/solver")
        jobs = [
            (_script(std_luts), solver_spec, 120),
            (_script(std_luts), ghost, 120),
            (_script(std_luts), solver_spec, 120),
        ]
        verdicts = run_batch(jobs, parallelism=2)
        assert [v.status for v in verdicts] == ["SAFE", "SOLVER_ERROR", "SAFE"]

    def test_results_in_job_order(self, std_luts, solver_spec, tmp_path):
        # a deliberately slow fake solver for job 0; faster real ones after
        slow = _fake_solver(tmp_path, "slow", "sleep 2; echo unsat")
        jobs = [
            (_script(std_luts), slow, 120),
            (_script(std_luts,
                     "assume x[0] >= 0; assume x[0] <= 1; assert y[0] > 0.5;"),
             solver_spec, 120),
        ]
        verdicts = run_batch(jobs, parallelism=2)
        assert verdicts[0].status == "SAFE" and verdicts[0].solver == "slow"
        assert verdicts[1].status == "UNSAFE"

    def test_timeouts_reap_processes(self, std_luts, solver_spec):
        psutil = pytest.importorskip("psutil")
        me = psutil.Process()
        before = {c.pid for c in me.children(recursive=True)}
        jobs = [(_script(std_luts), solver_spec, 0.05)] * 4
        verdicts = run_batch(jobs, parallelism=4)
        assert all(v.status == "TIMEOUT" for v in verdicts)
        time.sleep(0.2)
        after = {c.pid for c in me.children(recursive=True)}
        leaked = [p for p in after - before
                  if psutil.pid_exists(p)
                  and psutil.Process(p).status() != psutil.STATUS_ZOMBIE]
        assert leaked == []

    def test_bad_parallelism(self, std_luts, solver_spec):
        with pytest.raises(ValueError):
            run_batch([], parallelism=0)
