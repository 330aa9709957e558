"""External SMT solver processes: discovery, invocation, parallel batches.

Integration is file + process based: write the script, spawn the solver,
parse stdout.  That keeps the driver portable across any SMT-LIB2
conformant solver and immune to API churn.  A sat answer is never trusted
directly: the decoded model is replayed through the quantized interpreter,
and only a replay-validated witness becomes an UNSAFE verdict - a sat that
fails replay is downgraded to SOLVER_ERROR with full diagnostics, because
it would mean an encoder bug and must be loud.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .encoder import SmtScript, decode_model
from .errors import DecodeError, SolverNotFound
from .verdicts import (
    SAFE,
    SOLVER_ERROR,
    TIMEOUT,
    UNKNOWN,
    UNSAFE,
    Verdict,
)

SOLVER_DIR_ENV = "QNNV_SOLVER_DIR"

# Known solvers, in preference order.  args/probe_args use {file} markers.
KNOWN_SOLVERS = {
    "z3": {"args": ("{file}",), "probe_args": ("--version",)},
    "bitwuzla": {"args": ("{file}",), "probe_args": ("--version",)},
    "cvc5": {"args": ("--lang", "smt2", "{file}"), "probe_args": ("--version",)},
    "yices-smt2": {"args": ("{file}",), "probe_args": ("--version",), "dialect": "yices"},
    "boolector": {"args": ("--smt2", "-m", "{file}"), "probe_args": ("--version",)},
    "z3js": {"args": ("{file}",), "probe_args": ("--version",)},
}

_PREFERENCE = ("z3", "bitwuzla", "cvc5", "yices-smt2", "boolector", "z3js")


@dataclass(frozen=True)
class SolverSpec:
    name: str
    path: str
    args: tuple = ("{file}",)
    probe_args: tuple = ("--version",)
    dialect: str = "smtlib"

    def command(self, file: str):
        return [self.path] + [a.replace("{file}", file) for a in self.args]


def probe_solver(spec: SolverSpec, timeout: float = 20.0) -> str:
    """Run the version probe; raises SolverNotFound when unusable."""
    try:
        proc = subprocess.run(
            [spec.path] + list(spec.probe_args),
            capture_output=True, text=True, timeout=timeout,
        )
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise SolverNotFound(f"{spec.name} at {spec.path}: probe failed ({exc})") from None
    out = (proc.stdout + proc.stderr).strip()
    if proc.returncode != 0 and not out:
        raise SolverNotFound(f"{spec.name} at {spec.path}: probe exited {proc.returncode}")
    return out.splitlines()[0] if out else ""


def make_spec(name: str, path: str) -> SolverSpec:
    base = KNOWN_SOLVERS.get(name, {})
    return SolverSpec(
        name=name,
        path=path,
        args=tuple(base.get("args", ("{file}",))),
        probe_args=tuple(base.get("probe_args", ("--version",))),
        dialect=base.get("dialect", "smtlib"),
    )


def discover_solvers(explicit=None, solver_dir=None, search_path=True,
                     extra_dirs=()) -> list:
    """Locate usable solvers: explicit pins, then env dir, PATH, extra dirs.

    ``explicit`` is a mapping name -> executable path (from --solver flags);
    those are returned first and must probe successfully.
    """
    found = []
    seen = set()
    if explicit:
        for name, path in explicit.items():
            spec = make_spec(name, path)
            probe_solver(spec)
            found.append(spec)
            seen.add(name)
    dirs = []
    env_dir = solver_dir or os.environ.get(SOLVER_DIR_ENV)
    if env_dir:
        dirs.append(Path(env_dir))
    dirs.extend(Path(d) for d in extra_dirs)
    for name in _PREFERENCE:
        if name in seen:
            continue
        candidate = None
        for d in dirs:
            p = d / name
            if p.is_file() and os.access(p, os.X_OK):
                candidate = str(p)
                break
        if candidate is None and search_path:
            candidate = shutil.which(name)
        if candidate is None:
            continue
        spec = make_spec(name, candidate)
        try:
            probe_solver(spec)
        except SolverNotFound:
            continue
        found.append(spec)
        seen.add(name)
    return found


def default_solver(**kwargs) -> SolverSpec:
    solvers = discover_solvers(**kwargs)
    if not solvers:
        raise SolverNotFound(
            "no SMT solver found: install z3/bitwuzla/cvc5/yices-smt2, set "
            f"${SOLVER_DIR_ENV}, or pass --solver name=/path"
        )
    return solvers[0]


_SOLVE_MS_MARKER = "qnnv-solve-ms="


def _parse_solver_output(stdout: str):
    """(status_token, model_text, solve_time_s) from raw solver stdout."""
    status = None
    model_lines = []
    solve_time = None
    for line in stdout.splitlines():
        stripped = line.strip()
        if _SOLVE_MS_MARKER in stripped:
            try:
                solve_time = float(stripped.split(_SOLVE_MS_MARKER, 1)[1]) / 1000.0
            except ValueError:
                pass
            continue
        if stripped.startswith(";"):
            continue
        if status is None:
            if stripped in ("sat", "unsat", "unknown"):
                status = stripped
                continue
            if stripped and not stripped.startswith("("):
                # warnings/info lines before the answer; tolerate them
                continue
        if status is not None:
            model_lines.append(line)
    return status, "\n".join(model_lines), solve_time


@dataclass
class BatchAudit:
    """Concurrency bookkeeping filled in by run_batch (used by tests)."""

    peak_live: int = 0
    launched: int = 0
    _live: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def enter(self):
        with self._lock:
            self._live += 1
            self.launched += 1
            self.peak_live = max(self.peak_live, self._live)

    def exit(self):
        with self._lock:
            self._live -= 1


def run_solver(script: SmtScript, spec: SolverSpec, timeout: float,
               keep_artifacts_dir=None, audit: BatchAudit | None = None) -> Verdict:
    """Solve one script: write file, spawn, parse, replay-validate.

    unsat -> SAFE; sat -> UNSAFE only after the decoded witness replays as a
    genuine violation; anything unparseable or invalid -> SOLVER_ERROR.
    """
    start = time.monotonic()
    text = script.to_text()
    tmp_dir = None
    if keep_artifacts_dir is not None:
        tag = getattr(script, "artifact_tag", None) or f"query_{int(start * 1e6)}"
        path = Path(keep_artifacts_dir) / f"{tag}.smt2"
        path.write_text(text)
        file_name = str(path)
    else:
        tmp_dir = tempfile.TemporaryDirectory(prefix="qnnv_")
        file_name = str(Path(tmp_dir.name) / "query.smt2")
        Path(file_name).write_text(text)

    try:
        if audit is not None:
            audit.enter()
        try:
            proc = subprocess.Popen(
                spec.command(file_name),
                stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
            )
            try:
                stdout, stderr = proc.communicate(timeout=timeout)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.communicate()  # reap: no orphan processes on timeout
                return Verdict(TIMEOUT, wall_time=timeout, solver=spec.name)
        except OSError as exc:
            return Verdict(
                SOLVER_ERROR, wall_time=time.monotonic() - start, solver=spec.name,
                diagnostics=f"failed to spawn {spec.path}: {exc}",
            )
        finally:
            if audit is not None:
                audit.exit()
    finally:
        if tmp_dir is not None:
            tmp_dir.cleanup()

    if keep_artifacts_dir is not None:
        base = Path(file_name).with_suffix("")
        Path(f"{base}.stdout.txt").write_text(stdout)
        Path(f"{base}.stderr.txt").write_text(stderr)

    wall = time.monotonic() - start
    status, model_text, solve_time = _parse_solver_output(stdout)
    if status == "unsat":
        return Verdict(SAFE, wall_time=wall, solve_time=solve_time, solver=spec.name)
    if status == "unknown":
        return Verdict(UNKNOWN, wall_time=wall, solve_time=solve_time, solver=spec.name)
    if status == "sat":
        try:
            cex = decode_model(script, model_text)
        except DecodeError as exc:
            return Verdict(
                SOLVER_ERROR, wall_time=wall, solve_time=solve_time, solver=spec.name,
                diagnostics=f"sat model could not be decoded: {exc}\nstderr: {stderr}",
            )
        if not cex.is_valid():
            # replay failed: encoder and interpreter disagree - a bug, be loud
            reason = ("assumes violated" if not cex.assumes_satisfied
                      else "no assert violated on replay")
            return Verdict(
                SOLVER_ERROR, wall_time=wall, solve_time=solve_time, solver=spec.name,
                diagnostics=(
                    f"sat witness failed replay validation ({reason}); "
                    f"inputs={[qi.value for qi in cex.input_values]}"
                ),
            )
        return Verdict(UNSAFE, counterexample=cex, wall_time=wall,
                       solve_time=solve_time, solver=spec.name)
    return Verdict(
        SOLVER_ERROR, wall_time=wall, solver=spec.name,
        diagnostics=(
            f"no sat/unsat/unknown in solver output (exit {proc.returncode}).\n"
            f"stdout: {stdout[:2000]}\nstderr: {stderr[:2000]}"
        ),
    )


def run_batch(jobs, parallelism: int, audit: BatchAudit | None = None,
              keep_artifacts_dir=None) -> list:
    """Run (script, spec, timeout) jobs with a bounded worker pool.

    Results come back in job order regardless of completion order, and one
    job's failure never aborts the batch (it just becomes its verdict).
    """
    if parallelism < 1:
        raise ValueError(f"parallelism must be >= 1, got {parallelism}")
    jobs = list(jobs)
    if audit is None:
        audit = BatchAudit()
    results = [None] * len(jobs)

    def work(index):
        script, spec, timeout = jobs[index]
        try:
            return index, run_solver(script, spec, timeout,
                                     keep_artifacts_dir=keep_artifacts_dir,
                                     audit=audit)
        except Exception as exc:  # isolate: a driver bug on one job
            return index, Verdict(SOLVER_ERROR, solver=spec.name,
                                  diagnostics=f"driver exception: {exc!r}")

    if parallelism == 1:
        for i in range(len(jobs)):
            idx, verdict = work(i)
            results[idx] = verdict
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            for idx, verdict in pool.map(work, range(len(jobs))):
                results[idx] = verdict
    return results
