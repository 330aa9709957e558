"""Pipeline orchestration and the ``qnnv`` command line.

Workflow per property: load model -> load/generate property -> infer
interval invariants (unless --no-invariants) -> encode (fixed point or
float32) -> dispatch solver batch -> report.  Exit codes are a stable
contract for CI: 0 all SAFE, 10 any UNSAFE, 20 any UNKNOWN/TIMEOUT,
1 usage or config error, 2 internal/solver error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import lut as lut_mod
from .encoder import emit_c, encode_fxp, encode_float
from .errors import QnnvError, UsageError, VacuousPropertyError
from .fixedpoint import FxpConfig, parse_quant_spec
from .interval import Interval, format_invariant_report, infer_invariants
from .model import apply_input_normalization, parse_json_model, parse_nnet
from .oracle import DEFAULT_GRID_LIMIT, brute_force_verify
from .properties import extract_box, parse_property, robustness_property
from .solver import (
    SOLVER_DIR_ENV,
    BatchAudit,
    default_solver,
    discover_solvers,
    make_spec,
    probe_solver,
    run_batch,
)
from .verdicts import SAFE, SOLVER_ERROR, TIMEOUT, UNKNOWN, UNSAFE, Verdict

EXIT_SAFE = 0
EXIT_UNSAFE = 10
EXIT_INCONCLUSIVE = 20
EXIT_USAGE = 1
EXIT_INTERNAL = 2

_FLOAT32_MAX = float(np.finfo(np.float32).max)
_FLOAT32_SLACK = 1e-6


@dataclass
class RunConfig:
    model_path: str
    model_format: str | None = None  # nnet | json | None (by extension)
    property_paths: list = field(default_factory=list)
    robustness_input: str | None = None
    robustness_radius: float = 0.0
    robustness_target: int | None = None
    quant_spec: str = "fxp:4.4"
    solvers: dict = field(default_factory=dict)  # name -> path (explicit)
    solver_dir: str | None = None
    timeout: float = 300.0
    parallelism: int = 1
    emit: set = field(default_factory=set)  # subset of {smt2, c, invariants}
    out_dir: str = "qnnv_out"
    no_invariants: bool = False
    keep_artifacts: bool = False
    apply_normalization: bool = False
    lut_epsilon: float = lut_mod.DEFAULT_EPSILON
    grid_limit: int = DEFAULT_GRID_LIMIT
    solve: bool = True  # False for `qnnv emit`

    def validate(self):
        if not self.model_path:
            raise UsageError("exactly one model source is required")
        has_prop = bool(self.property_paths)
        has_rob = self.robustness_input is not None
        if not has_prop and not has_rob:
            raise UsageError("at least one property is required "
                             "(--property or --robustness)")
        if has_rob and self.robustness_target is None:
            raise UsageError("--robustness requires --target")
        parse_quant_spec(self.quant_spec)  # raises on malformed spec
        if self.parallelism < 1:
            raise UsageError("--parallel must be >= 1")


@dataclass
class Report:
    model_path: str
    quant_spec: str
    parse_time: float
    entries: list = field(default_factory=list)  # dict per property

    def any_status(self, *statuses) -> bool:
        return any(e["verdict"]["status"] in statuses for e in self.entries)

    def exit_code(self) -> int:
        if self.any_status(UNSAFE):
            return EXIT_UNSAFE
        if self.any_status(SOLVER_ERROR):
            return EXIT_INTERNAL
        if self.any_status(TIMEOUT, UNKNOWN):
            return EXIT_INCONCLUSIVE
        return EXIT_SAFE

    def to_jsonl(self) -> str:
        lines = []
        for e in self.entries:
            record = dict(e)
            record["model"] = self.model_path
            record["quant"] = self.quant_spec
            record["parse_time"] = self.parse_time
            lines.append(json.dumps(record))
        return "\n".join(lines) + "\n"

    def human_table(self) -> str:
        header = f"{'property':<28} {'status':<12} {'solver':<10} " \
                 f"{'solve_s':>9} {'total_s':>9}"
        rows = [header, "-" * len(header)]
        for e in self.entries:
            v = e["verdict"]
            solve = v.get("solve_time")
            solve_text = f"{solve:9.3f}" if solve is not None else f"{v['wall_time']:9.3f}"
            total = sum(e["times"].values())
            rows.append(
                f"{e['property'][:28]:<28} {v['status']:<12} "
                f"{v.get('solver', ''):<10} {solve_text} {total:9.3f}"
            )
        return "\n".join(rows)


def load_model(rc: RunConfig):
    path = Path(rc.model_path)
    if not path.is_file():
        raise UsageError(f"model file not found: {path}")
    fmt = rc.model_format
    if fmt is None:
        fmt = "nnet" if path.suffix.lower() == ".nnet" else "json"
    text = path.read_text()
    model = parse_nnet(text) if fmt == "nnet" else parse_json_model(text)
    if rc.apply_normalization:
        model = apply_input_normalization(model)
    return model


def load_properties(rc: RunConfig, model):
    props = []
    for p in rc.property_paths:
        path = Path(p)
        if not path.is_file():
            raise UsageError(f"property file not found: {path}")
        props.append(parse_property(path.read_text(), model.input_dim,
                                    model.output_dim, name=path.stem))
    if rc.robustness_input is not None:
        path = Path(rc.robustness_input)
        if not path.is_file():
            raise UsageError(f"robustness input file not found: {path}")
        row = [float(t) for t in path.read_text().replace(",", " ").split()]
        if len(row) != model.input_dim:
            raise UsageError(
                f"robustness input has {len(row)} values, model expects "
                f"{model.input_dim}"
            )
        props.append(robustness_property(row, rc.robustness_radius,
                                         rc.robustness_target, model.output_dim))
    return props


def _quant_objects(rc: RunConfig):
    quant = parse_quant_spec(rc.quant_spec)
    if quant == "float32":
        return quant, Interval(-_FLOAT32_MAX, _FLOAT32_MAX), _FLOAT32_SLACK
    return quant, Interval(quant.value_min, quant.value_max), quant.quantum


def run_pipeline(rc: RunConfig) -> Report:
    rc.validate()
    out_dir = Path(rc.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    t0 = time.monotonic()
    model = load_model(rc)
    props = load_properties(rc, model)
    quant, quant_range, quantum = _quant_objects(rc)
    cfg = quant if isinstance(quant, FxpConfig) else None
    luts = lut_mod.tables_for_model(model, rc.lut_epsilon)
    parse_time = time.monotonic() - t0

    spec = select_solver(rc) if rc.solve else None

    report = Report(rc.model_path, rc.quant_spec, parse_time)
    jobs = []
    job_meta = []  # (entry_index,)
    for prop in props:
        entry = {"property": prop.name, "times": {}, "artifacts": {},
                 "invariants": None}
        report.entries.append(entry)
        times = entry["times"]

        t = time.monotonic()
        vacuous = False
        invariants = None
        try:
            box = extract_box(prop, model.input_dim, quant_range)
            if not rc.no_invariants:
                invariants = infer_invariants(model, box, luts, quantum, cfg)
        except VacuousPropertyError as exc:
            vacuous = True
            entry["verdict"] = Verdict(
                SAFE, solver="vacuity",
                diagnostics=f"vacuous property: {exc}").to_dict()
        times["invariants"] = time.monotonic() - t

        if invariants is not None:
            entry["invariants"] = {
                "mean_post_width": invariants.mean_width(),
                "constraints": len(format_invariant_report(invariants).splitlines()),
            }
            if "invariants" in rc.emit:
                path = out_dir / f"{prop.name}.invariants.txt"
                path.write_text(format_invariant_report(invariants))
                entry["artifacts"]["invariants"] = str(path)

        if vacuous:
            times["encode"] = 0.0
            times["solve"] = 0.0
            continue

        t = time.monotonic()
        if cfg is not None:
            script = encode_fxp(model, cfg, luts, prop, invariants)
        else:
            script = encode_float(model, luts, prop, invariants)
        script.artifact_tag = prop.name
        times["encode"] = time.monotonic() - t

        if "smt2" in rc.emit:
            path = out_dir / f"{prop.name}.smt2"
            path.write_text(script.to_text())
            entry["artifacts"]["smt2"] = str(path)
        if "c" in rc.emit:
            path = out_dir / f"{prop.name}.c"
            path.write_text(emit_c(model, quant, prop, invariants))
            entry["artifacts"]["c"] = str(path)

        if rc.solve:
            jobs.append((script, spec, rc.timeout))
            job_meta.append(len(report.entries) - 1)
        else:
            entry["verdict"] = {"status": "NOT_RUN", "wall_time": 0.0,
                                "solve_time": None, "solver": ""}
            times["solve"] = 0.0

    if jobs:
        artifacts_dir = out_dir if rc.keep_artifacts else None
        verdicts = run_batch(jobs, rc.parallelism, BatchAudit(),
                             keep_artifacts_dir=artifacts_dir)
        for idx, verdict in zip(job_meta, verdicts):
            entry = report.entries[idx]
            entry["verdict"] = verdict.to_dict()
            entry["times"]["solve"] = verdict.wall_time
            if verdict.counterexample is not None:
                cex_path = out_dir / f"{entry['property']}.counterexample.json"
                cex_path.write_text(json.dumps(verdict.to_dict()["counterexample"],
                                               indent=1))
                entry["artifacts"]["counterexample"] = str(cex_path)

    (out_dir / "report.jsonl").write_text(report.to_jsonl())
    return report


def select_solver(rc: RunConfig):
    """First usable solver: explicit pins win, then env dir/PATH discovery."""
    if rc.solvers:
        for name, path in rc.solvers.items():
            if path:
                spec = make_spec(name, path)
                probe_solver(spec)
                return spec
            found = discover_solvers(solver_dir=rc.solver_dir,
                                     extra_dirs=_default_solver_dirs())
            for spec in found:
                if spec.name == name:
                    return spec
            raise UsageError(f"solver {name!r} not found")
    return default_solver(solver_dir=rc.solver_dir, extra_dirs=_default_solver_dirs())


def run_oracle(rc: RunConfig) -> Report:
    rc.validate()
    out_dir = Path(rc.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.monotonic()
    model = load_model(rc)
    props = load_properties(rc, model)
    quant, _range, _quantum = _quant_objects(rc)
    luts = lut_mod.tables_for_model(model, rc.lut_epsilon)
    parse_time = time.monotonic() - t0

    report = Report(rc.model_path, rc.quant_spec, parse_time)
    for prop in props:
        entry = {"property": prop.name, "times": {}, "artifacts": {},
                 "invariants": None}
        t = time.monotonic()
        verdict = brute_force_verify(model, quant, luts, prop, rc.grid_limit)
        entry["times"] = {"invariants": 0.0, "encode": 0.0,
                          "solve": time.monotonic() - t}
        entry["verdict"] = verdict.to_dict()
        if verdict.counterexample is not None:
            cex_path = out_dir / f"{prop.name}.counterexample.json"
            cex_path.write_text(json.dumps(verdict.to_dict()["counterexample"],
                                           indent=1))
            entry["artifacts"]["counterexample"] = str(cex_path)
        report.entries.append(entry)
    (out_dir / "report.jsonl").write_text(report.to_jsonl())
    return report


def _default_solver_dirs():
    dirs = []
    here = Path(__file__).resolve()
    for base in (Path.cwd(), here.parents[2] if len(here.parents) > 2 else None):
        if base is None:
            continue
        candidate = base / "solvers" / "z3js"
        if candidate.is_dir():
            dirs.append(str(candidate))
    return tuple(dirs)


def _read_config_file(path: str) -> dict:
    """Flat key = value file; '#' comments. Flags override these values."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


# config-file keys: (argparse attribute, cast, built-in default); flags are
# parsed with a None sentinel so an explicit flag always wins over config
_CONFIG_KEYS = {
    "quant": ("quant", str, "fxp:4.4"),
    "timeout": ("timeout", float, 300.0),
    "parallel": ("parallel", int, 1),
    "solver_dir": ("solver_dir", str, None),
    "out": ("out", str, "qnnv_out"),
    "lut_epsilon": ("lut_epsilon", float, lut_mod.DEFAULT_EPSILON),
}


def _apply_config_file(args):
    """Precedence: explicit flag > config file > built-in default."""
    values = {}
    if getattr(args, "config", None):
        values = _read_config_file(args.config)
    for key, value in values.items():
        if key.startswith("solver."):
            args.solver = list(getattr(args, "solver", []) or [])
            args.solver.insert(0, f"{key.split('.', 1)[1]}={value}")
        elif key not in _CONFIG_KEYS:
            raise UsageError(f"unknown config key {key!r}")
    for key, (target, cast, default) in _CONFIG_KEYS.items():
        if getattr(args, target, None) is None:
            raw = values.get(key)
            setattr(args, target, cast(raw) if raw is not None else default)


def _common_model_args(sub):
    sub.add_argument("--model", required=True, help="model file (.nnet or .json)")
    sub.add_argument("--model-format", choices=("nnet", "json"), default=None)
    sub.add_argument("--property", action="append", default=[],
                     help="property DSL file (repeatable)")
    sub.add_argument("--robustness", default=None, metavar="CSV",
                     help="reference input for a generated robustness property")
    sub.add_argument("--radius", type=float, default=0.0)
    sub.add_argument("--target", type=int, default=None)
    sub.add_argument("--quant", default=None,
                     help="fxp:<I>.<F>[:wrap|sat][:rne|tn] or float32")
    sub.add_argument("--lut-epsilon", type=float, default=None)
    sub.add_argument("--apply-normalization", action="store_true",
                     help="fold NNET normalization constants into layer 1")
    sub.add_argument("--out", default=None)
    sub.add_argument("--config", default=None, help="key = value config file")


def _solver_args(sub):
    sub.add_argument("--solver", action="append", default=[],
                     help="name or name=/path (first usable wins)")
    sub.add_argument("--solver-dir", default=None,
                     help=f"directory to search (also ${SOLVER_DIR_ENV})")
    sub.add_argument("--timeout", type=float, default=None)
    sub.add_argument("--parallel", type=int, default=None)
    sub.add_argument("--no-invariants", action="store_true")
    sub.add_argument("--keep-artifacts", action="store_true")
    sub.add_argument("--emit", default="",
                     help="comma list of smt2,c,invariants to write to --out")


def _rc_from_args(args, solve=True) -> RunConfig:
    solvers = {}
    for item in getattr(args, "solver", []) or []:
        if "=" in item:
            name, _, path = item.partition("=")
            solvers[name] = path
        else:
            solvers[item] = None
    emit = {e for e in (getattr(args, "emit", "") or "").split(",") if e}
    bad = emit - {"smt2", "c", "invariants"}
    if bad:
        raise UsageError(f"unknown --emit targets: {sorted(bad)}")
    return RunConfig(
        model_path=args.model,
        model_format=args.model_format,
        property_paths=list(args.property),
        robustness_input=args.robustness,
        robustness_radius=args.radius,
        robustness_target=args.target,
        quant_spec=args.quant,
        solvers=solvers,
        solver_dir=getattr(args, "solver_dir", None),
        timeout=getattr(args, "timeout", 300.0),
        parallelism=getattr(args, "parallel", 1),
        emit=emit,
        out_dir=args.out,
        no_invariants=getattr(args, "no_invariants", False),
        keep_artifacts=getattr(args, "keep_artifacts", False),
        apply_normalization=args.apply_normalization,
        lut_epsilon=args.lut_epsilon,
        grid_limit=getattr(args, "limit", DEFAULT_GRID_LIMIT),
        solve=solve,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qnnv",
        description="SMT-based verification of quantized feedforward networks",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    verify = subs.add_parser("verify", help="full pipeline: encode and solve")
    _common_model_args(verify)
    _solver_args(verify)

    oracle = subs.add_parser("oracle", help="brute-force ground truth")
    _common_model_args(oracle)
    oracle.add_argument("--limit", type=int, default=DEFAULT_GRID_LIMIT,
                        help="refuse grids above this many points")

    emit = subs.add_parser("emit", help="encode only; write artifacts, no solving")
    _common_model_args(emit)
    emit.add_argument("--emit", default="smt2",
                      help="comma list of smt2,c,invariants (default smt2)")
    emit.add_argument("--no-invariants", action="store_true")

    lut_build = subs.add_parser("lut-build", help="build and export an AF table")
    lut_build.add_argument("--activation", required=True)
    lut_build.add_argument("--epsilon", type=float, default=lut_mod.DEFAULT_EPSILON)
    lut_build.add_argument("--domain", type=float, nargs=2, default=None)
    lut_build.add_argument("--lipschitz", type=float, default=None)
    lut_build.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        if args.command == "lut-build":
            table = lut_mod.build_lut(args.activation,
                                      domain=tuple(args.domain) if args.domain else None,
                                      lipschitz=args.lipschitz,
                                      epsilon=args.epsilon)
            Path(args.out).write_text(lut_mod.export_lut(table))
            audit = table.audit
            print(f"{args.activation}: {table.num_samples} samples, "
                  f"audited max error {audit.max_error:.3e} over {audit.points} points")
            return EXIT_SAFE

        _apply_config_file(args)
        if args.command == "verify":
            report = run_pipeline(_rc_from_args(args, solve=True))
        elif args.command == "emit":
            args.solver = []
            report = run_pipeline(_rc_from_args(args, solve=False))
        else:
            report = run_oracle(_rc_from_args(args))
        print(report.human_table())
        print(f"report: {Path(args.out) / 'report.jsonl'}")
        if args.command == "emit":
            return EXIT_SAFE
        return report.exit_code()
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QnnvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # internal failure: distinct code, loud
        import traceback

        traceback.print_exc()
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
