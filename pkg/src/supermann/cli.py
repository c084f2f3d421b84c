"""Benchmark command line: build instances, run solves, compare methods,
sweep parameter grids, and export frozen instance data.

Subcommands: run, compare, sweep, export-instance. Every flag is
long-form kebab-case; a JSON config file may supply any flag's value
(command line wins). SUPERMANN_OUTPUT_DIR sets the default output
directory. Exit codes: 0 converged, 1 usage error, 2 not converged.
"""

import argparse
import dataclasses
import itertools
import json
import os
import sys

import numpy as np

from . import problems
from .directions import make_provider
from .engine import SolverConfig, km_solve, supermann_solve, write_summary, write_trace

PROBLEM_BUILDERS = {
    "cones": lambda **kw: problems.build_cones_example(),
    "ball-line": lambda **kw: problems.build_ball_line_example(),
    "soc": lambda **kw: problems.build_soc_example(),
    "lasso": lambda m=150, n=500, nu=1e-2, seed=0, **kw: problems.build_lasso(
        m=m, n=n, nu=nu, seed=seed),
    "cone-program": lambda m=50, n=30, density=0.5, cond=100.0, seed=0, **kw:
        problems.build_cone_program(m=m, n=n, density=density, cond=cond,
                                    seed=seed),
    "masses": lambda K=2, N=10, seed=0, **kw: problems.build_oscillating_masses(
        K=K, N=N, seed=seed),
}

# Builder keyword names each problem actually consumes (for spec export
# and for filtering CLI parameters).
PROBLEM_PARAM_NAMES = {
    "cones": (),
    "ball-line": (),
    "soc": (),
    "lasso": ("m", "n", "nu", "seed"),
    "cone-program": ("m", "n", "density", "cond", "seed"),
    "masses": ("K", "N", "seed"),
}

METHODS = ("km", "supermann")
DIRECTIONS = ("zero", "broyden", "rbroyden")
PRESETS = ("mpc", "scs", "custom")

COMPARE_COLUMNS = ("problem", "method", "direction", "preset", "seed",
                   "status", "iterations", "T_evals", "lin_solves", "L_calls",
                   "matvecs", "final_residual")


class UsageError(Exception):
    pass


@dataclasses.dataclass
class RunSpec:
    problem: str
    params: dict = dataclasses.field(default_factory=dict)
    method: str = "supermann"
    direction: str = "rbroyden"
    preset: str = "mpc"
    overrides: dict = dataclasses.field(default_factory=dict)
    seed: int = 0
    x0: list | None = None

    def __post_init__(self):
        if self.problem not in PROBLEM_BUILDERS:
            raise UsageError(
                f"unknown problem {self.problem!r}; choose from "
                f"{sorted(PROBLEM_BUILDERS)}")
        if self.method not in METHODS:
            raise UsageError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.direction not in DIRECTIONS:
            raise UsageError(
                f"unknown direction {self.direction!r}; choose from {DIRECTIONS}")
        if self.preset not in PRESETS:
            raise UsageError(f"unknown preset {self.preset!r}; choose from {PRESETS}")

    def key(self):
        parts = [self.problem]
        parts += [f"{k}{self.params[k]}" for k in sorted(self.params)]
        parts.append(self.method)
        if self.method == "supermann":
            parts.append(self.direction)
        return "-".join(str(p) for p in parts)


def build_instance(spec):
    params = {k: v for k, v in spec.params.items()
              if k in PROBLEM_PARAM_NAMES[spec.problem]}
    if "seed" in PROBLEM_PARAM_NAMES[spec.problem]:
        params.setdefault("seed", spec.seed)
    return PROBLEM_BUILDERS[spec.problem](**params), params


def build_config(spec, instance):
    if spec.preset == "mpc":
        base = SolverConfig.mpc()
    elif spec.preset == "scs":
        base = SolverConfig.scs()
    else:
        base = SolverConfig()
    merged = dict(instance.recommended)
    merged.update(spec.overrides)
    try:
        return base.replace(**merged)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad solver override: {exc}") from exc


def execute(spec, time_limit_s=300.0, keep_iterates=False):
    """Build and solve one run spec; returns (instance, result, counters)."""
    instance, _ = build_instance(spec)
    cfg = build_config(spec, instance)
    x0 = np.array(spec.x0, dtype=float) if spec.x0 is not None else instance.x0
    instance.reset_counters()
    if spec.method == "km":
        result = km_solve(instance.operator, x0, cfg=cfg,
                          extra_stop=instance.extra_stop,
                          time_limit_s=time_limit_s,
                          keep_iterates=keep_iterates)
    else:
        dirs = make_provider(spec.direction, x0.shape[0],
                             memory=cfg.memory, theta_bar=cfg.theta_bar)
        result = supermann_solve(instance.operator, x0, dirs=dirs, cfg=cfg,
                                 extra_stop=instance.extra_stop,
                                 time_limit_s=time_limit_s,
                                 keep_iterates=keep_iterates)
    return instance, result, instance.counter_values()


def compare_rows(specs, time_limit_s=300.0):
    if not specs:
        raise UsageError("compare needs at least one run spec")
    rows = []
    for spec in specs:
        instance, result, counters = execute(spec, time_limit_s=time_limit_s)
        row = {
            "problem": spec.problem,
            "method": spec.method,
            "direction": spec.direction if spec.method == "supermann" else "",
            "preset": spec.preset,
            "seed": spec.seed,
            "status": result.status,
            "iterations": result.summary["iterations"],
            "T_evals": counters.get("T_evals", result.summary["T_evals"]),
            "lin_solves": counters.get("lin_solves", ""),
            "L_calls": counters.get("L_calls", ""),
            "matvecs": counters.get("matvecs", ""),
            "final_residual": result.summary["final_residual"],
        }
        rows.append(row)
    return rows


def rows_to_csv(rows, columns):
    lines = [",".join(columns)]
    for row in rows:
        out = []
        for col in columns:
            v = row.get(col, "")
            out.append(repr(v) if isinstance(v, float) else str(v))
        lines.append(",".join(out))
    return "\n".join(lines) + "\n"


def sweep_rows(base_spec, grid, seeds, time_limit_s=300.0):
    """Cartesian product of grid values; per cell, run both methods for
    every seed and aggregate avg/max of the work counters."""
    if not grid:
        raise UsageError("sweep needs at least one --grid parameter")
    for name, values in grid.items():
        if not values:
            raise UsageError(f"empty grid for {name}")
    names = sorted(grid)
    agg_fields = ("iterations", "T_evals", "lin_solves", "L_calls", "matvecs")
    rows = []
    for combo in itertools.product(*(grid[n] for n in names)):
        cell = dict(zip(names, combo))
        for method in METHODS:
            samples = []
            for seed in seeds:
                spec = dataclasses.replace(
                    base_spec, method=method, seed=seed,
                    params={**base_spec.params, **cell, "seed": seed})
                _, result, counters = execute(spec, time_limit_s=time_limit_s)
                sample = {"iterations": result.summary["iterations"]}
                sample.update(counters)
                samples.append(sample)
            row = dict(cell)
            row["method"] = method
            row["runs"] = len(samples)
            for field in agg_fields:
                vals = [s[field] for s in samples if field in s]
                if vals:
                    row[f"avg_{field}"] = float(np.mean(vals))
                    row[f"max_{field}"] = max(vals)
                else:
                    row[f"avg_{field}"] = row[f"max_{field}"] = ""
            rows.append(row)
    columns = (*names, "method", "runs")
    for field in agg_fields:
        columns += (f"avg_{field}", f"max_{field}")
    return rows, columns


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors exit 1 (argparse's default of 2 is our NotConverged)
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_spec_args(p):
    p.add_argument("--problem", required=False)
    p.add_argument("--method", default=None, choices=METHODS)
    p.add_argument("--direction", default=None, choices=DIRECTIONS)
    p.add_argument("--preset", default=None, choices=PRESETS)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--density", type=float, default=None)
    p.add_argument("--cond", type=float, default=None)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--x0", type=str, default=None,
                   help="comma-separated starting point override")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE",
                   help="solver config override (repeatable)")
    p.add_argument("--time-limit", type=float, default=None,
                   help="wall-clock limit per solve in seconds (default 300)")
    p.add_argument("--config", type=str, default=None,
                   help="JSON file supplying defaults for any flag")


def _parse_overrides(pairs):
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise UsageError(f"override {pair!r} is not KEY=VALUE")
        key, value = pair.split("=", 1)
        field_types = {f.name: f.type for f in dataclasses.fields(SolverConfig)}
        if key not in field_types:
            raise UsageError(f"unknown solver config field {key!r}")
        if field_types[key] is bool or key == "scale_qk_by_r0":
            out[key] = value.lower() in ("1", "true", "yes")
        elif field_types[key] is int or key in ("memory", "max_backtracks",
                                                "max_iters", "max_T_evals"):
            out[key] = int(value)
        else:
            out[key] = float(value)
    return out


def _merge_config_file(args):
    if not args.config:
        return args
    with open(args.config) as fh:
        defaults = json.load(fh)
    for key, value in defaults.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise UsageError(f"config file sets unknown flag {key!r}")
        if getattr(args, attr) in (None, [], False):
            if attr == "overrides" and isinstance(value, dict):
                value = [f"{k}={v}" for k, v in value.items()]
            setattr(args, attr, value)
    return args


def _spec_from_args(args):
    if not args.problem:
        raise UsageError("--problem is required")
    params = {}
    for name in ("m", "n", "nu", "density", "cond", "K", "N"):
        value = getattr(args, name, None)
        if value is not None:
            params[name] = value
    seed = args.seed if args.seed is not None else 0
    if "seed" in PROBLEM_PARAM_NAMES.get(args.problem, ()):
        params["seed"] = seed
    x0 = None
    if args.x0:
        x0 = [float(v) for v in args.x0.split(",")]
    return RunSpec(
        problem=args.problem,
        params=params,
        method=args.method or "supermann",
        direction=args.direction or "rbroyden",
        preset=args.preset or "mpc",
        overrides=_parse_overrides(args.overrides or []),
        seed=seed,
        x0=x0,
    )


def _out_dir(args):
    d = getattr(args, "out_dir", None) or os.environ.get(
        "SUPERMANN_OUTPUT_DIR") or "."
    os.makedirs(d, exist_ok=True)
    return d


def _cmd_run(args):
    args = _merge_config_file(args)
    spec = _spec_from_args(args)
    limit = args.time_limit if args.time_limit is not None else 300.0
    instance, result, counters = execute(spec, time_limit_s=limit)
    out_dir = _out_dir(args)
    stem = args.tag or spec.key()
    trace_path = os.path.join(out_dir, f"{stem}-trace.csv")
    summary_path = os.path.join(out_dir, f"{stem}-summary.json")
    write_trace(trace_path, result.trace)
    write_summary(summary_path, result.summary)
    if args.traj_csv and instance.name == "masses":
        u = result.x[:instance.data.primal_dim]
        problems.write_trajectory_csv(instance.data, u, args.traj_csv)
    print(f"status: {result.status}"
          + (f" ({result.reason})" if result.reason else ""))
    print(f"iterations: {result.summary['iterations']}  "
          f"T_evals: {result.summary['T_evals']}  "
          f"final_residual: {result.summary['final_residual']:.3e}")
    for name, value in counters.items():
        if name != "T_evals":
            print(f"{name}: {value}")
    if instance.report is not None:
        for key, value in instance.report(result.x).items():
            print(f"{key}: {value}")
    print(f"trace: {trace_path}")
    print(f"summary: {summary_path}")
    return 0 if result.converged else 2


def _cmd_compare(args):
    args = _merge_config_file(args)
    specs = []
    if args.specs:
        with open(args.specs) as fh:
            raw = json.load(fh)
        if not isinstance(raw, list):
            raise UsageError("--specs file must hold a JSON list")
        for entry in raw:
            entry = dict(entry)
            overrides = entry.pop("overrides", {})
            specs.append(RunSpec(overrides=overrides, **entry))
    else:
        base = _spec_from_args(args)
        methods = (args.methods.split(",") if args.methods else list(METHODS))
        for method in methods:
            if method not in METHODS:
                raise UsageError(f"unknown method {method!r} in --methods")
            specs.append(dataclasses.replace(base, method=method))
    limit = args.time_limit if args.time_limit is not None else 300.0
    rows = compare_rows(specs, time_limit_s=limit)
    csv_text = rows_to_csv(rows, COMPARE_COLUMNS)
    out = args.out or os.path.join(_out_dir(args), "comparison.csv")
    with open(out, "w") as fh:
        fh.write(csv_text)
    sys.stdout.write(csv_text)
    print(f"comparison: {out}")
    return 0 if all(r["status"] == "Converged" for r in rows) else 2


def _cmd_sweep(args):
    args = _merge_config_file(args)
    base = _spec_from_args(args)
    grid = {}
    for item in args.grid or []:
        if "=" not in item:
            raise UsageError(f"grid item {item!r} is not NAME=v1,v2,...")
        name, values = item.split("=", 1)
        if name not in ("K", "N", "m", "n"):
            raise UsageError(f"grid over {name!r} is not supported")
        grid[name] = [int(v) for v in values.split(",")]
    seeds = [int(s) for s in (args.seeds.split(",") if args.seeds else ["0"])]
    limit = args.time_limit if args.time_limit is not None else 300.0
    rows, columns = sweep_rows(base, grid, seeds, time_limit_s=limit)
    csv_text = rows_to_csv(rows, columns)
    out = args.out or os.path.join(_out_dir(args), "sweep.csv")
    with open(out, "w") as fh:
        fh.write(csv_text)
    sys.stdout.write(csv_text)
    print(f"sweep: {out}")
    return 0


def _cmd_export_instance(args):
    args = _merge_config_file(args)
    spec = _spec_from_args(args)
    instance, params = build_instance(spec)
    stem = "-".join([spec.problem]
                    + [f"{k}{spec.params[k]}" for k in sorted(spec.params)])
    out = args.out or os.path.join(_out_dir(args), f"{stem}-instance.json")
    problems.export_instance(instance, params, out)
    print(f"instance: {out}")
    return 0


def make_parser():
    parser = Parser(prog="supermann",
                    description="fixed-point solver benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="solve one problem instance")
    _add_spec_args(p_run)
    p_run.add_argument("--out-dir", default=None)
    p_run.add_argument("--tag", default=None, help="output file stem")
    p_run.add_argument("--traj-csv", default=None,
                       help="also write the solved control trajectory here")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run several specs, one row each")
    _add_spec_args(p_cmp)
    p_cmp.add_argument("--specs", default=None,
                       help="JSON file with a list of run specs")
    p_cmp.add_argument("--methods", default=None,
                       help="comma list of methods for the base spec")
    p_cmp.add_argument("--out", default=None)
    p_cmp.add_argument("--out-dir", default=None)
    p_cmp.set_defaults(func=_cmd_compare)

    p_swp = sub.add_parser("sweep", help="grid of instances, avg/max table")
    _add_spec_args(p_swp)
    p_swp.add_argument("--grid", action="append", default=[],
                       metavar="NAME=v1,v2,...")
    p_swp.add_argument("--seeds", default=None, help="comma list of seeds")
    p_swp.add_argument("--out", default=None)
    p_swp.add_argument("--out-dir", default=None)
    p_swp.set_defaults(func=_cmd_sweep)

    p_exp = sub.add_parser("export-instance", help="freeze instance data")
    _add_spec_args(p_exp)
    p_exp.add_argument("--out", default=None)
    p_exp.add_argument("--out-dir", default=None)
    p_exp.set_defaults(func=_cmd_export_instance)

    return parser


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
