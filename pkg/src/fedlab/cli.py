"""Config-driven command line front end.

``fedlab run --config exp.json`` executes every configured method for the
requested number of seeds, writes one trace CSV per (method, seed), a
``summary.csv``, and two SVG convergence plots (vs communication rounds
and vs gradient evaluations).  ``fedlab delta --config exp.json`` reports
the Hessian-dissimilarity constants of the configured problem.

Exit codes: 0 success, 1 runtime failure, 2 configuration problem.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import jsonschema
import numpy as np

from .core import ConfigurationError, RandomStream
from .harness import (
    Budget,
    grad_evals_to_target,
    reference_optimum,
    rounds_to_target,
    run_experiment,
    write_trace_csv,
)
from .local_solvers import LocalSpec, StoppingRule, UnsupportedStructureError
from .methods import METHODS, MethodConfig, suggest_parameters
from .problems import (
    ParseError,
    QuadraticClientSpec,
    QuadraticFamily,
    build_quadratic_problem,
    delta_exact_quadratic,
    delta_sampled,
    dirichlet_partition,
    gen_quadratic_problem,
    load_libsvm,
    logistic_problem,
)
from .svgplot import render_line_plot, write_svg

_QUADRATIC_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "n_clients", "m_components", "dim", "max_norm", "min_eig"],
    "properties": {
        "kind": {"const": "quadratic"},
        "seed": {"type": "integer", "minimum": 0},
        "n_clients": {"type": "integer", "minimum": 1},
        "m_components": {"type": "integer", "minimum": 1},
        "dim": {"type": "integer", "minimum": 3},
        "max_norm": {"type": "number", "exclusiveMinimum": 0},
        "min_eig": {"type": "number"},
        "target_delta": {"type": "number", "minimum": 0},
        "beta": {"type": "number", "minimum": 0},
    },
}

_EXPLICIT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "matrices"],
    "properties": {
        "kind": {"const": "quadratic_explicit"},
        "matrices": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"}},
                },
            },
        },
        "centers": {"type": "array"},
        "beta": {"type": "number", "minimum": 0},
    },
}

_LOGISTIC_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "path", "n_clients", "alpha"],
    "properties": {
        "kind": {"const": "logistic"},
        "path": {"type": "string"},
        "n_clients": {"type": "integer", "minimum": 1},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "batch_size": {"type": ["integer", "null"], "minimum": 1},
    },
}

_LOCAL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "solver": {"enum": ["exact", "gd", "fgd"]},
        "kind": {"enum": ["abs_grad", "rel_grad", "fixed_steps", "exact"]},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "steps": {"type": "integer", "minimum": 0},
        "max_steps": {"type": "integer", "minimum": 1},
        "schedule": {"type": "boolean"},
        "check_decrease": {"type": "boolean"},
        "step": {"type": "number", "exclusiveMinimum": 0},
    },
}

_METHOD_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name"],
    "properties": {
        "name": {"enum": list(METHODS)},
        "label": {"type": "string", "minLength": 1},
        "auto": {"enum": ["sc", "cvx", "ncvx"]},
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lam": {"type": "number", "minimum": 0},
                "eta": {"type": "number", "minimum": 0},
                "p": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "mu": {"type": "number", "minimum": 0},
                "a": {"type": "number", "exclusiveMinimum": 1},
                "averaging": {"enum": ["avg", "rand"]},
                "control_variate": {"enum": ["grad_diff", "recursive"]},
                "cv_strength": {"type": "number", "minimum": 0},
                "q_weighting": {"type": "boolean"},
                "stochastic": {"type": "boolean"},
                "local_steps": {"type": "integer", "minimum": 1},
            },
        },
        "local": _LOCAL_SCHEMA,
    },
}

_CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["problem"],
    "properties": {
        "problem": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["quadratic", "quadratic_explicit", "logistic"]}
            },
        },
        "methods": {"type": "array", "minItems": 1, "items": _METHOD_SCHEMA},
        "budget": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_rounds": {"type": "integer", "minimum": 1},
                "max_grad_evals": {"type": "number", "exclusiveMinimum": 0},
                "target_gap": {"type": "number", "exclusiveMinimum": 0},
                "max_iterations": {"type": "integer", "minimum": 1},
            },
        },
        "output_dir": {"type": "string", "minLength": 1},
        "repeats": {"type": "integer", "minimum": 1},
        "record_every": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
    },
}

_PROBLEM_SCHEMAS = {
    "quadratic": _QUADRATIC_SCHEMA,
    "quadratic_explicit": _EXPLICIT_SCHEMA,
    "logistic": _LOGISTIC_SCHEMA,
}


class ConfigError(Exception):
    """Anything wrong with the config file; maps to exit code 2."""


def _schema_errors(instance, schema, where: str) -> list[str]:
    validator = jsonschema.Draft202012Validator(schema)
    msgs = []
    for err in sorted(validator.iter_errors(instance), key=lambda e: list(e.path)):
        path = "/".join(str(p) for p in err.path) or "(top level)"
        msgs.append(f"{where}: {path}: {err.message}")
    return msgs


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config is not valid JSON (line {exc.lineno}, column {exc.colno}): "
            f"{exc.msg}"
        ) from exc
    errors = _schema_errors(cfg, _CONFIG_SCHEMA, "config")
    if not errors:
        kind = cfg["problem"]["kind"]
        errors = _schema_errors(cfg["problem"], _PROBLEM_SCHEMAS[kind], "problem")
    for entry in cfg.get("methods", []) if not errors else []:
        if "auto" in entry and "params" in entry:
            errors.append(
                f"method {entry.get('name')}: give either auto or params, not both"
            )
    if errors:
        raise ConfigError("\n".join(errors))
    return cfg


def build_problem(pcfg: dict, base_dir: str = "."):
    """Instantiate the configured problem; returns (problem, delta_source).

    Dataset paths are resolved relative to ``base_dir`` (the config file's
    directory) unless absolute.
    """
    kind = pcfg["kind"]
    if kind == "quadratic":
        problem, report = gen_quadratic_problem(
            pcfg.get("seed", 0),
            pcfg["n_clients"],
            pcfg["m_components"],
            pcfg["dim"],
            max_norm=pcfg["max_norm"],
            min_eig=pcfg["min_eig"],
            target_delta=pcfg.get("target_delta", 0.0),
            beta=pcfg.get("beta", 0.0),
        )
        return problem, report
    if kind == "quadratic_explicit":
        matrices = np.asarray(pcfg["matrices"], dtype=np.float64)
        if matrices.ndim != 4:
            raise ConfigError(
                "matrices must be nested as clients x components x d x d"
            )
        centers = (
            np.asarray(pcfg["centers"], dtype=np.float64)
            if "centers" in pcfg
            else np.zeros(matrices.shape[:3])
        )
        specs = [
            QuadraticClientSpec(
                centers=centers[i],
                matrices=matrices[i],
                beta=pcfg.get("beta", 0.0),
            )
            for i in range(matrices.shape[0])
        ]
        family = QuadraticFamily(specs=specs)
        return build_quadratic_problem(family), None
    path = pcfg["path"]
    if not os.path.isabs(path):
        path = os.path.join(base_dir, path)
    dataset = load_libsvm(path)
    parts = dirichlet_partition(
        dataset,
        pcfg["n_clients"],
        pcfg["alpha"],
        RandomStream(pcfg.get("seed", 0)).fork(1),
    )
    problem = logistic_problem(parts, pcfg.get("batch_size"))
    return problem, None


def _build_local(spec: dict | None) -> LocalSpec:
    if not spec:
        return LocalSpec()
    rule_kind = spec.get("kind", "abs_grad")
    rule = StoppingRule(
        rule_kind,
        tol=spec.get("tol", 1e-9 if rule_kind in ("abs_grad", "rel_grad") else 0.0),
        steps=spec.get("steps", 0),
        max_steps=spec.get("max_steps", 1_000_000),
    )
    return LocalSpec(
        solver=spec.get("solver", "exact"),
        rule=rule,
        schedule=spec.get("schedule", False),
        check_decrease=spec.get("check_decrease", False),
        step=spec.get("step"),
    )


def build_method(entry: dict, problem, delta_report) -> tuple[str, MethodConfig]:
    name = entry["name"]
    label = entry.get("label", name)
    if "auto" in entry:
        if delta_report is None:
            raise ConfigError(
                f"method {label}: auto parameters need dissimilarity constants; "
                "provide explicit params for this problem kind"
            )
        smooth = problem.l_smooth
        if name == "gd" and problem.l_smooth_global is not None:
            smooth = problem.l_smooth_global
        cfg = suggest_parameters(
            name,
            delta_report,
            entry["auto"],
            l_smooth=smooth,
            mu=problem.mu or 0.0,
        )
        return label, cfg
    params = dict(entry.get("params", {}))
    local = _build_local(entry.get("local"))
    return label, MethodConfig(method=name, local=local, **params)


def _unique_labels(labels: list[str]) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for label in labels:
        seen[label] = seen.get(label, 0) + 1
        out.append(label if seen[label] == 1 else f"{label}_{seen[label]}")
    return out


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    for block in ("methods", "budget"):
        if block not in cfg:
            raise ConfigError(f"{block}: required for the run command")
    problem, delta_source = build_problem(
        cfg["problem"], os.path.dirname(os.path.abspath(args.config))
    )
    delta_report = delta_source
    if delta_report is None and any("auto" in m for m in cfg["methods"]):
        if problem.quadratic is not None:
            # auto parameter rules consume the mean-squared-norm variant
            _, delta_report = delta_exact_quadratic(problem)
        else:
            delta_report = delta_sampled(
                problem, 32, RandomStream(cfg["problem"].get("seed", 0)).fork(2)
            )
    budget_cfg = cfg["budget"]
    try:
        budget = Budget(
            max_rounds=budget_cfg.get("max_rounds"),
            max_grad_evals=budget_cfg.get("max_grad_evals"),
            target_gap=budget_cfg.get("target_gap"),
            max_iterations=budget_cfg.get("max_iterations"),
        )
        entries = [
            build_method(entry, problem, delta_report) for entry in cfg["methods"]
        ]
    except ConfigurationError as exc:
        raise ConfigError(str(exc)) from exc
    labels = _unique_labels([label for label, _ in entries])
    out_dir = args.out or cfg.get("output_dir", "out")
    os.makedirs(out_dir, exist_ok=True)
    repeats = cfg.get("repeats", 1)
    base_seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    record_every = cfg.get("record_every", 100)
    try:
        reference = reference_optimum(problem)
    except UnsupportedStructureError:
        reference = None
    metric = "f_gap" if reference is not None else "grad_norm_sq"

    jobs = [
        (label, mcfg, base_seed + rep)
        for (label, mcfg) in zip(labels, (m for _, m in entries))
        for rep in range(repeats)
    ]

    def run_one(job):
        label, mcfg, seed = job
        return run_experiment(
            problem,
            mcfg,
            budget,
            seed,
            reference=reference,
            record_every=record_every,
        )

    workers = args.workers
    if workers is None:
        workers = int(os.environ.get("FEDLAB_WORKERS", "1"))
    if workers < 1:
        raise ConfigError("--workers must be >= 1")
    if workers == 1:
        results = [run_one(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, jobs))

    summary_rows = []
    series_rounds = []
    series_evals = []
    for (label, _, seed), result in zip(jobs, results):
        path = os.path.join(out_dir, f"{label}_seed{seed}.csv")
        write_trace_csv(path, result.traces, timings=args.timings)
        target = budget.target_gap
        r_t = rounds_to_target(result.traces, target, metric) if target else None
        g_t = grad_evals_to_target(result.traces, target, metric) if target else None
        last = result.traces[-1]
        summary_rows.append(
            [
                label,
                str(seed),
                "" if r_t is None else str(r_t),
                "" if g_t is None else repr(float(g_t)),
                str(result.reached).lower(),
                repr(float(last.f_gap)),
                repr(float(last.grad_norm_sq)),
            ]
        )
        curve_label = label if repeats == 1 else f"{label} s{seed}"
        ys = [getattr(t, metric) for t in result.traces]
        series_rounds.append((curve_label, [t.rounds for t in result.traces], ys))
        series_evals.append((curve_label, [t.grad_evals for t in result.traces], ys))

    summary_path = os.path.join(out_dir, "summary.csv")
    with open(summary_path, "w", newline="") as fh:
        fh.write(
            "method,seed,rounds_to_target,grad_evals_to_target,reached,"
            "final_f_gap,final_grad_norm_sq\n"
        )
        for row in summary_rows:
            fh.write(",".join(row) + "\n")
    y_name = "f gap" if metric == "f_gap" else "squared gradient norm"
    write_svg(
        os.path.join(out_dir, "convergence_rounds.svg"),
        render_line_plot(
            series_rounds,
            title="convergence vs communication rounds",
            x_label="communication rounds",
            y_label=y_name,
        ),
    )
    write_svg(
        os.path.join(out_dir, "convergence_gradevals.svg"),
        render_line_plot(
            series_evals,
            title="convergence vs gradient evaluations",
            x_label="gradient evaluations (full-gradient units)",
            y_label=y_name,
        ),
    )
    width = max(len(r[0]) for r in summary_rows) + 2
    print(f"{'method':<{width}}{'seed':>6}{'rounds':>10}{'evals':>14}  reached")
    for row in summary_rows:
        print(
            f"{row[0]:<{width}}{row[1]:>6}{row[2] or '-':>10}"
            f"{row[3] or '-':>14}  {row[4]}"
        )
    print(f"wrote {len(jobs)} trace files + summary.csv + 2 SVGs to {out_dir}")
    return 0


def cmd_delta(args) -> int:
    cfg = load_config(args.config)
    problem, _ = build_problem(
        cfg["problem"], os.path.dirname(os.path.abspath(args.config))
    )
    reports = []
    if problem.quadratic is not None:
        exact, paper = delta_exact_quadratic(problem)
        reports = [exact, paper]
    else:
        stream = RandomStream(cfg["problem"].get("seed", 0)).fork(2)
        reports = [delta_sampled(problem, args.pairs, stream)]
        print(f"sampled over {args.pairs} direction pairs")
    print(f"{'method':<16}{'delta_a':>16}{'delta_b':>16}")
    for rep in reports:
        print(f"{rep.method:<16}{rep.delta_a:>16.9g}{rep.delta_b:>16.9g}")
    print(json.dumps([rep.as_dict() for rep in reports], indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedlab",
        description="communication-efficient federated optimization lab",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the configured experiment")
    run.add_argument("--config", required=True, help="experiment config (JSON)")
    run.add_argument("--out", help="output directory (overrides config)")
    run.add_argument(
        "--workers",
        type=int,
        help="parallel runs (default: FEDLAB_WORKERS or 1)",
    )
    run.add_argument("--seed", type=int, help="base seed (overrides config)")
    run.add_argument(
        "--timings",
        action="store_true",
        help="record wall-clock times in traces (breaks byte-for-byte "
        "reproducibility of output files)",
    )
    run.set_defaults(fn=cmd_run)
    delta = sub.add_parser("delta", help="report dissimilarity constants")
    delta.add_argument("--config", required=True, help="experiment config (JSON)")
    delta.add_argument(
        "--pairs", type=int, default=32, help="direction pairs for sampling"
    )
    delta.set_defaults(fn=cmd_delta)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ParseError, ConfigurationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
