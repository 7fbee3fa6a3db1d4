"""Command-line entry point.

Subcommands: ``solve``, ``certify``, ``delta``, ``bound``, ``verify``,
``sweep``.  Experiments are described by a flat INI config with one section
per concern; machine-readable outputs go only to the ``--out`` directory,
diagnostics to stderr.  Exit codes: 0 success, 1 validation error, 2
numerical failure (including non-convergence under ``--strict``).
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import sys
from pathlib import Path

from .bounds import (
    ConstantsConfig,
    design_moment_bounds,
    epsilon_threshold,
    estimate_rademacher_norm,
    matrix_bernstein_bound,
)
from .constraints import constraint_violation, describe
from .designs import load_dataset, prediction_bound, sample_dataset
from .errors import NumericalError, ValidationError
from .harness import (
    _DELTA_TAG,
    ExperimentConfig,
    _run_trial,
    build_constraint,
    build_design,
    build_truth,
    epsilon_sweep,
    mix_seed,
    rank_sweep,
    resolve_plan,
    run_oracle_trials,
    write_outputs,
)
from .losses import get_loss, loss_constants
from .matrices import load_matrix, nuclear_norm, rank_at_tol, save_matrix
from .solver import SolverConfig, gradient, objective, optimality_residuals, solve

_SECTION_KEYS = {
    "design": {"type", "m", "files", "probs"},
    "truth": {"rank", "spectrum", "sigma", "kind"},
    "loss": {"name"},
    "constraint": {"variant", "rho", "a"},
    "solver": {"max_iters", "grad_tol", "epsilon", "certify_tol"},
    "bound": {"t", "b", "c", "d", "delta_reps"},
    "experiment": {"n", "trials", "seed", "ranks", "eps_multiples"},
    "data": {"dataset", "estimate"},
}


@dataclasses.dataclass(frozen=True)
class DataPaths:
    dataset: str | None = None
    estimate: str | None = None


def _parse_number(section: str, key: str, raw: str, kind):
    try:
        return kind(raw)
    except ValueError:
        raise ValidationError(
            f"config [{section}] {key} = {raw!r} is not a valid {kind.__name__}"
        ) from None


def _parse_tuple(section: str, key: str, raw: str, kind) -> tuple:
    return tuple(_parse_number(section, key, part, kind) for part in raw.split())


def parse_config(path) -> tuple[ExperimentConfig, DataPaths, float]:
    """Read the INI experiment config; returns (config, data paths, certify tol)."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#", ";"), interpolation=None
    )
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ValidationError(f"config file {path} failed to parse: {exc}") from None

    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ValidationError(f"config {path}: unknown section [{section}]")
        unknown = set(parser[section]) - _SECTION_KEYS[section]
        if unknown:
            raise ValidationError(
                f"config {path}: unknown keys {sorted(unknown)} in [{section}]"
            )

    def get(section: str, key: str, default=None) -> str | None:
        if parser.has_option(section, key):
            return parser.get(section, key).strip()
        return default

    kwargs = {}
    if (value := get("design", "type")) is not None:
        kwargs["design_type"] = value
    if (value := get("design", "m")) is not None:
        kwargs["m"] = _parse_number("design", "m", value, int)
    if (value := get("design", "files")) is not None:
        kwargs["design_files"] = tuple(value.split())
    if (value := get("design", "probs")) is not None:
        kwargs["design_probs"] = _parse_tuple("design", "probs", value, float)

    if (value := get("truth", "rank")) is not None:
        kwargs["truth_rank"] = _parse_number("truth", "rank", value, int)
    if (value := get("truth", "spectrum")) is not None:
        kwargs["truth_spectrum"] = _parse_tuple("truth", "spectrum", value, float)
    if (value := get("truth", "sigma")) is not None:
        kwargs["noise_sigma"] = _parse_number("truth", "sigma", value, float)
    if (value := get("truth", "kind")) is not None:
        kwargs["noise_kind"] = value

    if (value := get("loss", "name")) is not None:
        kwargs["loss_name"] = value

    if (value := get("constraint", "variant")) is not None:
        kwargs["constraint_kind"] = value
    if (value := get("constraint", "rho")) is not None:
        kwargs["constraint_rho"] = _parse_number("constraint", "rho", value, float)
    if (value := get("constraint", "a")) is not None:
        kwargs["prediction_bound_override"] = _parse_number("constraint", "a", value, float)

    if (value := get("solver", "max_iters")) is not None:
        kwargs["max_iters"] = _parse_number("solver", "max_iters", value, int)
    if (value := get("solver", "grad_tol")) is not None:
        kwargs["grad_tol"] = _parse_number("solver", "grad_tol", value, float)
    if (value := get("solver", "epsilon")) is not None:
        rule, _, amount = value.partition(":")
        if rule not in ("threshold", "absolute") or not amount:
            raise ValidationError(
                f"config [solver] epsilon must look like 'threshold:1.0' or "
                f"'absolute:0.05', got {value!r}"
            )
        kwargs["epsilon_rule"] = rule
        kwargs["epsilon_value"] = _parse_number("solver", "epsilon", amount, float)

    if (value := get("bound", "t")) is not None:
        kwargs["t"] = _parse_number("bound", "t", value, float)
    if (value := get("bound", "b")) is not None:
        kwargs["b_const"] = _parse_number("bound", "b", value, float)
    if (value := get("bound", "c")) is not None:
        kwargs["c_const"] = _parse_number("bound", "c", value, float)
    if (value := get("bound", "d")) is not None:
        kwargs["d_thresh"] = _parse_number("bound", "d", value, float)
    if (value := get("bound", "delta_reps")) is not None:
        kwargs["delta_reps"] = _parse_number("bound", "delta_reps", value, int)

    if (value := get("experiment", "n")) is not None:
        kwargs["n"] = _parse_number("experiment", "n", value, int)
    if (value := get("experiment", "trials")) is not None:
        kwargs["trials"] = _parse_number("experiment", "trials", value, int)
    if (value := get("experiment", "seed")) is not None:
        kwargs["seed"] = _parse_number("experiment", "seed", value, int)
    if (value := get("experiment", "ranks")) is not None:
        kwargs["ranks"] = _parse_tuple("experiment", "ranks", value, int)
    if (value := get("experiment", "eps_multiples")) is not None:
        kwargs["eps_multiples"] = _parse_tuple("experiment", "eps_multiples", value, float)

    data = DataPaths(dataset=get("data", "dataset"), estimate=get("data", "estimate"))
    certify_tol = 1e-5
    if (value := get("solver", "certify_tol")) is not None:
        certify_tol = _parse_number("solver", "certify_tol", value, float)
    return ExperimentConfig(**kwargs), data, certify_tol


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; remap onto the
    # validation-error exit code
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="lowrank-oracle",
        description="Nuclear-norm penalized estimation and oracle-bound verification.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, help_text in (
        ("solve", "solve one penalized problem and write the estimate"),
        ("certify", "check first-order optimality of an estimate"),
        ("delta", "Monte-Carlo Rademacher norm and its Bernstein bound"),
        ("bound", "one end-to-end trial with a full bound report"),
        ("verify", "Monte-Carlo verification of the oracle bound"),
        ("sweep", "rank and regularization sweeps"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config (INI)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--workers", type=int, default=None, help="worker pool size")
        p.add_argument("--strict", action="store_true", help="non-convergence is an error")
        p.add_argument("--verbose", action="store_true", help="progress on stderr")
    return parser


def _write_json(out_dir: Path, name: str, payload: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _prepare_problem(config: ExperimentConfig, data_paths: DataPaths):
    design = build_design(config)
    truth = build_truth(config, dim=design.dim)
    loss = get_loss(config.loss_name)
    constraint = build_constraint(config)
    if data_paths.dataset is not None:
        data = load_dataset(data_paths.dataset, design)
    else:
        data = sample_dataset(design, truth, config.n, mix_seed(config.seed, 0))
    if config.epsilon_rule == "absolute":
        epsilon = config.epsilon_value
    else:
        if config.prediction_bound_override is not None:
            a = config.prediction_bound_override
        else:
            a = prediction_bound(constraint, design)
        consts = loss_constants(loss, a)
        stats = estimate_rademacher_norm(
            design, config.n, config.delta_reps, mix_seed(config.seed, _DELTA_TAG)
        )
        constants = ConstantsConfig(
            b_const=config.b_const, c_const=config.c_const, d_thresh=config.d_thresh
        )
        epsilon = config.epsilon_value * epsilon_threshold(
            constants, consts.smoothness, stats.delta, config.n
        )
    return design, truth, loss, constraint, data, epsilon


def _cmd_solve(config, data_paths, certify_tol, args, log) -> int:
    design, truth, loss, constraint, data, epsilon = _prepare_problem(config, data_paths)
    solver_config = SolverConfig(
        epsilon=epsilon, max_iters=config.max_iters, grad_tol=config.grad_tol
    )
    result = solve(data, loss, solver_config, constraint)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix(out / "estimate.mtx", result.s_hat)
    _write_json(
        out,
        "solve.json",
        {
            "objective": float(result.objective_trace[-1]),
            "iterations": result.iterations,
            "converged": result.converged,
            "kkt_low": result.kkt[0],
            "kkt_excess": result.kkt[1],
            "nuclear_norm": nuclear_norm(result.s_hat),
            "rank": rank_at_tol(result.s_hat),
            "epsilon": epsilon,
            "n": data.n,
            "constraint": describe(constraint),
        },
    )
    if not result.converged:
        print("warning: solver did not converge within max_iters", file=sys.stderr)
        if args.strict:
            return 2
    return 0


def _cmd_certify(config, data_paths, certify_tol, args, log) -> int:
    design, truth, loss, constraint, data, epsilon = _prepare_problem(config, data_paths)
    if data_paths.estimate is not None:
        estimate = load_matrix(data_paths.estimate)
    else:
        solver_config = SolverConfig(
            epsilon=epsilon, max_iters=config.max_iters, grad_tol=config.grad_tol
        )
        estimate = solve(data, loss, solver_config, constraint).s_hat
    grad = gradient(estimate, data, loss)
    low, excess = optimality_residuals(grad, estimate, epsilon, constraint)
    feasible = constraint_violation(estimate, constraint) <= certify_tol
    certified = bool(low <= certify_tol and excess <= certify_tol and feasible)
    _write_json(
        Path(args.out),
        "certify.json",
        {
            "certified": certified,
            "kkt_low": low,
            "kkt_excess": excess,
            "feasible": feasible,
            "tol": certify_tol,
            "epsilon": epsilon,
            "objective": objective(estimate, data, loss, epsilon),
            "constraint": describe(constraint),
        },
    )
    if not certified and args.strict:
        return 2
    return 0


def _cmd_delta(config, data_paths, certify_tol, args, log) -> int:
    design = build_design(config)
    stats = estimate_rademacher_norm(
        design, config.n, config.delta_reps, mix_seed(config.seed, _DELTA_TAG)
    )
    sigma, uniform = design_moment_bounds(design)
    bernstein = matrix_bernstein_bound(sigma, uniform, design.dim, config.n)
    _write_json(
        Path(args.out),
        "delta.json",
        {
            "delta": stats.delta,
            "xi_norm_mean": stats.xi_norm_mean,
            "stderr": stats.stderr,
            "reps": stats.reps,
            "n": stats.n,
            "sigma_x": sigma,
            "u_x": uniform,
            "bernstein_bound": bernstein,
            "bernstein_dominates": bernstein >= stats.delta,
        },
    )
    return 0


def _cmd_bound(config, data_paths, certify_tol, args, log) -> int:
    plan = resolve_plan(config)
    record = _run_trial(plan, 0)
    payload = {key: getattr(record, key) for key in (
        "trial", "seed", "converged", "iterations", "kkt_low", "kkt_excess",
        "estimate_nuclear", "estimate_rank", "objective", "lhs", "oracle_excess",
        "rank_term", "nuclear_term", "min_term", "residual_term", "rhs",
        "violated", "critical_c",
    )}
    payload.update(
        {
            "epsilon": plan.epsilon,
            "epsilon_threshold": plan.epsilon_threshold,
            "delta": plan.delta,
            "beta": plan.beta,
            "a": plan.a,
            "smoothness": plan.smoothness,
            "curvature": plan.curvature,
            "q_bound": plan.q_bound,
            "t": plan.t,
            "b_const": plan.constants.b_const,
            "c_const": plan.constants.c_const,
            "d_thresh": plan.constants.d_thresh,
        }
    )
    _write_json(Path(args.out), "bound.json", payload)
    if not record.converged:
        print("warning: solver did not converge within max_iters", file=sys.stderr)
        if args.strict:
            return 2
    return 0


def _cmd_verify(config, data_paths, certify_tol, args, log) -> int:
    records, summary = run_oracle_trials(config, workers=args.workers, log=log)
    write_outputs(records, summary, args.out)
    print(
        f"verify: {summary.converged}/{summary.trials} converged, "
        f"violation frequency {summary.violation_frequency:.4f} "
        f"(target {summary.target_frequency:.4f}), "
        f"calibrated C {summary.calibrated_c:.6g}"
    )
    if summary.nonconverged and args.strict:
        return 2
    return 0


def _cmd_sweep(config, data_paths, certify_tol, args, log) -> int:
    result = rank_sweep(config, workers=args.workers, log=log)
    eps_rows = ()
    if config.eps_multiples:
        eps_rows = epsilon_sweep(config, workers=args.workers, log=log)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(
        out,
        "sweep.json",
        {
            "rank_rows": list(result.rows),
            "exponent": result.exponent,
            "linear_slope": result.linear_slope,
            "eps_rows": list(eps_rows),
        },
    )
    with open(out / "error_vs_rank.dat", "w", encoding="utf-8") as fh:
        for row in result.rows:
            fh.write(f"{repr(float(row['rank']))} {repr(float(row['mean_error']))}\n")
    with open(out / "error_vs_eps.dat", "w", encoding="utf-8") as fh:
        for row in eps_rows:
            fh.write(f"{repr(float(row['epsilon']))} {repr(float(row['mean_error']))}\n")
    print(f"sweep: error-vs-rank exponent {result.exponent:.3f}")
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "certify": _cmd_certify,
    "delta": _cmd_delta,
    "bound": _cmd_bound,
    "verify": _cmd_verify,
    "sweep": _cmd_sweep,
}


def dispatch(args) -> int:
    config, data_paths, certify_tol = parse_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)

    def log(message: str) -> None:
        if args.verbose:
            print(message, file=sys.stderr)

    return _COMMANDS[args.subcommand](config, data_paths, certify_tol, args, log)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return dispatch(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
