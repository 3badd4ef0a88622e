"""Command-line entry point: ``weightmax <subcommand> [flags]``.

Exit codes: 0 success, 2 usage or configuration error, 3 network too large
to enumerate, 4 input/output failure. Every output is CSV (plus a JSON
checkpoint for ``train``) written under ``--out``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .estimators import KINDS, EstimatorConfig, UWMVariant
from .exceptions import CapacityError, WeightMaxError
from .math_kernel import sigmoid_derivative, taylor_error_sigmoid
from .network import NetworkParams, init_params, save_checkpoint
from .oracle import C4_GRID, C4_TOPOLOGY, EnumerableTask, appendix_c4_study, natural_extension_value, summarize_study, write_study_csv
from .trainer import TrainConfig, sweep, train_run, write_curves_csv, write_summary_csv

EXIT_OK, EXIT_USAGE, EXIT_CAPACITY, EXIT_IO = 0, 2, 3, 4

# flag dest -> TrainConfig key; only flags given on the command line override the file
_OVERRIDES = {
    "seed": "seed",
    "estimator": "estimator",
    "p": "p",
    "uwm_variant": "uwm_variant",
    "global_reward": "global_reward",
    "layers": "layer_sizes",
    "task": "task",
    "k": "k",
    "episodes": "episodes",
    "batch": "batch_size",
    "step_size": "step_size",
    "beta1": "beta1",
    "beta2": "beta2",
    "epsilon": "epsilon",
    "running_avg_window": "running_avg_window",
    "weight_decay": "weight_decay",
    "init": "init",
    "log_every": "log_every",
}


class UsageError(WeightMaxError):
    """Bad command-line input that argparse itself cannot detect."""


def _int_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON file with TrainConfig keys; flags override it")
    parser.add_argument("--seed", type=_u64, help="base seed (default 0)")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory (default ./out)")
    parser.add_argument("--threads", type=int, default=1, help="worker processes for independent runs")
    parser.add_argument("--deterministic", action="store_true", help="single fixed reduction order (results are bit-reproducible)")


def _training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--estimator", choices=KINDS + ("backprop",), help="learning rule")
    parser.add_argument("--p", type=int, help="order of p-order Weight Maximization")
    parser.add_argument("--uwm-variant", help="single, mc:M or rect:M")
    parser.add_argument("--global-reward", action="store_const", const=True, help="p-order WM with the output reward passed to every layer")
    parser.add_argument("--layers", type=_int_list, help="unit layer sizes, e.g. 64,64,1")
    parser.add_argument("--task", choices=("multiplexer",), help="environment")
    parser.add_argument("--k", type=int, help="multiplexer address bits")
    parser.add_argument("--episodes", type=int, help="training episodes per run")
    parser.add_argument("--batch", type=int, help="episodes per parameter update")
    parser.add_argument("--step-size", type=float, help="Adam step size")
    parser.add_argument("--beta1", type=float, help="Adam first-moment decay")
    parser.add_argument("--beta2", type=float, help="Adam second-moment decay")
    parser.add_argument("--epsilon", type=float, help="Adam epsilon")
    parser.add_argument("--running-avg-window", type=int, help="running-average window in episodes")
    parser.add_argument("--weight-decay", type=float, help="L2 penalty subtracted from the gradient")
    parser.add_argument("--init", help="uniform_fan_in, constant_zero or uniform_range:C")
    parser.add_argument("--log-every", type=int, help="keep every n-th batch in the learning curve")


def _sweep_flags(parser: argparse.ArgumentParser, default_estimators: str) -> None:
    parser.add_argument("--n-values", type=_int_list, default=[8, 16, 32, 48, 64, 96], help="hidden widths N to sweep")
    parser.add_argument("--estimators", default=default_estimators, help="comma-separated rules (use name:p or unbiased_wm:mc:M for variants)")
    parser.add_argument("--runs", type=int, default=5, help="independent runs per configuration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weightmax", description="Train and analyse networks of Bernoulli-logistic units.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="one training run: learning-curve CSV and checkpoint")
    _common(p)
    _training_flags(p)

    p = sub.add_parser("sweep", help="several estimators over hidden widths, repeated runs")
    _common(p)
    _training_flags(p)
    _sweep_flags(p, "reinforce,ste,weight_max,unbiased_wm")

    p = sub.add_parser("compare-backprop", help="sweep plus the deterministic-sigmoid backprop baseline")
    _common(p)
    _training_flags(p)
    _sweep_flags(p, "reinforce,ste,weight_max,unbiased_wm")

    p = sub.add_parser("analyze", help="exact bias/variance study on a small enumerable network")
    _common(p)
    p.add_argument("--c-grid", type=_float_list, default=list(C4_GRID), help="parameter ranges C")
    p.add_argument("--trials", type=int, default=20, help="random networks per C")
    p.add_argument("--topology", type=_int_list, default=list(C4_TOPOLOGY), help="layer sizes including the input width")
    p.add_argument("--nodes", type=int, default=64, help="quadrature nodes for the expectation over U")

    p = sub.add_parser("figures", help="plottable CSV data for the illustrative curves")
    _common(p)
    p.add_argument("--m", type=int, default=8, help="outgoing units for the natural-extension curves")
    p.add_argument("--curves", type=int, default=4, help="number of natural-extension curves")
    p.add_argument("--orders", type=_int_list, default=[1, 2, 3, 4, 5], help="derivative orders for sigma^(p)")
    p.add_argument("--error-orders", type=_int_list, default=[4, 8, 12], help="Taylor orders for the error curves")
    return parser


def resolve_config(args: argparse.Namespace) -> TrainConfig:
    """Merge the JSON file (if any) with explicitly given flags."""
    data: dict = {}
    if args.config is not None:
        if not args.config.is_file():
            raise UsageError(f"config file not found: {args.config}")
        data = TrainConfig.from_json(args.config).to_dict()
    for dest, key in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            data[key] = value
    return TrainConfig.from_dict(data)


def _estimator_from_token(token: str, base: EstimatorConfig) -> EstimatorConfig:
    name, _, rest = token.strip().partition(":")
    if name == "p_order":
        return EstimatorConfig("p_order", p=int(rest) if rest else base.p, global_reward=base.global_reward)
    if name == "unbiased_wm":
        return EstimatorConfig("unbiased_wm", uwm_variant=UWMVariant.parse(rest) if rest else base.uwm_variant)
    return EstimatorConfig(name)


def _sweep_configs(base: TrainConfig, args, with_baseline: bool) -> list[TrainConfig]:
    tokens = [t for t in args.estimators.split(",") if t.strip()]
    try:
        ests = [_estimator_from_token(t, base.estimator) for t in tokens]
    except ValueError as exc:
        raise UsageError(f"bad --estimators entry: {exc}") from exc
    if with_baseline and not any(e.kind == "backprop" for e in ests):
        ests.append(EstimatorConfig("backprop"))
    configs = []
    for n in args.n_values:
        sizes = tuple(n for _ in base.layer_sizes[:-1]) + base.layer_sizes[-1:]
        configs.extend(replace(base, layer_sizes=sizes, estimator=e) for e in ests)
    return configs


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_train(args) -> int:
    config = resolve_config(args)
    result = train_run(config)
    _write(args.out / "curve.csv", result.curve.to_csv())
    save_checkpoint(args.out / "checkpoint.json", result.params, seed=config.seed)
    _write(args.out / "config.json", json.dumps(config.to_dict(), indent=2) + "\n")
    print(f"{config.label}: average reward {result.curve.average_reward:.4f}, final running average {result.curve.final_running_avg:.4f}")
    return EXIT_OK


def _run_sweep(args, with_baseline: bool) -> int:
    base = resolve_config(args)
    if args.runs < 1:
        raise UsageError("--runs must be at least 1")
    n_jobs = 1 if args.deterministic else max(1, args.threads)
    entries = sweep(_sweep_configs(base, args, with_baseline), runs_per_config=args.runs, n_jobs=n_jobs)
    _write(args.out / "summary.csv", write_summary_csv(entries))
    _write(args.out / "curves.csv", write_curves_csv(entries))
    for e in entries:
        print(f"{e.label:>24} N={e.N:<4} avg {e.average_rewards.mean():+.4f} final {e.final_running_avgs.mean():+.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    return _run_sweep(args, with_baseline=False)


def cmd_compare_backprop(args) -> int:
    return _run_sweep(args, with_baseline=True)


def cmd_analyze(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    reports = appendix_c4_study(
        C_grid=tuple(args.c_grid), trials=args.trials, seed=args.seed or 0, topology=tuple(args.topology), n_nodes=args.nodes
    )
    _write(args.out / "study.csv", write_study_csv(reports))
    print(f"{'estimator':>24} {'C':>6} {'mean |bias|':>12} {'mean variance':>14}")
    for (name, c), row in summarize_study(reports).items():
        print(f"{name:>24} {c:>6g} {row['abs_bias']:>12.4e} {row['variance']:>14.4e}")
    return EXIT_OK


def figure_data(seed: int = 0, m: int = 8, curves: int = 4, orders=(1, 2, 3, 4, 5), error_orders=(4, 8, 12)) -> dict[str, str]:
    """CSV text for the natural-extension, sigma^(p) and Taylor-error figures."""
    rng = np.random.default_rng(seed)
    u = np.linspace(0.0, 1.0, 101)
    rows = ["curve,u,r"]
    for c in range(curves):
        params = NetworkParams(
            [np.zeros((1, 0)), rng.uniform(-4, 4, (m, 1))],
            [rng.uniform(-1, 1, 1), rng.uniform(-4, 4, m)],
        )
        task = EnumerableTask(rng.uniform(-1, 1, 2**m))
        values = natural_extension_value(params, task, (0, 0), u)
        rows.extend(f"{c},{float(x)!r},{float(v)!r}" for x, v in zip(u, values))
    x = np.linspace(-6.0, 6.0, 241)
    deriv = ["p,x,value"]
    for p in orders:
        deriv.extend(f"{p},{float(a)!r},{float(v)!r}" for a, v in zip(x, sigmoid_derivative(p, x)))
    xe = np.linspace(-6.0, 6.0, 241)
    err = ["p,x,error"]
    for p in error_orders:
        err.extend(f"{p},{float(a)!r},{float(v)!r}" for a, v in zip(xe, taylor_error_sigmoid(p, xe)))
    return {
        "natural_extension.csv": "\n".join(rows) + "\n",
        "sigmoid_derivatives.csv": "\n".join(deriv) + "\n",
        "taylor_error.csv": "\n".join(err) + "\n",
    }


def cmd_figures(args) -> int:
    for name, text in figure_data(args.seed or 0, args.m, args.curves, args.orders, args.error_orders).items():
        _write(args.out / name, text)
        print(args.out / name)
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "sweep": cmd_sweep,
    "compare-backprop": cmd_compare_backprop,
    "analyze": cmd_analyze,
    "figures": cmd_figures,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except WeightMaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
