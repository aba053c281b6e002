"""Command-line entry point: generate, fit, eval, bench, infer, serve.

Exit codes are a stable contract for scripting: 0 success, 2 usage or
flag validation, 3 data or model file problems, 4 runtime failures
(bind, non-convergence).  Human-readable key/value lines go to stdout;
machine-readable JSON only ever goes to files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .dataset import (
    SyntheticConfig,
    build_snapshot_matrix,
    choose_validation_runs,
    generate_synthetic,
    load_dataset,
    load_dataset_metadata,
    run_columns,
    save_dataset,
)
from .errors import (
    CannotSplitError,
    ConvergenceError,
    DimensionMismatchError,
    EmptyInputError,
    FormatError,
    GeneratorConfigError,
    NumericError,
    RuntimeBindError,
    TuningFailedError,
    UndefinedEnergyError,
    UndefinedMetricError,
)
from .evaluate import make_report, verify_bound
from .pipeline import FitConfig, bench_latency, fit, infer, load_model, save_model
from .tuner import history_to_jsonl

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4

_DATA_ERRORS = (FormatError, DimensionMismatchError, EmptyInputError,
                CannotSplitError, NumericError, UndefinedEnergyError,
                UndefinedMetricError, OSError)
_RUNTIME_ERRORS = (RuntimeBindError, ConvergenceError, TuningFailedError)


class UsageError(Exception):
    pass


def _parse_range(text) -> tuple[float, float]:
    if isinstance(text, (list, tuple)) and len(text) == 2:
        return float(text[0]), float(text[1])
    try:
        lo, hi = (float(p) for p in str(text).split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a range like 0.5,2.0 — got {text!r}") from None
    return lo, hi


def _entropy_seed() -> int:
    return int(np.random.SeedSequence().entropy) % (2 ** 63)


def _resolve_seed(seed, printed_as: str) -> int:
    if seed is None:
        seed = _entropy_seed()
        print(f"{printed_as} {seed} (drawn from system entropy)")
    return int(seed)


def _env(name: str):
    return os.environ.get(f"RBS_{name}")


# Per-subcommand defaults, applied after the config file merge so an
# explicit flag always wins over the config, which wins over these.
_DEFAULTS = {
    "generate": {"grid": 8, "steps": 10, "runs": 20, "seed": None,
                 "i_range": (0.5, 2.0), "alpha_range": (0.05, 0.5),
                 "beta_range": (0.1, 1.0), "mu0": 1.0},
    "fit": {"energy": 0.98, "val_fraction": 0.2, "trials": 50, "seed": None,
            "split_seed": None, "independent": True, "startup": 10,
            "gamma": 0.25, "candidates": 24, "svr_tol": 1e-3,
            "svr_max_iter": 300_000},
    "eval": {"val_fraction": None, "split_seed": None, "output": None},
    "bench": {"queries": 100, "seed": None},
    "infer": {"output": None, "binary": False},
    "serve": {"model": None, "bind": None, "batch_cap": None, "cors": None,
              "static": None},
}


def _apply_config(args: argparse.Namespace, command: str) -> None:
    defaults = _DEFAULTS.get(command, {})
    config = {}
    if getattr(args, "config", None):
        try:
            config = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise UsageError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {args.config} is not valid JSON: {exc}") from None
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(config) - set(defaults)
        if unknown:
            raise UsageError(
                f"unknown config keys for {command}: {', '.join(sorted(unknown))}")
    for dest, default in defaults.items():
        if getattr(args, dest, None) is None:
            setattr(args, dest, config.get(dest, default))


def cmd_generate(args) -> int:
    seed = _resolve_seed(args.seed, "seed")
    cfg = SyntheticConfig(
        grid_side=int(args.grid), n_steps=int(args.steps), n_runs=int(args.runs),
        i_range=_parse_range(args.i_range), alpha_range=_parse_range(args.alpha_range),
        beta_range=_parse_range(args.beta_range), mu0=float(args.mu0), seed=seed)
    runs = generate_synthetic(cfg)
    metadata = {
        "generator": "rank2-synthetic",
        "parameter_names": ["I", "alpha", "beta"],
        "grid_side": cfg.grid_side,
        "mu0": cfg.mu0,
        "ranges": {"I": list(cfg.i_range), "alpha": list(cfg.alpha_range),
                   "beta": list(cfg.beta_range)},
        "seed": seed,
    }
    try:
        save_dataset(runs, args.output, metadata=metadata)
    except OSError as exc:
        raise UsageError(f"cannot write {args.output}: {exc}") from None
    print(f"N {cfg.n_runs}")
    print(f"T {cfg.n_steps}")
    print(f"n {cfg.n_cells}")
    print(f"seed {seed}")
    print(f"wrote {args.output}")
    return EXIT_OK


def _history_path(model_path) -> Path:
    p = Path(model_path)
    return p.with_name(p.stem + ".history.jsonl")


def _eval_on_dataset(model, runs, val_fraction: float, split_seed: int):
    """Shared by fit and eval so printed figures agree exactly."""
    X, xin = build_snapshot_matrix(runs)
    val_runs = choose_validation_runs(X.n_runs, val_fraction, split_seed)
    cols = run_columns(val_runs, X.n_steps)
    X_val = X.data[:, cols]
    rows_val = xin.data.T[cols]
    pred = np.column_stack([infer(model, row[0], row[1:]) for row in rows_val])
    C_val = model.basis.project(X_val)
    projected = model.basis.reconstruct(C_val)
    report = make_report(pred, X_val, projected, (len(val_runs), X.n_steps),
                         run_indices=val_runs)
    bound = verify_bound(model, rows_val, C_val)
    return report, bound


def cmd_fit(args) -> int:
    energy = float(args.energy)
    val_fraction = float(args.val_fraction)
    seed = _resolve_seed(args.seed, "seed")
    split_seed = int(args.split_seed) if args.split_seed is not None else seed
    cfg = FitConfig(
        energy_threshold=energy, val_fraction=val_fraction,
        n_trials=int(args.trials), split_seed=split_seed, tuner_seed=seed,
        n_startup=int(args.startup), gamma=float(args.gamma),
        n_candidates=int(args.candidates), svr_tol=float(args.svr_tol),
        svr_max_iter=int(args.svr_max_iter),
        independent_tuning=bool(args.independent))
    runs = load_dataset(args.dataset)
    ds_meta = load_dataset_metadata(args.dataset)
    carried = {k: ds_meta[k] for k in ("parameter_names", "grid_side") if k in ds_meta}
    carried["val_fraction"] = val_fraction
    model = fit(runs, cfg, metadata=carried)
    try:
        save_model(model, args.output)
        if model.tuning_history is not None:
            _history_path(args.output).write_text(
                history_to_jsonl(list(model.tuning_history)))
    except OSError as exc:
        raise UsageError(f"cannot write {args.output}: {exc}") from None
    report, _ = _eval_on_dataset(model, runs, val_fraction, split_seed)
    print(f"r {model.r}")
    print(f"energy_at_rank {model.metadata['energy_at_rank']!r}")
    print(f"e {model.e!r}")
    print("e_k " + " ".join(repr(v) for v in model.e_k))
    print(f"trials {cfg.n_trials}")
    print(f"val_delta_rmse_sqrt {report.delta_rmse_sqrt!r}")
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.model)
    runs = load_dataset(args.dataset)
    val_fraction = (float(args.val_fraction) if args.val_fraction is not None
                    else float(model.metadata.get("val_fraction", 0.2)))
    split_seed = (int(args.split_seed) if args.split_seed is not None
                  else int(model.metadata.get("split_seed", 0)))
    report, bound = _eval_on_dataset(model, runs, val_fraction, split_seed)
    print(f"delta_rmse {report.delta_rmse!r}")
    print(f"delta_rmse_sqrt {report.delta_rmse_sqrt!r}")
    print(f"delta_ame {report.delta_ame!r}")
    print(f"bound_max_ratio {bound.max_ratio!r}")
    print(f"violations {len(bound.violations)}")
    if args.output:
        payload = {"metrics": report.to_dict(), "bound": bound.to_dict()}
        try:
            Path(args.output).write_text(json.dumps(payload, sort_keys=True, indent=2))
        except OSError as exc:
            raise UsageError(f"cannot write {args.output}: {exc}") from None
        print(f"wrote {args.output}")
    return EXIT_OK


def cmd_bench(args) -> int:
    queries = int(args.queries)
    if queries < 1:
        raise UsageError(f"--queries must be >= 1, got {queries}")
    model = load_model(args.model)
    seed = _resolve_seed(args.seed, "seed")
    report = bench_latency(model, queries, np.random.default_rng(seed))
    print(f"samples {report['n_samples']}")
    print(f"n {report['n']}")
    print(f"r {report['r']}")
    for key in ("mean", "std", "p50", "p99"):
        print(f"{key}_ms {report[key + '_us'] / 1000.0:.2f}")
    return EXIT_OK


def cmd_infer(args) -> int:
    model = load_model(args.model)
    try:
        lam = [float(p) for p in str(args.lam).split(",")]
    except ValueError:
        raise UsageError(f"--lambda must be comma-separated numbers, got {args.lam!r}") from None
    if len(lam) != model.d_lambda:
        raise UsageError(
            f"--lambda has {len(lam)} components, model expects {model.d_lambda}")
    field = infer(model, float(args.t), lam)
    if args.binary:
        payload = field.astype("<f8", copy=False).tobytes()
        if args.output:
            Path(args.output).write_bytes(payload)
        else:
            sys.stdout.buffer.write(payload)
    else:
        text = "\n".join(repr(v) for v in field.tolist()) + "\n"
        if args.output:
            Path(args.output).write_text(text)
        else:
            sys.stdout.write(text)
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import run_server

    model_path = args.model or _env("MODEL")
    if not model_path:
        raise UsageError("--model is required (or set RBS_MODEL)")
    bind = args.bind or _env("BIND") or "127.0.0.1:8000"
    batch_cap = int(args.batch_cap if args.batch_cap is not None
                    else _env("BATCH_CAP") or 1024)
    cors = args.cors if args.cors is not None else (_env("CORS") or "*")
    try:
        run_server(model_path, bind=bind, batch_cap=batch_cap, cors=cors,
                   static_dir=args.static)
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; explicit flags win")

    p = argparse.ArgumentParser(prog="rbs",
                                description="reduced-basis surrogate toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common],
                       help="write a synthetic dataset")
    g.add_argument("--grid", type=int)
    g.add_argument("--steps", type=int)
    g.add_argument("--runs", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--i-range", dest="i_range", type=_parse_range)
    g.add_argument("--alpha-range", dest="alpha_range", type=_parse_range)
    g.add_argument("--beta-range", dest="beta_range", type=_parse_range)
    g.add_argument("--mu0", type=float)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", parents=[common], help="train a surrogate model")
    f.add_argument("dataset")
    f.add_argument("-o", "--output", required=True)
    f.add_argument("--energy", type=float)
    f.add_argument("--val-fraction", dest="val_fraction", type=float)
    f.add_argument("--trials", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--split-seed", dest="split_seed", type=int)
    f.add_argument("--independent", action=argparse.BooleanOptionalAction,
                   default=None)
    f.add_argument("--startup", type=int)
    f.add_argument("--gamma", type=float)
    f.add_argument("--candidates", type=int)
    f.add_argument("--svr-tol", dest="svr_tol", type=float)
    f.add_argument("--svr-max-iter", dest="svr_max_iter", type=int)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", parents=[common],
                       help="metrics and bound check on a dataset split")
    e.add_argument("model")
    e.add_argument("dataset")
    e.add_argument("--val-fraction", dest="val_fraction", type=float)
    e.add_argument("--split-seed", dest="split_seed", type=int)
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", parents=[common], help="latency benchmark")
    b.add_argument("model")
    b.add_argument("--queries", type=int)
    b.add_argument("--seed", type=int)
    b.set_defaults(func=cmd_bench)

    i = sub.add_parser("infer", parents=[common], help="single field inference")
    i.add_argument("model")
    i.add_argument("--t", type=float, required=True)
    i.add_argument("--lambda", dest="lam", required=True)
    i.add_argument("-o", "--output")
    i.add_argument("--binary", action="store_true", default=None)
    i.set_defaults(func=cmd_infer)

    s = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    s.add_argument("--model")
    s.add_argument("--bind")
    s.add_argument("--batch-cap", dest="batch_cap", type=int)
    s.add_argument("--cors")
    s.add_argument("--static")
    s.set_defaults(func=cmd_serve)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _apply_config(args, args.command)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (GeneratorConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
