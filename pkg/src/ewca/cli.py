"""Command-line front end.

Subcommands: fit, pca, transform, evaluate, benchmark. Every command writes
a manifest next to its outputs; re-running `fit` from an identical manifest
reproduces the basis and plan files byte for byte. Exit codes: 0 success,
1 domain or solver error, 2 I/O error, 3 configuration error.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, EwcaError, ParseError
from .evaluation import (
    LabeledDataset,
    SplitSpec,
    aggregate_timings,
    evaluate_embedding,
    ewca_fitter,
    pca_fitter,
    select_epsilon,
    stratified_split,
    timing_sweep,
)
from .io import (
    ingest_csv,
    read_manifest,
    read_matrix_csv,
    write_manifest,
    write_matrix_csv,
    write_table_csv,
)
from .sinkhorn import squared_l2_cost
from .solver import fit_bcd, fit_mm
from .types import DataMatrix, LambdaMinStrategy, SolverConfig, StiefelBasis


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits with the configuration-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: error: {message}\n")


def _add_io_options(sub):
    sub.add_argument("input", nargs="?", help="input CSV, one row per sample")
    sub.add_argument("--output-dir", type=Path, default=None,
                     help="directory for outputs (default: ewca-<command>)")
    sub.add_argument("--has-header", action="store_true",
                     help="first CSV row holds column names")
    sub.add_argument("--label-column", default=None,
                     help="label column name (needs --has-header) or 0-based index")
    sub.add_argument("--seed", type=int, default=None,
                     help="RNG seed (falls back to EWCA_SEED, then 0)")
    sub.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True,
                     help="render figures next to the CSV outputs")


def _add_solver_options(sub, with_algo=True):
    if with_algo:
        sub.add_argument("--algo", choices=("bcd", "mm"), default="mm")
        sub.add_argument("--epsilon", type=float, default=None,
                         help="entropic regularization (0 dispatches to PCA)")
    sub.add_argument("--k", default=None, help="target subspace dimension")
    sub.add_argument("--center", action=argparse.BooleanOptionalAction, default=True,
                     help="center features before fitting")
    sub.add_argument("--lambda-min", choices=("auto", "exact", "bound"), default="auto",
                     help="smallest-eigenvalue strategy for the MM surrogate")
    sub.add_argument("--outer-tol", type=float, default=1e-7)
    sub.add_argument("--outer-max-iter", type=int, default=100)
    sub.add_argument("--sinkhorn-tol", type=float, default=1e-9)
    sub.add_argument("--sinkhorn-max-iter", type=int, default=10000)
    sub.add_argument("--mm-inner", type=int, default=20)
    sub.add_argument("--log-domain", action=argparse.BooleanOptionalAction, default=False,
                     help="force log-domain Sinkhorn (off: automatic)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ewca", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ewca {__version__}")
    commands = parser.add_subparsers(dest="command", required=True,
                                     parser_class=_Parser)

    fit = commands.add_parser("fit",
                              help="fit a subspace and transport plan")
    _add_io_options(fit)
    _add_solver_options(fit)
    fit.add_argument("--from-manifest", type=Path, default=None,
                     help="re-run a previous fit from its manifest")
    fit.set_defaults(func=cmd_fit)

    pca_cmd = commands.add_parser("pca",
                                  help="fit a plain PCA basis")
    _add_io_options(pca_cmd)
    _add_solver_options(pca_cmd, with_algo=False)
    pca_cmd.set_defaults(func=cmd_pca)

    transform = commands.add_parser("transform",
                                    help="project samples onto a fitted basis")
    _add_io_options(transform)
    transform.add_argument("--basis", type=Path, required=True,
                           help="basis CSV written by fit or pca")
    transform.set_defaults(func=cmd_transform)

    evaluate = commands.add_parser("evaluate",
                                   help="1-NN evaluation of raw, PCA and EWCA embeddings")
    _add_io_options(evaluate)
    _add_solver_options(evaluate)
    evaluate.add_argument("--splits", type=int, default=100,
                          help="number of outer train/test splits")
    evaluate.add_argument("--train-frac", type=float, default=0.5)
    evaluate.add_argument("--inner-splits", type=int, default=20,
                          help="train-set splits used to select epsilon")
    evaluate.add_argument("--eps-grid", default="auto",
                          help="comma-separated epsilon candidates, or 'auto'")
    evaluate.add_argument("--full-grid", action="store_true",
                          help="evaluate every (k, epsilon) pair instead of selecting")
    evaluate.add_argument("--refit", action=argparse.BooleanOptionalAction, default=True,
                          help="refit the subspace on each split's train half")
    evaluate.add_argument("--jobs", type=int, default=1,
                          help="threads for split evaluation (deterministic reduction)")
    evaluate.set_defaults(func=cmd_evaluate)

    benchmark = commands.add_parser("benchmark",
                                    help="wall-time sweep over feature subsamples")
    _add_io_options(benchmark)
    _add_solver_options(benchmark)
    benchmark.add_argument("--dims", required=True,
                           help="comma-separated feature counts to subsample")
    benchmark.add_argument("--repeats", type=int, default=3)
    benchmark.add_argument("--algos", default="bcd,mm",
                           help="comma-separated subset of bcd,mm")
    benchmark.set_defaults(func=cmd_benchmark)
    return parser


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    return int(os.environ.get("EWCA_SEED", "0"))


def _require_input(args) -> str:
    if not args.input:
        raise ConfigError("an input CSV path is required")
    return args.input


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(part) for part in str(text).split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}") from None
    if not values:
        raise ConfigError(f"{flag} is empty")
    return values


def _int_arg(value, flag: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{flag} expects an integer, got {value!r}") from None


def _solver_config(args, epsilon: float, k: int) -> SolverConfig:
    strategy = {
        "auto": None,
        "exact": LambdaMinStrategy.EXACT,
        "bound": LambdaMinStrategy.GERSHGORIN_BOUND,
    }[args.lambda_min]
    return SolverConfig(
        epsilon=epsilon,
        k=k,
        sinkhorn_tol=args.sinkhorn_tol,
        sinkhorn_max_iter=args.sinkhorn_max_iter,
        outer_tol=args.outer_tol,
        outer_max_iter=args.outer_max_iter,
        mm_inner_iter=args.mm_inner,
        center_data=args.center,
        lambda_min_strategy=strategy,
        log_domain=args.log_domain,
    )


def _load_features(args) -> tuple[DataMatrix, np.ndarray | None]:
    loaded = ingest_csv(_require_input(args), has_header=args.has_header,
                        label_column=args.label_column)
    if isinstance(loaded, LabeledDataset):
        return loaded.data, loaded.labels
    return loaded, None


def _outdir(args, default_name: str) -> Path:
    outdir = args.output_dir if args.output_dir is not None else Path(default_name)
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def _fit_manifest_entries(args, seed: int) -> dict:
    return {
        "command": "fit",
        "input_path": str(Path(_require_input(args)).resolve()),
        "output_dir": str(args.output_dir) if args.output_dir else "",
        "algo": args.algo,
        "epsilon": float(args.epsilon),
        "k": int(args.k),
        "center": str(args.center).lower(),
        "lambda_min": args.lambda_min,
        "outer_tol": float(args.outer_tol),
        "outer_max_iter": int(args.outer_max_iter),
        "sinkhorn_tol": float(args.sinkhorn_tol),
        "sinkhorn_max_iter": int(args.sinkhorn_max_iter),
        "mm_inner": int(args.mm_inner),
        "log_domain": str(args.log_domain).lower(),
        "seed": seed,
        "has_header": str(args.has_header).lower(),
        "label_column": args.label_column or "",
    }


def _manifest_to_argv(entries: dict[str, str]) -> list[str]:
    argv = [
        "fit", entries["input_path"],
        "--algo", entries["algo"],
        "--epsilon", entries["epsilon"],
        "--k", entries["k"],
        "--lambda-min", entries["lambda_min"],
        "--outer-tol", entries["outer_tol"],
        "--outer-max-iter", entries["outer_max_iter"],
        "--sinkhorn-tol", entries["sinkhorn_tol"],
        "--sinkhorn-max-iter", entries["sinkhorn_max_iter"],
        "--mm-inner", entries["mm_inner"],
        "--seed", entries["seed"],
        "--center" if entries["center"] == "true" else "--no-center",
        "--log-domain" if entries["log_domain"] == "true" else "--no-log-domain",
    ]
    if entries.get("has_header") == "true":
        argv.append("--has-header")
    if entries.get("label_column"):
        argv.extend(["--label-column", entries["label_column"]])
    if entries.get("output_dir"):
        argv.extend(["--output-dir", entries["output_dir"]])
    return argv


def _write_fit_outputs(outdir: Path, command: str, result, labels, plot: bool) -> None:
    write_matrix_csv(outdir / "basis.csv", result.basis.values, command)
    write_matrix_csv(outdir / "plan.csv", result.plan.values, command)
    write_matrix_csv(outdir / "trace.csv", result.objective_trace[:, None], command)
    if plot:
        from . import figures

        figures.plot_objective_trace(result.objective_trace, outdir / "trace.png")
        figures.plot_plan_heatmap(result.plan.values, outdir / "plan.png", labels=labels)


def cmd_fit(args) -> int:
    if getattr(args, "from_manifest", None):
        entries = read_manifest(args.from_manifest)
        if entries.get("command") != "fit":
            raise ConfigError(
                f"manifest describes command {entries.get('command')!r}, expected 'fit'"
            )
        rerun = build_parser().parse_args(_manifest_to_argv(entries))
        if args.output_dir is not None:
            rerun.output_dir = args.output_dir
        rerun.plot = args.plot
        return cmd_fit(rerun)
    if args.epsilon is None:
        raise ConfigError("--epsilon is required for fit")
    if args.k is None:
        raise ConfigError("--k is required for fit")
    args.k = _int_arg(args.k, "--k")
    seed = _seed(args)
    data, labels = _load_features(args)
    config = _solver_config(args, args.epsilon, args.k)
    solver = fit_bcd if args.algo == "bcd" else fit_mm
    result = solver(data, config)
    outdir = _outdir(args, "ewca-fit")
    # epsilon 0 dispatches to PCA, so outputs are labeled as PCA's
    produced_by = "pca" if args.epsilon == 0 else "fit"
    _write_fit_outputs(outdir, produced_by, result, labels, args.plot)
    write_manifest(outdir / "manifest.txt", _fit_manifest_entries(args, seed))
    print(
        f"fit: {args.algo} converged={result.converged} iterations={result.iterations} "
        f"objective={result.objective!r} -> {outdir}"
    )
    return 0


def cmd_pca(args) -> int:
    if args.k is None:
        raise ConfigError("--k is required for pca")
    args.k = _int_arg(args.k, "--k")
    args.algo = "bcd"
    args.epsilon = 0.0
    seed = _seed(args)
    data, labels = _load_features(args)
    config = _solver_config(args, 0.0, args.k)
    result = fit_bcd(data, config)  # epsilon 0 dispatches straight to PCA
    outdir = _outdir(args, "ewca-pca")
    _write_fit_outputs(outdir, "pca", result, labels, args.plot)
    entries = _fit_manifest_entries(args, seed)
    entries["command"] = "pca"
    write_manifest(outdir / "manifest.txt", entries)
    print(f"pca: k={args.k} objective={result.objective!r} -> {outdir}")
    return 0


def cmd_transform(args) -> int:
    data, _ = _load_features(args)
    basis = StiefelBasis(read_matrix_csv(args.basis))
    projected = basis.values.T @ data.values  # (k, n)
    outdir = _outdir(args, "ewca-transform")
    write_matrix_csv(outdir / "projected.csv", projected.T, "transform")
    write_manifest(outdir / "manifest.txt", {
        "command": "transform",
        "input_path": str(Path(_require_input(args)).resolve()),
        "basis_path": str(args.basis.resolve()),
        "output_dir": str(args.output_dir) if args.output_dir else "",
        "has_header": str(args.has_header).lower(),
        "label_column": args.label_column or "",
    })
    print(f"transform: wrote {projected.shape[1]} samples x {projected.shape[0]} "
          f"coordinates -> {outdir}")
    return 0


def _epsilon_grid(args, data: DataMatrix) -> list[float]:
    if args.eps_grid != "auto":
        try:
            grid = [float(part) for part in args.eps_grid.split(",") if part.strip()]
        except ValueError:
            raise ConfigError(
                f"--eps-grid expects comma-separated numbers or 'auto', got {args.eps_grid!r}"
            ) from None
        if not grid or any(value <= 0 for value in grid):
            raise ConfigError("--eps-grid values must all be > 0")
        return grid
    scale = float(squared_l2_cost(data, data).values.mean())
    return list(np.geomspace(1e-3, 1e2, 8) * scale)


def cmd_evaluate(args) -> int:
    if args.label_column is None:
        raise ConfigError("evaluate needs --label-column")
    if args.k is None:
        raise ConfigError("--k is required for evaluate (comma-separated values allowed)")
    seed = _seed(args)
    dataset = ingest_csv(_require_input(args), has_header=args.has_header,
                         label_column=args.label_column)
    if not isinstance(dataset, LabeledDataset):
        raise ConfigError("evaluate needs a labeled dataset")
    ks = _parse_int_list(args.k, "--k")
    if any(k >= dataset.data.d for k in ks):
        raise ConfigError(f"every k must be < d={dataset.data.d}, got {ks}")
    spec = SplitSpec(train_fraction=args.train_frac, n_repeats=args.splits, seed=seed)
    inner_seed = int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])
    inner_spec = SplitSpec(train_fraction=args.train_frac,
                           n_repeats=args.inner_splits, seed=inner_seed)
    grid = [args.epsilon] if args.epsilon else _epsilon_grid(args, dataset.data)

    outdir = _outdir(args, "ewca-evaluate")
    columns = ["k", "epsilon", "mean", "q1", "q3", "method"]
    rows: list[dict] = []

    def emit(handle, k, epsilon, report, method):
        row = {"k": k, "epsilon": epsilon, "mean": report.mean,
               "q1": report.q1, "q3": report.q3, "method": method}
        rows.append(row)
        cells = [str(k), "" if epsilon is None else repr(float(epsilon)),
                 repr(report.mean), repr(report.q1), repr(report.q3), method]
        handle.write(",".join(cells) + "\n")
        handle.flush()

    raw_report = evaluate_embedding(dataset, spec, n_jobs=args.jobs)
    results_path = outdir / "results.csv"
    with open(results_path, "w") as handle:
        handle.write(f"# produced by: ewca evaluate (version {__version__})\n")
        handle.write(",".join(columns) + "\n")
        # partial results stay on disk if a sweep is interrupted
        for k in ks:
            emit(handle, k, None, raw_report, "raw")
            pca_report = evaluate_embedding(
                dataset, spec, fitter=pca_fitter(k, args.center),
                refit_per_split=args.refit, n_jobs=args.jobs,
            )
            emit(handle, k, None, pca_report, "pca")
            if args.full_grid:
                chosen = list(grid)
            elif len(grid) == 1:
                chosen = [grid[0]]
            else:
                select_rng = np.random.Generator(
                    np.random.Philox(np.random.SeedSequence([seed, 2, k]))
                )
                train_idx, _ = stratified_split(dataset.labels, args.train_frac, select_rng)
                chosen = [select_epsilon(
                    dataset.subset(train_idx), grid, k, inner_spec,
                    base_config=_solver_config(args, grid[0], k),
                    algo=args.algo, n_jobs=args.jobs,
                )]
            for epsilon in chosen:
                config = _solver_config(args, float(epsilon), k)
                report = evaluate_embedding(
                    dataset, spec, fitter=ewca_fitter(config, args.algo),
                    refit_per_split=args.refit, n_jobs=args.jobs,
                )
                emit(handle, k, float(epsilon), report, "ewca")

    write_manifest(outdir / "manifest.txt", {
        "command": "evaluate",
        "input_path": str(Path(args.input).resolve()),
        "output_dir": str(args.output_dir) if args.output_dir else "",
        "algo": args.algo,
        "k": args.k,
        "epsilon": "" if args.epsilon is None else float(args.epsilon),
        "eps_grid": args.eps_grid,
        "full_grid": str(args.full_grid).lower(),
        "refit_per_split": str(args.refit).lower(),
        "splits": args.splits,
        "inner_splits": args.inner_splits,
        "train_frac": float(args.train_frac),
        "seed": seed,
        "jobs": args.jobs,
    })
    if args.plot:
        from . import figures

        if args.full_grid and len(grid) > 1:
            figures.plot_error_heatmap(rows, outdir / "errors.png")
        else:
            figures.plot_error_vs_k(rows, outdir / "errors.png")
    best = min((r for r in rows if r["method"] == "ewca"), key=lambda r: r["mean"])
    print(f"evaluate: {len(rows)} rows -> {results_path} "
          f"(best ewca mean error {best['mean']:.4f} at k={best['k']})")
    return 0


def cmd_benchmark(args) -> int:
    if args.epsilon is None:
        raise ConfigError("--epsilon is required for benchmark")
    if args.k is None:
        raise ConfigError("--k is required for benchmark")
    args.k = _int_arg(args.k, "--k")
    seed = _seed(args)
    data, _ = _load_features(args)
    dims = sorted(_parse_int_list(args.dims, "--dims"))
    algos = [part.strip() for part in args.algos.split(",") if part.strip()]
    config = _solver_config(args, args.epsilon, args.k)
    records = timing_sweep(data, dims, args.k, config, algos=algos,
                           repeats=args.repeats, seed=seed)
    table = aggregate_timings(records)
    outdir = _outdir(args, "ewca-benchmark")
    rows = [[r.algo, r.d, r.mean, r.q1, r.q3] for r in table]
    write_table_csv(outdir / "timing.csv", ["algo", "d", "mean", "q1", "q3"], rows,
                    "benchmark")
    write_manifest(outdir / "manifest.txt", {
        "command": "benchmark",
        "input_path": str(Path(args.input).resolve()),
        "output_dir": str(args.output_dir) if args.output_dir else "",
        "dims": ",".join(str(d) for d in dims),
        "algos": ",".join(algos),
        "k": args.k,
        "epsilon": float(args.epsilon),
        "repeats": args.repeats,
        "seed": seed,
    })
    if args.plot:
        from . import figures

        figures.plot_timing(
            [{"algo": r.algo, "d": r.d, "mean": r.mean, "q1": r.q1, "q3": r.q3}
             for r in table],
            outdir / "timing.png",
        )
    print(f"benchmark: {len(table)} rows -> {outdir / 'timing.csv'}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"ewca: configuration error: {exc}", file=sys.stderr)
        return 3
    except (ParseError, OSError) as exc:
        print(f"ewca: I/O error: {exc}", file=sys.stderr)
        return 2
    except EwcaError as exc:
        print(f"ewca: error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("ewca: interrupted, partial results were flushed", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
