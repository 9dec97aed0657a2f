"""Command-line pipeline: generate, bin, decompose, classify, denoise, sweep.

One executable, subcommand style. All randomness flows from explicit seeds
(the scene seed for generation, the solver seed for decomposition); every run
writes a JSON echo of its fully resolved configuration next to its first
output, and reruns with identical flags produce byte-identical data files
(wall-clock timing goes to stderr, never into data outputs, except for the
sweep results CSV whose schema includes a seconds column).
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .denoise import (
    DEFAULT_QUANTILE,
    filter_events,
    quantile_threshold,
    score_events,
    write_report_csv,
)
from .evaluation import (
    TASK_NOISE,
    TASK_OBJECTS,
    auc,
    binary_task,
    extract_features,
    save_model,
    sweep_lambdas,
    temporal_split,
    train_svm,
    write_results_csv,
)
from .events import (
    bin_to_tensor,
    parse_events,
    tensor_density,
    write_events_csv,
    write_tensor_dump,
)
from .solver import SolverConfig, load_checkpoint, save_checkpoint, solve, write_trace_csv
from .synth import generate, load_scene_spec, scene_spec_to_ini

logger = logging.getLogger("evtensor")


def _parse_geometry(text: str) -> tuple[int, int]:
    try:
        rows, cols = text.lower().split("x")
        return int(rows), int(cols)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"geometry must look like 346x260, got {text!r}"
        ) from None


def _parse_grid(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated numbers, got {text!r}") from None


def _echo_config(args: argparse.Namespace, primary_output: str) -> None:
    """Record the resolved run configuration next to the first output."""
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    resolved["version"] = __version__
    path = Path(primary_output).with_suffix(".config.json")
    path.write_text(json.dumps(resolved, indent=2, sort_keys=True, default=str) + "\n",
                    encoding="utf-8")
    logger.info("resolved config written to %s", path)


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    return SolverConfig(
        f_max=args.f_max,
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        s_max=args.s_max,
        grow_tol=args.grow_tol,
        conv_tol=args.conv_tol,
        seed=args.seed,
        init_scale=args.init_scale,
        clamp_x=args.clamp_x,
    )


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--f-max", type=int, default=6, help="maximal latent rank (default 6)")
    p.add_argument("--lambda1", type=float, default=0.1,
                   help="L1 coefficient; 0 gives the FCTN ablation (default 0.1)")
    p.add_argument("--lambda2", type=float, default=0.1,
                   help="L2/proximal coefficient (default 0.1)")
    p.add_argument("--s-max", type=int, default=1000, help="iteration cap (default 1000)")
    p.add_argument("--grow-tol", type=float, default=1e-2,
                   help="relative-change threshold for rank growth (default 1e-2)")
    p.add_argument("--conv-tol", type=float, default=1e-3,
                   help="relative-change threshold for convergence (default 1e-3)")
    p.add_argument("--init-scale", type=float, default=0.1,
                   help="factor initialization magnitude (default 0.1)")
    p.add_argument("--clamp-x", action="store_true",
                   help="re-clamp observed 1-entries into X after each blend update")


def cmd_gen(args) -> int:
    spec = load_scene_spec(args.spec)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    stream = generate(spec)
    write_events_csv(stream, args.out)
    echo_path = Path(args.out).with_suffix(".scene.cfg")
    echo_path.write_text(scene_spec_to_ini(spec), encoding="utf-8")
    _echo_config(args, args.out)
    logger.info("wrote %d events to %s (spec echo %s)", len(stream), args.out, echo_path)
    return 0


def cmd_bin(args) -> int:
    stream = parse_events(args.events, args.geometry)
    tensor = bin_to_tensor(stream, args.frames)
    write_tensor_dump(tensor, args.out)
    _echo_config(args, args.out)
    print(f"dims: {tensor.dims[0]} {tensor.dims[1]} {tensor.dims[2]}")
    print(f"density: {tensor_density(tensor):.6f}")
    return 0


def cmd_decompose(args) -> int:
    cfg = _solver_config(args)
    stream = parse_events(args.events, args.geometry)
    tensor = bin_to_tensor(stream, args.frames)
    start = time.perf_counter()
    factors, state = solve(tensor, cfg)
    elapsed = time.perf_counter() - start
    save_checkpoint(factors, args.checkpoint)
    metadata = {
        "model": "FCTN-ablation" if cfg.lambda1 == 0.0 else "ENTN",
        "lambda1": cfg.lambda1,
        "lambda2": cfg.lambda2,
        "f_max": cfg.f_max,
        "seed": cfg.seed,
        "converged": str(state.converged).lower(),
    }
    write_trace_csv(state, args.trace, metadata)
    _echo_config(args, args.checkpoint)
    last = state.trace[-1]
    print(f"final rank: {state.f}")
    print(f"iterations: {state.s}")
    print(f"final rel_change: {last.rel_change:.6g}")
    print(f"converged: {str(state.converged).lower()}")
    logger.info("decomposition took %.2f s", elapsed)
    return 0


def cmd_classify(args) -> int:
    factors = load_checkpoint(args.checkpoint)
    rows, cols, n_bins = factors.dims
    stream = parse_events(args.events, (rows, cols))
    if not stream.has_labels:
        logger.error("classification needs a label column in %s", args.events)
        return 1
    tensor = bin_to_tensor(stream, n_bins)
    feats = temporal_split(extract_features(stream, tensor, factors))
    mask, y = binary_task(feats.labels, args.task)
    tr = mask & feats.is_train
    te = mask & ~feats.is_train
    y_tr = y[feats.is_train[mask]]
    y_te = y[~feats.is_train[mask]]
    model = train_svm(feats.features[tr], y_tr,
                      reg_lambda=args.svm_lambda, epochs=args.svm_epochs)
    value = auc(model.decision_scores(feats.features[te]), y_te)
    report = "\n".join([
        f"task: {args.task}",
        f"auc: {value:.17g}",
        f"train events: {len(y_tr)}",
        f"test events: {len(y_te)}",
        f"feature length: {feats.features.shape[1]}",
    ]) + "\n"
    Path(args.report).write_text(report, encoding="utf-8")
    if args.model:
        save_model(model, args.model)
    _echo_config(args, args.report)
    sys.stdout.write(report)
    return 0


def cmd_denoise(args) -> int:
    factors = load_checkpoint(args.checkpoint)
    rows, cols, n_bins = factors.dims
    stream = parse_events(args.events, (rows, cols))
    tensor = bin_to_tensor(stream, n_bins)
    scores = score_events(stream, tensor, factors)
    tau = args.tau if args.tau is not None else quantile_threshold(scores, args.quantile)
    filtered, report = filter_events(stream, scores, tau)
    if filtered is not None:
        write_events_csv(filtered, args.out)
    else:
        logger.warning("threshold %.6g removed every event; no filtered CSV written", tau)
    write_report_csv(stream, report, args.report)
    _echo_config(args, args.report)
    print(report.summary())
    return 0 if filtered is not None else 1


def cmd_sweep(args) -> int:
    stream = parse_events(args.events, args.geometry)
    tensor = bin_to_tensor(stream, args.frames)
    base = _solver_config(args)
    grid = [(l1, l2) for l1 in args.lambda1_grid for l2 in args.lambda2_grid]
    result = sweep_lambdas(tensor, stream, grid, base, task=args.task)
    write_results_csv(result, args.out)
    _echo_config(args, args.out)
    print(f"cells: {len(result.cells)}")
    print(f"overall gap: {result.overall_gap():.4f}%")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evtensor",
        description="Event-stream representation learning with a 3rd-order tensor network.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for info, -vv for debug (logs go to stderr)")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS worker threads (default: library default)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a labeled synthetic scene CSV")
    p.add_argument("--spec", required=True, help="INI scene file")
    p.add_argument("--out", required=True, help="output event CSV")
    p.add_argument("--seed", type=int, default=None, help="override the scene seed")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bin", help="bin a CSV into the tensor dump format")
    p.add_argument("--events", required=True)
    p.add_argument("--geometry", type=_parse_geometry, required=True, metavar="IxJ")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bin)

    p = sub.add_parser("decompose", help="fit the factor triple to a binned stream")
    p.add_argument("--events", required=True)
    p.add_argument("--geometry", type=_parse_geometry, required=True, metavar="IxJ")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--checkpoint", required=True, help="output factor checkpoint")
    p.add_argument("--trace", required=True, help="output trace CSV")
    p.add_argument("--seed", type=int, default=0)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("classify", help="AUC of a linear SVM on latent features")
    p.add_argument("--events", required=True, help="labeled event CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--task", choices=[TASK_OBJECTS, TASK_NOISE], default=TASK_OBJECTS)
    p.add_argument("--report", required=True, help="output report file")
    p.add_argument("--model", default=None, help="optional output model file")
    p.add_argument("--svm-lambda", type=float, default=1e-3)
    p.add_argument("--svm-epochs", type=int, default=500)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("denoise", help="filter low-reconstruction events")
    p.add_argument("--events", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tau", type=float, default=None, help="absolute score threshold")
    p.add_argument("--quantile", type=float, default=DEFAULT_QUANTILE,
                   help="quantile threshold when --tau is not given (default 0.2)")
    p.add_argument("--out", required=True, help="filtered event CSV")
    p.add_argument("--report", required=True, help="per-event report CSV")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("sweep", help="AUC over a (lambda1, lambda2) grid")
    p.add_argument("--events", required=True, help="labeled event CSV")
    p.add_argument("--geometry", type=_parse_geometry, required=True, metavar="IxJ")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--lambda1-grid", type=_parse_grid, required=True, metavar="A,B,...")
    p.add_argument("--lambda2-grid", type=_parse_grid, required=True, metavar="A,B,...")
    p.add_argument("--task", choices=[TASK_OBJECTS, TASK_NOISE], default=TASK_OBJECTS)
    p.add_argument("--out", required=True, help="results CSV")
    p.add_argument("--seed", type=int, default=0)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_sweep)

    return parser


@contextlib.contextmanager
def _thread_cap(threads):
    if threads is None:
        yield
        return
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        logger.warning("threadpoolctl not installed; --threads ignored")
        yield
        return
    with threadpool_limits(limits=threads):
        yield


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_cap(args.threads):
            return args.func(args)
    except BrokenPipeError:
        return 0
    except Exception as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
