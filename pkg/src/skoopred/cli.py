"""Command-line interface.

Subcommands:

* ``run CONFIG``      one experiment spec (JSON), artifacts to its output_dir
* ``sweep DIR``       every ``*.json`` spec in a directory
* ``bench CONFIG``    vanilla-vs-skoop overhead table
* ``inspect DUMP``    fit the operator to a saved snapshot dump, print spectrum

Exit codes: 0 completed, 2 invalid config, 3 divergence guard tripped,
4 external-denoiser bridge error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .bridge import BridgeError
from .config import SCHEMA_HELP, ConfigError, load_spec
from .harness import EXIT_BRIDGE, EXIT_CONFIG, EXIT_OK, benchmark_overhead, run_experiment
from .io import read_snapshots_csv
from .koopman import EigenvalueError, SnapshotWindow, estimate_koopman

__all__ = ["main"]

_OVERRIDE_FLAGS = (
    # (flag, config key, parser)
    ("--mode", "modes", str),
    ("--gamma0", "gamma0", "gamma0"),
    ("--lambda", "lambda", float),
    ("--beta", "beta", float),
    ("--w", "w", int),
    ("--r", "r", int),
    ("--max-iters", "max_iters", int),
    ("--seed", "seed", int),
    ("--denoiser", "denoiser", str),
    ("--external-denoiser-cmd", "external_denoiser_cmd", str),
)


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    for flag, key, kind in _OVERRIDE_FLAGS:
        parser.add_argument(flag, dest=f"ov_{key}", default=None, metavar=key.upper())


def _collect_overrides(args: argparse.Namespace) -> dict:
    overrides = {}
    for _, key, kind in _OVERRIDE_FLAGS:
        value = getattr(args, f"ov_{key}", None)
        if value is None:
            continue
        if kind is int:
            value = int(value)
        elif kind is float:
            value = float(value)
        elif kind == "gamma0":
            value = value if value == "auto" else float(value)
        overrides[key] = value
    return overrides


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skoopred",
        description="RED gradient descent with spectral-radius-monitored step size",
        epilog="config keys:\n" + SCHEMA_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment spec")
    p_run.add_argument("config", help="path to a JSON experiment spec")
    _add_override_flags(p_run)

    p_sweep = sub.add_parser("sweep", help="run every *.json spec in a directory")
    p_sweep.add_argument("directory")
    _add_override_flags(p_sweep)

    p_bench = sub.add_parser("bench", help="vanilla-vs-skoop overhead benchmark")
    p_bench.add_argument("config")
    _add_override_flags(p_bench)

    p_inspect = sub.add_parser("inspect", help="print the fitted operator spectrum of a snapshot dump")
    p_inspect.add_argument("dump", help="snapshots CSV written by a skoop run")
    p_inspect.add_argument("--rel-tol", type=float, default=1e-10)
    p_inspect.add_argument("--center", action="store_true")
    p_inspect.add_argument("--top", type=int, default=10, help="eigenvalues to print")
    return parser


def _print_summaries(result) -> None:
    for s in result.summaries:
        peak = "" if s.peak_psnr_db is None else f" peak {s.peak_psnr_db:.2f} dB @ t={s.peak_iteration}"
        final = "" if s.final_psnr_db is None else f" final {s.final_psnr_db:.2f} dB"
        print(
            f"[{s.mode}] {s.status}: {s.iterations} iterations,"
            f"{peak}{final}, gamma {s.final_gamma:.3e}, {s.shrinks}/{s.checkpoints} shrinks"
        )


def _cmd_run(args) -> int:
    spec = load_spec(args.config, _collect_overrides(args))
    result = run_experiment(spec)
    _print_summaries(result)
    print(f"artifacts in {result.out_dir}")
    return result.exit_code


def _cmd_sweep(args) -> int:
    directory = Path(args.directory)
    configs = sorted(directory.glob("*.json"))
    if not configs:
        print(f"no *.json specs in {directory}", file=sys.stderr)
        return EXIT_CONFIG
    overrides = _collect_overrides(args)
    worst = EXIT_OK
    for path in configs:
        print(f"== {path.name} ==")
        try:
            result = run_experiment(load_spec(path, overrides))
        except ConfigError as e:
            print(e, file=sys.stderr)
            worst = max(worst, EXIT_CONFIG)
            continue
        _print_summaries(result)
        worst = max(worst, result.exit_code)
    return worst


def _cmd_bench(args) -> int:
    spec = load_spec(args.config, _collect_overrides(args))
    report, path = benchmark_overhead(spec)
    print(report)
    print(f"table written to {path}")
    return EXIT_OK


def _cmd_inspect(args) -> int:
    snapshots = read_snapshots_csv(args.dump)
    window = SnapshotWindow(snapshots.shape[0])
    for row in snapshots:
        window.push(row)
    est = estimate_koopman(window, rel_tol=args.rel_tol, center=args.center)
    print(f"snapshots: {snapshots.shape[0]} x {snapshots.shape[1]}")
    print(f"spectral radius: {est.spectral_radius:.9g}")
    print(f"effective rank: {est.effective_rank} (pairs used: {est.pairs_used})")
    if est.degenerate:
        print("degenerate: all-zero snapshot matrix")
        return EXIT_OK
    eigs = np.linalg.eigvals(est.matrix)
    order = np.argsort(-np.abs(eigs))[: max(args.top, 0)]
    print("top eigenvalues (modulus, real, imag):")
    for i in order:
        lam = eigs[i]
        print(f"  {abs(lam):.9g}  {lam.real:+.9g}  {lam.imag:+.9g}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "inspect":
            return _cmd_inspect(args)
    except ConfigError as e:
        print(e, file=sys.stderr)
        return EXIT_CONFIG
    except BridgeError as e:
        print(f"external denoiser bridge error: {e}", file=sys.stderr)
        return EXIT_BRIDGE
    except (FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError("unreachable")


if __name__ == "__main__":
    raise SystemExit(main())
