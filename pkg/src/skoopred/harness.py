"""Experiment orchestration: build operators from a spec, run, write artifacts.

A run directory receives the simulated measurement, one reconstruction and
trajectory CSV per mode, an optional snapshot dump, and a summary in both
JSON and CSV with the peak/final PSNR shape used for reporting.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from . import io as skio
from .bridge import BridgeError, DenoiserBridge
from .config import ExperimentSpec
from .denoisers import Denoiser, ExternalDenoiser, make_denoiser
from .forward import Deblur, ForwardModel, Superresolve, gaussian_kernel, load_kernel, simulate_measurement
from .image import Image, PSNR_EXACT_DB
from .solver import OverheadReport, RunConfig, RunResult, RunStatus, overhead_report, run

__all__ = ["ExperimentResult", "ModeSummary", "benchmark_overhead", "run_experiment"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_BRIDGE = 4

SUMMARY_COLUMNS = (
    "mode",
    "status",
    "iterations",
    "peak_psnr_db",
    "peak_iteration",
    "final_psnr_db",
    "final_gamma",
    "checkpoints",
    "shrinks",
)


@dataclass
class ModeSummary:
    mode: str
    status: str
    iterations: int
    peak_psnr_db: float | None
    peak_iteration: int | None
    final_psnr_db: float | None
    final_gamma: float
    checkpoints: int
    shrinks: int


@dataclass
class ExperimentResult:
    out_dir: Path
    summaries: list[ModeSummary]
    exit_code: int
    results: dict  # mode -> RunResult


def build_model(spec: ExperimentSpec) -> ForwardModel:
    if spec.task == "gaussian_deblur":
        return Deblur(gaussian_kernel(spec.kernel_size, spec.kernel_sigma))
    if spec.task == "motion_deblur":
        return Deblur(load_kernel(spec.kernel_path, normalize=True))
    if spec.task == "superresolution":
        return Superresolve(gaussian_kernel(spec.kernel_size, spec.kernel_sigma), spec.sr_factor)
    raise ValueError(f"unknown task {spec.task!r}")


def build_denoiser(spec: ExperimentSpec, shape: tuple[int, int, int]) -> Denoiser:
    if spec.denoiser.strip().lower() == "external":
        import shlex

        cmd = shlex.split(spec.external_denoiser_cmd)
        strength = spec.denoiser_strength if spec.denoiser_strength is not None else 0.0
        return ExternalDenoiser(DenoiserBridge.spawn(cmd, shape, strength))
    return make_denoiser(spec.denoiser, strength=spec.denoiser_strength)


def _resolve_init(spec: ExperimentSpec) -> Image | str:
    if spec.init in ("auto", "observed", "bicubic"):
        return spec.init
    return skio.load_image(spec.init)


def _summarize(mode: str, result: RunResult) -> ModeSummary:
    rows = result.trajectory.rows
    psnrs = [(r.psnr_db, r.t) for r in rows if r.psnr_db is not None and not math.isnan(r.psnr_db)]
    peak = peak_t = final = None
    if psnrs:
        peak, peak_t = max(psnrs, key=lambda p: p[0])
        final = psnrs[-1][0] if psnrs[-1][1] == rows[-1].t else None
    events = result.trajectory.checkpoints
    return ModeSummary(
        mode=mode,
        status=result.trajectory.status.value,
        iterations=len(rows),
        peak_psnr_db=peak,
        peak_iteration=peak_t,
        final_psnr_db=final,
        final_gamma=rows[-1].gamma if rows else result.trajectory.gamma0,
        checkpoints=len(events),
        shrinks=sum(1 for e in events if e.shrunk),
    )


def _fmt_summary_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v) and v > 0:
            return repr(PSNR_EXACT_DB)
        return repr(v)
    return str(v)


def _write_summary(out_dir: Path, summaries: list[ModeSummary]) -> None:
    rows = []
    for s in summaries:
        rows.append(
            {
                "mode": s.mode,
                "status": s.status,
                "iterations": s.iterations,
                "peak_psnr_db": s.peak_psnr_db,
                "peak_iteration": s.peak_iteration,
                "final_psnr_db": s.final_psnr_db,
                "final_gamma": s.final_gamma,
                "checkpoints": s.checkpoints,
                "shrinks": s.shrinks,
            }
        )
    sanitized = [
        {k: (PSNR_EXACT_DB if isinstance(v, float) and math.isinf(v) and v > 0 else v) for k, v in row.items()}
        for row in rows
    ]
    (out_dir / "summary.json").write_text(json.dumps(sanitized, indent=2) + "\n", encoding="utf-8")
    lines = [",".join(SUMMARY_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt_summary_value(row[c]) for c in SUMMARY_COLUMNS))
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _run_config(spec: ExperimentSpec, mode: str, model, denoiser, clean: Image, init) -> RunConfig:
    return RunConfig(
        model=model,
        denoiser=denoiser,
        lam=spec.lam,
        mode=mode,
        gamma0=spec.gamma0,
        beta=spec.beta,
        w=spec.w,
        r=spec.r,
        max_iters=spec.max_iters,
        seed=spec.seed,
        ground_truth=clean,
        divergence_guard=spec.divergence_guard,
        init=init,
        feature_stride=spec.feature_stride,
        center_features=spec.center_features,
    )


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    clean = skio.load_image(spec.image)
    model = build_model(spec)
    measurement = simulate_measurement(model, clean, spec.noise_sigma, spec.seed)
    skio.save_image(measurement.b, out_dir / "measurement.skimg")
    if spec.save_png:
        skio.save_image(measurement.b, out_dir / "measurement.png")

    init = _resolve_init(spec)
    summaries: list[ModeSummary] = []
    results: dict[str, RunResult] = {}
    exit_code = EXIT_OK
    for mode in spec.modes:
        denoiser = build_denoiser(spec, measurement.b.shape)
        cfg = _run_config(spec, mode, model, denoiser, clean, init)
        result = run(cfg, measurement.b)
        results[mode] = result
        skio.write_trajectory_csv(result.trajectory, out_dir / f"trajectory_{mode}.csv")
        skio.save_image(result.image, out_dir / f"reconstruction_{mode}.skimg")
        if spec.save_png and result.image.is_finite():
            skio.save_image(result.image, out_dir / f"reconstruction_{mode}.png")
        if spec.save_snapshots and result.snapshots is not None:
            skio.write_snapshots_csv(result.snapshots, out_dir / f"snapshots_{mode}.csv")
        if isinstance(denoiser, ExternalDenoiser):
            denoiser.bridge.close()
        summaries.append(_summarize(mode, result))
        status = result.trajectory.status
        if status is RunStatus.BRIDGE_ERROR:
            exit_code = EXIT_BRIDGE
        elif status is RunStatus.DIVERGED and exit_code != EXIT_BRIDGE:
            exit_code = EXIT_DIVERGED
    _write_summary(out_dir, summaries)
    return ExperimentResult(out_dir=out_dir, summaries=summaries, exit_code=exit_code, results=results)


def benchmark_overhead(spec: ExperimentSpec) -> tuple[OverheadReport, Path]:
    """Run vanilla and skoop on identical inputs and emit the overhead table."""
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    clean = skio.load_image(spec.image)
    model = build_model(spec)
    measurement = simulate_measurement(model, clean, spec.noise_sigma, spec.seed)
    init = _resolve_init(spec)
    records = {}
    warmed = False
    for mode in ("vanilla", "skoop"):
        denoiser = build_denoiser(spec, measurement.b.shape)
        cfg = _run_config(spec, mode, model, denoiser, clean, init)
        if not warmed:
            # populate transfer-function caches so the timed runs are comparable
            warm = _run_config(spec, "skoop", model, denoiser, clean, init)
            warm.max_iters = min(5, spec.max_iters)
            run(warm, measurement.b)
            warmed = True
        records[mode] = run(cfg, measurement.b).trajectory
        if isinstance(denoiser, ExternalDenoiser):
            denoiser.bridge.close()
        status = records[mode].status
        if status is RunStatus.BRIDGE_ERROR:
            raise BridgeError(f"benchmark {mode} run ended with a bridge error")
        if status is not RunStatus.COMPLETED:
            raise RuntimeError(f"benchmark {mode} run diverged; choose a stable configuration")
    report = overhead_report(records["vanilla"], records["skoop"])
    path = out_dir / "overhead.csv"
    lines = ["phase,vanilla_mean_s,skoop_mean_s"]
    for name in ("denoise", "forward", "feature", "koopman", "other", "total"):
        v, s = report.phases[name]
        lines.append(f"{name},{v!r},{s!r}")
    lines.append(f"overhead_pct,,{report.overhead_pct!r}")
    lines.append(f"koopman_ms_per_checkpoint,,{report.koopman_ms_per_checkpoint!r}")
    lines.append(f"monitor_fraction_pct,,{report.monitor_fraction_pct!r}")
    lines.append(f"reference_monitor_fraction_pct,,{report.reference_monitor_fraction_pct!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return report, path
