"""Flat experiment configuration: JSON document, published schema, validation.

A config file is a single flat JSON object of scalar values (``modes`` may
also be a JSON list of strings). Unknown keys are rejected and every problem
is reported, not just the first. CLI flags override file values before
validation runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

__all__ = ["ConfigError", "ExperimentSpec", "SCHEMA_HELP", "load_spec", "parse_spec"]

TASKS = ("gaussian_deblur", "motion_deblur", "superresolution")
MODES = ("vanilla", "equivariant", "skoop")
INITS = ("auto", "observed", "bicubic")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``problems`` lists every failure."""

    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in problems))
        self.problems = list(problems)


@dataclass
class ExperimentSpec:
    """Validated experiment description (one measurement, one or more runs)."""

    task: str
    image: str
    output_dir: str
    kernel_size: int = 9
    kernel_sigma: float = 1.0
    kernel_path: str | None = None
    sr_factor: int = 2
    noise_sigma: float = 0.0
    modes: tuple[str, ...] = ("skoop",)
    denoiser: str = "gaussian:1.5"
    denoiser_strength: float | None = None
    external_denoiser_cmd: str | None = None
    lam: float = 0.5
    gamma0: float | str = "auto"
    beta: float = 2.0
    w: int = 30
    r: int = 10
    max_iters: int = 1000
    seed: int = 0
    divergence_guard: float = 1e8
    init: str = "auto"
    feature_stride: int = 1
    center_features: bool = False
    save_png: bool = True
    save_snapshots: bool = True


# key -> (spec field, kind, description); kind drives coercion + checking
SCHEMA = {
    "task": ("task", "enum:task", f"one of {', '.join(TASKS)}"),
    "image": ("image", "str", "path to the clean input image (.png or .skimg)"),
    "output_dir": ("output_dir", "str", "directory for run artifacts (created if missing)"),
    "kernel_size": ("kernel_size", "int>=1", "generated Gaussian kernel extent"),
    "kernel_sigma": ("kernel_sigma", "float>0", "generated Gaussian kernel sigma"),
    "kernel_path": ("kernel_path", "str", "kernel text file (motion_deblur only)"),
    "sr_factor": ("sr_factor", "int>=2", "superresolution decimation factor"),
    "noise_sigma": ("noise_sigma", "float>=0", "measurement noise standard deviation"),
    "modes": ("modes", "modes", f"subset of {', '.join(MODES)} (list or comma string)"),
    "denoiser": ("denoiser", "str", "denoiser spec, e.g. gaussian:1.5 or external"),
    "denoiser_strength": ("denoiser_strength", "float>=0", "advisory sigma_d"),
    "external_denoiser_cmd": ("external_denoiser_cmd", "str", "command line for the external peer"),
    "lambda": ("lam", "float>0", "regularization weight"),
    "gamma0": ("gamma0", "gamma0", 'initial step size, positive number or "auto"'),
    "beta": ("beta", "float>0", "step-shrink decay rate"),
    "w": ("w", "int>=2", "snapshot window size"),
    "r": ("r", "int>=1", "checkpoint stride"),
    "max_iters": ("max_iters", "int>=1", "iteration budget"),
    "seed": ("seed", "int", "seed for all randomness in the experiment"),
    "divergence_guard": ("divergence_guard", "float>0", "norm threshold that halts a run"),
    "init": ("init", "init", "auto | observed | bicubic | path to an image"),
    "feature_stride": ("feature_stride", "int>=1", "iterations between feature snapshots"),
    "center_features": ("center_features", "bool", "mean-subtract the window before the fit"),
    "save_png": ("save_png", "bool", "also write quantized PNGs"),
    "save_snapshots": ("save_snapshots", "bool", "dump the final feature window to CSV"),
}

SCHEMA_HELP = "\n".join(f"{k:>22}: {desc}" for k, (_, _, desc) in SCHEMA.items())

_REQUIRED = ("task", "image", "output_dir")


def _coerce(key: str, kind: str, value, problems: list[str]):
    def fail(msg):
        problems.append(f"{key}: {msg} (got {value!r})")
        return None

    if kind == "str":
        return value if isinstance(value, str) and value else fail("expected a non-empty string")
    if kind == "bool":
        return value if isinstance(value, bool) else fail("expected true or false")
    if kind == "int":
        return value if isinstance(value, int) and not isinstance(value, bool) else fail("expected an integer")
    if kind.startswith("int>="):
        lo = int(kind[5:])
        if isinstance(value, int) and not isinstance(value, bool) and value >= lo:
            return value
        return fail(f"expected an integer >= {lo}")
    if kind in ("float>0", "float>=0"):
        lo_ok = (lambda v: v > 0) if kind == "float>0" else (lambda v: v >= 0)
        if isinstance(value, (int, float)) and not isinstance(value, bool) and lo_ok(value):
            return float(value)
        return fail(f"expected a number {'>' if kind == 'float>0' else '>='} 0")
    if kind == "enum:task":
        return value if value in TASKS else fail(f"expected one of {TASKS}")
    if kind == "gamma0":
        if value == "auto":
            return "auto"
        if isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0:
            return float(value)
        return fail('expected a positive number or "auto"')
    if kind == "modes":
        if isinstance(value, str):
            value = [m.strip() for m in value.split(",") if m.strip()]
        if not isinstance(value, list) or not value:
            return fail("expected a list of modes or a comma-separated string")
        bad = [m for m in value if m not in MODES]
        if bad:
            return fail(f"unknown modes {bad}; expected a subset of {MODES}")
        return tuple(value)
    if kind == "init":
        if not isinstance(value, str) or not value:
            return fail("expected a string")
        return value  # path validity checked later
    raise AssertionError(f"unhandled schema kind {kind}")


def parse_spec(raw: dict, base_dir: Path | None = None) -> ExperimentSpec:
    """Validate a flat config dict, reporting every problem at once."""
    problems: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["configuration must be a flat JSON object"])
    unknown = sorted(set(raw) - set(SCHEMA))
    for key in unknown:
        problems.append(f"{key}: unknown key")
    missing = [k for k in _REQUIRED if k not in raw]
    for key in missing:
        problems.append(f"{key}: required key is missing")

    values = {}
    for key, value in raw.items():
        if key not in SCHEMA:
            continue
        field_name, kind, _ = SCHEMA[key]
        coerced = _coerce(key, kind, value, problems)
        if coerced is not None:
            values[field_name] = coerced

    base = Path(base_dir) if base_dir is not None else Path.cwd()

    def resolve(p: str) -> str:
        path = Path(p)
        return str(path if path.is_absolute() else base / path)

    if not problems:
        spec = ExperimentSpec(**values)
        spec.image = resolve(spec.image)
        spec.output_dir = resolve(spec.output_dir)
        if not Path(spec.image).exists():
            problems.append(f"image: file not found: {spec.image}")
        if spec.task == "motion_deblur":
            if spec.kernel_path is None:
                problems.append("kernel_path: required for task motion_deblur")
            else:
                spec.kernel_path = resolve(spec.kernel_path)
                if not Path(spec.kernel_path).exists():
                    problems.append(f"kernel_path: file not found: {spec.kernel_path}")
        if spec.denoiser.strip().lower() == "external" and not spec.external_denoiser_cmd:
            problems.append("external_denoiser_cmd: required when denoiser is external")
        if spec.init not in INITS:
            spec.init = resolve(spec.init)
            if not Path(spec.init).exists():
                problems.append(
                    f"init: expected one of {INITS} or an existing image path, got {raw.get('init')!r}"
                )
    if problems:
        raise ConfigError(problems)
    return spec


def load_spec(path, overrides: dict | None = None) -> ExperimentSpec:
    """Read a JSON config file and apply CLI overrides before validation."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except json.JSONDecodeError as e:
        raise ConfigError([f"config file is not valid JSON: {e}"]) from None
    if overrides:
        raw = {**raw, **overrides}
    return parse_spec(raw, base_dir=path.parent)


def spec_fields() -> list[str]:
    return [f.name for f in fields(ExperimentSpec)]
