"""Experiment presets, configuration parsing, CSV output and the CLI.

Configuration grammar: flat ``key = value`` lines, one pair per line, ``#``
starts a comment.  A ``preset`` key loads the named preset's values at that
point; later lines override individual fields.  Keys starting with
``result_`` are reserved for the run summary echo and are skipped on parsing,
so a summary file is itself a valid configuration reproducing its run.

Exit codes: 0 success, 1 configuration/usage error, 2 divergence,
3 I/O error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, fields, replace
from math import ceil
from pathlib import Path

import numpy as np

from . import diagnostics
from .mesh import Mesh, Parameters, build_mesh
from .model import Admissibility, cfl_max_dt, default_initial_data, validate_run
from .schemes import SimulationResult, run

__all__ = [
    "ConfigError",
    "RunConfig",
    "RunResult",
    "PRESET_NAMES",
    "preset",
    "parse_config",
    "write_energy_csv",
    "write_snapshot_csv",
    "write_summary",
    "main",
]


class ConfigError(ValueError):
    """Invalid configuration or command line."""


@dataclass(frozen=True)
class RunConfig:
    """Complete description of one simulation run.

    Exactly one of dt / cfl_fraction must be set; cfl_fraction resolves to
    the largest dt not above that fraction of the explicit stability bound
    that divides t_final into a whole number of steps.  n_steps defaults to
    t_final / dt and cannot be combined with cfl_fraction.
    """

    c1_sq: float | None = None
    c2_sq: float | None = None
    c3_sq: float | None = None
    delta: float | None = None
    alpha: float | None = None
    beta: float | None = None
    length: float | None = None
    t_final: float | None = None
    n_alpha: int | None = None
    n_damp: int | None = None
    n_beta: int | None = None
    dt: float | None = None
    cfl_fraction: float | None = None
    n_steps: int | None = None
    scheme: str = "explicit"
    observe_every: int = 100
    fit_lo: float = 0.5
    fit_hi: float = 1.0
    out_dir: str = "."
    preset: str | None = None
    cfl_override: bool = False
    verify_identity: bool = False


_PRESETS: dict[str, dict] = {}


def _register_presets() -> None:
    base = dict(
        c1_sq=1.0, c2_sq=1.0, c3_sq=1.0, delta=1.0,
        alpha=1.0, beta=2.0, length=3.0, t_final=10000.0,
        n_alpha=20, n_damp=10, n_beta=20,
        dt=0.025, n_steps=400000,
    )
    _PRESETS["equal-undamped"] = dict(base, delta=0.0)
    _PRESETS["equal-damped"] = dict(base)
    # The three mismatched-speed cases whose nominal time step would violate
    # the explicit stability bound run at 90% of that bound instead; the
    # summary records the bound next to the resolved step.
    for name, speeds in (
        ("case1", (9.0, 1.0, 4.0)),
        ("case2", (2.0, 4.0, 0.25)),
        ("case3", (2.0, 4.0, 6.0)),
    ):
        _PRESETS[name] = dict(
            base, c1_sq=speeds[0], c2_sq=speeds[1], c3_sq=speeds[2],
            dt=None, n_steps=None, cfl_fraction=0.9,
        )
    _PRESETS["case4"] = dict(base, c1_sq=2.0, c2_sq=4.0, c3_sq=2.0)
    _PRESETS["wide-damping"] = dict(
        base, alpha=0.1, beta=2.9, n_alpha=4, n_damp=100, n_beta=4,
        t_final=100.0, dt=0.025, n_steps=4000,
    )


_register_presets()
PRESET_NAMES = tuple(_PRESETS)


def preset(name: str) -> RunConfig:
    """Named experiment configuration."""
    if name not in _PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
        )
    return RunConfig(preset=name, **_PRESETS[name])


_FLOAT_KEYS = {
    "c1_sq", "c2_sq", "c3_sq", "delta", "alpha", "beta", "length", "t_final",
    "dt", "cfl_fraction", "fit_lo", "fit_hi",
}
_INT_KEYS = {"n_alpha", "n_damp", "n_beta", "n_steps", "observe_every"}
_BOOL_KEYS = {"cfl_override", "verify_identity"}
_STR_KEYS = {"scheme", "out_dir"}
_MATERIAL_KEYS = {"rho1", "rho2", "rho3", "kappa1", "kappa2", "kappa3", "damping"}


def _parse_bool(raw: str, key: str, lineno: int) -> bool:
    if raw == "true":
        return True
    if raw == "false":
        return False
    raise ConfigError(f"line {lineno}: {key} must be true or false, got {raw!r}")


def parse_config(text: str) -> RunConfig:
    """Parse the flat key = value grammar into a validated RunConfig."""
    values: dict = {}
    material: dict[str, float] = {}
    explicit_dt = explicit_cfl = False
    saw_any = False
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key.startswith("result_"):
            continue  # summary echo, not configuration
        saw_any = True
        try:
            if key == "preset":
                base = preset(raw)
                for f in fields(RunConfig):
                    values[f.name] = getattr(base, f.name)
            elif key in _FLOAT_KEYS:
                values[key] = float(raw)
                if key == "dt":
                    explicit_dt = True
                    values["cfl_fraction"] = None
                elif key == "cfl_fraction":
                    explicit_cfl = True
                    values["dt"] = None
            elif key in _INT_KEYS:
                values[key] = int(raw)
            elif key in _BOOL_KEYS:
                values[key] = _parse_bool(raw, key, lineno)
            elif key in _STR_KEYS:
                values[key] = raw
            elif key in _MATERIAL_KEYS:
                material[key] = float(raw)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ConfigError:
            raise
        except ValueError as err:
            raise ConfigError(f"line {lineno}: bad value for {key}: {err}") from err
    if not saw_any:
        raise ConfigError("empty configuration: no preset and no parameters")
    if explicit_dt and explicit_cfl:
        raise ConfigError("dt and cfl_fraction are mutually exclusive")
    if material:
        _apply_material(values, material)
    cfg = RunConfig(**values)
    validate_config(cfg)
    return cfg


def _apply_material(values: dict, material: dict[str, float]) -> None:
    missing = sorted(_MATERIAL_KEYS - material.keys())
    if missing:
        raise ConfigError(f"incomplete material data, missing: {', '.join(missing)}")
    for key in ("c1_sq", "c2_sq", "c3_sq", "delta"):
        if values.get(key) is not None:
            raise ConfigError("material data and explicit speeds are mutually exclusive")
    for i in (1, 2, 3):
        if material[f"rho{i}"] <= 0.0 or material[f"kappa{i}"] <= 0.0:
            raise ConfigError("densities and moduli must be > 0")
    values["c1_sq"] = material["kappa1"] / material["rho1"]
    values["c2_sq"] = material["kappa2"] / material["rho2"]
    values["c3_sq"] = material["kappa3"] / material["rho3"]
    values["delta"] = material["damping"] / material["rho2"]


def validate_config(cfg: RunConfig) -> None:
    required = (
        "c1_sq", "c2_sq", "c3_sq", "delta", "alpha", "beta", "length",
        "t_final", "n_alpha", "n_damp", "n_beta",
    )
    missing = [name for name in required if getattr(cfg, name) is None]
    if missing:
        raise ConfigError(f"missing configuration keys: {', '.join(missing)}")
    if (cfg.dt is None) == (cfg.cfl_fraction is None):
        raise ConfigError("exactly one of dt and cfl_fraction must be set")
    if cfg.cfl_fraction is not None:
        if not 0.0 < cfg.cfl_fraction <= 1.0:
            raise ConfigError("cfl_fraction must lie in (0, 1]")
        if cfg.n_steps is not None:
            raise ConfigError("n_steps cannot be combined with cfl_fraction")
    if cfg.dt is not None and not cfg.dt > 0.0:
        raise ConfigError("dt must be > 0")
    if cfg.n_steps is not None and cfg.n_steps < 1:
        raise ConfigError("n_steps must be >= 1")
    if cfg.scheme not in ("explicit", "implicit"):
        raise ConfigError(f"scheme must be explicit or implicit, got {cfg.scheme!r}")
    if not 0.0 <= cfg.fit_lo < cfg.fit_hi <= 1.0:
        raise ConfigError("fit window fractions must satisfy 0 <= fit_lo < fit_hi <= 1")
    if cfg.observe_every < 1:
        raise ConfigError("observe_every must be >= 1")
    try:
        _parameters(cfg)
    except ValueError as err:
        raise ConfigError(str(err)) from err


def _parameters(cfg: RunConfig) -> Parameters:
    return Parameters(
        c1_sq=cfg.c1_sq, c2_sq=cfg.c2_sq, c3_sq=cfg.c3_sq, delta=cfg.delta,
        alpha=cfg.alpha, beta=cfg.beta, length=cfg.length, t_final=cfg.t_final,
    )


def resolve_time_step(cfg: RunConfig, params: Parameters, mesh: Mesh) -> tuple[float, int]:
    """Concrete (dt, n_steps) for a validated configuration."""
    if cfg.dt is not None:
        n_steps = cfg.n_steps if cfg.n_steps is not None else max(
            1, round(params.t_final / cfg.dt)
        )
        return cfg.dt, int(n_steps)
    target = cfg.cfl_fraction * cfl_max_dt(params, mesh)
    n_steps = max(1, ceil(params.t_final / target))
    return params.t_final / n_steps, n_steps


@dataclass
class RunResult:
    """A simulation plus its metadata, rate fits and file-ready summary."""

    config: RunConfig
    dt: float
    n_steps: int
    admissibility: Admissibility
    sim: SimulationResult
    fits: dict[str, diagnostics.DecayFit | None]
    fit_errors: dict[str, str]
    wall_clock: float


def execute(cfg: RunConfig) -> RunResult:
    """Run a validated configuration end to end (no file output)."""
    params = _parameters(cfg)
    mesh = build_mesh(params, cfg.n_alpha, cfg.n_damp, cfg.n_beta)
    dt, n_steps = resolve_time_step(cfg, params, mesh)
    admissibility = validate_run(params, mesh, dt, cfg.scheme)
    if cfg.scheme == "explicit" and not admissibility.stable and not cfg.cfl_override:
        raise ConfigError(
            f"explicit run refused: dt = {dt:.6g} exceeds the stability bound "
            f"{admissibility.dt_bound:.6g}; rerun with --cfl-override to force"
        )
    initial = default_initial_data(params.length)
    snapshot_steps = sorted({0, n_steps // 2, n_steps})
    started = time.perf_counter()
    sim = run(
        params, mesh, initial, dt, n_steps,
        scheme=cfg.scheme,
        observe_every=cfg.observe_every,
        verify_identity=cfg.verify_identity,
        snapshot_steps=snapshot_steps,
    )
    wall = time.perf_counter() - started

    window = (cfg.fit_lo * params.t_final, cfg.fit_hi * params.t_final)
    fits: dict[str, diagnostics.DecayFit | None] = {}
    fit_errors: dict[str, str] = {}
    for model, fitter in (
        ("exponential", diagnostics.fit_exponential),
        ("polynomial", diagnostics.fit_polynomial),
    ):
        try:
            fits[model] = fitter(sim.trace, window)
        except ValueError as err:
            fits[model] = None
            fit_errors[model] = str(err)
    return RunResult(
        config=cfg, dt=dt, n_steps=n_steps, admissibility=admissibility,
        sim=sim, fits=fits, fit_errors=fit_errors, wall_clock=wall,
    )


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_energy_csv(trace: diagnostics.EnergyTrace, path: str | Path) -> None:
    """Energy history, one row per recorded step."""
    lines = ["step,t,e_kinetic,e_potential,e_total,dissipation,residual"]
    for i in range(len(trace)):
        lines.append(
            f"{int(trace.step[i])},{_fmt(float(trace.t[i]))},"
            f"{_fmt(float(trace.e_kinetic[i]))},{_fmt(float(trace.e_potential[i]))},"
            f"{_fmt(float(trace.e_total[i]))},{_fmt(float(trace.dissipation[i]))},"
            f"{_fmt(float(trace.residual[i]))}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_snapshot_csv(values: np.ndarray, mesh: Mesh, path: str | Path) -> None:
    """Cell-center profile of one layer."""
    lines = ["x,u"]
    for x, u in zip(mesh.centers, values):
        lines.append(f"{_fmt(float(x))},{_fmt(float(u))}")
    Path(path).write_text("\n".join(lines) + "\n")


_CONFIG_ECHO_ORDER = (
    "preset", "scheme", "c1_sq", "c2_sq", "c3_sq", "delta", "alpha", "beta",
    "length", "t_final", "n_alpha", "n_damp", "n_beta", "dt", "cfl_fraction",
    "n_steps", "observe_every", "fit_lo", "fit_hi", "out_dir", "cfl_override",
    "verify_identity",
)


def summary_lines(result: RunResult) -> list[str]:
    cfg, sim = result.config, result.sim
    lines = ["# run configuration (this file can be fed back to `run --config`)"]
    for name in _CONFIG_ECHO_ORDER:
        value = getattr(cfg, name)
        if value is None:
            continue
        lines.append(f"{name} = {_fmt(value)}")
    adm = result.admissibility
    lines.append("# results")
    items: list[tuple[str, object]] = [
        ("result_dt", result.dt),
        ("result_n_steps", result.n_steps),
        ("result_cfl_bound", adm.dt_bound),
        ("result_cfl_verdict", "stable" if adm.stable else "unstable"),
        ("result_cfl_accuracy_warning", adm.accuracy_warning),
        ("result_diverged", sim.diverged),
    ]
    if sim.diverged:
        items.append(("result_divergence_step", sim.divergence_step))
    items += [
        ("result_steps_completed", sim.steps_completed),
        ("result_energy_initial", sim.energy_initial),
        ("result_energy_final", float(sim.trace.e_total[-1]) if len(sim.trace) else 0.0),
        ("result_energy_drift_max", sim.energy_drift_max),
        ("result_energy_rise_max", sim.energy_rise_max),
        ("result_identity_residual_max", sim.identity_residual_max),
        ("result_verified_steps", sim.verified_steps),
        ("result_fit_window_lo", cfg.fit_lo * (cfg.t_final or 0.0)),
        ("result_fit_window_hi", cfg.fit_hi * (cfg.t_final or 0.0)),
    ]
    for model in ("exponential", "polynomial"):
        fit = result.fits.get(model)
        if fit is not None:
            items += [
                (f"result_{model}_rate", fit.rate),
                (f"result_{model}_intercept", fit.intercept),
                (f"result_{model}_residual", fit.residual),
                (f"result_{model}_samples", fit.n_samples),
            ]
        else:
            message = result.fit_errors.get(model, "not computed").replace("=", ":")
            items.append((f"result_{model}_error", message))
    items.append(("result_wall_clock_s", result.wall_clock))
    lines += [f"{key} = {_fmt(value)}" for key, value in items]
    return lines


def write_summary(result: RunResult, path: str | Path) -> None:
    """Flat key = value summary; config echo plus result_* keys."""
    Path(path).write_text("\n".join(summary_lines(result)) + "\n")


def write_outputs(result: RunResult, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "energy.csv"
    write_energy_csv(result.sim.trace, path)
    written.append(path)
    params = _parameters(result.config)
    mesh = build_mesh(
        params, result.config.n_alpha, result.config.n_damp, result.config.n_beta
    )
    for snap in result.sim.snapshots:
        path = out / f"snapshot_step{snap.step:08d}.csv"
        write_snapshot_csv(snap.values, mesh, path)
        written.append(path)
    path = out / "summary.txt"
    write_summary(result, path)
    written.append(path)
    return written


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="kvwave", description=__doc__, add_help=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a preset or a config file")
    src = p_run.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="named experiment preset")
    src.add_argument("--config", help="path to a key = value config file")
    p_run.add_argument("--scheme", choices=("explicit", "implicit"))
    p_run.add_argument("--dt", type=float)
    p_run.add_argument("--steps", type=int)
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--observe-every", type=int, dest="observe_every")
    p_run.add_argument("--verify-identity", action="store_true", default=None)
    p_run.add_argument("--cfl-override", action="store_true", default=None)

    sub.add_parser("list-presets", help="print the preset names")

    p_fit = sub.add_parser("fit", help="re-fit decay rates from an energy CSV")
    p_fit.add_argument("--energy-csv", required=True)
    p_fit.add_argument("--window", required=True, help="t_lo,t_hi in simulation time")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.preset is not None:
        cfg = preset(args.preset)
    else:
        try:
            text = Path(args.config).read_text()
        except OSError as err:
            raise ConfigError(f"cannot read config {args.config}: {err}") from err
        cfg = parse_config(text)
    if args.scheme is not None:
        cfg = replace(cfg, scheme=args.scheme)
    if args.dt is not None:
        cfg = replace(cfg, dt=args.dt, cfl_fraction=None)
    if args.steps is not None:
        cfg = replace(cfg, n_steps=args.steps)
    if args.observe_every is not None:
        cfg = replace(cfg, observe_every=args.observe_every)
    if args.verify_identity:
        cfg = replace(cfg, verify_identity=True)
    if args.cfl_override:
        cfg = replace(cfg, cfl_override=True)
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    validate_config(cfg)
    return cfg


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    result = execute(cfg)
    try:
        written = write_outputs(result, cfg.out_dir)
    except OSError as err:
        print(f"error: cannot write outputs under {cfg.out_dir}: {err}", file=sys.stderr)
        return 3
    for path in written:
        print(f"wrote {path}")
    if result.sim.diverged:
        print(
            f"error: run diverged at step {result.sim.divergence_step}",
            file=sys.stderr,
        )
        return 2
    return 0


def _load_energy_csv(path: str) -> diagnostics.EnergyTrace:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise OSError(f"cannot read energy CSV {path}: {err}") from err
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ConfigError(f"{path}: empty energy CSV")
    header = lines[0].split(",")
    try:
        col_t = header.index("t")
        col_e = header.index("e_total")
    except ValueError as err:
        raise ConfigError(f"{path}: missing t/e_total columns") from err
    t, e = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        try:
            t.append(float(parts[col_t]))
            e.append(float(parts[col_e]))
        except (ValueError, IndexError) as err:
            raise ConfigError(f"{path}:{lineno}: malformed row: {err}") from err
    n = len(t)
    zeros = np.zeros(n)
    return diagnostics.EnergyTrace(
        variant="explicit",
        step=np.arange(n),
        t=np.asarray(t),
        e_kinetic=zeros,
        e_potential=zeros,
        e_total=np.asarray(e),
        dissipation=zeros.copy(),
        residual=zeros.copy(),
    )


def _cmd_fit(args: argparse.Namespace) -> int:
    try:
        lo_s, _, hi_s = args.window.partition(",")
        window = (float(lo_s), float(hi_s))
    except ValueError as err:
        raise ConfigError(f"bad --window {args.window!r}: expected 'lo,hi'") from err
    trace = _load_energy_csv(args.energy_csv)
    for model, fitter in (
        ("exponential", diagnostics.fit_exponential),
        ("polynomial", diagnostics.fit_polynomial),
    ):
        try:
            fit = fitter(trace, window)
        except ValueError as err:
            print(f"{model}_error = {err}")
            continue
        print(f"{model}_rate = {_fmt(fit.rate)}")
        print(f"{model}_intercept = {_fmt(fit.intercept)}")
        print(f"{model}_residual = {_fmt(fit.residual)}")
        print(f"{model}_samples = {fit.n_samples}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "list-presets":
            for name in PRESET_NAMES:
                print(name)
            return 0
        if args.command == "fit":
            return _cmd_fit(args)
        return _cmd_run(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
