"""Command-line front end.

Experiments are described in a YAML file; flags only select the file, the
output directory and the seed.  Exit codes: 0 success, 2 invalid
configuration or model, 3 numerical failure, 4 too few usable points for
an order estimate.
"""

from __future__ import annotations

import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import click
import yaml

from . import __version__
from .crk import Method
from .errors import DomainError, ModelError, NumericalError, PairingError
from .metrics import DEFAULT_EVAL_POINTS, ReferenceSpec, convergence_study
from .models import MODEL_DESCRIPTIONS, MODEL_IDS, get_model
from .output import run_manifest, write_json, write_jumps_csv, write_study, write_trajectory_csv
from .rng import UniformStream
from .simulate import SimulationConfig, simulate_approx

__all__ = ["RunConfig", "ConfigError", "load_config", "cmd_simulate", "cmd_converge", "main",
           "OUTPUT_DIR_ENV"]

log = logging.getLogger("pdmpsim")

OUTPUT_DIR_ENV = "PDMPSIM_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "pdmpsim-out"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INSUFFICIENT = 0, 2, 3, 4


class ConfigError(ValueError):
    """The run configuration is malformed."""


def _float(name: str, v) -> float:
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {v!r}") from None


def _h_list(v) -> list[float]:
    if isinstance(v, dict):
        unknown = set(v) - {"start", "factor", "count"}
        if unknown:
            raise ConfigError(f"unknown h_list field(s): {', '.join(sorted(unknown))}")
        try:
            start, count = _float("h_list.start", v["start"]), int(v["count"])
        except KeyError as exc:
            raise ConfigError(f"h_list needs {exc.args[0]!r}") from None
        factor = _float("h_list.factor", v.get("factor", 0.5))
        return [start * factor**k for k in range(count)]
    if isinstance(v, (list, tuple)):
        return [_float("h_list entry", x) for x in v]
    raise ConfigError("h_list must be a list or a {start, factor, count} mapping")


@dataclass
class RunConfig:
    """One experiment as read from a config file."""

    model: str
    T: float
    seed: int = 0
    params: dict = field(default_factory=dict)
    method: str = Method.LOBATTO_IIIA_3.value
    methods: list = field(default_factory=lambda: [m.value for m in Method])
    h: Optional[float] = None
    h_list: Optional[list] = None
    reference: Any = None
    output_dir: Optional[str] = None
    emit_dense: bool = True
    min_jumps: Optional[int] = None
    n_eval_points: int = DEFAULT_EVAL_POINTS
    record_wall_time: bool = False

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(sorted(map(str, unknown)))}")
        for req in ("model", "T"):
            if req not in data:
                raise ConfigError(f"missing required field {req!r}")
        kw = dict(data)
        kw["T"] = _float("T", kw["T"])
        if not kw["T"] > 0:
            raise ConfigError(f"T must be positive, got {kw['T']}")
        if "seed" in kw:
            kw["seed"] = _seed(kw["seed"])
        if kw.get("h") is not None:
            kw["h"] = _float("h", kw["h"])
        if kw.get("h_list") is not None:
            kw["h_list"] = _h_list(kw["h_list"])
        if "methods" in kw:
            if isinstance(kw["methods"], str):
                kw["methods"] = [kw["methods"]]
            kw["methods"] = [_method(m) for m in kw["methods"]]
        if "method" in kw:
            kw["method"] = _method(kw["method"])
        if kw.get("params") is None:
            kw["params"] = {}
        if not isinstance(kw["params"], dict):
            raise ConfigError("params must be a mapping")
        kw["params"] = {str(k): _param(str(k), v) for k, v in kw["params"].items()}
        if kw.get("reference") is not None:
            try:
                kw["reference"] = ReferenceSpec.parse(kw["reference"])
            except (DomainError, ValueError) as exc:
                raise ConfigError(str(exc)) from None
        return cls(**kw)


def _param(name: str, v):
    if name == "rate_set":
        return str(v)
    if name == "theta0":
        if not isinstance(v, (list, tuple)):
            raise ConfigError("params.theta0 must be a list")
        return [_float("params.theta0 entry", x) for x in v]
    if name.startswith("N_"):
        x = _float(f"params.{name}", v)
        if x != int(x):
            raise ConfigError(f"params.{name} must be an integer")
        return int(x)
    return _float(f"params.{name}", v)


def _seed(v) -> int:
    try:
        s = int(v)
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be an integer, got {v!r}") from None
    if not 0 <= s < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    return s


def _method(name) -> str:
    try:
        return Method.parse(name).value
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    return RunConfig.from_mapping(data or {})


def _output_dir(cfg: RunConfig, override: Optional[str]) -> Path:
    return Path(override or cfg.output_dir or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)


def _fail(code: int, message: str) -> int:
    click.echo(f"error: {message}", err=True)
    return code


def cmd_simulate(cfg: RunConfig, output_dir: Optional[str] = None) -> int:
    """Simulate one path and write ``trajectory.csv``, ``jumps.csv`` and ``manifest.json``."""
    if cfg.h is None:
        return _fail(EXIT_CONFIG, "simulate needs a single step size 'h'")
    try:
        model = get_model(cfg.model, cfg.params)
        sim = SimulationConfig(method=cfg.method, h=cfg.h, horizon=cfg.T, seed=cfg.seed,
                               min_jumps=cfg.min_jumps, record_dense=cfg.emit_dense)
    except (ModelError, DomainError, ValueError, TypeError) as exc:
        return _fail(EXIT_CONFIG, str(exc))
    try:
        traj = simulate_approx(model, sim, UniformStream(cfg.seed))
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, f"numerical failure: {exc}")
    out = _output_dir(cfg, output_dir)
    if cfg.emit_dense:
        write_trajectory_csv(out / "trajectory.csv", traj)
    write_jumps_csv(out / "jumps.csv", traj)
    write_json(out / "manifest.json", run_manifest(cfg.model, traj, cfg.method, cfg.h, cfg.seed))
    click.echo(f"{traj.n_jumps_in_horizon} jumps on [0, {cfg.T:g}]; output in {out}")
    return EXIT_OK


def cmd_converge(cfg: RunConfig, output_dir: Optional[str] = None) -> int:
    """Run a convergence study and write the error table, slopes and plot data."""
    if not cfg.h_list:
        return _fail(EXIT_CONFIG, "converge needs a non-empty 'h_list'")
    try:
        model = get_model(cfg.model, cfg.params)
        reference = cfg.reference
        if reference is None:
            reference = ReferenceSpec() if model.exact is not None else ReferenceSpec("numeric")
        if reference.kind == "analytic" and model.exact is None:
            raise ModelError(f"model {cfg.model!r} has no analytic reference")
        result = convergence_study(model, cfg.methods, cfg.h_list, cfg.T, cfg.seed, reference,
                                   n_eval_points=cfg.n_eval_points)
    except (ModelError, DomainError, ValueError) as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except (NumericalError, PairingError) as exc:
        return _fail(EXIT_NUMERICAL, f"reference run failed: {exc}")
    out = _output_dir(cfg, output_dir)
    write_study(out, result, record_wall_time=cfg.record_wall_time)

    for method in cfg.methods:
        s = result.slopes[method]
        parts = ", ".join(f"{k}={v:.3f}" for k, v in s.items())
        click.echo(f"{method:12s} h*={result.h_star[method]!s:10s} {parts}")
    missing = {m: n for m, n in result.slope_notes.items()}
    if missing:
        for m, notes in missing.items():
            for f, why in notes.items():
                click.echo(f"insufficient data for {m}/{f}: {why}", err=True)
        return EXIT_INSUFFICIENT
    return EXIT_OK


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ConfigError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_CONFIG)


@click.group(cls=_Group)
@click.version_option(__version__, prog_name="pdmpsim")
def main():
    """Simulate piecewise deterministic Markov processes and study pathwise convergence."""
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


_config_opt = click.option("--config", "-c", "config_path", required=True,
                           type=click.Path(dir_okay=False), help="YAML experiment file.")
_outdir_opt = click.option("--output-dir", "-o", default=None,
                           help=f"Output directory (default: config, then ${OUTPUT_DIR_ENV}).")
_seed_opt = click.option("--seed", default=None, help="Override the config seed.")


def _load(config_path: str, seed: Optional[str]) -> RunConfig:
    cfg = load_config(config_path)
    if seed is not None:
        cfg.seed = _seed(seed)
    return cfg


@main.command("simulate")
@_config_opt
@_outdir_opt
@_seed_opt
def simulate_cmd(config_path, output_dir, seed):
    """Simulate one approximate path."""
    sys.exit(cmd_simulate(_load(config_path, seed), output_dir))


@main.command("converge")
@_config_opt
@_outdir_opt
@_seed_opt
def converge_cmd(config_path, output_dir, seed):
    """Run a convergence study over methods and step sizes."""
    sys.exit(cmd_converge(_load(config_path, seed), output_dir))


@main.command("list-models")
def list_models_cmd():
    """Show the available model ids."""
    for mid in MODEL_IDS:
        click.echo(f"{mid:12s} {MODEL_DESCRIPTIONS[mid]}")


@main.command("list-methods")
def list_methods_cmd():
    """Show the built-in continuous Runge-Kutta methods."""
    from .crk import builtin_tableau

    for m in Method:
        tab = builtin_tableau(m)
        kind = "explicit" if tab.is_explicit else "implicit"
        click.echo(f"{m.value:12s} order {tab.order}, {tab.s} stage(s), {kind}")


if __name__ == "__main__":  # pragma: no cover
    main()
