"""Command-line entry point.

Configs are JSON objects; flags override file values; unknown keys are
rejected so a typo cannot silently fall back to a default.  Every run
writes (or prints) a metadata block with the fully resolved config, the
seed, and the package version, which is enough to reproduce the run.

Exit codes: 0 success, 1 numerical failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from importlib import resources
from typing import Optional

import numpy as np

from . import __version__
from .dissipator import NoiseConfig
from .errors import (
    ConfigError,
    InvalidParameterError,
    OpenLZError,
    PropagationError,
    QuadratureError,
    ResourceLimitError,
)
from .experiments import (
    SweepSpec,
    default_gamma_grid,
    run_sweep,
    transfer_efficiency,
    write_csv,
)
from .factorization import classical_noise_ensemble, run_factorization
from .integrator import IntegratorConfig
from .model import ModelParams
from .spin import validate_j

SCHEMA_VERSION = 1

MODEL_KEYS = {"omega_rabi", "kappa", "t0"}
INTEGRATOR_KEYS = {"method", "dt", "rel_tol", "max_steps", "validity_tol"}

COMMAND_KEYS = {
    "single": {"j", "gamma", "temperature", "channel", "model", "integrator",
               "out"},
    "sweep": {"j_list", "gamma_grid", "gamma_points", "gamma_lo", "gamma_hi",
              "channels", "temperatures", "model", "integrator", "workers",
              "out"},
    "factorization": {"j", "gamma", "temperature", "channel", "checkpoints",
                      "model", "integrator", "out"},
    "classical-noise": {"n_spins", "v_component", "alpha", "n_traj", "seed",
                        "t0", "model", "integrator", "out"},
}


def _fail_config(msg: str) -> ConfigError:
    return ConfigError(msg)


def load_config(spec: str) -> dict:
    """Read a JSON config from a path or from the bundled presets."""
    if os.path.exists(spec):
        origin = spec
        with open(spec) as fh:
            text = fh.read()
    else:
        name = spec if spec.endswith(".preset") else spec + ".preset"
        try:
            text = (resources.files("openlz.presets") / name).read_text()
            origin = f"bundled preset {name}"
        except (FileNotFoundError, ModuleNotFoundError):
            raise _fail_config(
                f"config {spec!r} is neither a file nor a bundled preset")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise _fail_config(
            f"{origin}: line {e.lineno} column {e.colno}: {e.msg}")
    if not isinstance(data, dict):
        raise _fail_config(f"{origin}: top level must be a JSON object")
    version = data.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise _fail_config(
            f"{origin}: schema_version {version} unsupported "
            f"(expected {SCHEMA_VERSION})")
    return data


def _check_keys(data: dict, allowed: set, context: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise _fail_config(
            f"unknown {context} key(s): {', '.join(unknown)}; "
            f"allowed: {', '.join(sorted(allowed))}")


def _build_model(data: dict) -> ModelParams:
    _check_keys(data, MODEL_KEYS, "model")
    try:
        return ModelParams(j=0.5,
                           omega_rabi=float(data.get("omega_rabi", 1.0)),
                           kappa=float(data.get("kappa", 0.1)),
                           t0=float(data.get("t0", 250.0)))
    except InvalidParameterError as e:
        raise _fail_config(f"model: {e}")


def _build_integrator(data: dict, default_rel_tol: float) -> IntegratorConfig:
    _check_keys(data, INTEGRATOR_KEYS, "integrator")
    try:
        return IntegratorConfig(
            method=data.get("method", "rk4_doubling"),
            dt=float(data.get("dt", 0.01)),
            rel_tol=float(data.get("rel_tol", default_rel_tol)),
            max_steps=int(data.get("max_steps", 20_000_000)),
            validity_tol=float(data.get("validity_tol", 1e-7)))
    except InvalidParameterError as e:
        raise _fail_config(f"integrator: {e}")


def _resolve(args, command: str) -> dict:
    """Merge config file and flags; flags win."""
    cfg = load_config(args.config) if args.config else {}
    _check_keys(cfg, COMMAND_KEYS[command], f"{command} config")
    for flag in ("j", "gamma", "temp", "channel", "seed", "workers", "out"):
        val = getattr(args, flag, None)
        if val is not None:
            key = {"temp": "temperature"}.get(flag, flag)
            cfg[key] = val
    return cfg


def _validate_half_integer(j: float) -> float:
    try:
        validate_j(j)
    except InvalidParameterError as e:
        raise _fail_config(f"j: {e}")
    return float(j)


def _channel_or_fail(name: str) -> str:
    if name not in ("Jz", "Jx"):
        raise _fail_config(f"channel must be Jz or Jx, got {name!r}")
    return name


def _write_metadata(out: Optional[str], command: str, resolved: dict,
                    seed: Optional[int]) -> None:
    meta = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": resolved,
        "seed": seed,
        "version": __version__,
    }
    blob = json.dumps(meta, indent=2, sort_keys=True, default=_jsonable)
    if out:
        with open(str(out) + ".meta.json", "w") as fh:
            fh.write(blob + "\n")
    else:
        print("# metadata " + json.dumps(meta, sort_keys=True,
                                         default=_jsonable))


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def cmd_single(args) -> int:
    cfg = _resolve(args, "single")
    j = _validate_half_integer(cfg.get("j", 1.0))
    gamma = float(cfg.get("gamma", 0.0))
    temperature = float(cfg.get("temperature", 0.001))
    channel = _channel_or_fail(cfg.get("channel", "Jz"))
    model = _build_model(cfg.get("model", {}))
    # gamma=0 keeps the state pure; the default tolerance leaves room
    # under the eigenvalue floor
    integ = _build_integrator(cfg.get("integrator", {}), 1e-11)
    out = cfg.get("out")

    noise = NoiseConfig(coupling=channel,
                        gamma_flat=gamma * model.omega_rabi,
                        temperature=temperature * model.omega_rabi)
    resolved = {
        "j": j, "gamma": gamma, "temperature": temperature,
        "channel": channel,
        "model": dataclasses.asdict(dataclasses.replace(model, j=j)),
        "integrator": dataclasses.asdict(integ),
        "out": out,
    }
    record = transfer_efficiency(j, noise, model, integ)
    print(f"j {record.j}")
    print(f"gamma_over_omega {record.gamma}")
    print(f"kBT_over_omega {record.temperature}")
    print(f"channel {record.channel}")
    print(f"efficiency {record.efficiency!r}")
    print(f"trace_drift {record.trace_drift:.3e}")
    print(f"min_eigenvalue {record.min_eigenvalue:.3e}")
    print(f"wall_time_s {record.wall_time:.3f}")
    if out:
        write_csv([record], out)
    _write_metadata(out, "single", resolved, None)
    return 0


def cmd_sweep(args) -> int:
    cfg = _resolve(args, "sweep")
    if "gamma_grid" in cfg:
        grid = [float(g) for g in cfg["gamma_grid"]]
    else:
        grid = default_gamma_grid(int(cfg.get("gamma_points", 25)),
                                  float(cfg.get("gamma_lo", 1e-4)),
                                  float(cfg.get("gamma_hi", 1.0)))
    j_list = [_validate_half_integer(j) for j in cfg.get(
        "j_list", [0.5, 1.0, 1.5, 2.0, 2.5])]
    channels = [(_channel_or_fail(c)) for c in cfg.get("channels", ["Jz"])]
    temperatures = [float(t) for t in cfg.get("temperatures", [0.001, 10.0])]
    model = _build_model(cfg.get("model", {}))
    integ = _build_integrator(cfg.get("integrator", {}), 1e-10)
    workers = int(cfg.get("workers", os.cpu_count() or 1))
    out = cfg.get("out")
    if out is None:
        raise _fail_config("sweep needs an output path (--out or out:)")

    try:
        spec = SweepSpec(j_list=j_list, gamma_grid=grid, channels=channels,
                         temperatures=temperatures, model=model,
                         integrator=integ, workers=workers)
    except InvalidParameterError as e:
        raise _fail_config(str(e))
    resolved = {
        "j_list": j_list, "gamma_grid": [float(g) for g in grid],
        "channels": channels, "temperatures": temperatures,
        "model": dataclasses.asdict(model),
        "integrator": dataclasses.asdict(integ),
        "workers": workers, "out": out,
    }
    records = run_sweep(spec, out)
    n_failed = sum(r.failed for r in records)
    print(f"wrote {len(records)} records to {out} ({n_failed} failed)")
    _write_metadata(out, "sweep", resolved, None)
    return 1 if n_failed else 0


def cmd_factorization(args) -> int:
    cfg = _resolve(args, "factorization")
    j = _validate_half_integer(cfg.get("j", 1.0))
    gamma = float(cfg.get("gamma", 0.0))
    temperature = float(cfg.get("temperature", 0.001))
    channel = _channel_or_fail(cfg.get("channel", "Jz"))
    n_checkpoints = int(cfg.get("checkpoints", 5))
    model = _build_model(cfg.get("model", {}))
    integ = _build_integrator(cfg.get("integrator", {}), 1e-10)
    out = cfg.get("out")

    noise = NoiseConfig(coupling=channel,
                        gamma_flat=gamma * model.omega_rabi,
                        temperature=temperature * model.omega_rabi)
    resolved = {
        "j": j, "gamma": gamma, "temperature": temperature,
        "channel": channel, "checkpoints": n_checkpoints,
        "model": dataclasses.asdict(dataclasses.replace(model, j=j)),
        "integrator": dataclasses.asdict(integ),
        "out": out,
    }
    report = run_factorization(j, noise, model, integ,
                               n_checkpoints=n_checkpoints)
    lines = [
        f"j {report.j}",
        f"gamma_over_omega {report.gamma}",
        f"kBT_over_omega {report.temperature}",
        f"channel {report.channel}",
        f"unitary_residual {report.unitary_residual!r}",
        f"lindblad_trace_distance {report.lindblad_trace_distance!r}",
    ]
    text = "\n".join(lines)
    print(text)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
        cp_path = str(out) + ".checkpoints.csv"
        with open(cp_path, "w") as fh:
            fh.write("t,unitary_residual,lindblad_trace_distance\n")
            for t, ur, ld in report.checkpoints:
                fh.write(f"{t!r},{ur!r},{ld!r}\n")
    _write_metadata(out, "factorization", resolved, None)
    return 0


def cmd_classical_noise(args) -> int:
    cfg = _resolve(args, "classical-noise")
    n_spins = int(cfg.get("n_spins", 2))
    v_component = cfg.get("v_component", "Sz")
    alpha = float(cfg.get("alpha", np.sqrt(0.001)))
    n_traj = int(cfg.get("n_traj", 10_000))
    seed = int(cfg.get("seed", 1234))
    model = _build_model(cfg.get("model", {}))
    if "t0" in cfg:
        model = dataclasses.replace(model, t0=float(cfg["t0"]))
    integ = _build_integrator(cfg.get("integrator", {}), 1e-8)
    out = cfg.get("out")

    resolved = {
        "n_spins": n_spins, "v_component": v_component, "alpha": alpha,
        "n_traj": n_traj, "seed": seed,
        "model": dataclasses.asdict(model),
        "integrator": dataclasses.asdict(integ),
        "out": out,
    }
    rep = classical_noise_ensemble(model, n_spins, v_component, alpha,
                                   n_traj, seed, integ)
    mc_norm = float(np.linalg.norm(rep.mc_difference))
    an_norm = float(np.linalg.norm(rep.analytic_cross_term))
    dev = float(np.linalg.norm(rep.mc_difference - rep.analytic_cross_term))
    lines = [
        f"alpha {rep.alpha!r}",
        f"n_traj {rep.n_traj}",
        f"t_span {rep.t_span!r}",
        f"n_steps {rep.n_steps}",
        f"seed {rep.seed}",
        f"mc_difference_norm {mc_norm!r}",
        f"analytic_cross_term_norm {an_norm!r}",
        f"deviation_norm {dev!r}",
        f"statistical_error {rep.statistical_error!r}",
        "mc_difference_real " + json.dumps(rep.mc_difference.real.tolist()),
        "mc_difference_imag " + json.dumps(rep.mc_difference.imag.tolist()),
        "analytic_real " + json.dumps(rep.analytic_cross_term.real.tolist()),
        "analytic_imag " + json.dumps(rep.analytic_cross_term.imag.tolist()),
    ]
    text = "\n".join(lines)
    print(text)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    _write_metadata(out, "classical-noise", resolved, seed)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="openlz",
        description="Dissipative sweep simulations for collective spins "
                    "and their spin-1/2 factorization checks.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, workers=False):
        sp.add_argument("--config", help="JSON config file or bundled "
                                         "preset name (fig1 / fig2)")
        sp.add_argument("--out", help="output path")
        sp.add_argument("--seed", type=int, help="RNG seed")
        if workers:
            sp.add_argument("--workers", type=int, help="parallel workers")
        sp.add_argument("--j", type=float, help="total spin (half-integer)")
        sp.add_argument("--gamma", type=float, help="gamma/Omega")
        sp.add_argument("--temp", type=float, help="kBT/Omega")
        sp.add_argument("--channel", choices=("Jz", "Jx"),
                        help="coupling operator")

    sp = sub.add_parser("single", help="one transfer-efficiency point")
    common(sp)
    sp.set_defaults(func=cmd_single)

    sp = sub.add_parser("sweep", help="grid sweep to CSV")
    common(sp, workers=True)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("factorization",
                        help="unitary and Lindblad factorization residuals")
    common(sp)
    sp.set_defaults(func=cmd_factorization)

    sp = sub.add_parser("classical-noise",
                        help="shared-white-noise ensemble vs the "
                             "second-order cross term")
    common(sp)
    sp.set_defaults(func=cmd_classical_noise)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except InvalidParameterError as e:
        print(f"invalid parameter: {e}", file=sys.stderr)
        return 2
    except (PropagationError, ResourceLimitError, QuadratureError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 1
    except OpenLZError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
