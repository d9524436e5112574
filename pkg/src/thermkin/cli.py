"""Command-line front end.

Subcommands: protocol3, protocol2, spectrum, equidist, linres, validate.
Run parameters come from an optional flat key=value config file with long
command-line flags overriding file entries. Every run writes its CSV
payload plus a manifest.txt recording parameters, tolerances, conventions,
and flagged assumptions; reruns with identical configuration are
bit-identical.

Exit codes: 0 success, 2 configuration error, 3 numerical error (the error
class name goes to stderr).
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalError, ThermkinError
from .protocols import (
    THREE_T_BACKWARD,
    THREE_T_FORWARD,
    TWO_T,
    FamilyConfig,
    ProtocolSpec,
    linear_response_sweep,
    near_temperature_divergence,
    run_three_temperature,
    run_two_temperature,
    solve_equidistant_cold,
    spectrum_report,
    thread_budget,
)
from .reporting import (
    EQUIDIST_HEADER,
    KINEMATICS_HEADER,
    LINRES_HEADER,
    SPECTRUM_HEADER,
    format_float,
    kinematics_rows,
    linres_rows,
    write_csv,
    write_manifest,
)

CONFIG_KEYS = {
    "model", "dim", "omega", "omega_trap", "gamma", "zeta", "lambda_cutoff",
    "mass", "t_warm", "t_hot", "t_cold", "nbar_warm", "nbar_hot", "nbar_cold",
    "protocol", "t_final", "output_points", "rtol", "atol", "tail_tol",
    "sld_cutoff", "equidist_tol", "bio_tol", "delta_max", "delta_points",
    "collapse_nbar_hot", "out_dir",
}
FLOAT_KEYS = {
    "omega", "omega_trap", "gamma", "zeta", "lambda_cutoff", "mass", "t_warm",
    "t_hot", "t_cold", "nbar_warm", "nbar_hot", "nbar_cold", "t_final",
    "rtol", "atol", "tail_tol", "sld_cutoff", "equidist_tol", "bio_tol",
    "delta_max", "collapse_nbar_hot",
}
INT_KEYS = {"dim", "output_points", "delta_points"}

DEFAULTS = {
    "model": "qubit",
    "dim": 150,
    "omega": 1.0,
    "gamma": 0.1,
    "mass": 1.0,
    "omega_trap": 1e-3,
    "lambda_cutoff": 1.0,
    "zeta": 0.1,
    "output_points": 201,
    "rtol": 1e-9,
    "atol": 1e-12,
    "tail_tol": 1e-7,
    "sld_cutoff": 1e-12,
    "equidist_tol": 1e-10,
    "delta_points": 11,
    "out_dir": "thermkin_out",
}


def _parse_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path) as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


def _coerce(key: str, value):
    if value is None or not isinstance(value, str):
        return value
    try:
        if key in FLOAT_KEYS:
            return float(value)
        if key in INT_KEYS:
            return int(value)
    except ValueError as exc:
        raise ConfigError(f"config key {key}: cannot parse {value!r}") from exc
    return value


def _merge_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(_parse_config_file(args.config))
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    return {key: _coerce(key, value) for key, value in cfg.items()}


def _family_config(cfg: dict) -> FamilyConfig:
    model = cfg.get("model")
    if model not in ("qubit", "ho", "qbm"):
        raise ConfigError(f"model must be qubit, ho, or qbm; got {model!r}")
    return FamilyConfig(
        family=model,
        omega=cfg["omega"],
        gamma=cfg["gamma"],
        dim=cfg["dim"],
        mass=cfg["mass"],
        omega_trap=cfg["omega_trap"],
        lambda_cutoff=cfg["lambda_cutoff"],
        zeta=cfg["zeta"],
        tail_tol=cfg["tail_tol"],
    )


def _temperature(cfg, config, t_key, nbar_key, required=True):
    t = cfg.get(t_key)
    nb = cfg.get(nbar_key)
    if t is not None and nb is not None:
        raise ConfigError(f"give {t_key} or {nbar_key}, not both")
    if t is not None:
        return float(t), False
    if nb is not None:
        return config.temperature_for_nbar(float(nb)), True
    if required:
        raise ConfigError(f"missing {t_key} (or {nbar_key})")
    return None, False


def _base_manifest(cfg: dict, config: FamilyConfig, command: str) -> dict:
    entries = {
        "tool": "thermkin",
        "version": __version__,
        "command": command,
        "model": config.family,
        "vectorization": "column-stacked (vec(A X B) = (B^T kron A) vec(X))",
        "units": "hbar = k_B = 1",
        "threads": thread_budget(),
        "tail_tol": config.tail_tol,
        "rtol": cfg["rtol"],
        "atol": cfg["atol"],
        "sld_cutoff": cfg["sld_cutoff"],
        "equidist_tol": cfg["equidist_tol"],
    }
    if config.family == "qubit":
        entries.update(omega=config.omega, gamma=config.gamma)
    elif config.family == "ho":
        entries.update(omega=config.omega, gamma=config.gamma, dim=config.dim)
    else:
        entries.update(mass=config.mass, omega_trap=config.omega_trap,
                       lambda_cutoff=config.lambda_cutoff, zeta=config.zeta,
                       dim=config.dim)
        entries["assumption_qbm_hamiltonian"] = (
            "bare trap p^2/2m + m Omega^2 x^2 / 2, no cutoff renormalization"
        )
    return entries


def _note_nbar_assumption(entries, config, used_nbar):
    if used_nbar and config.family == "qbm":
        entries["assumption_qbm_temperatures"] = (
            "temperatures set via Bose-Einstein occupations at the trap "
            "frequency; not pinned by the source experiment"
        )


def _cmd_equidist(args) -> int:
    cfg = _merge_config(args)
    config = _family_config(cfg)
    t_w, used_nbar_w = _temperature(cfg, config, "t_warm", "nbar_warm")
    t_h, used_nbar_h = _temperature(cfg, config, "t_hot", "nbar_hot")
    t_c, residual = solve_equidistant_cold(config, t_w, t_h, cfg["equidist_tol"])
    out = cfg["out_dir"]
    write_csv(os.path.join(out, "equidist.csv"), EQUIDIST_HEADER,
              [(t_w, t_h, t_c, residual)])
    entries = _base_manifest(cfg, config, "equidist")
    entries.update(t_warm=t_w, t_hot=t_h, t_cold=t_c, residual=residual)
    _note_nbar_assumption(entries, config, used_nbar_w or used_nbar_h)
    write_manifest(os.path.join(out, "manifest.txt"), entries)
    print(f"T_C = {format_float(t_c)} (residual {format_float(residual)})")
    return 0


def _protocol_spec(cfg, config, protocol, t_w=None, t_h=None, t_c=None):
    if cfg.get("t_final") is None:
        raise ConfigError("missing t_final")
    return ProtocolSpec(
        config=config,
        protocol=protocol,
        t_final=float(cfg["t_final"]),
        T_W=t_w, T_H=t_h, T_C=t_c,
        output_points=cfg["output_points"],
        rtol=cfg["rtol"],
        atol=cfg["atol"],
        sld_cutoff=cfg["sld_cutoff"],
        equidist_tol=cfg["equidist_tol"],
    )


def _write_protocol_outputs(cfg, config, result, command, extra_entries):
    out = cfg["out_dir"]
    write_csv(os.path.join(out, "kinematics.csv"), KINEMATICS_HEADER,
              kinematics_rows(result))
    entries = _base_manifest(cfg, config, command)
    entries.update(extra_entries)
    entries["t_final"] = result.spec.t_final
    entries["output_points"] = result.spec.output_points
    entries["output_grid"] = ("transient-weighted (half the points on the "
                              "first tenth of the span)"
                              if config.family == "qbm" else "uniform")
    for key, value in sorted(result.summary.items()):
        entries[f"summary_{key}"] = value
    for label in sorted(result.branches):
        branch = result.branches[label]
        entries[f"{label}_init_temperature"] = branch.init_temperature
        entries[f"{label}_bath_temperature"] = branch.bath_temperature
        entries[f"{label}_converged"] = branch.converged
        entries[f"{label}_integrator"] = branch.trajectory.diagnostics.get("method")
    write_manifest(os.path.join(out, "manifest.txt"), entries)


def _cmd_protocol3(args) -> int:
    cfg = _merge_config(args)
    config = _family_config(cfg)
    variant = cfg.get("protocol") or THREE_T_FORWARD
    if getattr(args, "backward", False):
        variant = THREE_T_BACKWARD
    if variant not in (THREE_T_FORWARD, THREE_T_BACKWARD):
        raise ConfigError(f"protocol must be a three-temperature variant, "
                          f"got {variant!r}")
    t_w, u1 = _temperature(cfg, config, "t_warm", "nbar_warm")
    t_h, u2 = _temperature(cfg, config, "t_hot", "nbar_hot")
    t_c, u3 = _temperature(cfg, config, "t_cold", "nbar_cold", required=False)
    spec = _protocol_spec(cfg, config, variant, t_w=t_w, t_h=t_h, t_c=t_c)
    result = run_three_temperature(spec)
    extra = {
        "t_warm": t_w, "t_hot": t_h,
        "t_cold": result.spec.T_C,
        "t_cold_solved": t_c is None,
        "equidistance_residual": result.equidistance_residual,
    }
    _note_nbar_assumption(extra, config, u1 or u2 or u3)
    _write_protocol_outputs(cfg, config, result, "protocol3", extra)
    for th in (0.9, 0.99):
        print(f"t(F={th}): heating {format_float(result.summary[f't_fidelity_{th}_heating'])}"
              f"  cooling {format_float(result.summary[f't_fidelity_{th}_cooling'])}")
    return 0


def _cmd_protocol2(args) -> int:
    cfg = _merge_config(args)
    config = _family_config(cfg)
    t_c, u1 = _temperature(cfg, config, "t_cold", "nbar_cold")
    t_h, u2 = _temperature(cfg, config, "t_hot", "nbar_hot")
    spec = _protocol_spec(cfg, config, TWO_T, t_h=t_h, t_c=t_c)
    result = run_two_temperature(spec)
    extra = {"t_cold": t_c, "t_hot": t_h}
    _note_nbar_assumption(extra, config, u1 or u2)
    _write_protocol_outputs(cfg, config, result, "protocol2", extra)
    print(f"t(phi=0.9): heating "
          f"{format_float(result.summary['t_completion_heating'])}  cooling "
          f"{format_float(result.summary['t_completion_cooling'])}")
    return 0


def _cmd_spectrum(args) -> int:
    cfg = _merge_config(args)
    config = _family_config(cfg)
    t_h, u1 = _temperature(cfg, config, "t_hot", "nbar_hot")
    t_c, u2 = _temperature(cfg, config, "t_cold", "nbar_cold")
    report = spectrum_report(config, t_h, t_c, bio_tol=cfg.get("bio_tol"))
    out = cfg["out_dir"]
    write_csv(os.path.join(out, "spectrum.csv"), SPECTRUM_HEADER, report.rows)
    entries = _base_manifest(cfg, config, "spectrum")
    entries.update(t_hot=t_h, t_cold=t_c)
    _note_nbar_assumption(entries, config, u1 or u2)
    for label, summary in sorted(report.summaries.items()):
        for key, value in sorted(summary.items()):
            entries[f"{label}_{key}"] = value
    write_manifest(os.path.join(out, "manifest.txt"), entries)
    for label, summary in sorted(report.summaries.items()):
        print(f"{label}: gap {format_float(summary['gap'])}, slow-mode mass "
              f"{format_float(summary['slow_mass'])}")
    return 0


def _cmd_linres(args) -> int:
    cfg = _merge_config(args)
    config = _family_config(cfg)
    t_w, used_nbar = _temperature(cfg, config, "t_warm", "nbar_warm")
    delta_max = cfg.get("delta_max")
    if delta_max is None:
        delta_max = 0.05 * t_w
    deltas = np.linspace(delta_max / cfg["delta_points"], delta_max,
                         cfg["delta_points"])
    result = linear_response_sweep(config, t_w, deltas)
    out = cfg["out_dir"]
    write_csv(os.path.join(out, "linres.csv"), LINRES_HEADER, linres_rows(result))
    entries = _base_manifest(cfg, config, "linres")
    entries.update(t_warm=t_w, delta_max=delta_max,
                   fit_coefficient=result.fit_coefficient,
                   closed_form_coefficient=result.closed_form_coefficient)
    _note_nbar_assumption(entries, config, used_nbar)
    collapse_nbar = cfg.get("collapse_nbar_hot")
    if collapse_nbar is not None:
        if cfg.get("t_final") is None:
            raise ConfigError("collapse metric needs t_final")
        div = near_temperature_divergence(
            config,
            config.temperature_for_nbar(1.0),
            config.temperature_for_nbar(float(collapse_nbar)),
            float(cfg["t_final"]),
            rtol=cfg["rtol"], atol=cfg["atol"])
        entries["collapse_nbar_hot"] = collapse_nbar
        entries["collapse_sup_gap"] = div["sup_gap"]
        entries["collapse_normalized_gap"] = div["normalized_gap"]
    write_manifest(os.path.join(out, "manifest.txt"), entries)
    print(f"fit coefficient {format_float(result.fit_coefficient)}"
          + ("" if np.isnan(result.closed_form_coefficient) else
             f" (closed form {format_float(result.closed_form_coefficient)})"))
    return 0


def _cmd_validate(args) -> int:
    from .validation import run_validation_suite
    failures = run_validation_suite(verbose=True)
    return 0 if failures == 0 else 3


def _add_common(parser):
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--model", choices=("qubit", "ho", "qbm"))
    parser.add_argument("--dim", type=int)
    parser.add_argument("--omega", type=float)
    parser.add_argument("--omega-trap", dest="omega_trap", type=float)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--zeta", type=float)
    parser.add_argument("--lambda-cutoff", dest="lambda_cutoff", type=float)
    parser.add_argument("--mass", type=float)
    parser.add_argument("--t-warm", dest="t_warm", type=float)
    parser.add_argument("--t-hot", dest="t_hot", type=float)
    parser.add_argument("--t-cold", dest="t_cold", type=float)
    parser.add_argument("--nbar-warm", dest="nbar_warm", type=float)
    parser.add_argument("--nbar-hot", dest="nbar_hot", type=float)
    parser.add_argument("--nbar-cold", dest="nbar_cold", type=float)
    parser.add_argument("--t-final", dest="t_final", type=float)
    parser.add_argument("--output-points", dest="output_points", type=int)
    parser.add_argument("--rtol", type=float)
    parser.add_argument("--atol", type=float)
    parser.add_argument("--tail-tol", dest="tail_tol", type=float)
    parser.add_argument("--sld-cutoff", dest="sld_cutoff", type=float)
    parser.add_argument("--equidist-tol", dest="equidist_tol", type=float)
    parser.add_argument("--bio-tol", dest="bio_tol", type=float)
    parser.add_argument("--out-dir", dest="out_dir")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermkin",
        description="Heating/cooling asymmetry experiments for Markovian "
                    "open quantum systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p3 = sub.add_parser("protocol3", help="three-temperature relaxation")
    _add_common(p3)
    p3.add_argument("--backward", action="store_true",
                    help="prepare at T_W and relax into T_H and T_C")
    p3.add_argument("--protocol", choices=(THREE_T_FORWARD, THREE_T_BACKWARD))
    p3.set_defaults(func=_cmd_protocol3)

    p2 = sub.add_parser("protocol2", help="two-temperature relaxation")
    _add_common(p2)
    p2.set_defaults(func=_cmd_protocol2)

    ps = sub.add_parser("spectrum", help="generator spectra with overlaps")
    _add_common(ps)
    ps.set_defaults(func=_cmd_spectrum)

    pe = sub.add_parser("equidist", help="solve the equidistant cold temperature")
    _add_common(pe)
    pe.set_defaults(func=_cmd_equidist)

    pl = sub.add_parser("linres", help="near-equilibrium quadratic fidelity sweep")
    _add_common(pl)
    pl.add_argument("--delta-max", dest="delta_max", type=float)
    pl.add_argument("--delta-points", dest="delta_points", type=int)
    pl.add_argument("--collapse-nbar-hot", dest="collapse_nbar_hot", type=float)
    pl.set_defaults(func=_cmd_linres)

    pv = sub.add_parser("validate", help="run the built-in oracle/invariant suite")
    pv.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except ThermkinError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
