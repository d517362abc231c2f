"""Command-line interface.

    photocool analyze   --device benchmark [--power 1e-3] [--json out.json]
    photocool survey    [--json out.json]
    photocool simulate  --device benchmark --out run1 [--seed 7] [--ensemble 8]
    photocool optimize  --device benchmark --free tau [--json out.json]
    photocool fit       --device metzger_like --dataset curve.csv --free chi,epsilon

Exit codes: 0 ok; 2 validation/config error; 3 heating or static
instability in a closed-form evaluation; 4 simulation aborted (runaway or
nonstationary statistics); 5 optimization or fit failure.

Reports are JSON with every number wrapped as {"value", "unit"} plus a
provenance block (tool version, config digest, seed); no timestamps, so
identical inputs give byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import (
    bundled_device,
    canonical_json,
    list_bundled_devices,
    load_device_config,
    params_digest,
)
from .constants import HBAR, KB
from .errors import (
    ConfigValidationError,
    DatasetParseError,
    DegenerateDetuningError,
    FitDivergedError,
    GridTooCoarseError,
    HeatingRegimeError,
    InstabilityError,
    InvalidParameterError,
    NegativeOccupancyError,
    NoFeasiblePointError,
    NonstationaryTrajectoryError,
    SimulationAbortError,
    TooFewSegmentsError,
    UnderdeterminedFitError,
)
from .fitting import fit as run_fit
from .fitting import load_dataset
from .model import occupation_budget
from .optimize import (
    OptInputs,
    classical_bound,
    joint_optimize,
    noise_floor_bound,
    noise_floor_result,
)
from .params import SystemParams
from .simulate import (
    SimConfig,
    estimate_occupancy,
    simulate,
    suggest_config,
    welch_psd,
    write_trajectory,
)
from .spectral import write_spectrum_csv

_BUDGET_UNITS = {
    "E": "rad/s",
    "n_c0": "dimensionless",
    "grad_f": "N/m",
    "force_noise": "N*s^(1/2)",
    "gamma_m": "rad/s",
    "gamma_rp": "rad/s",
    "n_rp": "dimensionless",
    "gamma_ph": "rad/s",
    "omega_m_tilde": "rad/s",
    "n_ph": "dimensionless",
    "n_th": "dimensionless",
    "n_classical": "dimensionless",
    "n_noise": "dimensionless",
    "n_tot": "dimensionless",
    "t_bar": "K",
    "stability_margin": "dimensionless",
}


def _q(value: float, unit: str = "dimensionless") -> dict:
    return {"value": float(value), "unit": unit}


def _provenance(digest: str, seed: int | None) -> dict:
    return {"tool": "photocool", "version": __version__, "config_digest": digest, "seed": seed}


def _write_report(report: dict, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(report))
            fh.write("\n")


def _resolve_device(args) -> tuple[SystemParams, str, dict]:
    if getattr(args, "config", None):
        return load_device_config(args.config)
    if getattr(args, "device", None):
        return bundled_device(args.device)
    raise ConfigValidationError("one of --config PATH or --device NAME is required")


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("PHOTOCOOL_SEED")
    if env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise ConfigValidationError(f"PHOTOCOOL_SEED must be an integer, got {env!r}") from None
        if seed < 0:
            raise ConfigValidationError(f"PHOTOCOOL_SEED must be >= 0, got {seed}")
        return seed
    return 0


def _print(line: str = "") -> None:
    sys.stdout.write(line + "\n")


def cmd_analyze(args) -> int:
    p, name, _meta = _resolve_device(args)
    if args.power is not None:
        p = replace(p, cavity=replace(p.cavity, P=args.power))
    budget = occupation_budget(p, use_effective_temperature=not args.raw_bath_temperature)
    c, m = p.cavity, p.cantilever
    omt = m.omega_m * m.tau
    r = c.Gamma_c / c.alpha
    bounds: dict = {
        "classical_min": _q(classical_bound(p)),
        "noise_min": _q(noise_floor_bound(r, omt)),
    }
    regime = {
        "bad_cavity": bool(c.Gamma_c >= 100.0 * m.omega_m),
        "rp_much_slower_than_mechanical_damping": bool(budget.gamma_rp <= 1e-2 * budget.gamma_m),
        "photothermal_dominates_mechanical_damping": bool(budget.gamma_ph >= 1e2 * budget.gamma_m),
        "quantum_regime_reachable": bool(noise_floor_bound(r, omt) < 1.0),
    }
    if not budget.dark and p.detuning != 0.0:
        try:
            floor = noise_floor_result(OptInputs.from_system(p))
            bounds["noise_floor_at_detuning"] = _q(floor.n_noise)
            bounds["a_opt"] = _q(floor.a_opt)
            bounds["a_actual"] = _q(omt / (m.chi * c.omega_c * c.L_c))
        except HeatingRegimeError:
            pass
    report = {
        "provenance": _provenance(params_digest(p), None),
        "device": name,
        "budget": {k: _q(v, _BUDGET_UNITS[k]) for k, v in budget.as_dict().items() if k != "dark"},
        "dark": budget.dark,
        "bounds": bounds,
        "regime": regime,
    }
    _write_report(report, args.json)
    _print(f"device: {name}  (digest {report['provenance']['config_digest']})")
    for key in _BUDGET_UNITS:
        val = getattr(budget, key)
        _print(f"  {key:<16} {val!r:>24}  {_BUDGET_UNITS[key]}")
    _print(f"  dark: {budget.dark}")
    _print("bounds: " + ", ".join(f"{k}={v['value']:.6g}" for k, v in bounds.items()))
    _print("regime: " + ", ".join(f"{k}={v}" for k, v in regime.items()))
    return 0


_SURVEY_DEVICES = ("verbridge_like", "metzger_like", "favero_like")


def _survey_row(p: SystemParams, published: dict | None) -> dict:
    m = p.cantilever
    t_cfg = p.environment.T
    rows = {}
    for t_label, t in (("T_configured", t_cfg), ("T_77K", 77.0)):
        for f_label, omega in (("omega=2*pi*f", m.omega_m), ("omega=printed_value_rad_s", m.omega_m / (2.0 * np.pi))):
            n_th = KB * t / (HBAR * omega)
            rows[f"{t_label},{f_label}"] = {
                "n_th": _q(n_th),
                "n_c_min": _q(3.0 * np.sqrt(3.0) * n_th / m.Q_m),
            }
    out = {"conventions": rows}
    if published:
        out["published"] = {k: _q(v) for k, v in published.items()}
        used = rows["T_configured,omega=2*pi*f"]
        out["ratio_published_over_computed"] = {
            "n_th": _q(published["n_th"] / used["n_th"]["value"]),
            "n_c_min": _q(published["n_c_min"] / used["n_c_min"]["value"]),
        }
    return out


def cmd_survey(args) -> int:
    names = args.device or list(_SURVEY_DEVICES)
    rows = {}
    digests = {}
    for name in names:
        p, dev_name, meta = bundled_device(name) if not os.path.exists(name) else load_device_config(name)
        rows[dev_name] = _survey_row(p, meta.get("published"))
        rows[dev_name]["omega_m"] = _q(p.cantilever.omega_m, "rad/s")
        rows[dev_name]["Q_m"] = _q(p.cantilever.Q_m)
        digests[dev_name] = params_digest(p)
    report = {
        "provenance": {"tool": "photocool", "version": __version__, "config_digest": digests, "seed": None},
        "convention_used": "T as configured (300 K for the bundled devices), printed frequency read as f with omega = 2*pi*f",
        "alternatives_reported": ["T_77K", "omega=printed_value_rad_s"],
        "rows": rows,
    }
    _write_report(report, args.json)
    _print(f"{'device':<16} {'n_th':>12} {'n_C_min':>12} {'published n_th':>15} {'published n_C_min':>18}")
    for dev_name, row in rows.items():
        used = row["conventions"]["T_configured,omega=2*pi*f"]
        pub = row.get("published", {})
        _print(
            f"{dev_name:<16} {used['n_th']['value']:>12.3g} {used['n_c_min']['value']:>12.3g}"
            f" {pub.get('n_th', {}).get('value', float('nan')):>15.3g}"
            f" {pub.get('n_c_min', {}).get('value', float('nan')):>18.3g}"
        )
    _print(f"convention: {report['convention_used']}")
    return 0


def cmd_simulate(args) -> int:
    p, name, _meta = _resolve_device(args)
    seed = _resolve_seed(args)
    base = suggest_config(p, seed=seed, ensemble=args.ensemble)
    cfg = SimConfig(
        dt=args.dt if args.dt is not None else base.dt,
        t_total=args.t_total if args.t_total is not None else base.t_total,
        t_burn_in=args.burn_in if args.burn_in is not None else base.t_burn_in,
        seed=seed,
        nonlinear_cavity=args.nonlinear,
        ensemble=args.ensemble,
        include_thermal=not args.no_thermal,
        include_shot=not args.no_shot,
        include_rp=not args.no_rp,
        record_stride=args.stride,
    )
    traj = simulate(p, cfg, jobs=args.jobs)
    traj_path = args.out + (".csv" if args.format == "csv" else ".traj")
    write_trajectory(traj, traj_path, fmt=args.format)
    summary: dict = {
        "provenance": _provenance(traj.params_hash, seed),
        "device": name,
        "ensemble": cfg.ensemble,
        "dt": _q(cfg.dt, "s"),
        "t_total": _q(cfg.t_total, "s"),
        "t_burn_in": _q(cfg.t_burn_in, "s"),
        "nonlinear_cavity": cfg.nonlinear_cavity,
        "rng": traj.meta["rng"],
        "instability_detected": traj.instability_detected,
        "trajectory_file": os.path.basename(traj_path),
    }
    if traj.instability_detected:
        summary["stopped_at"] = _q(traj.meta["stopped_at_s"], "s")
        _write_report(summary, args.out + ".summary.json")
        sys.stderr.write(
            f"photocool: runaway displacement at t = {traj.meta['stopped_at_s']!r} s "
            "(static instability reached); partial trajectory written\n"
        )
        return 4
    spec = welch_psd(traj, segments=args.segments)
    write_spectrum_csv(spec, args.out + ".spectrum.csv")
    summary["spectrum_file"] = os.path.basename(args.out) + ".spectrum.csv"
    n_hat, stderr = estimate_occupancy(traj, p)
    summary["n_hat"] = _q(n_hat)
    summary["n_hat_stderr"] = _q(stderr)
    try:
        n_closed = occupation_budget(p).n_tot
        summary["n_tot_closed_form"] = _q(n_closed)
        summary["z_score"] = _q((n_hat - n_closed) / stderr if stderr > 0 else float("nan"))
    except (HeatingRegimeError, InstabilityError):
        summary["n_tot_closed_form"] = None
    _write_report(summary, args.out + ".summary.json")
    _print(f"n_hat = {n_hat!r} +- {stderr!r}  (ensemble {cfg.ensemble}, seed {seed})")
    if summary.get("n_tot_closed_form"):
        _print(f"closed-form n_tot = {summary['n_tot_closed_form']['value']!r}")
    _print(f"wrote {traj_path}, {args.out}.spectrum.csv, {args.out}.summary.json")
    return 0


def cmd_optimize(args) -> int:
    p, name, _meta = _resolve_device(args)
    free = tuple(s.strip() for s in args.free.split(",") if s.strip())
    bounds = {}
    for spec_str in args.bound or []:
        try:
            key, lo_hi = spec_str.split("=", 1)
            lo, hi = (float(v) for v in lo_hi.split(",", 1))
        except ValueError:
            raise ConfigValidationError(f"--bound expects NAME=LO,HI, got {spec_str!r}") from None
        bounds[key.strip()] = (lo, hi)
    seed = _resolve_seed(args)
    res = joint_optimize(p, free=free, bounds=bounds or None, seed=seed, restarts=args.restarts)
    units = {"tau": "s", "chi": "s/m", "P": "W", "delta": "rad/s"}
    report = {
        "provenance": _provenance(params_digest(p), seed),
        "device": name,
        "free": list(res.free),
        "optimal": {k: _q(v, units[k]) for k, v in res.values.items()},
        "n_objective": _q(res.n_objective),
        "n_tot": _q(res.n_tot),
        "n_classical": _q(res.n_classical),
        "n_noise": _q(res.n_noise),
        "classical_bound": _q(res.classical_bound),
        "noise_bound": _q(res.noise_bound),
        "classical_bound_active": res.classical_bound_active,
        "noise_bound_active": res.noise_bound_active,
        "omega_m_tau": _q(res.params.cantilever.omega_m * res.params.cantilever.tau),
        "evaluations": res.n_evaluations,
        "restarts": res.restarts,
        "optimized_config_digest": params_digest(res.params),
    }
    _write_report(report, args.json)
    _print(f"device: {name}  free: {','.join(res.free)}")
    for k, v in res.values.items():
        _print(f"  {k:<6} = {v!r} {units[k]}")
    _print(f"  n_C + n_N = {res.n_objective!r}  (n_C {res.n_classical!r}, n_N {res.n_noise!r})")
    _print(
        f"  bounds: classical {res.classical_bound:.6g} (active: {res.classical_bound_active}), "
        f"noise {res.noise_bound:.6g} (active: {res.noise_bound_active})"
    )
    return 0


def cmd_fit(args) -> int:
    p, name, _meta = _resolve_device(args)
    dataset = load_dataset(args.dataset, device=p)
    free = tuple(s.strip() for s in args.free.split(",") if s.strip())
    res = run_fit(dataset, free=free)
    units = {"chi": "s/m", "epsilon": "dimensionless", "gamma_c_over_alpha": "dimensionless"}
    report = {
        "provenance": _provenance(params_digest(p), None),
        "device": name,
        "dataset": os.path.basename(args.dataset),
        "rows": len(dataset),
        "free": list(res.free),
        "estimates": {k: _q(v, units[k]) for k, v in res.values.items()},
        "stderr": {k: _q(v, units[k]) for k, v in res.stderr.items()},
        "correlation": [[float(v) for v in row] for row in res.correlation],
        "residuals_k": [float(v) for v in res.residuals],
        "chi2_per_dof": _q(res.chi2_per_dof),
        "n_noise_implied": _q(res.n_noise_implied),
        "weakly_identifiable": res.weakly_identifiable,
        "iterations": res.n_iterations,
        "converged": res.converged,
    }
    _write_report(report, args.json)
    _print(f"device: {name}  dataset: {args.dataset} ({len(dataset)} rows)")
    for k in res.values:
        _print(f"  {k:<20} = {res.values[k]!r} +- {res.stderr[k]!r} {units[k]}")
    _print(f"  chi2/dof = {res.chi2_per_dof:.4g}   implied n_N = {res.n_noise_implied:.6g}")
    if res.weakly_identifiable:
        _print("  warning: parameters weakly identifiable (|correlation| > 0.95)")
    return 0


def _add_device_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="device config JSON path")
    sp.add_argument(
        "--device",
        help=f"bundled device name ({', '.join(list_bundled_devices())})",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photocool", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"photocool {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("analyze", help="closed-form occupation budget for a device")
    _add_device_args(sp)
    sp.add_argument("--power", type=float, help="override pump power, W")
    sp.add_argument("--raw-bath-temperature", action="store_true", help="use T instead of the absorption-heated T_bar")
    sp.add_argument("--json", help="write the JSON report here")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("survey", help="cantilever comparison table under all reading conventions")
    sp.add_argument("--device", action="append", help="device name/path (repeatable); default: the three *_like devices")
    sp.add_argument("--json", help="write the JSON report here")
    sp.set_defaults(func=cmd_survey)

    sp = sub.add_parser("simulate", help="stochastic time-domain run with PSD and occupancy")
    _add_device_args(sp)
    sp.add_argument("--out", required=True, help="output prefix (writes .traj/.csv, .spectrum.csv, .summary.json)")
    sp.add_argument("--dt", type=float, help="time step, s (default: resolution bound)")
    sp.add_argument("--t-total", dest="t_total", type=float, help="duration, s")
    sp.add_argument("--burn-in", dest="burn_in", type=float, help="discarded transient, s")
    sp.add_argument("--seed", type=int, help="RNG seed (default: $PHOTOCOOL_SEED or 0)")
    sp.add_argument("--ensemble", type=int, default=4, help="independent trajectories (default 4)")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes for the ensemble")
    sp.add_argument("--stride", type=int, help="record every N-th step (default: 8 samples per period)")
    sp.add_argument("--segments", type=int, default=16, help="Welch segments (default 16)")
    sp.add_argument("--nonlinear", action="store_true", help="full cavity Lorentzian instead of the linearized force")
    sp.add_argument("--no-thermal", action="store_true")
    sp.add_argument("--no-shot", action="store_true")
    sp.add_argument("--no-rp", action="store_true")
    sp.add_argument("--format", choices=("binary", "csv"), default="binary")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("optimize", help="minimize n_C + n_N over device knobs")
    _add_device_args(sp)
    sp.add_argument("--free", default="tau", help="comma list from tau,chi,P,delta (default tau)")
    sp.add_argument("--bound", action="append", help="NAME=LO,HI (repeatable)")
    sp.add_argument("--seed", type=int, help="restart RNG seed")
    sp.add_argument("--restarts", type=int, default=5)
    sp.add_argument("--json", help="write the JSON report here")
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("fit", help="fit chi (and optionally epsilon, Gamma_c/alpha) to a cooling curve")
    _add_device_args(sp)
    sp.add_argument("--dataset", required=True, help="CSV with header power_w,temperature_k[,sigma_k]")
    sp.add_argument("--free", default="chi", help="comma list from chi,epsilon,gamma_c_over_alpha")
    sp.add_argument("--json", help="write the JSON report here")
    sp.set_defaults(func=cmd_fit)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except (
        ConfigValidationError,
        InvalidParameterError,
        DatasetParseError,
        UnderdeterminedFitError,
        TooFewSegmentsError,
        GridTooCoarseError,
        NegativeOccupancyError,
        DegenerateDetuningError,
        FileNotFoundError,
    ) as exc:
        sys.stderr.write(f"photocool: error: {exc}\n")
        return 2
    except (HeatingRegimeError, InstabilityError) as exc:
        sys.stderr.write(f"photocool: {exc}\n")
        return 3
    except (SimulationAbortError, NonstationaryTrajectoryError) as exc:
        sys.stderr.write(f"photocool: simulation aborted: {exc}\n")
        return 4
    except (NoFeasiblePointError, FitDivergedError) as exc:
        sys.stderr.write(f"photocool: {exc}\n")
        return 5


if __name__ == "__main__":
    sys.exit(main())
