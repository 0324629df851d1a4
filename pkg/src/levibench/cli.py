"""Command-line front end.

Subcommands: optics-sweep, noise-budget, simulate, analyze, sensitivity,
amin.  Every run writes its artifacts plus a manifest (normalized config,
config hash, seed, package versions) into the output directory; re-running
with the same manifest inputs reproduces byte-identical CSV bodies.

Exit codes: 0 success, 1 user error (bad config/arguments/files),
2 internal or analysis error.  Errors are reported as one JSON object on
stdout.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import recordio
from .config import ConfigError, RunConfig
from .constants import G_STANDARD
from .dynamics import detector_voltage, simulate
from .model_core import sql_acc_noise, thermal_force_psd
from .optics import optimize_detection, transmission
from .sensing import (
    acceleration_sensitivity,
    amin_demodulate,
    amin_predict_curve,
)
from .spectral import (
    calibrate_conversion,
    effective_temperature_estimate,
    lorentzian_fit,
    welch_psd,
)


def _apply_thread_cap() -> None:
    cap = os.environ.get("LEVIBENCH_THREADS")
    if not cap:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        return
    try:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except Exception:
        pass


def _load_config(args) -> RunConfig:
    if args.config:
        cfg = config_mod.parse_config(args.config, profile=args.profile)
    else:
        cfg = config_mod.load_profile(args.profile or "desk")
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _cmd_optics_sweep(cfg: RunConfig, out: Path) -> list[str]:
    train = cfg.train()
    sw = cfg.data["sweep"]
    x_grid = np.linspace(-sw["x_fib_halfspan_m"], sw["x_fib_halfspan_m"], sw["n_x_fib"])
    cols_x, cols_dx, cols_t, cols_r = [], [], [], []
    for dx in sw["dx_values_m"]:
        for xf in x_grid:
            smp = transmission(train, float(xf), float(dx))
            cols_x.append(smp.x_fib_m)
            cols_dx.append(smp.dx_m)
            cols_t.append(smp.t_coeff)
            cols_r.append(smp.responsivity_per_m)
    recordio.write_csv(
        out / "optics_sweep.csv",
        ["x_fib_m", "dx_m", "T", "dT_dx_per_m"],
        [cols_x, cols_dx, cols_t, cols_r],
    )
    return ["optics_sweep.csv"]


def _cmd_noise_budget(cfg: RunConfig, out: Path) -> list[str]:
    train = cfg.train()
    osc = cfg.oscillator()
    sw = cfg.data["sweep"]
    grid = np.linspace(-sw["x_fib_halfspan_m"], sw["x_fib_halfspan_m"], sw["n_x_fib"])
    opt = optimize_detection(
        train, osc, x_fib_grid=grid, p_bounds_w=(sw["p_min_w"], sw["p_max_w"])
    )
    recordio.write_csv(
        out / "noise_budget.csv",
        ["x_fib_m", "sqrt_saa_mea_g_per_rtHz", "p_opt_w"],
        [
            opt.sweep_x_fib_m,
            opt.sweep_sqrt_saa / G_STANDARD,
            np.nan_to_num(opt.sweep_p_opt_w, nan=0.0),
        ],
    )
    sql = sql_acc_noise(osc, 1.0)
    thermal = math.sqrt(thermal_force_psd(osc) / osc.mass_kg**2)
    recordio.write_json(
        out / "noise_budget.json",
        {
            "x_fib_opt_m": opt.x_fib_m,
            "p_in_opt_w": opt.p_in_w,
            "min_sqrt_saa_mea_g_per_rtHz": opt.sqrt_saa_mea / G_STANDARD,
            "eta_at_optimum": opt.eta,
            "boundary_hit": opt.boundary_hit,
            "sql_g_per_rtHz": sql / G_STANDARD,
            "thermal_g_per_rtHz": thermal / G_STANDARD,
            "psd_convention": "one-sided-per-Hz",
        },
    )
    return ["noise_budget.csv", "noise_budget.json"]


def _cmd_simulate(cfg: RunConfig, out: Path, fmt: str) -> list[str]:
    plan = cfg.plan()
    rec = simulate(plan)
    arts = []
    if plan.channel is not None:
        vrec = detector_voltage(rec, plan)
        path = recordio.save_record(vrec, out / "record", fmt=fmt)
        arts.append(path.name)
    else:
        path = recordio.save_record(rec, out / "record", fmt=fmt)
        arts.append(path.name)
    arts.append(path.name + ".json")
    return arts


def _cmd_analyze(cfg: RunConfig, out: Path, record_path: str, xi: float | None) -> list[str]:
    rec = recordio.load_record(record_path)
    osc = cfg.oscillator()
    ana = cfg.data["analysis"]
    seg = min(int(ana["segment_length"]), len(rec.samples))
    spec = welch_psd(rec, segment_length=seg, window=ana["window"], overlap=ana["overlap"])
    fit = lorentzian_fit(spec, f0_guess_hz=osc.f0_hz, band_hz=ana["band_hz"])
    recordio.write_csv(
        out / "spectrum.csv",
        ["f_hz", f"psd_{spec.unit}2_per_hz"],
        [spec.freqs_hz, spec.psd],
    )
    errs = fit.param_errors()
    recordio.write_json(
        out / "fit.json",
        {
            "f0_hz": fit.f0_hz,
            "gamma_hz": fit.gamma_hz,
            "omega0_rad_s": fit.omega0_rad_s,
            "gamma_rad_s": fit.gamma_rad_s,
            "peak_scale": fit.peak_scale,
            "baseline": fit.baseline,
            "area": fit.area,
            "param_errors": list(map(float, errs)),
            "covariance": [list(map(float, row)) for row in fit.covariance],
            "gof_chi2_red": fit.gof_chi2_red,
            "n_avg": spec.n_avg,
            "psd_convention": "one-sided-per-Hz",
        },
    )
    cal = {}
    xi_cal, s_imp_cal = calibrate_conversion(fit, osc, osc.temp_env)
    cal["xi_v_per_m_assuming_temp_env"] = xi_cal
    cal["s_xx_imp_m2_hz_assuming_temp_env"] = s_imp_cal
    if xi is not None:
        t_eff, dt_eff = effective_temperature_estimate(fit, xi, osc, rec.duration_s)
        cal["xi_v_per_m_external"] = xi
        cal["t_eff_k"] = t_eff
        cal["dt_eff_k"] = dt_eff
        cal["s_xx_imp_m2_hz"] = fit.baseline / xi**2
    recordio.write_json(out / "calibration.json", cal)
    return ["spectrum.csv", "fit.json", "calibration.json"]


def _cmd_sensitivity(cfg: RunConfig, out: Path, t_eff: float | None) -> list[str]:
    osc = cfg.oscillator()
    t_eff = t_eff if t_eff is not None else osc.temp_env
    report = acceleration_sensitivity(osc, t_eff, cfg.data["noise"]["s_xx_imp_m2_hz"])
    recordio.write_json(out / "sensitivity.json", report.to_dict())
    return ["sensitivity.json"]


def _cmd_amin(cfg: RunConfig, out: Path, record_path: str | None, xi: float | None, t_eff: float | None) -> list[str]:
    osc = cfg.oscillator()
    t_grid = np.asarray(cfg.data["analysis"]["t_grid_s"], dtype=float)
    t_eff = t_eff if t_eff is not None else osc.temp_env
    report = acceleration_sensitivity(osc, t_eff, cfg.data["noise"]["s_xx_imp_m2_hz"])
    pred = amin_predict_curve(report, t_grid)
    arts = []
    if record_path is None:
        recordio.write_csv(
            out / "amin.csv",
            ["t_s", "a_min_g", "method"],
            [pred.times_s, pred.a_min_g, ["predicted"] * len(t_grid)],
        )
        arts.append("amin.csv")
    else:
        rec = recordio.load_record(record_path)
        xi_use = xi
        if xi_use is None and rec.kind == "voltage_v":
            xi_use = rec.meta.get("xi_v_per_m")
            if xi_use is None:
                raise ConfigError("--xi is required for a voltage record without xi metadata")
        curve = amin_demodulate(rec, xi_use or 1.0, osc, t_grid)
        recordio.write_csv(
            out / "amin.csv",
            ["t_s", "a_min_g", "method"],
            [curve.times_s, curve.a_min_g, ["demodulated"] * len(t_grid)],
        )
        arts.append("amin.csv")
    recordio.write_json(
        out / "amin.json",
        {
            "predicted_a_min_g": list(map(float, pred.a_min_g)),
            "t_grid_s": list(map(float, t_grid)),
            "sqrt_saa_tot_g_per_rtHz": report.sqrt_saa_tot_g,
        },
    )
    arts.append("amin.json")
    return arts


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levibench",
        description="Levitated-microsphere accelerometer simulator and analysis toolkit",
    )
    parser.add_argument("--config", help="JSON config file (merged over the profile)")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the plan seed")
    parser.add_argument(
        "--profile", choices=sorted(config_mod.PROFILES), default=None,
        help="base parameter profile (default: desk, or the config's own)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("optics-sweep", help="transmission/responsivity sweep CSV")
    sub.add_parser("noise-budget", help="measurement-noise optimization sweep")
    p_sim = sub.add_parser("simulate", help="run the stochastic simulation")
    p_sim.add_argument("--format", choices=["csv", "npy"], default="csv")
    p_ana = sub.add_parser("analyze", help="welch -> fit -> calibrate -> T_eff")
    p_ana.add_argument("--record", required=True)
    p_ana.add_argument("--xi", type=float, default=None,
                       help="external displacement-voltage calibration [V/m]")
    p_sen = sub.add_parser("sensitivity", help="acceleration sensitivity report")
    p_sen.add_argument("--t-eff", type=float, default=None)
    p_amin = sub.add_parser("amin", help="minimum resolvable acceleration curve")
    p_amin.add_argument("--record", default=None)
    p_amin.add_argument("--xi", type=float, default=None)
    p_amin.add_argument("--t-eff", type=float, default=None)
    return parser


def run_command(args) -> int:
    _apply_thread_cap()
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}))
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "optics-sweep":
            arts = _cmd_optics_sweep(cfg, out)
        elif args.command == "noise-budget":
            arts = _cmd_noise_budget(cfg, out)
        elif args.command == "simulate":
            arts = _cmd_simulate(cfg, out, args.format)
        elif args.command == "analyze":
            arts = _cmd_analyze(cfg, out, args.record, args.xi)
        elif args.command == "sensitivity":
            arts = _cmd_sensitivity(cfg, out, args.t_eff)
        elif args.command == "amin":
            arts = _cmd_amin(cfg, out, args.record, args.xi, args.t_eff)
        else:  # pragma: no cover - argparse guards this
            raise ValueError(f"unknown command {args.command}")
    except (ConfigError, FileNotFoundError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 1
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 2
    seed = cfg.data["simulation"]["seed"]
    recordio.write_manifest(out, args.command, cfg.data, seed, arts)
    print(json.dumps({"status": "ok", "out": str(out), "artifacts": sorted(arts)}))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    return run_command(args)


if __name__ == "__main__":
    sys.exit(main())
