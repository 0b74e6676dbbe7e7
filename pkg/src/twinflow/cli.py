"""Command-line surface: simulate, estimate, spatial analysis, calculators.

Exit codes: 0 success, 1 runtime failure (one-line diagnostic on stderr),
2 usage errors.  The TWINFLOW_OUT environment variable supplies the default
output root when neither the config nor --output names a directory.
"""

import argparse
import os
import sys

import numpy as np

from . import estimators as est
from .analysis import (
    bin_velocity_profile,
    green_kubo_viscosity,
    friction_coefficient_gk,
    grid_flow_field,
    normalize_viscosity,
    relative_viscosity,
    slip_length_emd,
    slip_length_profile,
)
from .config import ConfigError, load_config
from .runner import load_run, run_replicas
from .tableio import (
    write_field,
    write_profile,
    write_report,
    write_viscosity_profile,
)
from .units import MASS_KG

ENV_OUTPUT = "TWINFLOW_OUT"


class CliError(RuntimeError):
    pass


def _mass_kg(args):
    if getattr(args, "mass_kg", None):
        return args.mass_kg
    species = getattr(args, "species", "water")
    if species not in MASS_KG:
        raise CliError(f"unknown species {species!r}; use --mass-kg")
    return MASS_KG[species]


def _resolve_output(args_output, config_dir):
    if args_output:
        return args_output
    if config_dir and config_dir != ".":
        return config_dir
    root = os.environ.get(ENV_OUTPUT)
    if root:
        return root
    return config_dir or "."


def _window(config, override_start):
    start = override_start if override_start is not None else config.window_start()
    return (start, config.production_steps + 1)


def _lambda_series(config, replicas):
    logs = [r.dh for r in replicas if r.dh is not None]
    if not logs or len(logs) != len(replicas):
        return None
    return est.build_lambda_series(np.stack(logs), beta=config.beta)


def _particle_columns(replicas, config, window, method):
    rows = {"z": [], "x": [], "value": [], "vz": [], "replica": []}
    lo, hi = window
    for rep in replicas:
        tab = rep.particles
        if tab is None:
            raise CliError(
                "run lacks particle records; simulate with record_particles = true")
        step = tab["step"]
        keep = (step >= lo) & (step < hi)
        if method == "apm":
            value = tab["vx"][keep] - tab["vx_aux"][keep]
            vz = tab["vz"][keep] - tab["vz_aux"][keep]
        else:
            value = tab["vx"][keep]
            vz = tab["vz"][keep]
        rows["z"].append(tab["z"][keep])
        rows["x"].append(tab["x"][keep])
        rows["value"].append(value)
        rows["vz"].append(vz)
        rows["replica"].append(np.full(int(keep.sum()), rep.index))
    return {k: np.concatenate(v) for k, v in rows.items()}


def cmd_simulate(args):
    config = load_config(args.config)
    out_dir = _resolve_output(args.output, config.directory)
    manifest = run_replicas(config, out_dir=out_dir, workers=args.workers)
    failed = [e["index"] for e in manifest["replicas"] if e["status"] != "ok"]
    print(f"run written to {out_dir} ({len(manifest['replicas'])} replicas"
          + (f", FAILED: {failed}" if failed else "") + ")")
    return 1 if failed else 0


def cmd_estimate(args):
    config, _, replicas = load_run(args.run)
    window = _window(config, args.window_start)
    series = [r.series for r in replicas]
    reports = [est.conventional_estimate(series, window)]
    if config.twin:
        lam = _lambda_series(config, replicas)
        reports.append(est.apm_estimate(series, window, a_ec=0.0,
                                        tau_a=config.tau_a, dt=config.dt,
                                        lambda_series=lam))
    for r in reports:
        print(f"{r.method:>12s}: mean={r.mean: .6e}  se={r.se:.3e}"
              + (f"  (stat {r.se_stat:.3e} + bias {r.se_bias:.3e})"
                 if r.method == "apm" else ""))
    if len(reports) == 2 and reports[0].se > 0:
        print(f"        gamma: empirical={reports[1].gamma_empirical:.3e}"
              f"  formula={reports[1].gamma:.3e}")
    out = args.output or os.path.join(args.run, "report.tsv")
    write_report(out, reports)
    print(f"report written to {out}")
    return 0


def cmd_profile(args):
    config, _, replicas = load_run(args.run)
    window = _window(config, args.window_start)
    cols = _particle_columns(replicas, config, window, args.method)
    a_ec = 0.0
    profile = bin_velocity_profile(cols["z"], cols["value"], cols["replica"],
                                   args.bin_width, a_ec=a_ec,
                                   method=args.method)
    out = args.output or os.path.join(args.run, f"profile_{args.method}.tsv")
    write_profile(out, profile)
    print(f"profile ({int(profile.occupied.sum())} occupied bins) written to {out}")
    return 0


def cmd_flowfield(args):
    config, _, replicas = load_run(args.run)
    window = _window(config, args.window_start)
    cols = _particle_columns(replicas, config, window, args.method)
    field = grid_flow_field(cols["x"], cols["z"], cols["value"], cols["vz"],
                            cell=args.cell, method=args.method)
    out = args.output or os.path.join(args.run, f"field_{args.method}.tsv")
    write_field(out, field)
    nx, nz = field.shape
    print(f"flow field {nx}x{nz} written to {out}")
    return 0


def _eta_eff_from_run(config, replicas, t_max):
    volume = config.n_fluid / config.density
    etas = []
    for rep in replicas:
        if rep.pxy is None:
            raise CliError(
                "run lacks pressure records; simulate with record_pressure = true")
        times = rep.pxy["time"]
        pxy = rep.pxy["sxy"] / volume
        etas.append(green_kubo_viscosity(times, pxy, volume,
                                         config.temperature, t_max))
    return float(np.mean(etas)), volume


def cmd_viscosity(args):
    config, _, replicas = load_run(args.run)
    window = _window(config, args.window_start)
    cols = _particle_columns(replicas, config, window, "apm")
    profile = bin_velocity_profile(cols["z"], cols["value"], cols["replica"],
                                   args.bin_width)
    z_m = args.z_mid if args.z_mid is not None else \
        float(np.median(profile.centers[profile.occupied]))
    centers, ratio, included, z_ref = relative_viscosity(profile, z_m)
    eta_eff, _ = _eta_eff_from_run(config, replicas, args.t_max)
    vp = normalize_viscosity(centers, ratio, included, eta_eff, z_ref)
    out = args.output or os.path.join(args.run, "viscosity.tsv")
    write_viscosity_profile(out, vp)
    print(f"eta_eff={vp.eta_eff:.4f}  eta_m={vp.eta_m:.4f}  "
          f"({int(vp.included.sum())} bins) written to {out}")
    return 0


def cmd_slip(args):
    config, _, replicas = load_run(args.run)
    if args.method == "profile":
        window = _window(config, args.window_start)
        cols = _particle_columns(replicas, config, window, "apm")
        profile = bin_velocity_profile(cols["z"], cols["value"],
                                       cols["replica"], args.bin_width)
        area = config.wall_nx * config.wall_ny * config.wall_spacing ** 2
        res = slip_length_profile(profile, config.v_wall, config.n_fluid,
                                  config.density, area,
                                  bulk_fraction=args.bulk_fraction)
        print(f"slip length = {res.slip_length:.4f} +/- {res.se:.4f}  "
              f"(shear rate {res.shear_rate:.3e} +/- {res.shear_rate_se:.3e})")
    else:
        area = config.wall_nx * config.wall_ny * config.wall_spacing ** 2
        ks = []
        for rep in replicas:
            if rep.wall_force is None:
                raise CliError("run lacks wall-force records; simulate with "
                               "record_wall_force = true")
            for col in ("fx_bottom", "fx_top"):
                k, _ = friction_coefficient_gk(rep.wall_force["time"],
                                               rep.wall_force[col], area,
                                               config.temperature,
                                               t_max=args.t_max)
                ks.append(abs(k))
        k_mean = float(np.mean(ks))
        if args.eta is None:
            raise CliError("the friction route needs --eta")
        l_s, l_se = slip_length_emd(args.eta, k_mean)
        print(f"friction k = {k_mean:.4e}; slip length = {l_s:.4f} +/- {l_se:.4f}")
    return 0


def cmd_calc(args):
    kind = args.kind
    if kind == "rf":
        val = est.relative_fluctuation(args.v, args.n, args.temp, _mass_kg(args))
        print(f"{val:.6e}")
    elif kind == "sigma":
        print(f"{est.com_velocity_sigma(args.n, args.temp, _mass_kg(args)):.6e}")
    elif kind == "samples":
        n = est.required_samples(args.v, args.rse, args.n, args.temp, _mass_kg(args))
        print(f"{n:.6e}")
    elif kind == "gamma":
        lam = None
        if args.lambda_const is not None:
            if args.c is None or args.alpha is None:
                raise CliError("--lambda-const needs --alpha and --c")
            steps = np.arange(1, args.c)
            lam = est.LambdaSeries(steps=steps,
                                   values=np.full(len(steps), args.lambda_const),
                                   beta=1.0, n_replicas=args.m)
        rep = est.gamma_ratio(args.sigma_b, args.sigma_a, m=args.m,
                              lambda_series=lam, alpha=args.alpha,
                              c_steps=args.c)
        print(f"gamma = {rep.gamma:.6e}")
        print(f"sample_reduction = {rep.sample_reduction:.6e}")
        print(f"efficiency_gain = {rep.efficiency_gain:.6e}")
    elif kind == "bias":
        steps = np.arange(1, args.c)
        lam = est.LambdaSeries(steps=steps,
                               values=np.full(len(steps), args.lambda_const),
                               beta=1.0, n_replicas=1)
        running, cap = est.bias_bound(lam, args.alpha, args.sigma_a, args.c)
        print(f"running = {running:.6e}")
        print(f"cap = {cap:.6e}")
    elif kind == "cputime":
        years = est.cpu_time_estimate(args.gamma, args.ns, args.hours_per_ns,
                                      args.cores)
        print(f"{years:.6e}")
    elif kind == "drainage":
        from .analysis import drainage_shear_velocity
        v_s = drainage_shear_velocity(args.vn, args.radius, args.gap, args.ls,
                                      r_frac=args.r_frac)
        print(f"{v_s:.6e}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="twinflow",
                                description="twin-trajectory shear-flow toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the configured replicas")
    s.add_argument("--config", required=True)
    s.add_argument("--output", default=None)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("estimate", help="scalar estimates from a finished run")
    s.add_argument("--run", required=True)
    s.add_argument("--window-start", type=int, default=None)
    s.add_argument("--output", default=None)
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("profile", help="z-binned velocity profile")
    s.add_argument("--run", required=True)
    s.add_argument("--bin-width", type=float, default=0.25)
    s.add_argument("--method", choices=("apm", "con"), default="apm")
    s.add_argument("--window-start", type=int, default=None)
    s.add_argument("--output", default=None)
    s.set_defaults(func=cmd_profile)

    s = sub.add_parser("flowfield", help="x-z gridded flow field")
    s.add_argument("--run", required=True)
    s.add_argument("--cell", type=float, default=0.5)
    s.add_argument("--method", choices=("apm", "con"), default="apm")
    s.add_argument("--window-start", type=int, default=None)
    s.add_argument("--output", default=None)
    s.set_defaults(func=cmd_flowfield)

    s = sub.add_parser("viscosity", help="local viscosity profile")
    s.add_argument("--run", required=True)
    s.add_argument("--bin-width", type=float, default=0.5)
    s.add_argument("--z-mid", type=float, default=None)
    s.add_argument("--t-max", type=float, default=2.0)
    s.add_argument("--window-start", type=int, default=None)
    s.add_argument("--output", default=None)
    s.set_defaults(func=cmd_viscosity)

    s = sub.add_parser("slip", help="slip length from profile or friction")
    s.add_argument("--run", required=True)
    s.add_argument("--method", choices=("profile", "emd"), default="profile")
    s.add_argument("--bin-width", type=float, default=0.5)
    s.add_argument("--bulk-fraction", type=float, default=0.5)
    s.add_argument("--window-start", type=int, default=None)
    s.add_argument("--t-max", type=float, default=2.0)
    s.add_argument("--eta", type=float, default=None,
                   help="bulk viscosity for the friction route")
    s.set_defaults(func=cmd_slip)

    s = sub.add_parser("calc", help="closed-form calculators")
    calc = s.add_subparsers(dest="kind", required=True)

    c = calc.add_parser("rf", help="relative fluctuation of the flow velocity")
    c.add_argument("--v", type=float, required=True)
    c.add_argument("--n", type=float, required=True)
    c.add_argument("--temp", type=float, default=298.0)
    c.add_argument("--species", default="water")
    c.add_argument("--mass-kg", type=float, default=None)

    c = calc.add_parser("sigma", help="canonical COM velocity std")
    c.add_argument("--n", type=float, required=True)
    c.add_argument("--temp", type=float, default=298.0)
    c.add_argument("--species", default="water")
    c.add_argument("--mass-kg", type=float, default=None)

    c = calc.add_parser("samples", help="independent samples for a target RSE")
    c.add_argument("--v", type=float, required=True)
    c.add_argument("--rse", type=float, required=True)
    c.add_argument("--n", type=float, required=True)
    c.add_argument("--temp", type=float, default=298.0)
    c.add_argument("--species", default="water")
    c.add_argument("--mass-kg", type=float, default=None)

    c = calc.add_parser("gamma", help="efficiency ratio and gains")
    c.add_argument("--sigma-b", type=float, required=True)
    c.add_argument("--sigma-a", type=float, required=True)
    c.add_argument("--m", type=int, default=1)
    c.add_argument("--alpha", type=float, default=None)
    c.add_argument("--c", type=int, default=None)
    c.add_argument("--lambda-const", type=float, default=None)

    c = calc.add_parser("bias", help="bias bound and geometric cap")
    c.add_argument("--lambda-const", type=float, required=True)
    c.add_argument("--alpha", type=float, required=True)
    c.add_argument("--c", type=int, required=True)
    c.add_argument("--sigma-a", type=float, default=1.0)

    c = calc.add_parser("cputime", help="conventional-parity CPU-years")
    c.add_argument("--gamma", type=float, required=True)
    c.add_argument("--ns", type=float, default=1.0)
    c.add_argument("--hours-per-ns", type=float, default=7.5)
    c.add_argument("--cores", type=int, default=32)

    c = calc.add_parser("drainage", help="sphere-plane shear velocity")
    c.add_argument("--vn", type=float, required=True)
    c.add_argument("--radius", "--R", dest="radius", type=float, required=True)
    c.add_argument("--gap", "--h", dest="gap", type=float, required=True)
    c.add_argument("--ls", type=float, required=True)
    c.add_argument("--r-frac", type=float, default=0.45)

    s.set_defaults(func=cmd_calc)
    return p


def cli_dispatch(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ConfigError, FileNotFoundError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None):
    return cli_dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
