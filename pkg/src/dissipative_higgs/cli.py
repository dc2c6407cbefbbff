"""Command-line front end.

::

    dissipative-higgs simulate    --config run.json [--out DIR] [--seed N] [--replicas N]
    dissipative-higgs rates       --config run.json
    dissipative-higgs kernel      --config run.json
    dissipative-higgs noise-stats --config run.json
    dissipative-higgs validate

Exit codes: 0 success, 1 runtime error, 2 configuration error, 3 a
validation check failed.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import dynamics, reservoir, spectra, validation
from .errors import ConfigError, HiggsError
from .outputs import OutputSet

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_VALIDATION = 0, 1, 2, 3

TRAJECTORY_HEADER = ("t", "x1", "x2", "v1", "v2", "E_sys", "E_tot", "L")
KERNEL_HEADER = ("t", "gamma", "gamma_dot")
KK_HEADER = ("omega", "im_gamma", "re_gamma_kk", "re_gamma_analytic")
EIGEN_HEADER = ("index", "energy", "multiplet")
NOISE_HEADER = ("lag", "alpha", "beta", "empirical", "stderr", "analytic", "z")


def _model(cfg):
    return cfg.susceptibility.build() if cfg.susceptibility is not None else None


def _bath(cfg, model, t_max=None):
    b = cfg.bath
    return reservoir.discretize_bath(
        model, n_modes=b.N, omega_max=b.omega_max, t_max=t_max, tolerance=b.tolerance, verify=b.verify
    )


def cmd_simulate(cfg, out: OutputSet):
    space = cfg.space.build()
    potential = cfg.potential.build()
    sim = cfg.sim.build()
    model = _model(cfg)
    bath = kernel = None
    manifest = {}
    if sim.scheme != "conservative":
        bath = _bath(cfg, model)
        manifest["bath"] = bath.describe()
        if sim.scheme == "routeA":
            reach = sim.steps if sim.window is None else min(sim.steps, sim.window)
            kernel = reservoir.kernel_from_model(
                model, sim.dt, sim.dt * reach, omega_max=bath.omega_max, tol=cfg.kernel.tol
            )
            manifest["kernel_quadrature_error"] = kernel.error
    traj = dynamics.run(space, potential, sim, cfg.sim.x0, cfg.sim.v0, bath=bath, kernel=kernel)
    width = len(str(traj.replicas - 1))
    for i in range(traj.replicas):
        name = "trajectory.csv" if traj.replicas == 1 else f"trajectory_{i:0{width}d}.csv"
        rows = traj.columns(i)
        if traj.e_tot is None:
            rows = [r[:6] + (None,) + r[7:] for r in rows]
        out.write_csv(name, TRAJECTORY_HEADER, rows)
    if traj.replicas > 1:
        out.write_csv("trajectory_mean.csv", TRAJECTORY_HEADER, traj.mean().columns(0))
    _figure(out, "trajectory.png", "trajectory_figure", traj, title=f"{sim.scheme}, lambda={space.lam:g}")
    e0 = traj.e_tot[0] if traj.e_tot is not None else traj.e_sys[0]
    manifest["energy_reference"] = e0
    if traj.e_tot is not None:
        manifest["max_relative_energy_drift"] = float(
            np.max(np.abs(traj.e_tot - traj.e_tot[0]) / np.abs(traj.e_tot[0]))
        )
    manifest["trajectory_meta"] = {k: v for k, v in traj.meta.items() if k != "wall_time"}
    return manifest


def cmd_rates(cfg, out: OutputSet):
    sp = cfg.spectra
    lam = cfg.spectra_lambda
    omega0 = cfg.potential.omega0
    basis = spectra.FockBasis2D(sp.n_max)
    H = spectra.build_higgs_hamiltonian(basis, lam, cfg.potential.build())
    eig = spectra.diagonalize(H, basis, lam)
    terms = spectra.vielbein_operator_terms(basis, lam, omega0)
    req = spectra.RateRequest(
        initial=sp.initial,
        lam=lam,
        occupation=sp.occupation.build(),
        line_shape=sp.line_shape.build(),
        model=_model(cfg),
        floor=sp.floor,
    )
    table = spectra.golden_rule_rates(req, eig, terms)
    out.write_csv("rates.csv", spectra.HEADER, table.as_tuples())
    out.write_csv(
        "eigenvalues.csv",
        EIGEN_HEADER,
        [(i, e, int(k)) for i, (e, k) in enumerate(zip(eig.energies, eig.label))],
    )
    _figure(out, "rates.png", "rates_figure", eig, table)
    return {
        "eigen_max_relative_residual": eig.max_residual(),
        "hamiltonian_norm": eig.norm,
        "basis_dimension": basis.dim,
        "rows": len(table),
        "total_gamma_abs": table.total_abs(),
        "total_gamma_emit": table.total_emit(),
    }


def cmd_kernel(cfg, out: OutputSet):
    model = _model(cfg)
    k = cfg.kernel
    kern = reservoir.kernel_from_model(model, k.dt, k.t_max, omega_max=k.omega_max, tol=k.tol)
    out.write_csv("kernel.csv", KERNEL_HEADER, zip(kern.t, kern.gamma, kern.gamma_dot))
    top = k.kk_omega_max if k.kk_omega_max is not None else model.default_omega_max()
    lo, hi = k.kk_eval
    if not 0 <= lo < hi < top:
        raise ConfigError("evaluation band must satisfy 0 <= lo < hi < kk_omega_max", path="kernel.kk_eval")
    u = np.linspace(0.0, top, k.kk_points)
    w = np.linspace(lo, hi, k.kk_eval_points)
    kk = reservoir.kramers_kronig_re(u, model.im_chi(u), w)
    analytic = model.re_chi(w)
    cols = analytic if analytic is not None else [None] * w.size
    out.write_csv("kk.csv", KK_HEADER, zip(w, model.im_chi(w), kk.re, cols))
    _figure(out, "kernel.png", "kernel_figure", kern, kk, analytic)
    manifest = {"kernel_quadrature_error": kern.error, "kk_tail_estimate": kk.tail_estimate}
    if analytic is not None:
        manifest["kk_max_relative_error"] = float(np.max(np.abs(kk.re - analytic) / np.abs(analytic)))
    return manifest


def cmd_noise_stats(cfg, out: OutputSet):
    space = cfg.space.build()
    model = _model(cfg)
    bath = _bath(cfg, model)
    n = cfg.noise
    stats = reservoir.noise_statistics(
        space, n.x, bath, n.lags, n.temperature, cfg.sim.seed, n.replicas, kB=n.kB
    )
    z = stats.z_scores()
    rows = []
    for k, tau in enumerate(stats.lags):
        for a in range(2):
            for b in range(2):
                rows.append((tau, a + 1, b + 1, stats.empirical[k, a, b], stats.stderr[k, a, b],
                             stats.analytic[k, a, b], z[k, a, b]))
    out.write_csv("noise_stats.csv", NOISE_HEADER, rows)
    _figure(out, "noise_stats.png", "covariance_figure", stats.lags, stats.empirical, stats.stderr,
            stats.analytic)
    return {"bath": bath.describe(), "replicas": n.replicas, "max_z": float(np.max(z)),
            "within_3_stderr": bool(np.max(z) <= 3.0)}


def _figure(out, name, builder, *args, **kwargs):
    from . import plotting

    out.figure(name, getattr(plotting, builder)(*args, **kwargs))


COMMANDS = {
    "simulate": cmd_simulate,
    "rates": cmd_rates,
    "kernel": cmd_kernel,
    "noise-stats": cmd_noise_stats,
}


def cmd_validate(stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    results = validation.run_all()
    for r in results:
        print(r.line(), file=stream)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed", file=stream)
    return EXIT_OK if failed == 0 else EXIT_VALIDATION


def build_parser():
    parser = argparse.ArgumentParser(prog="dissipative-higgs", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=name != "validate")
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        p.add_argument("--replicas", type=int, default=None)
    return parser


def _load(args):
    cfg = cfgmod.parse_config(args.config)
    data = cfgmod.dump(cfg)
    if data["mode"] != args.command:
        raise ConfigError(f"config is for mode '{data['mode']}', not '{args.command}'", path="mode")
    if args.seed is not None:
        data["sim"]["seed"] = args.seed
    if args.replicas is not None:
        key = "noise" if args.command == "noise-stats" else "sim"
        data[key]["replicas"] = args.replicas
    if args.out is not None:
        data["output"] = str(args.out)
    return cfgmod.validate_config(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        if args.config is not None:
            try:
                _load(args)
            except ConfigError as exc:
                print(f"config error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
        return cmd_validate()
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    start = time.perf_counter()
    try:
        with OutputSet(cfg.output) as out:
            manifest = COMMANDS[args.command](cfg, out)
            manifest.update(
                mode=args.command,
                seed=cfg.sim.seed,
                config=cfgmod.dump(cfg),
                tolerances={
                    "bath_reconstruction": cfg.bath.tolerance,
                    "kernel_quadrature": cfg.kernel.tol,
                    "eigen_residual": 1e-10,
                },
                wall_time=time.perf_counter() - start,
            )
            path = out.commit(manifest)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HiggsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {', '.join(out.written)} and {path.name} to {cfg.output}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
