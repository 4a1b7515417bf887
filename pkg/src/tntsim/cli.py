"""Command-line front end.

Each command reads an INI config, writes CSV data files plus a JSON run
manifest (config hash, seed, package versions) into the output directory,
and is deterministic under a fixed master seed.

Exit codes: 0 success, 2 configuration error, 3 numerical error.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__, analysis, meanfield, protocols
from .analysis import to_db
from .config import DEFAULT_CONFIG_TEXT, parse_config_file
from .exceptions import ConfigError, NumericsError, TntError
from .mcwf import DEFAULT_CHANNELS
from .spins import moments

_FMT = "{:.17g}"


def _write_manifest(out_dir, command, cfg):
    import numba
    import scipy

    manifest = {
        "command": command,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "mode": cfg.mode,
        "versions": {
            "tntsim": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
    }
    path = os.path.join(out_dir, f"{command}_manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_FMT.format(v) if isinstance(v, float) else str(v) for v in row))
            fh.write("\n")


def _sweep_points(cfg, threads):
    times = cfg.times_s()
    if cfg.mode == "ideal":
        return protocols.ideal_sweep(cfg.params(), cfg.n_atoms, times, echo=cfg.echo)
    channels = cfg.channels or DEFAULT_CHANNELS
    return protocols.ensemble_sweep(
        cfg.params(),
        cfg.n_atoms,
        times,
        channels=channels,
        noise=cfg.noise(),
        n_traj=cfg.n_traj,
        master_seed=cfg.seed,
        echo=cfg.echo,
        pulsed=(cfg.mode == "experiment"),
        pulse_omega=2.0 * math.pi * cfg.omega_pulse_hz,
        prep_pulse_omega=(
            None if cfg.prep_pulse_hz is None else 2.0 * math.pi * cfg.prep_pulse_hz
        ),
        dt=cfg.dt_s(),
        threads=threads,
    )


def cmd_squeeze_sweep(cfg, out_dir, threads):
    points = _sweep_points(cfg, threads)
    rows = [
        (
            p.time,
            to_db(p.xi2_min),
            to_db(p.xi2_s),
            math.degrees(p.alpha_min) if not p.flat else float("nan"),
            to_db(p.xi2_max),
            p.cos_phi,
            p.mean_n,
        )
        for p in points
    ]
    _write_csv(
        os.path.join(out_dir, "squeeze_sweep.csv"),
        ["time_s", "xi2_min_db", "xi2_s_db", "alpha_min_deg", "xi2_max_db", "cos_phi", "mean_n"],
        rows,
    )


def cmd_tomography(cfg, out_dir, threads, time_s):
    angles = np.asarray(cfg.angles_rad())
    if cfg.mode == "ideal":
        state0 = protocols.prepared_state(cfg.params(), cfg.n_atoms)
        from .hamiltonian import build_hamiltonian

        ham = build_hamiltonian(cfg.params(), cfg.n_atoms)
        state = protocols.evolve_times(state0, ham, [time_s])[0]
        result = analysis.tomography(state, angles)
    else:
        channels = cfg.channels or DEFAULT_CHANNELS
        from .mcwf import run_ensemble
        from .sequences import tnt_sequence
        from .spins import SpinMoments

        state0 = protocols.prepared_state(cfg.params(), cfg.n_atoms)
        ens = run_ensemble(
            state0,
            tnt_sequence(cfg.params(), time_s, echo=cfg.echo),
            channels,
            cfg.noise(),
            cfg.n_traj,
            cfg.seed,
            dt=cfg.dt_s(),
            threads=threads,
        )
        mix = SpinMoments(mean=ens.mean_j[0], covariance=ens.covariance_at(0))
        result = analysis.tomography(mix, angles, n_total=float(ens.mean_n[0]))
    result.to_csv(os.path.join(out_dir, "tomography.csv"))
    # cross-check: scan extrema against the closed-form covariance extrema
    ok = True
    if result.var_extrema is not None and not result.flat:
        grid_min = float(np.min(result.xi2_n))
        grid_max = float(np.max(result.xi2_n))
        tol = 4.0 * float(np.max(np.abs(np.diff(result.angles)))) ** 2
        ok = bool(
            abs(grid_min - result.xi2_min) <= tol * max(result.xi2_max, 1.0)
            and abs(grid_max - result.xi2_max) <= tol * max(result.xi2_max, 1.0)
        )
    with open(os.path.join(out_dir, "tomography_check.json"), "w") as fh:
        json.dump(
            {
                "extrema_crosscheck_ok": ok,
                "xi2_min": result.xi2_min,
                "xi2_max": result.xi2_max,
                "alpha_min_deg": math.degrees(result.alpha_min) if not result.flat else None,
                "flat_scan": result.flat,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")


def cmd_classical(cfg, out_dir, threads):
    params = cfg.params()
    meanfield.write_portrait_csv(
        os.path.join(out_dir, "classical_portrait.csv"), params, cfg.n_atoms
    )
    if params.omega != 0.0:
        fps = meanfield.find_fixed_points(params, cfg.n_atoms)
    else:
        fps = []  # pure twisting: poles are the only stationary structures
    rows = []
    for fp in fps:
        e1, e2 = fp.eigenvalues
        rows.append(
            (fp.point.z, fp.point.phi, fp.stability, e1.real, e1.imag, e2.real, e2.imag)
        )
    _write_csv(
        os.path.join(out_dir, "classical_fixed_points.csv"),
        ["z", "phi", "stability", "eig1_re", "eig1_im", "eig2_re", "eig2_im"],
        rows,
    )


def cmd_scaling(cfg, out_dir, threads):
    rng = np.random.default_rng(cfg.seed)
    params = cfg.params()
    site_ns = protocols.lattice_profile(
        cfg.n_sites, cfg.site_n_min, cfg.site_n_max, cfg.profile
    )
    states = protocols.make_site_states(params, site_ns, cfg.ndep_time_ms * 1e-3)
    alpha = math.radians(cfg.alpha_deg)
    table = protocols.sample_array_shots(states, alpha, cfg.shots, rng)
    noise = cfg.noise()
    sigma_sub = 0.0
    if cfg.mode != "ideal" and (cfg.apply_shot_noise or cfg.apply_ramp_loss):
        table = analysis.apply_detection_noise(
            table, noise, rng,
            include_ramp_loss=cfg.apply_ramp_loss,
            include_shot_noise=cfg.apply_shot_noise,
        )
        sigma_sub = noise.sigma_det if cfg.apply_shot_noise else 0.0
    curve = analysis.array_scaling(table, sigma_det_subtract=sigma_sub or None)
    ids = list(table.site_ids)
    site_moments = [moments(s) for s in states]
    rows = []
    for i in range(len(ids)):
        prefix = ids[: i + 1]
        if i == 0:
            xi2_rel = float("nan")
        else:
            half = (i + 2) // 2
            xi2_rel = analysis.differential_squeezing(table, prefix[:half], prefix[half:])
        mean_vecs = np.array([site_moments[int(s)].mean for s in prefix])
        n_tot = float(sum(site_ns[int(s)] for s in prefix))
        v = analysis.visibility(mean_vecs, n_tot)
        xi2_n = curve.xi2_n[i]
        rows.append(
            (
                curve.n_total[i],
                to_db(xi2_n),
                to_db(xi2_rel) if np.isfinite(xi2_rel) else float("nan"),
                v,
                to_db(analysis.wineland_squeezing(xi2_n, v)),
            )
        )
    _write_csv(
        os.path.join(out_dir, "scaling.csv"),
        ["n_tot", "xi2_n_db", "xi2_rel_db", "v", "xi2_s_db"],
        rows,
    )


def cmd_ndep(cfg, out_dir, threads):
    n_values = [int(n) for n in cfg.ndep_n_values]
    results = protocols.ndep_sweep(cfg.params(), n_values, cfg.ndep_time_ms * 1e-3)
    rows = [
        (
            n,
            to_db(point.xi2_s),
            math.degrees(point.alpha_min) if not point.flat else float("nan"),
            to_db(point.xi2_max),
        )
        for n, point in results
    ]
    _write_csv(
        os.path.join(out_dir, "ndep.csv"),
        ["n_atoms", "xi2_s_db", "alpha_min_deg", "xi2_max_db"],
        rows,
    )


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="tntsim",
        description="Twist-and-turn / one-axis-twisting spin squeezing simulator",
    )
    parser.add_argument("--print-default-config", action="store_true",
                        help="print a template config and exit")
    sub = parser.add_subparsers(dest="command")
    for name, help_text in [
        ("squeeze-sweep", "squeezing parameters versus evolution time"),
        ("tomography", "variance-vs-angle scan at one evolution time"),
        ("classical", "phase-space portrait and fixed-point census"),
        ("scaling", "array scaling of number and differential squeezing"),
        ("ndep", "final-state characteristics versus atom number"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="INI config path")
        p.add_argument("--out", default="tnt_out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--threads", type=int, default=None, help="worker threads")
        p.add_argument("--mode", default=None, choices=["ideal", "mcwf", "experiment"])
        if name == "tomography":
            p.add_argument("--time-ms", type=float, default=None,
                           help="evolution time (default: first protocol time)")
    args = parser.parse_args(argv)

    if args.print_default_config:
        sys.stdout.write(DEFAULT_CONFIG_TEXT)
        return 0
    if args.command is None:
        parser.print_help()
        return 2

    try:
        cfg = parse_config_file(args.config)
        cfg = cfg.override(mode=args.mode, seed=args.seed)
        threads = args.threads
        if threads is None and cfg.threads > 0:
            threads = cfg.threads
        if threads is None and os.environ.get("TNT_THREADS"):
            threads = int(os.environ["TNT_THREADS"])
        os.makedirs(args.out, exist_ok=True)
        if args.command == "squeeze-sweep":
            cmd_squeeze_sweep(cfg, args.out, threads)
        elif args.command == "tomography":
            time_s = (args.time_ms if args.time_ms is not None else cfg.times_ms[0]) * 1e-3
            cmd_tomography(cfg, args.out, threads, time_s)
        elif args.command == "classical":
            cmd_classical(cfg, args.out, threads)
        elif args.command == "scaling":
            cmd_scaling(cfg, args.out, threads)
        elif args.command == "ndep":
            cmd_ndep(cfg, args.out, threads)
        _write_manifest(args.out, args.command.replace("-", "_"), cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericsError, TntError, ValueError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
