"""Command-line interface: ``fvac run|traj|floquet|entropy|rate``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import ensemble as ens
from . import observables as obs
from .dynamics import IntegrationError, run_trajectory
from .initstate import sample_initial
from .lattice import build_lattice
from .params import DimensionlessParams
from .snapshot import write_snapshot

OVERRIDABLE = list(cfgmod.DIMENSIONLESS_KEYS) + [k for k in cfgmod.RUN_KEYS if k != "seed"]


class UsageError(Exception):
    pass


def _add_config_overrides(p):
    p.add_argument("config", help="configuration file")
    p.add_argument("--seed", type=int, help="master seed (overrides the file)")
    p.add_argument("--out", help="output directory (default: <config stem>_out)")
    g = p.add_argument_group("parameter overrides (same names as the config keys)")
    for key in OVERRIDABLE:
        g.add_argument(f"--{key}", dest=f"ov_{key}", metavar="VALUE")


def _load(args):
    rc = cfgmod.read_config(args.config)
    overrides = {k: getattr(args, f"ov_{k}") for k in OVERRIDABLE if getattr(args, f"ov_{k}") is not None}
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if overrides:
        rc = rc.with_overrides(overrides)
    out = Path(args.out) if args.out else Path(args.config).with_suffix("").parent / (Path(args.config).stem + "_out")
    return rc, out


def cmd_run(args):
    rc, out = _load(args)
    manifest = ens.RunManifest.from_config(rc, out)
    results = ens.run_manifest(manifest, workers=args.workers, progress=None if args.quiet else ens.log_progress)
    for point, stats in results:
        fit = stats.fit
        rate = "n/a" if fit is None else f"{fit.rate:.6g} +- {fit.stderr:.2g} {' '.join(fit.flags)}".rstrip()
        print(f"{point.output_dir}: {stats.n_completed}/{point.n_traj} trajectories, "
              f"Gamma = {rate}, peak S_T = {np.nanmax(stats.entropy):.4g}, "
              f"{point.M} modes {stats.stability.get('classification')}")
        if not stats.complete:
            print(f"  incomplete: {len(stats.failures)} trajectories failed", file=sys.stderr)
    return 0 if all(st.complete for _, st in results) else 3


def cmd_traj(args):
    rc, out = _load(args)
    if rc.scan:
        raise UsageError("traj runs a single trajectory; remove the scan block")
    manifest = ens.RunManifest.from_config(rc, out)
    manifest = ens.RunManifest(**{**manifest.__dict__, "n_traj": 1, "snapshots": True})
    lattice = build_lattice(manifest.M, manifest.params.L)
    mask = lattice.cutoff_mask(manifest.cfg.k_cut)
    sample = sample_initial(manifest.initial_state, lattice, manifest.params, manifest.master_seed, args.index, mask)
    rec = run_trajectory(sample, manifest.params, lattice, manifest.cfg, mask, keep_fields=True)
    out.mkdir(parents=True, exist_ok=True)
    stability = obs.stability_report(lattice, manifest.params, manifest.cfg.k_cut).as_dict()
    ens.write_manifest(out, manifest, stability)
    write_snapshot(out / f"traj_{args.index}.snap", ens._snapshot_from(rec, manifest))
    header = f"# manifest_sha256={manifest.sha256}\n# rows: t, then p_z at x = " + \
        " ".join(f"{v:.6g}" for v in lattice.x[:3]) + " ...\n"
    with open(out / f"pz_{args.index}.csv", "w") as fh:
        fh.write(header)
        for t, row in zip(rec.times, rec.pz):
            fh.write(",".join(repr(float(v)) for v in np.concatenate([[t], row])) + "\n")
    fb = obs.first_bubble(rec.pz, rec.times)
    print(f"trajectory {args.index}: final <cos phi_a> = {rec.mean_cos[-1]:.4f}; "
          + ("no bubble" if fb is None else f"first bubble at t = {fb[0]:.3g} ({fb[2][1]} sites)"))
    print(f"wrote {out}")
    return 0


def cmd_floquet(args):
    if args.nu <= 0 or args.omega <= 0:
        raise UsageError("--nu and --omega must be positive")
    sigmas = [args.sigma] if args.sigma is not None else [-1, 1]
    print(f"nu_tilde = {args.nu:g}, omega_tilde = {args.omega:g}")
    for s in sigmas:
        k = obs.floquet_critical_k(args.nu, args.omega, s)
        print(f"  sigma = {s:+d}: k_c = {'no unstable band' if k is None else f'{k:.2f}'}")
    params = DimensionlessParams(L=args.L, nu=args.nu, omega=args.omega)
    for M in args.M:
        rep = obs.stability_report(build_lattice(M, args.L), params, args.k_cut)
        print(f"  M = {M:5d}, L = {args.L:g}: k_nyq = {rep.k_nyquist:.2f} -> {rep.classification}")
    return 0


def cmd_entropy(args):
    t, S, clamped = ens.entropy_from_snapshots(args.directory, args.regions, args.window)
    out = Path(args.directory) / f"entropy_l{args.regions}_w{args.window or 'default'}.csv"
    lines = ["t,S_T"] + [f"{ti!r},{si!r}" for ti, si in zip(t.tolist(), S.tolist())]
    out.write_text("\n".join(lines) + "\n")
    print(f"S_T(0) = {S[0]:.4f}, peak = {S.max():.4f} at t = {t[np.argmax(S)]:.3g}, final = {S[-1]:.4f}; "
          f"{clamped} clamped region phases")
    print(f"wrote {out}")
    return 0


def cmd_rate(args):
    t, series, comment = ens.read_series_csv(args.csv)
    window = tuple(args.window) if args.window else None
    fit = obs.tunneling_rate(series, t, threshold=args.threshold, window=window,
                             min_trajectories=args.min_trajectories)
    result = fit.as_dict()
    result["n_traj"] = int(series.shape[0])
    result["threshold"] = args.threshold
    if comment:
        result["source"] = comment
    print(json.dumps(result, indent=2))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="fvac", description="Finite-temperature false-vacuum decay ensembles on a ring.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an ensemble (or a scan) from a config file")
    _add_config_overrides(r)
    r.add_argument("--workers", type=int, help="worker processes (default: FVAC_WORKERS or CPU count)")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("traj", help="one trajectory with a p_z space-time dump")
    _add_config_overrides(t)
    t.add_argument("--index", type=int, default=0, help="trajectory index within the seed stream")
    t.set_defaults(func=cmd_traj)

    f = sub.add_parser("floquet", help="critical wavenumber and lattice stability classification")
    f.add_argument("--nu", type=float, required=True)
    f.add_argument("--omega", type=float, required=True)
    f.add_argument("--sigma", type=int, choices=[-1, 1])
    f.add_argument("--M", type=int, nargs="+", default=[256, 1024])
    f.add_argument("--L", type=float, default=100.0)
    f.add_argument("--k-cut", type=float, default=None)
    f.set_defaults(func=cmd_floquet)

    e = sub.add_parser("entropy", help="recompute S_T from a directory of snapshots")
    e.add_argument("directory")
    e.add_argument("--regions", type=int, default=8)
    e.add_argument("--window", type=int, default=None, help="points averaged per region")
    e.set_defaults(func=cmd_entropy)

    a = sub.add_parser("rate", help="refit Gamma from a per-trajectory CSV")
    a.add_argument("csv")
    a.add_argument("--threshold", type=float, default=0.9)
    a.add_argument("--window", type=float, nargs=2, metavar=("T_START", "T_END"))
    a.add_argument("--min-trajectories", type=int, default=ens.MIN_FIT_TRAJECTORIES)
    a.set_defaults(func=cmd_rate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (cfgmod.ConfigError, UsageError, ValueError) as exc:
        print(f"fvac {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ens.EnsembleError, IntegrationError, OSError) as exc:
        print(f"fvac {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
