"""Trajectory ensembles: manifests, parallel execution, aggregation and output files.

Trajectory ``i`` draws its noise from a counter-based stream keyed by
``(master_seed, i)`` and indices are processed in fixed-size chunks, so every
number written depends only on the manifest, never on the worker count or
on completion order.  Partial results are merged in index order.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import os
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from . import observables as obs
from .dynamics import IntegrationError, IntegratorConfig, run_batch
from .initstate import INITIAL_STATES, bogoliubov_modes, sample_initial
from .lattice import build_lattice
from .params import DimensionlessParams
from .snapshot import Snapshot, read_snapshot, write_snapshot

SCHEMA_VERSION = 1
CHUNK_SIZE = 8
MIN_FIT_TRAJECTORIES = 100
_SCAN_ATTR = {"tau": "tau", "nu_tilde": "nu", "lambda": "lam", "omega_tilde": "omega"}


class EnsembleError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunManifest:
    """Everything that determines the numbers an ensemble run produces."""

    params: DimensionlessParams
    cfg: IntegratorConfig
    M: int = 256
    n_traj: int = 1
    master_seed: int = 0
    initial_state: str = "thermal"
    threshold: float = 0.9
    regions: int = 8
    window: int | None = None
    snapshots: bool = False
    scan: dict = field(default_factory=dict)
    output_dir: str | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise ValueError(f"n_traj must be a positive integer, got {self.n_traj}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError(f"master seed must fit in 64 bits, got {self.master_seed}")
        if self.initial_state not in INITIAL_STATES:
            raise ValueError(f"initial_state must be one of {INITIAL_STATES}, got {self.initial_state!r}")
        for axis, values in self.scan.items():
            if axis not in _SCAN_ATTR and axis != "M":
                raise ValueError(f"cannot scan over {axis!r}")
            if not values:
                raise ValueError(f"scan axis {axis!r} is empty")
        if not self.scan:
            build_lattice(self.M, self.params.L)
            self.cfg.check_resolves(self.params)
            obs.EntropyBinning(self.regions, self.window).window_for(self.M)

    # -- serialisation --

    def numeric_dict(self) -> dict:
        """Fields that affect results (no output location)."""
        return {
            "schema_version": self.schema_version,
            "params": self.params.as_dict(),
            "integrator": {
                "dt": self.cfg.dt,
                "t_final": self.cfg.t_final,
                "save_stride": self.cfg.save_stride,
                "k_cut": self.cfg.k_cut,
            },
            "M": self.M,
            "n_traj": self.n_traj,
            "master_seed": self.master_seed,
            "initial_state": self.initial_state,
            "threshold": self.threshold,
            "regions": self.regions,
            "window": self.window,
            "snapshots": self.snapshots,
            "scan": {k: list(v) for k, v in sorted(self.scan.items())},
        }

    def as_dict(self) -> dict:
        d = self.numeric_dict()
        d["output_dir"] = self.output_dir
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        integ = d["integrator"]
        return cls(
            params=DimensionlessParams(**d["params"]),
            cfg=IntegratorConfig(dt=integ["dt"], t_final=integ["t_final"],
                                 save_stride=integ["save_stride"], k_cut=integ["k_cut"]),
            M=d["M"],
            n_traj=d["n_traj"],
            master_seed=d["master_seed"],
            initial_state=d["initial_state"],
            threshold=d["threshold"],
            regions=d["regions"],
            window=d["window"],
            snapshots=d["snapshots"],
            scan=d.get("scan", {}),
            output_dir=d.get("output_dir"),
            schema_version=d.get("schema_version", SCHEMA_VERSION),
        )

    @property
    def sha256(self) -> str:
        blob = json.dumps(self.numeric_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_config(cls, rc, output_dir=None) -> "RunManifest":
        run = rc.run
        return cls(
            params=rc.params,
            cfg=IntegratorConfig(dt=run["dt_tilde"], t_final=run["t_f_tilde"],
                                 save_stride=run["save_stride"], k_cut=run["k_cut"]),
            M=run["M"],
            n_traj=run["n_traj"],
            master_seed=run["seed"],
            initial_state=run["initial_state"],
            snapshots=run["snapshots"],
            scan=dict(rc.scan),
            output_dir=None if output_dir is None else str(output_dir),
        )

    # -- scans --

    def expand(self) -> list["RunManifest"]:
        """Cartesian product of the scan axes (just ``self`` without a scan)."""
        if not self.scan:
            return [self]
        axes = sorted(self.scan)
        points = []
        for n, combo in enumerate(itertools.product(*(self.scan[a] for a in axes))):
            changes = {_SCAN_ATTR[a]: v for a, v in zip(axes, combo) if a != "M"}
            M = dict(zip(axes, combo)).get("M", self.M)
            out = None if self.output_dir is None else str(Path(self.output_dir) / f"point_{n:03d}")
            points.append(RunManifest(
                params=self.params.replace(**changes), cfg=self.cfg, M=int(M), n_traj=self.n_traj,
                master_seed=self.master_seed, initial_state=self.initial_state,
                threshold=self.threshold, regions=self.regions, window=self.window,
                snapshots=self.snapshots, scan={}, output_dir=out,
            ))
        return points


@dataclass(eq=False)
class TrajectorySummary:
    index: int
    mean_cos: np.ndarray
    first_passage: float
    labels: np.ndarray
    clamped: int
    unwrap_flags: int
    number_drift: float


@dataclass(eq=False)
class EnsembleStats:
    """Aggregates over the completed trajectories of one run."""

    manifest_sha256: str
    times: np.ndarray
    n_completed: int
    mean_cos: np.ndarray
    entropy: np.ndarray
    survival: np.ndarray
    first_passage: np.ndarray
    trajectory_cos: np.ndarray
    indices: np.ndarray
    fit: obs.TunnelingFit | None
    fit_error: str | None
    clamped: int
    unwrap_flags: int
    max_number_drift: float
    failures: list = field(default_factory=list)
    stability: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return not self.failures

    def summary_dict(self) -> dict:
        return {
            "manifest_sha256": self.manifest_sha256,
            "complete": self.complete,
            "n_completed": self.n_completed,
            "failures": [{"index": i, "error": msg} for i, msg in self.failures],
            "fit": None if self.fit is None else self.fit.as_dict(),
            "fit_error": self.fit_error,
            "entropy_clamped": self.clamped,
            "unwrap_flags": self.unwrap_flags,
            "max_number_drift": self.max_number_drift,
            "peak_entropy": float(np.max(self.entropy)) if self.entropy.size else None,
            "stability": self.stability,
        }


def _summarise(rec, index, manifest: RunManifest, binning) -> TrajectorySummary:
    labels, clamped = obs.configurations(rec.phase, binning)
    fp = obs.first_passage_times(rec.mean_cos[None], rec.times, manifest.threshold)[0]
    drift = float(np.max(np.abs(rec.number / rec.number[0] - 1.0)))
    return TrajectorySummary(index, rec.mean_cos, float(fp), labels, clamped, rec.unwrap_flags, drift)


def _snapshot_from(rec, manifest: RunManifest) -> Snapshot:
    return Snapshot(M=manifest.M, L=manifest.params.L, dt=manifest.cfg.dt,
                    save_stride=manifest.cfg.save_stride, frames=rec.fields)


def run_chunk(manifest: RunManifest, indices, backend=None, snapshot_dir=None):
    """Integrate trajectories ``indices``; returns (summaries, failures)."""
    lattice = build_lattice(manifest.M, manifest.params.L)
    mask = lattice.cutoff_mask(manifest.cfg.k_cut)
    modes = bogoliubov_modes(lattice, manifest.params) if manifest.initial_state == "thermal" else None
    binning = obs.EntropyBinning(manifest.regions, manifest.window)
    keep = snapshot_dir is not None

    def sample(i):
        return sample_initial(manifest.initial_state, lattice, manifest.params,
                              manifest.master_seed, i, mask, modes)

    def integrate(idx):
        samples = [sample(i) for i in idx]
        return run_batch(samples, manifest.params, lattice, manifest.cfg, mask, backend, keep)

    summaries, failures = [], []
    try:
        recs = list(zip(indices, integrate(list(indices))))
    except IntegrationError:
        # isolate the offending trajectories
        recs = []
        for i in indices:
            try:
                recs.append((i, integrate([i])[0]))
            except IntegrationError as exc:
                failures.append((int(i), str(exc)))
    for i, rec in recs:
        summaries.append(_summarise(rec, int(i), manifest, binning))
        if keep:
            write_snapshot(Path(snapshot_dir) / f"traj_{int(i)}.snap", _snapshot_from(rec, manifest))
    return summaries, failures


def _chunk_task(args):
    manifest_dict, indices, backend, snapshot_dir = args
    return run_chunk(RunManifest.from_dict(manifest_dict), indices, backend, snapshot_dir)


def default_workers() -> int:
    env = os.environ.get("FVAC_WORKERS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise EnsembleError(f"FVAC_WORKERS must be an integer, got {env!r}") from None
        if n < 1:
            raise EnsembleError("FVAC_WORKERS must be >= 1")
        return n
    return os.cpu_count() or 1


def _chunks(n, size=CHUNK_SIZE):
    return [list(range(s, min(s + size, n))) for s in range(0, n, size)]


def aggregate(manifest: RunManifest, summaries, failures, stability=None) -> EnsembleStats:
    """Order-insensitive reduction of per-trajectory summaries."""
    summaries = sorted(summaries, key=lambda s: s.index)
    times = manifest.cfg.times()
    n = len(summaries)
    n_frames = times.size
    if n:
        cos = np.stack([s.mean_cos for s in summaries])
        mean_cos = np.zeros(n_frames)
        for s in summaries:
            mean_cos += s.mean_cos
        mean_cos /= n
        counts = [Counter() for _ in range(n_frames)]
        for s in summaries:
            for f, lab in enumerate(s.labels.tolist()):
                counts[f][lab] += 1
        entropy = np.array([obs.entropy_from_counts(sorted(c.values())) for c in counts])
        fp = np.array([s.first_passage for s in summaries])
        survival = obs.survival_curve(fp, times)
    else:
        cos = np.empty((0, n_frames))
        mean_cos = entropy = survival = np.full(n_frames, np.nan)
        fp = np.empty(0)
    fit, fit_error = None, None
    if n >= MIN_FIT_TRAJECTORIES:
        try:
            fit = obs.fit_survival(times, survival)
        except obs.FitError as exc:
            fit_error = str(exc)
    else:
        fit_error = f"{n} trajectories; a rate fit needs at least {MIN_FIT_TRAJECTORIES}"
    return EnsembleStats(
        manifest_sha256=manifest.sha256,
        times=times,
        n_completed=n,
        mean_cos=mean_cos,
        entropy=entropy,
        survival=survival,
        first_passage=fp,
        trajectory_cos=cos,
        indices=np.array([s.index for s in summaries], dtype=int),
        fit=fit,
        fit_error=fit_error,
        clamped=sum(s.clamped for s in summaries),
        unwrap_flags=sum(s.unwrap_flags for s in summaries),
        max_number_drift=max((s.number_drift for s in summaries), default=0.0),
        failures=sorted(failures),
        stability=stability or {},
    )


def _fmt(x) -> str:
    return repr(float(x))


def write_aggregates_csv(path, stats: EnsembleStats) -> None:
    lines = [f"# manifest_sha256={stats.manifest_sha256}", "t,mean_cos_phase,S_T,F"]
    for row in zip(stats.times, stats.mean_cos, stats.entropy, stats.survival):
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_trajectories_csv(path, stats: EnsembleStats) -> None:
    """Per-trajectory mean cos(phi_a) series, one column per trajectory."""
    head = ["t"] + [f"traj_{i}" for i in stats.indices]
    lines = [f"# manifest_sha256={stats.manifest_sha256}", ",".join(head)]
    for f, t in enumerate(stats.times):
        lines.append(",".join([_fmt(t)] + [_fmt(v) for v in stats.trajectory_cos[:, f]]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_series_csv(path):
    """Read a per-trajectory CSV back as (times, series[n_traj, n_frames], comment)."""
    comment = ""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                comment = line[1:].strip()
                continue
            rows.append(line.split(","))
    if len(rows) < 2:
        raise ValueError(f"{path}: no data rows")
    data = np.array(rows[1:], dtype=float)
    return data[:, 0], data[:, 1:].T, comment


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_outputs(out: Path, manifest: RunManifest, stats: EnsembleStats) -> None:
    write_aggregates_csv(out / "aggregates.csv", stats)
    write_trajectories_csv(out / "trajectories.csv", stats)
    _write_json(out / "summary.json", stats.summary_dict())


def write_manifest(out: Path, manifest: RunManifest, stability: dict) -> None:
    _write_json(out / "manifest.json", {
        "manifest": manifest.as_dict(),
        "manifest_sha256": manifest.sha256,
        "stability": stability,
        "snapshots": [f"traj_{i}.snap" for i in range(manifest.n_traj)] if manifest.snapshots else [],
    })


def run_ensemble(manifest: RunManifest, workers: int | None = None, backend: str | None = None,
                 progress=None) -> EnsembleStats:
    """Run one (non-scan) manifest; writes outputs when ``output_dir`` is set."""
    if manifest.scan:
        raise EnsembleError("manifest has scan axes; use run_manifest")
    lattice = build_lattice(manifest.M, manifest.params.L)
    stability = obs.stability_report(lattice, manifest.params, manifest.cfg.k_cut).as_dict()
    out = None
    if manifest.output_dir is not None:
        out = Path(manifest.output_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            write_manifest(out, manifest, stability)
        except OSError as exc:
            raise EnsembleError(f"cannot write manifest to {out}: {exc}") from exc
    snap_dir = str(out) if (out is not None and manifest.snapshots) else None
    backend = backend or kernels.default_backend()
    workers = default_workers() if workers is None else int(workers)
    chunks = _chunks(manifest.n_traj)
    summaries, failures = [], []

    def collect(result, done):
        s, f = result
        summaries.extend(s)
        failures.extend(f)
        if progress is not None:
            progress(done, len(chunks))

    try:
        if workers <= 1 or len(chunks) == 1:
            for n, idx in enumerate(chunks, 1):
                collect(run_chunk(manifest, idx, backend, snap_dir), n)
        else:
            payload = manifest.as_dict()
            tasks = [(payload, idx, backend, snap_dir) for idx in chunks]
            with ProcessPoolExecutor(max_workers=min(workers, len(chunks))) as pool:
                for n, result in enumerate(pool.map(_chunk_task, tasks), 1):
                    collect(result, n)
    except OSError as exc:
        raise EnsembleError(f"I/O failure during run (manifest kept in {out}): {exc}") from exc
    stats = aggregate(manifest, summaries, failures, stability)
    if out is not None:
        try:
            write_outputs(out, manifest, stats)
        except OSError as exc:
            raise EnsembleError(f"cannot write results to {out}: {exc}") from exc
    return stats


def run_manifest(manifest: RunManifest, workers=None, backend=None, progress=None):
    """Run a manifest, expanding scans; returns a list of (point manifest, stats)."""
    points = manifest.expand()
    results = []
    for point in points:
        results.append((point, run_ensemble(point, workers, backend, progress)))
    if manifest.scan and manifest.output_dir is not None:
        out = Path(manifest.output_dir)
        _write_json(out / "scan_manifest.json",
                    {"manifest": manifest.as_dict(), "manifest_sha256": manifest.sha256,
                     "points": [p.output_dir for p in points]})
        lines = [f"# manifest_sha256={manifest.sha256}",
                 "point,M,tau,nu_tilde,lambda,omega_tilde,rate,stderr,flags"]
        for n, (p, st) in enumerate(results):
            rate = st.fit.rate if st.fit else math.nan
            err = st.fit.stderr if st.fit else math.nan
            flags = "|".join(st.fit.flags) if st.fit else "no-fit"
            lines.append(",".join([str(n), str(p.M), _fmt(p.params.tau), _fmt(p.params.nu),
                                   _fmt(p.params.lam), _fmt(p.params.omega), _fmt(rate), _fmt(err), flags]))
        (out / "scan.csv").write_text("\n".join(lines) + "\n")
    return results


def load_snapshots(directory):
    """All ``traj_<i>.snap`` files of a run directory, sorted by index."""
    directory = Path(directory)
    files = sorted(directory.glob("traj_*.snap"), key=lambda p: int(p.stem.split("_")[1]))
    if not files:
        raise EnsembleError(f"no traj_<i>.snap files in {directory}")
    return [(int(p.stem.split("_")[1]), read_snapshot(p)) for p in files]


def entropy_from_snapshots(directory, regions: int = 8, window: int | None = None):
    """Recompute S_T(t) from stored fields; returns (times, S_T, n_clamped)."""
    snaps = load_snapshots(directory)
    first = snaps[0][1]
    lattice = build_lattice(first.M, first.L)
    binning = obs.EntropyBinning(regions, window)
    labels, clamped = [], 0
    for _, snap in snaps:
        if snap.M != first.M or snap.n_frames != first.n_frames:
            raise EnsembleError("snapshots in the directory disagree in shape")
        fr = snap.frames.astype(np.complex128)
        pm = obs.phase_map(fr[:, 0], fr[:, 1], lattice)
        lab, c = obs.configurations(pm.phase, binning)
        labels.append(lab)
        clamped += c
    return first.times(), obs.topological_entropy(np.stack(labels)), clamped


def log_progress(done, total):
    print(f"\r  chunks {done}/{total}", end="" if done < total else "\n", file=sys.stderr, flush=True)
