import json
import math

import numpy as np
import pytest

from fvac import ensemble as ens
from fvac.dynamics import IntegratorConfig, run_trajectory
from fvac.initstate import sample_initial
from fvac.lattice import build_lattice
from fvac.params import DimensionlessParams

CFG = IntegratorConfig(dt=7.5e-4, t_final=1.5, save_stride=100)


def _manifest(n=12, out=None, **kw):
    kw.setdefault("M", 64)
    return ens.RunManifest(params=DimensionlessParams(), cfg=CFG, n_traj=n, master_seed=11,
                           output_dir=None if out is None else str(out), **kw)


def test_single_trajectory_matches_run_trajectory():
    m = _manifest(n=1)
    st = ens.run_ensemble(m, workers=1)
    lat = build_lattice(64, 100.0)
    rec = run_trajectory(sample_initial("thermal", lat, m.params, 11, 0), m.params, lat, CFG)
    assert np.array_equal(st.mean_cos, rec.mean_cos)
    assert np.array_equal(st.trajectory_cos[0], rec.mean_cos)
    assert st.entropy[0] == 0.0
    assert st.fit is None and "100" in st.fit_error


def test_worker_count_independence(tmp_path):
    a = tmp_path / "w1"
    b = tmp_path / "w2"
    ens.run_ensemble(_manifest(out=a), workers=1)
    ens.run_ensemble(_manifest(out=b), workers=2)
    for name in ["aggregates.csv", "trajectories.csv", "summary.json"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_chunking_does_not_change_numbers(monkeypatch):
    base = ens.run_ensemble(_manifest(n=10), workers=1)
    monkeypatch.setattr(ens, "_chunks", lambda n: [list(range(s, min(s + 3, n))) for s in range(0, n, 3)])
    other = ens.run_ensemble(_manifest(n=10), workers=1)
    assert np.array_equal(base.trajectory_cos, other.trajectory_cos)
    assert np.array_equal(base.entropy, other.entropy)


def test_outputs_reference_manifest_hash(tmp_path):
    m = _manifest(n=3, out=tmp_path, snapshots=True)
    ens.run_ensemble(m, workers=1)
    h = m.sha256
    for name in ["aggregates.csv", "trajectories.csv"]:
        assert (tmp_path / name).read_text().startswith(f"# manifest_sha256={h}")
    assert json.loads((tmp_path / "summary.json").read_text())["manifest_sha256"] == h
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["manifest_sha256"] == h
    assert man["snapshots"] == ["traj_0.snap", "traj_1.snap", "traj_2.snap"]
    assert man["stability"]["classification"] == "Floquet-excluded"
    assert ens.RunManifest.from_dict(man["manifest"]).sha256 == h


def test_aggregates_csv_columns(tmp_path):
    st = ens.run_ensemble(_manifest(n=2, out=tmp_path), workers=1)
    lines = (tmp_path / "aggregates.csv").read_text().splitlines()
    assert lines[1] == "t,mean_cos_phase,S_T,F"
    assert len(lines) == 2 + CFG.n_frames
    t, series, comment = ens.read_series_csv(tmp_path / "trajectories.csv")
    assert np.array_equal(series, st.trajectory_cos)
    assert np.array_equal(t, CFG.times())
    assert comment.startswith("manifest_sha256=")


def test_snapshot_entropy_matches_run(tmp_path):
    m = _manifest(n=4, out=tmp_path, snapshots=True)
    st = ens.run_ensemble(m, workers=1)
    t, S, clamped = ens.entropy_from_snapshots(tmp_path)
    assert np.array_equal(t, st.times)
    assert S[0] == 0.0
    # complex64 storage may move a borderline region; the bulk must agree
    assert np.mean(np.abs(S - st.entropy) < 1e-12) > 0.9


def test_short_run_reports_no_decay():
    m = ens.RunManifest(params=DimensionlessParams(tau=1e-4), cfg=IntegratorConfig(dt=7.5e-4, t_final=0.75, save_stride=100),
                        M=32, n_traj=100, master_seed=1, regions=4)
    st = ens.run_ensemble(m, workers=1)
    assert st.fit.rate == 0.0 and st.fit.flags == ["no-decay"]
    assert np.all(st.survival == 1.0)


def test_aggregate_fits_rate():
    cfg = IntegratorConfig(dt=0.002, t_final=60.0, save_stride=75)
    m = ens.RunManifest(params=DimensionlessParams(), cfg=cfg, M=64, n_traj=4000)
    rng = np.random.default_rng(3)
    fp = rng.exponential(10.0, 4000)
    n_frames = cfg.n_frames
    summaries = [ens.TrajectorySummary(i, np.ones(n_frames), float(t), np.zeros(n_frames, int), 0, 0, 0.0)
                 for i, t in enumerate(fp)]
    st = ens.aggregate(m, summaries, [])
    assert st.fit.rate == pytest.approx(0.1, rel=0.05)
    assert st.fit_error is None


def test_failure_isolated(monkeypatch):
    real = ens.sample_initial

    def poisoned(kind, lattice, params, seed, i, mask=None, modes=None):
        s = real(kind, lattice, params, seed, i, mask, modes)
        if i == 3:
            from dataclasses import replace

            s = replace(s, psi1=s.psi1 * np.nan)
        return s

    monkeypatch.setattr(ens, "sample_initial", poisoned)
    st = ens.run_ensemble(_manifest(n=6), workers=1)
    assert not st.complete
    assert [i for i, _ in st.failures] == [3]
    assert st.indices.tolist() == [0, 1, 2, 4, 5]
    assert st.summary_dict()["complete"] is False


def test_unwritable_output(tmp_path):
    f = tmp_path / "file"
    f.write_text("x")
    with pytest.raises(ens.EnsembleError, match="manifest"):
        ens.run_ensemble(_manifest(n=1, out=f / "sub"), workers=1)


@pytest.mark.parametrize("kw", [{"n_traj": 0}, {"n_traj": -3}, {"master_seed": -1}, {"master_seed": 2**64},
                                {"initial_state": "hot"}, {"M": 60}, {"M": 4}])
def test_manifest_validation(kw):
    args = dict(params=DimensionlessParams(), cfg=CFG, M=64, n_traj=1, master_seed=0)
    args.update(kw)
    with pytest.raises(ValueError):
        ens.RunManifest(**args)


def test_manifest_rejects_unresolved_drive():
    with pytest.raises(ValueError, match="dt"):
        ens.RunManifest(params=DimensionlessParams(omega=500), cfg=CFG)


def test_hash_ignores_output_dir_but_not_numbers():
    a = _manifest(out="/tmp/a")
    b = _manifest(out="/tmp/b")
    c = _manifest(n=13)
    assert a.sha256 == b.sha256 != c.sha256
    assert len(a.sha256) == 64


def test_scan_expansion(tmp_path):
    m = _manifest(n=2, out=tmp_path, scan={"tau": [1e-5, 1e-4], "nu_tilde": [0.005, 0.007, 0.009]})
    pts = m.expand()
    assert len(pts) == 6
    assert {(p.params.tau, p.params.nu) for p in pts} == {(t, n) for t in (1e-5, 1e-4) for n in (0.005, 0.007, 0.009)}
    assert pts[0].output_dir.endswith("point_000")
    assert all(not p.scan for p in pts)


def test_scan_over_M(tmp_path):
    m = _manifest(n=1, out=tmp_path, scan={"M": [32, 64]})
    results = ens.run_manifest(m, workers=1)
    assert [p.M for p, _ in results] == [32, 64]
    lines = (tmp_path / "scan.csv").read_text().splitlines()
    assert lines[1].startswith("point,M,tau")
    assert len(lines) == 4
    assert json.loads((tmp_path / "scan_manifest.json").read_text())["points"][1].endswith("point_001")


def test_run_ensemble_refuses_scan():
    with pytest.raises(ens.EnsembleError):
        ens.run_ensemble(_manifest(scan={"tau": [1e-5]}))


def test_default_workers(monkeypatch):
    monkeypatch.setenv("FVAC_WORKERS", "3")
    assert ens.default_workers() == 3
    monkeypatch.setenv("FVAC_WORKERS", "zero")
    with pytest.raises(ens.EnsembleError):
        ens.default_workers()
    monkeypatch.setenv("FVAC_WORKERS", "0")
    with pytest.raises(ens.EnsembleError):
        ens.default_workers()
    monkeypatch.delenv("FVAC_WORKERS")
    assert ens.default_workers() >= 1


def test_aggregate_order_insensitive():
    m = _manifest(n=5)
    summaries, failures = ens.run_chunk(m, range(5))
    a = ens.aggregate(m, summaries, failures)
    b = ens.aggregate(m, summaries[::-1], failures)
    assert np.array_equal(a.mean_cos, b.mean_cos)
    assert np.array_equal(a.entropy, b.entropy)
    assert np.array_equal(a.survival, b.survival)
    assert math.isfinite(a.max_number_drift) and a.max_number_drift < 1e-8
