"""Read-out quantities: relative population, relative phase, entropy, decay rate.

Phase convention: ``phi_a = arg(psi1) - arg(psi2) - pi`` so the false vacuum
(psi2 = -psi1) sits at phi_a = 0 and the true vacuum at phi_a = +-pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .initstate import rotate_fields
from .lattice import RingLattice
from .params import DimensionlessParams

TWO_PI = 2.0 * math.pi
N_PHASE_CLASSES = 3
PHASE_RANGE = (-1.5 * math.pi, 1.5 * math.pi)


# -- populations and phases ------------------------------------------------


def relative_density(rho1, rho2):
    """``(rho2 - rho1) / (rho1 + rho2)``; points with zero total density are NaN."""
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    if np.any(rho1 < 0) or np.any(rho2 < 0):
        raise ValueError("densities must be non-negative")
    tot = rho1 + rho2
    with np.errstate(invalid="ignore", divide="ignore"):
        pz = (rho2 - rho1) / tot
    return np.where(tot > 0, pz, np.nan)


def readout_pz(psi1, psi2):
    """Relative population after the read-out pulse.

    The pulse maps the false vacuum to ``p_z = +1`` and the true vacuum to -1;
    in between ``p_z`` tracks cos(phi_a) weighted by the local densities.
    """
    r1, r2 = rotate_fields(np.asarray(psi1), np.asarray(psi2))
    return relative_density(np.abs(r1) ** 2, np.abs(r2) ** 2)


def relative_phase(psi1, psi2):
    """Wrapped phi_a in (-pi, pi]; NaN where either field vanishes."""
    prod = -np.asarray(psi1) * np.conj(np.asarray(psi2))
    return np.where(prod != 0, np.angle(prod), np.nan)


def cos_phase(psi1, psi2):
    prod = np.asarray(psi1) * np.conj(np.asarray(psi2))
    mag = np.abs(prod)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = -prod.real / mag
    return np.where(mag > 0, c, np.nan)


def mean_cos_phase(psi1, psi2):
    """Spatial mean of cos(phi_a) along the last axis, skipping empty points."""
    return np.nanmean(cos_phase(psi1, psi2), axis=-1)


def unwrap_phase(values, axis=-1):
    """Add multiples of 2 pi so successive differences lie in (-pi, pi].

    The first sample keeps its value.  Applying the function twice changes
    nothing.
    """
    values = np.asarray(values, dtype=float)
    d = np.diff(values, axis=axis)
    d_wrapped = d - TWO_PI * np.ceil((d - math.pi) / TWO_PI)
    corr = np.cumsum(d_wrapped - d, axis=axis)
    pad = [(0, 0)] * values.ndim
    pad[axis] = (1, 0)
    return values + np.pad(corr, pad)


@dataclass(eq=False)
class PhaseMap:
    phase: np.ndarray
    flags: int
    anchor: int


def phase_map(psi1_frames, psi2_frames, lattice: RingLattice, anchor: int | None = None) -> PhaseMap:
    """Unwrapped phi_a(x, t) for frames of shape (n_frames, M).

    Each frame is unwrapped along the ring starting from the grid point at
    x = 0 (``anchor``).  A temporal pass then shifts every frame by the
    multiple of 2 pi that best matches the previous one, so the t = 0 frame
    fixes the branch.  ``flags`` counts grid points whose frame-to-frame
    change still exceeds pi; they are left untouched.
    """
    wrapped = relative_phase(psi1_frames, psi2_frames)
    wrapped = np.atleast_2d(wrapped)
    if anchor is None:
        anchor = int(np.argmin(np.abs(lattice.x)))
    # gaps (vanishing fields) inherit the previous point's phase
    bad = ~np.isfinite(wrapped)
    if bad.any():
        wrapped = wrapped.copy()
        for f in np.nonzero(bad.any(axis=1))[0]:
            row = wrapped[f]
            ok = np.isfinite(row)
            if not ok.any():
                row[:] = 0.0
                continue
            idx = np.where(ok, np.arange(row.size), 0)
            np.maximum.accumulate(idx, out=idx)
            first = np.argmax(ok)
            idx[: first] = first
            wrapped[f] = row[idx]
    rolled = np.roll(wrapped, -anchor, axis=-1)
    spatial = np.roll(unwrap_phase(rolled, axis=-1), anchor, axis=-1)
    out = spatial.copy()
    for f in range(1, out.shape[0]):
        n = np.round(np.median(out[f - 1] - out[f]) / TWO_PI)
        if n:
            out[f] += TWO_PI * n
    flags = int(np.count_nonzero(np.abs(np.diff(out, axis=0)) > math.pi))
    return PhaseMap(phase=out, flags=flags, anchor=anchor)


# -- topological entropy --------------------------------------------------


@dataclass(frozen=True)
class EntropyBinning:
    """Coarse-graining of phi_a into ``regions`` spatial cells and three classes.

    Classes: 0 for (-3pi/2, -pi/2], 1 for (-pi/2, pi/2], 2 for (pi/2, 3pi/2].
    Each region is represented by the mean of its central ``window`` points
    (default half the region).
    """

    regions: int = 8
    window: int | None = None

    def __post_init__(self):
        if self.regions < 1:
            raise ValueError("need at least one region")

    @property
    def n_configurations(self) -> int:
        return N_PHASE_CLASSES**self.regions

    def window_for(self, M: int) -> int:
        if M % self.regions:
            raise ValueError(f"M={M} is not divisible into {self.regions} regions")
        size = M // self.regions
        w = self.window if self.window is not None else max(1, size // 2)
        if not 1 <= w <= size:
            raise ValueError(f"window {w} does not fit a region of {size} points")
        return w

    def region_slices(self, M: int) -> list[slice]:
        size = M // self.regions
        w = self.window_for(M)
        lo = (size - w) // 2
        return [slice(r * size + lo, r * size + lo + w) for r in range(self.regions)]


def region_phases(phase, binning: EntropyBinning):
    """Window-averaged unwrapped phase per region; shape (..., regions)."""
    phase = np.asarray(phase, dtype=float)
    return np.stack([phase[..., s].mean(axis=-1) for s in binning.region_slices(phase.shape[-1])], axis=-1)


def classify_phases(phases):
    """Map phases to classes 0, 1, 2; values outside (-3pi/2, 3pi/2] are clamped.

    Returns ``(classes, n_clamped)``.
    """
    phases = np.asarray(phases, dtype=float)
    lo, hi = PHASE_RANGE
    clamped = int(np.count_nonzero((phases <= lo) | (phases > hi)))
    cls = np.ones(phases.shape, dtype=np.int64)
    cls[phases <= -0.5 * math.pi] = 0
    cls[phases > 0.5 * math.pi] = 2
    return cls, clamped


def configuration_index(classes):
    """Base-3 label of the class pattern along the last axis."""
    classes = np.asarray(classes, dtype=np.int64)
    weights = N_PHASE_CLASSES ** np.arange(classes.shape[-1], dtype=np.int64)
    return (classes * weights).sum(axis=-1)


def configurations(phase, binning: EntropyBinning):
    """Configuration label per frame; returns ``(labels, n_clamped)``."""
    cls, clamped = classify_phases(region_phases(phase, binning))
    return configuration_index(cls), clamped


def entropy_from_counts(counts) -> float:
    """Shannon entropy (natural log) of a histogram."""
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    n = counts.sum()
    if n <= 0:
        raise ValueError("empty histogram")
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum()) + 0.0  # avoid -0.0


def topological_entropy(labels) -> np.ndarray:
    """S_T(t) from configuration labels of shape (n_traj, n_frames).

    ``P_i`` is the fraction of trajectories in configuration i, so S_T is
    bounded by ln(n_traj).
    """
    labels = np.asarray(labels)
    if labels.ndim == 1:
        labels = labels[:, None]
    if labels.shape[0] == 0:
        raise ValueError("no trajectories")
    out = np.empty(labels.shape[1])
    for f in range(labels.shape[1]):
        _, counts = np.unique(labels[:, f], return_counts=True)
        out[f] = entropy_from_counts(counts)
    return out


# -- decay statistics ------------------------------------------------------


class FitError(ValueError):
    pass


@dataclass(eq=False)
class TunnelingFit:
    rate: float
    stderr: float
    intercept: float
    window: tuple[float, float]
    n_points: int
    times: np.ndarray
    survival: np.ndarray
    density: np.ndarray
    flags: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "rate": self.rate,
            "stderr": self.stderr,
            "intercept": self.intercept,
            "window": list(self.window),
            "n_points": self.n_points,
            "flags": list(self.flags),
        }


def first_passage_times(series, times, threshold: float = 0.9):
    """First time each row of ``series`` drops to ``threshold`` or below; inf if never."""
    series = np.atleast_2d(np.asarray(series, dtype=float))
    times = np.asarray(times, dtype=float)
    hit = series <= threshold
    any_hit = hit.any(axis=1)
    idx = np.argmax(hit, axis=1)
    return np.where(any_hit, times[idx], np.inf)


def survival_curve(first_passage, times):
    """Fraction of trajectories that have not yet decayed at each time."""
    fp = np.asarray(first_passage, dtype=float)
    if fp.size == 0:
        raise ValueError("no trajectories")
    times = np.asarray(times, dtype=float)
    fp_sorted = np.sort(fp)
    n_decayed = np.searchsorted(fp_sorted, times, side="right")
    return 1.0 - n_decayed / fp.size


def first_passage_density(survival, times):
    """Histogram estimate of the first-passage density on the save grid."""
    survival = np.asarray(survival, dtype=float)
    dt = np.diff(np.asarray(times, dtype=float))
    return np.concatenate([[0.0], -np.diff(survival) / dt])


def default_fit_window(times, survival) -> tuple[float, float]:
    """From 10 % decayed to 90 % decayed (or the end of the record)."""
    times = np.asarray(times)
    survival = np.asarray(survival)
    start_idx = np.nonzero(survival <= 0.9)[0]
    t0 = times[start_idx[0]] if start_idx.size else times[-1]
    end_idx = np.nonzero(survival <= 0.1)[0]
    t1 = times[end_idx[0]] if end_idx.size else times[-1]
    return float(t0), float(t1)


def fit_survival(times, survival, window=None, min_points: int = 5) -> TunnelingFit:
    """Least-squares ``ln F = c - Gamma t`` inside ``window``."""
    times = np.asarray(times, dtype=float)
    survival = np.asarray(survival, dtype=float)
    density = first_passage_density(survival, times)
    if np.all(survival >= 1.0):
        return TunnelingFit(0.0, 0.0, 0.0, (float(times[0]), float(times[-1])), 0,
                            times, survival, density, ["no-decay"])
    if window is None:
        window = default_fit_window(times, survival)
    t0, t1 = window
    sel = (times >= t0) & (times <= t1) & (survival > 0)
    n = int(sel.sum())
    if n < min_points:
        raise FitError(f"only {n} usable points in fit window {window}; need {min_points}")
    t = times[sel]
    y = np.log(survival[sel])
    tm = t.mean()
    sxx = ((t - tm) ** 2).sum()
    slope = ((t - tm) * (y - y.mean())).sum() / sxx
    intercept = y.mean() - slope * tm
    resid = y - (intercept + slope * t)
    stderr = math.sqrt((resid**2).sum() / (n - 2) / sxx) if n > 2 else float("nan")
    flags = []
    if survival[-1] > 0.1:
        flags.append("incomplete-decay")
    return TunnelingFit(float(-slope), float(stderr), float(intercept), (float(t0), float(t1)), n,
                        times, survival, density, flags)


def tunneling_rate(series, times, threshold: float = 0.9, window=None,
                   min_trajectories: int = 100, min_points: int = 5) -> TunnelingFit:
    """Decay rate from per-trajectory mean cos(phi_a) series (n_traj, n_frames)."""
    series = np.atleast_2d(np.asarray(series, dtype=float))
    if series.shape[0] < min_trajectories:
        raise FitError(f"{series.shape[0]} trajectories; need at least {min_trajectories} for a rate")
    fp = first_passage_times(series, times, threshold)
    F = survival_curve(fp, times)
    return fit_survival(times, F, window, min_points)


# -- parametric instability -----------------------------------------------


def floquet_critical_k(nu: float, omega: float, sigma: int = -1):
    """Lowest wavenumber of the first parametric resonance band, or None.

    ``k_c^2 = (sqrt(1 + omega^2 nu) - 1) / (2 nu) - sigma``.
    """
    if nu <= 0 or omega <= 0:
        raise ValueError("nu and omega must be positive")
    if sigma not in (-1, 1):
        raise ValueError("sigma must be +1 or -1")
    k2 = (math.sqrt(1.0 + omega**2 * nu) - 1.0) / (2.0 * nu) - sigma
    if k2 < 0:
        return None
    return math.sqrt(k2)


@dataclass(frozen=True)
class StabilityReport:
    k_nyquist: float
    k_cut: float
    k_effective: float
    k_c_minus: float | None
    k_c_plus: float | None
    classification: str

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def stability_report(lattice: RingLattice, params: DimensionlessParams, k_cut: float | None = None) -> StabilityReport:
    """Whether the resolved modes reach the parametric resonance band."""
    k_nyq = lattice.k_nyquist
    k_cut = k_nyq if k_cut is None else float(k_cut)
    k_eff = min(k_nyq, k_cut)
    km = floquet_critical_k(params.nu, params.omega, -1)
    kp = floquet_critical_k(params.nu, params.omega, +1)
    ks = [k for k in (km, kp) if k is not None]
    included = bool(ks) and min(ks) <= k_eff
    return StabilityReport(k_nyq, k_cut, k_eff, km, kp, "Floquet-included" if included else "Floquet-excluded")


# -- bubbles ---------------------------------------------------------------


def true_vacuum_segments(pz_row, threshold: float = -0.5, min_sites: int = 5):
    """Runs of ``p_z < threshold`` on the ring as (start, length) pairs."""
    inside = np.asarray(pz_row) < threshold
    M = inside.size
    if inside.all():
        return [(0, M)]
    if not inside.any():
        return []
    # rotate so index 0 is outside, then scan linearly
    shift = int(np.argmin(inside))
    r = np.roll(inside, -shift)
    edges = np.diff(np.concatenate([[0], r.astype(np.int8), [0]]))
    starts = np.nonzero(edges == 1)[0]
    ends = np.nonzero(edges == -1)[0]
    return [((s + shift) % M, e - s) for s, e in zip(starts, ends) if e - s >= min_sites]


def first_bubble(pz_map, times, threshold: float = -0.5, min_sites: int = 5):
    """(time, frame, (start, length)) of the first resolved true-vacuum region, or None."""
    for f, row in enumerate(np.asarray(pz_map)):
        segs = true_vacuum_segments(row, threshold, min_sites)
        if segs:
            return float(times[f]), f, max(segs, key=lambda s: s[1])
    return None


@dataclass(eq=False)
class WallTrack:
    times: np.ndarray
    left: np.ndarray
    right: np.ndarray
    speed: float
    left_speed: float
    right_speed: float


def _smooth_ring(row, width: int):
    if width <= 1:
        return np.asarray(row, dtype=float)
    kernel = np.ones(width) / width
    r = np.asarray(row, dtype=float)
    pad = width // 2
    ext = np.concatenate([r[-pad:], r, r[: width - 1 - pad]])
    return np.convolve(ext, kernel, mode="valid")


def _crossing(row, i_in, i_out, level):
    """Sub-grid position between neighbouring points on either side of ``level``."""
    a, b = row[i_in % row.size], row[i_out % row.size]
    frac = (level - a) / (b - a) if b != a else 0.5
    return i_in + frac * (i_out - i_in)


def track_bubble_walls(pz_map, times, dx: float, threshold: float = -0.5, min_sites: int = 5,
                       level: float = 0.0, smooth: int = 5, settle: float = 2.0,
                       max_jump: float = 4.0, min_points: int = 8) -> WallTrack | None:
    """Follow both walls of the first bubble until it meets another or fills the ring.

    The bubble is detected on the raw map (``p_z < threshold`` over at least
    ``min_sites`` points).  Walls are the ``level`` crossings of the map
    smoothed over ``smooth`` sites, located to sub-grid precision and
    unwrapped around the ring.  Tracking stops when a wall jumps more than
    ``max_jump`` sites between saves (a merger).  Speeds are straight-line
    fits after discarding the first ``settle`` time units of growth.
    """
    pz_map = np.asarray(pz_map, dtype=float)
    times = np.asarray(times, dtype=float)
    M = pz_map.shape[1]
    found = first_bubble(pz_map, times, threshold, min_sites)
    if found is None:
        return None
    _, f0, (start, length) = found
    centre = start + 0.5 * length
    t, left, right = [], [], []
    for f in range(f0, pz_map.shape[0]):
        row = _smooth_ring(pz_map[f], smooth)
        c = int(np.floor(centre)) % M
        if row[c] >= level:
            break
        lo = c
        while row[(lo - 1) % M] < level and c - lo < M:
            lo -= 1
        hi = c
        while row[(hi + 1) % M] < level and hi - c < M:
            hi += 1
        if hi - lo >= M - 2:
            break
        shift = np.floor(centre) - c
        l_pos = _crossing(row, lo, lo - 1, level) + shift
        r_pos = _crossing(row, hi, hi + 1, level) + shift
        if left and (abs(l_pos - left[-1]) > max_jump or abs(r_pos - right[-1]) > max_jump):
            break
        t.append(times[f])
        left.append(l_pos)
        right.append(r_pos)
        centre = 0.5 * (l_pos + r_pos)
    t = np.array(t)
    left = np.array(left) * dx
    right = np.array(right) * dx
    sel = t >= (t[0] + settle if t.size else 0.0)
    if sel.sum() < min_points:
        return WallTrack(t, left, right, float("nan"), float("nan"), float("nan"))
    vl = -np.polyfit(t[sel], left[sel], 1)[0]
    vr = np.polyfit(t[sel], right[sel], 1)[0]
    return WallTrack(t, left, right, float(0.5 * (vl + vr)), float(vl), float(vr))
