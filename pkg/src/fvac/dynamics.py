"""Stochastic Gross-Pitaevskii evolution of the driven two-component ring.

Each species obeys

    dpsi_j/dt = -i [-sqrt(nu) d2psi_j/dx2 + g |psi_j|^2 psi_j]
                + i (sqrt(nu)/2) (1 + sqrt(2) lam omega cos(omega t)) psi_other

with the Laplacian evaluated spectrally and every mode outside the cutoff
held at zero.  Time stepping is fourth-order Runge-Kutta in the interaction
picture of the kinetic term (RK4IP).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .initstate import WignerSample
from .lattice import CutoffMask, RingLattice
from .params import DimensionlessParams

MAX_DRIVE_PHASE_PER_STEP = 0.2


class IntegrationError(FloatingPointError):
    """The fields became non-finite; carries the offending time if known."""

    def __init__(self, message, time=None, seed=None):
        super().__init__(message)
        self.time = time
        self.seed = seed


@dataclass(frozen=True)
class DriveSchedule:
    """Inter-species coupling ``base * (1 + amp * cos(omega t))``."""

    base: float
    amp: float
    omega: float

    @classmethod
    def from_params(cls, params: DimensionlessParams) -> "DriveSchedule":
        return cls(base=0.5 * params.sqrt_nu, amp=math.sqrt(2.0) * params.lam * params.omega, omega=params.omega)

    def __call__(self, t):
        return self.base * (1.0 + self.amp * np.cos(self.omega * np.asarray(t, dtype=float)))


@dataclass(frozen=True)
class IntegratorConfig:
    """Step size, horizon and save cadence; ``k_cut=None`` keeps all modes."""

    dt: float = 7.5e-4
    t_final: float = 60.0
    save_stride: int = 200
    k_cut: float | None = None

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.t_final >= 0 and math.isfinite(self.t_final)):
            raise ValueError(f"t_final must be >= 0, got {self.t_final}")
        if int(self.save_stride) != self.save_stride or self.save_stride < 1:
            raise ValueError(f"save_stride must be a positive integer, got {self.save_stride}")
        n = self.t_final / self.dt
        if abs(n - round(n)) > 1e-6 * max(1.0, n):
            raise ValueError(f"t_final={self.t_final} is not a whole number of steps of {self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def n_frames(self) -> int:
        return self.n_steps // self.save_stride + 1

    @property
    def save_interval(self) -> float:
        return self.dt * self.save_stride

    def times(self) -> np.ndarray:
        return np.arange(self.n_frames) * self.save_interval

    def check_resolves(self, params: DimensionlessParams) -> None:
        """The step must resolve the drive period."""
        if self.dt * params.omega >= MAX_DRIVE_PHASE_PER_STEP:
            raise ValueError(
                f"dt*omega = {self.dt * params.omega:.3g} >= {MAX_DRIVE_PHASE_PER_STEP}; reduce dt"
            )


def _mask_for(lattice: RingLattice, config: IntegratorConfig, mask: CutoffMask | None) -> CutoffMask:
    if mask is not None:
        return mask
    return lattice.cutoff_mask(config.k_cut)


def rhs(psi1, psi2, t, params: DimensionlessParams, lattice: RingLattice, mask: CutoffMask | None = None):
    """Time derivative of both fields in real space (projected onto the kept modes)."""
    psi1 = np.asarray(psi1, dtype=complex)
    psi2 = np.asarray(psi2, dtype=complex)
    if not (np.all(np.isfinite(psi1)) and np.all(np.isfinite(psi2))):
        raise IntegrationError("non-finite field passed to rhs", time=t)
    if mask is None:
        mask = lattice.cutoff_mask()
    keep = mask.keep
    k2 = lattice.k**2
    c = DriveSchedule.from_params(params)(t)
    out = []
    for own, other in ((psi1, psi2), (psi2, psi1)):
        a = np.fft.fft(own)
        lap = np.fft.ifft(-k2 * a)
        d = -1j * (-params.sqrt_nu * lap + params.g * np.abs(own) ** 2 * own) + 1j * c * other
        out.append(np.fft.ifft(keep * np.fft.fft(d)))
    return out[0], out[1]


@dataclass
class _Operators:
    E: np.ndarray
    keep: np.ndarray
    drive: DriveSchedule


def _operators(params, lattice, mask, dt) -> _Operators:
    w = params.sqrt_nu * lattice.k**2
    keep = mask.keep.astype(float)
    return _Operators(E=keep * np.exp(-0.5j * w * dt), keep=keep, drive=DriveSchedule.from_params(params))


def evolve_fields(
    psi,
    params: DimensionlessParams,
    lattice: RingLattice,
    dt: float,
    n_steps: int,
    save_stride: int = 1,
    mask: CutoffMask | None = None,
    t0: float = 0.0,
    backend: str | None = None,
    seeds=None,
):
    """Integrate real-space fields ``psi`` of shape (2, M) or (B, 2, M).

    Returns frames with a leading frame axis after the batch axis, i.e.
    (n_frames, 2, M) or (B, n_frames, 2, M), starting at ``t0``.
    """
    psi = np.asarray(psi, dtype=complex)
    single = psi.ndim == 2
    if single:
        psi = psi[None]
    if psi.ndim != 3 or psi.shape[1:] != (2, lattice.M):
        raise ValueError(f"fields must have shape (B, 2, {lattice.M}), got {psi.shape}")
    if not np.all(np.isfinite(psi)):
        raise IntegrationError("non-finite initial field", time=t0)
    if mask is None:
        mask = lattice.cutoff_mask()
    ops = _operators(params, lattice, mask, dt)
    a0 = np.fft.fft(psi, axis=-1) * ops.keep
    integrate = kernels.get_integrator(backend)
    try:
        frames = integrate(
            a0, dt, int(n_steps), int(save_stride), ops.E, ops.keep, params.g,
            ops.drive.base, ops.drive.amp, ops.drive.omega, t0,
        )
    except FloatingPointError as exc:
        raise IntegrationError(f"{exc}; seeds={seeds}", seed=seeds) from exc
    return frames[0] if single else frames


def step(psi1, psi2, t, dt, params: DimensionlessParams, lattice: RingLattice, mask=None, backend=None):
    """One RK4IP step; returns the advanced (psi1, psi2)."""
    frames = evolve_fields(np.stack([psi1, psi2]), params, lattice, dt, 1, 1, mask=mask, t0=t, backend=backend)
    return frames[1, 0], frames[1, 1]


def total_number(psi, dx) -> np.ndarray:
    """Atom number summed over both species; works on any leading shape."""
    psi = np.asarray(psi)
    return (np.abs(psi) ** 2).sum(axis=(-2, -1)) * dx


@dataclass(eq=False)
class TrajectoryRecord:
    """Saved output of one trajectory.

    ``mean_cos`` is the spatial mean of cos(phi_a) per frame, ``pz`` the
    read-out relative population map and ``phase`` the unwrapped relative
    phase map, both (n_frames, M).  ``fields`` is kept only on request.
    """

    times: np.ndarray
    mean_cos: np.ndarray
    pz: np.ndarray
    phase: np.ndarray
    number: np.ndarray
    seed: int | None = None
    unwrap_flags: int = 0
    fields: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def record_from_frames(frames, times, lattice: RingLattice, seed=None, keep_fields=False) -> TrajectoryRecord:
    from . import observables as obs

    psi1 = frames[:, 0]
    psi2 = frames[:, 1]
    pm = obs.phase_map(psi1, psi2, lattice)
    return TrajectoryRecord(
        times=np.asarray(times, dtype=float),
        mean_cos=obs.mean_cos_phase(psi1, psi2),
        pz=obs.readout_pz(psi1, psi2),
        phase=pm.phase,
        number=total_number(frames, lattice.dx),
        seed=seed,
        unwrap_flags=pm.flags,
        fields=np.array(frames) if keep_fields else None,
    )


def run_batch(
    samples: list[WignerSample],
    params: DimensionlessParams,
    lattice: RingLattice,
    config: IntegratorConfig,
    mask: CutoffMask | None = None,
    backend: str | None = None,
    keep_fields: bool = False,
) -> list[TrajectoryRecord]:
    """Evolve several initial states with identical settings."""
    config.check_resolves(params)
    mask = _mask_for(lattice, config, mask)
    psi = np.stack([np.stack([s.psi1, s.psi2]) for s in samples])
    seeds = [s.seed for s in samples]
    frames = evolve_fields(
        psi, params, lattice, config.dt, config.n_steps, config.save_stride,
        mask=mask, backend=backend, seeds=seeds,
    )
    times = config.times()
    return [record_from_frames(frames[b], times, lattice, seeds[b], keep_fields) for b in range(len(samples))]


def run_trajectory(
    sample: WignerSample,
    params: DimensionlessParams,
    lattice: RingLattice,
    config: IntegratorConfig,
    mask: CutoffMask | None = None,
    backend: str | None = None,
    keep_fields: bool = False,
) -> TrajectoryRecord:
    return run_batch([sample], params, lattice, config, mask, backend, keep_fields)[0]
