"""Finite-temperature Wigner initial states.

Species 1 starts as a Bogoliubov-dressed thermal condensate, species 2 in
vacuum; a pi/2 pulse then splits them into the metastable configuration with
equal densities and relative phase pi.

The Bogoliubov energies below follow the convention ``E = nu k^2``,
``eps = nu sqrt(k^2 (k^2 + 2 / nu^2))``, i.e. energies in units of
``g rho_c`` rather than ``hbar omega0``.  The mode functions u, v only depend
on the ratio E/eps, and the thermal factor ``tanh(eps / (8 nu rho0^2 tau))``
equals ``tanh(eps_phys / 2 k_B T)`` in this unit, so the sampled state is the
physical one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .lattice import CutoffMask, RingLattice
from .params import DimensionlessParams


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for trajectory ``index`` of an ensemble.

    Streams depend only on ``(master_seed, index)``, never on scheduling.
    """
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(seq))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Complex Gaussians with <|eta|^2> = 1 and <eta^2> = 0."""
    z = rng.standard_normal((2,) + tuple(np.atleast_1d(shape)))
    return (z[0] + 1j * z[1]) / math.sqrt(2.0)


def dispersion(k, nu: float):
    """Free-particle and Bogoliubov energies ``(E, eps)`` at wavenumber ``k``."""
    k = np.asarray(k, dtype=float)
    k2 = k * k
    E = nu * k2
    eps = nu * np.sqrt(k2 * (k2 + 2.0 / nu**2))
    if E.ndim == 0:
        return float(E), float(eps)
    return E, eps


def bogoliubov_coefficients(E, eps):
    """Mode coefficients ``(u, v)`` for ``k != 0``; both energies must be > 0."""
    E = np.asarray(E, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if np.any(~(E > 0)) or np.any(~(eps > 0)):
        raise ValueError("Bogoliubov coefficients need E > 0 and eps > 0 (k != 0 only)")
    root = 2.0 * np.sqrt(eps * E)
    u = (eps + E) / root
    v = (eps - E) / root
    if u.ndim == 0:
        return float(u), float(v)
    return u, v


def thermal_argument(eps, nu: float, rho0: float, tau: float):
    """``eps / (8 nu rho0^2 tau)``, the half inverse-temperature times energy."""
    with np.errstate(divide="ignore"):
        return np.asarray(eps, dtype=float) / (8.0 * nu * rho0**2 * tau)


@dataclass(frozen=True, eq=False)
class BogoliubovModes:
    """Per-mode tables in FFT order; the k = 0 entry is the regularised mode."""

    k: np.ndarray
    E: np.ndarray
    eps: np.ndarray
    u: np.ndarray
    v: np.ndarray
    n: np.ndarray
    neg_index: np.ndarray  # position of -k in the table

    @property
    def half_variance(self) -> np.ndarray:
        """Expected ``<|beta_k|^2> = n_k + 1/2``."""
        return self.n + 0.5


def bogoliubov_modes(lattice: RingLattice, params: DimensionlessParams) -> BogoliubovModes:
    k = lattice.k
    E, eps = dispersion(k, params.nu)
    u = np.ones_like(k)
    v = np.zeros_like(k)
    nz = k != 0
    u[nz], v[nz] = bogoliubov_coefficients(E[nz], eps[nz])
    n = np.zeros_like(k)
    if params.tau > 0:
        x = 2.0 * thermal_argument(eps[nz], params.nu, params.rho0, params.tau)
        with np.errstate(over="ignore"):  # deep modes: occupation underflows to 0
            n[nz] = 1.0 / np.expm1(x)
    neg_index = (-lattice.j) % lattice.M
    return BogoliubovModes(k=k, E=E, eps=eps, u=u, v=v, n=n, neg_index=neg_index)


@dataclass(frozen=True, eq=False)
class ThermalAmplitudes:
    beta: np.ndarray
    alpha: np.ndarray


def sample_thermal_amplitudes(
    modes: BogoliubovModes, tau: float, rho0: float, nu: float, rng: np.random.Generator
) -> ThermalAmplitudes:
    """Wigner amplitudes of the phonons (beta) and of the empty species (alpha).

    ``beta_k = eta / sqrt(2 tanh(eps_k / (8 nu rho0^2 tau)))`` for k != 0 and
    ``eta / sqrt(2)`` for the k = 0 vacuum; ``alpha_k = eta' / sqrt(2)``.
    Noise is drawn for every table entry so streams do not depend on the cutoff.
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    M = modes.k.shape[0]
    eta = complex_normal(rng, (2, M))
    tanh = np.ones(M)
    nz = modes.k != 0
    if tau > 0:
        tanh[nz] = np.tanh(thermal_argument(modes.eps[nz], nu, rho0, tau))
    beta = eta[0] / np.sqrt(2.0 * tanh)
    alpha = eta[1] / math.sqrt(2.0)
    return ThermalAmplitudes(beta=beta, alpha=alpha)


@dataclass(frozen=True, eq=False)
class WignerSample:
    psi1: np.ndarray
    psi2: np.ndarray
    seed: int | None = None
    tau: float = 0.0
    rotated: bool = False

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.psi1) ** 2 + np.abs(self.psi2) ** 2


def assemble_fields(
    modes: BogoliubovModes,
    amplitudes: ThermalAmplitudes,
    lattice: RingLattice,
    rho0: float,
    mask: CutoffMask | None = None,
    seed: int | None = None,
    tau: float = 0.0,
) -> WignerSample:
    """Species-1 thermal condensate and species-2 vacuum on the lattice."""
    M = lattice.M
    if not (modes.k.shape[0] == amplitudes.beta.shape[0] == amplitudes.alpha.shape[0] == M):
        raise ValueError("mode tables and lattice disagree in length")
    if mask is None:
        mask = lattice.cutoff_mask()
    beta = mask.apply(amplitudes.beta)
    alpha = mask.apply(amplitudes.alpha)
    # sum_k v_k beta_k^* e^{-ikx} re-indexed onto +k; v is real and even in k
    a1 = modes.u * beta - modes.v * np.conj(beta[modes.neg_index])
    a1 = mask.apply(a1)
    a1[0] += math.sqrt(2.0 * rho0 * lattice.L)
    psi1 = lattice.inverse_spectrum(a1)
    psi2 = lattice.inverse_spectrum(alpha)
    return WignerSample(psi1=psi1, psi2=psi2, seed=seed, tau=tau)


def rotation_matrix(theta: float = math.pi / 2, phi: float = -math.pi / 2) -> np.ndarray:
    c = math.cos(theta / 2)
    s = math.sin(theta / 2)
    return np.array(
        [[c, -1j * np.exp(-1j * phi) * s], [-1j * np.exp(1j * phi) * s, c]], dtype=complex
    )


def rotate_fields(psi1, psi2, theta: float = math.pi / 2, phi: float = -math.pi / 2):
    R = rotation_matrix(theta, phi)
    return R[0, 0] * psi1 + R[0, 1] * psi2, R[1, 0] * psi1 + R[1, 1] * psi2


def rabi_rotate(sample: WignerSample, theta: float = math.pi / 2, phi: float = -math.pi / 2) -> WignerSample:
    """Pointwise microwave pulse; the defaults prepare the false vacuum."""
    p1, p2 = rotate_fields(sample.psi1, sample.psi2, theta, phi)
    return replace(sample, psi1=p1, psi2=p2, rotated=True)


def sample_coherent(
    lattice: RingLattice,
    rho0: float,
    rng: np.random.Generator | None,
    mask: CutoffMask | None = None,
    seed: int | None = None,
) -> WignerSample:
    """Already-split coherent false vacuum plus half a quantum per kept mode.

    ``rng=None`` gives the noiseless classical state ``(sqrt(rho0), -sqrt(rho0))``.
    """
    if mask is None:
        mask = lattice.cutoff_mask()
    M = lattice.M
    mean = math.sqrt(rho0)
    if rng is None:
        noise = np.zeros((2, M), dtype=complex)
    else:
        noise = mask.apply(complex_normal(rng, (2, M)) / math.sqrt(2.0))
    psi1 = mean + lattice.inverse_spectrum(noise[0])
    psi2 = -mean + lattice.inverse_spectrum(noise[1])
    return WignerSample(psi1=psi1, psi2=psi2, seed=seed, tau=0.0, rotated=True)


def sample_thermal(
    lattice: RingLattice,
    params: DimensionlessParams,
    rng: np.random.Generator,
    mask: CutoffMask | None = None,
    seed: int | None = None,
    modes: BogoliubovModes | None = None,
) -> WignerSample:
    """Thermal Bogoliubov state, already rotated into the false vacuum."""
    if modes is None:
        modes = bogoliubov_modes(lattice, params)
    amps = sample_thermal_amplitudes(modes, params.tau, params.rho0, params.nu, rng)
    sample = assemble_fields(modes, amps, lattice, params.rho0, mask=mask, seed=seed, tau=params.tau)
    return rabi_rotate(sample)


def classical_false_vacuum(lattice: RingLattice, rho0: float) -> WignerSample:
    return sample_coherent(lattice, rho0, None)


INITIAL_STATES = ("thermal", "coherent", "classical")


def sample_initial(
    kind: str,
    lattice: RingLattice,
    params: DimensionlessParams,
    master_seed: int,
    index: int,
    mask: CutoffMask | None = None,
    modes: BogoliubovModes | None = None,
) -> WignerSample:
    """Rotated initial state for trajectory ``index`` of an ensemble."""
    if kind == "thermal":
        rng = trajectory_rng(master_seed, index)
        return sample_thermal(lattice, params, rng, mask=mask, seed=index, modes=modes)
    if kind == "coherent":
        rng = trajectory_rng(master_seed, index)
        return sample_coherent(lattice, params.rho0, rng, mask=mask, seed=index)
    if kind == "classical":
        return classical_false_vacuum(lattice, params.rho0)
    raise ValueError(f"unknown initial state {kind!r}; expected one of {INITIAL_STATES}")
