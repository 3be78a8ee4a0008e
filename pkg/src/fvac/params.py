"""Physical and dimensionless parameters of the coupled ring condensate.

Dimensionless units: lengths in ``x0 = hbar / (2 sqrt(m nu))``, times in
``1 / omega0`` with ``omega0 = 2 sqrt(nu g rho0) / hbar``, temperatures in
``T_d = hbar^2 rho_c^2 / (2 m k_B)``.  ``rho_c = 2 rho0`` is the density of the
single-species condensate before the splitting pulse.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from scipy import constants

HBAR = constants.hbar
K_B = constants.k
AMU = constants.atomic_mass


class ParameterError(ValueError):
    """Raised for an invalid physical or dimensionless parameter."""


class MetastabilityWarning(UserWarning):
    """Modulation depth too small for a metastable false vacuum."""


def _require_positive(name, value, allow_zero=False):
    if not math.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ParameterError(f"{name} must be {bound}, got {value!r}")


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory parameters, SI units (angular frequencies in rad/s)."""

    trap_circumference_L: float
    atom_number_Nc: float
    s_wave_length_a: float
    mass_m: float
    transverse_freq_omega_perp: float
    modulation_freq_omega: float
    coupling_nu_over_hbar: float
    modulation_depth_delta: float
    temperature_T: float = 0.0

    def __post_init__(self):
        for name in (
            "trap_circumference_L",
            "atom_number_Nc",
            "s_wave_length_a",
            "mass_m",
            "transverse_freq_omega_perp",
            "modulation_freq_omega",
            "coupling_nu_over_hbar",
            "modulation_depth_delta",
        ):
            _require_positive(name, getattr(self, name))
        _require_positive("temperature_T", self.temperature_T, allow_zero=True)

    @property
    def g_1d(self) -> float:
        """One-dimensional interaction strength ``2 hbar a omega_perp`` (J m)."""
        return 2.0 * HBAR * self.s_wave_length_a * self.transverse_freq_omega_perp

    @property
    def condensate_density(self) -> float:
        """rho_c = N_c / L, before the splitting pulse (1/m)."""
        return self.atom_number_Nc / self.trap_circumference_L

    @property
    def nu(self) -> float:
        """Coupling energy nu (J)."""
        return HBAR * self.coupling_nu_over_hbar


@dataclass(frozen=True)
class CharacteristicScales:
    x0: float
    omega0: float
    T_d: float
    sound_speed_c: float
    g_1d: float


@dataclass(frozen=True)
class DimensionlessParams:
    """The six numbers that define a run; ``g`` is derived.

    Attributes
    ----------
    rho0 : density per species after splitting, atoms per ``x0``.
    L : ring circumference in units of ``x0``.
    tau : initial temperature over ``T_d``.
    lam : effective modulation depth lambda.
    omega : modulation frequency in units of ``omega0``.
    nu : coupling in units of ``g rho0``.
    """

    rho0: float = 200.0
    L: float = 100.0
    tau: float = 1e-5
    lam: float = 1.2
    omega: float = 50.0
    nu: float = 7e-3
    g: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("rho0", "L", "lam", "omega", "nu"):
            _require_positive(name, getattr(self, name))
        _require_positive("tau", self.tau, allow_zero=True)
        if self.lam <= 1.0:
            warnings.warn(
                f"lambda={self.lam} <= 1: the false vacuum has no local minimum",
                MetastabilityWarning,
                stacklevel=3,
            )
        object.__setattr__(self, "g", 1.0 / (2.0 * self.rho0 * math.sqrt(self.nu)))

    def replace(self, **changes) -> "DimensionlessParams":
        values = {k: getattr(self, k) for k in ("rho0", "L", "tau", "lam", "omega", "nu")}
        values.update(changes)
        return DimensionlessParams(**values)

    def as_dict(self) -> dict:
        return {
            "rho0": self.rho0,
            "L": self.L,
            "tau": self.tau,
            "lam": self.lam,
            "omega": self.omega,
            "nu": self.nu,
        }

    @property
    def sqrt_nu(self) -> float:
        return math.sqrt(self.nu)

    @property
    def potential_prefactor(self) -> float:
        """Dimensionless prefactor of the effective phase potential.

        Equals ``4 nu g rho0 / hbar^2 = omega0^2`` in physical units, which is 1
        once time is measured in ``1/omega0``.  Reported only; the dynamics
        integrates the atomic fields, not the phase equation.
        """
        return 1.0


def characteristic_scales(p: PhysicalParams) -> CharacteristicScales:
    g = p.g_1d
    rho_c = p.condensate_density
    rho0 = rho_c / 2.0
    nu = p.nu
    m = p.mass_m
    return CharacteristicScales(
        x0=HBAR / (2.0 * math.sqrt(m * nu)),
        omega0=2.0 * math.sqrt(nu * g * rho0) / HBAR,
        T_d=HBAR**2 * rho_c**2 / (2.0 * m * K_B),
        sound_speed_c=math.sqrt(g * rho0 / m),
        g_1d=g,
    )


def lambda_from_delta(delta: float, omega0: float, nu: float) -> float:
    """lambda = delta hbar omega0 / (sqrt(2) nu); ``nu`` in joules."""
    return delta * HBAR * omega0 / (math.sqrt(2.0) * nu)


def delta_from_lambda(lam: float, omega0: float, nu: float) -> float:
    return lam * math.sqrt(2.0) * nu / (HBAR * omega0)


def to_dimensionless(p: PhysicalParams) -> tuple[DimensionlessParams, CharacteristicScales]:
    s = characteristic_scales(p)
    rho0 = p.condensate_density / 2.0
    nu = p.nu
    dp = DimensionlessParams(
        rho0=rho0 * s.x0,
        L=p.trap_circumference_L / s.x0,
        tau=p.temperature_T / s.T_d,
        lam=lambda_from_delta(p.modulation_depth_delta, s.omega0, nu),
        omega=p.modulation_freq_omega / s.omega0,
        nu=nu / (s.g_1d * rho0),
    )
    return dp, s


def physical_from_dimensionless(dp: DimensionlessParams, s: CharacteristicScales) -> dict:
    """Reconstruct the laboratory quantities fixed by ``dp`` and ``s``.

    Returns a dict with ``L`` (m), ``omega`` (rad/s), ``nu`` (J), ``rho0`` (1/m),
    ``T`` (K) and ``delta``.
    """
    L = dp.L * s.x0
    rho0 = dp.rho0 / s.x0
    nu = dp.nu * s.g_1d * rho0
    return {
        "L": L,
        "omega": dp.omega * s.omega0,
        "nu": nu,
        "rho0": rho0,
        "T": dp.tau * s.T_d,
        "delta": delta_from_lambda(dp.lam, s.omega0, nu),
    }


def effective_potential(phi_a, params: DimensionlessParams):
    """Shape of the time-averaged relative-phase potential.

    ``cos(phi) + (lambda^2 / 2) sin(phi)^2``: 1 at the false vacuum ``phi = 0``,
    -1 at the true vacua ``phi = +-pi``, curvature ``lambda^2 - 1`` at the
    false vacuum.  Multiply by ``params.potential_prefactor`` for the full
    potential.  Accepts scalars or numpy arrays.
    """
    import numpy as np

    phi_a = np.asarray(phi_a, dtype=float)
    out = np.cos(phi_a) + 0.5 * params.lam**2 * np.sin(phi_a) ** 2
    return out if out.ndim else float(out)


def effective_potential_derivative(phi_a, params: DimensionlessParams):
    import numpy as np

    phi_a = np.asarray(phi_a, dtype=float)
    out = np.sin(phi_a) * (params.lam**2 * np.cos(phi_a) - 1.0)
    return out if out.ndim else float(out)


# 41K ring experiment of the reference design (Table-style inputs).
POTASSIUM_41_MASS = 40.9618252579 * AMU


def reference_experiment(temperature_T: float = 0.0, delta: float | None = None) -> PhysicalParams:
    """The 41K ring parameters used for the desk-scale reference runs.

    The s-wave length is backed out of ``g = 8.05e-39 J m`` at
    ``omega_perp = 2 pi x 1910 Hz``.  ``delta`` defaults to the value giving
    lambda = 1.2.
    """
    omega_perp = 2 * math.pi * 1910.0
    a = 8.05e-39 / (2.0 * HBAR * omega_perp)
    base = dict(
        trap_circumference_L=254e-6,
        atom_number_Nc=4e4,
        s_wave_length_a=a,
        mass_m=POTASSIUM_41_MASS,
        transverse_freq_omega_perp=omega_perp,
        modulation_freq_omega=2 * math.pi * 9.56e3,
        coupling_nu_over_hbar=2 * math.pi * 9.56,
        modulation_depth_delta=1.0,
        temperature_T=temperature_T,
    )
    if delta is None:
        s = characteristic_scales(PhysicalParams(**base))
        delta = delta_from_lambda(1.2, s.omega0, HBAR * base["coupling_nu_over_hbar"])
    base["modulation_depth_delta"] = delta
    return PhysicalParams(**base)
