import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fvac.initstate import (
    assemble_fields,
    bogoliubov_coefficients,
    bogoliubov_modes,
    complex_normal,
    dispersion,
    rabi_rotate,
    rotate_fields,
    rotation_matrix,
    sample_initial,
    sample_thermal_amplitudes,
    trajectory_rng,
)
from fvac.lattice import build_lattice
from fvac.params import DimensionlessParams

# mpmath values (40 digits), nu = 0.007
EPS_K1 = 1.4142308863831252077
U_K1 = 7.1420923659641384586
V_K1 = 7.0717383551686373936
N_TAU4_K1 = 0.825873765311527  # tau = 1e-4, rho0 = 200, k = 2 pi / 100
RATIO_K1000 = 0.02020406122  # eps / E - 1 at k = 1000


def test_dispersion_oracle():
    E, eps = dispersion(1.0, 0.007)
    assert E == pytest.approx(0.007, rel=1e-15)
    assert eps == pytest.approx(EPS_K1, rel=1e-14)


def test_dispersion_limits():
    nu = 0.007
    E, eps = dispersion(1e3, nu)
    assert eps / E - 1 == pytest.approx(RATIO_K1000, rel=1e-9)
    E, eps = dispersion(1e6, nu)
    assert eps / E - 1 < 1e-5
    # phonon branch: eps ~ sqrt(2) k as k -> 0
    E, eps = dispersion(1e-6, nu)
    assert eps / 1e-6 == pytest.approx(math.sqrt(2), rel=1e-9)


def test_uv_oracle():
    E, eps = dispersion(1.0, 0.007)
    u, v = bogoliubov_coefficients(E, eps)
    assert u == pytest.approx(U_K1, rel=1e-13)
    assert v == pytest.approx(V_K1, rel=1e-13)
    # commonly quoted rounded value
    assert v == pytest.approx(7.05, rel=0.01)


@given(k=st.floats(1e-3, 1e3), nu=st.floats(1e-4, 1.0))
def test_bosonic_normalisation(k, nu):
    E, eps = dispersion(k, nu)
    u, v = bogoliubov_coefficients(E, eps)
    assert u * u - v * v == pytest.approx(1.0, rel=1e-9, abs=1e-9)
    assert u >= v >= 0


def test_uv_rejects_zero_mode():
    with pytest.raises(ValueError):
        bogoliubov_coefficients(0.0, 0.0)


def test_occupation_oracle():
    lat = build_lattice(256, 100.0)
    p = DimensionlessParams(rho0=200, nu=0.007, tau=1e-4)
    m = bogoliubov_modes(lat, p)
    assert lat.k[1] == pytest.approx(2 * math.pi / 100)
    assert m.n[1] == pytest.approx(N_TAU4_K1, rel=1e-12)
    assert m.half_variance[1] == pytest.approx(N_TAU4_K1 + 0.5, rel=1e-12)
    assert m.n[0] == 0.0
    assert np.all(np.isfinite(m.n)) and np.all(m.n >= 0)


def test_zero_temperature_is_vacuum():
    lat = build_lattice(64, 100.0)
    p = DimensionlessParams(tau=0.0)
    m = bogoliubov_modes(lat, p)
    assert np.all(m.n == 0.0)
    rng = trajectory_rng(1, 0)
    amps = sample_thermal_amplitudes(m, 0.0, p.rho0, p.nu, rng)
    rng2 = trajectory_rng(1, 0)
    eta = complex_normal(rng2, (2, 64))
    assert np.allclose(amps.beta, eta[0] / math.sqrt(2))


def test_tau_to_zero_limit_continuous():
    lat = build_lattice(64, 100.0)
    m = bogoliubov_modes(lat, DimensionlessParams(tau=1e-12))
    assert np.allclose(m.half_variance, 0.5, atol=1e-12)


def test_negative_tau_rejected():
    lat = build_lattice(16, 10.0)
    m = bogoliubov_modes(lat, DimensionlessParams())
    with pytest.raises(ValueError):
        sample_thermal_amplitudes(m, -1.0, 200, 0.007, trajectory_rng(0, 0))


def test_variance_identity_monte_carlo():
    lat = build_lattice(32, 100.0)
    p = DimensionlessParams(tau=1e-4)
    m = bogoliubov_modes(lat, p)
    n = 20000
    rng = trajectory_rng(7, 0)
    acc_b = np.zeros(32)
    acc_a = np.zeros(32)
    for _ in range(n):
        amps = sample_thermal_amplitudes(m, p.tau, p.rho0, p.nu, rng)
        acc_b += np.abs(amps.beta) ** 2
        acc_a += np.abs(amps.alpha) ** 2
    mean_b = acc_b / n
    # |beta|^2 is exponential with mean n + 1/2: standard error = mean / sqrt(n)
    se = m.half_variance / math.sqrt(n)
    assert np.all(np.abs(mean_b - m.half_variance) < 5 * se)
    assert np.all(np.abs(acc_a / n - 0.5) < 5 * 0.5 / math.sqrt(n))


def _two_point_oracle(lat, m, keep):
    sel = keep & (lat.k != 0)
    w = m.n[sel] + 0.5
    ck = np.cos(np.outer(lat.x - lat.x[0], lat.k[sel]))
    normal = ck @ ((m.u[sel] ** 2 + m.v[sel] ** 2) * w) / lat.L
    anomalous = -(ck @ (2 * m.u[sel] * m.v[sel] * w)) / lat.L
    return normal, anomalous


def test_two_point_function_monte_carlo():
    lat = build_lattice(32, 100.0)
    p = DimensionlessParams(tau=1e-4)
    mask = lat.cutoff_mask()
    m = bogoliubov_modes(lat, p)
    normal, anomalous = _two_point_oracle(lat, m, mask.keep)
    n = 6000
    mean = math.sqrt(2 * p.rho0)
    acc_n = np.zeros((n, 32), complex)
    acc_a = np.zeros((n, 32), complex)
    for i in range(n):
        rng = trajectory_rng(99, i)
        amps = sample_thermal_amplitudes(m, p.tau, p.rho0, p.nu, rng)
        s = assemble_fields(m, amps, lat, p.rho0, mask)
        d = s.psi1 - mean
        # the k = 0 vacuum noise is not part of the phonon sum
        d = d - d.mean()
        acc_n[i] = d * np.conj(d[0])
        acc_a[i] = d * d[0]
    for acc, oracle in [(acc_n, normal), (acc_a, anomalous)]:
        est = acc.mean(axis=0)
        se = acc.std(axis=0) / math.sqrt(n)
        assert np.all(np.abs(est.real - oracle) < 5 * se + 1e-12)
        assert np.all(np.abs(est.imag) < 5 * se + 1e-12)


def test_mean_density_split():
    lat = build_lattice(64, 100.0)
    p = DimensionlessParams()
    mask = lat.cutoff_mask()
    m = bogoliubov_modes(lat, p)
    n = 400
    tot = np.empty(n)
    diff = np.empty(n)
    for i in range(n):
        s = sample_initial("thermal", lat, p, 3, i, mask, m)
        rho1 = np.mean(np.abs(s.psi1) ** 2)
        rho2 = np.mean(np.abs(s.psi2) ** 2)
        tot[i] = rho1 + rho2
        diff[i] = rho1 - rho2
    assert abs(diff.mean()) < 5 * diff.std() / math.sqrt(n)
    # condensate + phonon (u^2 + v^2)(n + 1/2) + half a quantum per empty mode + k = 0 vacuum
    sel = mask.keep & (lat.k != 0)
    extra = np.sum((m.u[sel] ** 2 + m.v[sel] ** 2) * (m.n[sel] + 0.5)) + 0.5 * mask.n_kept + 0.5
    expect = 2 * p.rho0 + extra / lat.L
    assert abs(tot.mean() - expect) < 5 * tot.std() / math.sqrt(n)
    assert s.rotated


def test_false_vacuum_phase():
    lat = build_lattice(64, 100.0)
    s = sample_initial("classical", lat, DimensionlessParams(), 0, 0)
    assert np.allclose(s.psi1, math.sqrt(200))
    assert np.allclose(s.psi2, -math.sqrt(200))
    # unrotated species-1 condensate gives the same state
    p1, p2 = rotate_fields(np.full(64, math.sqrt(400.0)), np.zeros(64))
    assert np.allclose(p1, s.psi1) and np.allclose(p2, s.psi2)


@settings(max_examples=50)
@given(theta=st.floats(-7, 7), phi=st.floats(-7, 7))
def test_rotation_unitary(theta, phi):
    R = rotation_matrix(theta, phi)
    assert np.allclose(R.conj().T @ R, np.eye(2), atol=1e-12)
    rng = np.random.default_rng(0)
    a = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    b = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    c, d = rotate_fields(a, b, theta, phi)
    assert np.allclose(np.abs(c) ** 2 + np.abs(d) ** 2, np.abs(a) ** 2 + np.abs(b) ** 2)


def test_rotation_inverse():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((2, 8)) + 1j
    c, d = rotate_fields(*rotate_fields(a, b), theta=-math.pi / 2)
    assert np.allclose(c, a) and np.allclose(d, b)


@pytest.mark.parametrize("kind", ["thermal", "coherent"])
def test_no_noise_in_masked_modes(kind):
    lat = build_lattice(128, 100.0)
    mask = lat.cutoff_mask(3.0)
    s = sample_initial(kind, lat, DimensionlessParams(), 5, 2, mask)
    for f in (s.psi1, s.psi2):
        a = lat.forward_spectrum(f)
        assert np.all(np.abs(a[~mask.keep]) < 1e-9)


def test_streams_deterministic_and_independent():
    lat = build_lattice(64, 100.0)
    p = DimensionlessParams()
    a = sample_initial("thermal", lat, p, 42, 3)
    b = sample_initial("thermal", lat, p, 42, 3)
    c = sample_initial("thermal", lat, p, 42, 4)
    d = sample_initial("thermal", lat, p, 43, 3)
    assert np.array_equal(a.psi1, b.psi1) and np.array_equal(a.psi2, b.psi2)
    assert not np.allclose(a.psi1, c.psi1)
    assert not np.allclose(a.psi1, d.psi1)


def test_streams_independent_of_cutoff():
    # same draws, different mask: unmasked modes coincide
    lat = build_lattice(64, 100.0)
    p = DimensionlessParams()
    full = sample_initial("thermal", lat, p, 1, 0)
    cut_mask = lat.cutoff_mask(2.0)
    cut = sample_initial("thermal", lat, p, 1, 0, cut_mask)
    fa = lat.forward_spectrum(full.psi2)
    ca = lat.forward_spectrum(cut.psi2)
    assert np.allclose(fa[cut_mask.keep], ca[cut_mask.keep])


def test_unknown_kind():
    with pytest.raises(ValueError, match="thermal"):
        sample_initial("squeezed", build_lattice(16, 1.0), DimensionlessParams(), 0, 0)


def test_rabi_rotate_marks_sample():
    lat = build_lattice(16, 10.0)
    m = bogoliubov_modes(lat, DimensionlessParams())
    amps = sample_thermal_amplitudes(m, 0.0, 200, 0.007, trajectory_rng(0, 0))
    s = assemble_fields(m, amps, lat, 200.0)
    assert not s.rotated
    r = rabi_rotate(s)
    assert r.rotated
    assert np.allclose(r.density, s.density)
