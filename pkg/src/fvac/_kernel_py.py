"""Pure numpy RK4IP kernel; reference implementation and fallback."""

import numpy as np


def integrate(a0, dt, n_steps, save_stride, E, keep, g, base, amp, omega, t0=0.0):
    """Integrate spectral fields ``a0`` of shape (B, 2, M).

    ``a0`` holds unnormalised forward-FFT coefficients (numpy convention).
    ``E = keep * exp(-i w dt / 2)`` is the half-step kinetic propagator and the
    drive is ``base * (1 + amp * cos(omega t))``.  Returns real-space frames
    of shape (B, n_steps // save_stride + 1, 2, M), first frame at ``t0``.

    Raises FloatingPointError at the first save with a non-finite value.
    """
    a = np.array(a0, dtype=np.complex128, copy=True)
    n_frames = n_steps // save_stride + 1
    frames = np.empty((a.shape[0], n_frames) + a.shape[1:], dtype=np.complex128)
    frames[:, 0] = np.fft.ifft(a, axis=-1)
    h = dt
    mig = -1j * g

    def N(x, t):
        psi = np.fft.ifft(x, axis=-1)
        nl = np.fft.fft(psi * (psi.real**2 + psi.imag**2), axis=-1)
        c = base * (1.0 + amp * np.cos(omega * t))
        out = mig * nl
        out += (1j * c) * x[:, ::-1, :]
        out *= keep
        return out

    with np.errstate(over="ignore", invalid="ignore"):  # blow-ups are reported at the next save
        _loop(a, frames, N, E, h, t0, n_steps, save_stride)
    return frames


def _loop(a, frames, N, E, h, t0, n_steps, save_stride):
    f = 1
    for n in range(n_steps):
        t = t0 + n * h
        aI = E * a
        k1 = E * N(a, t)
        k2 = N(aI + (0.5 * h) * k1, t + 0.5 * h)
        k3 = N(aI + (0.5 * h) * k2, t + 0.5 * h)
        k4 = N(E * (aI + h * k3), t + h)
        a = E * (aI + (h / 6.0) * (k1 + 2.0 * (k2 + k3))) + (h / 6.0) * k4
        if (n + 1) % save_stride == 0:
            frame = np.fft.ifft(a, axis=-1)
            if not np.all(np.isfinite(frame)):
                raise FloatingPointError(f"non-finite field at t={t + h:.6g}")
            frames[:, f] = frame
            f += 1
