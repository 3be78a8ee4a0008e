# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled RK4IP kernel (C core on FFTW); same call as ``_kernel_py.integrate``.

Plans use FFTW_ESTIMATE, so the chosen algorithm and its rounding are the
same in every process.
"""

import numpy as np


cdef extern from "rk4ip_core.h" nogil:
    ctypedef struct fvac_rk4ip_params:
        int M
        double dt
        double g
        double base
        double amp
        double omega
        const double complex *E
        const double *keep
    long fvac_rk4ip_run(const fvac_rk4ip_params *p, double complex *a, double t0,
                        long n_steps, long save_stride, double complex *frames)


def integrate(a0, double dt, long n_steps, long save_stride, E, keep,
              double g, double base, double amp, double omega, double t0=0.0):
    state = np.array(a0, dtype=np.complex128, order="C", copy=True)
    if state.ndim != 3 or state.shape[1] != 2:
        raise ValueError("expected fields of shape (B, 2, M)")
    cdef int B = state.shape[0]
    cdef int M = state.shape[2]
    E_arr = np.ascontiguousarray(E, dtype=np.complex128)
    keep_arr = np.ascontiguousarray(keep, dtype=np.float64)
    if E_arr.shape != (M,) or keep_arr.shape != (M,):
        raise ValueError("propagator and mask must have M entries")
    if save_stride < 1 or n_steps < 0:
        raise ValueError("need save_stride >= 1 and n_steps >= 0")

    cdef long n_frames = n_steps // save_stride + 1
    frames_arr = np.empty((B, n_frames, 2, M), dtype=np.complex128)

    cdef double complex[:, :, ::1] a_v = state
    cdef double complex[:, :, :, ::1] f_v = frames_arr
    cdef double complex[::1] E_v = E_arr
    cdef double[::1] k_v = keep_arr

    cdef fvac_rk4ip_params p
    p.M = M
    p.dt = dt
    p.g = g
    p.base = base
    p.amp = amp
    p.omega = omega
    p.E = &E_v[0]
    p.keep = &k_v[0]

    cdef long status = 0
    cdef int b
    cdef int bad = -1
    with nogil:
        for b in range(B):
            status = fvac_rk4ip_run(&p, &a_v[b, 0, 0], t0, n_steps, save_stride, &f_v[b, 0, 0, 0])
            if status != 0:
                bad = b
                break
    if status == -1:
        raise MemoryError("kernel scratch allocation failed")
    if status > 0:
        raise FloatingPointError(f"non-finite field at t={t0 + status * dt:.6g} (batch item {bad})")
    return frames_arr
