#ifndef FVAC_RK4IP_CORE_H
#define FVAC_RK4IP_CORE_H

#include <complex.h>

typedef struct {
    int M;
    double dt;
    double g;
    double base;   /* drive(t) = base * (1 + amp * cos(omega t)) */
    double amp;
    double omega;
    const double complex *E;   /* keep * exp(-i w dt / 2), length M */
    const double *keep;        /* 0/1 per mode, length M */
} fvac_rk4ip_params;

/* Integrate one trajectory.
 *   a        : spectral state, 2*M complex (species-major), updated in place
 *   frames   : (n_steps / save_stride + 1) * 2 * M complex, real-space output
 * Returns 0 on success, or the 1-based step index at which a saved frame
 * was non-finite.  Returns -1 on allocation failure.
 */
long fvac_rk4ip_run(const fvac_rk4ip_params *p, double complex *a, double t0,
                    long n_steps, long save_stride, double complex *frames);

#endif
