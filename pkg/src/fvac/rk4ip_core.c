/* Interaction-picture RK4 for the two coupled fields, state kept in k-space.
 *
 * Per step four nonlinear evaluations, each one backward and one forward
 * FFT of both species (batched in a single FFTW plan).  The kinetic
 * propagator and the cutoff projection are pointwise multiplies.
 */
#include <complex.h>
#include <fftw3.h>
#include <math.h>
#include <string.h>

#include "rk4ip_core.h"

typedef struct {
    fftw_plan fwd;
    fftw_plan bwd;
    double complex *work;
} fft_ctx;

static void nonlinear(const fvac_rk4ip_params *p, const fft_ctx *c,
                      const double complex *restrict src,
                      double complex *restrict dst, double drive)
{
    const int M = p->M;
    const int M2 = 2 * M;
    double complex *restrict w = c->work;
    const double scale = 1.0 / ((double)M * M * M);

    memcpy(w, src, M2 * sizeof *w);
    fftw_execute(c->bwd);
    for (int n = 0; n < M2; n++) {
        double re = creal(w[n]), im = cimag(w[n]);
        w[n] *= (re * re + im * im) * scale;
    }
    fftw_execute(c->fwd);

    const double g = p->g;
    const double *restrict keep = p->keep;
    for (int n = 0; n < M; n++) {
        /* -i g NL + i drive * other */
        double complex x1 = g * cimag(w[n]) - drive * cimag(src[M + n])
                          + I * (drive * creal(src[M + n]) - g * creal(w[n]));
        double complex x2 = g * cimag(w[M + n]) - drive * cimag(src[n])
                          + I * (drive * creal(src[n]) - g * creal(w[M + n]));
        dst[n] = keep[n] * x1;
        dst[M + n] = keep[n] * x2;
    }
}

static double save_frame(const fvac_rk4ip_params *p, const fft_ctx *c,
                         const double complex *a, double complex *out)
{
    const int M2 = 2 * p->M;
    const double inv = 1.0 / p->M;
    double check = 0.0;
    memcpy(c->work, a, M2 * sizeof *a);
    fftw_execute(c->bwd);
    for (int n = 0; n < M2; n++) {
        out[n] = c->work[n] * inv;
        check += fabs(creal(out[n])) + fabs(cimag(out[n]));
    }
    return check;
}

long fvac_rk4ip_run(const fvac_rk4ip_params *p, double complex *a, double t0,
                    long n_steps, long save_stride, double complex *frames)
{
    const int M = p->M;
    const int M2 = 2 * M;
    const double h = p->dt;
    const double h2 = 0.5 * h;
    const double h6 = h / 6.0;
    const double complex *restrict E = p->E;
    long status = 0;

    double complex *buf = fftw_malloc(6 * (size_t)M2 * sizeof *buf);
    fft_ctx c;
    c.work = fftw_malloc((size_t)M2 * sizeof *c.work);
    if (buf == NULL || c.work == NULL) {
        fftw_free(buf);
        fftw_free(c.work);
        return -1;
    }
    double complex *restrict aI = buf;
    double complex *restrict k1 = buf + M2;
    double complex *restrict k2 = buf + 2 * M2;
    double complex *restrict k3 = buf + 3 * M2;
    double complex *restrict k4 = buf + 4 * M2;
    double complex *restrict tmp = buf + 5 * M2;

    int n_arr[1] = {M};
    c.fwd = fftw_plan_many_dft(1, n_arr, 2, c.work, NULL, 1, M, c.work, NULL, 1, M,
                               FFTW_FORWARD, FFTW_ESTIMATE);
    c.bwd = fftw_plan_many_dft(1, n_arr, 2, c.work, NULL, 1, M, c.work, NULL, 1, M,
                               FFTW_BACKWARD, FFTW_ESTIMATE);

    save_frame(p, &c, a, frames);
    long f = 1;
    for (long step = 0; step < n_steps; step++) {
        const double t = t0 + step * h;
        const double d0 = p->base * (1.0 + p->amp * cos(p->omega * t));
        const double d1 = p->base * (1.0 + p->amp * cos(p->omega * (t + h2)));
        const double d2 = p->base * (1.0 + p->amp * cos(p->omega * (t + h)));

        for (int s = 0; s < 2; s++)
            for (int n = 0; n < M; n++)
                aI[s * M + n] = E[n] * a[s * M + n];

        nonlinear(p, &c, a, tmp, d0);
        for (int s = 0; s < 2; s++)
            for (int n = 0; n < M; n++) {
                int i = s * M + n;
                k1[i] = E[n] * tmp[i];
                tmp[i] = aI[i] + h2 * k1[i];
            }
        nonlinear(p, &c, tmp, k2, d1);
        for (int i = 0; i < M2; i++)
            tmp[i] = aI[i] + h2 * k2[i];
        nonlinear(p, &c, tmp, k3, d1);
        for (int s = 0; s < 2; s++)
            for (int n = 0; n < M; n++) {
                int i = s * M + n;
                tmp[i] = E[n] * (aI[i] + h * k3[i]);
            }
        nonlinear(p, &c, tmp, k4, d2);
        for (int s = 0; s < 2; s++)
            for (int n = 0; n < M; n++) {
                int i = s * M + n;
                a[i] = E[n] * (aI[i] + h6 * (k1[i] + 2.0 * (k2[i] + k3[i]))) + h6 * k4[i];
            }

        if ((step + 1) % save_stride == 0) {
            double check = save_frame(p, &c, a, frames + f * M2);
            if (!isfinite(check)) {
                status = step + 1;
                break;
            }
            f++;
        }
    }

    fftw_destroy_plan(c.fwd);
    fftw_destroy_plan(c.bwd);
    fftw_free(c.work);
    fftw_free(buf);
    return status;
}
