# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled per-step kernels for the scalar path ensembles.

Signatures and expression grouping match stochtame._backend.fallback so the
two backends agree to rounding.
"""

from libc.math cimport fabs, log, sqrt


def envelope_chunk(double[::1] z, double[::1] rec, double[:, ::1] dw, u, double h, double c):
    cdef Py_ssize_t steps = dw.shape[0]
    cdef Py_ssize_t npaths = dw.shape[1]
    cdef Py_ssize_t s, p
    cdef double ch = c * h
    cdef double two_h = 2.0 * h
    cdef double dz, z1, seg
    cdef double[:, ::1] uu
    if u is None:
        for s in range(steps):
            for p in range(npaths):
                dz = dw[s, p] - ch
                z1 = z[p] + dz
                if z1 > rec[p]:
                    rec[p] = z1
                z[p] = z1
    else:
        uu = u
        for s in range(steps):
            for p in range(npaths):
                dz = dw[s, p] - ch
                z1 = z[p] + dz
                seg = 0.5 * ((z[p] + z1) + sqrt(dz * dz - two_h * log(uu[s, p])))
                if seg > rec[p]:
                    rec[p] = seg
                z[p] = z1


def tamed_gbm_chunk(double[::1] x, double a, double b, double[:, ::1] dw, double h):
    cdef Py_ssize_t steps = dw.shape[0]
    cdef Py_ssize_t npaths = dw.shape[1]
    cdef Py_ssize_t s, p
    cdef double m, g
    for s in range(steps):
        for p in range(npaths):
            m = a * x[p]
            g = b * x[p]
            x[p] += h * m / (1.0 + h * fabs(m)) + dw[s, p] * g / (1.0 + h * g * g)
