# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled unit-time propagation kernels for the scalar builtin models.

Every floating point expression mirrors the numpy code in models.py and
_pykernels.py operation for operation, so both backends agree bit for bit
(the extension is built with -ffp-contract=off to keep FMA out).
"""
import numpy as np
from libc.math cimport sqrt

cdef enum:
    KIND_OU = 0
    KIND_LANGEVIN = 1
    KIND_GBM = 2
    KIND_NONLINEAR = 3


cdef inline void _coeffs(int kind, const double* p, double x, double* b, double* s) noexcept nogil:
    if kind == KIND_OU:
        b[0] = -x
        s[0] = p[0]
    elif kind == KIND_LANGEVIN:
        b[0] = -0.5 * (p[0] + 1.0) * x / (p[0] + x * x)
        s[0] = p[1]
    elif kind == KIND_GBM:
        b[0] = p[0] * x
        s[0] = p[1] * x
    else:
        b[0] = -x
        s[0] = 1.0 / sqrt(1.0 + x * x)


cdef void _block(int kind, const double* p, double h_scale, double* x, double* lw,
                 const double[:, ::1] v, int stride, const double[::1] dy, double dt, Py_ssize_t n) noexcept nogil:
    # v is read at columns 0, stride, 2*stride, ... summed over `stride` consecutive entries
    cdef Py_ssize_t i, k, j
    cdef Py_ssize_t K = dy.shape[0]
    cdef double xi, acc, h, b, s, vk
    cdef double half_dt = 0.5 * dt
    for i in range(n):
        xi = x[i]
        acc = 0.0
        for k in range(K):
            h = h_scale * xi
            acc = acc + (h * dy[k] - half_dt * (h * h))
            _coeffs(kind, p, xi, &b, &s)
            vk = v[i, k * stride]
            for j in range(1, stride):
                vk = vk + v[i, k * stride + j]
            xi = xi + b * dt + s * vk
        x[i] = xi
        lw[i] = acc


def propagate(int kind, double[::1] params, double h_scale, double[::1] x0,
              const double[:, ::1] v, const double[::1] dy, double dt):
    """Terminal states and block log-weights for N scalar particles."""
    cdef Py_ssize_t n = x0.shape[0]
    x = np.array(x0, dtype=np.float64)
    lw = np.empty(n, dtype=np.float64)
    cdef double[::1] xv = x
    cdef double[::1] lwv = lw
    cdef double[::1] pv = params if params.shape[0] > 0 else np.zeros(1)
    with nogil:
        _block(kind, &pv[0], h_scale, &xv[0], &lwv[0], v, 1, dy, dt, n)
    return x, lw


def propagate_coupled(int kind, double[::1] params, double h_scale, double[::1] xf0, double[::1] xc0,
                      const double[:, ::1] v, const double[::1] dy_fine, const double[::1] dy_coarse,
                      double dt):
    """Coupled fine/coarse blocks sharing the Brownian increments ``v``."""
    cdef Py_ssize_t n = xf0.shape[0]
    xf = np.array(xf0, dtype=np.float64)
    xc = np.array(xc0, dtype=np.float64)
    lwf = np.empty(n, dtype=np.float64)
    lwc = np.empty(n, dtype=np.float64)
    cdef double[::1] xfv = xf
    cdef double[::1] xcv = xc
    cdef double[::1] lwfv = lwf
    cdef double[::1] lwcv = lwc
    cdef double[::1] pv = params if params.shape[0] > 0 else np.zeros(1)
    with nogil:
        _block(kind, &pv[0], h_scale, &xfv[0], &lwfv[0], v, 1, dy_fine, dt, n)
        _block(kind, &pv[0], h_scale, &xcv[0], &lwcv[0], v, 2, dy_coarse, 2.0 * dt, n)
    return xf, lwf, xc, lwc
