# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the fallback kernels.

Single-pass C loops over contiguous float64 buffers; every function returns
the same values as its `_fallback` counterpart (parity-tested to 1e-12).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, fabs, log1p, pow, sin

cnp.import_array()


# ---------------------------------------------------------------------------
# quadratic forms
# ---------------------------------------------------------------------------

def quad_value(double[:, ::1] A, double[::1] b, double c, double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc = c, row
    for i in range(n):
        row = 0.0
        for j in range(n):
            row += A[i, j] * x[j]
        acc += 0.5 * x[i] * row + b[i] * x[i]
    return acc


def quad_grad(double[:, ::1] A, double[::1] b, double c, double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] g = out
    cdef Py_ssize_t i, j
    cdef double row
    for i in range(n):
        row = b[i]
        for j in range(n):
            row += A[i, j] * x[j]
        g[i] = row
    return out


def quad_value_grad(double[:, ::1] A, double[::1] b, double c, double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] g = out
    cdef Py_ssize_t i, j
    cdef double acc = c, row
    for i in range(n):
        row = 0.0
        for j in range(n):
            row += A[i, j] * x[j]
        acc += 0.5 * x[i] * row + b[i] * x[i]
        g[i] = row + b[i]
    return acc, out


def quad_value_batch(double[:, ::1] A, double[::1] b, double c, double[:, ::1] X):
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t n = X.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(m)
    cdef double[::1] v = out
    cdef Py_ssize_t k, i, j
    cdef double acc, row
    for k in range(m):
        acc = c
        for i in range(n):
            row = 0.0
            for j in range(n):
                row += A[i, j] * X[k, j]
            acc += 0.5 * X[k, i] * row + b[i] * X[k, i]
        v[k] = acc
    return out


# ---------------------------------------------------------------------------
# 1D oscillatory builtins
# ---------------------------------------------------------------------------

def osc_value_batch(double[::1] xs):
    cdef Py_ssize_t m = xs.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(m)
    cdef double[::1] v = out
    cdef Py_ssize_t k
    cdef double x
    for k in range(m):
        x = xs[k]
        v[k] = 0.0 if x == 0.0 else -x * x * (2.0 + sin(1.0 / x))
    return out


def osc_grad_batch(double[::1] xs):
    cdef Py_ssize_t m = xs.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(m)
    cdef double[::1] v = out
    cdef Py_ssize_t k
    cdef double x
    for k in range(m):
        x = xs[k]
        v[k] = 0.0 if x == 0.0 else -2.0 * x * (2.0 + sin(1.0 / x)) + cos(1.0 / x)
    return out


def posc_value_batch(double[::1] xs):
    cdef Py_ssize_t m = xs.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(m)
    cdef double[::1] v = out
    cdef Py_ssize_t k
    cdef double x2
    for k in range(m):
        x2 = xs[k] * xs[k]
        v[k] = 0.5 * x2 + 0.3 * x2 * sin(log1p(x2))
    return out


def posc_grad_batch(double[::1] xs):
    cdef Py_ssize_t m = xs.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(m)
    cdef double[::1] v = out
    cdef Py_ssize_t k
    cdef double x, x2, L
    for k in range(m):
        x = xs[k]
        x2 = x * x
        L = log1p(x2)
        v[k] = x + 0.6 * x * sin(L) + 0.6 * x * x2 * cos(L) / (1.0 + x2)
    return out


# ---------------------------------------------------------------------------
# discretized elliptic energies (interior nodal values, zero boundary)
# ---------------------------------------------------------------------------

cdef inline double _signed_abs_pow(double u, double expo):
    # |u|^expo * sign(u), 0 at u = 0 (continuous extension)
    if u == 0.0:
        return 0.0
    return pow(fabs(u), expo) * (1.0 if u > 0.0 else -1.0)


def ell_psi_value(double[::1] u, double h, double a, double s, double[::1] alpha):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    cdef double energy = u[0] * u[0] + u[n - 1] * u[n - 1]
    cdef double d, low = 0.0
    for i in range(n - 1):
        d = u[i + 1] - u[i]
        energy += d * d
    for i in range(n):
        if a != 0.0:
            low += (a / (s + 1.0)) * pow(fabs(u[i]), s + 1.0)
        low += alpha[i] * u[i]
    return 0.5 * energy / h - h * low


def ell_psi_grad(double[::1] u, double h, double a, double s, double[::1] alpha):
    cdef Py_ssize_t n = u.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] g = out
    cdef Py_ssize_t i
    cdef double lap
    for i in range(n):
        lap = 2.0 * u[i]
        if i > 0:
            lap -= u[i - 1]
        if i < n - 1:
            lap -= u[i + 1]
        g[i] = lap / h - h * alpha[i]
        if a != 0.0:
            g[i] -= a * h * _signed_abs_pow(u[i], s)
    return out


def ell_phi_value(double[::1] u, double h, double b, double c, double q,
                  double p, double[::1] beta):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(n):
        if u[i] > 0.0:
            acc += (c / (p + 1.0)) * pow(u[i], p + 1.0)
        acc -= (b / (q + 1.0)) * pow(fabs(u[i]), q + 1.0)
        acc -= beta[i] * u[i]
    return h * acc


def ell_phi_grad(double[::1] u, double h, double b, double c, double q,
                 double p, double[::1] beta):
    cdef Py_ssize_t n = u.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] g = out
    cdef Py_ssize_t i
    cdef double t
    for i in range(n):
        t = -b * _signed_abs_pow(u[i], q) - beta[i]
        if u[i] > 0.0:
            t += c * pow(u[i], p)
        g[i] = h * t
    return out


def ell_psi_value_grad(double[::1] u, double h, double a, double s, double[::1] alpha):
    return ell_psi_value(u, h, a, s, alpha), ell_psi_grad(u, h, a, s, alpha)


def ell_phi_value_grad(double[::1] u, double h, double b, double c, double q,
                       double p, double[::1] beta):
    return (ell_phi_value(u, h, b, c, q, p, beta),
            ell_phi_grad(u, h, b, c, q, p, beta))


def ell_residual(double[::1] u, double h, double a, double s, double[::1] alpha,
                 double lam, double b, double c, double q, double p,
                 double[::1] beta):
    cdef Py_ssize_t n = u.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] r = out
    cdef Py_ssize_t i
    cdef double lap, t
    for i in range(n):
        lap = 2.0 * u[i]
        if i > 0:
            lap -= u[i - 1]
        if i < n - 1:
            lap -= u[i + 1]
        t = lap / (h * h) - alpha[i]
        if a != 0.0:
            t -= a * _signed_abs_pow(u[i], s)
        t -= lam * (b * _signed_abs_pow(u[i], q) + beta[i])
        if u[i] > 0.0:
            t += lam * c * pow(u[i], p)
        r[i] = t
    return out
