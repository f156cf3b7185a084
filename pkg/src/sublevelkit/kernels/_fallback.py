"""Pure-NumPy implementations of the hot kernels.

Same signatures and semantics as the compiled module ``_impl``; the parity
test suite asserts agreement to near machine precision.  These are the
innermost evaluations of the toolkit: quadratic forms (random benchmark
pairs), the discretized elliptic energies with their gradients and the
strong-form residual, and batch evaluation of the oscillatory 1D builtins.
"""

import numpy as np


# ---------------------------------------------------------------------------
# quadratic forms  f(x) = 0.5 x'Ax + b'x + c
# ---------------------------------------------------------------------------

def quad_value(A, b, c, x):
    return 0.5 * float(x @ (A @ x)) + float(b @ x) + c


def quad_grad(A, b, c, x):
    return A @ x + b


def quad_value_grad(A, b, c, x):
    Ax = A @ x
    return 0.5 * float(x @ Ax) + float(b @ x) + c, Ax + b


def quad_value_batch(A, b, c, X):
    # X has shape (m, n)
    return 0.5 * np.einsum("ij,jk,ik->i", X, A, X) + X @ b + c


# ---------------------------------------------------------------------------
# 1D oscillatory builtins
# ---------------------------------------------------------------------------

def osc_value_batch(xs):
    """-x^2 (2 + sin(1/x)) with value 0 at x = 0, elementwise."""
    xs = np.asarray(xs, dtype=float)
    out = np.zeros_like(xs)
    nz = xs != 0.0
    x = xs[nz]
    out[nz] = -x * x * (2.0 + np.sin(1.0 / x))
    return out


def osc_grad_batch(xs):
    """Derivative of the oscillating well; 0 at x = 0 (removable)."""
    xs = np.asarray(xs, dtype=float)
    out = np.zeros_like(xs)
    nz = xs != 0.0
    x = xs[nz]
    out[nz] = -2.0 * x * (2.0 + np.sin(1.0 / x)) + np.cos(1.0 / x)
    return out


def posc_value_batch(xs):
    """0.5 x^2 + 0.3 x^2 sin(log(1 + x^2)), elementwise."""
    xs = np.asarray(xs, dtype=float)
    x2 = xs * xs
    return 0.5 * x2 + 0.3 * x2 * np.sin(np.log1p(x2))


def posc_grad_batch(xs):
    xs = np.asarray(xs, dtype=float)
    x2 = xs * xs
    L = np.log1p(x2)
    return xs + 0.6 * xs * np.sin(L) + 0.6 * xs * x2 * np.cos(L) / (1.0 + x2)


# ---------------------------------------------------------------------------
# discretized elliptic energies on (0,1), homogeneous Dirichlet data
#
# u holds the N interior nodal values, h = 1/(N+1); trapezoid quadrature
# reduces to h * sum over interior nodes because every integrand vanishes
# on the boundary.
# ---------------------------------------------------------------------------

def _dirichlet_energy(u, h):
    # sum over the N+1 intervals of (u_{i+1}-u_i)^2 / h, boundary values 0
    d = np.diff(u, prepend=0.0, append=0.0)
    return float(d @ d) / h


def _signed_abs_pow(u, expo):
    # |u|^expo * sign(u) with the continuous extension 0 at u = 0; this is
    # the nan-free form of |u|^(expo-1) * u
    return np.abs(u) ** expo * np.sign(u)


def ell_psi_value(u, h, a, s, alpha):
    val = 0.5 * _dirichlet_energy(u, h)
    if a != 0.0:
        val -= (a / (s + 1.0)) * h * float(np.sum(np.abs(u) ** (s + 1.0)))
    val -= h * float(alpha @ u)
    return val


def ell_psi_grad(u, h, a, s, alpha):
    n = u.shape[0]
    g = np.empty(n)
    g[:] = 2.0 * u
    g[:-1] -= u[1:]
    g[1:] -= u[:-1]
    g /= h
    if a != 0.0:
        g -= a * h * _signed_abs_pow(u, s)
    g -= h * alpha
    return g


def ell_phi_value(u, h, b, c, q, p, beta):
    up = np.maximum(u, 0.0)
    val = (c / (p + 1.0)) * h * float(np.sum(up ** (p + 1.0)))
    val -= (b / (q + 1.0)) * h * float(np.sum(np.abs(u) ** (q + 1.0)))
    val -= h * float(beta @ u)
    return val


def ell_phi_grad(u, h, b, c, q, p, beta):
    up = np.maximum(u, 0.0)
    g = c * h * up**p
    g -= b * h * _signed_abs_pow(u, q)
    g -= h * beta
    return g


def ell_psi_value_grad(u, h, a, s, alpha):
    return ell_psi_value(u, h, a, s, alpha), ell_psi_grad(u, h, a, s, alpha)


def ell_phi_value_grad(u, h, b, c, q, p, beta):
    return ell_phi_value(u, h, b, c, q, p, beta), ell_phi_grad(u, h, b, c, q, p, beta)


def ell_residual(u, h, a, s, alpha, lam, b, c, q, p, beta):
    """Strong-form residual of the discrete boundary-value problem.

    residual_i = (-Lap_h u)_i - a|u_i|^{s-1}u_i - alpha_i
                 - lam*(b|u_i|^{q-1}u_i - c*max(u_i,0)^p + beta_i)

    Identity: grad(Psi_h + lam*Phi_h)(u) == h * residual(u) exactly.
    """
    n = u.shape[0]
    r = np.empty(n)
    r[:] = 2.0 * u
    r[:-1] -= u[1:]
    r[1:] -= u[:-1]
    r /= h * h
    if a != 0.0:
        r -= a * _signed_abs_pow(u, s)
    r -= alpha
    up = np.maximum(u, 0.0)
    r -= lam * (b * _signed_abs_pow(u, q) - c * up**p + beta)
    return r
