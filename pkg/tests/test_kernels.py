"""Backend parity: the compiled kernels must match the NumPy fallback."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sublevelkit.kernels import BACKEND, _fallback

if BACKEND == "compiled":
    from sublevelkit.kernels import _impl
else:
    _impl = None

needs_compiled = pytest.mark.skipif(
    _impl is None, reason="compiled kernel backend not built"
)

finite = st.floats(min_value=-50, max_value=50, allow_nan=False)

# for the oscillatory kernels: sin(1/x) argument reduction at |x| < ~1e-6
# differs legitimately between numpy's vector routines and libm, so parity
# is only asserted away from that zone (plus the pinned value at exactly 0)
osc_safe = st.one_of(
    st.just(0.0),
    st.floats(min_value=1e-6, max_value=50),
    st.floats(min_value=-50, max_value=-1e-6),
)


def _vec(n):
    return arrays(np.float64, (n,), elements=finite)


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(x=_vec(6), b=_vec(6), c=finite)
def test_quad_parity(x, b, c):
    rng = np.random.default_rng(int(abs(x).sum() * 1e3) % 2**32)
    A = rng.standard_normal((6, 6))
    A = np.ascontiguousarray(A + A.T)
    v1, g1 = _impl.quad_value_grad(A, b, c, x)
    v2, g2 = _fallback.quad_value_grad(A, b, c, x)
    assert abs(v1 - v2) <= 1e-9 * (1 + abs(v2))
    assert np.allclose(g1, g2, rtol=1e-12, atol=1e-9)
    X = np.ascontiguousarray(np.vstack([x, 2 * x, -x]))
    assert np.allclose(
        _impl.quad_value_batch(A, b, c, X),
        _fallback.quad_value_batch(A, b, c, X),
        rtol=1e-12, atol=1e-9,
    )


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(xs=arrays(np.float64, (17,), elements=osc_safe))
def test_osc_and_posc_parity(xs):
    xs = np.ascontiguousarray(xs)
    for name in ("osc_value_batch", "osc_grad_batch",
                 "posc_value_batch", "posc_grad_batch"):
        a = np.asarray(getattr(_impl, name)(xs))
        b = np.asarray(getattr(_fallback, name)(xs))
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12), name


@needs_compiled
@settings(max_examples=25, deadline=None)
@given(u=arrays(np.float64, (12,), elements=st.floats(-5, 5)))
def test_elliptic_parity(u):
    u = np.ascontiguousarray(u)
    h = 1.0 / 13
    al = np.full(12, 0.7)
    be = np.full(12, -0.4)
    a, s, b, c, q, p, lam = 0.3, 0.5, 1.2, 0.8, 2.0, 3.0, 0.6
    assert np.isclose(
        _impl.ell_psi_value(u, h, a, s, al),
        _fallback.ell_psi_value(u, h, a, s, al), rtol=1e-12, atol=1e-12,
    )
    assert np.isclose(
        _impl.ell_phi_value(u, h, b, c, q, p, be),
        _fallback.ell_phi_value(u, h, b, c, q, p, be), rtol=1e-12, atol=1e-12,
    )
    for pair in (
        (_impl.ell_psi_grad(u, h, a, s, al), _fallback.ell_psi_grad(u, h, a, s, al)),
        (_impl.ell_phi_grad(u, h, b, c, q, p, be),
         _fallback.ell_phi_grad(u, h, b, c, q, p, be)),
        (_impl.ell_residual(u, h, a, s, al, lam, b, c, q, p, be),
         _fallback.ell_residual(u, h, a, s, al, lam, b, c, q, p, be)),
    ):
        assert np.allclose(np.asarray(pair[0]), np.asarray(pair[1]),
                           rtol=1e-12, atol=1e-10)


def test_osc_value_defined_at_zero():
    out = _fallback.osc_value_batch(np.array([0.0, 0.5]))
    assert out[0] == 0.0
    assert out[1] == -0.25 * (2.0 + np.sin(2.0))
