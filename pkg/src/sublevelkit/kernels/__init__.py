"""Hot-kernel backend selection.

Prefers the compiled Cython module when it was built; otherwise (or when the
``SUBLEVELKIT_PURE_PY`` environment variable is set to a non-empty value)
falls back to the pure-NumPy twin.  ``BACKEND`` records which one is active.
"""

import os

if os.environ.get("SUBLEVELKIT_PURE_PY"):
    from . import _fallback as impl

    BACKEND = "python"
else:
    try:
        from . import _impl as impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _fallback as impl

        BACKEND = "python"

quad_value = impl.quad_value
quad_grad = impl.quad_grad
quad_value_grad = impl.quad_value_grad
quad_value_batch = impl.quad_value_batch
osc_value_batch = impl.osc_value_batch
osc_grad_batch = impl.osc_grad_batch
posc_value_batch = impl.posc_value_batch
posc_grad_batch = impl.posc_grad_batch
ell_psi_value = impl.ell_psi_value
ell_psi_grad = impl.ell_psi_grad
ell_psi_value_grad = impl.ell_psi_value_grad
ell_phi_value = impl.ell_phi_value
ell_phi_grad = impl.ell_phi_grad
ell_phi_value_grad = impl.ell_phi_value_grad
ell_residual = impl.ell_residual

__all__ = [
    "BACKEND",
    "impl",
    "quad_value",
    "quad_grad",
    "quad_value_grad",
    "quad_value_batch",
    "osc_value_batch",
    "osc_grad_batch",
    "posc_value_batch",
    "posc_grad_batch",
    "ell_psi_value",
    "ell_psi_grad",
    "ell_psi_value_grad",
    "ell_phi_value",
    "ell_phi_grad",
    "ell_phi_value_grad",
    "ell_residual",
]
