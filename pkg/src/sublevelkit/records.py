"""Shared result records."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class CriticalPointRecord:
    """A located point of interest with its classification.

    kind is one of ``sublevel_global`` (global minimizer of the restriction
    to a sublevel set), ``local_min``, ``global_min``, ``fixed_point``.
    grad_norm is the stationarity measure of the composite phi + lam*psi at
    x (projected-gradient norm when x sits on a domain face); None when the
    oracles expose no gradient.
    """

    x: np.ndarray
    phi_val: float
    psi_val: float
    grad_norm: Optional[float]
    kind: str
    lam: Optional[float] = None

    def to_dict(self):
        return {
            "x": [float(v) for v in np.atleast_1d(self.x)],
            "phi_val": float(self.phi_val),
            "psi_val": float(self.psi_val),
            "grad_norm": None if self.grad_norm is None else float(self.grad_norm),
            "kind": self.kind,
            "lambda": None if self.lam is None else float(self.lam),
        }
