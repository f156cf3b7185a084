"""Functional oracles on R^n, benchmark library, and gradient verification.

A :class:`FunctionalOracle` packages evaluation (and optionally the gradient)
of a scalar functional together with declared analytic properties.  The
declared flags are capability statements, not proofs: convexity is trusted,
coercivity can be probed (:func:`probe_coercivity`), gradients are verified
against central finite differences (:func:`check_gradient`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import CapabilityError, OracleFaultError, UsageError

Point = np.ndarray


def as_point(x, dim: int) -> Point:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dim,):
        raise UsageError(f"point has shape {x.shape}, expected ({dim},)")
    return x


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Closed convex coordinate-box domain (bounds may be infinite).

    kind is one of ``all_space``, ``box``, ``halfspace_product``; it is
    descriptive only, the bounds arrays carry the geometry.
    """

    kind: str
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise UsageError("domain bounds must be 1D arrays of equal length")
        if np.any(lo > hi):
            raise UsageError("domain requires lower <= upper coordinatewise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @staticmethod
    def all_space(dim: int) -> "DomainSpec":
        return DomainSpec("all_space", np.full(dim, -np.inf), np.full(dim, np.inf))

    @staticmethod
    def box(lower, upper) -> "DomainSpec":
        return DomainSpec("box", np.asarray(lower, float), np.asarray(upper, float))

    @staticmethod
    def halfspace_product(lower, upper) -> "DomainSpec":
        return DomainSpec(
            "halfspace_product", np.asarray(lower, float), np.asarray(upper, float)
        )

    def contains(self, x: Point, tol: float = 0.0) -> bool:
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def project(self, x: Point) -> Point:
        return np.clip(x, self.lower, self.upper)

    def scipy_bounds(self, extra_lower=None, extra_upper=None):
        """Bounds list for L-BFGS-B, intersected with an optional box."""
        lo = self.lower if extra_lower is None else np.maximum(self.lower, extra_lower)
        hi = self.upper if extra_upper is None else np.minimum(self.upper, extra_upper)
        return [
            (None if not math.isfinite(a) else a, None if not math.isfinite(b) else b)
            for a, b in zip(lo, hi)
        ]


@dataclass(frozen=True, eq=False)
class FunctionalOracle:
    """Evaluation/gradient oracle for a scalar functional on R^n.

    ``batch_value`` is an optional vectorized evaluation over an (m, dim)
    array, used by dense pre-scans; semantics must match ``value`` exactly.
    """

    dim: int
    value: Callable[[Point], float]
    gradient: Optional[Callable[[Point], Point]] = None
    convex: bool = False
    coercive: bool = False
    differentiable: bool = False
    label: str = ""
    batch_value: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def grad(self, x) -> Point:
        if self.gradient is None:
            raise CapabilityError(f"oracle {self.label!r} has no gradient")
        x = as_point(x, self.dim)
        g = np.asarray(self.gradient(x), dtype=float)
        if g.shape != (self.dim,):
            raise OracleFaultError(
                f"oracle {self.label!r} gradient has shape {g.shape}", x=x
            )
        return g

    def values(self, X: np.ndarray) -> np.ndarray:
        """Evaluate at every row of X, via batch_value when available."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise UsageError(f"batch has shape {X.shape}, expected (m, {self.dim})")
        if self.batch_value is not None:
            return np.asarray(self.batch_value(X), dtype=float)
        return np.array([self.value(row) for row in X], dtype=float)


def evaluate(oracle: FunctionalOracle, x, domain: DomainSpec | None = None) -> float:
    """Evaluate an oracle with dimension/domain checks and fault detection."""
    x = as_point(x, oracle.dim)
    if domain is not None and not domain.contains(x, tol=1e-12 * (1 + float(np.abs(x).max()))):
        raise UsageError(f"point {x} lies outside the attached domain")
    v = float(oracle.value(x))
    if not math.isfinite(v) and np.all(np.isfinite(x)):
        raise OracleFaultError(f"oracle {oracle.label!r} returned {v}", x=x)
    return v


@dataclass
class GradientCheckReport:
    label: str
    n_points: int
    h: float
    tol_rel: float
    max_rel_error: float
    worst_point: Optional[Point]
    passed: bool


def check_gradient(
    oracle: FunctionalOracle,
    points,
    h: float = 1e-6,
    tol_rel: float = 1e-5,
) -> GradientCheckReport:
    """Compare the analytic gradient against central differences.

    The step for coordinate i is ``h * (1 + |x_i|)`` (two-sided), and the
    per-point relative error is ``max_i |g_i - fd_i| / (1 + max_i |g_i|)``.
    """
    if oracle.gradient is None:
        raise CapabilityError(f"oracle {oracle.label!r} has no gradient to check")
    if h <= 0:
        raise UsageError("finite-difference step must be positive")
    max_err = 0.0
    worst = None
    pts = [as_point(p, oracle.dim) for p in np.atleast_2d(np.asarray(points, float))]
    for x in pts:
        g = oracle.grad(x)
        fd = np.empty_like(g)
        for i in range(oracle.dim):
            step = h * (1.0 + abs(x[i]))
            xp = x.copy()
            xm = x.copy()
            xp[i] += step
            xm[i] -= step
            fd[i] = (oracle.value(xp) - oracle.value(xm)) / (2.0 * step)
        err = float(np.max(np.abs(g - fd))) / (1.0 + float(np.max(np.abs(g))))
        if err > max_err:
            max_err = err
            worst = x
    return GradientCheckReport(
        label=oracle.label,
        n_points=len(pts),
        h=h,
        tol_rel=tol_rel,
        max_rel_error=max_err,
        worst_point=worst,
        passed=max_err <= tol_rel,
    )


def probe_coercivity(
    oracle: FunctionalOracle,
    domain: DomainSpec | None = None,
    radii=(1e2, 1e3, 1e4),
    n_directions: int = 8,
    seed: int = 0,
) -> bool:
    """Probe-level coercivity check: values must increase along the radius
    schedule in every sampled admissible direction.  A passing probe is
    evidence, not a proof.
    """
    dim = oracle.dim
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_directions, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    checked = 0
    for u in dirs:
        pts = [np.asarray(r * u) for r in radii]
        if domain is not None:
            pts = [domain.project(p) for p in pts]
            norms = [np.linalg.norm(p) for p in pts]
            # projection can collapse the ray onto a face; skip degenerate rays
            if norms[-1] < 0.5 * radii[-1] * 1e-3 or len(set(np.round(norms, 6))) < len(radii):
                continue
        vals = [oracle.value(p) for p in pts]
        checked += 1
        if not all(b > a for a, b in zip(vals, vals[1:])):
            return False
    return checked > 0


# ---------------------------------------------------------------------------
# builtin library
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BuiltinPair:
    """A named (Phi, Psi) benchmark pair with its natural domain."""

    name: str
    phi: FunctionalOracle
    psi: FunctionalOracle
    domain: DomainSpec
    description: str = ""


@dataclass(frozen=True, eq=False)
class BuiltinPotential:
    """A named potential P (with gradient A = P') for the fixed-point pipeline."""

    name: str
    potential: FunctionalOracle
    description: str = ""


def _scalar(fn):
    return lambda x: float(fn(float(x[0])))


def _scalar_grad(fn):
    return lambda x: np.array([fn(float(x[0]))])


def _osc_value(x):
    return float(kernels.osc_value_batch(np.atleast_1d(np.asarray(x, float)))[0])


def _norm_sq_pair(dim: int) -> FunctionalOracle:
    return FunctionalOracle(
        dim=dim,
        value=lambda x: float(x @ x),
        gradient=lambda x: 2.0 * x,
        convex=True,
        coercive=True,
        differentiable=True,
        label="norm_sq",
        batch_value=lambda X: np.einsum("ij,ij->i", X, X),
    )


def norm_squared(dim: int) -> FunctionalOracle:
    """The functional x -> ||x||^2 (the Hilbert-reduction Psi)."""
    return _norm_sq_pair(dim)


def _make_linear_pair() -> BuiltinPair:
    phi = FunctionalOracle(
        dim=1,
        value=_scalar(lambda t: -2.0 * t),
        gradient=lambda x: np.array([-2.0]),
        convex=True,
        differentiable=True,
        label="LINEAR.phi",
        batch_value=lambda X: -2.0 * X[:, 0],
    )
    psi = FunctionalOracle(
        dim=1,
        value=_scalar(lambda t: t),
        gradient=lambda x: np.array([1.0]),
        convex=True,
        coercive=True,  # on the attached halfspace [0, inf)
        differentiable=True,
        label="LINEAR.psi",
        batch_value=lambda X: X[:, 0].copy(),
    )
    dom = DomainSpec.halfspace_product([0.0], [np.inf])
    return BuiltinPair(
        "LINEAR", phi, psi, dom,
        "Phi=-2x, Psi=x on [0,inf); threshold lambda*=2 in closed form",
    )


def _make_quad_pair() -> BuiltinPair:
    phi = FunctionalOracle(
        dim=1,
        value=_scalar(lambda t: -t),
        gradient=lambda x: np.array([-1.0]),
        convex=True,
        differentiable=True,
        label="QUAD.phi",
        batch_value=lambda X: -X[:, 0],
    )
    psi = _norm_sq_pair(1)
    return BuiltinPair(
        "QUAD", phi, psi, DomainSpec.all_space(1),
        "Phi=-x, Psi=x^2 on R; ratio curve 1/(2 sqrt(rho)) in closed form",
    )


def _make_osc_pair() -> BuiltinPair:
    phi = FunctionalOracle(
        dim=1,
        value=_osc_value,
        gradient=lambda x: np.array(
            [float(kernels.osc_grad_batch(np.asarray(x, float))[0])]
        ),
        differentiable=True,
        label="OSC.phi",
        batch_value=lambda X: kernels.osc_value_batch(np.ascontiguousarray(X[:, 0])),
    )
    psi = _norm_sq_pair(1)
    return BuiltinPair(
        "OSC", phi, psi, DomainSpec.all_space(1),
        "Phi=-x^2(2+sin(1/x)) (0 at 0), Psi=x^2; oscillating-well multiplicity witness",
    )


def _make_const_pair(c: float = 1.0) -> BuiltinPair:
    phi = FunctionalOracle(
        dim=1,
        value=lambda x: c,
        gradient=lambda x: np.zeros(1),
        convex=True,
        differentiable=True,
        label="CONST.phi",
        batch_value=lambda X: np.full(X.shape[0], c),
    )
    psi = _norm_sq_pair(1)
    return BuiltinPair(
        "CONST", phi, psi, DomainSpec.all_space(1),
        f"Phi constant {c}, Psi=x^2; degenerate ratios (phi(rho)=0)",
    )


def _make_escape_pair() -> BuiltinPair:
    phi = FunctionalOracle(
        dim=1,
        value=_scalar(lambda t: -t * t + t),
        gradient=lambda x: np.array([-2.0 * x[0] + 1.0]),
        differentiable=True,
        label="ESCAPE.phi",
        batch_value=lambda X: -X[:, 0] ** 2 + X[:, 0],
    )
    psi = _norm_sq_pair(1)
    return BuiltinPair(
        "ESCAPE", phi, psi, DomainSpec.all_space(1),
        "Phi=-x^2+x, Psi=x^2; Phi+lambda*Psi unbounded below for lambda<1 "
        "(escaping-sequence witness, violates the standing assumptions there)",
    )


def make_scaled_norm_potential(k: float, dim: int = 1) -> BuiltinPotential:
    pot = FunctionalOracle(
        dim=dim,
        value=lambda x: k * float(x @ x),
        gradient=lambda x: 2.0 * k * x,
        convex=k >= 0,
        differentiable=True,
        label=f"P_k[{k:g}]",
        batch_value=lambda X: k * np.einsum("ij,ij->i", X, X),
    )
    return BuiltinPotential(
        f"P_k[{k:g}]", pot, f"P(x)={k:g}||x||^2; operator A(x)={2*k:g}x"
    )


def _make_posc_potential() -> BuiltinPotential:
    pot = FunctionalOracle(
        dim=1,
        value=lambda x: float(kernels.posc_value_batch(np.asarray(x, float))[0]),
        gradient=lambda x: np.array(
            [float(kernels.posc_grad_batch(np.asarray(x, float))[0])]
        ),
        differentiable=True,
        label="P_osc",
        batch_value=lambda X: kernels.posc_value_batch(np.ascontiguousarray(X[:, 0])),
    )
    return BuiltinPotential(
        "P_osc", pot,
        "P(x)=x^2/2 + 0.3 x^2 sin(log(1+x^2)); growth ratio oscillates across 1/2, "
        "so the fixed-point set of A=P' is unbounded",
    )


def _make_zero_potential(dim: int = 1) -> BuiltinPotential:
    pot = FunctionalOracle(
        dim=dim,
        value=lambda x: 0.0,
        gradient=lambda x: np.zeros(dim),
        convex=True,
        differentiable=True,
        label="P_zero",
        batch_value=lambda X: np.zeros(X.shape[0]),
    )
    return BuiltinPotential("P_zero", pot, "P identically 0; A=0, unique fixed point 0")


_PAIR_FACTORIES = {
    "LINEAR": _make_linear_pair,
    "QUAD": _make_quad_pair,
    "OSC": _make_osc_pair,
    "CONST": _make_const_pair,
    "ESCAPE": _make_escape_pair,
}

_POTENTIAL_FACTORIES = {
    "P_OSC": _make_posc_potential,
    "P_ZERO": _make_zero_potential,
}


def builtin_pair(name: str) -> BuiltinPair:
    key = name.upper()
    if key not in _PAIR_FACTORIES:
        raise UsageError(
            f"unknown builtin pair {name!r}; available: {sorted(_PAIR_FACTORIES)}"
        )
    return _PAIR_FACTORIES[key]()


def builtin_potential(name: str, k: float = 0.25, dim: int = 1) -> BuiltinPotential:
    key = name.upper()
    if key == "P_K":
        return make_scaled_norm_potential(k, dim)
    if key not in _POTENTIAL_FACTORIES:
        raise UsageError(
            f"unknown builtin potential {name!r}; available: "
            f"{sorted(_POTENTIAL_FACTORIES) + ['P_K']}"
        )
    return _POTENTIAL_FACTORIES[key]()


def builtin_library():
    """All named builtins: pairs, potentials, and the random-pair generator."""
    pairs = [f() for f in _PAIR_FACTORIES.values()]
    potentials = [make_scaled_norm_potential(0.25), make_scaled_norm_potential(0.5)]
    potentials += [f() for f in _POTENTIAL_FACTORIES.values()]
    return pairs, potentials


def builtin_descriptions() -> list[str]:
    lines = [
        "LINEAR: Phi=-2x, Psi=x on [0,inf); lambda*=2 (closed form)",
        "QUAD: Phi=-x, Psi=x^2; phi(rho)=1/(2*sqrt(rho)) (closed form)",
        "OSC: Phi=-x^2(2+sin(1/x)), Psi=x^2; converging-minima witness",
        "CONST: Phi constant, Psi=x^2; phi(rho)=0 (closed form)",
        "ESCAPE: Phi=-x^2+x, Psi=x^2; escaping-sequence witness",
        "P_k: P=k||x||^2 potential (parameter k; k=0.5 is the identity operator)",
        "P_osc: growth ratio oscillates across 1/2; unbounded fixed-point witness",
        "P_zero: P=0; A=0",
        "random_quad: seeded random convex quadratic pair (dim, seed)",
    ]
    return lines


@dataclass(frozen=True, eq=False)
class QuadraticPairMeta:
    """Closed-form data of a random convex quadratic pair (for oracles in tests)."""

    A: np.ndarray
    b: np.ndarray
    c: float
    B: np.ndarray
    d: np.ndarray
    e: float
    psi_min_point: np.ndarray
    psi_min_value: float


def _quadratic_oracle(A, b, c, label, convex, coercive) -> FunctionalOracle:
    A = np.ascontiguousarray(A, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    c = float(c)
    return FunctionalOracle(
        dim=b.shape[0],
        value=lambda x: kernels.quad_value(A, b, c, np.ascontiguousarray(x)),
        gradient=lambda x: kernels.quad_grad(A, b, c, np.ascontiguousarray(x)),
        convex=convex,
        coercive=coercive,
        differentiable=True,
        label=label,
        batch_value=lambda X: kernels.quad_value_batch(
            A, b, c, np.ascontiguousarray(X)
        ),
    )


def random_convex_quadratic_pair(dim: int, seed: int):
    """Seeded random convex pair: Phi PSD quadratic, Psi PD quadratic.

    Two processes with the same (dim, seed) construct bitwise-identical
    coefficient matrices.  Returns (pair, meta) where meta carries the
    coefficients for independent closed-form checks.
    """
    if dim < 1:
        raise UsageError("dim must be >= 1")
    rng = np.random.default_rng(seed)

    def rand_spd(eig_lo, eig_hi):
        Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        eigs = rng.uniform(eig_lo, eig_hi, size=dim)
        return (Q * eigs) @ Q.T

    A = rand_spd(0.1, 3.0)
    b = rng.standard_normal(dim)
    c = float(rng.uniform(-1.0, 1.0))
    B = rand_spd(0.5, 3.0)
    d = rng.standard_normal(dim)
    e = float(rng.uniform(-1.0, 1.0))
    phi = _quadratic_oracle(A, b, c, f"randquad[{dim},{seed}].phi", True, False)
    psi = _quadratic_oracle(B, d, e, f"randquad[{dim},{seed}].psi", True, True)
    x_min = np.linalg.solve(B, -d)
    psi_min = 0.5 * float(x_min @ (B @ x_min)) + float(d @ x_min) + e
    meta = QuadraticPairMeta(A, b, c, B, d, e, x_min, psi_min)
    pair = BuiltinPair(
        f"random_quad[{dim},{seed}]", phi, psi, DomainSpec.all_space(dim),
        "seeded random convex quadratic pair",
    )
    return pair, meta
