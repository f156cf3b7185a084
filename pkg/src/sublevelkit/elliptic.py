"""1D finite-difference semilinear elliptic problem on (0,1).

Discretizes, on a uniform interior grid with homogeneous Dirichlet data,

    -u'' = a|u|^{s-1}u + alpha(x) + lam*(b|u|^{q-1}u - c*f(u) + beta(x)),
    f(xi) = max(xi,0)^p,

as the critical-point equation of Psi_h + lam*Phi_h, where

    Psi_h(u) = energy(u)/2 - a/(s+1) * int |u|^{s+1} - int alpha*u,
    Phi_h(u) = c/(p+1) * int max(u,0)^{p+1} - b/(q+1) * int |u|^{q+1}
               - int beta*u,

with trapezoid quadrature and the forward-difference Dirichlet energy.  On
this uniform grid the discrete weak form is exactly the scaled strong form:
grad(Psi_h + lam*Phi_h)(u) == h * residual(u), which is the module's core
self-check.  Psi_h is coercive (the |u|^{s+1} term is subquadratic for
s < 1), so the generic threshold machinery applies: critical points of
Phi_h + mu*Psi_h exist for mu above the sweep minimum mu*, and lam* = 1/mu*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg import solve_banded

from . import kernels
from .engine import DEFAULT_CONFIG, MultiStartConfig
from .errors import NumericalError, UsageError
from .functionals import DomainSpec, FunctionalOracle
from .sublevel import SublevelProblem
from .thresholds import GridSpec, lambda_star, sweep

SourceTerm = Union[float, Callable[[np.ndarray], np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class EllipticConfig:
    """Coefficients and grid of the discretized problem.

    Requires b, c > 0, 0 < s < 1, 1 < q < p, N >= 16.  alpha_fn/beta_fn may
    be constants, callables of x, or explicit interior-node sample arrays.
    """

    N: int
    a: float = 0.0
    b: float = 1.0
    c: float = 1.0
    s: float = 0.5
    q: float = 2.0
    p: float = 3.0
    alpha_fn: SourceTerm = 1.0
    beta_fn: SourceTerm = 1.0

    def __post_init__(self):
        if self.N < 16:
            raise UsageError("need N >= 16 interior grid points")
        if not (self.b > 0 and self.c > 0):
            raise UsageError("coefficients require b > 0 and c > 0")
        if not (0.0 < self.s < 1.0):
            raise UsageError("exponent s must lie in (0, 1)")
        if not (1.0 < self.q < self.p):
            raise UsageError("exponents must satisfy 1 < q < p")

    @property
    def h(self) -> float:
        return 1.0 / (self.N + 1)

    @property
    def x_nodes(self) -> np.ndarray:
        return np.linspace(self.h, 1.0 - self.h, self.N)

    def _samples(self, term: SourceTerm) -> np.ndarray:
        if callable(term):
            out = np.asarray(term(self.x_nodes), dtype=float)
        elif np.ndim(term) == 0:
            out = np.full(self.N, float(term))
        else:
            out = np.asarray(term, dtype=float)
        if out.shape != (self.N,):
            raise UsageError(f"source term samples must have shape ({self.N},)")
        return np.ascontiguousarray(out)

    @property
    def alpha_samples(self) -> np.ndarray:
        return self._samples(self.alpha_fn)

    @property
    def beta_samples(self) -> np.ndarray:
        return self._samples(self.beta_fn)


@dataclass
class GridFunction:
    """Interior nodal values; boundary values are implicitly zero."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(np.asarray(self.values, dtype=float))

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def dirichlet_energy(u: np.ndarray, h: float) -> float:
    """sum over intervals of h * ((u_{i+1}-u_i)/h)^2, zero boundary."""
    d = np.diff(np.asarray(u, dtype=float), prepend=0.0, append=0.0)
    return float(d @ d) / h


def assemble(config: EllipticConfig):
    """Build the (Phi_h, Psi_h) oracle pair over R^N.

    Psi_h is flagged coercive; it is convex exactly when a <= 0 (the
    subquadratic term enters with a negative sign).  Phi_h is nonconvex for
    b > 0.
    """
    h = config.h
    a, s = config.a, config.s
    b, c, q, p = config.b, config.c, config.q, config.p
    al = config.alpha_samples
    be = config.beta_samples

    def cast(u):
        return np.ascontiguousarray(u, dtype=float)

    psi = FunctionalOracle(
        dim=config.N,
        value=lambda u: float(kernels.ell_psi_value(cast(u), h, a, s, al)),
        gradient=lambda u: np.asarray(kernels.ell_psi_grad(cast(u), h, a, s, al)),
        convex=a <= 0.0,
        coercive=True,
        differentiable=True,
        label=f"elliptic_psi[N={config.N}]",
    )
    phi = FunctionalOracle(
        dim=config.N,
        value=lambda u: float(kernels.ell_phi_value(cast(u), h, b, c, q, p, be)),
        gradient=lambda u: np.asarray(kernels.ell_phi_grad(cast(u), h, b, c, q, p, be)),
        convex=False,
        coercive=False,
        differentiable=True,
        label=f"elliptic_phi[N={config.N}]",
    )
    return phi, psi


def pde_residual(config: EllipticConfig, u: np.ndarray, lam: float) -> np.ndarray:
    """Strong-form residual of the discrete problem at u."""
    return np.asarray(kernels.ell_residual(
        np.ascontiguousarray(u, dtype=float), config.h, config.a, config.s,
        config.alpha_samples, lam, config.b, config.c, config.q, config.p,
        config.beta_samples,
    ))


def gradient_residual_gap(config: EllipticConfig, u: np.ndarray,
                          lam: float) -> float:
    """max-norm gap between grad(Psi_h + lam*Phi_h)(u) and h * residual(u);
    exactly zero up to roundoff on the uniform grid."""
    phi, psi = assemble(config)
    g = psi.grad(u) + lam * phi.grad(u)
    return float(np.max(np.abs(g - config.h * pde_residual(config, u, lam))))


@dataclass
class EllipticThreshold:
    lambda_star: float  # 1/mu_star, or +inf when mu_star underflows
    mu_star: float
    rho_at_min: float
    curve: object
    all_lambda_admissible: bool

    def to_dict(self):
        return {
            "lambda_star": (float(self.lambda_star)
                            if math.isfinite(self.lambda_star) else "inf"),
            "mu_star": float(self.mu_star),
            "rho_at_min": float(self.rho_at_min),
            "all_lambda_admissible": bool(self.all_lambda_admissible),
            "curve": self.curve.to_dict(),
        }


def default_rho_grid() -> GridSpec:
    # Levels far above the energy scale let the |u|^{q+1} term concentrate
    # on single nodes, where phi(rho) scales like h^{5/2}*sqrt(rho) and the
    # threshold stops being mesh-stable; the default grid ends before that.
    return GridSpec("geometric_up", rho0=0.125, count=8)


# Sweeps in R^N are the heaviest pipeline; 16 starts per inner problem is
# plenty once the segment-scan candidates anchor the ratio infima.
SWEEP_CONFIG = MultiStartConfig(n_starts=16)


def threshold_lambda_star(config: EllipticConfig,
                          rho_grid: Optional[GridSpec] = None,
                          cfg: MultiStartConfig = SWEEP_CONFIG) -> EllipticThreshold:
    """Estimate lam* = 1/mu* where mu* is the sweep minimum of phi(rho) for
    the pair (Phi_h, Psi_h).  A vanishing mu* (within the tiny floor) is
    reported as all lam > 0 admissible."""
    phi, psi = assemble(config)
    grid = rho_grid or default_rho_grid()
    curve = sweep(phi, psi, DomainSpec.all_space(config.N), grid, cfg)
    mu = lambda_star(curve).value
    tiny = 1e-12
    if mu <= tiny:
        return EllipticThreshold(math.inf, max(mu, 0.0), _rho_at_min(curve),
                                 curve, True)
    return EllipticThreshold(1.0 / mu, mu, _rho_at_min(curve), curve, False)


def _rho_at_min(curve) -> float:
    vals = np.where(curve.valid_mask(), curve.phi_values, np.inf)
    return float(curve.rho_grid[int(np.argmin(vals))])


def _newton_jacobian_bands(config: EllipticConfig, u: np.ndarray,
                           lam: float) -> np.ndarray:
    """(1,1)-banded Jacobian of the residual map.

    The |u|^{s-1} factor is singular at u = 0; it is clamped in the Jacobian
    only (the residual itself is exact), which merely slows Newton near
    hyperplanes u_i = 0.
    """
    h = config.h
    n = config.N
    au = np.abs(u)
    diag = np.full(n, 2.0 / h**2)
    if config.a != 0.0:
        safe = np.maximum(au, 1e-9)
        diag -= config.a * config.s * safe ** (config.s - 1.0)
    diag -= lam * config.b * config.q * au ** (config.q - 1.0)
    diag += lam * config.c * config.p * np.maximum(u, 0.0) ** (config.p - 1.0)
    bands = np.zeros((3, n))
    bands[0, 1:] = -1.0 / h**2
    bands[1, :] = diag
    bands[2, :-1] = -1.0 / h**2
    return bands


def newton_polish(config: EllipticConfig, u0: np.ndarray, lam: float,
                  tol: float = 1e-10, max_iter: int = 60) -> np.ndarray:
    """Damped Newton on the residual map from a near-critical point."""
    u = np.asarray(u0, dtype=float).copy()
    r = pde_residual(config, u, lam)
    best_u, best_n = u.copy(), float(np.max(np.abs(r)))
    for _ in range(max_iter):
        if best_n <= tol:
            break
        bands = _newton_jacobian_bands(config, u, lam)
        try:
            step = solve_banded((1, 1), bands, -r)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        improved = False
        for _ in range(30):
            cand = u + t * step
            rc = pde_residual(config, cand, lam)
            nc = float(np.max(np.abs(rc)))
            if nc < best_n:
                u, r = cand, rc
                best_u, best_n = u.copy(), nc
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    return best_u


@dataclass
class EllipticSolution:
    u: GridFunction
    lam: float
    mu: float
    rho_used: float
    residual_inf: float
    energy: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "lambda": float(self.lam),
            "mu": float(self.mu),
            "rho_used": float(self.rho_used),
            "residual_inf": float(self.residual_inf),
            "energy": float(self.energy),
            "u": [float(v) for v in self.u.values],
            "diagnostics": {k: (float(v) if isinstance(v, (int, float)) else v)
                            for k, v in self.diagnostics.items()},
        }


def solve(config: EllipticConfig, lam: float,
          threshold: Optional[EllipticThreshold] = None,
          rho_grid: Optional[GridSpec] = None,
          cfg: MultiStartConfig = DEFAULT_CONFIG,
          tol_pde: float = 1e-10) -> EllipticSolution:
    """Weak solution for the given lam: a critical point of Psi_h + lam*Phi_h.

    Scaling identity: u is critical for Psi_h + lam*Phi_h iff critical for
    Phi_h + mu*Psi_h with mu = 1/lam, so the restricted-minimizer machinery
    runs on the latter at the sweep-minimizing level rho, then hands over to
    Newton on the strong-form residual.
    """
    if lam <= 0:
        raise UsageError("lam must be positive")
    if threshold is None:
        threshold = threshold_lambda_star(config, rho_grid, cfg)
    if math.isfinite(threshold.lambda_star) and lam >= threshold.lambda_star:
        import warnings

        warnings.warn(
            f"lam={lam} is not below the threshold estimate "
            f"{threshold.lambda_star}; attempting the solve anyway",
            stacklevel=2,
        )
    mu = 1.0 / lam
    phi, psi = assemble(config)
    rho = threshold.rho_at_min
    prob = SublevelProblem(phi, psi, rho, DomainSpec.all_space(config.N), cfg)
    mres = prob.minimize_composite(mu)
    u = newton_polish(config, mres.x, lam, tol=tol_pde)
    res_inf = float(np.max(np.abs(pde_residual(config, u, lam))))
    energy = psi.value(u) + lam * phi.value(u)
    sol = EllipticSolution(
        u=GridFunction(u), lam=lam, mu=mu, rho_used=rho,
        residual_inf=res_inf, energy=energy,
        diagnostics={
            "composite_value_at_mu": mres.value,
            "starts_used": mres.starts_used,
        },
    )
    if res_inf > tol_pde:
        raise NumericalError(
            f"PDE residual {res_inf} above tolerance {tol_pde}",
            best_candidate=sol,
        )
    return sol


@dataclass
class UnboundedProbeReport:
    direction_norm: float
    t_values: np.ndarray
    below_values: np.ndarray  # composite along -t|d|
    above_values: np.ndarray  # composite along +t|d|
    below_passed: bool  # decreasing and below -1e6
    above_passed: bool  # increasing and above +1e6

    def to_dict(self):
        return {
            "direction_norm": float(self.direction_norm),
            "t_values": [float(t) for t in self.t_values],
            "below_values": [float(v) for v in self.below_values],
            "above_values": [float(v) for v in self.above_values],
            "below_passed": bool(self.below_passed),
            "above_passed": bool(self.above_passed),
        }


def unbounded_below_probe(config: EllipticConfig, lam: float,
                          direction: GridFunction,
                          cap: float = 1e6) -> UnboundedProbeReport:
    """Probe Phi_h + lam*Psi_h along the rays t*(-|d|) and t*(+|d|).

    Negative ray: the positive-part term vanishes and -b/(q+1) int|u|^{q+1}
    with q+1 > 2 dominates the quadratic energy, so values must fall below
    -cap.  Positive ray: the c-term with p+1 > 2 dominates upward.  A b = 0
    configuration legitimately fails the negative ray (mechanism absent);
    the report states what happened either way.
    """
    d = np.abs(np.asarray(direction.values, dtype=float))
    if not np.any(d > 0):
        raise UsageError("probe direction must be nonzero")
    phi, psi = assemble(config)

    def composite(u):
        return phi.value(u) + lam * psi.value(u)

    ts = 2.0 ** np.arange(0, 21)  # 1 .. ~1e6
    below = np.array([composite(-t * d) for t in ts])
    above = np.array([composite(+t * d) for t in ts])
    below_ok = bool(np.all(np.diff(below[-4:]) < 0) and below[-1] < -cap)
    above_ok = bool(np.all(np.diff(above[-4:]) > 0) and above[-1] > cap)
    return UnboundedProbeReport(
        direction_norm=float(np.linalg.norm(d)),
        t_values=ts, below_values=below, above_values=above,
        below_passed=below_ok, above_passed=above_ok,
    )


def hat_direction(config: EllipticConfig) -> GridFunction:
    """Piecewise-linear hat centered on the grid, a convenient probe ray."""
    x = config.x_nodes
    return GridFunction(1.0 - np.abs(2.0 * x - 1.0))
