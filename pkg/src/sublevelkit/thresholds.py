"""Ratio-curve sweeps and the thresholds lambda*, gamma, delta.

lambda* is the infimum of phi(rho) over all admissible rho; gamma and delta
are the liminf of phi(rho) as rho -> +inf and as rho -> (inf Psi)+.  On a
finite grid these are probed, never certified: every reported number carries
an estimate-direction flag (the grid minimum is an UPPER bound of an
infimum), and values beyond the cap are reported as +inf.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import engine
from .engine import DEFAULT_CONFIG, MultiStartConfig
from .errors import PreconditionError, SublevelKitError, UsageError
from .functionals import DomainSpec, FunctionalOracle
from .sublevel import SublevelProblem

INFINITY_CAP = 1e12


@dataclass(frozen=True)
class GridSpec:
    """Geometric rho schedule.

    ``geometric_up``: rho_k = rho0 * factor^k, k = 0..count-1.
    ``geometric_down_to_infimum``: rho_k = inf_psi + (rho0 - inf_psi) *
    factor^-k, i.e. multiplicative resolution toward the infimum of Psi.
    """

    kind: str
    rho0: float = 1.0
    count: int = 13
    factor: float = 2.0

    def __post_init__(self):
        if self.kind not in ("geometric_up", "geometric_down_to_infimum"):
            raise UsageError(f"unknown grid kind {self.kind!r}")
        if self.count < 1 or self.factor <= 1.0:
            raise UsageError("grid needs count >= 1 and factor > 1")

    def levels(self, psi_inf: float = 0.0) -> np.ndarray:
        k = np.arange(self.count, dtype=float)
        if self.kind == "geometric_up":
            return self.rho0 * self.factor**k
        return psi_inf + (self.rho0 - psi_inf) * self.factor**-k


@dataclass
class Estimate:
    """A threshold value with its direction flag.

    direction ``upper`` means the true quantity is <= value (grid minimum of
    an infimum); ``probe`` marks liminf probes that cannot bound either way.
    """

    value: float
    direction: str
    note: str = ""

    def to_dict(self):
        v = self.value
        return {
            "value": ("inf" if math.isinf(v) else float(v)),
            "direction": self.direction,
            "note": self.note,
        }


@dataclass
class RatioCurve:
    rho_grid: np.ndarray
    phi_values: np.ndarray
    alpha_values: np.ndarray
    grid_kind: str
    psi_inf: float = 0.0
    failures: dict = field(default_factory=dict)  # rho index -> message

    def __post_init__(self):
        d = np.diff(self.rho_grid)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise UsageError("rho grid must be strictly monotone")

    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.phi_values)

    def to_dict(self):
        return {
            "grid_kind": self.grid_kind,
            "psi_inf": float(self.psi_inf),
            "rho_grid": [float(v) for v in self.rho_grid],
            "phi_values": [float(v) if np.isfinite(v) else None for v in self.phi_values],
            "alpha_values": [float(v) if np.isfinite(v) else None for v in self.alpha_values],
            "failures": {str(k): v for k, v in self.failures.items()},
        }


@dataclass
class ThresholdReport:
    lambda_star: Estimate
    gamma: Estimate
    delta: Estimate
    curve_up: Optional[RatioCurve]
    curve_down: Optional[RatioCurve]
    config_digest: str = ""

    def to_dict(self):
        return {
            "lambda_star": self.lambda_star.to_dict(),
            "gamma": self.gamma.to_dict(),
            "delta": self.delta.to_dict(),
            "curve_up": None if self.curve_up is None else self.curve_up.to_dict(),
            "curve_down": None if self.curve_down is None else self.curve_down.to_dict(),
            "config_digest": self.config_digest,
        }


def estimate_psi_inf(psi: FunctionalOracle, domain: DomainSpec,
                     cfg: MultiStartConfig = DEFAULT_CONFIG):
    """Unconstrained multi-start estimate of (inf Psi, argmin)."""
    fg = engine.fuse(psi.value, psi.grad)
    res = engine.expanding_box_search(
        fg, domain, cfg, batch_f=psi.batch_value and psi.values
    )
    return res.value, res.x


def sweep(
    phi: FunctionalOracle,
    psi: FunctionalOracle,
    domain: Optional[DomainSpec],
    grid: GridSpec,
    cfg: MultiStartConfig = DEFAULT_CONFIG,
) -> RatioCurve:
    """Evaluate phi(rho) and alpha(rho) on the grid.

    Individual level failures are recorded as gaps (NaN), not raised; a
    sweep with no valid level at all raises.
    """
    if not psi.coercive:
        raise UsageError("sweep requires a coercive psi")
    domain = domain if domain is not None else DomainSpec.all_space(phi.dim)
    psi_inf, psi_arg = estimate_psi_inf(psi, domain, cfg)
    rhos = grid.levels(psi_inf)
    phis = np.full(len(rhos), np.nan)
    alphas = np.full(len(rhos), np.nan)
    failures = {}

    def one(args):
        i, rho = args
        try:
            prob = SublevelProblem(phi, psi, rho, domain, cfg,
                                   psi_inf=(psi_inf, psi_arg))
            return i, prob.phi_of_rho(), prob.alpha(), None
        except SublevelKitError as exc:
            return i, np.nan, np.nan, f"{type(exc).__name__}: {exc}"

    for i, p, a, err in engine.parallel_map(one, list(enumerate(rhos)), cfg):
        phis[i] = p
        alphas[i] = a
        if err is not None:
            failures[i] = err
    curve = RatioCurve(rho_grid=rhos, phi_values=phis, alpha_values=alphas,
                       grid_kind=grid.kind, psi_inf=psi_inf, failures=failures)
    if not curve.valid_mask().any():
        raise SublevelKitError(f"sweep failed at every level: {failures}")
    return curve


def lambda_star(curve: RatioCurve) -> Estimate:
    """Grid minimum of phi(rho): an UPPER estimate of the true infimum."""
    mask = curve.valid_mask()
    if not mask.any():
        raise UsageError("lambda_star needs a curve with at least one value")
    return Estimate(
        value=float(np.min(curve.phi_values[mask])),
        direction="upper",
        note="grid minimum; the infimum over all rho can only be lower",
    )


def _tail_running_min(values: np.ndarray, tail_mask: np.ndarray) -> float:
    vals = values[tail_mask]
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return math.nan
    return float(np.min(vals))


def gamma_estimate(curve: RatioCurve) -> Estimate:
    """Probe of liminf phi(rho) as rho -> +inf: running minimum over the
    largest-rho half of an upward grid."""
    if curve.grid_kind != "geometric_up":
        raise PreconditionError("gamma_estimate needs a geometric_up curve")
    n = len(curve.rho_grid)
    if n < 8:
        raise PreconditionError("gamma_estimate needs >= 8 grid points")
    tail = np.arange(n) >= n // 2
    v = _tail_running_min(curve.phi_values, tail)
    if v > INFINITY_CAP:
        return Estimate(math.inf, "probe", "tail exceeded the infinity cap")
    return Estimate(v, "probe", "liminf probed on the tail half, not certified")


def delta_estimate(curve: RatioCurve) -> Estimate:
    """Probe of liminf phi(rho) as rho -> (inf Psi)+: running minimum over
    the smallest-rho half of a downward grid."""
    if curve.grid_kind != "geometric_down_to_infimum":
        raise PreconditionError("delta_estimate needs a geometric_down curve")
    n = len(curve.rho_grid)
    order = np.argsort(curve.rho_grid)
    head = np.zeros(n, dtype=bool)
    head[order[: n // 2]] = True
    v = _tail_running_min(curve.phi_values, head)
    if v > INFINITY_CAP:
        return Estimate(math.inf, "probe", "head exceeded the infinity cap")
    return Estimate(v, "probe", "liminf probed on the small-rho half, not certified")


def estimate_thresholds(
    phi: FunctionalOracle,
    psi: FunctionalOracle,
    domain: Optional[DomainSpec] = None,
    up_grid: Optional[GridSpec] = None,
    down_grid: Optional[GridSpec] = None,
    cfg: MultiStartConfig = DEFAULT_CONFIG,
    config_digest: str = "",
) -> ThresholdReport:
    """Run both sweeps and assemble the full report.

    lambda* is taken over the union of both grids (it is an infimum over all
    rho, so more levels can only tighten the upper estimate).
    """
    up_grid = up_grid or GridSpec("geometric_up")
    down_grid = down_grid or GridSpec("geometric_down_to_infimum")
    cu = sweep(phi, psi, domain, up_grid, cfg)
    cd = sweep(phi, psi, domain, down_grid, cfg)
    ls_candidates = [lambda_star(c) for c in (cu, cd) if c.valid_mask().any()]
    ls = min(ls_candidates, key=lambda e: e.value)
    return ThresholdReport(
        lambda_star=ls,
        gamma=gamma_estimate(cu),
        delta=delta_estimate(cd),
        curve_up=cu,
        curve_down=cd,
        config_digest=config_digest,
    )


@dataclass
class IdentityReport:
    left: float
    right: float
    gap: float
    tolerance: float
    passed: bool
    r_grid: np.ndarray

    def to_dict(self):
        return {
            "left": float(self.left),
            "right": float(self.right),
            "gap": float(self.gap),
            "tolerance": float(self.tolerance),
            "passed": bool(self.passed),
            "r_grid": [float(r) for r in self.r_grid],
        }


def proof_identity_check(problem: SublevelProblem) -> IdentityReport:
    """Numerical check of the two ways of writing phi(rho):

        inf_x (Phi(x) - alpha)/(rho - Psi(x))
          ==  inf_{r > -alpha} inf_x (Phi(x) + r)/(rho - Psi(x))

    The right side is minimized over a log-spaced r grid approaching -alpha
    from above, warm-starting each inner minimization.  Failures are data
    (the report carries both sides), never an exception.
    """
    a = problem.alpha()
    left = problem.phi_of_rho()
    scale = 1.0 + abs(a)
    r_grid = np.array([-a + scale * 10.0**-j for j in range(0, 13)])
    right = math.inf
    warm = [problem.alpha_result().x]
    for r in r_grid:
        v, x = problem.ratio_min(shift=float(r), extra_starts=warm,
                                 n_starts=max(8, problem.config.n_starts // 2))
        warm = [x]
        right = min(right, v)
    gap = abs(left - right)
    tol = 1e-6 * (1.0 + abs(left))
    return IdentityReport(left=left, right=right, gap=gap, tolerance=tol,
                          passed=gap <= tol, r_grid=r_grid)


@dataclass
class DichotomyReport:
    """Outcome of the convex-pair check around the threshold.

    Above lambda*: a global minimizer must exist (reported with its point).
    Below (when lambda* > 0): no global minimum -- descent escapes to
    arbitrarily large norms with decreasing values.
    """

    lambda_above: float
    mu_below: float
    min_point: np.ndarray
    min_value: float
    min_converged: bool
    escape_reached_radius: bool
    escape_norm: float
    escape_values_decreasing: bool
    escape_rounds: list

    def to_dict(self):
        return {
            "lambda_above": float(self.lambda_above),
            "mu_below": float(self.mu_below),
            "min_point": [float(v) for v in np.atleast_1d(self.min_point)],
            "min_value": float(self.min_value),
            "min_converged": bool(self.min_converged),
            "escape_reached_radius": bool(self.escape_reached_radius),
            "escape_norm": float(self.escape_norm),
            "escape_values_decreasing": bool(self.escape_values_decreasing),
            "escape_rounds": [
                [float(a), float(b), float(c)] for a, b, c in self.escape_rounds
            ],
        }


def convex_dichotomy_check(
    phi: FunctionalOracle,
    psi: FunctionalOracle,
    domain: Optional[DomainSpec],
    curve: RatioCurve,
    mu_below: float,
    lambda_above: float,
    cfg: MultiStartConfig = DEFAULT_CONFIG,
    escape_radius: float = 1e6,
) -> DichotomyReport:
    """For convex (Phi, Psi) with coercive Psi: above the threshold find the
    global minimum of Phi + lambda*Psi, below it probe escape to infinity.

    Near-zero threshold estimates leave the below-side inconclusive; the
    report states what was observed either way.
    """
    if not (phi.convex and psi.convex):
        raise PreconditionError("dichotomy check requires convex flags on both oracles")
    if not psi.coercive:
        raise PreconditionError("dichotomy check requires coercive psi")
    ls = lambda_star(curve).value
    if not (mu_below < ls < lambda_above):
        warnings.warn(
            f"mu_below < lambda_star < lambda_above does not hold "
            f"({mu_below} / {ls} / {lambda_above}); results may be inconclusive",
            stacklevel=2,
        )
    domain = domain if domain is not None else DomainSpec.all_space(phi.dim)

    def fg_at(lam):
        return lambda x: (
            phi.value(x) + lam * psi.value(x),
            phi.grad(x) + lam * psi.grad(x),
        )

    def batch_at(lam):
        if phi.batch_value is None or psi.batch_value is None:
            return None
        return lambda X: phi.values(X) + lam * psi.values(X)

    above = engine.expanding_box_search(
        fg_at(lambda_above), domain, cfg, batch_f=batch_at(lambda_above)
    )
    below = engine.expanding_box_search(
        fg_at(mu_below), domain, cfg, escape_radius=escape_radius,
        batch_f=batch_at(mu_below),
    )
    escape_norm = max((n for _, _, n in below.rounds), default=0.0)
    return DichotomyReport(
        lambda_above=lambda_above,
        mu_below=mu_below,
        min_point=above.x,
        min_value=above.value,
        min_converged=above.converged,
        escape_reached_radius=escape_norm >= escape_radius,
        escape_norm=escape_norm,
        escape_values_decreasing=below.escaped or _decreasing([v for _, v, _ in below.rounds]),
        escape_rounds=below.rounds,
    )


def _decreasing(vals) -> bool:
    return all(b <= a + 1e-12 * (1 + abs(a)) for a, b in zip(vals, vals[1:]))
