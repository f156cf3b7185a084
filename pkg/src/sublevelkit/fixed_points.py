"""Fixed points of potential operators A = P' on R^n.

The reduction: critical points of h(x) = ||x||^2/2 - P(x) are exactly the
fixed points of A, and h = Phi + lambda*Psi for Phi = -P, Psi = ||x||^2 at
the pinned value lambda = 1/2.  The threshold phi(rho) below 1/2 therefore
certifies a fixed point inside the ball of radius sqrt(rho), and a growth
ratio sup_{||x||<=r} P / r^2 oscillating across 1/2 produces fixed points at
arbitrarily large norms, hunted here along annuli between profile peaks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from . import engine
from .engine import DEFAULT_CONFIG, MultiStartConfig, Region
from .errors import NumericalError, PreconditionError, UsageError
from .functionals import DomainSpec, FunctionalOracle, norm_squared
from .records import CriticalPointRecord
from .sublevel import SublevelProblem

TOL_SEP = 1e-6
PROFILE_BAND = 1e-9  # dead band around 1/2 for alternation counting


def _tol_fp(x) -> float:
    return 1e-8 * (1.0 + float(np.linalg.norm(x)))


@dataclass(frozen=True, eq=False)
class PotentialProblem:
    """A potential P with its operator A = P' (gradient required)."""

    potential: FunctionalOracle

    def __post_init__(self):
        if self.potential.gradient is None:
            raise UsageError("potential operators need the gradient A = P'")

    @property
    def dim(self) -> int:
        return self.potential.dim

    def operator(self, x) -> np.ndarray:
        return self.potential.grad(x)

    def residual(self, x) -> np.ndarray:
        """A(x) - x; zero exactly at fixed points."""
        return self.operator(x) - np.asarray(x, dtype=float)

    def h_value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ x) - self.potential.value(x)

    def h_grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x - self.potential.grad(x)

    def negated(self) -> FunctionalOracle:
        P = self.potential
        return FunctionalOracle(
            dim=P.dim,
            value=lambda x: -P.value(x),
            gradient=lambda x: -P.grad(x),
            differentiable=P.differentiable,
            label=f"-({P.label})",
            batch_value=None if P.batch_value is None else (lambda X: -P.values(X)),
        )


def _sublevel_for(problem: PotentialProblem, rho: float,
                  cfg: MultiStartConfig) -> SublevelProblem:
    return SublevelProblem(
        problem.negated(), norm_squared(problem.dim), rho,
        DomainSpec.all_space(problem.dim), cfg,
        psi_inf=(0.0, np.zeros(problem.dim)),
    )


def sup_on_ball(problem: PotentialProblem, rho: float,
                cfg: MultiStartConfig = DEFAULT_CONFIG,
                warm_starts=()):
    """sup of P over the closed ball ||x||^2 <= rho, with the argmax.

    Multi-start maximization (64 starts by default) plus explicit boundary
    sampling: the supremum frequently sits on the sphere.
    """
    P = problem.potential
    dim = problem.dim
    r = float(np.sqrt(rho))
    psi = norm_squared(dim)
    region = Region(
        domain=DomainSpec.all_space(dim), psi=psi, rho=rho,
        witness=np.zeros(dim), box_lo=np.full(dim, -r), box_hi=np.full(dim, r),
        tol_boundary=0.0,
    )
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0x5B,)))
    n_boundary = max(8, cfg.n_starts // 4)
    dirs = rng.standard_normal((n_boundary, dim))
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)
    extras = [r * u for u in dirs]
    extras.extend(np.asarray(w, float) for w in warm_starts)

    def fg(x):
        return -P.value(x), -P.grad(x)

    batch = None if P.batch_value is None else (lambda X: -P.values(X))
    res = engine.minimize_multistart(
        fg, region, cfg.with_starts(max(cfg.n_starts, 64)),
        extra_starts=extras, batch_f=batch,
    )
    return -res.value, res.x


def phi_rho_hilbert(problem: PotentialProblem, rho: float,
                    cfg: MultiStartConfig = DEFAULT_CONFIG) -> float:
    """phi(rho) of the Hilbert reduction:

        inf over ||x||^2 < rho of
            (sup_{||y||^2 <= rho} P(y) - P(x)) / (rho - ||x||^2)

    which is the generic sublevel threshold at Phi = -P, Psi = ||x||^2.
    """
    if rho <= 0:
        raise UsageError("rho must be positive")
    prob = _sublevel_for(problem, rho, cfg.with_starts(max(cfg.n_starts, 64)))
    return prob.phi_of_rho()


def _polish_fixed_point(problem: PotentialProblem, x,
                        r_window: Optional[tuple] = None):
    """Drive the residual A(x) - x to zero from a near-critical point."""
    x = np.asarray(x, dtype=float)
    if problem.dim == 1:
        lo = -np.inf if r_window is None else -r_window[1]
        hi = np.inf if r_window is None else r_window[1]
        root = engine.polish_derivative_root_1d(
            lambda t: problem.h_grad(np.array([t]))[0], x[0],
            lo, hi, span=1e-6,
        )
        if root is not None:
            cand = np.array([root])
            if _in_window(cand, r_window):
                return cand
        return x
    cand = engine.polish_gradient_root(
        problem.h_grad, x,
        accept=lambda p: _in_window(p, r_window),
    )
    return x if cand is None else cand


def _in_window(x, r_window) -> bool:
    if r_window is None:
        return True
    n = float(np.linalg.norm(x))
    return r_window[0] <= n <= r_window[1]


def _record_fp(problem: PotentialProblem, x) -> CriticalPointRecord:
    x = np.asarray(x, dtype=float)
    res = float(np.linalg.norm(problem.residual(x)))
    return CriticalPointRecord(
        x=x, phi_val=-problem.potential.value(x), psi_val=float(x @ x),
        grad_norm=res, kind="fixed_point", lam=0.5,
    )


def fixed_point_in_ball(problem: PotentialProblem, rho: float,
                        cfg: MultiStartConfig = DEFAULT_CONFIG,
                        margin: float = 1e-3) -> CriticalPointRecord:
    """A fixed point of A with norm below sqrt(rho), certified by
    phi(rho) < 1/2 - margin.

    Minimizes h = ||x||^2/2 - P over the open ball, then Newton-polishes the
    residual; raises NumericalError (with the best candidate attached) when
    the residual tolerance cannot be met.
    """
    phi_rho = phi_rho_hilbert(problem, rho, cfg)
    if not phi_rho < 0.5 - margin:
        raise PreconditionError(
            f"phi(rho) = {phi_rho} is not below 1/2 - {margin}; "
            "the ball fixed point is not certified at this rho"
        )
    prob = _sublevel_for(problem, rho, cfg)
    mres = prob.minimize_composite(0.5)
    x = prob._polish_composite(0.5, mres.x)
    x = _polish_fixed_point(problem, x, r_window=(0.0, np.sqrt(rho)))
    rec = _record_fp(problem, x)
    if rec.grad_norm > _tol_fp(x):
        raise NumericalError(
            f"fixed-point residual {rec.grad_norm} above tolerance",
            best_candidate=rec,
        )
    if not float(np.linalg.norm(x)) < np.sqrt(rho):
        raise NumericalError(
            "polished fixed point left the open ball", best_candidate=rec
        )
    return rec


@dataclass
class GrowthProfile:
    """sup_{||x|| <= r} P(x) / r^2 sampled on a radius grid."""

    radii: np.ndarray
    sup_values: np.ndarray
    ratios: np.ndarray
    argmax_points: list
    running_min: np.ndarray
    running_max: np.ndarray
    alternations: int
    alternating: bool  # >= 3 strict crossings of 1/2 within the grid

    def peak_indices(self) -> list:
        """Interior local maxima of the ratio curve."""
        r = self.ratios
        return [
            i for i in range(1, len(r) - 1)
            if r[i] > r[i - 1] and r[i] >= r[i + 1]
        ]

    def to_dict(self):
        return {
            "radii": [float(v) for v in self.radii],
            "sup_values": [float(v) for v in self.sup_values],
            "ratios": [float(v) for v in self.ratios],
            "alternations": int(self.alternations),
            "alternating": bool(self.alternating),
        }


def growth_profile(problem: PotentialProblem, r_grid,
                   cfg: MultiStartConfig = DEFAULT_CONFIG) -> GrowthProfile:
    """Sweep the growth ratio sup P / r^2 over an increasing radius grid and
    count strict alternations across the 1/2 threshold."""
    r_grid = np.asarray(r_grid, dtype=float)
    if len(r_grid) < 16 or not np.all(np.diff(r_grid) > 0):
        raise UsageError("r_grid must be increasing with >= 16 points")
    sups = np.empty(len(r_grid))
    args = []
    warm = []
    sup_run = -np.inf
    x_run = np.zeros(problem.dim)
    for i, r in enumerate(r_grid):
        s, x = sup_on_ball(problem, float(r) ** 2, cfg, warm_starts=warm)
        # the ball supremum is nondecreasing in r; carry the running argmax
        if s >= sup_run:
            sup_run, x_run = s, x
        sups[i] = sup_run
        args.append(x_run)
        warm = [x_run]
    ratios = sups / r_grid**2
    running_min = np.minimum.accumulate(ratios[::-1])[::-1]
    running_max = np.maximum.accumulate(ratios[::-1])[::-1]
    state = 0  # -1 below, +1 above, 0 inside the dead band
    alternations = 0
    for v in ratios:
        s = -1 if v < 0.5 - PROFILE_BAND else (1 if v > 0.5 + PROFILE_BAND else 0)
        if s != 0:
            if state != 0 and s != state:
                alternations += 1
            state = s
    return GrowthProfile(
        radii=r_grid, sup_values=sups, ratios=ratios, argmax_points=args,
        running_min=running_min, running_max=running_max,
        alternations=alternations, alternating=alternations >= 3,
    )


def default_radius_grid(r_min: float = 1.0, r_max: float = 1e4,
                        count: int = 48) -> np.ndarray:
    return np.geomspace(r_min, r_max, count)


@dataclass
class HuntResult:
    records: list  # fixed points with strictly increasing norms
    complete: bool
    alternating: bool
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "records": [r.to_dict() for r in self.records],
            "complete": bool(self.complete),
            "alternating": bool(self.alternating),
            "notes": list(self.notes),
        }


def _minimize_annulus(problem: PotentialProblem, r_lo: float, r_hi: float,
                      cfg: MultiStartConfig, maximize: bool, hint=None):
    """Extremize h over the annulus r_lo <= ||x|| <= r_hi (SLSQP from
    geometric radial starts; deterministic reduction)."""
    dim = problem.dim
    sign = -1.0 if maximize else 1.0

    def fg(x):
        return sign * problem.h_value(x), sign * problem.h_grad(x)

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0xA2,)))
    if dim == 1:
        dirs = [np.ones(1), -np.ones(1)]
    else:
        raw = rng.standard_normal((max(4, cfg.n_starts // 8), dim))
        raw /= np.maximum(np.linalg.norm(raw, axis=1, keepdims=True), 1e-300)
        dirs = list(raw)
    radii = np.geomspace(r_lo * 1.001, r_hi * 0.999, 7)
    starts = [s * u for u in dirs for s in radii]
    if hint is not None and r_lo <= np.linalg.norm(hint) <= r_hi:
        starts.insert(0, np.asarray(hint, float))
    cons = [
        {"type": "ineq", "fun": lambda x: float(x @ x) - r_lo**2,
         "jac": lambda x: 2.0 * x},
        {"type": "ineq", "fun": lambda x: r_hi**2 - float(x @ x),
         "jac": lambda x: -2.0 * x},
    ]
    best = None
    for i, x0 in enumerate(starts):
        try:
            res = optimize.minimize(
                fg, x0, jac=True, method="SLSQP", constraints=cons,
                options={"maxiter": 150, "ftol": 1e-14},
            )
        except (ValueError, FloatingPointError):
            continue
        x = res.x
        n = float(np.linalg.norm(x))
        if not np.all(np.isfinite(x)) or not (r_lo - 1e-9 <= n <= r_hi + 1e-9):
            continue
        v = fg(x)[0]
        if best is None or v < best[1] or (v == best[1] and i < best[2]):
            best = (x, v, i)
    return None if best is None else best[0]


def unbounded_fixed_point_hunt(problem: PotentialProblem, count: int,
                               r_grid=None,
                               cfg: MultiStartConfig = DEFAULT_CONFIG) -> HuntResult:
    """Hunt >= count fixed points with strictly increasing norms
    (consecutive ratio >= 1.2) along annuli bracketing growth-profile peaks.

    Between consecutive peak radii h has a radial minimum in the first
    (geometric) half and a radial maximum in the second; both are polished
    to fixed points via the residual.  Fewer than ``count`` survivors give a
    partial result with diagnostics, never an exception.
    """
    notes = []
    if r_grid is None:
        r_grid = default_radius_grid()
    profile = growth_profile(problem, r_grid, cfg)
    if not profile.alternating:
        notes.append(
            f"growth profile shows {profile.alternations} alternations (< 3); "
            "the unboundedness hypothesis is not exhibited on this grid"
        )
    peaks = [float(profile.radii[i]) for i in profile.peak_indices()]
    peak_hints = {float(profile.radii[i]): profile.argmax_points[i]
                  for i in profile.peak_indices()}
    candidates = []
    if peaks:
        ratio = peaks[-1] / peaks[-2] if len(peaks) >= 2 else 9.0
        spans = list(zip(peaks, peaks[1:] + [peaks[-1] * ratio]))
        for lo, hi in spans:
            mid = float(np.sqrt(lo * hi))
            for a, b, mx in ((lo, mid, False), (mid, hi, True)):
                x = _minimize_annulus(problem, a, b, cfg, maximize=mx,
                                      hint=peak_hints.get(lo))
                if x is None:
                    continue
                x = _polish_fixed_point(problem, x, r_window=(0.8 * a, 1.25 * b))
                candidates.append(x)
    else:
        # degenerate profiles (flat at or below 1/2): probe geometric annuli
        # anyway; for identity-like operators every polish succeeds
        origin = np.zeros(problem.dim)
        if np.linalg.norm(problem.residual(origin)) <= _tol_fp(origin):
            candidates.append(origin)
        for j in range(count + 2):
            lo, hi = float(2.0**j), float(2.0 ** (j + 1))
            x = _minimize_annulus(problem, lo, hi, cfg, maximize=False)
            if x is not None:
                candidates.append(_polish_fixed_point(problem, x,
                                                      r_window=(0.5 * lo, 2 * hi)))

    accepted = []
    for x in candidates:
        res = float(np.linalg.norm(problem.residual(x)))
        if res <= _tol_fp(x):
            accepted.append(x)
        else:
            notes.append(
                f"candidate at norm {np.linalg.norm(x):.6g} rejected "
                f"(residual {res:.3g})"
            )
    accepted.sort(key=lambda x: float(np.linalg.norm(x)))
    chain = []
    for x in accepted:
        n = float(np.linalg.norm(x))
        if not chain:
            chain.append(x)
            continue
        n_prev = float(np.linalg.norm(chain[-1]))
        if n_prev == 0.0 and n > 0.0:
            chain.append(x)
        elif n >= 1.2 * n_prev:
            chain.append(x)
    records = [_record_fp(problem, x) for x in chain]
    complete = len(records) >= count
    if not complete:
        notes.append(f"found {len(records)} of the requested {count} fixed points")
    return HuntResult(records=records, complete=complete,
                      alternating=profile.alternating, notes=notes)
