"""Deterministic multi-start minimization machinery.

Every global sub-problem in the toolkit (restricted infima, ratio infima,
ball suprema, expanding-box searches) runs through this module.  The design
contract is determinism under restarts and under parallel execution: starts
are generated from explicit seeds, every start is descended independently,
and the reduction is the argmin with ties broken by lowest start index.

Constrained problems use escalating quadratic penalties on the sublevel
constraint ``psi(x) <= rho`` inside L-BFGS-B (box bounds are passed through
natively), followed by a feasibility-restoration pullback toward a feasible
witness point.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .errors import InfeasibleError, NumericalError
from .functionals import DomainSpec, FunctionalOracle

UNBOUNDED_CAP = 1e12


@dataclass(frozen=True)
class MultiStartConfig:
    """Shared knobs for the multi-start engine.

    ``serial`` only changes the execution mode, never the result.
    """

    n_starts: int = 32
    seed: int = 0
    prescan_points: int = 4096
    penalty_weights: tuple = (1e3, 1e4, 1e5, 1e6, 1e7)
    maxiter: int = 500
    serial: bool = False
    cross_check_rel_tol: float = 1e-6
    max_workers: int = 8

    def with_starts(self, n: int) -> "MultiStartConfig":
        return replace(self, n_starts=n)


DEFAULT_CONFIG = MultiStartConfig()


def parallel_map(fn, items, cfg: MultiStartConfig):
    """Order-preserving map; thread pool unless cfg.serial."""
    items = list(items)
    if cfg.serial or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(cfg.max_workers, len(items))) as ex:
        return list(ex.map(fn, items))


@dataclass
class Region:
    """Feasible set {psi <= rho} intersected with a box domain.

    ``box_lo``/``box_hi`` is a finite enclosing box of the feasible set
    (obtained by coercivity probing), used for start generation and as hard
    L-BFGS-B bounds.  ``psi`` may be None for box-only regions.
    """

    domain: DomainSpec
    psi: Optional[FunctionalOracle]
    rho: Optional[float]
    witness: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray
    tol_boundary: float = 0.0

    def feasible(self, x, slack: float = 0.0) -> bool:
        if not self.domain.contains(x, tol=1e-12):
            return False
        if self.psi is None:
            return True
        return self.psi.value(x) <= self.rho + self.tol_boundary + slack

    def violation(self, x) -> float:
        if self.psi is None:
            return 0.0
        return max(0.0, self.psi.value(x) - self.rho)


def probe_enclosing_box(
    psi: FunctionalOracle,
    rho: float,
    domain: DomainSpec,
    witness: np.ndarray,
    seed: int = 0,
    n_random_dirs: int = 8,
    margin: float = 1.5,
    max_doublings: int = 120,
):
    """Finite box containing {psi <= rho} (within the domain), found by
    doubling along coordinate and random directions until psi exceeds rho.

    Relies on the declared coercivity of psi; raises NumericalError when no
    probed direction ever escapes the sublevel set.
    """
    dim = psi.dim
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xB0C,)))
    dirs = []
    eye = np.eye(dim)
    for i in range(dim):
        dirs.append(eye[i])
        dirs.append(-eye[i])
    if dim > 1:
        extra = rng.standard_normal((n_random_dirs, dim))
        extra /= np.linalg.norm(extra, axis=1, keepdims=True)
        dirs.extend(extra)
    half = np.zeros(dim)
    escaped = False
    for u in dirs:
        t = 1.0
        hit = None
        prev_p = None
        for _ in range(max_doublings):
            p = domain.project(witness + t * u)
            if prev_p is not None and np.array_equal(p, prev_p):
                break  # ray collapsed onto a domain face
            prev_p = p
            if psi.value(p) > rho:
                hit = p
                break
            t *= 2.0
        if hit is not None:
            escaped = True
            half = np.maximum(half, np.abs(hit - witness))
    if not escaped:
        raise NumericalError(
            "could not enclose the sublevel set; psi does not grow above rho "
            "along any probed direction (coercivity flag may be wrong)"
        )
    half = margin * np.maximum(half, 1e-6)
    lo = np.maximum(witness - half, domain.lower)
    hi = np.minimum(witness + half, domain.upper)
    return lo, hi


@dataclass
class EngineResult:
    x: np.ndarray
    value: float
    start_index: int
    starts_used: int
    feasible: bool


def _local_descent(fg, x0, bounds, region: Region, cfg: MultiStartConfig):
    """Local descent from one start: escalating-penalty L-BFGS-B rounds to
    settle into a basin, an SLSQP pass on the true constraint psi <= rho to
    reach KKT accuracy (the quartic penalty wall is too stiff for L-BFGS-B
    line searches alone), then an exact feasibility pullback."""

    def penalized(x, w):
        v, g = fg(x)
        if region.psi is None or w == 0.0:
            return v, g
        pv = region.psi.value(x) - region.rho
        if pv > 0.0:
            v = v + w * pv * pv
            g = g + (2.0 * w * pv) * region.psi.grad(x)
        return v, g

    x = np.asarray(x0, dtype=float)
    weights = cfg.penalty_weights if region.psi is not None else (0.0,)
    opts = {"maxiter": cfg.maxiter, "ftol": 1e-13, "gtol": 1e-11,
            "maxcor": 20, "maxls": 60}
    import warnings as _warnings

    with _warnings.catch_warnings(), np.errstate(over="ignore", invalid="ignore"):
        _warnings.simplefilter("ignore", RuntimeWarning)
        for w in weights:
            res = optimize.minimize(
                penalized, x, args=(w,), jac=True, method="L-BFGS-B",
                bounds=bounds, options=opts,
            )
            x = res.x
        if region.psi is not None:
            cons = [{
                "type": "ineq",
                "fun": lambda p: region.rho - region.psi.value(p),
                "jac": lambda p: -region.psi.grad(p),
            }]
            try:
                res = optimize.minimize(
                    fg, x, jac=True, method="SLSQP", bounds=bounds,
                    constraints=cons, options={"maxiter": 200, "ftol": 1e-14},
                )
                if np.all(np.isfinite(res.x)) and np.isfinite(res.fun):
                    v_old = fg(x)[0] + 0.0
                    viol_new = max(0.0, region.psi.value(res.x) - region.rho)
                    if res.fun <= v_old + 1e-12 * (1 + abs(v_old)) and \
                            viol_new <= 1e-6 * (1 + abs(region.rho)):
                        x = res.x
            except (ValueError, FloatingPointError):
                pass
    # enforce exact feasibility: a leftover violation of ~1e-8 would make
    # infimum estimates undershoot the true value, which downstream ratio
    # computations (with denominators ~ rho - psi) cannot tolerate
    if region.psi is not None and region.violation(x) > 0.0:
        x = _restore_feasibility(x, region)
    return x


def _restore_feasibility(x, region: Region):
    """Pull x back toward the witness until psi <= rho (bisection on the
    segment; the witness is strictly feasible by construction)."""
    w = region.witness
    lo, hi = 0.0, 1.0  # s=0 -> witness (feasible), s=1 -> x (infeasible)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        p = w + mid * (x - w)
        if region.psi.value(p) <= region.rho:
            lo = mid
        else:
            hi = mid
    return w + lo * (x - w)


def _sobol_starts(region: Region, count: int, seed: int):
    dim = region.box_lo.shape[0]
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    n = 1 << max(2, int(np.ceil(np.log2(max(count, 1)))))
    raw = sampler.random(n)
    pts = region.box_lo + raw * (region.box_hi - region.box_lo)
    if region.psi is None:
        return list(pts)
    vals = region.psi.values(pts)
    return [p for p, v in zip(pts, vals) if v <= region.rho]


def _radial_starts(region: Region, count: int, seed: int,
                   fractions=(0.25, 0.5, 0.8, 0.95)):
    """Starts on rays from the witness, scaled to the sublevel boundary.

    Complements box rejection sampling, whose acceptance rate collapses in
    high dimension (ellipsoid volume shrinks relative to its bounding box).
    """
    if region.psi is None:
        return []
    dim = region.box_lo.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xAD1A,)))
    n_dirs = max(1, count // len(fractions))
    dirs = rng.standard_normal((n_dirs, dim))
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)
    out = []
    w = region.witness
    for u in dirs:
        t_hi, escaped = 1.0, False
        prev_p = None
        for _ in range(80):
            p = region.domain.project(w + t_hi * u)
            if prev_p is not None and np.array_equal(p, prev_p):
                break
            prev_p = p
            if region.psi.value(p) > region.rho:
                escaped = True
                break
            t_hi *= 2.0
        if not escaped:
            continue
        t_lo = 0.0
        for _ in range(40):
            mid = 0.5 * (t_lo + t_hi)
            if region.psi.value(region.domain.project(w + mid * u)) <= region.rho:
                t_lo = mid
            else:
                t_hi = mid
        for f in fractions:
            out.append(region.domain.project(w + f * t_lo * u))
    return out


def _prescan_starts_1d(fg_value, region: Region, cfg: MultiStartConfig,
                       batch_f=None, k_best: int = 8):
    """Dense 1D grid scan; returns the best feasible local minima as starts.

    The oscillatory benchmarks have many basins, so descent alone is not
    reliable in 1D without this seeding.
    """
    lo, hi = region.box_lo[0], region.box_hi[0]
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return []
    xs = np.linspace(lo, hi, cfg.prescan_points)
    X = xs[:, None]
    if region.psi is not None:
        feas = region.psi.values(X) <= region.rho
    else:
        feas = np.ones_like(xs, dtype=bool)
    if not feas.any():
        return []
    if batch_f is not None:
        vals = np.asarray(batch_f(X), dtype=float)
    else:
        vals = np.array([fg_value(x)[0] for x in X])
    vals = np.where(feas, vals, np.inf)
    # local minima plus the global grid argmin
    idx = [int(np.argmin(vals))]
    interior = np.where(
        (vals[1:-1] <= vals[:-2]) & (vals[1:-1] <= vals[2:]) & np.isfinite(vals[1:-1])
    )[0] + 1
    order = interior[np.argsort(vals[interior], kind="stable")]
    for i in order[: 4 * k_best]:
        if all(abs(i - j) > 1 for j in idx):
            idx.append(int(i))
        if len(idx) >= k_best:
            break
    return [X[i].copy() for i in idx]


def minimize_multistart(
    fg,
    region: Region,
    cfg: MultiStartConfig = DEFAULT_CONFIG,
    extra_starts: Sequence[np.ndarray] = (),
    batch_f=None,
) -> EngineResult:
    """Multi-start penalized descent over a sublevel region.

    The result is the feasible argmin over all starts; ties (exact value
    equality) go to the lowest start index, so serial and parallel runs
    agree bit-for-bit.
    """
    dim = region.box_lo.shape[0]
    starts: list[np.ndarray] = [np.asarray(region.witness, float)]
    starts.extend(np.asarray(s, float) for s in extra_starts)
    if dim == 1 and cfg.prescan_points > 0:
        starts.extend(_prescan_starts_1d(fg, region, cfg, batch_f=batch_f))
    budget = max(cfg.n_starts - len(starts), 0)
    if budget > 0:
        n_sobol = budget if dim <= 4 else max(budget // 2, 1)
        starts.extend(_sobol_starts(region, n_sobol, cfg.seed)[:n_sobol])
    if len(starts) < cfg.n_starts:
        starts.extend(
            _radial_starts(region, cfg.n_starts - len(starts), cfg.seed)
        )
    starts = starts[: max(cfg.n_starts, len(extra_starts) + 1)]

    bounds = [
        (lo if math.isfinite(lo) else None, hi if math.isfinite(hi) else None)
        for lo, hi in zip(region.box_lo, region.box_hi)
    ]

    def run_one(args):
        i, x0 = args
        x = _local_descent(fg, x0, bounds, region, cfg)
        v = fg(x)[0]
        return i, x, v

    results = parallel_map(run_one, list(enumerate(starts)), cfg)
    best = None
    for i, x, v in results:
        if not np.isfinite(v):
            continue
        if not region.feasible(x, slack=region.tol_boundary):
            continue
        if best is None or v < best[2] or (v == best[2] and i < best[0]):
            best = (i, x, v)
    if best is None:
        raise InfeasibleError(
            "no start produced a feasible finite candidate "
            f"({len(starts)} starts attempted)"
        )
    i, x, v = best
    return EngineResult(x=x, value=v, start_index=i, starts_used=len(starts),
                        feasible=True)


@dataclass
class ExpandingSearchResult:
    x: np.ndarray
    value: float
    rounds: list  # (radius, best_value, best_norm) per expansion
    converged: bool  # best stopped improving while strictly interior
    escaped: bool  # argmin norm reached escape_radius with decreasing values


def expanding_box_search(
    fg,
    domain: DomainSpec,
    cfg: MultiStartConfig = DEFAULT_CONFIG,
    center: Optional[np.ndarray] = None,
    radius0: float = 1.0,
    max_expansions: int = 24,
    escape_radius: Optional[float] = None,
    batch_f=None,
) -> ExpandingSearchResult:
    """Global search over boxes of doubling radius.

    Without ``escape_radius``: stops once the incumbent stops improving for
    two consecutive expansions while staying strictly inside the box (the
    usual unconstrained-global heuristic).  With ``escape_radius``: keeps
    expanding until the argmin norm reaches it, which is the unboundedness /
    escape probe -- ``escaped`` then reports whether values kept decreasing.
    """
    dim = domain.dim
    if center is None:
        center = domain.project(np.zeros(dim))
    best_x, best_v = None, np.inf
    rounds = []
    stall = 0
    radius = radius0
    decreasing = True
    prev_round_v = np.inf
    for k in range(max_expansions):
        lo = np.maximum(center - radius, domain.lower)
        hi = np.minimum(center + radius, domain.upper)
        region = Region(domain=domain, psi=None, rho=None, witness=center,
                        box_lo=lo, box_hi=hi)
        sub = replace(cfg, seed=cfg.seed + 7919 * k, n_starts=max(cfg.n_starts // 2, 8))
        extra = [best_x] if best_x is not None else []
        res = minimize_multistart(fg, region, sub, extra_starts=extra,
                                  batch_f=batch_f)
        rounds.append((radius, res.value, float(np.linalg.norm(res.x))))
        if res.value > prev_round_v + 1e-14 * (1 + abs(prev_round_v)):
            decreasing = False
        prev_round_v = min(prev_round_v, res.value)
        improved = best_x is None or \
            res.value < best_v - 1e-12 * (1.0 + abs(best_v))
        if improved:
            best_x, best_v = res.x, res.value
        if escape_radius is None:
            # the incumbent counts as settled once it stops improving while
            # sitting strictly inside the box or pinned to a domain face
            settled = bool(np.all(np.abs(res.x - center) < 0.95 * radius)) or \
                _argmin_on_domain_face(res.x, domain)
            if not improved and settled:
                stall += 1
                if stall >= 2:
                    return ExpandingSearchResult(best_x, best_v, rounds, True, False)
            else:
                stall = 0
        else:
            if np.linalg.norm(res.x) >= escape_radius:
                return ExpandingSearchResult(
                    res.x, res.value, rounds, False,
                    decreasing and res.value < rounds[0][1] - 1e-12,
                )
        radius *= 2.0
    if best_x is None:
        raise NumericalError("expanding search produced no finite candidate")
    return ExpandingSearchResult(best_x, best_v, rounds, escape_radius is None, False)


def _argmin_on_domain_face(x, domain: DomainSpec) -> bool:
    at_lo = np.isfinite(domain.lower) & (np.abs(x - domain.lower) < 1e-12)
    at_hi = np.isfinite(domain.upper) & (np.abs(x - domain.upper) < 1e-12)
    return bool(np.any(at_lo | at_hi))


# ---------------------------------------------------------------------------
# critical-point polish
# ---------------------------------------------------------------------------

def polish_derivative_root_1d(dfn, x0: float, lo: float, hi: float,
                              span: float = 1e-3):
    """Refine a 1D critical point by bracketing the derivative sign change
    around x0 (within [lo, hi]) and running Brent's method."""
    x0 = float(x0)
    for widen in range(1, 18):
        d = span * (2.0 ** (widen - 1)) * (1.0 + abs(x0))
        a = max(lo, x0 - d)
        b = min(hi, x0 + d)
        if b <= a:
            return None
        fa, fb = dfn(a), dfn(b)
        if not (np.isfinite(fa) and np.isfinite(fb)):
            return None
        if fa == 0.0:
            return a
        if fb == 0.0:
            return b
        if fa * fb < 0:
            return float(optimize.brentq(dfn, a, b, xtol=1e-15, rtol=1e-15))
        if a == lo and b == hi:
            break
    return None


def polish_gradient_root(grad_fn, x0, accept=None):
    """Refine an n-D critical point by solving grad = 0 with MINPACK hybr.

    Returns the improved point, or None when the solve fails, worsens the
    gradient norm, or ``accept`` rejects the candidate.
    """
    x0 = np.asarray(x0, dtype=float)
    g0 = np.linalg.norm(grad_fn(x0))
    try:
        sol = optimize.root(grad_fn, x0, method="hybr", tol=1e-14)
    except Exception:
        return None
    if not np.all(np.isfinite(sol.x)):
        return None
    g1 = np.linalg.norm(grad_fn(sol.x))
    if g1 >= g0 and not sol.success:
        return None
    if g1 > g0:
        return None
    if accept is not None and not accept(sol.x):
        return None
    return sol.x


def fuse(value_fn, grad_fn) -> Callable[[np.ndarray], tuple]:
    """Combine separate value/gradient callables into the fg protocol."""
    return lambda x: (value_fn(x), grad_fn(x))
