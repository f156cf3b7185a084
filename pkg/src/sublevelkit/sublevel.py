"""Restricted minimization over sublevel sets and the constructive minimizer.

Core quantities for a pair (Phi, Psi) at level rho:

* ``alpha``: infimum of Phi over the closed set {Psi <= rho} (multi-start
  estimate, an UPPER bound of the true infimum);
* ``phi_of_rho``: infimum over the open set {Psi < rho} of
  (Phi(x) - alpha) / (rho - Psi(x)), the lambda-threshold at level rho;
* ``beta``: supremum over the open set of (Phi(x) + r) / (Psi(x) - rho),
  a negative, strictly decreasing, convex function of r (it is a supremum
  of affine functions of r with negative slopes);
* ``solve_r0``: the root of beta(r) = -lambda, which exists exactly when
  lambda > phi_of_rho;
* ``constructive_minimizer``: the attaining point of beta at that root,
  which is a global minimizer of Phi + lambda*Psi on {Psi < rho}; it is
  cross-checked against direct restricted minimization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import engine
from .engine import DEFAULT_CONFIG, MultiStartConfig, Region
from .errors import (
    InfeasibleError,
    PreconditionError,
    UnboundedBelowError,
    UsageError,
)
from .functionals import DomainSpec, FunctionalOracle
from .records import CriticalPointRecord


@dataclass
class MinimizeResult:
    x: np.ndarray
    value: float
    starts_used: int
    best_start_index: int
    constraint_active: bool


def _tol_strict(rho: float) -> float:
    return 1e-10 * (1.0 + abs(rho))


def _tol_boundary(rho: float) -> float:
    return 1e-8 * (1.0 + abs(rho))


class SublevelProblem:
    """A pair (Phi, Psi) with a level rho and an optional box domain.

    Construction estimates inf Psi (multi-start), validates rho against it,
    and stores the Psi-minimizer as the feasible witness point.  Estimates
    (alpha, phi_of_rho, the enclosing box) are cached lazily; the caches
    never change results, only avoid recomputation.
    """

    def __init__(
        self,
        phi: FunctionalOracle,
        psi: FunctionalOracle,
        rho: float,
        domain: Optional[DomainSpec] = None,
        config: MultiStartConfig = DEFAULT_CONFIG,
        psi_inf: Optional[tuple] = None,
    ):
        if phi.dim != psi.dim:
            raise UsageError("phi and psi must share a dimension")
        if not psi.coercive:
            raise UsageError("psi must be flagged coercive")
        self.phi = phi
        self.psi = psi
        self.rho = float(rho)
        self.domain = domain if domain is not None else DomainSpec.all_space(phi.dim)
        if self.domain.dim != phi.dim:
            raise UsageError("domain dimension mismatch")
        self.config = config
        if psi_inf is not None:
            # precomputed by a sweep; avoids re-running the expanding search
            # at every level of a grid
            self.psi_inf, self.psi_argmin = float(psi_inf[0]), np.asarray(psi_inf[1])
        else:
            self.psi_inf, self.psi_argmin = self._estimate_psi_inf()
        if not self.rho > self.psi_inf:
            raise InfeasibleError(
                f"rho={self.rho} must exceed the estimated inf Psi={self.psi_inf}"
            )
        self.witness = self.psi_argmin
        self._box = None
        self._alpha = None
        self._alpha_result = None
        self._phi_rho = None

    # -- plumbing -----------------------------------------------------------

    def _estimate_psi_inf(self):
        fg = engine.fuse(self.psi.value, self.psi.grad)
        res = engine.expanding_box_search(
            fg, self.domain, self.config,
            batch_f=self.psi.batch_value and self.psi.values,
        )
        return res.value, res.x

    def _enclosing_box(self):
        if self._box is None:
            self._box = engine.probe_enclosing_box(
                self.psi, self.rho + _tol_boundary(self.rho), self.domain,
                self.witness, seed=self.config.seed,
            )
        return self._box

    def _region(self, rho_eff: float) -> Region:
        lo, hi = self._enclosing_box()
        return Region(
            domain=self.domain, psi=self.psi, rho=rho_eff,
            witness=self.witness, box_lo=lo, box_hi=hi,
            tol_boundary=_tol_boundary(self.rho),
        )

    def _composite_batch(self, fn):
        """Batch evaluator built from oracle batch hooks, or None."""
        if self.phi.batch_value is None or self.psi.batch_value is None:
            return None
        return fn

    # -- operations ---------------------------------------------------------

    def minimize_phi(self) -> MinimizeResult:
        """Multi-start estimate of inf Phi over the closed region (alpha)."""
        region = self._region(self.rho)
        fg = engine.fuse(self.phi.value, self.phi.grad)
        res = engine.minimize_multistart(
            fg, region, self.config,
            batch_f=self._composite_batch(self.phi.values),
        )
        value = self.phi.value(res.x)  # re-evaluate, never cache an iterate
        if value < -engine.UNBOUNDED_CAP:
            raise UnboundedBelowError(
                "Phi appears unbounded below on the sublevel region "
                "(violates the standing assumptions)",
                best_value=value, best_point=res.x,
            )
        active = abs(self.psi.value(res.x) - self.rho) <= 1e-6 * (1 + abs(self.rho))
        return MinimizeResult(
            x=res.x, value=value, starts_used=res.starts_used,
            best_start_index=res.start_index, constraint_active=active,
        )

    def alpha(self) -> float:
        """alpha(rho) = inf of Phi over {Psi <= rho} (upper estimate)."""
        if self._alpha is None:
            self._alpha_result = self.minimize_phi()
            self._alpha = self._alpha_result.value
        return self._alpha

    def alpha_result(self) -> MinimizeResult:
        self.alpha()
        return self._alpha_result

    # The ratio infimum used by phi_of_rho, beta, and the identity check:
    # minimize (Phi(x) + shift) / (rho - Psi(x)) over {Psi <= rho - tol_strict}.
    def ratio_min(self, shift: float, extra_starts=(), n_starts=None):
        rho = self.rho
        ts = _tol_strict(rho)
        region = self._region(rho - ts)
        floor = 0.5 * ts
        phi_v, phi_g = self.phi.value, self.phi.grad
        psi_v, psi_g = self.psi.value, self.psi.grad

        def fg(x):
            num = phi_v(x) + shift
            den = rho - psi_v(x)
            if den <= floor:
                # clamped continuation outside the strict region; the
                # engine's penalty term supplies the push back inside
                return num / floor, phi_g(x) / floor
            val = num / den
            return val, (phi_g(x) + val * psi_g(x)) / den

        def batch(X):
            num = self.phi.values(X) + shift
            den = np.maximum(rho - self.psi.values(X), floor)
            return num / den

        cfg = self.config if n_starts is None else self.config.with_starts(n_starts)
        anchor = self.alpha_result().x
        seg = self._segment_ratio_candidates(shift, anchor, floor)
        extra = list(extra_starts) + [x for _, x in seg[:3]]
        res = engine.minimize_multistart(
            fg, region, cfg, extra_starts=extra,
            batch_f=self._composite_batch(batch),
        )
        x, val = res.x, res.value
        for v_s, x_s in seg[:1]:
            if v_s < val:
                x, val = x_s, v_s
        improved = self._polish_ratio(fg, x, region)
        if improved is not None:
            x2, v2 = improved
            if v2 < val:
                x, val = x2, v2
        return float(val), x

    def _segment_ratio_candidates(self, shift: float, anchor, floor: float):
        """Ratio values along the path from the alpha-argmin into the region.

        When the ratio infimum is a boundary limit at the alpha-argmin (both
        numerator and denominator vanish there), descent methods miss the
        razor-thin valley; a log-spaced scan of x(t) = anchor + t*(witness -
        anchor) approaches the directional limit deterministically.  Returns
        feasible (value, point) candidates sorted best-first.
        """
        rho = self.rho
        ts_cut = rho - _tol_strict(rho)
        d = self.witness - anchor
        if float(np.linalg.norm(d)) == 0.0:
            return []
        out = []
        for t in np.geomspace(1e-12, 1.0, 49):
            x = anchor + t * d
            den = rho - self.psi.value(x)
            if den <= 0 or self.psi.value(x) > ts_cut:
                continue
            out.append(((self.phi.value(x) + shift) / den, x))
        if not out:
            return []
        out.sort(key=lambda vx: vx[0])
        best_v, best_x = out[0]
        # Brent refinement over log t around the best sample
        from scipy import optimize as _opt

        def g(logt):
            x = anchor + np.exp(logt) * d
            den = rho - self.psi.value(x)
            if den <= rho - ts_cut and den <= 0:
                return np.inf
            if self.psi.value(x) > ts_cut:
                return np.inf
            return (self.phi.value(x) + shift) / max(den, floor)

        t_best = np.log(max(np.linalg.norm(best_x - anchor) /
                            np.linalg.norm(d), 1e-12))
        try:
            with np.errstate(all="ignore"), warnings.catch_warnings():
                warnings.simplefilter("ignore")
                r = _opt.minimize_scalar(
                    g, bracket=None,
                    bounds=(t_best - 3.0, min(t_best + 3.0, 0.0)),
                    method="bounded", options={"xatol": 1e-12},
                )
            if np.isfinite(r.fun) and r.fun < best_v:
                out.insert(0, (float(r.fun), anchor + np.exp(r.x) * d))
        except ValueError:
            pass
        return out

    def _polish_ratio(self, fg, x, region: Region):
        """Interior critical-point polish of the ratio objective."""
        if not self.phi.differentiable or not self.psi.differentiable:
            return None
        margin = 10 * _tol_strict(self.rho)
        if self.psi.value(x) > region.rho - margin:
            return None  # boundary-hugging infimum, nothing to polish
        on_face = np.any(
            (np.isfinite(region.domain.lower) & (np.abs(x - region.domain.lower) < 1e-12))
            | (np.isfinite(region.domain.upper) & (np.abs(x - region.domain.upper) < 1e-12))
        )
        if on_face:
            return None
        if self.phi.dim == 1:
            lo, hi = region.box_lo[0], region.box_hi[0]
            root = engine.polish_derivative_root_1d(
                lambda t: fg(np.array([t]))[1][0], x[0], lo, hi
            )
            if root is None:
                return None
            xr = np.array([root])
        else:
            xr = engine.polish_gradient_root(
                lambda p: fg(p)[1], x,
                accept=lambda p: region.feasible(p, slack=0.0),
            )
            if xr is None:
                return None
        if not region.feasible(xr, slack=0.0):
            return None
        return xr, fg(xr)[0]

    def phi_of_rho(self) -> float:
        """Threshold phi(rho): infimum of (Phi - alpha)/(rho - Psi) over the
        open sublevel set; nonnegative up to estimate tolerance."""
        if self._phi_rho is None:
            a = self.alpha()
            val, _ = self.ratio_min(shift=-a,
                                    extra_starts=[self.alpha_result().x])
            self._phi_rho = val
        return self._phi_rho

    def beta(self, r: float):
        """beta_rho(r) = sup over {Psi < rho} of (Phi + r)/(Psi - rho).

        Requires r > -alpha (otherwise the supremum is not attained and the
        ratio is not negative); returns (value, attaining point).
        """
        a = self.alpha()
        if not r > -a:
            raise PreconditionError(
                f"beta requires r > -alpha = {-a}; got r = {r}"
            )
        m, x = self.ratio_min(shift=r)
        return -m, x

    def _beta_warm(self, r: float, warm):
        m, x = self.ratio_min(shift=r, extra_starts=list(warm),
                              n_starts=max(8, self.config.n_starts // 4))
        return -m, x

    def solve_r0(self, lam: float, tol_root: Optional[float] = None):
        """Solve beta(r) = -lam for r > -alpha.

        Valid because beta is continuous, strictly decreasing, convex, and
        unbounded below on (-alpha, inf).  Bracketed bisection, accelerated
        by the chord (upper bounds) and by the affine minorant through the
        attaining point (lower bounds) -- both safe under convexity.
        """
        phi_rho = self.phi_of_rho()
        if not lam > phi_rho:
            raise PreconditionError(
                f"solve_r0 requires lambda > phi(rho) = {phi_rho}; got {lam}"
            )
        if tol_root is None:
            tol_root = 1e-10 * (1.0 + abs(lam))
        a = self.alpha()
        warm: list[np.ndarray] = []

        def beta_at(r):
            v, x = self._beta_warm(r, warm)
            warm.append(x)
            del warm[:-4]
            return v, x

        eps = 1e-8 * (1.0 + abs(a))
        r_lo = -a + eps
        b_lo, x_lo = beta_at(r_lo)
        shrink = 0
        while b_lo <= -lam and shrink < 8:
            eps *= 0.1
            r_lo = -a + eps
            b_lo, x_lo = beta_at(r_lo)
            shrink += 1
        if b_lo <= -lam:
            raise PreconditionError(
                "no admissible bracket: beta(r) <= -lambda already at "
                f"r = -alpha + {eps:g} (lambda is not above phi(rho) "
                "within resolution)"
            )
        r_hi = r_lo + 1.0
        b_hi, x_hi = beta_at(r_hi)
        doublings = 0
        while b_hi >= -lam:
            doublings += 1
            if doublings > 200:
                raise PreconditionError(
                    "bracket expansion failed after 200 doublings; "
                    "lambda may not exceed phi(rho)"
                )
            r_hi = r_lo + (r_hi - r_lo) * 2.0
            b_hi, x_hi = beta_at(r_hi)

        best = min(
            [(abs(b_lo + lam), r_lo, b_lo, x_lo), (abs(b_hi + lam), r_hi, b_hi, x_hi)]
        )
        for _ in range(200):
            if best[0] <= tol_root:
                break
            # chord root (>= true root) and minorant root (<= true root)
            r_chord = r_lo + (b_lo + lam) * (r_hi - r_lo) / (b_lo - b_hi)
            slope = 1.0 / (self.psi.value(x_hi) - self.rho)
            r_minor = r_hi + (-lam - b_hi) / slope
            lo_new = max(r_lo, min(r_minor, r_hi))
            hi_new = min(r_hi, max(r_chord, r_lo))
            mid = 0.5 * (r_lo + r_hi)
            # fall back to bisection when the accelerated bracket is weak
            if not (lo_new > r_lo or hi_new < r_hi) or (hi_new - lo_new) > 0.6 * (r_hi - r_lo):
                cand = mid
            else:
                cand = 0.5 * (lo_new + hi_new)
            cand = min(max(cand, r_lo + 1e-18 * (1 + abs(r_lo))), r_hi)
            b_c, x_c = beta_at(cand)
            if abs(b_c + lam) < best[0]:
                best = (abs(b_c + lam), cand, b_c, x_c)
            if b_c > -lam:
                r_lo, b_lo, x_lo = cand, b_c, x_c
            else:
                r_hi, b_hi, x_hi = cand, b_c, x_c
            if r_hi - r_lo <= 1e-16 * (1.0 + abs(r_hi)):
                break
        self._last_root = (best[1], best[3])
        return best[1]

    def constructive_minimizer(self, lam: float) -> CriticalPointRecord:
        """Restricted global minimizer of Phi + lam*Psi on {Psi < rho},
        built from the attaining point of beta at the root r0.

        Cross-checked internally against direct multi-start minimization of
        the composite on the region; a discrepancy beyond the relative
        tolerance raises InconsistencyError with both candidates.
        """
        from .errors import InconsistencyError

        r0 = self.solve_r0(lam)
        _, x0 = self._last_root
        x0 = self._polish_composite(lam, x0)
        v0 = self.phi.value(x0) + lam * self.psi.value(x0)

        direct = self.minimize_composite(lam)
        xd = self._polish_composite(lam, direct.x)
        vd = self.phi.value(xd) + lam * self.psi.value(xd)

        tol = self.config.cross_check_rel_tol * (1.0 + abs(v0))
        if abs(v0 - vd) > tol:
            raise InconsistencyError(
                "constructive minimizer disagrees with direct restricted "
                f"minimization: {v0} vs {vd} (tol {tol})",
                candidates=[(x0, v0), (xd, vd)],
            )
        grad_norm = None
        if self.phi.differentiable and self.psi.differentiable:
            grad_norm = self._stationarity(lam, x0)
        return CriticalPointRecord(
            x=x0, phi_val=self.phi.value(x0), psi_val=self.psi.value(x0),
            grad_norm=grad_norm, kind="sublevel_global", lam=lam,
        )

    def minimize_composite(self, lam: float) -> MinimizeResult:
        """Direct multi-start minimization of Phi + lam*Psi on {Psi < rho}."""
        ts = _tol_strict(self.rho)
        region = self._region(self.rho - ts)
        phi_v, phi_g = self.phi.value, self.phi.grad
        psi_v, psi_g = self.psi.value, self.psi.grad

        def fg(x):
            return phi_v(x) + lam * psi_v(x), phi_g(x) + lam * psi_g(x)

        def batch(X):
            return self.phi.values(X) + lam * self.psi.values(X)

        res = engine.minimize_multistart(
            fg, region, self.config, batch_f=self._composite_batch(batch),
        )
        value = phi_v(res.x) + lam * psi_v(res.x)
        if value < -engine.UNBOUNDED_CAP:
            raise UnboundedBelowError(
                "composite appears unbounded below on the region",
                best_value=value, best_point=res.x,
            )
        active = abs(psi_v(res.x) - self.rho) <= 1e-6 * (1 + abs(self.rho))
        return MinimizeResult(res.x, value, res.starts_used, res.start_index, active)

    def _polish_composite(self, lam: float, x):
        """Newton-polish a composite minimizer when it is interior."""
        if not (self.phi.differentiable and self.psi.differentiable):
            return x
        margin = 10 * _tol_strict(self.rho)
        if self.psi.value(x) > self.rho - margin:
            return x
        dom = self.domain
        on_face = np.any(
            (np.isfinite(dom.lower) & (np.abs(x - dom.lower) < 1e-12))
            | (np.isfinite(dom.upper) & (np.abs(x - dom.upper) < 1e-12))
        )
        if on_face:
            return x
        grad = lambda p: self.phi.grad(p) + lam * self.psi.grad(p)
        if self.phi.dim == 1:
            lo, hi = self._enclosing_box()
            root = engine.polish_derivative_root_1d(
                lambda t: grad(np.array([t]))[0], x[0], lo[0], hi[0]
            )
            cand = None if root is None else np.array([root])
        else:
            cand = engine.polish_gradient_root(grad, x)
        if cand is None:
            return x
        comp = lambda p: self.phi.value(p) + lam * self.psi.value(p)
        if self.psi.value(cand) >= self.rho - margin or not dom.contains(cand):
            return x
        if comp(cand) > comp(x) + 1e-12 * (1 + abs(comp(x))):
            return x
        return cand

    def _stationarity(self, lam: float, x) -> float:
        """Projected-gradient norm of the composite (plain norm when x is
        interior to the domain)."""
        g = self.phi.grad(x) + lam * self.psi.grad(x)
        step = self.domain.project(x - g) - x
        return float(np.linalg.norm(step))


# -- module-level convenience wrappers (the documented operation surface) ----

def alpha(problem: SublevelProblem) -> float:
    return problem.alpha()


def phi_of_rho(problem: SublevelProblem) -> float:
    return problem.phi_of_rho()


def beta(problem: SublevelProblem, r: float):
    return problem.beta(r)


def solve_r0(problem: SublevelProblem, lam: float) -> float:
    return problem.solve_r0(lam)


def constructive_minimizer(problem: SublevelProblem, lam: float) -> CriticalPointRecord:
    return problem.constructive_minimizer(lam)
