"""Sequences of restricted minima and the multiplicity alternatives.

Along a decreasing level schedule the restricted minimizers either converge
to a global minimizer of Psi through pairwise distinct critical points, or
stabilize at a Psi-minimizer that is a local minimum of the composite.
Along an increasing schedule they either settle at a global minimum of the
composite or escape with Psi(x_n) growing without bound.  Classification is
sampling-based and deliberately conservative: when the evidence does not
match a branch cleanly the result is ``inconclusive``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import engine
from .engine import DEFAULT_CONFIG, MultiStartConfig
from .errors import SublevelKitError
from .functionals import DomainSpec, FunctionalOracle
from .records import CriticalPointRecord
from .sublevel import SublevelProblem

TOL_SEP = 1e-6


def _tol_crit(value: float) -> float:
    return 1e-8 * (1.0 + abs(value))


@dataclass
class MinimaSequence:
    lam: float
    records: list  # CriticalPointRecord per accepted level
    schedule: np.ndarray
    branch: str  # global_min_found | escaping_sequence | converging_sequence
    #              | zero_is_local_min | inconclusive
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "lambda": float(self.lam),
            "branch": self.branch,
            "schedule": [float(r) for r in self.schedule],
            "records": [r.to_dict() for r in self.records],
            "notes": list(self.notes),
        }


def sublevel_critical_point(
    phi: FunctionalOracle,
    psi: FunctionalOracle,
    rho: float,
    lam: float,
    domain: Optional[DomainSpec] = None,
    cfg: MultiStartConfig = DEFAULT_CONFIG,
    warm_starts: Sequence[np.ndarray] = (),
    use_constructive: bool = False,
) -> CriticalPointRecord:
    """Restricted global minimizer of phi + lam*psi on {psi < rho}.

    When lam > phi(rho) the minimizer is interior and (for differentiable
    oracles) a critical point; the returned grad_norm is the projected-
    gradient stationarity measure.  Below the threshold the infimum may hug
    the boundary; the record then honestly carries a nonzero grad_norm.
    """
    prob = SublevelProblem(phi, psi, rho, domain, cfg)
    threshold = prob.phi_of_rho()
    if not lam > threshold:
        warnings.warn(
            f"lambda={lam} is not above phi(rho)={threshold}; the restricted "
            "minimum may not be an interior critical point",
            stacklevel=2,
        )
    candidates = [_level_minimizer(prob, lam, list(warm_starts))]
    if use_constructive and lam > threshold:
        try:
            rec = prob.constructive_minimizer(lam)
            candidates.append(rec.x)
        except SublevelKitError:
            pass

    def comp(x):
        return phi.value(x) + lam * psi.value(x)

    best = min(candidates, key=comp)
    grad_norm = None
    if phi.differentiable and psi.differentiable:
        grad_norm = prob._stationarity(lam, best)
    return CriticalPointRecord(
        x=best, phi_val=phi.value(best), psi_val=psi.value(best),
        grad_norm=grad_norm, kind="sublevel_global", lam=lam,
    )


def _level_minimizer(prob: SublevelProblem, lam: float, warm):
    """One schedule level: direct restricted minimization + polish."""
    ts = 1e-10 * (1.0 + abs(prob.rho))
    region = prob._region(prob.rho - ts)
    phi_v, phi_g = prob.phi.value, prob.phi.grad
    psi_v, psi_g = prob.psi.value, prob.psi.grad

    def fg(x):
        return phi_v(x) + lam * psi_v(x), phi_g(x) + lam * psi_g(x)

    def batch(X):
        return prob.phi.values(X) + lam * prob.psi.values(X)

    extra = [w for w in warm if region.feasible(w, slack=0.0)]
    res = engine.minimize_multistart(
        fg, region, prob.config, extra_starts=extra,
        batch_f=prob._composite_batch(batch),
    )
    x = prob._polish_composite(lam, res.x)
    return x


def _record_for(prob: SublevelProblem, lam: float, x) -> CriticalPointRecord:
    grad_norm = None
    if prob.phi.differentiable and prob.psi.differentiable:
        grad_norm = prob._stationarity(lam, x)
    return CriticalPointRecord(
        x=x, phi_val=prob.phi.value(x), psi_val=prob.psi.value(x),
        grad_norm=grad_norm, kind="sublevel_global", lam=lam,
    )


def default_descending_schedule(rho0: float, psi_inf: float, n: int = 10,
                                factor: float = 4.0) -> np.ndarray:
    k = np.arange(1, n + 1, dtype=float)
    return psi_inf + (rho0 - psi_inf) * factor**-k


def default_ascending_schedule(rho0: float, n: int = 10,
                               factor: float = 4.0) -> np.ndarray:
    return rho0 * factor ** np.arange(0, n + 1, dtype=float)


def descending_sequence(
    phi: FunctionalOracle,
    psi: FunctionalOracle,
    lam: float,
    schedule: np.ndarray,
    domain: Optional[DomainSpec] = None,
    cfg: MultiStartConfig = DEFAULT_CONFIG,
    delta_hint: Optional[float] = None,
) -> MinimaSequence:
    """Restricted minima along a decreasing schedule toward inf Psi.

    Branches: ``converging_sequence`` needs >= 3 pairwise-distinct interior
    critical records whose Psi values decrease by a factor >= 1.5 toward the
    Psi infimum; ``zero_is_local_min`` needs the minimizers to stabilize at
    a global minimizer of Psi that passes the local-minimum probe.
    """
    schedule = np.asarray(schedule, dtype=float)
    if not np.all(np.diff(schedule) < 0):
        raise SublevelKitError("descending schedule must strictly decrease")
    if delta_hint is not None and not lam > delta_hint:
        warnings.warn(
            f"lambda={lam} is not above the delta estimate {delta_hint}; "
            "the convergence alternative is not guaranteed",
            stacklevel=2,
        )
    notes = []
    records = []
    critical = []  # records accepted as interior critical points
    warm: list[np.ndarray] = []
    psi_inf = None
    psi_inf_cache = None
    for rho in schedule:
        try:
            prob = SublevelProblem(phi, psi, float(rho), domain, cfg,
                                   psi_inf=psi_inf_cache)
        except SublevelKitError as exc:
            notes.append(f"level rho={rho:g} skipped: {exc}")
            continue
        psi_inf_cache = (prob.psi_inf, prob.psi_argmin)
        psi_inf = prob.psi_inf
        x = _level_minimizer(prob, lam, warm)
        warm = [x]
        rec = _record_for(prob, lam, x)
        records.append(rec)
        value = rec.phi_val + lam * rec.psi_val
        if rec.grad_norm is not None and rec.grad_norm <= _tol_crit(value):
            critical.append(rec)
        else:
            notes.append(
                f"level rho={rho:g}: boundary/noncritical minimizer "
                f"(grad_norm={rec.grad_norm})"
            )
    if not records:
        return MinimaSequence(lam, [], schedule, "inconclusive", notes)

    branch = "inconclusive"
    # stabilization at a Psi-minimizer that is a local composite minimum
    tail = records[-3:]
    if len(tail) >= 2 and psi_inf is not None:
        x_last = tail[-1].x
        stab = all(
            np.linalg.norm(r.x - x_last) <= TOL_SEP * (1 + np.linalg.norm(x_last))
            for r in tail
        )
        at_psi_min = abs(tail[-1].psi_val - psi_inf) <= 1e-8 * (1 + abs(psi_inf))
        if stab and at_psi_min and is_local_min_probe(phi, psi, lam, x_last, cfg=cfg):
            branch = "zero_is_local_min"
            records[-1] = CriticalPointRecord(
                x=x_last, phi_val=tail[-1].phi_val, psi_val=tail[-1].psi_val,
                grad_norm=tail[-1].grad_norm, kind="local_min", lam=lam,
            )
    if branch == "inconclusive":
        ok = _converging_evidence(critical, psi_inf)
        if ok:
            branch = "converging_sequence"
        else:
            notes.append(
                "no stabilization and insufficient distinct critical records "
                "with a decreasing Psi trend"
            )
    return MinimaSequence(lam, records, schedule, branch, notes)


def _converging_evidence(critical, psi_inf) -> bool:
    """>= 3 consecutive pairwise-distinct critical records whose Psi values
    decrease by factor >= 1.5 (measured above the Psi infimum)."""
    if psi_inf is None or len(critical) < 3:
        return False
    run = 1
    best_run = 1
    for a, b in zip(critical, critical[1:]):
        da = a.psi_val - psi_inf
        db = b.psi_val - psi_inf
        distinct = np.linalg.norm(a.x - b.x) >= TOL_SEP
        if distinct and db > 0 and da >= 1.5 * db:
            run += 1
            best_run = max(best_run, run)
        else:
            run = 1
    if best_run < 3:
        return False
    for i, a in enumerate(critical):
        for b in critical[i + 1:]:
            if np.linalg.norm(a.x - b.x) < TOL_SEP:
                return False
    return True


def ascending_alternative(
    phi: FunctionalOracle,
    psi: FunctionalOracle,
    lam: float,
    schedule: np.ndarray,
    domain: Optional[DomainSpec] = None,
    cfg: MultiStartConfig = DEFAULT_CONFIG,
    gamma_hint: Optional[float] = None,
) -> MinimaSequence:
    """Restricted minima along an increasing schedule.

    Branches: ``global_min_found`` when the minimizers stabilize and an
    expanding-box search confirms no better point exists; otherwise
    ``escaping_sequence`` when Psi(x_n) keeps growing past each predecessor.
    """
    schedule = np.asarray(schedule, dtype=float)
    if not np.all(np.diff(schedule) > 0):
        raise SublevelKitError("ascending schedule must strictly increase")
    if gamma_hint is not None and not lam > gamma_hint:
        warnings.warn(
            f"lambda={lam} is not above the gamma estimate {gamma_hint}",
            stacklevel=2,
        )
    notes = []
    records = []
    warm: list[np.ndarray] = []
    psi_inf_cache = None
    for rho in schedule:
        try:
            prob = SublevelProblem(phi, psi, float(rho), domain, cfg,
                                   psi_inf=psi_inf_cache)
        except SublevelKitError as exc:
            notes.append(f"level rho={rho:g} skipped: {exc}")
            continue
        psi_inf_cache = (prob.psi_inf, prob.psi_argmin)
        x = _level_minimizer(prob, lam, warm)
        warm = [x]
        records.append(_record_for(prob, lam, x))
    if not records:
        return MinimaSequence(lam, [], schedule, "inconclusive", notes)

    branch = "inconclusive"
    tail = records[-3:]
    x_last = tail[-1].x
    stabilized = len(tail) >= 3 and all(
        np.linalg.norm(r.x - x_last) <= TOL_SEP * (1 + np.linalg.norm(x_last))
        for r in tail
    )
    if stabilized:
        dom = domain if domain is not None else DomainSpec.all_space(phi.dim)

        def fg(x):
            return (phi.value(x) + lam * psi.value(x),
                    phi.grad(x) + lam * psi.grad(x))

        batch = None
        if phi.batch_value is not None and psi.batch_value is not None:
            batch = lambda X: phi.values(X) + lam * psi.values(X)
        search = engine.expanding_box_search(fg, dom, cfg, center=x_last,
                                             batch_f=batch)
        v_last = tail[-1].phi_val + lam * tail[-1].psi_val
        if search.value >= v_last - 1e-9 * (1 + abs(v_last)):
            branch = "global_min_found"
            records[-1] = CriticalPointRecord(
                x=x_last, phi_val=tail[-1].phi_val, psi_val=tail[-1].psi_val,
                grad_norm=tail[-1].grad_norm, kind="global_min", lam=lam,
            )
        else:
            notes.append(
                f"stabilized value {v_last} beaten by expanding search "
                f"({search.value}); not a global minimum"
            )
    else:
        psis = [r.psi_val for r in records]
        growing = sum(
            1 for a, b in zip(psis, psis[1:]) if b >= 1.5 * max(a, 1e-300)
        )
        persistent = all(b > a for a, b in zip(psis[-4:], psis[-3:])) if len(psis) >= 4 else False
        if growing >= 3 and persistent:
            branch = "escaping_sequence"
        else:
            notes.append("minimizers neither stabilized nor escaped persistently")
    return MinimaSequence(lam, records, schedule, branch, notes)


def is_local_min_probe(
    phi: FunctionalOracle,
    psi: FunctionalOracle,
    lam: float,
    x,
    eps_schedule=(1e-4, 1e-3, 1e-2),
    n_directions: int = 64,
    seed: int = 0,
    domain: Optional[DomainSpec] = None,
    cfg: MultiStartConfig = DEFAULT_CONFIG,
) -> bool:
    """Sampling probe: x passes when no sampled perturbation drops the
    composite below value(x) - 1e-12*(1+|value(x)|).  Not a certificate."""
    x = np.asarray(x, dtype=float)
    v0 = phi.value(x) + lam * psi.value(x)
    floor = v0 - 1e-12 * (1.0 + abs(v0))
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_directions, x.shape[0]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    for eps in eps_schedule:
        for u in dirs:
            p = x + eps * u
            if domain is not None:
                p = domain.project(p)
            if phi.value(p) + lam * psi.value(p) < floor:
                return False
    return True
