"""Oracle interface, builtin library, gradient and coercivity checks."""

import numpy as np
import pytest

from sublevelkit.errors import CapabilityError, OracleFaultError, UsageError
from sublevelkit.functionals import (
    DomainSpec,
    FunctionalOracle,
    builtin_library,
    builtin_pair,
    builtin_potential,
    check_gradient,
    evaluate,
    probe_coercivity,
    random_convex_quadratic_pair,
)


def test_evaluate_builtin_values():
    lin = builtin_pair("LINEAR")
    assert evaluate(lin.phi, [3.0]) == -6.0
    quad = builtin_pair("QUAD")
    assert evaluate(quad.psi, [-2.0]) == 4.0
    osc = builtin_pair("OSC")
    assert evaluate(osc.phi, [0.0]) == 0.0


def test_evaluate_dimension_mismatch():
    quad = builtin_pair("QUAD")
    with pytest.raises(UsageError):
        evaluate(quad.phi, [1.0, 2.0])


def test_evaluate_domain_violation():
    lin = builtin_pair("LINEAR")
    with pytest.raises(UsageError):
        evaluate(lin.phi, [-1.0], domain=lin.domain)


def test_oracle_fault_on_nonfinite():
    bad = FunctionalOracle(dim=1, value=lambda x: float("nan"), label="bad")
    with pytest.raises(OracleFaultError):
        evaluate(bad, [1.0])


def test_check_gradient_quad_and_linear():
    quad = builtin_pair("QUAD")
    rep = check_gradient(quad.psi, [[1.0], [-3.0]], h=1e-6, tol_rel=1e-5)
    assert rep.passed
    lin = builtin_pair("LINEAR")
    rep = check_gradient(lin.phi, [[0.5], [2.0]], h=1e-6, tol_rel=1e-5)
    assert rep.passed and rep.max_rel_error < 1e-9


def test_check_gradient_requires_gradient():
    plain = FunctionalOracle(dim=1, value=lambda x: float(x[0]), label="nograd")
    with pytest.raises(CapabilityError):
        check_gradient(plain, [[1.0]])


def test_gradient_consistency_all_builtins(rng):
    """Every builtin with a gradient passes the central-difference check at
    tol_rel=1e-5, h=1e-6, on 100 seeded sample points."""
    pairs, potentials = builtin_library()
    oracles = []
    for p in pairs:
        oracles += [(p.phi, p.domain), (p.psi, p.domain)]
    oracles += [(pot.potential, None) for pot in potentials]
    for oracle, domain in oracles:
        if oracle.gradient is None:
            continue
        pts = rng.uniform(-3.0, 3.0, size=(100, oracle.dim))
        if oracle.label.startswith(("OSC", "P_osc")):
            # keep clear of the oscillation zone near 0 where the third
            # derivative overwhelms second-order finite differences
            pts = np.where(np.abs(pts) < 0.05, pts + 0.2, pts)
        if domain is not None:
            pts = np.array([domain.project(p) for p in pts])
        rep = check_gradient(oracle, pts, h=1e-6, tol_rel=1e-5)
        assert rep.passed, f"{oracle.label}: {rep.max_rel_error}"


def test_builtin_determinism():
    osc = builtin_pair("OSC")
    x = np.array([0.3171])
    assert osc.phi.value(x) == osc.phi.value(x.copy())


def test_osc_bounded_by_three_x_squared(rng):
    osc = builtin_pair("OSC")
    xs = rng.uniform(-2, 2, size=500)
    vals = osc.phi.values(xs[:, None])
    assert np.all(np.abs(vals) <= 3.0 * xs**2 + 1e-15)


def test_coercivity_probe():
    quad = builtin_pair("QUAD")
    assert probe_coercivity(quad.psi)
    lin = builtin_pair("LINEAR")
    assert probe_coercivity(lin.psi, domain=lin.domain)
    flat = FunctionalOracle(dim=2, value=lambda x: 1.0, label="flat")
    assert not probe_coercivity(flat)


def test_linear_domain_is_halfspace():
    lin = builtin_pair("LINEAR")
    assert lin.domain.kind == "halfspace_product"
    assert lin.domain.lower[0] == 0.0 and np.isinf(lin.domain.upper[0])
    assert lin.domain.contains(np.array([5.0]))
    assert not lin.domain.contains(np.array([-1e-6]))


def test_domain_validation():
    with pytest.raises(UsageError):
        DomainSpec.box([1.0], [0.0])


def test_random_pair_reproducible():
    p1, m1 = random_convex_quadratic_pair(5, 71)
    p2, m2 = random_convex_quadratic_pair(5, 71)
    assert np.array_equal(m1.A, m2.A) and np.array_equal(m1.B, m2.B)
    assert np.array_equal(m1.b, m2.b) and m1.c == m2.c
    x = np.linspace(-1, 1, 5)
    assert p1.phi.value(x) == p2.phi.value(x)
    p3, m3 = random_convex_quadratic_pair(5, 72)
    assert not np.array_equal(m1.A, m3.A)


def test_random_pair_convexity_and_coercivity():
    _, meta = random_convex_quadratic_pair(6, 3)
    assert np.all(np.linalg.eigvalsh(meta.A) > 0)
    assert np.all(np.linalg.eigvalsh(meta.B) >= 0.5 - 1e-9)


def test_posc_growth_witness():
    """sup_{|x|<=r} P / r^2 dips below 0.25 and exceeds 0.75 on a log grid."""
    posc = builtin_potential("P_osc")
    xs = np.linspace(0, 1.2e4, 2_000_001)
    vals = posc.potential.values(xs[:, None])
    sup = np.maximum.accumulate(vals)
    ratios = []
    for r in np.geomspace(1.0, 1e4, 64):
        i = int(np.searchsorted(xs, r))
        ratios.append(sup[min(i, len(xs) - 1)] / r**2)
    ratios = np.array(ratios)
    assert (ratios < 0.25).sum() >= 3
    assert (ratios > 0.75).sum() >= 3


def test_builtin_potentials():
    pk = builtin_potential("P_k", k=0.25, dim=3)
    x = np.array([1.0, 2.0, -1.0])
    assert pk.potential.value(x) == 0.25 * 6.0
    assert np.allclose(pk.potential.grad(x), 0.5 * x)
    pz = builtin_potential("P_zero", dim=2)
    assert pz.potential.value(np.ones(2)) == 0.0


def test_unknown_builtin():
    with pytest.raises(UsageError):
        builtin_pair("NOPE")
    with pytest.raises(UsageError):
        builtin_potential("NOPE")
