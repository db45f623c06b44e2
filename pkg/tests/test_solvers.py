from __future__ import annotations

import numpy as np
import pytest

from fplogistic.domain import DomainSpec, build_grid
from fplogistic.eigen import EigenOptions, principal_eigenpair
from fplogistic.kernel import assemble
from fplogistic.logistic import LogisticParams, phi_functional
from fplogistic.operator import DiscreteFunction, apply_operator, mass_norm
from fplogistic.solve import (MountainPassOptions, SolveOptions, SolveReport,
                              SolverError, Status, detect_threshold,
                              initial_values, lower_bound_lambda0, minimize,
                              mountain_pass, solve_branch_point, torsion_solve)


@pytest.fixture(scope="module")
def grid16(unit_interval):
    return build_grid(unit_interval, 16)


@pytest.fixture(scope="module")
def kw16_super(grid16, super_params):
    return assemble(grid16, super_params)


@pytest.fixture(scope="module")
def eig32(kw32, grid32):
    return principal_eigenpair(kw32, grid32, 2.0, EigenOptions(seed=0))


def test_status_labels():
    assert Status.CONVERGED.value == "converged"
    assert Status.COLLAPSED.value == "collapsed"
    assert Status.MAX_ITERS.value == "max_iters"
    assert Status.NOT_FOUND.value == "not_found"


def test_zero_start_is_exact_critical_point(grid32, kw32):
    lp = LogisticParams(lam=1.0, p=2.0, q=1.5, r=3.0)
    func = phi_functional(kw32, grid32, lp)
    rep = minimize(func, DiscreteFunction(np.zeros(32), grid32))
    assert rep.iterations == 0
    assert rep.status is Status.COLLAPSED
    assert rep.u.sup_norm() == 0.0


def test_max_iters_status(grid32, kw32, rng):
    lp = LogisticParams(lam=1.0, p=2.0, q=1.5, r=3.0)
    func = phi_functional(kw32, grid32, lp)
    u0 = DiscreteFunction(rng.uniform(0.1, 1.0, 32), grid32)
    rep = minimize(func, u0, SolveOptions(max_iters=1))
    assert rep.status is Status.MAX_ITERS
    assert rep.iterations == 1


def test_sub_regime_starts_agree(grid32, kw32, sub_params, eig32):
    sups = []
    for seed in range(3):
        opts = SolveOptions(seed=seed, initial="random")
        rep = solve_branch_point(1.0, None, sub_params, kw32, grid32, opts,
                                 eigen=eig32)
        assert rep.status is Status.CONVERGED
        assert rep.u.values.min() > 0.0
        sups.append(rep.u.values.copy())
    for other in sups[1:]:
        assert other == pytest.approx(sups[0], rel=1e-6, abs=1e-8)


def test_restart_from_solution_is_immediate(grid32, kw32, sub_params, eig32):
    rep = solve_branch_point(1.0, None, sub_params, kw32, grid32,
                             SolveOptions(), eigen=eig32)
    again = solve_branch_point(1.0, None, sub_params, kw32, grid32,
                               SolveOptions(initial="eigen",
                                            initial_tau=None), eigen=eig32)
    lp = LogisticParams(lam=1.0, p=2.0, q=1.5, r=3.0)
    func = phi_functional(kw32, grid32, lp)
    refined = minimize(func, rep.u, SolveOptions())
    assert refined.iterations == 0
    assert refined.status is Status.CONVERGED
    assert again.u.values == pytest.approx(rep.u.values, rel=1e-6)


def test_warm_start_preserves_ordering(grid32, kw32, sub_params, eig32):
    low = solve_branch_point(1.0, None, sub_params, kw32, grid32,
                             SolveOptions(), eigen=eig32)
    high = solve_branch_point(2.0, low.u, sub_params, kw32, grid32,
                              SolveOptions(), eigen=eig32)
    assert high.status is Status.CONVERGED
    assert np.all(high.u.values >= low.u.values)
    assert high.u.sup_norm() > low.u.sup_norm()


def test_warm_start_ordering_violation_raises(grid32, kw32, sub_params, eig32):
    huge = DiscreteFunction(np.full(32, 50.0), grid32)
    with pytest.raises(SolverError, match="ordering"):
        solve_branch_point(0.5, huge, sub_params, kw32, grid32,
                           SolveOptions(), eigen=eig32)


def test_collapse_below_linear_threshold(grid32, equi_params, eig32):
    kw = assemble(grid32, equi_params)
    eig = principal_eigenpair(kw, grid32, 2.0, EigenOptions(seed=0))
    lam = 0.5 * eig.lambda1
    rep = solve_branch_point(lam, None, equi_params, kw, grid32,
                             SolveOptions(initial="random", seed=3), eigen=eig)
    assert rep.status is Status.COLLAPSED
    assert rep.u.sup_norm() <= 1e-6


def test_initial_values_kinds(grid32, kw32, eig32):
    lp = LogisticParams(lam=1.0, p=2.0, q=1.5, r=3.0)
    opts = SolveOptions(seed=5)
    assert np.all(initial_values("zero", grid32, kw32, lp, opts) == 0.0)
    r1 = initial_values("random", grid32, kw32, lp, opts)
    r2 = initial_values("random", grid32, kw32, lp, SolveOptions(seed=5))
    assert np.array_equal(r1, r2)
    assert r1.min() >= 0.1 and r1.max() < 1.0
    tau = initial_values("eigen", grid32, kw32, lp,
                         SolveOptions(initial_tau=2.0), eigen=eig32)
    assert tau == pytest.approx(2.0 * eig32.u1.values, rel=1e-14)
    with pytest.raises(ValueError, match="unknown"):
        initial_values("best", grid32, kw32, lp, opts)


def test_eigen_start_returns_zero_without_negative_dip(grid32, equi_params):
    # below the linear threshold the energy is positive along the whole ray,
    # so the scan hands back the origin and the solve collapses cleanly
    kw = assemble(grid32, equi_params)
    eig = principal_eigenpair(kw, grid32, 2.0, EigenOptions(seed=0))
    lp = LogisticParams(lam=0.9 * eig.lambda1, p=2.0, q=2.0, r=3.0)
    u0 = initial_values("eigen", grid32, kw, lp, SolveOptions(), eigen=eig)
    assert np.all(u0 == 0.0)


def test_lower_bound_closed_form(super_params):
    # p = 2, q = 3, r = 4 gives min_t [lambda1 / t + t] = 2 sqrt(lambda1)
    assert lower_bound_lambda0(super_params, 25.0) == pytest.approx(10.0,
                                                                    rel=1e-14)
    assert lower_bound_lambda0(super_params, 4.0) == pytest.approx(4.0,
                                                                   rel=1e-14)


def test_lower_bound_rejects_bad_inputs(sub_params, super_params):
    with pytest.raises(ValueError, match="q > p"):
        lower_bound_lambda0(sub_params, 10.0)
    with pytest.raises(ValueError, match="lambda1"):
        lower_bound_lambda0(super_params, 0.0)


def test_detect_threshold_invariants(grid16, kw16_super, super_params):
    report = detect_threshold(super_params, kw16_super, grid16,
                              SolveOptions(), bracket_tol=1e-2)
    assert report.lambda_star_h >= report.lambda_0
    assert 0.0 < report.bracket_width <= 1e-2
    lams = [pt.lam for pt in report.branch]
    assert lams == sorted(lams)
    assert all(pt.status == "converged" for pt in report.branch)
    sups = [pt.sup_norm for pt in report.branch]
    assert all(b < a for a, b in zip(sups[::-1], sups[::-1][1:]))
    assert report.u_star.values.min() > 0.0
    assert report.branch[0].lam == pytest.approx(report.lambda_star_h)


def test_threshold_probe_iteration_cap_raises(grid16, kw16_super,
                                              super_params):
    eig = principal_eigenpair(kw16_super, grid16, 2.0, EigenOptions(seed=0))
    with pytest.raises(SolverError, match="max_iters"):
        detect_threshold(super_params, kw16_super, grid16,
                         SolveOptions(max_iters=3), bracket_tol=1e-2,
                         eigen=eig)


def test_detect_threshold_accepts_explicit_start(grid16, kw16_super,
                                                 super_params):
    eig = principal_eigenpair(kw16_super, grid16, 2.0, EigenOptions(seed=0))
    lam0 = lower_bound_lambda0(super_params, eig.lambda1)
    report = detect_threshold(super_params, kw16_super, grid16,
                              SolveOptions(), bracket_tol=5e-2,
                              lambda_high=3.0 * lam0, eigen=eig)
    assert report.lambda_star_h >= lam0
    with pytest.raises(SolverError, match="collapsed"):
        detect_threshold(super_params, kw16_super, grid16, SolveOptions(),
                         lambda_high=0.5 * lam0, eigen=eig)


def test_mountain_pass_finds_saddle(grid16, kw16_super, super_params):
    eig = principal_eigenpair(kw16_super, grid16, 2.0, EigenOptions(seed=0))
    report = detect_threshold(super_params, kw16_super, grid16,
                              SolveOptions(), bracket_tol=1e-2, eigen=eig)
    lam = 1.5 * report.lambda_star_h
    big = solve_branch_point(lam, report.u_star, super_params, kw16_super,
                             grid16, SolveOptions(), eigen=eig)
    rep = mountain_pass(lam, super_params, kw16_super, grid16, big.u,
                        SolveOptions(), MountainPassOptions())
    assert rep.status is Status.CONVERGED
    v = rep.u.values
    assert 0.0 < rep.u.sup_norm() < big.u.sup_norm()
    assert np.all(v >= 0.0)
    assert np.all(v <= big.u.values + 1e-12)


def test_mountain_pass_not_found_without_barrier(grid32, kw32, sub_params,
                                                 eig32):
    # in the sublinear regime zero is not a separated local minimum, so the
    # deformed path peak stays at the endpoint level
    rep = solve_branch_point(1.0, None, sub_params, kw32, grid32,
                             SolveOptions(), eigen=eig32)
    mp = mountain_pass(1.0, sub_params, kw32, grid32, rep.u, SolveOptions(),
                       MountainPassOptions())
    assert mp.status is Status.NOT_FOUND


def test_torsion_solve(grid32, kw32):
    rep = torsion_solve(kw32, grid32, 2.0, SolveOptions())
    assert rep.status is Status.CONVERGED
    assert rep.u.values.min() > 0.0
    lu = apply_operator(rep.u, kw32, 2.0)
    assert mass_norm(lu.values - 1.0, grid32.measures) <= 1e-6


def test_torsion_solve_raises_on_cap(grid32, kw32):
    with pytest.raises(SolverError, match="torsion"):
        torsion_solve(kw32, grid32, 2.0, SolveOptions(max_iters=1))
