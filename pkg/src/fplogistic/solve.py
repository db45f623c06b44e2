"""Descent solvers, branch continuation, threshold detection, saddle search.

All solvers minimize an energy over cell functions with monotone Armijo
backtracking and Barzilai-Borwein trial steps.  Collapse of an iterate to the
zero function is detected by a sup-norm threshold and reported as its own
status: for the logistic energy the zero function is always a critical point,
and below the existence threshold it is the only one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .domain import Grid
from .eigen import EigenOptions, EigenPair, principal_eigenpair
from .kernel import KernelWeights
from .logistic import (Functional, LogisticParams, TruncKind, TruncatedReaction,
                       phi_functional, torsion_functional, truncated_functional,
                       _phi_energy, _phi_grad)
from .operator import DiscreteFunction, mass_dot, mass_norm

__all__ = [
    "SolverError",
    "Status",
    "SolveOptions",
    "SolveReport",
    "BranchPoint",
    "ThresholdReport",
    "MountainPassOptions",
    "minimize",
    "torsion_solve",
    "initial_values",
    "solve_branch_point",
    "lower_bound_lambda0",
    "detect_threshold",
    "mountain_pass",
]


class SolverError(RuntimeError):
    """Hard solver failure (non-finite energy, broken ordering, no start)."""


class Status(enum.Enum):
    CONVERGED = "converged"
    COLLAPSED = "collapsed"
    MAX_ITERS = "max_iters"
    NOT_FOUND = "not_found"


@dataclass
class SolveOptions:
    residual_tol: float = 1e-8
    max_iters: int = 50_000
    seed: int = 0
    initial: str = "eigen"          # zero | eigen | random
    initial_tau: float | None = None
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    collapse_tol: float = 1e-6      # times the domain diameter
    distinct_tol: float = 1e-6


@dataclass(eq=False)
class SolveReport:
    u: DiscreteFunction
    energy: float
    residual: float
    iterations: int
    status: Status


@dataclass(frozen=True)
class BranchPoint:
    lam: float
    sup_norm: float
    energy: float
    status: str


@dataclass(eq=False)
class ThresholdReport:
    lambda_star_h: float
    lambda_0: float
    bracket_width: float
    u_star: DiscreteFunction
    branch: list[BranchPoint] = field(default_factory=list)


@dataclass
class MountainPassOptions:
    nodes: int = 32
    path_tol: float = 1e-3
    max_sweeps: int = 3000


def _collapse_threshold(grid: Grid, opts: SolveOptions) -> float:
    return opts.collapse_tol * grid.domain.diameter


def _descend(func: Functional, u0: np.ndarray, grid: Grid,
             opts: SolveOptions) -> tuple[np.ndarray, float, float, int, Status]:
    """Core monotone descent; returns (u, energy, residual, iterations, status)."""
    meas = grid.measures
    collapse_thr = _collapse_threshold(grid, opts)
    u = np.asarray(u0, dtype=float).copy()
    energy = func.energy(u)
    if not np.isfinite(energy):
        raise SolverError(f"non-finite energy at the initial point ({energy})")
    g = func.gradient(u)
    res = mass_norm(g, meas)

    prev_u = prev_g = None
    step = 1.0
    it = 0
    below = 0
    free = False
    endgame_res = 1e3 * opts.residual_tol
    best_u, best_res, best_energy = u.copy(), res, energy
    status = Status.CONVERGED
    while res > opts.residual_tol:
        # a genuine collapse decays through the threshold and stays there;
        # require consecutive hits so a solution sitting just above the
        # threshold is not misclassified by a transient dip
        if np.abs(u).max() < collapse_thr:
            below += 1
            if below >= 3:
                status = Status.COLLAPSED
                break
        else:
            below = 0
        if it >= opts.max_iters:
            status = Status.MAX_ITERS
            break
        if prev_u is not None:
            du = u - prev_u
            dg = g - prev_g
            denom = mass_dot(du, dg, meas)
            if denom > 0.0:
                step = min(max(mass_dot(du, du, meas) / denom, 1e-14), 1e8)
        gg = res * res
        slack = 8.0 * np.finfo(float).eps * max(1.0, abs(energy))
        # near a minimum the energy decrease per step drops below the
        # rounding floor of the energy evaluation, whose cancellation noise
        # swamps the sufficient-decrease test; once the residual is small,
        # drop the line search and iterate plain Barzilai-Borwein steps,
        # which contract on the local quadratic basin without monotonicity
        if not free and res <= endgame_res \
                and opts.armijo_c * step * gg < 64.0 * slack:
            free = True
        if free:
            v = u - step * g
            ev = func.energy(v)
            if not np.isfinite(ev) or res > max(1e6 * endgame_res, 1.0):
                status = Status.MAX_ITERS
                break
        else:
            t = step
            accepted = False
            for _ in range(60):
                v = u - t * g
                ev = func.energy(v)
                if np.isfinite(ev) and ev <= energy - opts.armijo_c * t * gg + slack:
                    accepted = True
                    break
                t *= opts.armijo_shrink
            if not accepted:
                if res <= endgame_res:
                    free = True
                    continue
                status = Status.MAX_ITERS
                break
        prev_u, prev_g = u, g
        u, energy = v, ev
        g = func.gradient(u)
        res = mass_norm(g, meas)
        if res < best_res:
            best_u, best_res, best_energy = u.copy(), res, energy
        it += 1

    if status is Status.MAX_ITERS and best_res < res:
        u, res, energy = best_u, best_res, best_energy

    if func.nonneg_minimizer and status is not Status.COLLAPSED:
        clipped = np.maximum(u, 0.0)
        if not np.array_equal(clipped, u):
            u = clipped
            energy = func.energy(u)
            res = mass_norm(func.gradient(u), meas)
    if status is Status.CONVERGED and res > opts.residual_tol:
        status = Status.MAX_ITERS
    if np.abs(u).max() < collapse_thr:
        status = Status.COLLAPSED
    return u, energy, res, it, status


def minimize(func: Functional, u0: DiscreteFunction,
             opts: SolveOptions | None = None) -> SolveReport:
    """Descend an energy functional from u0.

    The energy sequence is nonincreasing up to the rounding floor of the
    energy evaluation.  An exact critical point returns immediately with
    zero iterations.
    """
    opts = opts or SolveOptions()
    u, energy, res, it, status = _descend(func, u0.values, u0.grid, opts)
    return SolveReport(
        u=DiscreteFunction(u, u0.grid),
        energy=energy,
        residual=res,
        iterations=it,
        status=status,
    )


def torsion_solve(kw: KernelWeights, grid: Grid, p: float,
                  opts: SolveOptions | None = None,
                  u0: DiscreteFunction | None = None) -> SolveReport:
    """Solve L u = 1: the positive barrier whose profile matches d(x)^s."""
    opts = opts or SolveOptions()
    func = torsion_functional(kw, grid, p)
    if u0 is None:
        u0 = DiscreteFunction(np.full(grid.ncells, 0.1), grid)
    rep = minimize(func, u0, opts)
    if rep.status is not Status.CONVERGED:
        raise SolverError(
            f"torsion solve did not converge: status {rep.status.value}, "
            f"residual {rep.residual:.3e}")
    return rep


def initial_values(kind: str, grid: Grid, kw: KernelWeights,
                   lp: LogisticParams, opts: SolveOptions,
                   eigen: EigenPair | None = None) -> np.ndarray:
    """Build a starting iterate: zero, seeded random, or a scan along u1.

    The eigen start evaluates the free energy along tau * u1 over a log grid
    of amplitudes and returns the best one, which lands the descent in the
    nontrivial basin whenever the energy dips below zero along that ray.
    """
    if kind == "zero":
        return np.zeros(grid.ncells)
    if kind == "random":
        rng = np.random.default_rng(opts.seed)
        return rng.uniform(0.1, 1.0, size=grid.ncells)
    if kind == "eigen":
        if eigen is None:
            eigen = principal_eigenpair(kw, grid, lp.p, EigenOptions(seed=opts.seed))
        base = eigen.u1.values
        if opts.initial_tau is not None:
            return opts.initial_tau * base
        taus = np.geomspace(1e-6, 1e4, 101)
        vals = np.array([_phi_energy(t * base, kw, lp, grid.measures) for t in taus])
        if vals.min() >= 0.0:
            # no negative dip along the ray: the zero basin is the only
            # one visible from here, so collapse cleanly from the origin
            return np.zeros(grid.ncells)
        return taus[int(np.argmin(vals))] * base
    raise ValueError(f"unknown initial guess kind: {kind}")


def solve_branch_point(lam: float, warm: DiscreteFunction | None, params,
                       kw: KernelWeights, grid: Grid,
                       opts: SolveOptions | None = None,
                       eigen: EigenPair | None = None) -> SolveReport:
    """Solve the logistic problem at one intensity.

    With a warm start from a converged solution at a smaller intensity, the
    reaction is frozen below the warm profile; minimizers of the frozen
    energy dominate the warm profile, which propagates the ordering of the
    branch.  A final polish on the untruncated energy confirms the residual.
    """
    opts = opts or SolveOptions()
    lp = LogisticParams(lam=lam, p=params.p, q=params.q, r=params.r)
    func = phi_functional(kw, grid, lp)
    if warm is None:
        u0 = initial_values(opts.initial, grid, kw, lp, opts, eigen)
        return minimize(func, DiscreteFunction(u0, grid), opts)

    tr = TruncatedReaction(TruncKind.LOWER, anchor=warm, base=lp)
    frozen = truncated_functional(kw, grid, tr)
    rep = minimize(frozen, warm, opts)
    polished = minimize(func, rep.u, opts)
    gap = float((warm.values - polished.u.values).max())
    sup = max(polished.u.sup_norm(), warm.sup_norm())
    if gap > 1e-6 * sup:
        raise SolverError(
            f"warm-started solve lost the branch ordering (max violation {gap:.3e})")
    ordered = np.maximum(polished.u.values, warm.values)
    if not np.array_equal(ordered, polished.u.values):
        polished = SolveReport(
            u=DiscreteFunction(ordered, grid),
            energy=func.energy(ordered),
            residual=mass_norm(func.gradient(ordered), grid.measures),
            iterations=polished.iterations,
            status=polished.status,
        )
    return polished


def lower_bound_lambda0(params, lambda1: float) -> float:
    """Analytic positive lower bound for the existence threshold (q > p).

    The reaction stays below lambda1 * t^(p-1) for every t > 0 exactly when
    lam <= min over t of [lambda1 t^(p-q) + t^(r-q)], minimized in closed
    form; below the bound any nonnegative critical point is zero.
    """
    p, q, r = params.p, params.q, params.r
    if q <= p:
        raise ValueError(f"lower bound requires q > p, got q = {q}, p = {p}")
    if lambda1 <= 0.0:
        raise ValueError(f"lambda1 must be positive, got {lambda1}")
    t_star = (lambda1 * (q - p) / (r - q)) ** (1.0 / (r - p))
    return lambda1 * t_star ** (p - q) + t_star ** (r - q)


def _nontrivial(rep: SolveReport, grid: Grid, opts: SolveOptions) -> bool:
    return (rep.status is Status.CONVERGED
            and rep.u.sup_norm() > _collapse_threshold(grid, opts))


def _probe(lam: float, u_start: np.ndarray, lp_proto, kw, grid, opts) -> SolveReport:
    lp = LogisticParams(lam=lam, p=lp_proto.p, q=lp_proto.q, r=lp_proto.r)
    func = phi_functional(kw, grid, lp)
    rep = minimize(func, DiscreteFunction(u_start, grid), opts)
    if rep.status is Status.MAX_ITERS:
        raise SolverError(
            f"threshold probe at lam = {lam:.6g} hit the iteration cap "
            f"(residual {rep.residual:.3e}); raise max_iters")
    return rep


def detect_threshold(params, kw: KernelWeights, grid: Grid,
                     opts: SolveOptions | None = None,
                     bracket_tol: float = 1e-3,
                     lambda_high: float | None = None,
                     eigen: EigenPair | None = None,
                     continuation_factor: float = 0.9) -> ThresholdReport:
    """Locate the smallest solvable intensity by continuation plus bisection.

    Starting from a solvable high intensity, the branch is continued downward
    with warm starts until the iterate collapses, then the bracket is
    bisected.  The result is checked against the analytic lower bound.
    """
    opts = opts or SolveOptions()
    if eigen is None:
        eigen = principal_eigenpair(kw, grid, params.p, EigenOptions(seed=opts.seed))
    lam0 = lower_bound_lambda0(params, eigen.lambda1)
    lp_proto = LogisticParams(lam=1.0, p=params.p, q=params.q, r=params.r)

    def cold(lam: float) -> SolveReport:
        lp = LogisticParams(lam=lam, p=params.p, q=params.q, r=params.r)
        u0 = initial_values("eigen", grid, kw, lp, opts, eigen)
        return _probe(lam, u0, lp_proto, kw, grid, opts)

    branch: list[tuple[float, SolveReport]] = []
    if lambda_high is not None:
        lam_hi = lambda_high
        rep = cold(lam_hi)
        if not _nontrivial(rep, grid, opts):
            raise SolverError(
                f"no solvable starting point: lam_high = {lam_hi:.6g} collapsed")
    else:
        lam_hi = 4.0 * lam0
        rep = cold(lam_hi)
        while not _nontrivial(rep, grid, opts):
            lam_hi *= 2.0
            if lam_hi > 1024.0 * lam0:
                raise SolverError(
                    "no solvable starting point found; pass lambda_high explicitly")
            rep = cold(lam_hi)
    branch.append((lam_hi, rep))

    lam_yes, u_yes = lam_hi, rep.u.values
    lam_no = None
    lam = lam_hi
    for _ in range(400):
        lam = lam * continuation_factor
        rep = _probe(lam, u_yes, lp_proto, kw, grid, opts)
        if _nontrivial(rep, grid, opts):
            branch.append((lam, rep))
            lam_yes, u_yes = lam, rep.u.values
        else:
            lam_no = lam
            break
    if lam_no is None:
        raise SolverError("continuation never collapsed; lower bound violated")

    while lam_yes - lam_no > bracket_tol:
        mid = 0.5 * (lam_yes + lam_no)
        rep = _probe(mid, u_yes, lp_proto, kw, grid, opts)
        if _nontrivial(rep, grid, opts):
            branch.append((mid, rep))
            lam_yes, u_yes = mid, rep.u.values
        else:
            lam_no = mid

    if lam_yes < lam0 * (1.0 - 1e-9):
        raise SolverError(
            f"threshold {lam_yes:.6g} fell below the analytic bound {lam0:.6g}")

    branch.sort(key=lambda t: t[0])
    points = [BranchPoint(lam=l, sup_norm=r.u.sup_norm(), energy=r.energy,
                          status=r.status.value) for l, r in branch]
    u_star = next(r.u for l, r in branch if l == lam_yes)
    return ThresholdReport(
        lambda_star_h=lam_yes,
        lambda_0=lam0,
        bracket_width=lam_yes - lam_no,
        u_star=u_star,
        branch=points,
    )


def _respline(path: list[np.ndarray], meas: np.ndarray) -> list[np.ndarray]:
    """Redistribute path nodes to uniform arc length in the mass metric."""
    m = len(path)
    seg = np.array([mass_norm(path[k + 1] - path[k], meas) for k in range(m - 1)])
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    if cum[-1] == 0.0:
        return path
    fracs = np.linspace(0.0, 1.0, m) * cum[-1]
    stacked = np.stack(path)
    out = [path[0]]
    for f in fracs[1:-1]:
        k = int(np.searchsorted(cum, f, side="right")) - 1
        k = min(k, m - 2)
        w = (f - cum[k]) / seg[k] if seg[k] > 0 else 0.0
        out.append((1.0 - w) * stacked[k] + w * stacked[k + 1])
    out.append(path[-1])
    return out


def mountain_pass(lam: float, params, kw: KernelWeights, grid: Grid,
                  u_lam: DiscreteFunction, opts: SolveOptions | None = None,
                  mp: MountainPassOptions | None = None) -> SolveReport:
    """Search for the second solution between zero and the branch solution.

    The reaction is capped above the known solution, which makes zero a
    strict local minimum while keeping every critical point below the known
    solution.  A discretized path from zero to the solution is deformed by
    descending its maximal node transversally; the resulting saddle estimate
    is polished by descent on the squared residual.
    """
    opts = opts or SolveOptions()
    mp = mp or MountainPassOptions()
    lp = LogisticParams(lam=lam, p=params.p, q=params.q, r=params.r)
    tr = TruncatedReaction(TruncKind.UPPER, anchor=u_lam, base=lp)
    func = truncated_functional(kw, grid, tr)
    meas = grid.measures

    m = mp.nodes
    fracs = np.linspace(0.0, 1.0, m)
    path = [f * u_lam.values for f in fracs]
    e_ends = max(func.energy(path[0]), func.energy(path[-1]))
    scale = max(1.0, abs(e_ends))

    step = 1.0
    sweeps = 0
    k = 1
    for sweeps in range(mp.max_sweeps):
        energies = [func.energy(z) for z in path]
        k = 1 + int(np.argmax(energies[1:-1]))
        g = func.gradient(path[k])
        res = mass_norm(g, meas)
        if res <= mp.path_tol:
            break
        tau = path[k + 1] - path[k - 1]
        tt = mass_dot(tau, tau, meas)
        gperp = g - (mass_dot(g, tau, meas) / tt) * tau if tt > 0 else g
        ek = energies[k]
        gg = mass_dot(gperp, gperp, meas)
        if gg == 0.0:
            break
        t = step
        slack = 8.0 * np.finfo(float).eps * max(1.0, abs(ek))
        for _ in range(60):
            znew = path[k] - t * gperp
            enew = func.energy(znew)
            if np.isfinite(enew) and enew <= ek - opts.armijo_c * t * gg + slack:
                path[k] = znew
                step = min(t * 2.0, 1e6)
                break
            t *= opts.armijo_shrink
        path = _respline(path, meas)

    energies = [func.energy(z) for z in path]
    peak = max(energies[1:-1])
    if peak <= e_ends + 1e-12 * scale:
        return SolveReport(u=DiscreteFunction(path[k].copy(), grid),
                           energy=peak, residual=float("nan"),
                           iterations=sweeps, status=Status.NOT_FOUND)

    # polish: descend Psi(u) = 0.5 |grad|^2 via finite-difference curvature action
    u = path[int(1 + np.argmax(energies[1:-1]))].copy()
    g = func.gradient(u)
    psi = 0.5 * mass_dot(g, g, meas)
    prev_u = prev_d = None
    step = 1e-2
    it = 0
    while it < opts.max_iters:
        res = (2.0 * psi) ** 0.5
        if res <= opts.residual_tol:
            break
        gn = mass_norm(g, meas)
        eps = 1e-6 * (1.0 + np.abs(u).max()) / max(gn, 1e-300)
        d = (func.gradient(u + eps * g) - func.gradient(u - eps * g)) / (2.0 * eps)
        dd = mass_dot(d, d, meas)
        if dd == 0.0:
            break
        if prev_u is not None:
            du = u - prev_u
            dg = d - prev_d
            denom = mass_dot(du, dg, meas)
            if denom > 0.0:
                step = min(max(mass_dot(du, du, meas) / denom, 1e-14), 1e8)
        t = step
        slack = 8.0 * np.finfo(float).eps * psi
        accepted = False
        for _ in range(60):
            v = u - t * d
            gv = func.gradient(v)
            psiv = 0.5 * mass_dot(gv, gv, meas)
            if np.isfinite(psiv) and psiv <= psi - opts.armijo_c * t * dd + slack:
                accepted = True
                break
            t *= opts.armijo_shrink
        if not accepted:
            break
        prev_u, prev_d = u, d
        u, g, psi = v, gv, psiv
        it += 1

    v = np.minimum(np.maximum(u, 0.0), u_lam.values)
    func_plain = phi_functional(kw, grid, lp)
    res = mass_norm(func_plain.gradient(v), meas)
    energy = func_plain.energy(v)
    status = Status.CONVERGED if res <= opts.residual_tol else Status.MAX_ITERS
    gap_zero = float(np.abs(v).max())
    gap_top = float(np.abs(u_lam.values - v).max())
    if status is Status.CONVERGED and (gap_zero <= opts.distinct_tol
                                       or gap_top <= opts.distinct_tol):
        status = Status.NOT_FOUND
    return SolveReport(u=DiscreteFunction(v, grid), energy=energy,
                       residual=res, iterations=sweeps + it, status=status)
