"""Kernel weights for the nonlocal cell energy.

For cells C_i the discrete energy needs the pair weights

    W_ij = int_{C_i} int_{C_j} |x - y|^(-(N + p*s)) dy dx,   i != j,

and the exterior weights

    V_i = int_{C_i} int_{complement of the domain} |x - y|^(-(N + p*s)) dy dx.

In one dimension both are exact twice-iterated antiderivatives of the kernel.
In two dimensions the double integral over a cell pair is reduced to

    int k(t) * C(t) dt,   C(t) = |A ∩ (B + t)| = c_1(t_1) * c_2(t_2),

where each c_d is a piecewise-linear interval-overlap profile.  Along any ray
from the origin the product profile is piecewise quadratic in the radius, so
the radial integral against r^(-1-ps) has a closed form; only the angular
integral is numerical (adaptive Gauss panels split at the profile corner
directions).  The exterior weight uses the same machinery with
C(t) = |cell| - |cell ∩ (domain + t)|, whose radial tail gives the analytic
far-field term |cell| * R^(-ps) / ps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import DomainSpec, Grid

__all__ = [
    "KernelError",
    "KernelWeights",
    "pair_weight_1d",
    "exterior_weight_1d",
    "pair_weight_2d",
    "exterior_weight_2d",
    "radial_exterior_tail",
    "assemble",
    "save_weights",
    "load_weights",
]

# Dense storage cap: ncells**2 weights at 8 bytes each (4096 cells = 128 MiB).
MAX_DENSE_CELLS = 4096


class KernelError(RuntimeError):
    """A singular weight integral diverged or failed to converge."""


@dataclass(frozen=True, eq=False)
class KernelWeights:
    """Assembled pair and exterior weights with a parameter snapshot."""

    W: np.ndarray  # (m, m) symmetric, zero diagonal
    V: np.ndarray  # (m,)
    dim: int
    s: float
    p: float

    @property
    def ncells(self) -> int:
        return self.V.shape[0]

    @property
    def ps(self) -> float:
        return self.p * self.s


# ----------------------------------------------------------------------
# one dimension: exact antiderivatives
# ----------------------------------------------------------------------

def _k2(t: float, beta: float) -> float:
    """Second antiderivative of t^(-beta), vanishing at 0 (beta in (1,2))."""
    if t <= 0.0:
        return 0.0
    return t ** (2.0 - beta) / ((1.0 - beta) * (2.0 - beta))


def pair_weight_1d(cell_a: tuple[float, float], cell_b: tuple[float, float],
                   beta: float) -> float:
    """Exact double integral of |x-y|^(-beta) over two disjoint intervals.

    beta = 1 + p*s must lie in (1, 2); touching intervals are allowed.
    """
    if not 1.0 < beta < 2.0:
        raise ValueError(f"beta must lie in (1,2), got {beta}")
    a1, a2 = float(cell_a[0]), float(cell_a[1])
    b1, b2 = float(cell_b[0]), float(cell_b[1])
    if not (a2 > a1 and b2 > b1):
        raise ValueError(f"degenerate cell: {cell_a}, {cell_b}")
    if b1 < a1:
        a1, a2, b1, b2 = b1, b2, a1, a2
    gap_tol = 1e-12 * max(a2 - a1, b2 - b1)
    if b1 < a2 - gap_tol:
        raise ValueError(f"cells overlap: {cell_a}, {cell_b}")
    b1 = max(b1, a2)
    return (_k2(b2 - a1, beta) - _k2(b2 - a2, beta)
            - _k2(b1 - a1, beta) + _k2(b1 - a2, beta))


def exterior_weight_1d(cell: tuple[float, float], domain: tuple[float, float],
                       beta: float) -> float:
    """Exact integral of the kernel between an interior cell and the exterior.

    The inner integral over each exterior tail of (a, b) is d^(-ps)/ps with d
    the distance to the nearer endpoint; the outer integral over the cell is
    again exact.  Requires ps = beta - 1 in (0, 1).
    """
    if not 1.0 < beta < 2.0:
        raise ValueError(f"beta must lie in (1,2), got {beta}")
    ps = beta - 1.0
    c1, c2 = float(cell[0]), float(cell[1])
    a, b = float(domain[0]), float(domain[1])
    if not (c2 > c1 and b > a):
        raise ValueError(f"degenerate cell or domain: {cell}, {domain}")
    tol = 1e-12 * (b - a)
    if c1 < a - tol or c2 > b + tol:
        raise ValueError(f"cell {cell} not contained in domain {domain}")

    def a1(t: float) -> float:
        # antiderivative of t^(-ps), vanishing at 0
        return 0.0 if t <= 0.0 else t ** (1.0 - ps) / (1.0 - ps)

    left = a1(c2 - a) - a1(c1 - a)
    right = a1(b - c1) - a1(b - c2)
    return (left + right) / ps


def radial_exterior_tail(radius: float, dim: int, ps: float) -> float:
    """Integral of |z|^(-(dim+ps)) over the complement of a ball of the given radius."""
    if radius <= 0.0:
        raise ValueError(f"radius must be positive, got {radius}")
    sigma = 2.0 if dim == 1 else 2.0 * math.pi
    return sigma * radius ** (-ps) / ps


# ----------------------------------------------------------------------
# two dimensions: exact radial integrals, adaptive angular panels
# ----------------------------------------------------------------------

def _overlap_profile(cl: float, ch: float, dl: float, dh: float):
    """Piecewise-linear profile tau -> |[cl,ch] ∩ [dl+tau, dh+tau]|.

    Returns (breaks, coeffs): sorted kink locations and per-piece (value0,
    slope) so the profile is value0 + slope*tau on (breaks[k], breaks[k+1]).
    The profile vanishes outside [breaks[0], breaks[-1]].
    """
    ks = sorted({cl - dh, cl - dl, ch - dh, ch - dl})
    coeffs = []
    for k0, k1 in zip(ks[:-1], ks[1:]):
        tm = 0.5 * (k0 + k1)
        val = min(ch, dh + tm) - max(cl, dl + tm)
        if val <= 0.0:
            coeffs.append((0.0, 0.0))
            continue
        slope = (1.0 if dh + tm < ch else 0.0) - (1.0 if dl + tm > cl else 0.0)
        coeffs.append((val - slope * tm, slope))
    return np.asarray(ks), coeffs


def _profile_at(breaks: np.ndarray, coeffs, tau: float) -> tuple[float, float]:
    """(value0, slope) of the profile piece containing tau; (0,0) outside."""
    if tau <= breaks[0] or tau >= breaks[-1]:
        return (0.0, 0.0)
    idx = int(np.searchsorted(breaks, tau)) - 1
    idx = min(max(idx, 0), len(coeffs) - 1)
    return coeffs[idx]


def _ray_integral(prof1, prof2, dx: float, dy: float, ps: float,
                  area: float | None, fscale: float) -> float:
    """Closed-form integral of r^(-1-ps) * F(r*dir) dr along one ray.

    F is the product profile c1*c2 when area is None (pair weight), otherwise
    area - c1*c2 (exterior weight, integrated to infinity with an exact tail).
    Raises KernelError when a non-integrable term survives at r = 0.
    """
    breaks1, co1 = prof1
    breaks2, co2 = prof2
    events: list[float] = []
    for brs, d in ((breaks1, dx), (breaks2, dy)):
        if d != 0.0:
            for k in brs:
                rk = k / d
                if rk > 0.0:
                    events.append(rk)
    events = sorted(set(events))

    total = 0.0
    r0 = 0.0
    for r1 in events:
        if r1 <= r0:
            continue
        rm = 0.5 * (r0 + r1)
        a1, b1 = _profile_at(breaks1, co1, rm * dx)
        a2, b2 = _profile_at(breaks2, co2, rm * dy)
        s1 = b1 * dx
        s2 = b2 * dy
        alpha = a1 * a2
        beta = a1 * s2 + a2 * s1
        gamma = s1 * s2
        if area is not None:
            alpha, beta, gamma = area - alpha, -beta, -gamma
        for coef, mu in ((alpha, -ps), (beta, 1.0 - ps), (gamma, 2.0 - ps)):
            if coef == 0.0:
                continue
            if r0 == 0.0 and mu <= 0.0:
                if abs(coef) <= 1e-10 * fscale:
                    continue  # floating-point dust on an exactly vanishing coefficient
                raise KernelError(
                    "divergent cell weight: the kernel is not integrable at the "
                    f"contact (p*s = {ps})")
            if mu == 0.0:
                total += coef * math.log(r1 / r0)
            else:
                total += coef * (r1 ** mu - r0 ** mu) / mu
        r0 = r1

    if area is not None:
        # beyond the last profile corner the product vanishes: exact far field
        if r0 == 0.0:
            raise KernelError("exterior profile has no radial events")
        total += area * r0 ** (-ps) / ps
    return total


_GAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order not in _GAUSS_CACHE:
        _GAUSS_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GAUSS_CACHE[order]


def _angular_integral(prof1, prof2, ps: float, area: float | None,
                      fscale: float, rel_tol: float, label: str) -> float:
    """Integrate the per-ray closed form over all directions.

    Panels are split at the corner directions of the profile grid, inside
    which the integrand is analytic.  Convergence is verified by comparing
    two Gauss orders; panels are halved until agreement or a depth cap.
    """
    two_pi = 2.0 * math.pi
    angles = {0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi}
    for kx in prof1[0]:
        for ky in prof2[0]:
            if kx == 0.0 and ky == 0.0:
                continue
            angles.add(math.atan2(ky, kx) % two_pi)
    panels = sorted(angles)
    panels.append(panels[0] + two_pi)

    def sweep(bounds: list[float], order: int) -> float:
        nodes, wts = _gauss(order)
        total = 0.0
        for t0, t1 in zip(bounds[:-1], bounds[1:]):
            half = 0.5 * (t1 - t0)
            mid = 0.5 * (t0 + t1)
            if half <= 0.0:
                continue
            for xi, wi in zip(nodes, wts):
                theta = mid + half * xi
                val = _ray_integral(prof1, prof2, math.cos(theta),
                                    math.sin(theta), ps, area, fscale)
                total += wi * half * val
        return total

    bounds = panels
    for _ in range(7):
        coarse = sweep(bounds, 12)
        fine = sweep(bounds, 20)
        scale = max(abs(fine), abs(coarse), 1e-300)
        if abs(fine - coarse) <= rel_tol * scale:
            return fine
        refined: list[float] = []
        for t0, t1 in zip(bounds[:-1], bounds[1:]):
            refined.extend([t0, 0.5 * (t0 + t1)])
        refined.append(bounds[-1])
        bounds = refined
    raise KernelError(f"weight quadrature did not converge for {label}")


def _as_box(cell) -> tuple[tuple[float, float], tuple[float, float]]:
    lo, hi = cell
    lo = (float(lo[0]), float(lo[1]))
    hi = (float(hi[0]), float(hi[1]))
    if not (hi[0] > lo[0] and hi[1] > lo[1]):
        raise ValueError(f"degenerate rectangle: {cell}")
    return lo, hi


def pair_weight_2d(cell_a, cell_b, ps: float, rel_tol: float = 1e-7) -> float:
    """Double integral of |x-y|^(-(2+ps)) over two disjoint rectangles.

    Cells are (lo, hi) corner pairs.  Touching cells are allowed; cells that
    share an edge have a finite weight only for ps < 1 (a divergent contact
    raises KernelError naming the pair).
    """
    if not 0.0 < ps < 2.0:
        raise ValueError(f"ps must lie in (0,2), got {ps}")
    (al, ah) = _as_box(cell_a)
    (bl, bh) = _as_box(cell_b)
    ox = min(ah[0], bh[0]) - max(al[0], bl[0])
    oy = min(ah[1], bh[1]) - max(al[1], bl[1])
    tol = 1e-12 * max(ah[0] - al[0], ah[1] - al[1], bh[0] - bl[0], bh[1] - bl[1])
    if ox > tol and oy > tol:
        raise ValueError(f"cells overlap: {cell_a}, {cell_b}")
    label = f"cells {cell_a} and {cell_b}"
    prof1 = _overlap_profile(al[0], ah[0], bl[0], bh[0])
    prof2 = _overlap_profile(al[1], ah[1], bl[1], bh[1])
    fscale = (min(ah[0] - al[0], bh[0] - bl[0])
              * min(ah[1] - al[1], bh[1] - bl[1]))
    try:
        return _angular_integral(prof1, prof2, ps, None, fscale, rel_tol, label)
    except KernelError as exc:
        raise KernelError(f"{exc} [{label}]") from None


def exterior_weight_2d(cell, domain, ps: float, rel_tol: float = 1e-7) -> float:
    """Integral of the kernel between a cell and the domain complement.

    domain is a DomainSpec or a (lo, hi) corner pair containing the cell.
    Cells touching the boundary have a finite weight only for ps < 1.
    """
    if not 0.0 < ps < 2.0:
        raise ValueError(f"ps must lie in (0,2), got {ps}")
    if isinstance(domain, DomainSpec):
        dom = (domain.lo, domain.hi)
    else:
        dom = domain
    (cl, ch) = _as_box(cell)
    (dl, dh) = _as_box(dom)
    tol = 1e-12 * max(dh[0] - dl[0], dh[1] - dl[1])
    if (cl[0] < dl[0] - tol or cl[1] < dl[1] - tol
            or ch[0] > dh[0] + tol or ch[1] > dh[1] + tol):
        raise ValueError(f"cell {cell} not contained in domain {dom}")
    label = f"cell {cell} in domain {dom}"
    prof1 = _overlap_profile(cl[0], ch[0], dl[0], dh[0])
    prof2 = _overlap_profile(cl[1], ch[1], dl[1], dh[1])
    # exact cell area from the profiles at zero shift
    area = ((min(ch[0], dh[0]) - max(cl[0], dl[0]))
            * (min(ch[1], dh[1]) - max(cl[1], dl[1])))
    try:
        return _angular_integral(prof1, prof2, ps, area, area, rel_tol, label)
    except KernelError as exc:
        raise KernelError(f"{exc} [{label}]") from None


# ----------------------------------------------------------------------
# assembly
# ----------------------------------------------------------------------

def _assemble_1d(grid: Grid, ps: float) -> tuple[np.ndarray, np.ndarray]:
    n = grid.ncells
    beta = 1.0 + ps
    h = grid.spacing[0]
    a, b = grid.domain.lo[0], grid.domain.hi[0]

    # pair weights depend only on the cell offset on a uniform grid
    gamma = 2.0 - beta
    c = 1.0 / ((1.0 - beta) * (2.0 - beta))
    k = np.arange(1, n + 1, dtype=float)
    pow_k = (k * h) ** gamma
    w_off = np.empty(n)
    w_off[0] = 0.0
    if n > 1:
        left = np.concatenate(([0.0], pow_k[:-1]))  # ((k-1)h)^gamma with k>=1
        w_off[1:] = c * (pow_k[1:] - 2.0 * pow_k[:-1] + left[:-1])
    offsets = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    W = w_off[offsets]
    np.fill_diagonal(W, 0.0)

    V = np.array([
        exterior_weight_1d((grid.lows[i, 0], grid.highs[i, 0]), (a, b), beta)
        for i in range(n)
    ])
    return W, V


def _assemble_2d(grid: Grid, ps: float, rel_tol: float) -> tuple[np.ndarray, np.ndarray]:
    n = grid.n
    m = grid.ncells
    hx, hy = grid.spacing
    dl, dh = grid.domain.lo, grid.domain.hi

    # offset table: weight for cell displacement (|di|, |dj|)
    base = ((0.0, 0.0), (hx, hy))
    table = np.zeros((n, n))
    for di in range(n):
        for dj in range(n):
            if di == 0 and dj == 0:
                continue
            other = ((di * hx, dj * hy), (di * hx + hx, dj * hy + hy))
            table[di, dj] = pair_weight_2d(base, other, ps, rel_tol)

    ix = np.arange(m) // n
    iy = np.arange(m) % n
    di = np.abs(ix[:, None] - ix[None, :])
    dj = np.abs(iy[:, None] - iy[None, :])
    W = table[di, dj]
    np.fill_diagonal(W, 0.0)

    # exterior weights by folded cell position (reflection symmetry per axis)
    fold = {}
    V = np.empty(m)
    for i in range(m):
        fx = min(ix[i], n - 1 - ix[i])
        fy = min(iy[i], n - 1 - iy[i])
        key = (fx, fy)
        if key not in fold:
            cell = ((dl[0] + fx * hx, dl[1] + fy * hy),
                    (dl[0] + fx * hx + hx, dl[1] + fy * hy + hy))
            fold[key] = exterior_weight_2d(cell, (dl, dh), ps, rel_tol)
        V[i] = fold[key]
    return W, V


def assemble(grid: Grid, params, rel_tol: float = 1e-7) -> KernelWeights:
    """Assemble all pair and exterior weights for a grid.

    params supplies s and p (ProblemParams or anything with .s and .p).
    Deterministic: repeated assembly yields bit-identical arrays.
    """
    s, p = float(params.s), float(params.p)
    ps = p * s
    if grid.ncells > MAX_DENSE_CELLS:
        raise KernelError(
            f"grid has {grid.ncells} cells; dense weights capped at "
            f"{MAX_DENSE_CELLS} cells")
    if grid.dim == 1:
        W, V = _assemble_1d(grid, ps)
    else:
        W, V = _assemble_2d(grid, ps, rel_tol)
    return KernelWeights(W=W, V=V, dim=grid.dim, s=s, p=p)


def save_weights(path, kw: KernelWeights, grid: Grid) -> None:
    """Dump assembled weights with their identifying key."""
    np.savez(
        path,
        W=kw.W,
        V=kw.V,
        key=np.array([float(kw.dim), kw.s, kw.p, float(grid.n)]),
        dom_lo=np.asarray(grid.domain.lo),
        dom_hi=np.asarray(grid.domain.hi),
    )


def load_weights(path, grid: Grid, params) -> KernelWeights:
    """Load cached weights, checking the (dim, s, p, domain, n) key."""
    data = np.load(path)
    key = data["key"]
    want = np.array([float(grid.dim), float(params.s), float(params.p), float(grid.n)])
    if (key.shape != want.shape or not np.array_equal(key, want)
            or not np.array_equal(data["dom_lo"], np.asarray(grid.domain.lo))
            or not np.array_equal(data["dom_hi"], np.asarray(grid.domain.hi))):
        raise KernelError(f"weight cache {path} does not match the requested problem")
    return KernelWeights(W=data["W"], V=data["V"], dim=grid.dim,
                         s=float(params.s), p=float(params.p))
