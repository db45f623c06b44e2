"""Discrete functions, the nonlocal energy, and the cell-averaged operator.

A discrete function is piecewise constant on the grid cells and extended by
zero outside the domain.  Its nonlocal energy is

    E(u) = sum_{i != j} W_ij |u_i - u_j|^p  +  2 sum_i V_i |u_i|^p,

which is the exact Gagliardo double integral of the piecewise-constant
extension.  The operator below is the exact gradient of E/p with respect to
the mass inner product <u, v> = sum_i u_i v_i |C_i|, so the discrete
integration-by-parts identity <Lu, u> = E(u) holds to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Grid
from .kernel import KernelWeights

__all__ = [
    "GridMismatchError",
    "DiscreteFunction",
    "signed_power",
    "gagliardo_energy",
    "apply_operator",
    "lp_norm",
    "mass_dot",
    "mass_norm",
]


class GridMismatchError(ValueError):
    """Operands live on different grids or do not match the weight table."""


@dataclass(eq=False)
class DiscreteFunction:
    """Cell values together with the grid they live on."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.ncells,):
            raise GridMismatchError(
                f"expected {self.grid.ncells} cell values, got shape "
                f"{self.values.shape}")

    def _check(self, other: "DiscreteFunction") -> None:
        if self.grid is not other.grid:
            raise GridMismatchError("operands live on different grids")

    def __add__(self, other: "DiscreteFunction") -> "DiscreteFunction":
        self._check(other)
        return DiscreteFunction(self.values + other.values, self.grid)

    def __sub__(self, other: "DiscreteFunction") -> "DiscreteFunction":
        self._check(other)
        return DiscreteFunction(self.values - other.values, self.grid)

    def __mul__(self, scalar: float) -> "DiscreteFunction":
        return DiscreteFunction(self.values * float(scalar), self.grid)

    __rmul__ = __mul__

    def __neg__(self) -> "DiscreteFunction":
        return DiscreteFunction(-self.values, self.grid)

    def copy(self) -> "DiscreteFunction":
        return DiscreteFunction(self.values.copy(), self.grid)

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())


def signed_power(a, nu: float):
    """Odd power |a|^(nu-1) * a, elementwise; maps 0 to 0 for any nu > 0."""
    arr = np.asarray(a, dtype=float)
    out = np.sign(arr) * np.abs(arr) ** nu
    return out if arr.ndim else float(out)


def _check_weights(values: np.ndarray, kw: KernelWeights) -> None:
    if kw.W.shape != (values.shape[0], values.shape[0]):
        raise GridMismatchError(
            f"weight table for {kw.W.shape[0]} cells, function has "
            f"{values.shape[0]}")


def _energy(values: np.ndarray, kw: KernelWeights, p: float) -> float:
    diff = values[:, None] - values[None, :]
    pair = float((kw.W * np.abs(diff) ** p).sum())
    ext = 2.0 * float((kw.V * np.abs(values) ** p).sum())
    return pair + ext


def _apply(values: np.ndarray, kw: KernelWeights, p: float,
           measures: np.ndarray) -> np.ndarray:
    diff = values[:, None] - values[None, :]
    row = 2.0 * (kw.W * signed_power(diff, p - 1.0)).sum(axis=1)
    row += 2.0 * kw.V * signed_power(values, p - 1.0)
    return row / measures


def gagliardo_energy(u: DiscreteFunction, kw: KernelWeights, p: float) -> float:
    """Exact nonlocal p-energy of the zero-extended piecewise-constant function."""
    _check_weights(u.values, kw)
    return _energy(u.values, kw, p)


def apply_operator(u: DiscreteFunction, kw: KernelWeights, p: float) -> DiscreteFunction:
    """Cell averages of the nonlocal operator applied to u.

    (Lu)_i = [2 sum_j W_ij (u_i - u_j)^(p-1) + 2 V_i u_i^(p-1)] / |C_i|
    with signed powers, so that |C_i| (Lu)_i is the partial derivative of
    E(u)/p in u_i.
    """
    _check_weights(u.values, kw)
    return DiscreteFunction(_apply(u.values, kw, p, u.grid.measures), u.grid)


def lp_norm(u: DiscreteFunction, nu: float) -> float:
    """Mass-weighted L^nu norm of the cell function; nu = inf gives the sup norm."""
    if np.isinf(nu):
        return u.sup_norm()
    if nu <= 0.0:
        raise ValueError(f"norm exponent must be positive, got {nu}")
    return float((np.abs(u.values) ** nu * u.grid.measures).sum() ** (1.0 / nu))


def mass_dot(a: np.ndarray, b: np.ndarray, measures: np.ndarray) -> float:
    """L^2 pairing sum_i a_i b_i |C_i| on raw value arrays."""
    return float((a * b * measures).sum())


def mass_norm(a: np.ndarray, measures: np.ndarray) -> float:
    return mass_dot(a, a, measures) ** 0.5
