"""Logistic reaction, its primitive, the energy functional, and truncations.

The reaction is f(t) = lam * (t+)^(q-1) - (t+)^(r-1) with primitive
F(t) = lam * (t+)^q / q - (t+)^r / r.  The free energy of a cell function is

    Phi(u) = E(u)/p - sum_i F(u_i) |C_i|,

whose mass-gradient is Lu - f(u).  Two cellwise truncations of f around a
positive anchor function support branch continuation and the saddle search:
the lower truncation freezes f below the anchor (minimizers then dominate the
anchor), the upper truncation caps the growth above the anchor (the truncated
energy dominates Phi and regains a strict minimum at zero).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kernel import KernelWeights
from .operator import (DiscreteFunction, _apply, _energy, _check_weights)

__all__ = [
    "LogisticParams",
    "TruncKind",
    "TruncatedReaction",
    "Functional",
    "reaction",
    "reaction_primitive",
    "energy_phi",
    "grad_phi",
    "truncated_reaction",
    "truncated_primitive",
    "truncated_energy",
    "truncated_grad",
    "brezis_oswald_applicable",
    "phi_functional",
    "truncated_functional",
    "torsion_functional",
]


@dataclass(frozen=True)
class LogisticParams:
    """Reaction exponents and intensity: f(t) = lam (t+)^{q-1} - (t+)^{r-1}."""

    lam: float
    p: float
    q: float
    r: float

    def __post_init__(self) -> None:
        if self.lam <= 0.0:
            raise ValueError(f"lam must be positive, got {self.lam}")


def _pos_pow(t, expo: float):
    return np.maximum(np.asarray(t, dtype=float), 0.0) ** expo


def reaction(lp: LogisticParams, t):
    """f(t); vanishes identically for t <= 0."""
    out = lp.lam * _pos_pow(t, lp.q - 1.0) - _pos_pow(t, lp.r - 1.0)
    return out if np.ndim(t) else float(out)


def reaction_primitive(lp: LogisticParams, t):
    """F(t) = int_0^t f; bounded above since r > q."""
    out = lp.lam * _pos_pow(t, lp.q) / lp.q - _pos_pow(t, lp.r) / lp.r
    return out if np.ndim(t) else float(out)


def _phi_energy(values: np.ndarray, kw: KernelWeights, lp: LogisticParams,
                measures: np.ndarray) -> float:
    return (_energy(values, kw, lp.p) / lp.p
            - float((reaction_primitive(lp, values) * measures).sum()))


def _phi_grad(values: np.ndarray, kw: KernelWeights, lp: LogisticParams,
              measures: np.ndarray) -> np.ndarray:
    return _apply(values, kw, lp.p, measures) - reaction(lp, values)


def energy_phi(u: DiscreteFunction, kw: KernelWeights, lp: LogisticParams) -> float:
    """Free energy Phi(u) = E(u)/p - sum F(u_i)|C_i|."""
    _check_weights(u.values, kw)
    return _phi_energy(u.values, kw, lp, u.grid.measures)


def grad_phi(u: DiscreteFunction, kw: KernelWeights, lp: LogisticParams) -> DiscreteFunction:
    """Mass-gradient of Phi: (Lu)_i - f(u_i)."""
    _check_weights(u.values, kw)
    return DiscreteFunction(_phi_grad(u.values, kw, lp, u.grid.measures), u.grid)


class TruncKind(enum.Enum):
    LOWER = "lower"
    UPPER = "upper"


@dataclass(eq=False)
class TruncatedReaction:
    """Cellwise truncation of the reaction around a strictly positive anchor."""

    kind: TruncKind
    anchor: DiscreteFunction
    base: LogisticParams

    def __post_init__(self) -> None:
        if not np.all(self.anchor.values > 0.0):
            raise ValueError("truncation anchor must be strictly positive on all cells")


def truncated_reaction(tr: TruncatedReaction, t) -> np.ndarray:
    """Truncated reaction evaluated cellwise; t broadcasts against the anchor."""
    lp = tr.base
    a = tr.anchor.values
    t = np.broadcast_to(np.asarray(t, dtype=float), a.shape)
    below = t <= a
    if tr.kind is TruncKind.LOWER:
        return np.where(below, reaction(lp, a), reaction(lp, t))
    capped = lp.lam * a ** (lp.q - 1.0) - _pos_pow(t, lp.r - 1.0)
    return np.where(below, reaction(lp, t), capped)


def truncated_primitive(tr: TruncatedReaction, t) -> np.ndarray:
    """Cellwise primitive of the truncated reaction, vanishing at t = 0."""
    lp = tr.base
    a = tr.anchor.values
    t = np.broadcast_to(np.asarray(t, dtype=float), a.shape)
    below = t <= a
    if tr.kind is TruncKind.LOWER:
        fa = reaction(lp, a)
        low = fa * t
        high = fa * a + reaction_primitive(lp, t) - reaction_primitive(lp, a)
        return np.where(below, low, high)
    cap_slope = lp.lam * a ** (lp.q - 1.0)
    high = (reaction_primitive(lp, a) + cap_slope * (t - a)
            - (_pos_pow(t, lp.r) - a ** lp.r) / lp.r)
    return np.where(below, reaction_primitive(lp, t), high)


def _trunc_energy(values: np.ndarray, kw: KernelWeights, tr: TruncatedReaction,
                  measures: np.ndarray) -> float:
    return (_energy(values, kw, tr.base.p) / tr.base.p
            - float((truncated_primitive(tr, values) * measures).sum()))


def _trunc_grad(values: np.ndarray, kw: KernelWeights, tr: TruncatedReaction,
                measures: np.ndarray) -> np.ndarray:
    return (_apply(values, kw, tr.base.p, measures)
            - truncated_reaction(tr, values))


def truncated_energy(u: DiscreteFunction, kw: KernelWeights,
                     tr: TruncatedReaction) -> float:
    _check_weights(u.values, kw)
    return _trunc_energy(u.values, kw, tr, u.grid.measures)


def truncated_grad(u: DiscreteFunction, kw: KernelWeights,
                   tr: TruncatedReaction) -> DiscreteFunction:
    _check_weights(u.values, kw)
    return DiscreteFunction(_trunc_grad(u.values, kw, tr, u.grid.measures), u.grid)


def brezis_oswald_applicable(params) -> bool:
    """True when f(t)/t^(p-1) is nonincreasing in t > 0, i.e. q <= p."""
    return params.q <= params.p


@dataclass(eq=False)
class Functional:
    """Energy/gradient pair consumed by the descent solver (raw value arrays)."""

    energy: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    nonneg_minimizer: bool = False


def phi_functional(kw: KernelWeights, grid, lp: LogisticParams) -> Functional:
    m = grid.measures
    return Functional(
        energy=lambda v: _phi_energy(v, kw, lp, m),
        gradient=lambda v: _phi_grad(v, kw, lp, m),
        nonneg_minimizer=True,
    )


def truncated_functional(kw: KernelWeights, grid, tr: TruncatedReaction) -> Functional:
    m = grid.measures
    return Functional(
        energy=lambda v: _trunc_energy(v, kw, tr, m),
        gradient=lambda v: _trunc_grad(v, kw, tr, m),
        nonneg_minimizer=True,
    )


def torsion_functional(kw: KernelWeights, grid, p: float) -> Functional:
    """Energy E(u)/p - sum_i u_i |C_i| whose critical point solves L u = 1."""
    m = grid.measures
    return Functional(
        energy=lambda v: _energy(v, kw, p) / p - float((v * m).sum()),
        gradient=lambda v: _apply(v, kw, p, m) - 1.0,
        nonneg_minimizer=True,
    )
