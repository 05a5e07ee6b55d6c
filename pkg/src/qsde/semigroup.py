"""Matrix elements through the semigroup decomposition.

For step functions the normalised matrix element is an ordered product of
associated semigroups along the plateau grid of ``(g', g)``::

    k^{g',g}_t = kappa o exp(|I_1| psi_1) o ... o exp(|I_K| psi_K)

with ``I_1`` the earliest interval (adjacent to ``kappa``) and
``psi_j = phi^{hat g'_j}_{hat g_j}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .coefficients import Coefficient, InitialMap, MatrixElementMap
from .noise import Interval, StepFunction, merged_grid, shift_back


@dataclass(frozen=True)
class SemigroupDecomposition:
    m: int
    intervals: list[Interval]
    generators: list[np.ndarray]

    @property
    def total_time(self) -> float:
        return sum(iv.length for iv in self.intervals)

    def propagator(self) -> np.ndarray:
        M = np.eye(self.m, dtype=complex)
        for iv, gen in zip(self.intervals, self.generators):
            M = M @ expm(iv.length * gen)
        return M


def associated_semigroup(phi: Coefficient, cp, c, t: float) -> np.ndarray:
    """``P^{c',c}_t = exp(t psi_{c',c})``."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    return expm(t * phi.psi(cp, c))


def decompose(phi: Coefficient, gp: StepFunction, g: StepFunction, t: float,
              extra_points=()) -> SemigroupDecomposition:
    if t <= 0:
        return SemigroupDecomposition(phi.m, [], [])
    ivs = merged_grid([gp, g], t, extra_points)
    gens = [phi.psi(iv.values[0], iv.values[1]) for iv in ivs]
    return SemigroupDecomposition(phi.m, ivs, gens)


def propagator(phi: Coefficient, gp: StepFunction, g: StepFunction, t: float,
               extra_points=()) -> np.ndarray:
    """``k^{g',g}_t`` for ``kappa = id`` as an ``m x m`` matrix."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    return decompose(phi, gp, g, t, extra_points).propagator()


def matrix_element(phi: Coefficient, kappa: InitialMap | None, gp: StepFunction,
                   g: StepFunction, t: float, extra_points=()) -> MatrixElementMap:
    kappa = InitialMap.identity(phi.m) if kappa is None else kappa
    M = propagator(phi, gp, g, t, extra_points)
    return MatrixElementMap(t, kappa.compose(M), {"engine": "semigroup"})


def cocycle_residual(phi: Coefficient, gp: StepFunction, g: StepFunction,
                     r: float, t: float) -> float:
    """``|| k_{r+t} - k_r o k^{S*_r g', S*_r g}_t ||_F`` with ``kappa = id``."""
    whole = propagator(phi, gp, g, r + t)
    head = propagator(phi, gp, g, r)
    tail = propagator(phi, shift_back(gp, r), shift_back(g, r), t)
    return float(np.linalg.norm(whole - head @ tail))


def simpson_nodes(a: float, b: float, steps: int):
    """Nodes and weights of composite Simpson on ``[a, b]`` (``steps`` even)."""
    if steps < 2 or steps % 2:
        raise ValueError("Simpson needs an even number of steps >= 2")
    x = np.linspace(a, b, steps + 1)
    w = np.ones(steps + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return x, w * (b - a) / (3 * steps)


def weak_residual(phi: Coefficient, kappa: InitialMap | None, gp: StepFunction,
                  g: StepFunction, t: float, quadrature_steps: int = 64) -> float:
    """Defect in the weak-solution integral equation.

    Evaluates ``k_t(x) - kappa(x) - int_0^t k_s(phi^{hat g'(s)}_{hat g(s)} x) ds``
    with the engine's own ``k_s`` and composite Simpson per plateau; returns the
    largest Frobenius norm over the basis of ``V``.
    """
    kappa = InitialMap.identity(phi.m) if kappa is None else kappa
    if t == 0:
        return 0.0
    integral = np.zeros((phi.m, phi.m), dtype=complex)
    for iv in merged_grid([gp, g], t):
        gen = phi.psi(iv.values[0], iv.values[1])
        xs, ws = simpson_nodes(iv.start, iv.stop, quadrature_steps)
        for s, w in zip(xs, ws):
            integral += w * propagator(phi, gp, g, s) @ gen
    defect = propagator(phi, gp, g, t) - np.eye(phi.m) - integral
    images = kappa.compose(defect)
    return float(max(np.linalg.norm(im) for im in images))
