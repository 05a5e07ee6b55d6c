"""Uniform access to the three matrix-element engines."""

from __future__ import annotations

from .coefficients import Coefficient, InitialMap, MatrixElementMap
from .guichardet import DEFAULT_TRUNCATION, truncated_series
from .noise import StepFunction
from .semigroup import matrix_element
from .toyfock import ToyFock, discrete_kfg

ENGINES = ("semigroup", "guichardet", "toyfock")


def solve(engine: str, phi: Coefficient, kappa: InitialMap | None, gp: StepFunction,
          g: StepFunction, t: float, *, truncation: int = DEFAULT_TRUNCATION,
          slots: int = 64) -> MatrixElementMap:
    if engine == "semigroup":
        return matrix_element(phi, kappa, gp, g, t)
    if engine == "guichardet":
        return truncated_series(phi, kappa, gp, g, t, truncation)[0]
    if engine == "toyfock":
        if t == 0:
            return matrix_element(phi, kappa, gp, g, 0.0)
        return discrete_kfg(phi, kappa, gp, g, ToyFock(t, slots, phi.d))
    raise ValueError(f"unknown engine {engine!r}; choose from {', '.join(ENGINES)}")
