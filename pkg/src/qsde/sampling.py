"""Seeded random coefficients, step functions and involutions."""

from __future__ import annotations

import numpy as np

from .coefficients import Coefficient, InitialMap
from .noise import StepFunction, merged_grid


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_coefficient(rng, m: int, d: int, scale: float = 1.0) -> Coefficient:
    return Coefficient(scale * complex_normal(rng, (d + 1, d + 1, m, m)) / np.sqrt(2 * m))


def random_kappa(rng, m: int, p_out: int, p_in: int) -> InitialMap:
    return InitialMap(complex_normal(rng, (m, p_out, p_in)) / np.sqrt(2))


def random_step_function(rng, d: int, plateaus: int, horizon: float,
                         amplitude: float = 1.0) -> StepFunction:
    """``plateaus`` random values on a random partition of ``[0, horizon)``."""
    cuts = np.sort(rng.uniform(0.05, 0.95, plateaus - 1)) * horizon
    breaks = list(cuts) + [horizon]
    vals = amplitude * complex_normal(rng, (plateaus, d)) / np.sqrt(2)
    return StepFunction(breaks, vals, d=d)


def normalise_generators(phi: Coefficient, gp: StepFunction, g: StepFunction, t: float,
                         bound: float) -> Coefficient:
    """Rescale ``phi`` so that every plateau generator on ``[0, t)`` has norm at most ``bound``."""
    ivs = merged_grid([gp, g], t)
    M = phi.max_generator_norm((iv.values[0], iv.values[1]) for iv in ivs)
    return phi if M <= bound else phi.scaled(bound / M)


def random_involution(rng, m: int) -> np.ndarray:
    """Antiunitary-type involution ``J`` with ``J conj(J) = 1``: ``J = U U^T`` for unitary ``U``."""
    q, r = np.linalg.qr(complex_normal(rng, (m, m)))
    U = q * (np.diag(r) / np.abs(np.diag(r)))
    return U @ U.T


def permutation_involution(m: int, perm=None) -> np.ndarray:
    """Real permutation matrix of an involutive permutation (default: reversal)."""
    perm = list(range(m))[::-1] if perm is None else perm
    J = np.zeros((m, m))
    for i, j in enumerate(perm):
        J[j, i] = 1.0
    if not np.allclose(J @ J, np.eye(m)):
        raise ValueError("permutation is not an involution")
    return J


def random_instance(rng, m_max: int = 4, d_max: int = 2, k_max: int = 4, t_max: float = 2.0,
                    psi_bound: float = 2.0):
    """Random ``(phi, kappa, g', g, t)`` with all plateau generators bounded by ``psi_bound``."""
    m = int(rng.integers(1, m_max + 1))
    d = int(rng.integers(1, d_max + 1))
    t = float(rng.uniform(0.2, t_max))
    # plateau counts for g', g chosen so the merged grid has at most k_max intervals
    k1 = int(rng.integers(1, k_max + 1))
    k2 = int(rng.integers(1, max(1, k_max - k1 + 1) + 1))
    gp = random_step_function(rng, d, k1, t)
    g = random_step_function(rng, d, k2, t)
    while len(merged_grid([gp, g], t)) > k_max:
        g = random_step_function(rng, d, 1, t)
    phi = normalise_generators(random_coefficient(rng, m, d), gp, g, t, psi_bound)
    kappa = random_kappa(rng, m, int(rng.integers(1, 3)), int(rng.integers(1, 3)))
    return phi, kappa, gp, g, t
