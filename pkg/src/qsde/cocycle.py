"""Cocycle-level tools: associated semigroups, generator reconstruction, conjugation.

A solved process is treated as a black box ``(c', c, t) -> k^{c',c}_t`` with
``kappa = id``.  Its associated-semigroup generators on the probe set
``{0, e_1, ..., e_d}`` determine the stochastic generator through

    phi(zeta', zeta) = [conj(z'-1)  1] [[psi_00, psi_0c], [psi_c'0, psi_c'c]] [z-1; 1]

for ``zeta' = (z', c')`` and ``zeta = (z, c)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import logm

from . import engines
from .coefficients import Coefficient, InitialMap, StructureError, conjugate_map
from .noise import StepFunction


def _key(c) -> tuple:
    return tuple(complex(z) for z in np.asarray(c, dtype=complex).reshape(-1))


def default_probes(d: int) -> list[np.ndarray]:
    return [np.zeros(d, dtype=complex)] + [np.eye(d, dtype=complex)[i] for i in range(d)]


@dataclass
class SemigroupTable:
    d: int
    m: int
    entries: dict = field(default_factory=dict)

    def __setitem__(self, pair, value):
        cp, c = pair
        self.entries[(_key(cp), _key(c))] = np.asarray(value, dtype=complex)

    def __getitem__(self, pair) -> np.ndarray:
        cp, c = pair
        return self.entries[(_key(cp), _key(c))]

    def __contains__(self, pair) -> bool:
        cp, c = pair
        return (_key(cp), _key(c)) in self.entries

    @property
    def markov_generator(self) -> np.ndarray:
        zero = np.zeros(self.d)
        return self[zero, zero]


def table_from_coefficient(phi: Coefficient, probes=None) -> SemigroupTable:
    probes = default_probes(phi.d) if probes is None else probes
    table = SemigroupTable(phi.d, phi.m)
    for cp in probes:
        for c in probes:
            table[cp, c] = phi.psi(cp, c)
    return table


def table_from_engine(phi: Coefficient, probes=None, t_probe: float = 0.5,
                      engine: str = "semigroup", **opts) -> SemigroupTable:
    """Generators recovered as ``log(k^{c',c}_h) / h`` from the black-box process."""
    probes = default_probes(phi.d) if probes is None else probes
    table = SemigroupTable(phi.d, phi.m)
    for cp in probes:
        for c in probes:
            gp = StepFunction.indicator(cp, 0.0, t_probe)
            g = StepFunction.indicator(c, 0.0, t_probe)
            P = engines.solve(engine, phi, None, gp, g, t_probe, **opts).entries[:, :, 0].T
            table[cp, c] = logm(P) / t_probe
    return table


class Reconstruction:
    """Sesquilinear evaluator ``(zeta', zeta) -> phi^{zeta'}_{zeta}`` built from a table."""

    def __init__(self, table: SemigroupTable):
        self.table = table

    def _required(self, cp, c) -> list:
        zero = np.zeros(self.table.d)
        return [(zero, zero), (zero, c), (cp, zero), (cp, c)]

    def block(self, zp, z) -> np.ndarray:
        """Evaluate the block formula directly; needs all four probes."""
        zp = np.asarray(zp, dtype=complex)
        z = np.asarray(z, dtype=complex)
        cp, c = zp[1:], z[1:]
        need = self._required(cp, c)
        missing = [pair for pair in need if pair not in self.table]
        if missing:
            listed = ", ".join(f"(c'={list(a)}, c={list(b)})" for a, b in missing)
            raise KeyError(f"semigroup table lacks probes {listed}")
        p00, p0c, pc0, pcc = (self.table[pair] for pair in need)
        a, b = np.conj(zp[0] - 1), z[0] - 1
        return a * b * p00 + a * p0c + b * pc0 + pcc

    def to_coefficient(self) -> Coefficient:
        """Basis slices ``theta[mu, nu] = phi(f_mu, f_nu)`` via the block formula."""
        D = self.table.d + 1
        th = np.empty((D, D, self.table.m, self.table.m), dtype=complex)
        eye = np.eye(D)
        for mu in range(D):
            for nu in range(D):
                th[mu, nu] = self.block(eye[mu], eye[nu])
        return Coefficient(th)

    def __call__(self, zp, z) -> np.ndarray:
        try:
            return self.block(zp, z)
        except KeyError:
            # sesquilinear extension through the basis probes
            return self.to_coefficient().slice(zp, z)


def reconstruct_phi(table: SemigroupTable) -> Reconstruction:
    return Reconstruction(table)


def difference_quotient_generator(engine: str, phi: Coefficient, cp, c, t_small: float,
                                  **opts) -> np.ndarray:
    """``(k^{c',c}_h - 1) / h`` with ``kappa = id``; an O(h) estimate of ``psi_{c',c}``."""
    if t_small <= 0:
        raise ValueError("t_small must be positive")
    gp = StepFunction.indicator(cp, 0.0, t_small)
    g = StepFunction.indicator(c, 0.0, t_small)
    P = engines.solve(engine, phi, None, gp, g, t_small, **opts).entries[:, :, 0].T
    return (P - np.eye(phi.m)) / t_small


def conjugate_check(engine: str, phi: Coefficient, kappa: InitialMap, J, gp: StepFunction,
                    g: StepFunction, t: float, **opts) -> float:
    """``max_x || k^{dagger; g, g'}_t(x^dagger) - (k^{g', g}_t(x))^* ||_F``."""
    if J is None:
        raise StructureError("no conjugation structure")
    J = np.asarray(J, dtype=complex)
    defect = np.linalg.norm(J @ J.conj() - np.eye(phi.m))
    if defect > 1e-12:
        raise StructureError(f"involution is not involutive (defect {defect:.3e})")
    direct = engines.solve(engine, phi, kappa, gp, g, t, **opts).entries
    conj = engines.solve(engine, phi.conjugate(J), kappa.conjugate(J), g, gp, t, **opts).entries
    worst = 0.0
    for i in range(phi.m):
        # coordinates of b_i^dagger are the i-th column of J
        lhs = np.einsum("j,jab->ab", J[:, i], conj)
        worst = max(worst, float(np.linalg.norm(lhs - direct[i].conj().T)))
    return worst


def conjugate_generator(psi: np.ndarray, J) -> np.ndarray:
    return conjugate_map(psi, np.asarray(J, dtype=complex))
