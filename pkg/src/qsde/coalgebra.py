"""Finite coalgebras, convolution, localisation and convolution cocycles.

``delta[i, j, k]`` encodes ``Delta(b_i) = sum_{jk} delta[i,j,k] b_j (x) b_k``.
A generator functional assigns to each ``b_k`` an operator ``varphi[k]`` on
``C^{d+1}``; it induces the coefficient ``(id (x) varphi) o Delta`` on the
coalgebra itself, whose solution ``k`` determines the convolution cocycle
``l_t = counit o k_t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import Coefficient
from .noise import StepFunction, hat, merged_grid
from .semigroup import propagator, simpson_nodes

RANK_TOL = 1e-10


class LocalisationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Coalgebra:
    delta: np.ndarray   # (m, m, m)
    counit: np.ndarray  # (m,)

    def __post_init__(self):
        delta = np.array(self.delta, dtype=complex)
        counit = np.array(self.counit, dtype=complex).reshape(-1)
        m = counit.shape[0]
        if delta.shape != (m, m, m):
            raise ValueError(f"delta must have shape {(m, m, m)}, got {delta.shape}")
        delta.setflags(write=False)
        counit.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "counit", counit)

    @property
    def m(self) -> int:
        return self.counit.shape[0]

    @classmethod
    def group_like(cls) -> Coalgebra:
        return cls(np.ones((1, 1, 1)), np.ones(1))

    @classmethod
    def divided_power(cls, m: int) -> Coalgebra:
        """Span of ``x_0..x_{m-1}`` with ``Delta(x_n) = sum_k x_k (x) x_{n-k}``."""
        delta = np.zeros((m, m, m))
        for n in range(m):
            for k in range(n + 1):
                delta[n, k, n - k] = 1.0
        counit = np.zeros(m)
        counit[0] = 1.0
        return cls(delta, counit)


@dataclass(frozen=True)
class ValidationReport:
    coassociativity: float
    left_counit: float
    right_counit: float
    tol: float

    @property
    def max_violation(self) -> float:
        return max(self.coassociativity, self.left_counit, self.right_counit)

    @property
    def ok(self) -> bool:
        return self.max_violation <= self.tol


def validate(C: Coalgebra, tol: float = 1e-12) -> ValidationReport:
    d = C.delta
    left = np.einsum("ijk,jab->iabk", d, d)   # (Delta (x) id) Delta
    right = np.einsum("ijc,cab->ijab", d, d)  # (id (x) Delta) Delta
    eye = np.eye(C.m)
    return ValidationReport(
        float(np.max(np.abs(left - right))),
        float(np.max(np.abs(np.einsum("j,ijk->ik", C.counit, d) - eye))),
        float(np.max(np.abs(np.einsum("k,ijk->ij", C.counit, d) - eye))),
        tol,
    )


def convolve(lam, mu, C: Coalgebra) -> np.ndarray:
    """``(lam * mu)(b_i) = sum_{jk} delta[i,j,k] lam(b_j) mu(b_k)``."""
    return np.einsum("ijk,j,k->i", C.delta, np.asarray(lam, dtype=complex),
                     np.asarray(mu, dtype=complex))


@dataclass(frozen=True, eq=False)
class GeneratorFunctional:
    varphi: np.ndarray  # (m, d+1, d+1)

    def __post_init__(self):
        v = np.array(self.varphi, dtype=complex)
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise ValueError(f"varphi must have shape (m, d+1, d+1), got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "varphi", v)

    @property
    def d(self) -> int:
        return self.varphi.shape[1] - 1

    def slice(self, zp, z) -> np.ndarray:
        """Functional ``b_k -> <zp, varphi[k] z>``."""
        return np.einsum("a,kab,b->k", np.conj(zp), self.varphi, z)


def induced_coefficient(C: Coalgebra, varphi: GeneratorFunctional) -> Coefficient:
    """``(id (x) varphi) o Delta`` as a coefficient on the coalgebra."""
    if varphi.varphi.shape[0] != C.m:
        raise ValueError("generator functional and coalgebra dimensions differ")
    # [theta^{mu nu}]_{ji} = sum_k delta[i,j,k] varphi[k]_{mu nu}
    return Coefficient(np.einsum("ijk,kab->abji", C.delta, varphi.varphi))


@dataclass(frozen=True)
class Localisation:
    basis: np.ndarray  # (m, r), orthonormal columns
    closure_defect: float

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def _slice_maps(phi: Coefficient, pairs) -> list[np.ndarray]:
    if pairs is None:
        D = phi.d + 1
        return [phi.theta[a, b] for a in range(D) for b in range(D)]
    return [phi.psi(cp, c) for cp, c in pairs]


def localise(phi: Coefficient, x, cap: int | None = None, pairs=None,
             tol: float = RANK_TOL) -> Localisation:
    """Smallest subspace containing ``x`` and invariant under the slices of ``phi``.

    With ``pairs = [(c', c), ...]`` only the slices ``phi^{hat c'}_{hat c}`` are
    used, giving the subspaces spanned by iterated slices over finite sets of
    plateau values.  Directions are accepted in generation order by
    Gram-Schmidt (two passes) with relative threshold ``tol``.
    """
    cap = phi.m if cap is None else cap
    if cap < 1:
        raise ValueError("cap must be at least 1")
    x = np.asarray(x, dtype=complex).reshape(-1)
    maps = _slice_maps(phi, pairs)
    scale = max([1.0] + [np.linalg.norm(A, 2) for A in maps])
    basis: list[np.ndarray] = []

    def accept(v) -> bool:
        ref = np.linalg.norm(v)
        if ref == 0:
            return False
        for _ in range(2):
            for q in basis:
                v = v - np.vdot(q, v) * q
        if np.linalg.norm(v) <= tol * max(ref, 1.0):
            return False
        if len(basis) >= cap:
            raise LocalisationError("cap exceeded: not finitely localisable at this cap")
        basis.append(v / np.linalg.norm(v))
        return True

    accept(x)
    frontier = list(basis)
    while frontier:
        fresh = []
        for q in frontier:
            for A in maps:
                before = len(basis)
                if accept(A @ q):
                    fresh.append(basis[before])
        frontier = fresh
    Q = np.array(basis).T if basis else np.zeros((phi.m, 0), dtype=complex)
    defect = 0.0
    if basis:
        P = Q @ Q.conj().T
        defect = max(np.linalg.norm(A @ Q - P @ A @ Q) for A in maps) / scale
    return Localisation(Q, float(defect))


def convolution_cocycle(C: Coalgebra, varphi: GeneratorFunctional, gp: StepFunction,
                        g: StepFunction, t: float) -> np.ndarray:
    """``l^{g',g}_t(b_i)`` for every basis element, via localised QSDE solves."""
    phi = induced_coefficient(C, varphi)
    out = np.empty(C.m, dtype=complex)
    for i in range(C.m):
        x = np.eye(C.m)[i]
        loc = localise(phi, x, cap=C.m)
        Q = loc.basis
        M = propagator(phi.restrict(Q), gp, g, t)
        out[i] = C.counit @ (Q @ (M @ (Q.conj().T @ x)))
    return out


def convolution_residual(C: Coalgebra, varphi: GeneratorFunctional, gp: StepFunction,
                         g: StepFunction, t: float, steps: int = 64) -> float:
    """Sup-norm defect of ``l_t = counit + int_0^t l_s * varphi^{hat g'(s)}_{hat g(s)} ds``."""
    if t == 0:
        return float(np.max(np.abs(convolution_cocycle(C, varphi, gp, g, 0.0) - C.counit)))
    integral = np.zeros(C.m, dtype=complex)
    for iv in merged_grid([gp, g], t):
        f = varphi.slice(hat(iv.values[0]), hat(iv.values[1]))
        xs, ws = simpson_nodes(iv.start, iv.stop, steps)
        for s, w in zip(xs, ws):
            integral += w * convolve(convolution_cocycle(C, varphi, gp, g, s), f, C)
    lt = convolution_cocycle(C, varphi, gp, g, t)
    return float(np.max(np.abs(lt - C.counit - integral)))


def counit_slice_defect(C: Coalgebra, varphi: GeneratorFunctional, gp: StepFunction,
                        g: StepFunction, t: float) -> float:
    """``max_i |counit(k_t(b_i)) - l_t(b_i)|`` with ``k`` solved on the whole coalgebra."""
    M = propagator(induced_coefficient(C, varphi), gp, g, t)
    return float(np.max(np.abs(C.counit @ M - convolution_cocycle(C, varphi, gp, g, t))))
