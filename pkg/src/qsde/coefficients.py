"""QSDE coefficients, initial conditions and matrix elements.

A coefficient on ``V = C^m`` is stored through its basis slices
``theta[mu, nu] = phi^{f_mu}_{f_nu}`` (each an ``m x m`` matrix acting on
coordinate columns), so that

    phi^{z'}_{z} = sum_{mu,nu} conj(z'_mu) z_nu theta[mu, nu].

An initial condition ``kappa: V -> B(C^p; C^p')`` is the stack of images of
the basis vectors, shape ``(m, p', p)``.  Kronecker conventions: the ``V``
index is slowest, matrix-lifting indices come next and chains of ``k^``
indices are fastest, chain position 1 being the earliest time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .noise import hat


class StructureError(ValueError):
    """Raised when supplied data lacks a required algebraic structure."""


def _as_matrix(a, shape=None, name="matrix") -> np.ndarray:
    a = np.array(a, dtype=complex)
    if shape is not None and a.shape != shape:
        raise ValueError(f"{name}: expected shape {shape}, got {a.shape}")
    return a


@dataclass(frozen=True)
class InitialSpace:
    """Source space ``V = C^m`` with an optional antilinear involution.

    ``x -> x^dagger`` acts on coordinates as ``J @ conj(x)``.
    """

    m: int
    involution: np.ndarray | None = None

    def __post_init__(self):
        if self.involution is not None:
            J = _as_matrix(self.involution, (self.m, self.m), "involution")
            J.setflags(write=False)
            object.__setattr__(self, "involution", J)

    def involution_defect(self) -> float:
        """``|| J conj(J) - 1 ||_F``; zero for a genuine involution."""
        if self.involution is None:
            raise StructureError("no conjugation structure")
        J = self.involution
        return float(np.linalg.norm(J @ J.conj() - np.eye(self.m)))

    def checked_involution(self, tol: float = 1e-12) -> np.ndarray:
        defect = self.involution_defect()
        if defect > tol:
            raise StructureError(f"involution is not involutive (defect {defect:.3e})")
        return self.involution

    def dagger(self, x) -> np.ndarray:
        return self.checked_involution() @ np.conj(np.asarray(x, dtype=complex))


def conjugate_map(A: np.ndarray, J: np.ndarray) -> np.ndarray:
    """Matrix of ``x -> (A x^dagger)^dagger``, i.e. ``J conj(A) conj(J)``."""
    return J @ A.conj() @ J.conj()


@dataclass(frozen=True, eq=False)
class Coefficient:
    theta: np.ndarray  # (d+1, d+1, m, m)

    def __post_init__(self):
        th = np.array(self.theta, dtype=complex)
        if th.ndim != 4 or th.shape[0] != th.shape[1] or th.shape[2] != th.shape[3]:
            raise ValueError(f"theta must have shape (d+1, d+1, m, m), got {th.shape}")
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)

    @classmethod
    def zero(cls, d: int, m: int) -> Coefficient:
        return cls(np.zeros((d + 1, d + 1, m, m), dtype=complex))

    @property
    def d(self) -> int:
        return self.theta.shape[0] - 1

    @property
    def m(self) -> int:
        return self.theta.shape[2]

    def _check_vec(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex).reshape(-1)
        if z.shape[0] != self.d + 1:
            raise ValueError(f"expected a vector in C^{self.d + 1}, got length {z.shape[0]}")
        return z

    def slice(self, zp, z) -> np.ndarray:
        """``phi^{zp}_{z}``: antilinear in ``zp``, linear in ``z``."""
        zp, z = self._check_vec(zp), self._check_vec(z)
        return np.einsum("a,b,abij->ij", zp.conj(), z, self.theta)

    def psi(self, cp, c) -> np.ndarray:
        """Generator ``phi^{hat(cp)}_{hat(c)}`` of the associated semigroup."""
        return self.slice(hat(cp), hat(c))

    def column(self, z) -> np.ndarray:
        """Components ``(mu, :, :)`` of the column map ``x -> sum_mu f_mu (x) phi^{f_mu}_z x``."""
        z = self._check_vec(z)
        return np.einsum("b,abij->aij", z, self.theta)

    def column_matrix(self, z) -> np.ndarray:
        """Column map as a ``(m (d+1)) x m`` matrix, ``V`` index slowest."""
        col = self.column(z)
        return np.transpose(col, (1, 0, 2)).reshape(self.m * (self.d + 1), self.m)

    def conjugate(self, J) -> Coefficient:
        if J is None:
            raise StructureError("no conjugation structure")
        J = np.asarray(J, dtype=complex)
        th = np.einsum("ij,bajk,kl->abil", J, self.theta.conj(), J.conj())
        return Coefficient(th)

    def lift(self, n: int) -> Coefficient:
        """Matrix-space lifting to ``V (x) M_n``: ``theta[mu, nu] (x) 1_{n^2}``."""
        if n < 1:
            raise ValueError("lifting level must be positive")
        eye = np.eye(n * n)
        D = self.d + 1
        th = np.empty((D, D, self.m * n * n, self.m * n * n), dtype=complex)
        for a in range(D):
            for b in range(D):
                th[a, b] = np.kron(self.theta[a, b], eye)
        return Coefficient(th)

    def restrict(self, Q: np.ndarray) -> Coefficient:
        """Compress to the range of the isometry ``Q`` (an invariant subspace)."""
        return Coefficient(np.einsum("ki,abkl,lj->abij", Q.conj(), self.theta, Q))

    def max_generator_norm(self, plateaus) -> float:
        return max((np.linalg.norm(self.psi(cp, c), 2) for cp, c in plateaus), default=0.0)

    def __add__(self, other: Coefficient) -> Coefficient:
        return Coefficient(self.theta + other.theta)

    def scaled(self, s: complex) -> Coefficient:
        return Coefficient(s * self.theta)

    def to_nested(self) -> list:
        return self.theta.tolist()


@dataclass(frozen=True, eq=False)
class InitialMap:
    kappa: np.ndarray  # (m, p', p)

    def __post_init__(self):
        k = np.array(self.kappa, dtype=complex)
        if k.ndim != 3:
            raise ValueError(f"kappa must have shape (m, p', p), got {k.shape}")
        k.setflags(write=False)
        object.__setattr__(self, "kappa", k)

    @classmethod
    def identity(cls, m: int) -> InitialMap:
        """``V`` realised as column vectors: ``b_i -> |e_i>``."""
        return cls(np.eye(m, dtype=complex).reshape(m, m, 1))

    @classmethod
    def diagonal(cls, m: int) -> InitialMap:
        """``V`` realised as diagonal ``m x m`` matrices: ``b_i -> E_ii``."""
        k = np.zeros((m, m, m), dtype=complex)
        for i in range(m):
            k[i, i, i] = 1.0
        return cls(k)

    @property
    def m(self) -> int:
        return self.kappa.shape[0]

    @property
    def p_out(self) -> int:
        return self.kappa.shape[1]

    @property
    def p_in(self) -> int:
        return self.kappa.shape[2]

    def as_matrix(self) -> np.ndarray:
        """``(p' p) x m`` matrix sending coordinates to flattened images."""
        return self.kappa.reshape(self.m, -1).T

    def norm(self) -> float:
        """Frobenius norm of :meth:`as_matrix`, an upper bound for every operator norm used here."""
        return float(np.linalg.norm(self.kappa))

    def compose(self, M: np.ndarray) -> np.ndarray:
        """Images ``kappa(M b_i)``, shape ``(m, p', p)``."""
        return np.einsum("ji,jab->iab", M, self.kappa)

    def apply(self, x) -> np.ndarray:
        return np.einsum("j,jab->ab", np.asarray(x, dtype=complex), self.kappa)

    def conjugate(self, J) -> InitialMap:
        """``kappa^dagger(x^dagger) = kappa(x)^*``."""
        if J is None:
            raise StructureError("no conjugation structure")
        J = np.asarray(J, dtype=complex)
        return InitialMap(np.einsum("ji,jba->iab", J.conj(), self.kappa.conj()))

    def lift(self, n: int) -> InitialMap:
        """``kappa (x) id_{M_n}`` on the basis ``b_i (x) E_ab``."""
        if n < 1:
            raise ValueError("lifting level must be positive")
        out = []
        for i in range(self.m):
            for a in range(n):
                for b in range(n):
                    E = np.zeros((n, n))
                    E[a, b] = 1.0
                    out.append(np.kron(self.kappa[i], E))
        return InitialMap(np.array(out))


@dataclass(frozen=True, eq=False)
class MatrixElementMap:
    """Normalised matrix element ``k^{g',g}_t`` as images of the ``V`` basis."""

    t: float
    entries: np.ndarray  # (m, p', p)
    meta: dict = field(default_factory=dict)

    def __sub__(self, other: MatrixElementMap) -> np.ndarray:
        return self.entries - other.entries

    def distance(self, other: MatrixElementMap | np.ndarray) -> float:
        other = other.entries if isinstance(other, MatrixElementMap) else other
        return float(np.linalg.norm(self.entries - other))

    def apply(self, x) -> np.ndarray:
        return np.einsum("j,jab->ab", np.asarray(x, dtype=complex), self.entries)

    def to_record(self) -> dict:
        rec = {
            "t": float(self.t),
            "entries": [
                [[[float(z.real), float(z.imag)] for z in row] for row in mat]
                for mat in self.entries
            ],
            "normalized": True,
        }
        rec.update(self.meta)
        return rec


@dataclass(frozen=True)
class CompositionBound:
    lhs: float
    rhs: float
    holds: bool


def composition_bound_check(kappa: InitialMap, columns) -> CompositionBound:
    """Compare ``|| psi . phi_1 . ... . phi_n ||`` with ``(d+1)^{n/2} ||psi|| prod ||phi_k||``.

    ``columns`` holds column maps as arrays of shape ``(d+1, m, m)`` (see
    :meth:`Coefficient.column`); ``phi_1`` sits next to ``psi``.
    """
    Psi = kappa.as_matrix()
    lhs_t = Psi  # rows: (Y, chain...), cols: V
    rhs = np.linalg.norm(Psi, 2)
    D = None
    for col in columns:
        col = np.asarray(col, dtype=complex)
        D = col.shape[0]
        # chain index appended as the fastest index
        lhs_t = np.einsum("rj,ajk->rak", lhs_t.reshape(-1, col.shape[1]), col)
        lhs_t = lhs_t.reshape(-1, col.shape[2])
        stacked = np.transpose(col, (1, 0, 2)).reshape(-1, col.shape[2])
        rhs *= np.linalg.norm(stacked, 2)
    n = len(columns)
    if n:
        rhs *= D ** (n / 2)
    lhs = np.linalg.norm(lhs_t, 2)
    return CompositionBound(float(lhs), float(rhs), bool(lhs <= rhs * (1 + 1e-12)))
