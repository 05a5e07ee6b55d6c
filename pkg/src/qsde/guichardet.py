"""Matrix elements from the iterated-integral (form) representation.

For step functions the integrand over ``Gamma^n_[0,t]`` is constant on each
cell in which the points of ``sigma`` are distributed ``n_j`` per plateau
``I_j``; time-ordering inside a plateau contributes ``|I_j|^{n_j} / n_j!``.
The n-th level is therefore the finite sum over weak compositions

    A_n = sum_{n_1+...+n_K = n} prod_j |I_j|^{n_j}/n_j! psi_j^{n_j}

(earliest plateau leftmost), and the truncated series ``kappa o sum_{n<=N} A_n``
comes with a rigorous tail bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterator

import numpy as np

from .coefficients import Coefficient, InitialMap, MatrixElementMap
from .noise import StepFunction, hat, l2_inner, merged_grid, restrict

DEFAULT_TRUNCATION = 18


class TruncationError(ValueError):
    pass


def weak_compositions(n: int, k: int) -> Iterator[tuple[int, ...]]:
    """All ``(n_1, ..., n_k)`` of nonnegative integers summing to ``n``, lexicographically."""
    if k == 0:
        if n == 0:
            yield ()
        return
    if k == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in weak_compositions(n - first, k - 1):
            yield (first,) + rest


def exp_tail(x: float, N: int) -> float:
    """Upper bound for ``sum_{n > N} x^n / n!`` (requires ``x < N + 2``).

    The first terms are summed explicitly and the remainder is closed with the
    geometric overestimate ``a_{n}/(1 - x/(n+1))``.
    """
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x >= N + 2:
        raise TruncationError("truncation level too small for rigorous tail: "
                              f"Mt = {x:.4g} >= N + 2 = {N + 2}")
    if x == 0:
        return 0.0
    n = N + 1
    term = math.exp(n * math.log(x) - math.lgamma(n + 1))
    total = 0.0
    for _ in range(60):
        total += term
        n += 1
        term *= x / n
        if term <= 1e-18 * total:
            break
    # term is a_n; every later ratio is below x/(n+1) < 1
    return total + term / (1.0 - x / (n + 1))


@dataclass
class SeriesAccumulator:
    lengths: list[float]
    generators: list[np.ndarray]
    N: int
    powers: list[list[np.ndarray]] = field(init=False)
    levels: list[np.ndarray] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)

    def __post_init__(self):
        m = self.generators[0].shape[0] if self.generators else 0
        self.powers = []
        for length, gen in zip(self.lengths, self.generators):
            seq = [np.eye(m, dtype=complex)]
            for k in range(1, self.N + 1):
                seq.append(seq[-1] @ gen * (length / k))
            self.powers.append(seq)

    @property
    def m(self) -> int:
        return self.generators[0].shape[0]

    def level(self, n: int) -> tuple[np.ndarray, int]:
        K = len(self.powers)
        total = np.zeros((self.m, self.m), dtype=complex)
        count = 0
        for comp in weak_compositions(n, K):
            total += reduce(np.matmul, (self.powers[j][nj] for j, nj in enumerate(comp)))
            count += 1
        return total, count

    def run(self) -> SeriesAccumulator:
        for n in range(self.N + 1):
            A, count = self.level(n)
            self.levels.append(A)
            self.counts.append(count)
        return self

    def partial_sum(self) -> np.ndarray:
        return sum(self.levels)

    def max_generator_norm(self) -> float:
        return max(np.linalg.norm(g, 2) for g in self.generators)


def truncated_series(phi: Coefficient, kappa: InitialMap | None, gp: StepFunction,
                     g: StepFunction, t: float, N: int = DEFAULT_TRUNCATION
                     ) -> tuple[MatrixElementMap, float]:
    """Truncated form representation and its tail bound."""
    if N < 0 or t < 0:
        raise ValueError("need N >= 0 and t >= 0")
    kappa = InitialMap.identity(phi.m) if kappa is None else kappa
    if t == 0:
        return MatrixElementMap(0.0, kappa.compose(np.eye(phi.m)),
                                {"engine": "guichardet", "truncation_level": N,
                                 "tail_bound": 0.0}), 0.0
    ivs = merged_grid([gp, g], t)
    acc = SeriesAccumulator([iv.length for iv in ivs],
                            [phi.psi(iv.values[0], iv.values[1]) for iv in ivs], N)
    M = acc.max_generator_norm()
    tail = kappa.norm() * exp_tail(M * t, N)
    acc.run()
    result = MatrixElementMap(t, kappa.compose(acc.partial_sum()),
                              {"engine": "guichardet", "truncation_level": N,
                               "tail_bound": tail})
    return result, tail


def upsilon_sigma(phi: Coefficient, kappa: InitialMap | None, gp: StepFunction,
                  g: StepFunction, sigma) -> np.ndarray:
    """``kappa o phi(s_1) o ... o phi(s_n)`` for ``sigma = {s_1 < ... < s_n}``."""
    kappa = InitialMap.identity(phi.m) if kappa is None else kappa
    M = np.eye(phi.m, dtype=complex)
    for s in sorted(sigma):
        M = M @ phi.psi(gp(s), g(s))
    return kappa.compose(M)


def fe_constant(g: StepFunction, t: float, kind: str = "exp") -> float:
    """Constant ``C(g, t)`` of the fundamental estimate.

    ``"exp"``: ``C^2 = 2 exp(t + ||g_[0,t)||^2)`` (default).
    ``"linear"``: ``C^2 = 2 (t + ||g_[0,t)||^2)``; not a valid constant for small ``t``.
    """
    gn = l2_inner(restrict(g, t), restrict(g, t)).real if t > 0 else 0.0
    if kind == "exp":
        return math.sqrt(2.0 * math.exp(t + gn))
    if kind == "linear":
        return math.sqrt(2.0 * (t + gn))
    raise ValueError(f"unknown constant kind {kind!r}")


def _sum_c_over_sqrt_factorial(C: float) -> float:
    if C == 0:
        return 1.0
    total, n = 0.0, 0
    while True:
        term = math.exp(n * math.log(C) - 0.5 * math.lgamma(n + 1))
        total += term
        if n > C * C and term < 1e-17 * total:
            return total
        n += 1


def hoelder_bound(phi: Coefficient, kappa: InitialMap | None, g: StepFunction,
                  r: float, t: float, T: float, kind: str = "exp") -> float:
    """Right-hand side of the order-1/2 Hoelder estimate, per unit ``||v e(g)||``."""
    if not 0 <= r <= t <= T:
        raise ValueError("need 0 <= r <= t <= T")
    if t == r:
        return 0.0
    kappa = InitialMap.identity(phi.m) if kappa is None else kappa
    CgT = fe_constant(g, T, kind)
    plateaus = {tuple(iv.values[0]) for iv in merged_grid([g], T)}
    col_norm = max(np.linalg.norm(phi.column_matrix(hat(np.array(c))), 2) for c in plateaus)
    C = CgT * math.sqrt(phi.d + 1) * col_norm
    return math.sqrt(t - r) * kappa.norm() * CgT * _sum_c_over_sqrt_factorial(C)
