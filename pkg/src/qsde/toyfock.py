"""Time-discretised (toy) Fock space and an Euler scheme for the QSDE.

Slot ``j`` (1-based, ``j = 1`` earliest) carries ``C^{d+1}`` with vacuum
``f_0``; the discrete exponential vector is ``(x)_j (1, sqrt(D) g(tau_{j-1}))``.
Integrator increments act on a single slot as ``s(mu, nu) |f_mu><f_nu|`` with
``s(0,0) = D``, ``s(mu,0) = s(0,nu) = sqrt(D)`` and ``s(mu,nu) = 1`` otherwise.

The state after ``j`` steps is ``xi_j(x) = u_j(x) (x) w_{j+1} (x) ... (x) w_N``
where ``u_j(x)`` lives on the initial space and the first ``j`` slots.  One
Euler step maps the family ``{u_j(b_i)}`` linearly,

    u_{j+1}(b_i) = sum_mu f_mu (x) sum_l B^mu_{li} u_j(b_l),
    B^mu = w_mu 1 + sum_nu s(mu,nu) w_nu theta[mu, nu],

so every inner product the checks need follows from ``m x m`` Gram
recursions.  :meth:`AdaptedState.dense` materialises the same vectors by
explicit slot operators for small grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .coefficients import Coefficient, InitialMap, MatrixElementMap
from .guichardet import fe_constant, hoelder_bound
from .noise import StepFunction, hat
from .semigroup import matrix_element

DENSE_CAP = 2 ** 14
SLOT_CAP = 2 ** 16


class GridError(ValueError):
    pass


class SlotCapError(GridError):
    pass


def increment_matrix(mu: int, nu: int, delta: float, d: int) -> np.ndarray:
    """Single-slot increment ``s(mu, nu) |f_mu><f_nu|``."""
    if not (0 <= mu <= d and 0 <= nu <= d):
        raise ValueError("indices out of range")
    if mu == 0 and nu == 0:
        s = delta
    elif mu == 0 or nu == 0:
        s = math.sqrt(delta)
    else:
        s = 1.0
    out = np.zeros((d + 1, d + 1), dtype=complex)
    out[mu, nu] = s
    return out


def increment_scales(delta: float, d: int) -> np.ndarray:
    s = np.ones((d + 1, d + 1))
    s[0, :] = math.sqrt(delta)
    s[:, 0] = math.sqrt(delta)
    s[0, 0] = delta
    return s


@dataclass(frozen=True)
class ToyFock:
    T: float
    slots: int
    d: int

    def __post_init__(self):
        if self.T <= 0 or self.slots < 1:
            raise ValueError("need T > 0 and at least one slot")
        if self.slots > SLOT_CAP:
            raise SlotCapError(f"slot cap exceeded: {self.slots} > {SLOT_CAP}")

    @property
    def delta(self) -> float:
        return self.T / self.slots

    @property
    def dhat(self) -> int:
        return self.d + 1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.slots + 1)

    def index(self, t: float) -> int:
        j = round(t / self.delta)
        if abs(j * self.delta - t) > 1e-9 * max(1.0, self.T) or not 0 <= j <= self.slots:
            raise GridError(f"time {t} is not on the slot grid")
        return j

    def sample(self, g: StepFunction) -> np.ndarray:
        """Left-endpoint plateau values per slot; ``g`` must jump only on slot boundaries."""
        if g.d != self.d:
            raise ValueError("noise dimension mismatch")
        for b in g.discontinuities(self.T):
            j = b / self.delta
            if abs(j - round(j)) > 1e-9 * max(1.0, self.slots):
                raise GridError(f"breakpoint {b} does not fall on a slot boundary")
        return np.array([g(s) for s in self.times[:-1]]).reshape(self.slots, self.d)

    def slot_vectors(self, g: StepFunction) -> np.ndarray:
        vals = self.sample(g)
        w = np.empty((self.slots, self.dhat), dtype=complex)
        w[:, 0] = 1.0
        w[:, 1:] = math.sqrt(self.delta) * vals
        return w

    def exp_inner(self, gp: StepFunction, g: StepFunction) -> complex:
        """``prod_j (1 + D <g'_j, g_j>)``."""
        return complex(np.prod(np.einsum("ja,ja->j", self.slot_vectors(gp).conj(),
                                         self.slot_vectors(g))))


@dataclass(eq=False)
class AdaptedState:
    grid: ToyFock
    phi: Coefficient
    kappa: InitialMap
    v: np.ndarray
    g: StepFunction
    w: np.ndarray   # (N, d+1) slot factors of e_D(g)
    B: np.ndarray   # (N, d+1, m, m) step maps

    @property
    def m(self) -> int:
        return self.phi.m

    @cached_property
    def u0(self) -> np.ndarray:
        """``kappa(b_i) v``, shape ``(m, p')``."""
        return np.einsum("iab,b->ia", self.kappa.kappa, self.v)

    @cached_property
    def future(self) -> np.ndarray:
        """``prod_{l > j} ||w_l||^2`` for ``j = 0..N``."""
        sq = np.sum(np.abs(self.w) ** 2, axis=1)
        out = np.ones(self.grid.slots + 1)
        for j in range(self.grid.slots - 1, -1, -1):
            out[j] = out[j + 1] * sq[j]
        return out

    @cached_property
    def grams(self) -> list[np.ndarray]:
        """Past Gram matrices ``<u_j(b_i), u_j(b_l)>`` for ``j = 0..N``."""
        G = self.u0.conj() @ self.u0.T
        out = [G]
        for Bk in self.B:
            G = sum(Bm.conj().T @ G @ Bm for Bm in Bk)
            out.append(G)
        return out

    def exp_norm_sq(self) -> float:
        """``||v (x) e_D(g)||^2``."""
        return float(np.vdot(self.v, self.v).real * self.future[0])

    def norms_sq(self, j: int) -> np.ndarray:
        return np.real(np.diag(self.grams[j])) * self.future[j]

    def matrix_element(self, vp, gp: StepFunction) -> np.ndarray:
        """Normalised ``<v' e_D(g'), xi_N(b_i)>`` for every basis vector ``b_i``."""
        wp = self.grid.slot_vectors(gp)
        y = np.einsum("a,iab,b->i", np.conj(vp), self.kappa.kappa, self.v)
        norm = 1.0 + 0j
        for k in range(self.grid.slots):
            y = y @ np.einsum("a,aij->ij", wp[k].conj(), self.B[k])
            norm *= np.vdot(wp[k], self.w[k])
        return y / norm

    def diff_norms_sq(self, r: int) -> np.ndarray:
        """``||xi_j(b_i) - xi_r(b_i)||^2`` for ``j = r..N``, shape ``(N-r+1, m)``."""
        m = self.m
        gram = np.zeros((2 * m, 2 * m), dtype=complex)
        gram[m:, m:] = self.grams[r]
        out = [np.zeros(m)]
        eye = np.eye(m)
        for k in range(r, self.grid.slots):
            new = np.zeros_like(gram)
            for mu, Bm in enumerate(self.B[k]):
                wm = self.w[k, mu]
                Tm = np.zeros((2 * m, 2 * m), dtype=complex)
                Tm[:m, :m] = Bm
                Tm[m:, :m] = Bm - wm * eye
                Tm[m:, m:] = wm * eye
                new += Tm.conj().T @ gram @ Tm
            gram = new
            out.append(np.real(np.diag(gram[:m, :m])) * self.future[k + 1])
        return np.array(out)

    def integrand_norms_sq(self) -> np.ndarray:
        """``||F_k hat g e||^2`` for each step, shape ``(N, m)``.

        ``F_k`` carries the components ``k_{tau_k} o theta[mu, nu]``; slot ``k+1``
        is traded for the ``k^`` index.
        """
        vals = self.grid.sample(self.g)
        out = []
        for k in range(self.grid.slots):
            C = np.einsum("b,abij->aij", hat(vals[k]), self.phi.theta)
            G = self.grams[k]
            acc = sum(Cm.conj().T @ G @ Cm for Cm in C)
            out.append(np.real(np.diag(acc)) * self.future[k + 1])
        return np.array(out)

    def dense(self, j: int | None = None) -> np.ndarray:
        """Explicit vectors ``xi_j(b_i)``, shape ``(m, p', d+1, ..., d+1)``.

        Built by applying the single-slot increments; independent of ``B``.
        """
        N, D = self.grid.slots, self.grid.dhat
        if D ** N > DENSE_CAP:
            raise GridError(f"(d+1)^N = {D ** N} exceeds the dense cap {DENSE_CAP}")
        j = N if j is None else j
        xi = self.u0
        for k in range(N):
            xi = np.multiply.outer(xi, self.w[k])
        delta = self.grid.delta
        th = self.phi.theta
        for k in range(j):
            new = xi.copy()
            for mu in range(D):
                for nu in range(D):
                    if not np.any(th[mu, nu]):
                        continue
                    src = np.tensordot(th[mu, nu].T, xi, axes=(1, 0))
                    inc = increment_matrix(mu, nu, delta, self.grid.d)
                    moved = np.moveaxis(np.tensordot(inc, src, axes=(1, 2 + k)), 0, 2 + k)
                    new = new + moved
            xi = new
        return xi


def euler_solve(phi: Coefficient, kappa: InitialMap | None, v, g: StepFunction,
                grid: ToyFock) -> AdaptedState:
    if phi.d != grid.d:
        raise ValueError("noise dimension mismatch")
    kappa = InitialMap.identity(phi.m) if kappa is None else kappa
    v = np.asarray(v, dtype=complex).reshape(-1)
    if v.shape[0] != kappa.p_in:
        raise ValueError(f"v must lie in C^{kappa.p_in}")
    w = grid.slot_vectors(g)
    scales = increment_scales(grid.delta, grid.d)
    eye = np.eye(phi.m)
    B = np.empty((grid.slots, grid.dhat, phi.m, phi.m), dtype=complex)
    for k in range(grid.slots):
        coef = scales * w[k][None, :]  # s(mu, nu) w_nu
        B[k] = np.einsum("ab,abij->aij", coef, phi.theta) + w[k][:, None, None] * eye
    return AdaptedState(grid, phi, kappa, v, g, w, B)


def matrix_element_discrete(state: AdaptedState, vp, gp: StepFunction) -> np.ndarray:
    return state.matrix_element(np.asarray(vp, dtype=complex), gp)


def discrete_kfg(phi: Coefficient, kappa: InitialMap | None, gp: StepFunction,
                 g: StepFunction, grid: ToyFock) -> MatrixElementMap:
    """Full normalised matrix element, assembled over bases of ``C^p`` and ``C^p'``."""
    kappa = InitialMap.identity(phi.m) if kappa is None else kappa
    entries = np.zeros(kappa.kappa.shape, dtype=complex)
    for b in range(kappa.p_in):
        state = euler_solve(phi, kappa, np.eye(kappa.p_in)[b], g, grid)
        for a in range(kappa.p_out):
            entries[:, a, b] = state.matrix_element(np.eye(kappa.p_out)[a], gp)
    return MatrixElementMap(grid.T, entries, {"engine": "toyfock", "slots": grid.slots})


@dataclass(frozen=True)
class FEReport:
    max_ratio: float
    lhs: np.ndarray  # (N+1, m)
    rhs: np.ndarray  # (N+1, m)


def fe_check(state: AdaptedState, kind: str = "exp") -> FEReport:
    """Discrete fundamental estimate ``||xi_j - xi_0||^2 <= C^2 sum_k D ||F_k||^2``."""
    lhs = state.diff_norms_sq(0)
    integ = state.integrand_norms_sq()
    cum = np.vstack([np.zeros(state.m), np.cumsum(state.grid.delta * integ, axis=0)])
    consts = np.array([fe_constant(state.g, t, kind) ** 2 if t > 0 else 0.0
                       for t in state.grid.times])
    rhs = consts[:, None] * cum
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0),
                         np.where(lhs > 1e-28, np.inf, 0.0))
    return FEReport(float(np.max(ratio)), lhs, rhs)


def hoelder_measure(state: AdaptedState, r: float, t: float) -> float:
    """``max_i ||xi_t(b_i) - xi_r(b_i)|| / ||v (x) e_D(g)||``."""
    jr, jt = sorted((state.grid.index(r), state.grid.index(t)))
    diffs = state.diff_norms_sq(jr)[jt - jr]
    return float(math.sqrt(max(np.max(diffs), 0.0) / state.exp_norm_sq()))


def hoelder_scan(state: AdaptedState, kind: str = "exp") -> dict:
    """Largest ratio of measured increments to the analytic bound over all grid pairs.

    Also reports ``max measure / sqrt(t - r)``.
    """
    grid = state.grid
    times = grid.times
    norm = state.exp_norm_sq()
    # the bound is sqrt(t - r) times a constant fixed by T
    unit = hoelder_bound(state.phi, state.kappa, state.g, 0.0, grid.T, grid.T, kind) / math.sqrt(grid.T)
    worst_ratio, worst_scaled = 0.0, 0.0
    for jr in range(grid.slots):
        diffs = state.diff_norms_sq(jr)
        for off in range(1, grid.slots - jr + 1):
            r, t = times[jr], times[jr + off]
            meas = math.sqrt(max(np.max(diffs[off]), 0.0) / norm)
            worst_ratio = max(worst_ratio, meas / (unit * math.sqrt(t - r)))
            worst_scaled = max(worst_scaled, meas / math.sqrt(t - r))
    return {"max_ratio": worst_ratio, "max_scaled": worst_scaled}


def convergence_table(phi: Coefficient, kappa: InitialMap | None, gp: StepFunction,
                      g: StepFunction, T: float, slots) -> list[dict]:
    """Error of the discrete matrix element against the semigroup engine per slot count."""
    exact = matrix_element(phi, kappa, gp, g, T)
    rows = []
    prev = None
    for n in slots:
        approx = discrete_kfg(phi, kappa, gp, g, ToyFock(T, n, phi.d))
        err = approx.distance(exact)
        ratio = prev / err if prev is not None and err > 0 else None
        rows.append({"slots": n, "error": err, "ratio": ratio})
        prev = err
    return rows
