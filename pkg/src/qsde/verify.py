"""Property checks run against an instance and seeded perturbations of it."""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import coalgebra as coalg
from .cocycle import (conjugate_check, reconstruct_phi, table_from_coefficient,
                      table_from_engine)
from .coefficients import Coefficient, InitialMap, StructureError, composition_bound_check
from .guichardet import TruncationError, exp_tail, truncated_series
from .instance import Instance
from .noise import StepFunction
from .sampling import complex_normal, random_coefficient, random_kappa
from .semigroup import (associated_semigroup, cocycle_residual, matrix_element,
                        propagator, weak_residual)
from .toyfock import GridError, ToyFock, euler_solve, fe_check, hoelder_scan

log = logging.getLogger(__name__)

SUITES = ("cocycle", "conjugate", "lifting", "bounds", "weak", "coalg")


@dataclass
class CheckRecord:
    name: str
    residual: float
    bound: float
    runtime_ms: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.bound)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


@dataclass
class Report:
    seed: int
    records: list[CheckRecord] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "passed": self.passed,
                "records": [r.to_dict() for r in self.records]}

    def table(self) -> str:
        lines = ["name\tresidual\tbound\tpass\truntime_ms"]
        for r in self.records:
            lines.append(f"{r.name}\t{r.residual:.3e}\t{r.bound:.3e}\t"
                         f"{'PASS' if r.passed else 'FAIL'}\t{r.runtime_ms:.1f}")
        return "\n".join(lines)


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = 1e3 * (time.perf_counter() - self.start)


class Verifier:
    def __init__(self, inst: Instance, seed: int | None = None, tol: float = 1e-10,
                 perturbations: int = 3):
        self.inst = inst
        self.seed = inst.seed if seed is None else seed
        self.tol = tol
        self.rng = np.random.default_rng(self.seed)
        self.report = Report(self.seed)
        self.coefficients = [inst.phi] + [self._perturb(inst.phi) for _ in range(perturbations)]

    # -- helpers ------------------------------------------------------------

    def _perturb(self, phi: Coefficient) -> Coefficient:
        noise = random_coefficient(self.rng, phi.m, phi.d, 0.3)
        return phi + noise

    @property
    def horizon(self) -> float:
        ends = [f.support_end for f in self.inst.step_functions.values()]
        return max(ends + [1.0])

    def pairs(self) -> list[tuple[StepFunction, StepFunction]]:
        fs = [StepFunction.zero(self.inst.d)] + list(self.inst.step_functions.values())
        return list(itertools.product(fs, repeat=2))[:9]

    def record(self, name, residual, bound, ms, detail=""):
        self.report.records.append(CheckRecord(name, float(residual), float(bound), ms, detail))

    # -- suites -------------------------------------------------------------

    def cocycle(self):
        T = self.horizon
        with _Timer() as tm:
            worst = 0.0
            for phi in self.coefficients:
                for gp, g in self.pairs():
                    r, t = self.rng.uniform(0, T, 2)
                    worst = max(worst, cocycle_residual(phi, gp, g, r, t))
        self.record("cocycle.identity", worst, self.tol, tm.ms)

        with _Timer() as tm:
            worst = 0.0
            for phi in self.coefficients:
                for gp, g in self.pairs():
                    extra = self.rng.uniform(0, T, 3)
                    a = propagator(phi, gp, g, T)
                    b = propagator(phi, gp, g, T, extra)
                    worst = max(worst, np.linalg.norm(a - b))
        self.record("cocycle.grid_refinement", worst, 1e-12, tm.ms)

        with _Timer() as tm:
            worst = 0.0
            c = complex_normal(self.rng, self.inst.d) / 2
            for phi in self.coefficients:
                s, t = self.rng.uniform(0, T, 2)
                P = lambda u: associated_semigroup(phi, c, c, u)
                worst = max(worst, np.linalg.norm(P(s) @ P(t) - P(s + t)))
        self.record("cocycle.semigroup_law", worst, 1e-11, tm.ms)

        N = self.inst.engine["truncation"]
        with _Timer() as tm:
            worst, detail = -math.inf, ""
            for phi in self.coefficients:
                for gp, g in self.pairs():
                    try:
                        series, tail = truncated_series(phi, self.inst.kappa, gp, g, T, N)
                    except TruncationError as exc:
                        worst, detail = math.inf, str(exc)
                        continue
                    exact = matrix_element(phi, self.inst.kappa, gp, g, T)
                    worst = max(worst, series.distance(exact) - tail)
        self.record("cocycle.engine_agreement", worst, 1e-10, tm.ms,
                    detail or "excess of |series - semigroup| over the tail bound")

        with _Timer() as tm:
            worst_rt = worst_k = 0.0
            for phi in self.coefficients:
                rec = reconstruct_phi(table_from_coefficient(phi))
                for _ in range(4):
                    zp = complex_normal(self.rng, phi.d + 1)
                    z = complex_normal(self.rng, phi.d + 1)
                    worst_rt = max(worst_rt, np.linalg.norm(rec(zp, z) - phi.slice(zp, z)))
                rebuilt = reconstruct_phi(table_from_engine(phi)).to_coefficient()
                for gp, g in self.pairs():
                    a = matrix_element(phi, self.inst.kappa, gp, g, T)
                    b = matrix_element(rebuilt, self.inst.kappa, gp, g, T)
                    worst_k = max(worst_k, a.distance(b))
        self.record("cocycle.reconstruct_roundtrip", worst_rt, 1e-12, tm.ms)
        self.record("cocycle.k_equals_kphi", worst_k, self.tol, tm.ms)

    def conjugate(self):
        J = self.inst.involution
        if J is None:
            raise StructureError("no conjugation structure")
        with _Timer() as tm:
            defect = float(np.linalg.norm(J @ J.conj() - np.eye(self.inst.m)))
        if defect > 1e-12:
            self.record("conjugate.involution", defect, 1e-12, tm.ms,
                        "structural error: involution is not involutive")
            return
        self.record("conjugate.involution", defect, 1e-12, tm.ms)
        T = self.horizon
        with _Timer() as tm:
            worst = 0.0
            for phi in self.coefficients:
                for gp, g in self.pairs():
                    worst = max(worst, conjugate_check("semigroup", phi, self.inst.kappa, J,
                                                       gp, g, T))
        self.record("conjugate.theorem", worst, self.tol, tm.ms)

    def lifting(self):
        T = self.horizon
        with _Timer() as tm:
            worst = 0.0
            for n in range(2, self.inst.engine["lift_max"] + 1):
                kap = self.inst.kappa.lift(n)
                for phi in self.coefficients:
                    lifted = phi.lift(n)
                    for gp, g in self.pairs():
                        a = matrix_element(lifted, kap, gp, g, T).entries
                        base = matrix_element(phi, self.inst.kappa, gp, g, T).entries
                        b = InitialMap(base).lift(n).kappa
                        worst = max(worst, np.linalg.norm(a - b))
        self.record("lifting.compatibility", worst, 1e-11, tm.ms)

    def bounds(self):
        d, m = self.inst.d, self.inst.m
        with _Timer() as tm:
            failures, worst = 0, 0.0
            for _ in range(100):
                n = int(self.rng.integers(0, 5))
                kap = random_kappa(self.rng, m, self.inst.p_prime, self.inst.p)
                phi = random_coefficient(self.rng, m, d)
                cols = []
                for _ in range(n):
                    zeta = complex_normal(self.rng, d + 1)
                    cols.append(phi.column(zeta / np.linalg.norm(zeta)))
                res = composition_bound_check(kap, cols)
                failures += not res.holds
                worst = max(worst, res.lhs / res.rhs if res.rhs else 0.0)
        self.record("bounds.composition_lemma", failures, 0, tm.ms,
                    f"violations out of 100 random cases; max lhs/rhs {worst:.6f}")

        with _Timer() as tm:
            x = float(self.rng.uniform(0.5, 4.0))
            tails = [exp_tail(x, N) for N in range(int(x) + 1, 30)]
            increases = sum(b >= a for a, b in zip(tails, tails[1:]) if a > 0)
        self.record("bounds.tail_monotone", increases, 0, tm.ms)

        slots = 2 * self.inst.engine["slots"]
        T = self.horizon
        grid = ToyFock(T, slots, d)
        kind = self.inst.constants["fe_constant"]
        with _Timer() as tm:
            worst_fe = worst_h = 0.0
            notes = []
            for name, g in [("zero", StepFunction.zero(d))] + list(self.inst.step_functions.items()):
                try:
                    grid.sample(g)
                except GridError:
                    notes.append(f"{name} skipped (off-grid)")
                    continue
                for b in range(self.inst.p):
                    state = euler_solve(self.inst.phi, self.inst.kappa, np.eye(self.inst.p)[b], g, grid)
                    worst_fe = max(worst_fe, fe_check(state, kind).max_ratio)
                    worst_h = max(worst_h, hoelder_scan(state, kind)["max_ratio"])
        self.record("bounds.fundamental_estimate", worst_fe, 1.0, tm.ms, "; ".join(notes))
        self.record("bounds.hoelder", worst_h, 1.0, tm.ms, "; ".join(notes))

    def weak(self):
        T = self.horizon
        steps = self.inst.engine["quadrature_steps"]
        with _Timer() as tm:
            worst, worst_order = 0.0, math.inf
            for gp, g in self.pairs():
                worst = max(worst, weak_residual(self.inst.phi, self.inst.kappa, gp, g, T, steps))
                coarse = weak_residual(self.inst.phi, self.inst.kappa, gp, g, T, 8)
                fine = weak_residual(self.inst.phi, self.inst.kappa, gp, g, T, 16)
                if fine > 1e-13:
                    worst_order = min(worst_order, math.log2(coarse / fine))
        self.record("weak.residual", worst, 1e-9, tm.ms)
        order = worst_order if math.isfinite(worst_order) else 4.0
        self.record("weak.simpson_order", -order, -3.5, tm.ms,
                    "negated observed order of the residual under step doubling")

    def coalg(self):
        C, vphi = self.inst.coalgebra, self.inst.varphi
        if C is None:
            raise StructureError("instance has no coalgebra section")
        with _Timer() as tm:
            rep = coalg.validate(C)
        self.record("coalg.validate", rep.max_violation, 1e-12, tm.ms)
        phi = coalg.induced_coefficient(C, vphi)
        with _Timer() as tm:
            worst = 0.0
            for i in range(C.m):
                V1 = coalg.localise(phi, np.eye(C.m)[i]).basis
                for j in range(V1.shape[1]):
                    W = coalg.localise(phi, V1[:, j]).basis
                    worst = max(worst, np.linalg.norm(W - V1 @ (V1.conj().T @ W)))
        self.record("coalg.localise_stability", worst, 1e-10, tm.ms)
        with _Timer() as tm:
            lam, mu, nu = (complex_normal(self.rng, C.m) for _ in range(3))
            left = coalg.convolve(coalg.convolve(lam, mu, C), nu, C)
            right = coalg.convolve(lam, coalg.convolve(mu, nu, C), C)
        self.record("coalg.associativity", np.max(np.abs(left - right)), 1e-12, tm.ms)
        T = self.horizon
        with _Timer() as tm:
            res = max(coalg.convolution_residual(C, vphi, gp, g, T, 64) for gp, g in self.pairs()[:4])
        self.record("coalg.qsde_residual", res, 1e-9, tm.ms)
        with _Timer() as tm:
            res = max(coalg.counit_slice_defect(C, vphi, gp, g, T) for gp, g in self.pairs())
        self.record("coalg.counit_slice", res, 1e-11, tm.ms)

    def run(self, suite: str = "all") -> Report:
        if suite == "all":
            names = [s for s in SUITES
                     if not (s == "coalg" and self.inst.coalgebra is None)
                     and not (s == "conjugate" and self.inst.involution is None)]
        elif suite in SUITES:
            names = [suite]
        else:
            raise ValueError(f"unknown suite {suite!r}")
        for name in names:
            log.debug("suite %s (seed %d)", name, self.seed)
            getattr(self, name)()
        return self.report


def verify(inst: Instance, suite: str = "all", tol: float = 1e-10,
           seed: int | None = None) -> Report:
    return Verifier(inst, seed, tol).run(suite)
