import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import dblquad

from qsde.coefficients import Coefficient, InitialMap
from qsde.guichardet import (SeriesAccumulator, TruncationError, exp_tail, fe_constant,
                             hoelder_bound, truncated_series, upsilon_sigma, weak_compositions)
from qsde.noise import StepFunction
from qsde.sampling import random_coefficient, random_instance, random_kappa, random_step_function
from qsde.semigroup import matrix_element

from conftest import scalar_phi

seeds = st.integers(0, 2**32 - 1)


def test_scalar_truncation_n3():
    z = StepFunction.zero(1)
    res, tail = truncated_series(scalar_phi(), InitialMap.identity(1), z, z, 1.0, 3)
    assert res.entries[0, 0, 0] == pytest.approx(1 / 3, abs=1e-15)
    assert tail == pytest.approx(0.0516152, abs=1e-7)
    err = abs(res.entries[0, 0, 0] - math.exp(-1))
    assert err == pytest.approx(0.034546, abs=1e-6)
    assert err <= tail
    res, tail = truncated_series(scalar_phi(), InitialMap.identity(1), z, z, 1.0, 18)
    assert abs(res.entries[0, 0, 0] - math.exp(-1)) <= 1e-12


def test_zero_phi(rng):
    kap = random_kappa(rng, 2, 2, 1)
    g = random_step_function(rng, 1, 3, 1.0)
    for N in (0, 3, 18):
        res, tail = truncated_series(Coefficient.zero(1, 2), kap, g, g, 1.0, N)
        np.testing.assert_array_equal(res.entries, kap.kappa)
        assert tail == 0.0


def test_constant_plateau_taylor(rng):
    phi = random_coefficient(rng, 3, 1)
    c = np.array([0.4 - 0.3j])
    g = StepFunction.indicator(c, 0, 2)
    t, N = 0.9, 6
    res, _ = truncated_series(phi, None, g, g, t, N)
    psi = phi.psi(c, c)
    taylor = sum(np.linalg.matrix_power(t * psi, n) / math.factorial(n) for n in range(N + 1))
    np.testing.assert_allclose(res.entries[:, :, 0].T, taylor, atol=1e-14)


def test_exp_tail():
    assert exp_tail(0.0, 3) == 0.0
    exact = math.e - sum(1 / math.factorial(n) for n in range(4))
    assert exact <= exp_tail(1.0, 3) <= exact * (1 + 1e-9)
    tails = [exp_tail(2.5, N) for N in range(1, 25)]
    assert all(b < a for a, b in zip(tails, tails[1:]))
    with pytest.raises(TruncationError):
        exp_tail(5.0, 3)


def test_guard(rng):
    z = StepFunction.zero(1)
    with pytest.raises(TruncationError):
        truncated_series(scalar_phi(), None, z, z, 10.0, 5)


@pytest.mark.parametrize("n,k", [(0, 1), (3, 1), (4, 3), (6, 4), (5, 2)])
def test_level_count(n, k):
    comps = list(weak_compositions(n, k))
    assert len(comps) == len(set(comps)) == math.comb(n + k - 1, k - 1)
    assert all(sum(c) == n and len(c) == k for c in comps)


def test_accumulator_counts(rng):
    gens = [random_coefficient(rng, 2, 1).theta[0, 0] for _ in range(3)]
    acc = SeriesAccumulator([0.2, 0.3, 0.5], gens, 6).run()
    assert acc.counts == [math.comb(n + 2, 2) for n in range(7)]


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_oracle_agreement(seed):
    rng = np.random.default_rng(seed)
    phi, kap, gp, g, t = random_instance(rng)
    res, tail = truncated_series(phi, kap, gp, g, t, 18)
    assert res.distance(matrix_element(phi, kap, gp, g, t)) <= tail + 1e-10


def test_composition_collapse(rng):
    phi, kap, gp, g, t = random_instance(rng, psi_bound=1.0)
    res, tail = truncated_series(phi, kap, gp, g, t, 40)
    assert tail < 1e-30
    assert res.distance(matrix_element(phi, kap, gp, g, t)) <= 1e-13


def test_upsilon_examples(rng):
    phi = random_coefficient(rng, 2, 1)
    kap = random_kappa(rng, 2, 2, 2)
    g = StepFunction([0.5, 1.0], [[0.3], [-0.7j]])
    np.testing.assert_array_equal(upsilon_sigma(phi, kap, g, g, []), kap.kappa)
    c = StepFunction.indicator([0.2 + 0.1j], 0, 1)
    np.testing.assert_allclose(upsilon_sigma(phi, kap, c, c, [0.4]),
                               kap.compose(phi.psi([0.2 + 0.1j], [0.2 + 0.1j])))
    p1, p2 = phi.psi([0.3], [0.3]), phi.psi([-0.7j], [-0.7j])
    np.testing.assert_allclose(upsilon_sigma(phi, kap, g, g, [0.8, 0.2]), kap.compose(p1 @ p2))


def test_level_two_against_simplex_quadrature(rng):
    """Level-2 term equals the integral of upsilon over the time-ordered 2-simplex."""
    phi = random_coefficient(rng, 1, 1)
    g = StepFunction([0.5, 1.0], [[0.3], [-0.7j]])
    f = lambda s1, s2: upsilon_sigma(phi, None, g, g, [s1, s2])[0, 0, 0]

    def integrate(a1, b1, lo, hi):
        # s1 in [a1, b1), s2 in [lo(s1), hi); pieces avoid the plateau jump
        out = 0j
        for part in (np.real, np.imag):
            val = dblquad(lambda s2, s1: part(f(s1, s2)), a1, b1, lo, lambda s1: hi,
                          epsabs=1e-13)[0]
            out += val if part is np.real else 1j * val
        return out

    quad = (integrate(0, 0.5, lambda s1: s1, 0.5) + integrate(0, 0.5, lambda s1: 0.5, 1.0)
            + integrate(0.5, 1.0, lambda s1: s1, 1.0))
    acc = SeriesAccumulator([0.5, 0.5], [phi.psi([0.3], [0.3]), phi.psi([-0.7j], [-0.7j])], 2).run()
    assert abs(quad - acc.levels[2][0, 0]) <= 1e-10


def test_fe_constant():
    z = StepFunction.zero(1)
    assert fe_constant(z, 1.0) == pytest.approx(math.sqrt(2 * math.e))
    assert fe_constant(z, 1.0, "linear") == pytest.approx(math.sqrt(2))
    g = StepFunction.indicator([2.0], 0, 1)
    assert fe_constant(g, 0.5, "linear") == pytest.approx(math.sqrt(2 * (0.5 + 2.0)))
    with pytest.raises(ValueError):
        fe_constant(z, 1.0, "cubic")


def test_hoelder_bound_examples():
    phi = scalar_phi()
    z = StepFunction.zero(1)
    assert hoelder_bound(phi, None, z, 0.4, 0.4, 1.0) == 0.0
    b1 = hoelder_bound(phi, None, z, 0.1, 0.2, 1.0)
    b2 = hoelder_bound(phi, None, z, 0.1, 0.5, 1.0)
    assert b2 / b1 == pytest.approx(2.0)
    CT = fe_constant(z, 1.0)
    C = CT * math.sqrt(2) * 1.0
    series = sum(math.exp(n * math.log(C) - 0.5 * math.lgamma(n + 1)) for n in range(400))
    assert hoelder_bound(phi, None, z, 0.2, 0.6, 1.0) == pytest.approx(math.sqrt(0.4) * CT * series)
