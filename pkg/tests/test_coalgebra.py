import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsde import coalgebra as co
from qsde.coefficients import Coefficient
from qsde.noise import StepFunction, hat
from qsde.sampling import complex_normal
from qsde.semigroup import propagator

seeds = st.integers(0, 2**32 - 1)


def divided_power_varphi(m, rng, d=1):
    return co.GeneratorFunctional(complex_normal(rng, (m, d + 1, d + 1)) / 3)


def test_validate_examples():
    assert co.validate(co.Coalgebra.group_like()).ok
    assert co.validate(co.Coalgebra.divided_power(4)).ok
    C = co.Coalgebra.divided_power(4)
    delta = C.delta.copy()
    delta[2, 0, 2] += 1e-3
    rep = co.validate(co.Coalgebra(delta, C.counit))
    assert not rep.ok and rep.max_violation == pytest.approx(1e-3, rel=1e-2)
    assert rep.left_counit == pytest.approx(1e-3, rel=1e-9)


def test_convolve_examples(rng):
    C = co.Coalgebra.divided_power(3)
    a, c = complex_normal(rng, 3), complex_normal(rng, 3)
    np.testing.assert_allclose(co.convolve(a, C.counit, C), a)
    np.testing.assert_allclose(co.convolve(C.counit, a, C), a)
    np.testing.assert_allclose(co.convolve(a, c, C)[2], a[0] * c[2] + a[1] * c[1] + a[2] * c[0])
    G = co.Coalgebra.group_like()
    assert co.convolve([2.0], [3j], G)[0] == pytest.approx(6j)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 6))
def test_convolve_associative(seed, m):
    rng = np.random.default_rng(seed)
    C = co.Coalgebra.divided_power(m)
    lam, mu, nu = (complex_normal(rng, m) for _ in range(3))
    np.testing.assert_allclose(co.convolve(co.convolve(lam, mu, C), nu, C),
                               co.convolve(lam, co.convolve(mu, nu, C), C), atol=1e-12)


def test_induced_examples(rng):
    A = complex_normal(rng, (2, 2))
    G = co.Coalgebra.group_like()
    phi = co.induced_coefficient(G, co.GeneratorFunctional(A[None]))
    np.testing.assert_allclose(phi.theta[:, :, 0, 0], A)
    C = co.Coalgebra.divided_power(2)
    zero = co.induced_coefficient(C, co.GeneratorFunctional(np.zeros((2, 2, 2))))
    assert not np.any(zero.theta)
    B = complex_normal(rng, (2, 2))
    phi = co.induced_coefficient(C, co.GeneratorFunctional(np.stack([A, B])))
    for a in range(2):
        for b in range(2):
            # theta(x_1) = A x_1 + B x_0; theta(x_0) = A x_0
            np.testing.assert_allclose(phi.theta[a, b][:, 1], [B[a, b], A[a, b]])
            np.testing.assert_allclose(phi.theta[a, b][:, 0], [A[a, b], 0])


def test_localise_examples(rng):
    G = co.Coalgebra.group_like()
    phi = co.induced_coefficient(G, co.GeneratorFunctional(complex_normal(rng, (1, 2, 2))))
    assert co.localise(phi, [1.0]).dim == 1
    C = co.Coalgebra.divided_power(6)
    phi = co.induced_coefficient(C, divided_power_varphi(6, rng))
    for n in range(6):
        loc = co.localise(phi, np.eye(6)[n])
        assert loc.dim == n + 1
        assert np.all(np.abs(loc.basis[n + 1:]) <= 1e-12)
        assert loc.closure_defect <= 1e-12
    th = complex_normal(rng, (2, 2, 4, 4))
    assert co.localise(Coefficient(th), complex_normal(rng, 4)).dim == 4


def test_localise_cap(rng):
    C = co.Coalgebra.divided_power(5)
    phi = co.induced_coefficient(C, divided_power_varphi(5, rng))
    with pytest.raises(co.LocalisationError, match="cap exceeded"):
        co.localise(phi, np.eye(5)[4], cap=3)
    assert co.localise(phi, np.eye(5)[2], cap=3).dim == 3


def test_localise_pairs(rng):
    th = np.zeros((2, 2, 3, 3), dtype=complex)
    th[0, 0] = np.diag([1.0, 2.0, 3.0])
    th[1, 1] = np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]])
    phi = Coefficient(th)
    x = np.array([0, 1.0, 0])
    assert co.localise(phi, x, pairs=[([0], [0])]).dim == 1
    assert co.localise(phi, x, pairs=[([1], [1])]).dim == 2


def test_localise_stability(rng):
    C = co.Coalgebra.divided_power(5)
    phi = co.induced_coefficient(C, divided_power_varphi(5, rng))
    V1 = co.localise(phi, np.eye(5)[3]).basis
    for _ in range(4):
        y = V1 @ complex_normal(rng, V1.shape[1])
        W = co.localise(phi, y).basis
        assert np.linalg.norm(W - V1 @ (V1.conj().T @ W)) <= 1e-10


def test_localised_solve_stays_in_subspace(rng):
    C = co.Coalgebra.divided_power(5)
    phi = co.induced_coefficient(C, divided_power_varphi(5, rng))
    g = StepFunction([0.5, 1.0], [[0.3], [-0.5j]])
    M = propagator(phi, g, g, 1.0)
    V1 = co.localise(phi, np.eye(5)[2]).basis
    y = M @ np.eye(5)[2]
    assert np.linalg.norm(y - V1 @ (V1.conj().T @ y)) <= 1e-12


def test_convolution_cocycle_examples(rng):
    G = co.Coalgebra.group_like()
    vp = co.GeneratorFunctional(complex_normal(rng, (1, 2, 2)) / 2)
    z = StepFunction.zero(1)
    np.testing.assert_allclose(co.convolution_cocycle(G, vp, z, z, 0.0), G.counit)
    c, cp = np.array([0.3 + 0.2j]), np.array([-0.4j])
    g, gp = StepFunction.indicator(c, 0, 3), StepFunction.indicator(cp, 0, 3)
    t = 1.7
    expected = np.exp(t * np.vdot(hat(cp), vp.varphi[0] @ hat(c)))
    assert abs(co.convolution_cocycle(G, vp, gp, g, t)[0] - expected) <= 1e-10

    C = co.Coalgebra.divided_power(3)
    a, b = -0.6 + 0.2j, 0.9 - 0.3j
    v = complex_normal(rng, (3, 2, 2))
    v[0, 0, 0], v[1, 0, 0] = a, b
    lt = co.convolution_cocycle(C, co.GeneratorFunctional(v), z, z, t)
    assert abs(lt[1] - b * t * np.exp(a * t)) <= 1e-10
    assert abs(lt[0] - np.exp(a * t)) <= 1e-10


def test_convolution_residual(rng):
    G = co.Coalgebra.group_like()
    z = StepFunction.zero(1)
    assert co.convolution_residual(G, co.GeneratorFunctional(np.zeros((1, 2, 2))), z, z, 1.0) == 0
    vp = co.GeneratorFunctional(complex_normal(rng, (1, 2, 2)) / 2)
    g = StepFunction.indicator([0.5], 0, 1)
    assert co.convolution_residual(G, vp, g, g, 1.0, 64) <= 1e-9
    r4, r8 = (co.convolution_residual(G, vp, g, g, 1.0, n) for n in (4, 8))
    assert math.log2(r4 / r8) == pytest.approx(4.0, abs=0.3)
    C = co.Coalgebra.divided_power(4)
    vp = divided_power_varphi(4, rng)
    h = StepFunction([0.4, 1.0], [[0.2], [0.1 - 0.3j]])
    assert co.convolution_residual(C, vp, h, g, 1.0, 64) <= 1e-9


@pytest.mark.parametrize("m", [1, 3, 6])
def test_counit_slice(rng, m):
    C = co.Coalgebra.divided_power(m)
    vp = divided_power_varphi(m, rng)
    g = StepFunction([0.4, 1.0], [[0.2], [0.1 - 0.3j]])
    assert co.counit_slice_defect(C, vp, g, g, 1.0) <= 1e-11


def test_shape_errors():
    with pytest.raises(ValueError):
        co.Coalgebra(np.ones((2, 2, 1)), np.ones(2))
    with pytest.raises(ValueError):
        co.GeneratorFunctional(np.ones((2, 2, 3)))
    with pytest.raises(ValueError):
        co.induced_coefficient(co.Coalgebra.divided_power(2), co.GeneratorFunctional(np.ones((3, 2, 2))))
