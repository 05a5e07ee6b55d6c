import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsde.cocycle import (SemigroupTable, conjugate_check, conjugate_generator,
                          default_probes, difference_quotient_generator, reconstruct_phi,
                          table_from_coefficient, table_from_engine)
from qsde.coefficients import Coefficient, InitialMap, StructureError
from qsde.noise import StepFunction, hat
from qsde.sampling import (complex_normal, permutation_involution, random_coefficient,
                           random_instance, random_involution)
from qsde.semigroup import associated_semigroup, matrix_element

from conftest import scalar_phi

seeds = st.integers(0, 2**32 - 1)


def test_probe_slices(rng):
    phi = random_coefficient(rng, 2, 2)
    rec = reconstruct_phi(table_from_coefficient(phi))
    for c in default_probes(2):
        for cp in default_probes(2):
            np.testing.assert_allclose(rec(hat(cp), hat(c)), phi.psi(cp, c), atol=1e-15)
    np.testing.assert_allclose(rec(hat([0, 0]), hat([0, 0])), phi.theta[0, 0])


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_roundtrip(seed):
    rng = np.random.default_rng(seed)
    m, d = int(rng.integers(1, 4)), int(rng.integers(1, 3))
    phi = random_coefficient(rng, m, d)
    rec = reconstruct_phi(table_from_coefficient(phi))
    for _ in range(3):
        zp, z = complex_normal(rng, d + 1), complex_normal(rng, d + 1)
        assert np.max(np.abs(rec(zp, z) - phi.slice(zp, z))) <= 1e-12
    assert np.max(np.abs(rec.to_coefficient().theta - phi.theta)) <= 1e-12


def test_missing_probe_reported(rng):
    phi = random_coefficient(rng, 2, 1)
    table = table_from_coefficient(phi)
    zp = np.array([1.0, 2.0])
    with pytest.raises(KeyError, match="lacks probes"):
        reconstruct_phi(table).block(zp, zp)
    # the sesquilinear extension still evaluates it
    np.testing.assert_allclose(reconstruct_phi(table)(zp, zp), phi.slice(zp, zp), atol=1e-13)
    empty = SemigroupTable(1, 2)
    with pytest.raises(KeyError):
        reconstruct_phi(empty).to_coefficient()


@pytest.mark.parametrize("engine", ["semigroup", "guichardet"])
def test_k_equals_kphi(rng, engine):
    for _ in range(5):
        phi, kap, gp, g, t = random_instance(rng, m_max=3)
        rebuilt = reconstruct_phi(table_from_engine(phi, engine=engine)).to_coefficient()
        assert np.max(np.abs(rebuilt.theta - phi.theta)) <= 1e-9
        assert matrix_element(rebuilt, kap, gp, g, t).distance(
            matrix_element(phi, kap, gp, g, t)) <= 1e-10


def test_engine_semigroups(rng):
    phi = random_coefficient(rng, 3, 2)
    c, cp = complex_normal(rng, 2) / 2, complex_normal(rng, 2) / 2
    for s, t in rng.uniform(0, 1, (4, 2)):
        P = lambda u: associated_semigroup(phi, cp, c, u)
        assert np.linalg.norm(P(s) @ P(t) - P(s + t)) <= 1e-11


def test_difference_quotient():
    z = np.zeros(1)
    assert not np.any(difference_quotient_generator("semigroup", Coefficient.zero(1, 2), z, z, 1e-3))
    est = difference_quotient_generator("semigroup", scalar_phi(), z, z, 1e-3)[0, 0]
    assert est.real == pytest.approx(-0.9995, abs=1e-6) and abs(est + 1) <= 1e-3
    b1 = abs(difference_quotient_generator("semigroup", scalar_phi(), z, z, 1e-2)[0, 0] + 1)
    b2 = abs(difference_quotient_generator("semigroup", scalar_phi(), z, z, 5e-3)[0, 0] + 1)
    assert b1 / b2 == pytest.approx(2.0, rel=0.01)
    with pytest.raises(ValueError):
        difference_quotient_generator("semigroup", scalar_phi(), z, z, 0.0)


def test_conjugate_self_conjugate_scalar():
    th = np.zeros((2, 2, 1, 1))
    th[:, :, 0, 0] = [[-1.0, 0.5], [0.5, 0.2]]
    phi = Coefficient(th)
    g = StepFunction([0.5, 1.0], [[0.3], [-0.2j]])
    gp = StepFunction([0.7], [[1.0 + 1j]])
    res = conjugate_check("semigroup", phi, InitialMap.identity(1), [[1.0]], gp, g, 1.0)
    assert res <= 1e-14


def test_conjugate_random(rng):
    for _ in range(10):
        phi, kap, gp, g, t = random_instance(rng)
        for J in (permutation_involution(phi.m), random_involution(rng, phi.m)):
            assert conjugate_check("semigroup", phi, kap, J, gp, g, t) <= 1e-10


def test_conjugate_guichardet(rng):
    phi, kap, gp, g, t = random_instance(rng, psi_bound=1.0)
    J = random_involution(rng, phi.m)
    assert conjugate_check("guichardet", phi, kap, J, gp, g, t, truncation=30) <= 1e-10


def test_self_conjugate_element(rng):
    # theta[mu, nu] = conj(theta[nu, mu]) is fixed by the conjugation with J = 1
    th = complex_normal(rng, (2, 2, 3, 3))
    th = (th + np.conj(np.transpose(th, (1, 0, 2, 3)))) / 4
    phi = Coefficient(th)
    np.testing.assert_allclose(phi.conjugate(np.eye(3)).theta, phi.theta)
    kap = InitialMap.diagonal(3)
    g = StepFunction([0.5, 1.3], [[0.4 - 0.2j], [0.7]])
    me = matrix_element(phi, kap, g, g, 1.3)
    x = complex_normal(rng, 3)
    np.testing.assert_allclose(me.apply(x).conj().T, me.apply(x.conj()), atol=1e-13)


def test_conjugate_structure_errors(rng):
    phi = random_coefficient(rng, 2, 1)
    z = StepFunction.zero(1)
    kap = InitialMap.identity(2)
    with pytest.raises(StructureError, match="not involutive"):
        conjugate_check("semigroup", phi, kap, np.array([[1, 1], [0, 1]]), z, z, 1.0)
    with pytest.raises(StructureError):
        conjugate_check("semigroup", phi, kap, None, z, z, 1.0)


def test_conjugate_generator(rng):
    J = random_involution(rng, 3)
    psi = complex_normal(rng, (3, 3))
    np.testing.assert_allclose(conjugate_generator(conjugate_generator(psi, J), J), psi, atol=1e-13)
