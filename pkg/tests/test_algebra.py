import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pshlab.algebra import (
    PSH,
    Automorphism,
    GroupElement,
    InternalConsistencyError,
    ad_matrix,
    bracket,
    is_automorphism,
    verify_matrix_realization,
)

E1, E2, E3 = np.eye(3)
finite = st.floats(-5, 5, allow_nan=False)
vec = st.tuples(finite, finite, finite).map(np.array)


def test_basis_brackets():
    assert np.array_equal(bracket(E1, E2), E2)
    assert np.array_equal(bracket(E1, E3), E2 + E3)
    assert np.array_equal(bracket(E2, E3), np.zeros(3))


def test_bracket_of_sample_vectors():
    # [(1,0,0),(0,1,1)] = e2 + (e2 + e3)
    assert np.array_equal(bracket(E1, E2 + E3), [0.0, 2.0, 1.0])


def test_ad_matrix_columns():
    x, y, z = 0.7, -1.3, 2.1
    expected = np.array([[0, 0, 0], [-y - z, x, x], [-z, 0, x]])
    assert np.allclose(ad_matrix([x, y, z]), expected, atol=0)


def test_first_row_of_ad_vanishes(rng):
    for v in rng.normal(size=(20, 3)):
        assert np.all(ad_matrix(v)[0] == 0)


def test_structure_identities():
    assert PSH.antisymmetry_residual() == 0.0
    assert PSH.jacobi_residual() == 0.0


@settings(max_examples=60, deadline=None)
@given(vec, vec, vec)
def test_jacobi_random(u, v, w):
    scale = max(1.0, float(np.abs([u, v, w]).max())) ** 3
    assert PSH.jacobi_residual(u, v, w) <= 1e-12 * scale


@settings(max_examples=60, deadline=None)
@given(vec, vec)
def test_antisymmetry_random(u, v):
    assert np.allclose(bracket(u, v), -bracket(v, u), atol=1e-12)


def test_automorphism_closed_form_inverse(rng):
    for _ in range(50):
        phi = Automorphism.random(rng)
        assert is_automorphism(phi.matrix)
        assert np.allclose(phi.inverse().matrix @ phi.matrix, np.eye(3), atol=1e-12)
        psi = Automorphism.random(rng)
        assert is_automorphism((phi @ psi).matrix)


def test_non_automorphisms_rejected():
    assert not is_automorphism(np.diag([2.0, 1.0, 1.0]))
    assert not is_automorphism(np.eye(3)[[0, 2, 1]])
    with pytest.raises(ValueError):
        Automorphism(a=0, b=0, c=0, d=0)


def test_automorphism_preserves_brackets(rng):
    phi = Automorphism.random(rng)
    u, v = rng.normal(size=(2, 3))
    assert np.allclose(phi(bracket(u, v)), bracket(phi(u), phi(v)), atol=1e-12)


def test_matrix_realization():
    assert verify_matrix_realization()


def test_group_law(rng):
    for _ in range(20):
        g = GroupElement(*rng.normal(size=3))
        h = GroupElement(*rng.normal(size=3))
        k = GroupElement(*rng.normal(size=3))
        assert np.allclose(((g * h) * k).coords, (g * (h * k)).coords, atol=1e-10)
        assert np.allclose((g * g.inverse()).coords, 0.0, atol=1e-12)


def test_group_from_matrix_rejects_foreign_matrix():
    with pytest.raises(InternalConsistencyError):
        GroupElement.from_matrix(np.arange(9.0).reshape(3, 3))
