import json

import numpy as np
import pytest

from pshlab.algebra import bracket
from pshlab.euler_arnold import table_field
from pshlab.geometry import (
    D_PLANE,
    F_PLANE,
    Subalgebra2,
    curvature,
    f_beta,
    is_kundt_pair,
    kundt_scan,
    levi_civita,
    lowered_curvature,
    scan_all,
    subalgebra_catalog,
)
from pshlab.metric import NormalFormLabel, normal_form_matrix, parse_label

from .conftest import ALL_LABELS, label_id

E1, E2, E3 = np.eye(3)


@pytest.mark.parametrize("label", ALL_LABELS, ids=label_id)
def test_levi_civita_invariants(label):
    prod = levi_civita(normal_form_matrix(label))
    assert prod.torsion_residual() < 1e-13
    assert prod.compatibility_residual() < 1e-13
    assert np.allclose(prod(E1, E2) - prod(E2, E1), E2, atol=1e-14)


@pytest.mark.parametrize("label", ALL_LABELS, ids=label_id)
def test_product_ties_to_geodesic_field(label, rng):
    m = normal_form_matrix(label)
    prod = levi_civita(m)
    F = table_field(label)
    Q = m.matrix
    for v, w in rng.normal(size=(50, 2, 3)):
        assert np.allclose(F(v), -prod(v, v), atol=1e-12)
        assert abs(F(v) @ Q @ w - v @ Q @ bracket(v, w)) < 1e-12


def test_q6_is_flat():
    assert np.max(np.abs(curvature(normal_form_matrix(NormalFormLabel("Q6"))))) < 1e-12


def test_q3_is_not_flat():
    assert np.max(np.abs(curvature(normal_form_matrix(NormalFormLabel("Q3"))))) > 0.1


@pytest.mark.parametrize("label", ALL_LABELS, ids=label_id)
def test_curvature_symmetries(label):
    m = normal_form_matrix(label)
    R = curvature(m)
    assert np.allclose(R, -R.transpose(1, 0, 2, 3), atol=1e-12)
    bianchi = R + np.einsum("jkil->ijkl", R) + np.einsum("kijl->ijkl", R)
    assert np.max(np.abs(bianchi)) < 1e-12
    low = lowered_curvature(m)
    assert np.allclose(low, -low.transpose(1, 0, 2, 3), atol=1e-12)
    assert np.allclose(low, -low.transpose(0, 1, 3, 2), atol=1e-12)
    assert np.allclose(low, low.transpose(2, 3, 0, 1), atol=1e-12)


def test_subalgebra_validation():
    with pytest.raises(ValueError):
        Subalgebra2([[1.0, 0, 0], [2.0, 0, 0]])
    with pytest.raises(ValueError):
        Subalgebra2([[1.0, 0, 0]])
    assert F_PLANE.is_subalgebra() and D_PLANE.is_subalgebra()
    assert not Subalgebra2([[1.0, 0, 0], [0, 0, 1]]).is_subalgebra()
    assert all(h.is_subalgebra() for h in subalgebra_catalog())


def test_catalog_grid():
    cat = subalgebra_catalog()
    assert len(cat) == 42
    assert str(cat[0]) == "d"
    assert sum(str(h) == "f" for h in cat) == 1
    assert np.isclose(abs(f_beta(0.0).normal @ F_PLANE.normal), 1.0)


@pytest.mark.parametrize("key, plane, verdict", [
    ("Q3", F_PLANE, True), ("Q4", F_PLANE, True), ("Q5", D_PLANE, True), ("Q6", D_PLANE, True),
    ("Q1:1", D_PLANE, False), ("Q5", F_PLANE, False), ("Q3", D_PLANE, False),
])
def test_kundt_pairs(key, plane, verdict):
    report = is_kundt_pair(normal_form_matrix(parse_label(key)), plane)
    assert report.verdict is verdict
    assert report.verdict == all(report.checks.values())


def test_q1_riemannian_restriction_not_degenerate():
    report = is_kundt_pair(normal_form_matrix(NormalFormLabel.Q1(1)), D_PLANE)
    assert report.checks["degenerate_restriction"] is False


EXPECTED_PAIRS = {"Q3": ["f"], "Q4": ["f"], "Q5": ["d"], "Q6": ["d"]}


@pytest.mark.parametrize("label", ALL_LABELS, ids=label_id)
def test_scan_finds_exactly_the_expected_pairs(label):
    found = kundt_scan(normal_form_matrix(label))
    assert [str(r.subalgebra) for r in found] == EXPECTED_PAIRS.get(label.tag, [])
    assert all(r.invariant_plane for r in found)


@pytest.mark.parametrize("label", ALL_LABELS, ids=label_id)
def test_kundt_invariant_plane_equivalence(label):
    for report, invariant in scan_all(normal_form_matrix(label)):
        if report.checks["degenerate_restriction"]:
            assert report.checks["product_stable"] == invariant


def test_report_json():
    report = kundt_scan(normal_form_matrix(NormalFormLabel("Q6")))[0]
    data = json.loads(json.dumps(report.to_dict()))
    assert set(data["checks"]) == {"subalgebra", "degenerate_restriction", "product_stable",
                                   "null_generator_geodesic"}
    assert data["verdict"] is True
    assert data["subalgebra"] == "d"
