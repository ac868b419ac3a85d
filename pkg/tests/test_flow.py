import math

import numpy as np
import pytest

from pshlab.algebra import Automorphism
from pshlab.euler_arnold import GeodesicField, build_field, table_field
from pshlab.flow import (
    UNBOUNDED_PLANE,
    CompletenessVerdict,
    IntegrationFailure,
    IntegratorConfig,
    Refusal,
    Status,
    UnsupportedLabelError,
    certify_blowup,
    completeness_verdict,
    integrate,
    level_set_bound,
    riccati_escape_bound,
    symmetry_reduce,
    verdict_for_metric,
)
from pshlab.metric import NormalFormLabel, act, normal_form_matrix, parse_label

Q3 = NormalFormLabel("Q3")
Q5 = NormalFormLabel("Q5")


def test_config_validation():
    for bad in (dict(rtol=0), dict(atol=-1), dict(threshold=1.0), dict(t_max=0), dict(max_steps=0)):
        with pytest.raises(ValueError):
            IntegratorConfig(**bad)


def test_rejects_bad_initial_state():
    with pytest.raises(ValueError):
        integrate(table_field(Q3), [1.0, np.nan, 0.0])
    with pytest.raises(ValueError):
        integrate(table_field(Q3), [1.0, 0.0])


def test_origin_is_fixed():
    traj = integrate(table_field(Q3), np.zeros(3), IntegratorConfig(t_max=5))
    assert traj.status is Status.REACHED_TIME_BOUND
    assert np.all(traj.states == 0)


def test_q3_plane_closed_form():
    traj = integrate(table_field(Q3), (1.0, 1.0, 0.0), IntegratorConfig(t_max=10))
    assert traj.t[-1] == 10.0
    exact = np.stack([np.ones_like(traj.t), np.exp(traj.t), np.zeros_like(traj.t)], axis=1)
    rel = np.linalg.norm(traj.states - exact, axis=1) / np.linalg.norm(exact, axis=1)
    assert rel.max() < 1e-8


def test_idempotent_ray_blowup():
    traj = integrate(table_field(Q5), (1.0, 0.0, 0.0))
    assert traj.status is Status.BLOWUP_CERTIFIED
    assert traj.certificate.mechanism == "idempotent-ray"
    lo, hi = traj.escape_interval
    assert lo <= 1.0 <= hi
    assert abs(traj.escape_estimate - 1.0) < 1e-6


def test_scaled_idempotent_escape_time():
    # v0 = kappa x0 escapes at 1 / kappa
    traj = integrate(table_field(Q5), (4.0, 0.0, 0.0))
    assert abs(traj.escape_estimate - 0.25) < 1e-6
    assert math.isclose(traj.certificate.escape_upper_bound, 0.25, rel_tol=1e-6)


def test_riccati_certificates():
    q6 = integrate(table_field(NormalFormLabel("Q6")), (1.0, 0.0, 0.0))
    assert q6.status is Status.BLOWUP_CERTIFIED
    assert q6.certificate.mechanism == "riccati"
    q4 = integrate(table_field(NormalFormLabel("Q4")), (math.sqrt(2), 1.0, 1.0))
    assert q4.status is Status.BLOWUP_CERTIFIED
    assert q4.certificate.mechanism == "riccati"
    assert q4.escape_interval[0] <= q4.certificate.escape_upper_bound


def test_riccati_bound_domain():
    assert riccati_escape_bound(1.0, 2.0) == 0.5
    with pytest.raises(ValueError):
        riccati_escape_bound(1.0, -1.0)


def test_uncertified_crossing_is_not_blowup():
    # no metric, no label: nothing to certify against
    F = GeodesicField(table_field(Q5).coeffs)
    traj = integrate(F, (1.0, 0.0, 0.0))
    assert traj.status is Status.THRESHOLD_CROSSED
    assert traj.certificate is None
    assert isinstance(certify_blowup(table_field(Q3), integrate(table_field(Q3), (1, 1, 0),
                                                                 IntegratorConfig(t_max=1))), Refusal)


def test_certificate_through_classification(rng):
    phi = Automorphism.random(rng)
    m = act(phi, normal_form_matrix(Q5)).scaled(2.0)
    F = build_field(m)
    # an idempotent of the transported field
    from pshlab.euler_arnold import find_idempotents
    v0 = find_idempotents(F)[0]
    traj = integrate(F, v0)
    assert traj.status is Status.BLOWUP_CERTIFIED
    assert abs(traj.escape_estimate - 1.0) < 1e-5


def test_step_limit():
    traj = integrate(table_field(NormalFormLabel.Q2(1)), (0.1, 0.5, -0.2), IntegratorConfig(max_steps=5))
    assert traj.status is Status.STEP_LIMIT
    assert traj.t.size == 6


def test_chunked_run_matches_single_run(monkeypatch):
    from pshlab import flow
    F = table_field(NormalFormLabel.Q2(1))
    cfg = IntegratorConfig(t_max=20)
    ref = integrate(F, (0.1, 0.5, -0.2), cfg)
    monkeypatch.setattr(flow, "CHUNK", 7)
    chunked = integrate(F, (0.1, 0.5, -0.2), cfg)
    assert np.array_equal(ref.t, chunked.t)
    assert np.array_equal(ref.states, chunked.states)


def test_step_floor_below_threshold_is_step_limit():
    # threshold out of reach: the step size collapses near the escape time instead
    traj = integrate(table_field(Q5), (1.0, 0.0, 0.0), IntegratorConfig(threshold=1e300, t_max=2.0))
    assert traj.status is Status.STEP_LIMIT
    assert abs(traj.t[-1] - 1.0) < 1e-3


def test_integration_failure_carries_state():
    exc = IntegrationFailure("boom", 1.5, np.ones(3))
    assert exc.last_time == 1.5 and np.array_equal(exc.last_state, np.ones(3))


def test_determinism():
    F = table_field(NormalFormLabel.Q2(1))
    a = integrate(F, (0.3, 0.4, 0.5), IntegratorConfig(t_max=30))
    b = integrate(F, (0.3, 0.4, 0.5), IntegratorConfig(t_max=30))
    assert np.array_equal(a.states, b.states)


def test_drifts_report_none_off_domain():
    traj = integrate(table_field(Q3), (1.0, 1.0, 0.0), IntegratorConfig(t_max=1))
    assert traj.drifts["partial_integral"] is None
    assert traj.drifts["energy"] == 0.0


def test_summary_is_json_ready():
    import json
    traj = integrate(table_field(Q5), (1.0, 0.0, 0.0))
    data = json.loads(json.dumps(traj.summary()))
    assert data["status"] == "BlowUpCertified"
    assert data["certificate"]["mechanism"] == "idempotent-ray"


@pytest.mark.parametrize("s", [0.01, 0.5, 1.0, 4.0, 100.0])
def test_level_set_bound_holds(s, rng):
    label = NormalFormLabel.Q2(s)
    F = table_field(label)
    for v0 in rng.uniform(-1, 1, size=(5, 3)):
        bound = level_set_bound(label, v0)
        if bound > 1e4:
            continue  # valid, but long excursions are slow to resolve
        traj = integrate(F, v0, IntegratorConfig(t_max=100, threshold=max(10 * bound, 10.0)))
        assert traj.status is Status.REACHED_TIME_BOUND
        assert traj.max_norm <= bound


def test_level_set_bound_q3():
    assert level_set_bound(Q3, (1.0, 1.0, 0.0)) == UNBOUNDED_PLANE
    v0 = (0.3, 0.4, 0.5)
    bound = level_set_bound(Q3, v0)
    traj = integrate(table_field(Q3), v0, IntegratorConfig(t_max=200))
    assert traj.max_norm <= bound


def test_level_set_bound_unsupported():
    with pytest.raises(UnsupportedLabelError):
        level_set_bound(Q5, (1, 0, 0))
    with pytest.raises(UnsupportedLabelError):
        level_set_bound(NormalFormLabel.Q2(-1), (1, 0, 0))


def test_symmetry_reduce():
    F = table_field(Q3)
    assert np.array_equal(symmetry_reduce(F, (1.0, 2.0, -3.0)), [1.0, -2.0, 3.0])
    assert np.array_equal(symmetry_reduce(F, (1.0, 2.0, 3.0)), [1.0, 2.0, 3.0])
    with pytest.raises(UnsupportedLabelError):
        symmetry_reduce(table_field(Q5), (1.0, 0.0, 0.0))


def test_symmetry_preserves_trajectories():
    F = table_field(NormalFormLabel.Q2(1))
    v0 = np.array([0.2, -0.4, 0.3])
    a = integrate(F, v0, IntegratorConfig(t_max=10))
    b = integrate(F, symmetry_reduce(F, v0), IntegratorConfig(t_max=10))
    assert np.allclose(a.final * [1, -1, -1], b.final, atol=1e-10)


EXPECTED = [
    ("Q1:1", "Complete-bounded", "riemannian-homogeneous"),
    ("Q1:-1", "Incomplete", "idempotent"),
    ("Q2:2", "Complete-bounded", "bounded-by-level-sets"),
    ("Q2:-1", "Incomplete", "idempotent"),
    ("Q3", "Complete-unbounded", "invariant-plane-closed-form"),
    ("Q4", "Incomplete", "riccati-no-idempotent"),
    ("Q5", "Incomplete", "idempotent"),
    ("Q6", "Incomplete", "riccati-no-idempotent"),
]


@pytest.mark.parametrize("key, verdict, mechanism", EXPECTED)
def test_completeness_verdicts(key, verdict, mechanism):
    v = completeness_verdict(parse_label(key))
    assert (v.verdict, v.mechanism) == (verdict, mechanism)
    assert v.to_dict()["mechanism"] == mechanism


def test_verdict_pair_validation():
    traj = integrate(table_field(Q3), (1, 1, 0), IntegratorConfig(t_max=1))
    with pytest.raises(ValueError):
        CompletenessVerdict(Q3, "Complete-bounded", "idempotent", traj)


def test_verdict_for_metric(rng):
    m = act(Automorphism.random(rng), normal_form_matrix(NormalFormLabel.Q2(3)))
    label, v = verdict_for_metric(m)
    assert label.tag == "Q2" and math.isclose(label.parameter, 3.0, rel_tol=1e-8)
    assert v.verdict == "Complete-bounded"


def test_tableau_order_conditions():
    from pshlab import _kernels as K

    assert K.A.shape == (K.N_STAGES, K.N_STAGES) and K.B.shape == (K.N_STAGES,)
    np.testing.assert_allclose(K.A.sum(axis=1), K.C, atol=1e-14)
    # quadrature conditions sum b_i c_i^(q-1) = 1/q up to order 8
    for q in range(1, 9):
        assert abs(K.B @ K.C ** (q - 1) - 1.0 / q) < 1e-13
    assert abs(K.E5.sum()) < 1e-14 and abs(K.E3.sum()) < 1e-14


@pytest.mark.parametrize("key,v0", [("Q2:1", (0.1, 0.5, -0.2)), ("Q3", (0.5, -0.5, 0.5)),
                                    ("Q1:-1", (0.2, 0.1, 0.3))])
def test_agrees_with_scipy_solve_ivp(key, v0):
    from scipy.integrate import solve_ivp

    F = table_field(parse_label(key))
    traj = integrate(F, v0, IntegratorConfig(t_max=5.0), certify=False)
    ref = solve_ivp(lambda t, y: F(y), (0.0, traj.t[-1]), v0, method="DOP853",
                    rtol=1e-12, atol=1e-14)
    scale = max(1.0, float(np.linalg.norm(ref.y[:, -1])))
    assert np.linalg.norm(traj.final - ref.y[:, -1]) / scale < 1e-9
