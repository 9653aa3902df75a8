import math

import numpy as np
import pytest

from cvlab.exceptions import DegenerateOutcomeError, DomainError, EvaluationError, ModelError
from cvlab.families import X, pryde_family, three_outcome_family, three_outcome_table_family, twisted_family
from cvlab.linalg import expm_hermitian, matrix_sqrt
from cvlab.measurement import (
    MeasurementFamily,
    coarse_grain,
    disturbance_diagnostics,
    evaluate_family,
    group_law_residual,
    meter_post_state,
    meter_probabilities,
    naimark_dilate,
    post_state,
    povm,
    probabilities,
    probability,
)
from cvlab.validation import pure_state

from conftest import random_density, random_kraus, random_unitary

PLUS = np.array([1, 1]) / math.sqrt(2)
E1 = np.diag([1.0, 0.0])
P1, P2 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])


def test_evaluate_pryde():
    mp, mm = evaluate_family(pryde_family(), 0.1)
    np.testing.assert_allclose(mp, np.diag([math.sqrt(0.55), math.sqrt(0.45)]), atol=1e-15)
    np.testing.assert_allclose(mm, np.diag([math.sqrt(0.45), math.sqrt(0.55)]), atol=1e-15)
    assert mp[0, 0].real == pytest.approx(0.741619848709566, abs=1e-14)
    assert mp[1, 1].real == pytest.approx(0.670820393249937, abs=1e-14)


@pytest.mark.parametrize("factory", [three_outcome_family, three_outcome_table_family])
def test_evaluate_three_outcome(factory):
    m1, m2, m3 = evaluate_family(factory(), 0.1)
    np.testing.assert_allclose(m1, np.diag([0.6, 0.4]), atol=1e-15)
    np.testing.assert_allclose(m2, np.diag([0.4, 0.6]), atol=1e-15)
    np.testing.assert_allclose(m3, math.sqrt(0.48) * np.eye(2), atol=1e-15)
    with pytest.raises(DomainError):
        evaluate_family(factory(), 1.0)


def test_out_of_range_via_matrix_sqrt():
    fam = three_outcome_family()
    fam.g_range = None
    with pytest.raises(DomainError):
        evaluate_family(fam, 1.0)


def test_evaluation_error_location():
    fam = MeasurementFamily.from_operators([[["1", "0"], ["0", "1/g"]]])
    with pytest.raises(EvaluationError, match=r"entry \(0, 0, 1, 1\)"):
        evaluate_family(fam, 0.0)


def test_povm_examples():
    e = povm(pryde_family(), 0.1)
    np.testing.assert_allclose(e[0], np.diag([0.55, 0.45]), atol=1e-15)
    np.testing.assert_allclose(e[1], np.diag([0.45, 0.55]), atol=1e-15)
    for g in np.linspace(-0.49, 0.49, 15):
        assert np.linalg.norm(sum(povm(three_outcome_family(), g)) - np.eye(2)) <= 1e-14
    proj = MeasurementFamily.from_operators([P1, P2])
    np.testing.assert_array_equal(povm(proj, 0.3)[0], P1)
    with pytest.raises(ModelError, match="defect|\\|\\|"):
        povm(MeasurementFamily.from_operators([P1, 0.5 * P2]), 0.0)


def test_probability_examples():
    fam = pryde_family()
    assert probability(fam, 0.1, 0, np.eye(2) / 2) == pytest.approx(0.5, abs=1e-15)
    assert probability(fam, 0.1, 1, np.eye(2) / 2) == pytest.approx(0.5, abs=1e-15)
    assert probability(fam, 0.1, 0, E1) == pytest.approx(0.55, abs=1e-15)
    p = probabilities(three_outcome_family(), 0.1, E1)
    np.testing.assert_allclose(p, [0.36, 0.16, 0.48], atol=1e-15)
    with pytest.raises(IndexError):
        probability(fam, 0.1, 2, E1)


def test_post_state_examples():
    proj = MeasurementFamily.from_operators([P1, P2])
    np.testing.assert_allclose(post_state(proj, 0.0, 0, P1), P1)
    rho = pure_state(PLUS)
    out = post_state(three_outcome_family(), 0.1, 0, rho)
    np.testing.assert_allclose(out, np.array([[0.18, 0.12], [0.12, 0.08]]) / 0.26, atol=1e-15)
    np.testing.assert_allclose(post_state(three_outcome_family(), 0.1, 2, rho), rho, atol=1e-14)
    with pytest.raises(DegenerateOutcomeError):
        post_state(proj, 0.0, 1, P1)


def test_coarse_grain_examples():
    fam = three_outcome_family()
    cg = coarse_grain(fam, 0.1)
    for a, b in zip(evaluate_family(cg, 0.1), evaluate_family(fam, 0.1)):
        np.testing.assert_allclose(a, b, atol=1e-14)
    doubled = MeasurementFamily([[P1 / math.sqrt(2), P1 / math.sqrt(2)], [P2]])
    (m1, m2) = evaluate_family(coarse_grain(doubled, 0.0), 0.0)
    np.testing.assert_allclose(m1, P1, atol=1e-15)
    np.testing.assert_allclose(m2, P2, atol=1e-15)


def _doubly_indexed(rng):
    k = random_kraus(rng, 2, 3)
    return MeasurementFamily([[k[0], k[1]], [k[2]]])


def test_coarse_grain_probabilities_but_not_states(rng):
    fam = _doubly_indexed(rng)
    cg = coarse_grain(fam)  # lazily evaluated variant
    for _ in range(100):
        rho = random_density(rng, 2)
        np.testing.assert_allclose(probabilities(cg, 0.0, rho), probabilities(fam, 0.0, rho), atol=1e-12)
    rho = pure_state(PLUS)
    diff = np.linalg.norm(post_state(cg, 0.0, 0, rho) - post_state(fam, 0.0, 0, rho))
    assert diff > 1e-3


def test_scalar_kraus_is_identity_map(rng):
    fam = MeasurementFamily.from_operators([0.6 * np.eye(3), 0.8 * np.eye(3)])
    rho = random_density(rng, 3)
    assert np.linalg.norm(post_state(fam, 0.0, 0, rho) - rho) <= 1e-14


def test_naimark_examples():
    dil = naimark_dilate([np.eye(2)])
    np.testing.assert_allclose(dil.isometry, np.eye(2))
    np.testing.assert_allclose(dil.projectors[0], np.eye(2))
    dil = naimark_dilate(evaluate_family(pryde_family(), 0.1))
    np.testing.assert_allclose(meter_probabilities(dil, np.eye(2) / 2), [0.5, 0.5], atol=1e-15)
    dil = naimark_dilate(evaluate_family(three_outcome_family(), 0.1))
    np.testing.assert_allclose(meter_probabilities(dil, E1), [0.36, 0.16, 0.48], atol=1e-15)
    np.testing.assert_allclose(meter_probabilities(dil, E1), probabilities(three_outcome_family(), 0.1, E1),
                               atol=1e-15)
    with pytest.raises(ModelError):
        naimark_dilate([P1])


def test_naimark_doubly_indexed(rng):
    k = random_kraus(rng, 3, 4)
    dil = naimark_dilate([[k[0], k[1]], [k[2]], [k[3]]])
    assert dil.meter_dim == 4
    rho = random_density(rng, 3)
    np.testing.assert_allclose(meter_post_state(dil, rho, 0),
                               k[0] @ rho @ k[0].conj().T + k[1] @ rho @ k[1].conj().T, atol=1e-13)


def test_probabilities_sum_to_one(rng):
    for _ in range(50):
        d, n = rng.integers(1, 5), rng.integers(1, 6)
        # M = U P with random unitary U and positive P normalized to completeness
        positives = [matrix_sqrt(m.conj().T @ m) for m in random_kraus(rng, d, n)]
        fam = MeasurementFamily.from_operators([random_unitary(rng, d) @ p for p in positives])
        rho = random_density(rng, d)
        assert abs(probabilities(fam, 0.0, rho).sum() - 1.0) <= 1e-10
        for e in povm(fam, 0.0):
            assert np.linalg.eigvalsh(e).min() >= -1e-10


def test_disturbance_scales_linearly():
    rep = disturbance_diagnostics(three_outcome_family(), pure_state(PLUS), [0.1, 0.05, 0.025])
    d = rep.metrics["state_disturbance"]
    for a, b in zip(d, d[1:]):
        assert b / a == pytest.approx(0.5, rel=0.1)
    assert rep.certified_weak
    assert rep.slopes["state_disturbance"] == pytest.approx(1.0, abs=0.05)


def test_group_law_residuals():
    twisted = twisted_family(X)
    assert group_law_residual(twisted, 0, 0.2, 0.2) <= 1e-12
    rep = disturbance_diagnostics(twisted, np.eye(2) / 2, [0.2, 0.1])
    assert max(rep.metrics["group_residual[1,1]"]) <= 1e-12

    squared = twisted_family(X, twist=lambda g: expm_hermitian(X, g * g))
    assert group_law_residual(squared, 0, 0.2, 0.2) > 1e-3


def test_degenerate_outcome_skipped():
    fam = MeasurementFamily.from_operators([P1, P2])
    rep = disturbance_diagnostics(fam, P1, [0.1, 0.01])
    assert rep.notes and "outcome 2 skipped" in rep.notes[0]
    assert rep.metrics["state_disturbance"] == [0.0, 0.0]
    assert rep.certified_weak
    assert [r[1] for r in rep.rows()][:3] == ["state_disturbance", "aggregate_disturbance", "kraus_disturbance"]
