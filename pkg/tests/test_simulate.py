import numpy as np
import pytest

from cclab.errors import CapacityError, ShapeError, SizeError, ValidationError
from cclab.models import (
    AttractionMatrix,
    PerColumn,
    Uniform,
    ccm_click_matrix,
    ccm_list_prob,
    cm_position_probs,
    tcm_position_probs,
)
from cclab.simulate import (
    EmpiricalClicks,
    empirical_click_matrix,
    enumerate_exact,
    indicator_count,
    simulate_session,
)
from conftest import random_profile

HALVES = AttractionMatrix([[0.5, 0.5], [0.5, 0.5]])


def test_certain_attraction_clicks_first():
    rng = np.random.default_rng(0)
    mat = AttractionMatrix([[1.0, 1.0], [1.0]])
    for model, m in (("ccm", mat), ("tcm", AttractionMatrix([[1.0, 0.3]]))):
        for _ in range(20):
            out = simulate_session(m, 0.4, model, rng)
            assert out.clicked == (0, 0) and not out.terminated_early


def test_zero_attraction_full_termination():
    out = simulate_session(AttractionMatrix([[0.0, 0.0, 0.0]]), 1.0, "tcm", 7)
    assert out.clicked is None and out.terminated_early and out.examined_count == 1


def test_cm_never_terminates_early():
    out = simulate_session(AttractionMatrix([[0.0, 0.0]]), 1.0, "cm", 1)
    assert out.clicked is None and not out.terminated_early and out.examined_count == 2


def test_model_shape_check():
    with pytest.raises(ShapeError):
        simulate_session(HALVES, 0.1, "tcm", 0)
    with pytest.raises(ShapeError):
        empirical_click_matrix(HALVES, 0.1, "cm", 10, 0)
    with pytest.raises(ValueError):
        simulate_session(HALVES, 0.1, "pbm", 0)


def test_ccm_session_semantics():
    rng = np.random.default_rng(2)
    mat = AttractionMatrix([[0.2, 0.1, 0.3], [0.4], [0.1, 0.6]])
    for _ in range(2000):
        out = simulate_session(mat, 0.2, "ccm", rng)
        if out.clicked is not None:
            i, j = out.clicked
            assert out.examined[-1] == out.clicked
            assert all(r < i or (r == i and c <= j) for r, c in out.examined)


def test_session_determinism():
    a = [simulate_session(HALVES, 0.5, "ccm", np.random.default_rng(9)) for _ in range(3)]
    assert a[0] == a[1] == a[2]


def test_single_session_counts():
    clicks = empirical_click_matrix(AttractionMatrix([[1.0, 0.2]]), 0.1, "tcm", 1, 0)
    assert clicks.counts[0].tolist() == [1, 0] and clicks.sessions == 1
    with pytest.raises(SizeError):
        empirical_click_matrix(HALVES, 0.1, "ccm", 0, 0)


def test_counts_deterministic_and_ragged():
    mat = AttractionMatrix([[0.2, 0.1, 0.3], [0.4]])
    a = empirical_click_matrix(mat, 0.1, "ccm", 5000, 3)
    b = empirical_click_matrix(mat, 0.1, "ccm", 5000, 3)
    assert [x.tolist() for x in a.counts] == [x.tolist() for x in b.counts]
    assert [len(x) for x in a.counts] == [3, 1]
    assert a.total_clicks <= a.sessions


def test_block_size_changes_nothing_within_first_block():
    mat = AttractionMatrix([[0.3, 0.2]])
    a = empirical_click_matrix(mat, 0.1, "tcm", 1000, 5, block_size=1000)
    b = empirical_click_matrix(mat, 0.1, "tcm", 1000, 5, block_size=4096)
    assert a.counts[0].tolist() == b.counts[0].tolist()


def test_empirical_clicks_budget():
    with pytest.raises(ValidationError):
        EmpiricalClicks([np.array([3, 2])], 4)


def test_halves_rate():
    n = 1_000_000
    clicks = empirical_click_matrix(HALVES, 0.5, "ccm", n, 11)
    p = ccm_list_prob(HALVES, 0.5)
    assert p == 0.703125
    rate = clicks.total_clicks / n
    assert abs(rate - p) <= 3 * np.sqrt(p * (1 - p) / n)


@pytest.mark.parametrize("model", ["cm", "tcm", "ccm"])
def test_frequencies_converge(model):
    n = 400_000
    if model == "ccm":
        mat, term = AttractionMatrix([[0.1, 0.2, 0.05], [0.3], [0.15, 0.1]]), PerColumn(1, 0.1, 0.3)
        expected = np.concatenate(ccm_click_matrix(mat, term))
    else:
        mat, term = AttractionMatrix([[0.2, 0.15, 0.1, 0.3]]), Uniform(0.2)
        f = cm_position_probs if model == "cm" else (lambda r: tcm_position_probs(r, term))
        expected = f(mat.rows[0])
    got = np.concatenate(empirical_click_matrix(mat, term, model, n, 21).counts) / n
    se = np.sqrt(expected * (1 - expected) / n)
    assert np.all(np.abs(got - expected) <= 4 * se)


# -- enumeration oracle

def test_enumerate_trivial():
    np.testing.assert_array_equal(enumerate_exact(AttractionMatrix([[0.4]]), 0.0, "ccm")[0], [0.4])


def test_enumerate_halves():
    got = np.vstack(enumerate_exact(HALVES, 0.0, "ccm"))
    np.testing.assert_allclose(got, [[0.5, 0.25], [0.125, 0.0625]], atol=1e-15)
    got = np.vstack(enumerate_exact(HALVES, 0.5, "ccm"))
    np.testing.assert_allclose(got, [[0.5, 0.125], [0.0625, 0.015625]], atol=1e-15)
    assert got.sum() == pytest.approx(0.703125, abs=1e-15)


def test_enumerate_capacity():
    mat = AttractionMatrix([[0.1] * 4] * 3)
    assert indicator_count(mat, "ccm") == 27
    with pytest.raises(CapacityError):
        enumerate_exact(mat, 0.1, "ccm")
    assert indicator_count(AttractionMatrix([[0.1] * 5]), "cm") == 5
    assert indicator_count(AttractionMatrix([[0.1] * 5]), "tcm") == 10


def test_enumerate_matches_closed_forms():
    rng = np.random.default_rng(77)
    for _ in range(60):
        m, K = rng.integers(1, 4, 2)
        widths = rng.integers(1, K + 1, m)
        mat = AttractionMatrix([rng.random(w) for w in widths])
        term = random_profile(rng)
        got = enumerate_exact(mat, term, "ccm")
        for g, e in zip(got, ccm_click_matrix(mat, term)):
            np.testing.assert_allclose(g, e, atol=1e-12, rtol=0)
        row = AttractionMatrix([np.concatenate(mat.rows)])
        np.testing.assert_allclose(enumerate_exact(row, term, "tcm")[0], tcm_position_probs(row.rows[0], term), atol=1e-12, rtol=0)
        np.testing.assert_allclose(enumerate_exact(row, term, "cm")[0], cm_position_probs(row.rows[0]), atol=1e-12, rtol=0)
