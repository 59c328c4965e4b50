import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cclab.errors import ShapeError, SizeError, ValidationError
from cclab.models import (
    AttractionMatrix,
    PerColumn,
    Uniform,
    as_termination,
    ccm_click_matrix,
    ccm_examination_prob,
    ccm_list_prob,
    ccm_position_prob,
    cm_list_prob,
    cm_position_prob,
    compare_tcm_ccm_uniform,
    tcm_list_prob,
    tcm_position_prob,
)

probs = st.floats(0.0, 1.0)
vectors = st.lists(probs, min_size=1, max_size=8)
matrices = st.lists(vectors, min_size=1, max_size=4)


# -- cascade model

def test_cm_single_item():
    assert cm_position_prob([0.5], 1) == 0.5


def test_cm_certain_first_item_blocks_second():
    assert cm_position_prob([1.0, 0.7], 2) == 0.0


def test_cm_two_halves():
    assert cm_position_prob([0.5, 0.5], 2) == 0.25


@pytest.mark.parametrize(
    "attr, expected", [([0.5, 0.5], 0.75), ([0, 0, 0], 0.0), ([1.0, 0.2], 1.0)]
)
def test_cm_list(attr, expected):
    assert cm_list_prob(attr) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("k", [0, 3, -1])
def test_cm_rank_out_of_range(k):
    with pytest.raises(IndexError):
        cm_position_prob([0.5, 0.5], k)


@given(vectors)
def test_cm_complement_identity(attr):
    assert cm_list_prob(attr) == pytest.approx(1 - np.prod(1 - np.array(attr)), abs=1e-12)


@given(vectors, st.integers(0, 7), st.floats(0.01, 1.0))
def test_cm_monotone_in_attraction(attr, k, bump):
    k = k % len(attr)
    if attr[k] + bump > 1.0:
        return
    raised = list(attr)
    raised[k] += bump
    # the gain is the bump times the chance that no other item is clicked
    others = np.prod([1 - a for i, a in enumerate(attr) if i != k])
    gain = cm_list_prob(raised) - cm_list_prob(attr)
    assert gain >= -1e-15 and gain == pytest.approx(bump * others, abs=1e-12)


# -- terminating cascade

@pytest.mark.parametrize("pq, expected", [(0.0, 0.25), (1.0, 0.0), (0.5, 0.125)])
def test_tcm_second_position(pq, expected):
    assert tcm_position_prob([0.5, 0.5], 2, pq) == expected


def test_tcm_list_values():
    assert tcm_list_prob([0.5, 0.5], 0.5) == 0.625
    assert tcm_list_prob([0.3, 0.2, 0.1], 0.0) == pytest.approx(0.496, abs=1e-15)


@given(probs, probs)
def test_tcm_single_position_ignores_termination(p, pq):
    assert tcm_list_prob([p], pq) == p


def test_tcm_per_column_uses_position_probabilities():
    # q = (0.1, 0.5, 0.5); position 3 survives (1-q1)(1-q2) and (1-p1)(1-p2)
    term = PerColumn(1, 0.1, 0.5)
    expected = 0.9 * 0.5 * 0.8 * 0.7 * 0.4
    assert tcm_position_prob([0.2, 0.3, 0.4], 3, term) == pytest.approx(expected, rel=1e-14)


# -- carousel model

def test_ccm_first_carousel_always_examined():
    assert ccm_examination_prob([[0.3, 0.9], [0.1]], 1, 0.7) == 1.0


def test_ccm_certain_first_row_blocks_second():
    assert ccm_examination_prob([[1.0], [0.5]], 2, 0.0) == 0.0


def test_ccm_examination_value():
    assert ccm_examination_prob([[0.5, 0.5], [0.9]], 2, 0.5) == 0.125


def test_ccm_position_values():
    rows = [[0.5, 0.5], [0.5, 0.5]]
    assert ccm_position_prob(rows, 2, 1, 0.0) == 0.125
    # enumeration value; product form (1/2)^2 * (1/4) * (1/2) * (1/2)
    assert ccm_position_prob(rows, 2, 2, 0.5) == 0.015625


def test_ccm_list_values():
    rows = [[0.5, 0.5], [0.5, 0.5]]
    assert ccm_list_prob(rows, 0.0) == 0.9375
    assert ccm_list_prob(rows, 0.5) == 0.703125


def test_ccm_click_matrix_values():
    got = ccm_click_matrix([[0.5, 0.5], [0.5, 0.5]], 0.0)
    np.testing.assert_array_equal(np.vstack(got), [[0.5, 0.25], [0.125, 0.0625]])
    np.testing.assert_array_equal(ccm_click_matrix([[0.4]], 0.3)[0], [0.4])
    assert all(not r.any() for r in ccm_click_matrix([[0, 0], [0]], 0.2))


def test_ccm_index_errors():
    with pytest.raises(IndexError):
        ccm_position_prob([[0.5], [0.5, 0.5]], 1, 2, 0.1)
    with pytest.raises(IndexError):
        ccm_examination_prob([[0.5]], 2, 0.1)


@given(vectors, probs)
def test_ccm_single_row_is_tcm(row, pq):
    assert ccm_list_prob([row], pq) == tcm_list_prob(row, pq)
    for j in range(1, len(row) + 1):
        assert ccm_position_prob([row], 1, j, pq) == tcm_position_prob(row, j, pq)


@given(matrices, probs)
def test_ccm_decomposition_and_budget(rows, pq):
    grid = ccm_click_matrix(rows, pq)
    total = ccm_list_prob(rows, pq)
    assert sum(float(r.sum()) for r in grid) == pytest.approx(total, abs=1e-12)
    assert 0.0 <= total <= 1.0 + 1e-12
    for i, r in enumerate(grid, start=1):
        e = ccm_examination_prob(rows, i, pq)
        for j, v in enumerate(r, start=1):
            assert v == pytest.approx(e * tcm_position_prob(rows[i - 1], j, pq), abs=1e-15)


@given(st.integers(1, 4), st.integers(1, 5), probs, probs)
def test_uniform_attraction_dominance(m, K, p, pq):
    flat = [p] * (m * K)
    assert tcm_list_prob(flat, pq) <= ccm_list_prob([[p] * K] * m, pq) + 1e-12


# -- analytical comparison

def test_compare_values():
    tcm, ccm = compare_tcm_ccm_uniform(0.01, 2, 2, 0.5)
    assert tcm == pytest.approx(0.01 * 1.875, rel=1e-14)
    assert ccm == pytest.approx(0.01 * 2.25, rel=1e-14)


@given(probs, st.integers(1, 6), st.integers(1, 6))
def test_compare_no_termination(p, m, K):
    tcm, ccm = compare_tcm_ccm_uniform(p, m, K, 0.0)
    assert tcm == pytest.approx(p * m * K) and ccm == pytest.approx(p * m * K)


@given(probs, st.integers(1, 6), probs)
def test_compare_single_row_and_order(p, K, pq):
    tcm, ccm = compare_tcm_ccm_uniform(p, 1, K, pq)
    assert tcm == ccm
    tcm, ccm = compare_tcm_ccm_uniform(p, 3, K, pq)
    assert tcm <= ccm + 1e-15


# -- types

def test_termination_validation():
    with pytest.raises(ValidationError):
        Uniform(1.5)
    with pytest.raises(ValidationError):
        PerColumn(0, 0.1, 0.2)
    with pytest.raises(ValidationError):
        PerColumn(2, 0.1, -0.2)
    assert as_termination(0.25) == Uniform(0.25)
    np.testing.assert_array_equal(PerColumn(2, 0.1, 0.3).position_probs(4), [0.1, 0.1, 0.3, 0.3])


def test_attraction_matrix_validation():
    with pytest.raises(SizeError):
        AttractionMatrix([])
    with pytest.raises(SizeError):
        AttractionMatrix([[0.1], []])
    with pytest.raises(ValidationError):
        AttractionMatrix([[0.1, 1.2]])
    with pytest.raises(ValidationError):
        AttractionMatrix([[0.1], [0.2]], item_ids=[["a"], ["a"]])
    with pytest.raises(ShapeError):
        AttractionMatrix([[0.1], [0.2]], item_ids=[["a", "b"], ["c"]])
    mat = AttractionMatrix([[0.1, 0.2], [0.3]], labels=["x", "y"])
    assert mat.row_lengths == (2, 1) and not mat.is_rectangular
    with pytest.raises(ShapeError):
        mat.to_array()
