"""Closed-form click probabilities for the cascade family of click models.

Three models are covered:

* CM, the cascade model: the user scans a ranked list top to bottom and
  clicks the first attractive item.
* TCM, the terminating cascade model: as CM, but after each examined
  unattractive item the user leaves with a termination probability.
* CCM, the carousel click model: the user scans topic-labelled carousels
  top to bottom, skips unattractive carousels (possibly leaving after each
  one), enters the first attractive carousel and behaves like TCM in it.

Positions passed to the scalar ``*_prob`` functions are 1-based ranks, so
``cm_position_prob(attr, 1)`` is the top item. The vectorised
``*_probs`` helpers return 0-indexed numpy arrays over all positions.

Everything is computed in linear space with running prefix products.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from cclab.errors import ShapeError, SizeError, ValidationError


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class Uniform:
    """The same termination probability after every unattractive examination."""

    pq: float

    def __post_init__(self):
        object.__setattr__(self, "pq", _check_prob("pq", self.pq))

    def position_probs(self, n: int) -> np.ndarray:
        return np.full(n, self.pq)

    @property
    def carousel_prob(self) -> float:
        return self.pq


@dataclass(frozen=True)
class PerColumn:
    """Termination ``near`` for columns ``1..thresh`` and ``far`` beyond.

    Models carousels whose first ``thresh`` items are visible without
    scrolling. Skipping an unattractive carousel uses ``near``, since the
    carousel label is always on screen.
    """

    thresh: int
    near: float
    far: float

    def __post_init__(self):
        if int(self.thresh) != self.thresh or self.thresh < 1:
            raise ValidationError(f"thresh must be an integer >= 1, got {self.thresh!r}")
        object.__setattr__(self, "thresh", int(self.thresh))
        object.__setattr__(self, "near", _check_prob("near", self.near))
        object.__setattr__(self, "far", _check_prob("far", self.far))

    def position_probs(self, n: int) -> np.ndarray:
        q = np.full(n, self.far)
        q[: self.thresh] = self.near
        return q

    @property
    def carousel_prob(self) -> float:
        return self.near


TerminationProfile = Union[Uniform, PerColumn]


def as_termination(term) -> TerminationProfile:
    """Accept a profile or a bare float (read as a uniform probability)."""
    if isinstance(term, (Uniform, PerColumn)):
        return term
    return Uniform(term)


def as_attraction(attr: Sequence[float]) -> np.ndarray:
    """Validate an attraction vector and return it as a float array."""
    a = np.asarray(attr, dtype=float)
    if a.ndim != 1:
        raise ShapeError(f"attraction vector must be 1-D, got shape {a.shape}")
    if a.size == 0:
        raise SizeError("attraction vector is empty")
    if not np.all((a >= 0.0) & (a <= 1.0)):
        raise ValidationError("attraction probabilities must lie in [0, 1]")
    return a


class AttractionMatrix:
    """Carousel layout: one attraction vector per row, rows may be ragged.

    ``item_ids`` optionally mirrors ``rows`` with the identifiers of the
    placed items; identifiers must be pairwise distinct. ``labels`` names
    the carousels (topics). A single-row matrix doubles as a ranked list.
    """

    def __init__(self, rows, item_ids=None, labels=None):
        if len(rows) == 0:
            raise SizeError("attraction matrix needs at least one row")
        self.rows = tuple(as_attraction(r) for r in rows)
        if item_ids is not None:
            item_ids = tuple(tuple(r) for r in item_ids)
            if len(item_ids) != len(self.rows) or any(
                len(ids) != len(r) for ids, r in zip(item_ids, self.rows)
            ):
                raise ShapeError("item_ids must have the same ragged shape as rows")
            flat = [x for ids in item_ids for x in ids]
            if len(set(flat)) != len(flat):
                raise ValidationError("an item appears in more than one position")
        self.item_ids = item_ids
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != len(self.rows):
                raise ShapeError("need exactly one label per row")
        self.labels = labels

    @classmethod
    def single(cls, attr, item_ids=None) -> "AttractionMatrix":
        return cls([attr], None if item_ids is None else [item_ids])

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def row_lengths(self) -> tuple:
        return tuple(len(r) for r in self.rows)

    @property
    def is_rectangular(self) -> bool:
        return len(set(self.row_lengths)) == 1

    def __len__(self):
        return self.m

    def to_array(self) -> np.ndarray:
        if not self.is_rectangular:
            raise ShapeError("ragged matrix has no rectangular array form")
        return np.vstack(self.rows)

    def __repr__(self):
        return f"AttractionMatrix(m={self.m}, row_lengths={self.row_lengths})"


def _check_rank(k: int, n: int) -> int:
    if not 1 <= k <= n:
        raise IndexError(f"position {k} out of range 1..{n}")
    return k - 1


def _shifted_cumprod(steps: np.ndarray) -> np.ndarray:
    """out[k] = prod(steps[:k]); out[0] = 1."""
    out = np.ones(steps.size)
    if steps.size > 1:
        out[1:] = np.cumprod(steps[:-1])
    return out


# -- cascade model ----------------------------------------------------------


def cm_position_probs(attr) -> np.ndarray:
    p = as_attraction(attr)
    return _shifted_cumprod(1.0 - p) * p


def cm_position_prob(attr, k: int) -> float:
    """Probability of a click on rank ``k`` under the cascade model."""
    p = as_attraction(attr)
    return float(cm_position_probs(p)[_check_rank(k, p.size)])


def cm_list_prob(attr) -> float:
    """Probability of any click on the list; equals ``1 - prod(1 - p)``."""
    return float(np.sum(cm_position_probs(attr)))


# -- terminating cascade model ---------------------------------------------


def tcm_position_probs(attr, term) -> np.ndarray:
    p = as_attraction(attr)
    q = as_termination(term).position_probs(p.size)
    return _shifted_cumprod((1.0 - q) * (1.0 - p)) * p


def tcm_position_prob(attr, k: int, term) -> float:
    """Probability of a click on rank ``k`` under the terminating cascade.

    Survival to rank ``k`` multiplies ``(1 - q_l)(1 - p_l)`` over earlier
    ranks, where ``q_l`` is the termination probability at rank ``l``.
    """
    p = as_attraction(attr)
    return float(tcm_position_probs(p, term)[_check_rank(k, p.size)])


def tcm_list_prob(attr, term) -> float:
    return float(np.sum(tcm_position_probs(attr, term)))


# -- carousel click model --------------------------------------------------


def _as_matrix(mat) -> AttractionMatrix:
    return mat if isinstance(mat, AttractionMatrix) else AttractionMatrix(mat)


def ccm_examination_probs(mat, term) -> np.ndarray:
    """Probability that each carousel is examined, as a length-m array."""
    mat = _as_matrix(mat)
    qc = as_termination(term).carousel_prob
    row_survival = np.array([np.prod(1.0 - r) for r in mat.rows])
    return _shifted_cumprod((1.0 - qc) * row_survival)


def ccm_examination_prob(mat, i: int, term) -> float:
    mat = _as_matrix(mat)
    return float(ccm_examination_probs(mat, term)[_check_rank(i, mat.m)])


def ccm_click_matrix(mat, term) -> list:
    """Per-position click probabilities, one array per carousel (ragged)."""
    mat = _as_matrix(mat)
    term = as_termination(term)
    exam = ccm_examination_probs(mat, term)
    return [e * tcm_position_probs(row, term) for e, row in zip(exam, mat.rows)]


def ccm_position_prob(mat, i: int, j: int, term) -> float:
    """Click probability at carousel ``i``, within-carousel rank ``j``.

    The product runs over everything examined before ``(i, j)``: all items
    of carousels above ``i`` and the items left of ``j`` in carousel ``i``.
    """
    mat = _as_matrix(mat)
    term = as_termination(term)
    ii = _check_rank(i, mat.m)
    jj = _check_rank(j, len(mat.rows[ii]))
    exam = ccm_examination_probs(mat, term)[ii]
    return float(exam * tcm_position_probs(mat.rows[ii], term)[jj])


def ccm_list_prob(mat, term) -> float:
    mat = _as_matrix(mat)
    term = as_termination(term)
    exam = ccm_examination_probs(mat, term)
    return float(sum(e * tcm_list_prob(row, term) for e, row in zip(exam, mat.rows)))


def compare_tcm_ccm_uniform(p: float, m: int, K: int, pq: float) -> tuple:
    """Small-attraction approximations of the TCM and CCM click probability.

    With every item at attraction ``p``, the TCM over the ``m*K`` items read
    as one list gives ``p * sum_k (1 - pq)^(k-1)`` while the CCM gives
    ``p * sum_{i,j} (1 - pq)^(i+j-2)``. The first never exceeds the second.
    """
    p = _check_prob("p", p)
    pq = _check_prob("pq", pq)
    if m < 1 or K < 1:
        raise SizeError("m and K must be >= 1")
    keep = 1.0 - pq
    tcm = p * float(np.sum(keep ** np.arange(m * K)))
    exponents = np.add.outer(np.arange(m), np.arange(K)).ravel()
    ccm = p * float(np.sum(keep**exponents))
    return tcm, ccm
