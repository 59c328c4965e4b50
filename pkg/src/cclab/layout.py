"""Recommendation layouts: optimal ranked lists and carousel matrices.

The ranked list that maximises the TCM click probability holds the ``K``
most attractive items in descending order, whatever the termination
probability. For carousels no closed form exists; ``ccm_optimal_matrix``
sorts items inside each topic carousel in descending order (which is
optimal) and orders the carousels by their total attraction (a
heuristic). ``ccm_best_row_order`` searches row orders exhaustively and is
meant for tiny instances only.

All ties are broken by ascending identifier.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from cclab.errors import SizeError, ValidationError
from cclab.models import AttractionMatrix, ccm_list_prob

POOL_SIZES = {"top100": 100, "top1000": 1000, "all": None}


@dataclass(frozen=True)
class ScoredItem:
    item_id: object
    topic_id: object
    attraction: float

    def __post_init__(self):
        if not 0.0 <= self.attraction <= 1.0:
            raise ValidationError(f"attraction of {self.item_id!r} outside [0, 1]")


@dataclass(frozen=True)
class LayoutSpec:
    """``max_rows`` caps the number of carousels and ``items_per_row`` their
    length; ``None`` keeps everything, which gives ragged genre carousels."""

    max_rows: Optional[int] = None
    items_per_row: Optional[int] = None
    item_pool: str = "all"

    def __post_init__(self):
        for name in ("max_rows", "items_per_row"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValidationError(f"{name} must be >= 1 when set")
        if self.item_pool not in POOL_SIZES:
            raise ValidationError(f"unknown item pool {self.item_pool!r}")


# -- array kernels (dense integer item indices) -----------------------------


def rank_desc(attraction: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Candidates sorted by attraction descending, then index ascending."""
    candidates = np.asarray(candidates)
    return candidates[np.lexsort((candidates, -attraction[candidates]))]


def tcm_layout(attraction: np.ndarray, candidates: np.ndarray, K: Optional[int] = None) -> np.ndarray:
    ranked = rank_desc(attraction, candidates)
    return ranked if K is None else ranked[:K]


def ccm_layout(
    attraction: np.ndarray,
    topics: np.ndarray,
    candidates: np.ndarray,
    items_per_row: Optional[int] = None,
    max_rows: Optional[int] = None,
) -> list:
    """Carousel layout as a list of index arrays, best carousel first.

    ``topics`` holds an integer topic code per item; lower codes win ties
    between carousels with equal total attraction.
    """
    ranked = rank_desc(attraction, candidates)
    grouped = ranked[np.argsort(topics[ranked], kind="stable")]
    codes = topics[grouped]
    cuts = np.flatnonzero(np.diff(codes)) + 1
    rows = np.split(grouped, cuts)
    if items_per_row is not None:
        rows = [r[:items_per_row] for r in rows]
    sums = np.array([attraction[r].sum() for r in rows])
    row_codes = np.array([topics[r[0]] for r in rows])
    order = np.lexsort((row_codes, -sums))
    if max_rows is not None:
        order = order[:max_rows]
    return [rows[i] for i in order]


# -- item-level API ----------------------------------------------------------


def tcm_optimal_list(items: Iterable[ScoredItem], K: int) -> AttractionMatrix:
    """The ``K`` most attractive items in descending order, as one row."""
    items = list(items)
    if not items:
        raise SizeError("no items to rank")
    if not 1 <= K <= len(items):
        raise SizeError(f"K={K} but only {len(items)} items available")
    chosen = sorted(items, key=lambda it: (-it.attraction, it.item_id))[:K]
    return AttractionMatrix.single(
        [it.attraction for it in chosen], [it.item_id for it in chosen]
    )


def ccm_optimal_matrix(items: Iterable[ScoredItem], spec: LayoutSpec = LayoutSpec()) -> AttractionMatrix:
    """Topic carousels, items descending within, carousels by total attraction."""
    items = list(items)
    if not items:
        raise SizeError("no items to lay out")
    by_topic = {}
    for it in items:
        by_topic.setdefault(it.topic_id, []).append(it)
    rows = []
    for topic, members in by_topic.items():
        members = sorted(members, key=lambda it: (-it.attraction, it.item_id))
        if spec.items_per_row is not None:
            members = members[: spec.items_per_row]
        total = sum(it.attraction for it in members)
        rows.append((-total, topic, members))
    rows.sort(key=lambda r: (r[0], r[1]))
    if spec.max_rows is not None:
        rows = rows[: spec.max_rows]
    return AttractionMatrix(
        [[it.attraction for it in members] for _, _, members in rows],
        item_ids=[[it.item_id for it in members] for _, _, members in rows],
        labels=[topic for _, topic, _ in rows],
    )


def flatten_row_major(mat: AttractionMatrix) -> AttractionMatrix:
    """Concatenate the carousels into one ranked list (labels dropped)."""
    flat = np.concatenate(mat.rows)
    ids = None
    if mat.item_ids is not None:
        ids = [x for row in mat.item_ids for x in row]
    return AttractionMatrix.single(flat, ids)


def ccm_best_row_order(mat: AttractionMatrix, term, max_rows: int = 8) -> tuple:
    """Exhaustive search over carousel orders; returns (order, click prob)."""
    if mat.m > max_rows:
        raise SizeError(f"{mat.m} rows is too many for exhaustive search")
    best, best_val = None, -1.0
    for perm in itertools.permutations(range(mat.m)):
        val = ccm_list_prob(AttractionMatrix([mat.rows[i] for i in perm]), term)
        if val > best_val:
            best, best_val = perm, val
    return best, best_val


def select_item_pool(ratings, pool: str) -> np.ndarray:
    """Dense item indices with the largest rating sums in ``ratings``.

    Only items that appear in ``ratings`` are eligible; ties go to the lower
    index (which follows ascending item id).
    """
    if pool not in POOL_SIZES:
        raise ValidationError(f"unknown item pool {pool!r}")
    if len(ratings) == 0:
        raise SizeError("no ratings to rank items by")
    sums = np.bincount(ratings.items, weights=ratings.ratings, minlength=ratings.n_items)
    rated = np.unique(ratings.items)
    ranked = rated[np.lexsort((rated, -sums[rated]))]
    n = POOL_SIZES[pool]
    return ranked if n is None else ranked[:n]
