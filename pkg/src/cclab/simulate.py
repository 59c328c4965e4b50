"""Session simulation and exhaustive enumeration for CM, TCM and CCM.

``simulate_session`` walks the generative process one draw at a time and
reports what the user examined. ``empirical_click_matrix`` draws the same
process for many sessions at once in fixed-size blocks; block ``b`` uses
a generator seeded from ``(seed, b)``, so the counts do not depend on how
blocks are scheduled. ``enumerate_exact`` sums over every indicator
assignment and serves as the reference the closed forms are checked
against; it does not use any of the closed forms.

Positions in this module are 0-based ``(row, column)`` pairs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from cclab.errors import CapacityError, ShapeError, SizeError, ValidationError
from cclab.models import AttractionMatrix, as_termination

MODELS = ("cm", "tcm", "ccm")
MAX_INDICATORS = 24
BLOCK_SIZE = 1 << 16


def _check_model(mat, model: str):
    model = str(model).lower()
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    if not isinstance(mat, AttractionMatrix):
        mat = AttractionMatrix(mat)
    if model in ("cm", "tcm") and mat.m != 1:
        raise ShapeError(f"{model.upper()} needs a single-row layout, got {mat.m} rows")
    return mat, model


@dataclass(frozen=True)
class SessionOutcome:
    clicked: Optional[tuple]
    terminated_early: bool
    examined: tuple = field(default=())

    @property
    def examined_count(self) -> int:
        return len(self.examined)


@dataclass
class EmpiricalClicks:
    counts: list
    sessions: int

    def __post_init__(self):
        total = sum(int(np.sum(c)) for c in self.counts)
        if total > self.sessions:
            raise ValidationError("more clicks than sessions")

    @property
    def total_clicks(self) -> int:
        return sum(int(np.sum(c)) for c in self.counts)

    def to_array(self) -> np.ndarray:
        return np.vstack(self.counts)


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def simulate_session(mat, term, model: str, rng) -> SessionOutcome:
    """Sample one session.

    ``rng`` is a ``numpy.random.Generator`` or anything ``default_rng``
    accepts. Termination is drawn after every examined unattractive item
    and, in the CCM, after every skipped carousel; never after a click.
    """
    mat, model = _check_model(mat, model)
    term = as_termination(term)
    rng = _as_rng(rng)
    examined = []

    def scan_row(i, row, q):
        for j, p in enumerate(row):
            examined.append((i, j))
            if rng.random() < p:
                return SessionOutcome((i, j), False, tuple(examined))
            if q is not None and rng.random() < q[j]:
                return SessionOutcome(None, True, tuple(examined))
        return None

    if model in ("cm", "tcm"):
        row = mat.rows[0]
        q = term.position_probs(len(row)) if model == "tcm" else None
        out = scan_row(0, row, q)
        return out if out is not None else SessionOutcome(None, False, tuple(examined))

    for i, row in enumerate(mat.rows):
        attractive = rng.random(len(row)) < row
        if attractive.any():
            q = term.position_probs(len(row))
            for j in range(len(row)):
                examined.append((i, j))
                if attractive[j]:
                    return SessionOutcome((i, j), False, tuple(examined))
                if rng.random() < q[j]:
                    return SessionOutcome(None, True, tuple(examined))
        if rng.random() < term.carousel_prob:
            return SessionOutcome(None, True, tuple(examined))
    return SessionOutcome(None, False, tuple(examined))


def _first_true(mask: np.ndarray) -> tuple:
    """Index of the first True along the last axis, and whether any exists."""
    any_ = mask.any(axis=-1)
    return np.argmax(mask, axis=-1), any_


def _sample_block(mat: AttractionMatrix, term, model: str, rng, n: int):
    """Click (row, col) per session for ``n`` sessions; -1 means no click."""
    widths = mat.row_lengths
    kmax = max(widths)
    p = np.zeros((mat.m, kmax))
    for i, r in enumerate(mat.rows):
        p[i, : len(r)] = r
    q_item = term.position_probs(kmax)
    rows = np.full(n, -1, dtype=np.int64)
    cols = np.full(n, -1, dtype=np.int64)

    if model in ("cm", "tcm"):
        y = rng.random((n, kmax)) < p[0]
        j, hit = _first_true(y)
        if model == "tcm":
            quit_ = rng.random((n, kmax)) < q_item
            before = np.arange(kmax) < j[:, None]
            hit &= ~(quit_ & before).any(axis=1)
        rows[hit] = 0
        cols[hit] = j[hit]
        return rows, cols

    y = rng.random((n, mat.m, kmax)) < p
    row_attr = y.any(axis=2)
    quit_car = rng.random((n, mat.m)) < term.carousel_prob
    go_on = ~row_attr & ~quit_car
    reached = np.ones((n, mat.m), dtype=bool)
    reached[:, 1:] = np.cumprod(go_on[:, :-1], axis=1).astype(bool)
    e, entered = _first_true(reached & row_attr)
    y_e = y[np.arange(n), e]
    j, _ = _first_true(y_e)
    quit_item = rng.random((n, kmax)) < q_item
    before = np.arange(kmax) < j[:, None]
    hit = entered & ~(quit_item & before).any(axis=1)
    rows[hit] = e[hit]
    cols[hit] = j[hit]
    return rows, cols


def empirical_click_matrix(
    mat, term, model: str, n_sessions: int, seed: int, block_size: int = BLOCK_SIZE
) -> EmpiricalClicks:
    """Click counts per position over ``n_sessions`` simulated sessions."""
    mat, model = _check_model(mat, model)
    term = as_termination(term)
    if n_sessions < 1:
        raise SizeError("n_sessions must be >= 1")
    kmax = max(mat.row_lengths)
    flat = np.zeros(mat.m * kmax, dtype=np.int64)
    for b, start in enumerate(range(0, n_sessions, block_size)):
        n = min(block_size, n_sessions - start)
        rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
        rows, cols = _sample_block(mat, term, model, rng, n)
        hit = rows >= 0
        flat += np.bincount(rows[hit] * kmax + cols[hit], minlength=flat.size)
    grid = flat.reshape(mat.m, kmax)
    counts = [grid[i, :w].copy() for i, w in enumerate(mat.row_lengths)]
    return EmpiricalClicks(counts, int(n_sessions))


def indicator_count(mat, model: str) -> int:
    """Bernoulli indicators in one session: attractions plus termination slots."""
    mat, model = _check_model(mat, model)
    items = sum(mat.row_lengths)
    if model == "cm":
        return items
    if model == "tcm":
        return 2 * items
    return 2 * items + mat.m


def _walk_row(row_y, q, i, j, w):
    """Yield (clicked cell or None, probability) for the scan from column j."""
    while j < len(row_y):
        if row_y[j]:
            yield (i, j), w
            return
        if q is not None:
            yield None, w * q[j]
            w *= 1.0 - q[j]
        j += 1
    yield None, w


def enumerate_exact(mat, term, model: str, max_indicators: int = MAX_INDICATORS) -> list:
    """Exact click probability per position by exhaustive enumeration.

    Every attraction assignment is enumerated; for each one the termination
    indicators are branched on in the order the user consults them.
    Indicators a path never consults sum out with total weight one, so this
    equals the sum over all joint assignments.
    """
    mat, model = _check_model(mat, model)
    term = as_termination(term)
    n_ind = indicator_count(mat, model)
    if n_ind > max_indicators:
        raise CapacityError(f"{n_ind} indicators exceeds the limit of {max_indicators}")

    widths = mat.row_lengths
    flat_p = [float(x) for r in mat.rows for x in r]
    q_items = [term.position_probs(w) for w in widths]
    out = [np.zeros(w) for w in widths]

    for bits in itertools.product((False, True), repeat=len(flat_p)):
        w = 1.0
        for b, p in zip(bits, flat_p):
            w *= p if b else 1.0 - p
        if w == 0.0:
            continue
        ys, k = [], 0
        for width in widths:
            ys.append(bits[k : k + width])
            k += width
        if model == "cm":
            paths = _walk_row(ys[0], None, 0, 0, w)
        elif model == "tcm":
            paths = _walk_row(ys[0], q_items[0], 0, 0, w)
        else:
            paths = _walk_carousels(ys, q_items, term.carousel_prob, w)
        for cell, prob in paths:
            if cell is not None:
                out[cell[0]][cell[1]] += prob
    return out


def _walk_carousels(ys, q_items, q_car, w):
    for i, row_y in enumerate(ys):
        if any(row_y):
            yield from _walk_row(row_y, q_items[i], i, 0, w)
            return
        yield None, w * q_car
        w *= 1.0 - q_car
    yield None, w
