"""Three-parameter click surfaces and their grid-search fit.

Both surfaces describe an ``m x K`` grid of positions whose attraction
decays geometrically from a top value ``p0`` with factor ``gamma``:

* ``mu_tcm`` reads the grid row by row as one ranked list of ``m*K``
  items with attraction ``p0 * gamma**(k-1)`` at rank ``k``;
* ``mu_ccm`` treats rows as carousels with attraction
  ``p0 * gamma**(i+j)`` at 0-based position ``(i, j)``.

``grid_fit`` scores every ``(p0, gamma, pq)`` on an inclusive grid over
``[0, 1]^3`` by total variation distance and keeps the smallest.

Powers and products are built from sequential cumulative products, so a
surface evaluated alone and the same surface inside the batched grid are
bit-identical; on-grid parameters are then recovered with distance 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cclab.errors import ShapeError, SizeError, ValidationError


@dataclass(frozen=True)
class ParamTriple:
    p0: float
    gamma: float
    pq: float

    def __post_init__(self):
        for name in ("p0", "gamma", "pq"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class FitResult:
    params: ParamTriple
    delta: float
    model: str
    grid_resolution: float

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "p0": self.params.p0,
            "gamma": self.params.gamma,
            "pq": self.params.pq,
            "delta": self.delta,
            "resolution": self.grid_resolution,
        }


def _powers(base: np.ndarray, n: int) -> np.ndarray:
    """base**0 .. base**(n-1) along a new last axis, by repeated products."""
    base = np.asarray(base, dtype=float)
    steps = np.broadcast_to(base[..., None], base.shape + (n,)).copy()
    steps[..., 0] = 1.0
    return np.cumprod(steps, axis=-1)


def _shifted_cumprod(x: np.ndarray, axis: int) -> np.ndarray:
    out = np.ones_like(x)
    n = x.shape[axis]
    if n > 1:
        src = [slice(None)] * x.ndim
        dst = [slice(None)] * x.ndim
        src[axis] = slice(0, n - 1)
        dst[axis] = slice(1, n)
        out[tuple(dst)] = np.cumprod(x[tuple(src)], axis=axis)
    return out


def _tcm_base(p0: np.ndarray, gamma: np.ndarray, m: int, K: int):
    """Attraction-only part of the TCM surface and the discount exponents.

    Returns ``base`` of shape ``p0.shape x gamma.shape x (m*K)`` and the
    exponent per rank.
    """
    n = m * K
    a = p0[:, None, None] * _powers(gamma, n)[None, :, :]
    base = _shifted_cumprod(1.0 - a, axis=-1) * a
    return base, np.arange(n)


def _ccm_base(p0: np.ndarray, gamma: np.ndarray, m: int, K: int):
    g = _powers(gamma, m + K - 1)
    expo = np.add.outer(np.arange(m), np.arange(K))
    a = p0[:, None, None, None] * g[None, :, expo]
    within = _shifted_cumprod(1.0 - a, axis=-1)
    row_survival = np.cumprod(1.0 - a, axis=-1)[..., -1]
    exam = _shifted_cumprod(row_survival, axis=-1)
    base = exam[..., None] * within * a
    return base.reshape(base.shape[:2] + (m * K,)), expo.ravel()


_BASES = {"tcm": _tcm_base, "ccm": _ccm_base}


def _check_shape(shape) -> tuple:
    m, K = (int(x) for x in shape)
    if m < 1 or K < 1:
        raise ShapeError(f"invalid shape {shape}")
    return m, K


def _surface(model: str, shape, params: ParamTriple) -> np.ndarray:
    m, K = _check_shape(shape)
    base, expo = _BASES[model](np.array([params.p0]), np.array([params.gamma]), m, K)
    disc = _powers(np.array(1.0 - params.pq), expo.max() + 1)[expo]
    return (disc * base[0, 0]).reshape(m, K)


def mu_tcm(shape, params: ParamTriple) -> np.ndarray:
    """TCM click probabilities on an ``m x K`` grid read row-major."""
    return _surface("tcm", shape, params)


def mu_ccm(shape, params: ParamTriple) -> np.ndarray:
    """CCM click probabilities with attraction ``p0 * gamma**(i+j)``."""
    return _surface("ccm", shape, params)


def _flat(x) -> tuple:
    if isinstance(x, np.ndarray):
        return x.astype(float).ravel(), x.shape
    rows = [np.asarray(r, dtype=float).ravel() for r in x]
    return np.concatenate(rows), tuple(r.size for r in rows)


def total_variation(a, b) -> float:
    """Half the L1 distance between two same-shaped click matrices."""
    fa, sa = _flat(a)
    fb, sb = _flat(b)
    if sa != sb:
        raise ShapeError(f"shape mismatch: {sa} vs {sb}")
    return 0.5 * float(np.sum(np.abs(fa - fb)))


def param_grid(resolution: float) -> np.ndarray:
    """Inclusive grid ``0, res, 2 res, ..., 1`` (1 appended if not a multiple)."""
    if not 0.0 < resolution <= 1.0:
        raise ValidationError("resolution must lie in (0, 1]")
    n = round(1.0 / resolution)
    if abs(n * resolution - 1.0) < 1e-9:
        return np.arange(n + 1) / n
    vals = np.arange(int(np.floor(1.0 / resolution)) + 1) * resolution
    return np.append(vals, 1.0) if vals[-1] < 1.0 else vals


def grid_fit(target, model: str, resolution: float = 0.01) -> FitResult:
    """Minimum-distance ``(p0, gamma, pq)`` for ``target`` on the grid.

    Exact ties go to the lexicographically smallest triple.
    """
    model = model.lower()
    if model not in _BASES:
        raise ValidationError(f"model must be 'tcm' or 'ccm', got {model!r}")
    target = np.asarray(target, dtype=float)
    if target.ndim != 2:
        raise ShapeError("target must be a rectangular m x K matrix")
    if target.size == 0:
        raise SizeError("empty target")
    if np.any((target < 0) | (target > 1)):
        raise ValidationError("target entries must lie in [0, 1]")
    m, K = target.shape
    grid = param_grid(resolution)
    base, expo = _BASES[model](grid, grid, m, K)
    flat_target = target.ravel()
    disc = _powers(1.0 - grid, expo.max() + 1)[:, expo]

    # delta[p0, gamma, pq]; C-order argmin gives the lexicographic tie-break.
    delta = np.empty((grid.size, grid.size, grid.size))
    for k in range(grid.size):
        delta[:, :, k] = 0.5 * np.abs(disc[k] * base - flat_target).sum(axis=-1)
    i, j, k = np.unravel_index(np.argmin(delta), delta.shape)
    params = ParamTriple(float(grid[i]), float(grid[j]), float(grid[k]))
    return FitResult(params, float(delta[i, j, k]), model, float(resolution))


def empirical_frequencies(clicks) -> np.ndarray:
    """Click frequencies per session (no-click sessions in the denominator)."""
    if clicks.sessions < 1:
        raise SizeError("no sessions")
    rows = [np.asarray(c, dtype=float) / clicks.sessions for c in clicks.counts]
    if len({r.size for r in rows}) == 1:
        return np.vstack(rows)
    return rows


__all__ = [
    "ParamTriple",
    "FitResult",
    "mu_tcm",
    "mu_ccm",
    "total_variation",
    "param_grid",
    "grid_fit",
    "empirical_frequencies",
]
