"""Biased matrix factorisation, softmax attractions and baseline ratings.

Predicted rating::

    r(u, a) = global_mean + user_bias[u] + item_bias[a] + <P[u], Q[a]>

fitted by plain SGD on squared error with L2 regularisation. Users or
items without training ratings keep zero factors and zero bias, so their
predictions fall back to the global mean plus whatever bias is available.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numba
import numpy as np

from cclab.errors import SizeError, ValidationError

CHECKPOINT_FORMAT = "cclab-mf"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MFConfig:
    d: int = 32
    epochs: int = 20
    learning_rate: float = 0.005
    regularization: float = 0.1
    init_scale: float = 0.1
    seed: int = 0


@dataclass
class FactorModel:
    user_factors: np.ndarray
    item_factors: np.ndarray
    user_bias: np.ndarray
    item_bias: np.ndarray
    global_mean: float
    seed: int = 0
    rmse_history: list = field(default_factory=list)

    @property
    def d(self) -> int:
        return int(self.user_factors.shape[1])

    @property
    def n_users(self) -> int:
        return int(self.user_factors.shape[0])

    @property
    def n_items(self) -> int:
        return int(self.item_factors.shape[0])

    def predict(self, u: int, a: int) -> float:
        return float(
            self.global_mean
            + self.user_bias[u]
            + self.item_bias[a]
            + self.user_factors[u] @ self.item_factors[a]
        )

    def predict_all(self) -> np.ndarray:
        """Dense ``n_users x n_items`` matrix of predicted ratings."""
        out = self.user_factors @ self.item_factors.T
        out += self.item_bias[None, :]
        out += self.user_bias[:, None]
        out += self.global_mean
        return out

    def save(self, path) -> None:
        """Write an ``.npz`` checkpoint.

        The ``header`` entry is a JSON string with ``format``, ``version``,
        ``d`` and ``seed``; the arrays are stored under their field names.
        """
        header = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "d": self.d,
            "seed": self.seed,
            "global_mean": self.global_mean,
        }
        with open(path, "wb") as fh:
            np.savez(
                fh,
                header=np.array(json.dumps(header, sort_keys=True)),
                user_factors=self.user_factors,
                item_factors=self.item_factors,
                user_bias=self.user_bias,
                item_bias=self.item_bias,
                rmse_history=np.asarray(self.rmse_history, dtype=float),
            )

    @classmethod
    def load(cls, path) -> "FactorModel":
        with np.load(path, allow_pickle=False) as z:
            header = json.loads(str(z["header"]))
            if header.get("format") != CHECKPOINT_FORMAT:
                raise ValidationError(f"{path} is not a factor-model checkpoint")
            if header.get("version") != CHECKPOINT_VERSION:
                raise ValidationError(f"unsupported checkpoint version {header.get('version')}")
            model = cls(
                z["user_factors"],
                z["item_factors"],
                z["user_bias"],
                z["item_bias"],
                float(header["global_mean"]),
                int(header["seed"]),
                z["rmse_history"].tolist(),
            )
        if model.d != header["d"]:
            raise ValidationError("checkpoint header disagrees with factor shape")
        return model


@numba.njit(cache=True)
def _sgd_epoch(users, items, ratings, order, P, Q, bu, bi, mu, lr, reg):
    d = P.shape[1]
    for t in range(order.size):
        k = order[t]
        u = users[k]
        a = items[k]
        pred = mu + bu[u] + bi[a]
        for f in range(d):
            pred += P[u, f] * Q[a, f]
        e = ratings[k] - pred
        bu[u] += lr * (e - reg * bu[u])
        bi[a] += lr * (e - reg * bi[a])
        for f in range(d):
            pu = P[u, f]
            qa = Q[a, f]
            P[u, f] += lr * (e * qa - reg * pu)
            Q[a, f] += lr * (e * pu - reg * qa)


def _rmse(data, P, Q, bu, bi, mu) -> float:
    pred = mu + bu[data.users] + bi[data.items] + np.einsum("ij,ij->i", P[data.users], Q[data.items])
    return float(np.sqrt(np.mean((data.ratings - pred) ** 2)))


def train_mf(data, config: MFConfig = MFConfig()) -> FactorModel:
    """Fit a biased factor model to ``data`` by SGD; deterministic per seed.

    ``rmse_history[0]`` is the training RMSE at initialisation and entry
    ``e`` the RMSE after epoch ``e``.
    """
    if len(data) == 0:
        raise SizeError("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)
    P = rng.normal(0.0, config.init_scale, (data.n_users, config.d))
    Q = rng.normal(0.0, config.init_scale, (data.n_items, config.d))
    bu = np.zeros(data.n_users)
    bi = np.zeros(data.n_items)
    mu = float(np.mean(data.ratings))
    users = data.users.astype(np.int64)
    items = data.items.astype(np.int64)
    ratings = data.ratings.astype(np.float64)

    history = [_rmse(data, P, Q, bu, bi, mu)]
    for _ in range(config.epochs):
        order = rng.permutation(len(data)).astype(np.int64)
        _sgd_epoch(users, items, ratings, order, P, Q, bu, bi, mu, config.learning_rate, config.regularization)
        history.append(_rmse(data, P, Q, bu, bi, mu))

    P[np.bincount(users, minlength=data.n_users) == 0] = 0.0
    Q[np.bincount(items, minlength=data.n_items) == 0] = 0.0
    return FactorModel(P, Q, bu, bi, mu, config.seed, history)


def _as_ratings(source) -> np.ndarray:
    if isinstance(source, FactorModel):
        return source.predict_all()
    return np.asarray(source, dtype=float)


def softmax_attractions(source) -> np.ndarray:
    """Per-user softmax of predicted ratings over all items.

    ``source`` is a ``FactorModel`` or an array of ratings (one row per
    user, or a single row). Rows of the result sum to one.
    """
    r = _as_ratings(source)
    z = np.exp(r - r.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def popular_ratings(source) -> np.ndarray:
    """Mean predicted rating of every item across all users."""
    r = _as_ratings(source)
    return r.mean(axis=0) if r.ndim == 2 else r


def random_ratings(n_items: int, seed: int) -> np.ndarray:
    """I.i.d. ratings uniform on [1, 5], shared by all users."""
    if n_items < 1:
        raise SizeError("n_items must be >= 1")
    return np.random.default_rng(seed).uniform(1.0, 5.0, n_items)
