"""MovieLens ingestion, genre assignment, splitting and user groups.

Reads the ``ml-latest-small`` CSV schema::

    ratings.csv  userId,movieId,rating,timestamp
    movies.csv   movieId,title,genres        (genres pipe-separated)

User and item identifiers are mapped to dense indices in ascending id
order, so ordering by index is ordering by id.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cclab.errors import ParseError, SizeError, ValidationError

NO_GENRE = "(no genres listed)"
GROUP_LABELS = ("very low", "low", "medium", "high", "very high")
RATING_RANGE = (0.5, 5.0)


@dataclass(frozen=True)
class MovieRecord:
    movie_id: int
    title: str
    genres: tuple


@dataclass(frozen=True)
class RatingsDataset:
    """Rating triples over dense user/item indices.

    ``user_ids[u]`` and ``item_ids[a]`` recover the original identifiers.
    Subsets produced by splitting keep the full index spaces, so models
    trained on either half line up with each other.
    """

    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    user_ids: np.ndarray
    item_ids: np.ndarray

    def __len__(self):
        return int(self.ratings.size)

    @property
    def n_users(self) -> int:
        return int(self.user_ids.size)

    @property
    def n_items(self) -> int:
        return int(self.item_ids.size)

    @classmethod
    def from_triples(cls, triples) -> "RatingsDataset":
        triples = list(triples)
        if not triples:
            raise SizeError("no ratings")
        uid = np.array([t[0] for t in triples])
        iid = np.array([t[1] for t in triples])
        r = np.array([float(t[2]) for t in triples])
        user_ids, users = np.unique(uid, return_inverse=True)
        item_ids, items = np.unique(iid, return_inverse=True)
        keys = users.astype(np.int64) * item_ids.size + items
        if np.unique(keys).size != keys.size:
            raise ValidationError("duplicate (user, item) rating")
        lo, hi = RATING_RANGE
        if np.any((r < lo) | (r > hi)):
            raise ValidationError(f"ratings must lie in [{lo}, {hi}]")
        return cls(users.astype(np.int64), items.astype(np.int64), r, user_ids, item_ids)

    def subset(self, index: np.ndarray) -> "RatingsDataset":
        index = np.asarray(index)
        return RatingsDataset(
            self.users[index], self.items[index], self.ratings[index], self.user_ids, self.item_ids
        )

    def triples(self) -> list:
        return [
            (self.user_ids[u].item(), self.item_ids[a].item(), float(r))
            for u, a, r in zip(self.users, self.items, self.ratings)
        ]

    def user_counts(self) -> np.ndarray:
        return np.bincount(self.users, minlength=self.n_users)


@dataclass(frozen=True)
class SplitAssignment:
    train: RatingsDataset
    test: RatingsDataset
    seed: int


@dataclass(frozen=True)
class UserGroups:
    """Activity group (0 = "very low" .. 4 = "very high") per dense user."""

    group_of: np.ndarray
    user_ids: np.ndarray

    def members(self, group: int) -> np.ndarray:
        return np.flatnonzero(self.group_of == group)

    def sizes(self) -> list:
        return [int(np.sum(self.group_of == g)) for g in range(len(GROUP_LABELS))]

    def as_dict(self) -> dict:
        return {
            self.user_ids[u].item(): GROUP_LABELS[g] for u, g in enumerate(self.group_of)
        }


def _read_csv(path, header_first: str):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("file is empty", path, 1)
    if not rows[0] or rows[0][0].lstrip("\ufeff") != header_first:
        raise ParseError(f"expected a header starting with {header_first!r}", path, 1)
    return path, rows[1:]


def read_ratings(path) -> RatingsDataset:
    path, rows = _read_csv(path, "userId")
    triples, seen = [], set()
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) not in (3, 4):
            raise ParseError(f"expected 3 or 4 fields, got {len(row)}", path, lineno)
        try:
            u, a, r = int(row[0]), int(row[1]), float(row[2])
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from None
        if not RATING_RANGE[0] <= r <= RATING_RANGE[1]:
            raise ParseError(f"rating {r} outside {RATING_RANGE}", path, lineno)
        if (u, a) in seen:
            raise ValidationError(f"{path}:{lineno}: duplicate rating for user {u}, item {a}")
        seen.add((u, a))
        triples.append((u, a, r))
    if not triples:
        raise ParseError("no rating rows", path, 2)
    return RatingsDataset.from_triples(triples)


def read_movies(path) -> list:
    path, rows = _read_csv(path, "movieId")
    movies, seen = [], set()
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", path, lineno)
        try:
            movie_id = int(row[0])
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from None
        if movie_id in seen:
            raise ValidationError(f"{path}:{lineno}: duplicate movie {movie_id}")
        seen.add(movie_id)
        genres = tuple(g for g in row[2].split("|") if g) or (NO_GENRE,)
        movies.append(MovieRecord(movie_id, row[1], genres))
    if not movies:
        raise ParseError("no movie rows", path, 2)
    return movies


def load_movielens(ratings_path, movies_path) -> tuple:
    """Load ratings and movies; every rated movie must be listed."""
    data = read_ratings(ratings_path)
    movies = read_movies(movies_path)
    known = {m.movie_id for m in movies}
    missing = [i for i in data.item_ids.tolist() if i not in known]
    if missing:
        raise ValidationError(f"{len(missing)} rated movies missing from {movies_path}, e.g. {missing[0]}")
    return data, movies


def write_ratings(data: RatingsDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["userId", "movieId", "rating"])
        for u, a, r in data.triples():
            w.writerow([u, a, repr(r)])


def write_movies(movies, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["movieId", "title", "genres"])
        for m in movies:
            w.writerow([m.movie_id, m.title, "|".join(m.genres)])


def assign_primary_genre(movies, ratings: RatingsDataset) -> dict:
    """Map each movie id to one genre: its most popular listed genre.

    A genre's popularity is the number of ratings received by all movies
    listing it. Ties go to the alphabetically first genre.
    """
    per_movie = Counter(ratings.item_ids[ratings.items].tolist())
    popularity = Counter()
    for m in movies:
        for g in m.genres:
            popularity[g] += per_movie.get(m.movie_id, 0)
    return {m.movie_id: min(m.genres, key=lambda g: (-popularity[g], g)) for m in movies}


def topic_codes(data: RatingsDataset, genre_of: dict) -> tuple:
    """Integer topic code per dense item, plus the sorted topic names."""
    names = sorted({genre_of[i] for i in data.item_ids.tolist()})
    code = {name: c for c, name in enumerate(names)}
    codes = np.array([code[genre_of[i]] for i in data.item_ids.tolist()], dtype=np.int64)
    return codes, names


def split_half(data: RatingsDataset, seed: int) -> SplitAssignment:
    """Random halves; the training half gets the extra rating when odd."""
    n = len(data)
    if n < 2:
        raise SizeError("need at least two ratings to split")
    perm = np.random.default_rng(seed).permutation(n)
    cut = (n + 1) // 2
    return SplitAssignment(
        data.subset(np.sort(perm[:cut])), data.subset(np.sort(perm[cut:])), seed
    )


def quintile_groups(data: RatingsDataset) -> UserGroups:
    """Five near-equal user groups by rating count (ties by user id)."""
    if data.n_users < len(GROUP_LABELS):
        raise SizeError(f"need at least {len(GROUP_LABELS)} users, got {data.n_users}")
    counts = data.user_counts()
    order = np.lexsort((np.arange(data.n_users), counts))
    group_of = np.empty(data.n_users, dtype=np.int64)
    for g, chunk in enumerate(np.array_split(order, len(GROUP_LABELS))):
        group_of[chunk] = g
    return UserGroups(group_of, data.user_ids)
