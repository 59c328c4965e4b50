from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from cclab.models import PerColumn, Uniform

ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = ROOT / "data" / "ml-latest-small"

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def random_profile(rng):
    if rng.random() < 0.5:
        return Uniform(float(rng.random()))
    return PerColumn(int(rng.integers(1, 4)), float(rng.random()), float(rng.random()))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_synthetic_movielens(directory, n_users=30, n_movies=40, seed=0):
    """Small MovieLens-shaped files with a few genres and skewed activity."""
    r = np.random.default_rng(seed)
    genres = ["Action", "Comedy", "Drama", "Horror"]
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "movies.csv", "w") as fh:
        fh.write("movieId,title,genres\n")
        for m in range(1, n_movies + 1):
            g = r.choice(genres, size=int(r.integers(1, 3)), replace=False)
            fh.write(f'{m * 10},"Movie {m} (2000)",{"|".join(g)}\n')
    with open(directory / "ratings.csv", "w") as fh:
        fh.write("userId,movieId,rating,timestamp\n")
        for u in range(1, n_users + 1):
            k = int(r.integers(5, n_movies // 2 + 5))
            for m in sorted(r.choice(np.arange(1, n_movies + 1), size=k, replace=False)):
                fh.write(f"{u},{m * 10},{r.integers(1, 11) / 2},{1000 + u}\n")
    return directory / "ratings.csv", directory / "movies.csv"
