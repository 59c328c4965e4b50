"""End-to-end MovieLens experiments and their report files.

Every experiment is a pure function of an :class:`ExperimentConfig`. For
each seed the ratings are split in half, one factor model is trained per
half, and per-user softmax attractions are derived from each: ``p_hat``
from the training half (used to build layouts) and ``p_test`` from the
test half (used to score them). Scores are averaged over users, per
activity quintile and overall, then averaged over seeds.

Reports are JSON with floats written to 17 significant digits, so two runs
with the same config produce identical bytes. Wall-clock time goes to a
separate ``<name>.timing.json`` file for that reason.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from cclab.dataio import GROUP_LABELS, assign_primary_genre, load_movielens, quintile_groups, split_half, topic_codes
from cclab.errors import ValidationError
from cclab.fitting import ParamTriple, empirical_frequencies, grid_fit, mu_ccm, mu_tcm
from cclab.layout import POOL_SIZES, ccm_layout, select_item_pool, tcm_layout
from cclab.models import AttractionMatrix, PerColumn, Uniform, ccm_click_matrix, ccm_list_prob, tcm_list_prob, tcm_position_probs
from cclab.recsys import MFConfig, popular_ratings, random_ratings, softmax_attractions, train_mf
from cclab.simulate import empirical_click_matrix

EXPERIMENTS = ("generalization", "personalization", "comparison", "realistic", "heatmaps", "fit-synthetic")
HEATMAP_SIZE = 10
NA = "NA"


# -- configuration -----------------------------------------------------------


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text: str) -> tuple:
    return tuple(int(x) for x in text.split(",") if x.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of the experiment suite.

    ``ratings``/``movies`` are kept as written; ``base_dir`` resolves
    relative paths (the config file's directory when read from a file).
    """

    ratings: str = "data/ml-latest-small/ratings.csv"
    movies: str = "data/ml-latest-small/movies.csv"
    seeds: tuple = (0, 1, 2)
    mf: MFConfig = MFConfig()
    pool: str = "all"
    pools: tuple = ("top100", "top1000", "all")
    pq: float = 0.01
    thresh: int = 10
    near: float = 0.01
    far: float = 0.1
    fit_shape: tuple = (5, 4)
    fit_sessions: int = 1_000_000
    fit_resolution: float = 0.01
    fit_seed: int = 0
    fit_tcm: ParamTriple = ParamTriple(0.17, 0.92, 0.02)
    fit_ccm: ParamTriple = ParamTriple(0.2, 0.8, 0.1)
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        if not self.seeds:
            raise ValidationError("at least one seed is required")
        for p in (self.pool,) + tuple(self.pools):
            if p not in POOL_SIZES:
                raise ValidationError(f"unknown item pool {p!r}")
        Uniform(self.pq)
        PerColumn(self.thresh, self.near, self.far)
        if len(self.fit_shape) != 2 or min(self.fit_shape) < 1:
            raise ValidationError("fit_shape must be two positive integers")
        if self.fit_sessions < 1:
            raise ValidationError("fit_sessions must be >= 1")

    def path(self, name: str) -> Path:
        p = Path(getattr(self, name))
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def uniform(self) -> Uniform:
        return Uniform(self.pq)

    @property
    def per_column(self) -> PerColumn:
        return PerColumn(self.thresh, self.near, self.far)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        d["mf"].pop("seed")
        return d


# key -> (field, parser); "mf.*" keys feed MFConfig
_KEYS = {
    "ratings": ("ratings", str),
    "movies": ("movies", str),
    "seeds": ("seeds", _ints),
    "pool": ("pool", str),
    "pools": ("pools", lambda s: tuple(x.strip() for x in s.split(",") if x.strip())),
    "pq": ("pq", float),
    "percolumn.thresh": ("thresh", int),
    "percolumn.near": ("near", float),
    "percolumn.far": ("far", float),
    "fit.shape": ("fit_shape", _ints),
    "fit.sessions": ("fit_sessions", int),
    "fit.resolution": ("fit_resolution", float),
    "fit.seed": ("fit_seed", int),
    "fit.tcm": ("fit_tcm", lambda s: ParamTriple(*_floats(s))),
    "fit.ccm": ("fit_ccm", lambda s: ParamTriple(*_floats(s))),
}
_MF_KEYS = {"d": int, "epochs": int, "learning_rate": float, "regularization": float, "init_scale": float}


def parse_config(text: str, base_dir=".") -> ExperimentConfig:
    """Parse flat ``key = value`` lines (``#`` starts a comment)."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[cclab]\n" + text)
    except configparser.Error as exc:
        raise ValidationError(f"malformed config: {exc}") from None
    values, mf = {}, {}
    for key, raw in parser["cclab"].items():
        try:
            if key.startswith("mf."):
                name = key[3:]
                if name not in _MF_KEYS:
                    raise KeyError(key)
                mf[name] = _MF_KEYS[name](raw)
            else:
                name, conv = _KEYS[key]
                values[name] = conv(raw)
        except KeyError:
            raise ValidationError(f"unknown config key {key!r}") from None
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad value for {key!r}: {exc}") from None
    if mf:
        values["mf"] = MFConfig(**mf)
    return ExperimentConfig(base_dir=str(base_dir), **values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)


# -- shared per-seed state ---------------------------------------------------


@dataclass
class SeedRun:
    seed: int
    split: object
    train_model: object
    test_model: object
    p_hat: np.ndarray
    p_test: np.ndarray
    random_seed: int


def derive_seeds(seed: int) -> tuple:
    """Independent (train model, test model, random baseline) seeds."""
    return tuple(int(s) for s in np.random.SeedSequence(seed).generate_state(3))


class Workspace:
    """Loads the data once and caches the per-seed models."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self._data = None
        self._runs = {}

    def _load(self):
        if self._data is None:
            data, movies = load_movielens(self.config.path("ratings"), self.config.path("movies"))
            codes, names = topic_codes(data, assign_primary_genre(movies, data))
            self._data = (data, codes, names, quintile_groups(data))
        return self._data

    @property
    def data(self):
        return self._load()[0]

    @property
    def topics(self) -> np.ndarray:
        return self._load()[1]

    @property
    def topic_names(self) -> list:
        return self._load()[2]

    @property
    def groups(self):
        return self._load()[3]

    def run(self, seed: int) -> SeedRun:
        if seed not in self._runs:
            split = split_half(self.data, seed)
            s_train, s_test, s_random = derive_seeds(seed)
            mf = self.config.mf
            m_train = train_mf(split.train, dataclasses.replace(mf, seed=s_train))
            m_test = train_mf(split.test, dataclasses.replace(mf, seed=s_test))
            self._runs[seed] = SeedRun(
                seed, split, m_train, m_test,
                softmax_attractions(m_train), softmax_attractions(m_test), s_random,
            )
        return self._runs[seed]


# -- evaluation helpers ------------------------------------------------------


def ccm_value(p: np.ndarray, rows: list, term) -> float:
    return ccm_list_prob(AttractionMatrix([p[r] for r in rows]), term)


def tcm_value(p: np.ndarray, order: np.ndarray, term) -> float:
    return tcm_list_prob(p[order], term)


def relative_drop(base: float, variant: float) -> float:
    """``100 * (base - variant) / base``."""
    return 100.0 * (base - variant) / base


def summarize(values: np.ndarray, groups) -> dict:
    """Overall and per-quintile means of per-user values."""
    values = np.asarray(values, dtype=float)
    return {
        "overall": float(np.mean(values)),
        "groups": {label: float(np.mean(values[groups.members(g)])) for g, label in enumerate(GROUP_LABELS)},
    }


def _mean_summaries(summaries: list) -> dict:
    return {
        "overall": float(np.mean([s["overall"] for s in summaries])),
        "groups": {g: float(np.mean([s["groups"][g] for s in summaries])) for g in GROUP_LABELS},
    }


def _drops(base: dict, variant: dict) -> dict:
    return {
        "overall": relative_drop(base["overall"], variant["overall"]),
        "groups": {g: relative_drop(base["groups"][g], variant["groups"][g]) for g in GROUP_LABELS},
    }


def _policy_table(ws: Workspace, per_seed) -> dict:
    """Run ``per_seed(run) -> {policy: per-user values}`` and average seeds."""
    runs = []
    for seed in ws.config.seeds:
        values = per_seed(ws.run(seed))
        runs.append({"seed": seed, "policies": {k: summarize(v, ws.groups) for k, v in values.items()}})
    names = list(runs[0]["policies"])
    avg = {k: _mean_summaries([r["policies"][k] for r in runs]) for k in names}
    return {"per_seed": runs, "average": avg}


def _base_report(name: str, ws: Workspace) -> dict:
    return {
        "experiment": name,
        "config": ws.config.to_dict(),
        "groups": {"labels": list(GROUP_LABELS), "sizes": ws.groups.sizes()},
    }


# -- experiments -------------------------------------------------------------


def exp_generalization(config: ExperimentConfig, ws: Optional[Workspace] = None) -> dict:
    """Train-optimal versus test-optimal carousel layouts, scored on test."""
    ws = ws or Workspace(config)
    term = config.uniform

    def per_seed(run):
        cand = select_item_pool(run.split.train, config.pool)
        train_opt, test_opt = [], []
        for u in range(ws.data.n_users):
            pt = run.p_test[u]
            train_opt.append(ccm_value(pt, ccm_layout(run.p_hat[u], ws.topics, cand), term))
            test_opt.append(ccm_value(pt, ccm_layout(pt, ws.topics, cand), term))
        return {"test_optimal": test_opt, "train_optimal": train_opt}

    table = _policy_table(ws, per_seed)
    avg = table["average"]
    report = _base_report("generalization", ws)
    report.update(
        mf={"per_seed": [_mf_stats(ws.run(s)) for s in config.seeds]},
        results=table,
        gap_percent=_drops(avg["test_optimal"], avg["train_optimal"]),
    )
    report["mf"]["average"] = {
        k: float(np.mean([r[k] for r in report["mf"]["per_seed"]]))
        for k in ("pred_mean", "pred_std", "train_rmse", "test_rmse")
    }
    return report


def _mf_stats(run: SeedRun) -> dict:
    pred = run.train_model.predict_all()
    return {
        "seed": run.seed,
        "pred_mean": float(pred.mean()),
        "pred_std": float(pred.std()),
        "train_rmse": float(run.train_model.rmse_history[-1]),
        "test_rmse": float(run.test_model.rmse_history[-1]),
    }


def exp_personalization(config: ExperimentConfig, ws: Optional[Workspace] = None) -> dict:
    """Personalized layouts against popular and random ones."""
    ws = ws or Workspace(config)
    term = config.uniform

    def per_seed(run):
        cand = select_item_pool(run.split.train, config.pool)
        popular = ccm_layout(softmax_attractions(popular_ratings(run.train_model)), ws.topics, cand)
        rand = ccm_layout(softmax_attractions(random_ratings(ws.data.n_items, run.random_seed)), ws.topics, cand)
        out = {"personalized": [], "popular": [], "random": []}
        for u in range(ws.data.n_users):
            pt = run.p_test[u]
            out["personalized"].append(ccm_value(pt, ccm_layout(run.p_hat[u], ws.topics, cand), term))
            out["popular"].append(ccm_value(pt, popular, term))
            out["random"].append(ccm_value(pt, rand, term))
        return out

    table = _policy_table(ws, per_seed)
    avg = table["average"]
    report = _base_report("personalization", ws)
    report.update(
        results=table,
        drop_percent={k: _drops(avg["personalized"], avg[k]) for k in ("popular", "random")},
    )
    return report


def exp_model_comparison(config: ExperimentConfig, profile: str = "uniform", ws: Optional[Workspace] = None) -> dict:
    """CCM against CCM-NL and TCM for every item pool.

    CCM-NL is the carousel layout read row by row as one list and scored
    under the TCM. The TCM baseline ranks the whole pool as one list. With
    the per-column profile the termination probability of every scanned
    item depends on its column (its rank, for a single list).
    """
    ws = ws or Workspace(config)
    if profile not in ("uniform", "percolumn"):
        raise ValidationError(f"unknown termination profile {profile!r}")
    term = config.uniform if profile == "uniform" else config.per_column

    pools = {}
    for pool in config.pools:

        def per_seed(run, pool=pool):
            cand = select_item_pool(run.split.train, pool)
            out = {"ccm": [], "ccm_nl": [], "tcm": []}
            for u in range(ws.data.n_users):
                ph, pt = run.p_hat[u], run.p_test[u]
                rows = ccm_layout(ph, ws.topics, cand)
                out["ccm"].append(ccm_value(pt, rows, term))
                out["ccm_nl"].append(tcm_value(pt, np.concatenate(rows), term))
                out["tcm"].append(tcm_value(pt, tcm_layout(ph, cand), term))
            return out

        table = _policy_table(ws, per_seed)
        avg = table["average"]
        table["drop_percent"] = {k: _drops(avg["ccm"], avg[k]) for k in ("ccm_nl", "tcm")}
        pools[pool] = table

    name = "comparison" if profile == "uniform" else "realistic"
    report = _base_report(name, ws)
    report.update(termination=_term_dict(term), pools=pools)
    return report


def _term_dict(term) -> dict:
    if isinstance(term, Uniform):
        return {"profile": "uniform", "pq": term.pq}
    return {"profile": "percolumn", "thresh": term.thresh, "near": term.near, "far": term.far}


@dataclass
class HeatmapDump:
    label: str
    values: np.ndarray  # log of user-averaged click probability; nan marks zero cells

    def rows(self) -> list:
        return [[None if math.isnan(x) else float(x) for x in row] for row in self.values]


def _log_grid(total: np.ndarray) -> np.ndarray:
    out = np.full(total.shape, np.nan)
    pos = total > 0
    out[pos] = np.log(total[pos])
    return out


def exp_heatmaps(config: ExperimentConfig, ws: Optional[Workspace] = None) -> list:
    """Average click probability over the top-left 10x10 positions.

    Layouts are optimal for the test attractions they are scored on. The
    CCM-NL map shows the flattened list's clicks at their carousel
    positions; the TCM map shows its first 100 ranks row-major.
    """
    ws = ws or Workspace(config)
    term = config.uniform
    n = HEATMAP_SIZE
    sums = {k: np.zeros((n, n)) for k in ("ccm", "ccm_nl", "tcm")}
    count = 0
    for seed in config.seeds:
        run = ws.run(seed)
        cand = select_item_pool(run.split.train, config.pool)
        for u in range(ws.data.n_users):
            pt = run.p_test[u]
            rows = ccm_layout(pt, ws.topics, cand)
            ccm = ccm_click_matrix(AttractionMatrix([pt[r] for r in rows]), term)
            nl = tcm_position_probs(pt[np.concatenate(rows)], term)
            start = 0
            for i, r in enumerate(rows):
                k = min(len(r), n)
                if i < n:
                    sums["ccm"][i, :k] += ccm[i][:k]
                    sums["ccm_nl"][i, :k] += nl[start : start + k]
                start += len(r)
            top = tcm_position_probs(pt[tcm_layout(pt, cand, n * n)], term)
            sums["tcm"].ravel()[: top.size] += top
            count += 1
    return [HeatmapDump(k, _log_grid(v / count)) for k, v in sums.items()]


def exp_fit_synthetic(config: ExperimentConfig) -> dict:
    """Fit both surfaces to list-style and carousel-style synthetic targets.

    Each generating triple yields an exact target (its own surface) and a
    simulated one (``fit_sessions`` sessions).
    """
    shape = tuple(config.fit_shape)
    m, K = shape
    res = config.fit_resolution
    out = {}
    for gen, params in (("tcm", config.fit_tcm), ("ccm", config.fit_ccm)):
        exact = (mu_tcm if gen == "tcm" else mu_ccm)(shape, params)
        if gen == "tcm":
            mat = AttractionMatrix.single(params.p0 * params.gamma ** np.arange(m * K))
        else:
            mat = AttractionMatrix(list(params.p0 * params.gamma ** np.add.outer(np.arange(m), np.arange(K))))
        clicks = empirical_click_matrix(mat, Uniform(params.pq), gen, config.fit_sessions, config.fit_seed)
        simulated = np.asarray(empirical_frequencies(clicks)).reshape(shape)
        fits = {}
        for kind, target in (("exact", exact), ("simulated", simulated)):
            fits[kind] = {model: grid_fit(target, model, res).to_dict() for model in ("tcm", "ccm")}
        out[gen] = {"params": dataclasses.asdict(params), "fits": fits}
    return {"experiment": "fit-synthetic", "config": config.to_dict(), "generated": out}


# -- report files ------------------------------------------------------------


def _encode(obj, indent: int = 0) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_encode(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple)) for x in obj):
            return "[" + ", ".join(_encode(x) for x in obj) + "]"
        return "[\n" + ",\n".join(inner + _encode(x, indent + 1) for x in obj) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValidationError("non-finite value in report")
        text = format(x, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    return json.dumps(str(obj))


def dumps_report(report: dict) -> str:
    """JSON text with every float at 17 significant digits."""
    return _encode(report) + "\n"


def write_heatmap_csv(dump: HeatmapDump, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in dump.values:
            w.writerow([NA if math.isnan(x) else format(float(x), ".17g") for x in row])


def run_experiment(name: str, config: ExperimentConfig, out_dir, ws: Optional[Workspace] = None) -> dict:
    """Run one experiment and write ``<out_dir>/<name>.json`` (plus CSVs)."""
    if name not in EXPERIMENTS:
        raise ValidationError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    if name == "fit-synthetic":
        report = exp_fit_synthetic(config)
    else:
        ws = ws or Workspace(config)
        if name == "generalization":
            report = exp_generalization(config, ws)
        elif name == "personalization":
            report = exp_personalization(config, ws)
        elif name == "comparison":
            report = exp_model_comparison(config, "uniform", ws)
        elif name == "realistic":
            report = exp_model_comparison(config, "percolumn", ws)
        else:
            dumps = exp_heatmaps(config, ws)
            for d in dumps:
                write_heatmap_csv(d, out_dir / f"heatmap_{d.label}.csv")
            report = _base_report("heatmaps", ws)
            report["heatmaps"] = {d.label: d.rows() for d in dumps}
    (out_dir / f"{name}.json").write_text(dumps_report(report), encoding="utf-8")
    timing = {"experiment": name, "seconds": time.perf_counter() - start}
    (out_dir / f"{name}.timing.json").write_text(json.dumps(timing) + "\n", encoding="utf-8")
    return report
