"""Command-line entry point ``cclab``.

Exit codes: 0 on success, 1 for invalid input (bad arguments, malformed
or inconsistent data), 2 when a file cannot be read or written.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from cclab import dataio, experiments
from cclab.errors import ParseError, ValidationError
from cclab.fitting import empirical_frequencies, grid_fit
from cclab.layout import POOL_SIZES, ccm_layout, select_item_pool, tcm_layout
from cclab.models import AttractionMatrix, PerColumn, Uniform
from cclab.recsys import popular_ratings, random_ratings, softmax_attractions
from cclab.simulate import MODELS, empirical_click_matrix

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def read_matrix_csv(path) -> list:
    """Rows of comma-separated reals; rows may differ in length."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not x.strip() for x in row):
                continue
            try:
                rows.append(np.array([float(x) for x in row]))
            except ValueError as exc:
                raise ParseError(str(exc), path, lineno) from None
    if not rows:
        raise ParseError("no rows", path, 1)
    return rows


def write_matrix_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in rows:
            w.writerow([format(float(x), ".17g") for x in row])


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_load(args) -> None:
    data, movies = dataio.load_movielens(args.ratings, args.movies)
    genre = dataio.assign_primary_genre(movies, data)
    _, topics = dataio.topic_codes(data, genre)
    summary = {
        "ratings": len(data),
        "users": data.n_users,
        "rated_items": data.n_items,
        "movies": len(movies),
        "topics": topics,
        "group_sizes": dataio.quintile_groups(data).sizes(),
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        dataio.write_ratings(data, out / "ratings.csv")
        dataio.write_movies(movies, out / "movies.csv")
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")


def cmd_fit(args) -> None:
    rows = read_matrix_csv(args.input)
    if len({r.size for r in rows}) != 1:
        raise ValidationError("fit needs a rectangular click matrix")
    result = grid_fit(np.vstack(rows), args.model, args.resolution)
    _emit(experiments.dumps_report(result.to_dict()), args.out)


def _termination(args):
    if args.thresh is None:
        return Uniform(args.pq)
    if args.far is None:
        raise ValidationError("--thresh needs --far")
    return PerColumn(args.thresh, args.pq, args.far)


def cmd_simulate(args) -> None:
    mat = AttractionMatrix(read_matrix_csv(args.layout))
    clicks = empirical_click_matrix(mat, _termination(args), args.model, args.sessions, args.seed)
    freqs = empirical_frequencies(clicks)
    write_matrix_csv(freqs, args.out)


def cmd_layout(args) -> None:
    config = experiments.load_config(args.config) if args.config else experiments.ExperimentConfig()
    ws = experiments.Workspace(config)
    run = ws.run(args.seed)
    ids = ws.data.user_ids.tolist()
    if args.user not in ids:
        raise ValidationError(f"unknown user {args.user}")
    u = ids.index(args.user)
    if args.policy == "personalized":
        p = run.p_hat[u]
    elif args.policy == "popular":
        p = softmax_attractions(popular_ratings(run.train_model))
    else:
        p = softmax_attractions(random_ratings(ws.data.n_items, run.random_seed))
    cand = select_item_pool(run.split.train, args.pool)
    if args.model == "ccm":
        rows = ccm_layout(p, ws.topics, cand)
        labels = [ws.topic_names[ws.topics[r[0]]] for r in rows]
    else:
        rows, labels = [tcm_layout(p, cand)], [""]
    item_ids = ws.data.item_ids
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "column", "item_id", "topic", "attraction"])
        for i, (row, label) in enumerate(zip(rows, labels), start=1):
            for j, a in enumerate(row, start=1):
                w.writerow([i, j, item_ids[a].item(), label, format(float(p[a]), ".17g")])


def cmd_experiment(args) -> None:
    config = experiments.load_config(args.config)
    experiments.run_experiment(args.name, config, args.out)
    sys.stdout.write(f"wrote {Path(args.out) / (args.name + '.json')}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cclab", description="Carousel click models on MovieLens.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("load", help="validate MovieLens files and print a summary")
    p.add_argument("--ratings", required=True)
    p.add_argument("--movies", required=True)
    p.add_argument("--out", help="directory for a canonical re-dump of both files")
    p.set_defaults(func=cmd_load)

    p = sub.add_parser("fit", help="grid-fit a click matrix (CSV) with TCM or CCM")
    p.add_argument("--input", required=True)
    p.add_argument("--model", choices=("tcm", "ccm"), required=True)
    p.add_argument("--resolution", type=float, default=0.01)
    p.add_argument("--out", help="JSON output path (stdout if omitted)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="simulate sessions on an attraction layout (CSV)")
    p.add_argument("--layout", required=True)
    p.add_argument("--model", choices=MODELS, required=True)
    p.add_argument("--pq", type=float, default=0.01, help="termination probability (near value with --thresh)")
    p.add_argument("--thresh", type=int, help="per-column profile: columns 1..thresh use --pq")
    p.add_argument("--far", type=float, help="per-column profile: termination beyond thresh")
    p.add_argument("--sessions", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("layout", help="write one user's optimal layout")
    p.add_argument("--pool", choices=tuple(POOL_SIZES), default="all")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="experiment config (data paths, MF settings)")
    p.add_argument("--user", type=int, default=1, help="MovieLens userId")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", choices=("ccm", "tcm"), default="ccm")
    p.add_argument("--policy", choices=("personalized", "popular", "random"), default="personalized")
    p.set_defaults(func=cmd_layout)

    p = sub.add_parser("experiment", help="run one experiment and write its report")
    p.add_argument("name", choices=experiments.EXPERIMENTS)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except OSError as exc:
        print(f"cclab: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, IndexError) as exc:
        print(f"cclab: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
