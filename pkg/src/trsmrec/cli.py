"""Command-line entry point: ``trsmrec {validate,run,recommend}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import report as rpt
from .evaluation import (
    DEFAULT_FOLDS, DEFAULT_SEED, LIKE_THRESHOLD, compare, evaluate,
    log_segment_accounting, neighbor_rank_changes,
)
from .ingest import DataError, Gender, load_dataset, parse_ratings, parse_users
from .predictor import DEFAULT_K, DEFAULT_N_VALUES, rank_top_n, recommend_top_n, select_neighbors
from .segment import segment_of, split_by_gender
from .similarity import BENCHMARK_MEASURES, Measure, build_similarity_model

_log = logging.getLogger("trsmrec")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4

INCOMPLETE_MARKER = "INCOMPLETE"


class ConfigError(ValueError):
    pass


@dataclasses.dataclass
class ExperimentConfig:
    data_dir: str = "data/ml-100k"
    measures: list[str] = dataclasses.field(default_factory=lambda: [m.value for m in BENCHMARK_MEASURES])
    segments: list[str] = dataclasses.field(default_factory=lambda: [g.label for g in Gender])
    k: int = DEFAULT_K
    n_values: list[int] = dataclasses.field(default_factory=lambda: list(DEFAULT_N_VALUES))
    threshold: float = LIKE_THRESHOLD
    folds: int = DEFAULT_FOLDS
    seed: int = DEFAULT_SEED
    output_dir: str = "results"
    format: str = "both"
    jobs: int = 1

    def validate(self) -> None:
        try:
            self.measure_ids
            self.genders
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.k < 1:
            raise ConfigError("k must be positive")
        if not self.n_values or any(n < 1 for n in self.n_values):
            raise ConfigError("n values must be positive integers")
        if self.folds < 2:
            raise ConfigError("folds must be at least 2")
        if self.format not in ("csv", "json", "both"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be positive")

    @property
    def measure_ids(self) -> list[Measure]:
        return [Measure.parse(m) for m in self.measures]

    @property
    def genders(self) -> list[Gender]:
        return [Gender.parse(s) for s in self.segments]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = doc.get("config", doc)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then ``--config`` file, then explicit flags."""
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from None
        try:
            cfg = ExperimentConfig.from_dict(doc)
        except TypeError as e:
            raise ConfigError(str(e)) from None
    for f in dataclasses.fields(ExperimentConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(cfg, f.name, value)
    cfg.validate()
    return cfg


def cmd_validate(args) -> int:
    data_dir = Path(args.data_dir or ExperimentConfig.data_dir)
    for name in ("u.data", "u.user"):
        if not (data_dir / name).is_file():
            print(f"{name} not found in {data_dir}", file=sys.stderr)
            return EXIT_DATA
    errors: list[DataError] = []
    with open(data_dir / "u.data", "rb") as f:
        triples = parse_ratings(f, errors=errors)
    user_errors: list[DataError] = []
    with open(data_dir / "u.user", "rb") as f:
        profiles = parse_users(f, errors=user_errors)

    for e in errors:
        print(f"u.data: {e}", file=sys.stderr)
    for e in user_errors:
        print(f"u.user: {e}", file=sys.stderr)
    duplicates = sum("duplicate" in str(e) for e in errors + user_errors)

    users = {t.user_id for t in triples}
    movies = {t.movie_id for t in triples}
    n_male = sum(p.gender is Gender.MALE for p in profiles.values())
    n_female = len(profiles) - n_male
    no_profile = sorted(users - set(profiles))
    no_ratings = sorted(set(profiles) - users)
    print(
        f"{len(triples)} ratings, {len(users | set(profiles))} users, {len(movies)} movies, "
        f"{n_male} M / {n_female} F"
    )
    print(f"duplicates: {duplicates}; malformed lines: {len(errors) + len(user_errors) - duplicates}")
    if no_ratings:
        print(f"{len(no_ratings)} profiled users have no ratings")
    if no_profile:
        print(f"{len(no_profile)} rated users have no profile, e.g. user {no_profile[0]}", file=sys.stderr)
    clean = not (errors or user_errors or no_profile)
    return EXIT_OK if clean else EXIT_DATA


def _evaluate_task(data_dir: str, measure: Measure, gender: Gender, cfg: dict):
    ds = load_dataset(data_dir)
    return evaluate(ds, measure, gender, **cfg)


def run_experiment(cfg: ExperimentConfig) -> list[Path]:
    """Evaluate every (segment, measure) pair and write reports; returns written paths."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / INCOMPLETE_MARKER
    marker.write_text("run did not finish\n")

    ds = load_dataset(cfg.data_dir)
    accounting = log_segment_accounting(ds)
    params = dict(k=cfg.k, n_values=tuple(cfg.n_values), threshold=cfg.threshold,
                  seed=cfg.seed, n_folds=cfg.folds)
    tasks = [(g, m) for g in cfg.genders for m in cfg.measure_ids]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [pool.submit(_evaluate_task, cfg.data_dir, m, g, params) for g, m in tasks]
            reports = [f.result() for f in futures]
    else:
        reports = []
        for g, m in tasks:
            _log.info("evaluating %s / %s", g.label, m.value)
            reports.append(evaluate(ds, m, g, **params))

    written = []
    summary = {"config": cfg.to_dict(), "segment_accounting": accounting, "segments": {}}
    male, female = split_by_gender(ds.matrix, ds.profiles)
    for g in cfg.genders:
        seg_reports = [r for r in reports if r.gender is g]
        cmp = compare(seg_reports)
        print(rpt.format_comparison(cmp, cfg.n_values[0]), file=sys.stderr)
        entry = rpt.comparison_dict(cmp)
        if Measure.TRSM in cfg.measure_ids:
            seg = male if g is Gender.MALE else female
            entry["reliability_rank_changes"] = neighbor_rank_changes(seg, cfg.k)
        summary["segments"][g.label] = entry
        if cfg.format in ("csv", "both"):
            written += [rpt.write_report_csv(r, out) for r in seg_reports]
    if cfg.format in ("csv", "both"):
        written.append(rpt.write_plot_data(reports, out))
    if cfg.format in ("json", "both"):
        written.append(rpt.write_json(summary, out / "summary.json"))
    manifest = {
        "config": cfg.to_dict(),
        "dataset_sha256": ds.checksum,
        "outputs": sorted(p.name for p in written),
    }
    written.append(rpt.write_json(manifest, out / "manifest.json"))
    marker.unlink()
    return written


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    try:
        written = run_experiment(cfg)
    except FileNotFoundError as e:
        print(str(e), file=sys.stderr)
        return EXIT_DATA
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    _log.info("wrote %d files to %s", len(written), cfg.output_dir)
    return EXIT_OK


def cmd_recommend(args) -> int:
    cfg = resolve_config(args)
    if args.n < 0:
        raise ConfigError("n must be non-negative")
    try:
        ds = load_dataset(cfg.data_dir)
    except (FileNotFoundError, DataError) as e:
        print(str(e), file=sys.stderr)
        return EXIT_DATA
    if args.user not in ds.profiles:
        print(f"unknown user {args.user}", file=sys.stderr)
        return EXIT_CONFIG

    segments = split_by_gender(ds.matrix, ds.profiles)
    seg = segment_of(args.user, ds.profiles, segments)
    matrix = seg.matrix
    if args.user not in matrix:
        # nothing to find neighbors with: rank by the segment's mean rating per movie
        print(f"user {args.user} has no ratings; falling back to {seg.gender.label} "
              "segment mean ratings", file=sys.stderr)
        sums: dict[int, list[float]] = {}
        for row in matrix.rows.values():
            for m, r in row.items():
                sums.setdefault(m, []).append(r)
        top = rank_top_n(args.user, {m: sum(v) / len(v) for m, v in sums.items()}, args.n)
        for m, v in top.items:
            print(f"{m}\t{v:.4f}\tfallback")
        return EXIT_OK

    measure = cfg.measure_ids[0]
    model = build_similarity_model(measure, seg)
    neighbors = select_neighbors(model, args.user, cfg.k)
    own = matrix.rows[args.user]
    candidates = sorted({m for v in neighbors.ids for m in matrix.rows[v]} - own.keys())
    top = recommend_top_n(matrix, neighbors, args.user, args.n, candidates)
    for m, v in top.items:
        print(f"{m}\t{v:.4f}")
    return EXIT_OK


def _add_experiment_flags(p: argparse.ArgumentParser, run: bool) -> None:
    p.add_argument("--data-dir", dest="data_dir")
    p.add_argument("--config", help="JSON config or manifest; flags override it")
    p.add_argument("--measures", type=_csv_list, help="comma-separated, e.g. trsm,pearson")
    p.add_argument("--k", type=int, help=f"neighbors per user (default {DEFAULT_K})")
    p.add_argument("--seed", type=int)
    if run:
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--segments", type=_csv_list, help="male,female")
        p.add_argument("--n", dest="n_values", type=_int_list, help="Top-N sizes, e.g. 5,10,15,20,30")
        p.add_argument("--threshold", type=float, help="like threshold on actual ratings")
        p.add_argument("--folds", type=int)
        p.add_argument("--format", choices=("csv", "json", "both"))
        p.add_argument("--jobs", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="trsmrec", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check u.data / u.user integrity")
    p.add_argument("--data-dir", dest="data_dir")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="cross-validated benchmark of similarity measures")
    _add_experiment_flags(p, run=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("recommend", help="Top-N list for one user, trained on all ratings")
    _add_experiment_flags(p, run=False)
    p.add_argument("--user", type=int, required=True)
    p.add_argument("--n", type=int, default=10)
    p.set_defaults(func=cmd_recommend)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001
        _log.exception("run failed: %s", e)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
