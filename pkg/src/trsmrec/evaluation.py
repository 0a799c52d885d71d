"""Five-fold cross-validation of the segmented k-NN recommender.

Each fold trains on 80% of a segment's ratings and scores the held-out 20%:
MAE over every test rating, and Top-N accuracy/precision/recall from ranking
each user's own test movies by predicted rating.  Per-user classification
metrics are macro-averaged within a fold, then averaged over folds.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .ingest import Gender, RatingDataset, RatingTriple, SparseRatingMatrix, build_matrix
from .predictor import DEFAULT_K, DEFAULT_N_VALUES, TopNList, neighbor_weights, predict_many, rank_top_n
from .segment import GenderSegment, split_by_gender
from .similarity import Measure, build_similarity_model

_log = logging.getLogger(__name__)

DEFAULT_SEED = 42
DEFAULT_FOLDS = 5
LIKE_THRESHOLD = 4
TOPN_METRICS = ("accuracy", "precision", "recall")

#: (train matrix, users, movies) -> (predicted values, fallback flags)
Predictor = Callable[[SparseRatingMatrix, np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train: tuple[RatingTriple, ...]
    test: tuple[RatingTriple, ...]


def make_folds(
    triples: Sequence[RatingTriple], n_folds: int = DEFAULT_FOLDS, seed: int = DEFAULT_SEED
) -> list[FoldSplit]:
    """Seeded shuffle of ``triples`` into ``n_folds`` near-equal test partitions."""
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    if len(triples) < n_folds:
        raise ValueError(f"cannot split {len(triples)} ratings into {n_folds} folds")
    perm = np.random.default_rng(seed).permutation(len(triples))
    assign = np.empty(len(triples), dtype=np.int64)
    for f, part in enumerate(np.array_split(perm, n_folds)):
        assign[part] = f
    folds = []
    for f in range(n_folds):
        test = tuple(t for t, a in zip(triples, assign) if a == f)
        train = tuple(t for t, a in zip(triples, assign) if a != f)
        folds.append(FoldSplit(f, train, test))
    return folds


def mae(predictions: Iterable[tuple[float, float]]) -> float:
    """Mean absolute error over ``(predicted, actual)`` pairs."""
    diffs = [abs(p - a) for p, a in predictions]
    if not diffs:
        raise ValueError("MAE of an empty prediction list")
    return math.fsum(diffs) / len(diffs)


@dataclass(frozen=True)
class ClassificationCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def precision(self) -> float | None:
        d = self.tp + self.fp
        return self.tp / d if d else None

    @property
    def recall(self) -> float | None:
        d = self.tp + self.fn
        return self.tp / d if d else None

    @property
    def accuracy(self) -> float | None:
        return (self.tp + self.tn) / self.total if self.total else None


def topn_counts(
    topn: TopNList, test_ratings: Mapping[int, float], threshold: float = LIKE_THRESHOLD
) -> ClassificationCounts:
    """Confusion counts over a user's test movies.

    A movie is relevant when its actual rating is at least ``threshold`` and
    recommended when it appears in ``topn``.
    """
    recommended = set(topn.movies)
    tp = fp = tn = fn = 0
    for movie, actual in test_ratings.items():
        liked = actual >= threshold
        if movie in recommended:
            tp += liked
            fp += not liked
        else:
            fn += liked
            tn += not liked
    return ClassificationCounts(tp, fp, tn, fn)


def _mean(xs) -> float:
    xs = [x for x in xs if x is not None]
    return math.fsum(xs) / len(xs) if xs else math.nan


@dataclass
class MetricsReport:
    """Per-fold and mean metrics for one (segment, measure) pair."""

    gender: Gender
    measure: Measure
    k: int
    n_values: tuple[int, ...]
    threshold: float
    seed: int
    n_folds: int
    fold_mae: list[float] = field(default_factory=list)
    fold_fallback: list[float] = field(default_factory=list)
    # metric -> N -> per-fold values
    fold_topn: dict[str, dict[int, list[float]]] = field(default_factory=dict)

    @property
    def mae(self) -> float:
        return _mean(self.fold_mae)

    @property
    def fallback_rate(self) -> float:
        return _mean(self.fold_fallback)

    def topn(self, metric: str, n: int) -> float:
        return _mean(self.fold_topn[metric][n])

    @property
    def params(self) -> tuple:
        return (self.gender, self.k, self.n_values, self.threshold, self.seed, self.n_folds)


def knn_predictor(measure: Measure, k: int = DEFAULT_K, gender: Gender | None = None) -> Predictor:
    """The default predictor: similarity model + top-k neighbors + mean-centered average."""

    def run(train: SparseRatingMatrix, users, movies):
        model = build_similarity_model(measure, GenderSegment(gender, train))
        return predict_many(train, neighbor_weights(model, k), users, movies)

    return run


def segment_triples(dataset: RatingDataset, gender: Gender) -> list[RatingTriple]:
    """Ratings of ``gender`` users, in dataset order."""
    male, female = split_by_gender(dataset.matrix, dataset.profiles)
    seg = male if gender is Gender.MALE else female
    keep = set(seg.users)
    return [t for t in dataset.triples if t.user_id in keep]


def log_segment_accounting(dataset: RatingDataset) -> dict[str, int]:
    """Log how many users fall into each segment and how many into neither."""
    counts = dataset.gender_counts()
    rated = {t.user_id for t in dataset.triples}
    routed = {u for u in rated if u in dataset.profiles}
    acct = {
        "users": dataset.n_users,
        "male": counts[Gender.MALE],
        "female": counts[Gender.FEMALE],
        "unsegmented": dataset.n_users - counts[Gender.MALE] - counts[Gender.FEMALE],
        "rated_unrouted": len(rated - routed),
    }
    _log.info(
        "segments: %(male)d male + %(female)d female of %(users)d users; "
        "%(unsegmented)d users in neither segment (excluded)", acct,
    )
    return acct


def evaluate(
    dataset: RatingDataset,
    measure: Measure,
    gender: Gender,
    k: int = DEFAULT_K,
    n_values: Sequence[int] = DEFAULT_N_VALUES,
    threshold: float = LIKE_THRESHOLD,
    seed: int = DEFAULT_SEED,
    n_folds: int = DEFAULT_FOLDS,
    predictor: Predictor | None = None,
) -> MetricsReport:
    triples = segment_triples(dataset, gender)
    if not triples:
        raise ValueError(f"{gender.label} segment has no ratings")
    predictor = predictor or knn_predictor(measure, k, gender)
    report = MetricsReport(
        gender, measure, k, tuple(n_values), threshold, seed, n_folds,
        fold_topn={m: {n: [] for n in n_values} for m in TOPN_METRICS},
    )
    for fold in make_folds(triples, n_folds, seed):
        train = build_matrix(fold.train)
        users = np.array([t.user_id for t in fold.test], dtype=np.int64)
        movies = np.array([t.movie_id for t in fold.test], dtype=np.int64)
        actual = np.array([t.rating for t in fold.test], dtype=float)
        preds, fallback = predictor(train, users, movies)

        report.fold_mae.append(mae(zip(preds.tolist(), actual.tolist())))
        report.fold_fallback.append(float(np.mean(fallback)))

        per_user: dict[int, dict[int, tuple[float, float]]] = {}
        for u, m, p, a in zip(users.tolist(), movies.tolist(), preds.tolist(), actual.tolist()):
            per_user.setdefault(u, {})[m] = (p, a)
        for n in n_values:
            by_metric = {m: [] for m in TOPN_METRICS}
            for u in sorted(per_user):
                items = per_user[u]
                top = rank_top_n(u, {m: pa[0] for m, pa in items.items()}, n)
                c = topn_counts(top, {m: pa[1] for m, pa in items.items()}, threshold)
                for metric in TOPN_METRICS:
                    by_metric[metric].append(getattr(c, metric))
            for metric in TOPN_METRICS:
                report.fold_topn[metric][n].append(_mean(by_metric[metric]))
        _log.debug(
            "%s/%s fold %d: mae %.4f, fallback %.3f",
            gender.label, measure.value, fold.fold_index, report.fold_mae[-1], report.fold_fallback[-1],
        )
    return report


@dataclass(frozen=True)
class Comparison:
    """Measures x metrics grid for one segment plus TRSM's relative MAE gains."""

    gender: Gender
    rows: dict[str, dict[str, float]]
    # baseline -> (baseline MAE - TRSM MAE) / baseline MAE
    mae_improvement: dict[str, float]


def metric_columns(n_values: Sequence[int]) -> list[str]:
    return ["mae", "fallback_rate"] + [f"{m}@{n}" for n in n_values for m in TOPN_METRICS]


def report_row(report: MetricsReport) -> dict[str, float]:
    row = {"mae": report.mae, "fallback_rate": report.fallback_rate}
    for n in report.n_values:
        for m in TOPN_METRICS:
            row[f"{m}@{n}"] = report.topn(m, n)
    return row


def relative_improvement(baseline_mae: float, trsm_mae: float) -> float:
    return (baseline_mae - trsm_mae) / baseline_mae


def compare(reports: Sequence[MetricsReport]) -> Comparison:
    if not reports:
        raise ValueError("nothing to compare")
    params = reports[0].params
    for r in reports[1:]:
        if r.params != params:
            raise ValueError(
                f"cannot compare {r.measure.value} report: parameters differ from "
                f"{reports[0].measure.value}"
            )
    rows = {r.measure.value: report_row(r) for r in reports}
    gains = {}
    trsm = rows.get(Measure.TRSM.value)
    if trsm is not None:
        for name, row in rows.items():
            if name != Measure.TRSM.value:
                gains[name] = relative_improvement(row["mae"], trsm["mae"])
    return Comparison(reports[0].gender, rows, gains)


def neighbor_rank_changes(
    segment: GenderSegment, k: int = DEFAULT_K, a: Measure = Measure.TRSM, b: Measure = Measure.TANIMOTO
) -> int:
    """Number of users whose ordered top-``k`` neighbor list differs between two measures."""
    wa = neighbor_weights(build_similarity_model(a, segment), k)
    wb = neighbor_weights(build_similarity_model(b, segment), k)
    changed = 0
    for i in range(wa.shape[0]):
        ra = np.flatnonzero(wa[i])
        rb = np.flatnonzero(wb[i])
        oa = ra[np.lexsort((ra, -wa[i, ra]))]
        ob = rb[np.lexsort((rb, -wb[i, rb]))]
        changed += not np.array_equal(oa, ob)
    return changed
