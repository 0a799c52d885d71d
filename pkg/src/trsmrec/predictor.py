"""K-nearest-neighbor selection, mean-centered rating prediction and Top-N lists."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .ingest import RATING_MAX, RATING_MIN, SparseRatingMatrix
from .similarity import SimilarityModel

DEFAULT_K = 200
DEFAULT_N_VALUES = (5, 10, 15, 20, 30)
#: last-resort prediction when a segment has no ratings at all
SCALE_MIDPOINT = 3.0


@dataclass(frozen=True)
class NeighborList:
    user_id: int
    neighbors: tuple[tuple[int, float], ...]

    def __len__(self):
        return len(self.neighbors)

    @property
    def ids(self) -> list[int]:
        return [v for v, _ in self.neighbors]


@dataclass(frozen=True)
class PredictionResult:
    user_id: int
    movie_id: int
    value: float
    is_fallback: bool
    raw: float


@dataclass(frozen=True)
class TopNList:
    user_id: int
    n: int
    items: tuple[tuple[int, float], ...]

    @property
    def movies(self) -> list[int]:
        return [m for m, _ in self.items]


def _top_k(scores: np.ndarray, ids: np.ndarray, self_idx: int, k: int) -> np.ndarray:
    """Row indices of the ``k`` best strictly positive scores, ties to the lower id."""
    cand = np.flatnonzero(scores > 0)
    cand = cand[cand != self_idx]
    order = np.lexsort((ids[cand], -scores[cand]))
    return cand[order[:k]]


def select_neighbors(model: SimilarityModel, user_id: int, k: int = DEFAULT_K) -> NeighborList:
    if k < 0:
        raise ValueError("k must be non-negative")
    i = model.index(user_id)
    row = model.scores[i]
    picked = _top_k(row, model.user_ids, i, k)
    return NeighborList(
        user_id, tuple((int(model.user_ids[j]), float(row[j])) for j in picked)
    )


def neighbor_weights(model: SimilarityModel, k: int = DEFAULT_K) -> np.ndarray:
    """Dense ``users x users`` matrix holding each row's selected neighbor scores."""
    w = np.zeros_like(model.scores)
    for i in range(len(model.user_ids)):
        picked = _top_k(model.scores[i], model.user_ids, i, k)
        w[i, picked] = model.scores[i, picked]
    return w


def _clamp(x: float) -> float:
    return min(float(RATING_MAX), max(float(RATING_MIN), x))


def _segment_fallback(matrix: SparseRatingMatrix) -> float:
    gm = matrix.global_mean
    return SCALE_MIDPOINT if gm is None else gm


def predict(
    matrix: SparseRatingMatrix, neighbors: NeighborList, user_id: int, movie_id: int
) -> PredictionResult:
    """Mean-centered weighted average over the neighbors that rated ``movie_id``.

    Falls back to the user's mean when no neighbor rated the movie, and to the
    segment mean (or the scale midpoint) when the user has no ratings.
    """
    own = matrix.rows.get(user_id, {})
    if movie_id in own:
        raise ValueError(f"user {user_id} already rated movie {movie_id}")
    if not own:
        v = _segment_fallback(matrix)
        return PredictionResult(user_id, movie_id, _clamp(v), True, v)

    mu = matrix.row_mean[user_id]
    num = 0.0
    den = 0.0
    for v, s in neighbors.neighbors:
        r = matrix.rows.get(v, {}).get(movie_id)
        if r is None:
            continue
        num += (r - matrix.row_mean[v]) * s
        den += abs(s)
    if den == 0:
        return PredictionResult(user_id, movie_id, _clamp(mu), True, mu)
    raw = mu + num / den
    return PredictionResult(user_id, movie_id, _clamp(raw), False, raw)


def predict_many(
    matrix: SparseRatingMatrix,
    weights: np.ndarray,
    users: Iterable[int],
    movies: Iterable[int],
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`predict` for parallel arrays of ``(user, movie)`` queries.

    ``weights`` comes from :func:`neighbor_weights` on a model built over the
    same matrix.  Returns ``(clamped values, fallback flags)``.
    """
    users = np.asarray(list(users), dtype=np.int64)
    movies = np.asarray(list(movies), dtype=np.int64)
    dense = matrix.dense
    uidx = dense.user_index()
    midx = dense.movie_index()
    ui = np.array([uidx.get(u, -1) for u in users.tolist()], dtype=np.int64)
    mj = np.array([midx.get(m, -1) for m in movies.tolist()], dtype=np.int64)

    known = ui >= 0
    if (known & (mj >= 0) & dense.mask[np.maximum(ui, 0), np.maximum(mj, 0)]).any():
        raise ValueError("query includes a movie the user already rated")

    out = np.full(len(users), _segment_fallback(matrix))
    fallback = np.ones(len(users), dtype=bool)
    out[known] = dense.means[ui[known]]

    rated = known & (mj >= 0)
    if rated.any():
        b = dense.mask.astype(float)
        dev = np.where(dense.mask, dense.values - dense.means[:, None], 0.0)
        num = weights @ dev
        den = np.abs(weights) @ b
        n_q = num[ui[rated], mj[rated]]
        d_q = den[ui[rated], mj[rated]]
        ok = d_q > 0
        sel = np.flatnonzero(rated)[ok]
        out[sel] = dense.means[ui[sel]] + n_q[ok] / d_q[ok]
        fallback[sel] = False

    return np.clip(out, RATING_MIN, RATING_MAX), fallback


def rank_top_n(user_id: int, predictions: Mapping[int, float], n: int) -> TopNList:
    """Best ``n`` movies by predicted value, ties to the lower movie id."""
    if n < 0:
        raise ValueError("n must be non-negative")
    ranked = sorted(predictions.items(), key=lambda kv: (-kv[1], kv[0]))
    return TopNList(user_id, n, tuple((int(m), float(v)) for m, v in ranked[:n]))


def recommend_top_n(
    matrix: SparseRatingMatrix,
    neighbors: NeighborList,
    user_id: int,
    n: int,
    candidate_movies: Iterable[int],
) -> TopNList:
    preds = {m: predict(matrix, neighbors, user_id, m).value for m in candidate_movies}
    return rank_top_n(user_id, preds, n)


def write_predictions_csv(results: Iterable[PredictionResult], path: Path | str) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["user_id", "movie_id", "predicted", "is_fallback"])
        for r in results:
            w.writerow([r.user_id, r.movie_id, f"{r.value:.4f}", int(r.is_fallback)])
