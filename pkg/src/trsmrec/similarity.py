"""User-user similarity: TRSM and the baseline measures.

Two routes compute the same numbers.  The pair functions (:func:`tanimoto`,
:func:`trsm`, :func:`pearson`, ...) work on one pair of sparse rows and are
the readable reference.  :func:`similarity_matrix` computes every pair of a
segment at once from co-occurrence products and is what the evaluation uses.

Any score whose denominator vanishes is 0.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .ingest import Gender
from .segment import GenderSegment

#: scale midpoint used by the constrained Pearson correlation
CPC_MIDPOINT = 3.0
RELIABILITY_SCALE = 4.0
SPCC_SCALE = 2.0


class Measure(str, enum.Enum):
    TRSM = "trsm"
    TANIMOTO = "tanimoto"
    PEARSON = "pearson"
    COSINE = "cosine"
    JACCARD = "jaccard"
    SPCC = "spcc"
    CPC = "cpc"

    @property
    def signed(self) -> bool:
        return self in (Measure.PEARSON, Measure.SPCC, Measure.CPC)

    @property
    def value_range(self) -> tuple[float, float]:
        return (-1.0, 1.0) if self.signed else (0.0, 1.0)

    @classmethod
    def parse(cls, name: str) -> "Measure":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown measure {name!r}") from None


#: measures benchmarked by default, TRSM first
BENCHMARK_MEASURES = (
    Measure.TRSM, Measure.PEARSON, Measure.COSINE, Measure.JACCARD, Measure.SPCC, Measure.CPC,
)
BASELINES = frozenset(BENCHMARK_MEASURES[1:])


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def tanimoto(items_u, items_v) -> float:
    items_u, items_v = set(items_u), set(items_v)
    common = len(items_u & items_v)
    denom = len(items_u) + len(items_v) - common
    return common / denom if denom else 0.0


def reliability(overlap: int) -> float:
    """Sigmoid confidence weight on the co-rated count; 0.5 at zero overlap."""
    if overlap < 0:
        raise ValueError("overlap count must be non-negative")
    return 1.0 / (1.0 + math.exp(-overlap / RELIABILITY_SCALE))


def trsm(ratings_u: Mapping, ratings_v: Mapping) -> float:
    """Tanimoto over rated-item sets, damped by :func:`reliability`.

    Only the keys of the rows matter; rating values are ignored.
    """
    common = len(ratings_u.keys() & ratings_v.keys())
    return tanimoto(ratings_u.keys(), ratings_v.keys()) * reliability(common)


def jaccard(ratings_u: Mapping, ratings_v: Mapping) -> float:
    union = len(ratings_u.keys() | ratings_v.keys())
    return len(ratings_u.keys() & ratings_v.keys()) / union if union else 0.0


def _co_rated(ratings_u, ratings_v):
    common = sorted(ratings_u.keys() & ratings_v.keys())
    x = np.array([ratings_u[i] for i in common], dtype=float)
    y = np.array([ratings_v[i] for i in common], dtype=float)
    return x, y


def _normalized_dot(x, y) -> float:
    denom = math.sqrt(float(np.dot(x, x)) * float(np.dot(y, y)))
    if denom == 0:
        return 0.0
    return min(1.0, max(-1.0, float(np.dot(x, y)) / denom))


def pearson(ratings_u: Mapping, ratings_v: Mapping) -> float:
    """Correlation over co-rated items, centered on the co-rated means."""
    x, y = _co_rated(ratings_u, ratings_v)
    if len(x) < 2:
        return 0.0
    return _normalized_dot(x - x.mean(), y - y.mean())


def cosine(ratings_u: Mapping, ratings_v: Mapping) -> float:
    x, y = _co_rated(ratings_u, ratings_v)
    return _normalized_dot(x, y)


def cpc(ratings_u: Mapping, ratings_v: Mapping) -> float:
    x, y = _co_rated(ratings_u, ratings_v)
    return _normalized_dot(x - CPC_MIDPOINT, y - CPC_MIDPOINT)


def spcc(ratings_u: Mapping, ratings_v: Mapping) -> float:
    common = len(ratings_u.keys() & ratings_v.keys())
    return pearson(ratings_u, ratings_v) * float(_sigmoid(common / SPCC_SCALE))


_BASELINE_FUNCS = {
    Measure.PEARSON: pearson,
    Measure.COSINE: cosine,
    Measure.JACCARD: jaccard,
    Measure.SPCC: spcc,
    Measure.CPC: cpc,
}


def baseline(measure: Measure | str, ratings_u: Mapping, ratings_v: Mapping) -> float:
    measure = Measure.parse(measure) if isinstance(measure, str) else measure
    if measure not in _BASELINE_FUNCS:
        raise ValueError(f"{measure.value} is not a baseline measure")
    return _BASELINE_FUNCS[measure](ratings_u, ratings_v)


def pair_score(measure: Measure, ratings_u: Mapping, ratings_v: Mapping) -> float:
    """Score one pair of sparse rows under any measure."""
    if measure is Measure.TRSM:
        return trsm(ratings_u, ratings_v)
    if measure is Measure.TANIMOTO:
        return tanimoto(ratings_u.keys(), ratings_v.keys())
    return baseline(measure, ratings_u, ratings_v)


def _safe_ratio(num, denom):
    out = np.zeros_like(num, dtype=float)
    np.divide(num, denom, out=out, where=denom > 0)
    return out


def _normalized_products(c: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cosine of the co-rated parts of every row pair of ``c`` (zeros off-mask)."""
    sq = c * c
    dot = c @ c.T
    # squared norm of u restricted to the items v rated, and vice versa
    norm_u = sq @ b.T
    return _safe_ratio(dot, np.sqrt(norm_u * norm_u.T))


def similarity_matrix(measure: Measure, values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """All-pairs scores for a ``users x movies`` rating array.

    ``values`` holds ratings where ``mask`` is true (anything elsewhere is
    ignored).  Returns a symmetric ``users x users`` array with a zero diagonal.
    """
    b = mask.astype(float)
    v = np.where(mask, values, 0.0)
    overlap = b @ b.T
    sizes = b.sum(axis=1)

    if measure in (Measure.TRSM, Measure.TANIMOTO, Measure.JACCARD):
        s = _safe_ratio(overlap, sizes[:, None] + sizes[None, :] - overlap)
        if measure is Measure.TRSM:
            s = s * _sigmoid(overlap / RELIABILITY_SCALE)
    elif measure is Measure.COSINE:
        s = _normalized_products(v, b)
    elif measure is Measure.CPC:
        s = _normalized_products(np.where(mask, values - CPC_MIDPOINT, 0.0), b)
    elif measure in (Measure.PEARSON, Measure.SPCC):
        # n*sum(xy) - sum(x)sum(y) over co-rated items; exact for integer ratings
        sum_u = v @ b.T
        sum_uu = (v * v) @ b.T
        cov = overlap * (v @ v.T) - sum_u * sum_u.T
        var_u = overlap * sum_uu - sum_u * sum_u
        s = _safe_ratio(cov, np.sqrt(np.clip(var_u * var_u.T, 0.0, None)))
        s[overlap < 2] = 0.0
        if measure is Measure.SPCC:
            s = s * _sigmoid(overlap / SPCC_SCALE)
    else:
        raise ValueError(f"unknown measure {measure!r}")

    lo, hi = measure.value_range
    s = np.clip(np.triu(s, 1), lo, hi)
    return s + s.T


@dataclass(frozen=True)
class SimilarityModel:
    """Symmetric score table for one segment under one measure."""

    measure: Measure
    gender: Gender | None
    user_ids: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        self.scores.flags.writeable = False

    @property
    def value_range(self) -> tuple[float, float]:
        return self.measure.value_range

    def index(self, user_id: int) -> int:
        i = int(np.searchsorted(self.user_ids, user_id))
        if i >= len(self.user_ids) or self.user_ids[i] != user_id:
            raise KeyError(f"user {user_id} is not in this model's segment")
        return i

    def __contains__(self, user_id) -> bool:
        try:
            self.index(user_id)
        except KeyError:
            return False
        return True

    def score(self, u: int, v: int) -> float:
        if u == v:
            raise ValueError("self-similarity is not defined")
        return float(self.scores[self.index(u), self.index(v)])

    def pairs(self) -> Iterator[tuple[int, int, float]]:
        """Nonzero ``(user_a, user_b, score)`` with ``user_a < user_b``, sorted."""
        ia, ib = np.nonzero(np.triu(self.scores, 1))
        for a, b in zip(ia.tolist(), ib.tolist()):
            yield int(self.user_ids[a]), int(self.user_ids[b]), float(self.scores[a, b])

    def write_csv(self, path: Path | str) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["user_a", "user_b", "score"])
            for a, b, s in self.pairs():
                w.writerow([a, b, f"{s:.6f}"])


def build_similarity_model(measure: Measure | str, segment: GenderSegment) -> SimilarityModel:
    measure = Measure.parse(measure) if isinstance(measure, str) else measure
    dense = segment.matrix.dense
    scores = similarity_matrix(measure, dense.values, dense.mask)
    return SimilarityModel(measure, segment.gender, dense.users, scores)
