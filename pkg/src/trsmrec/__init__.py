"""Gender-segmented user-based collaborative filtering with the TRSM similarity."""

from .ingest import (
    DataError, Gender, RatingDataset, RatingTriple, SparseRatingMatrix, UserProfile,
    build_matrix, load_dataset, parse_ratings, parse_users,
)
from .segment import GenderSegment, segment_of, split_by_gender
from .similarity import Measure, SimilarityModel, build_similarity_model, reliability, tanimoto, trsm
from .predictor import NeighborList, PredictionResult, TopNList, predict, recommend_top_n, select_neighbors
from .evaluation import MetricsReport, compare, evaluate, make_folds, mae, topn_counts

__version__ = "0.1.0"

__all__ = [
    "DataError", "Gender", "RatingDataset", "RatingTriple", "SparseRatingMatrix", "UserProfile",
    "build_matrix", "load_dataset", "parse_ratings", "parse_users",
    "GenderSegment", "segment_of", "split_by_gender",
    "Measure", "SimilarityModel", "build_similarity_model", "reliability", "tanimoto", "trsm",
    "NeighborList", "PredictionResult", "TopNList", "predict", "recommend_top_n", "select_neighbors",
    "MetricsReport", "compare", "evaluate", "make_folds", "mae", "topn_counts",
]
