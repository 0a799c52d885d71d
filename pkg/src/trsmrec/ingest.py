"""MovieLens 100K ingestion: ``u.data`` / ``u.user`` parsing and the sparse rating matrix."""

from __future__ import annotations

import enum
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from types import MappingProxyType
from typing import BinaryIO, Iterable, Iterator, Mapping

import numpy as np

_log = logging.getLogger(__name__)

RATING_MIN = 1
RATING_MAX = 5


class Gender(str, enum.Enum):
    MALE = "M"
    FEMALE = "F"

    @property
    def label(self) -> str:
        return "male" if self is Gender.MALE else "female"

    @classmethod
    def parse(cls, token: str) -> "Gender":
        token = token.strip().lower()
        for g in cls:
            if token in (g.value.lower(), g.label):
                return g
        raise ValueError(f"unknown gender {token!r}")


class DataError(ValueError):
    """Malformed or inconsistent input data.  ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class RatingTriple:
    user_id: int
    movie_id: int
    rating: int
    timestamp: int = 0


@dataclass(frozen=True)
class UserProfile:
    user_id: int
    gender: Gender


def _lines(source) -> Iterator[tuple[int, str]]:
    """Yield ``(lineno, text)`` for nonempty lines of a byte stream, bytes or str."""
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    elif isinstance(source, str):
        source = io.BytesIO(source.encode("utf-8"))
    for lineno, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        text = raw.rstrip("\r\n")
        if text.strip():
            yield lineno, text


def _int_field(value: str, name: str, lineno: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise DataError(f"non-integer {name} field {value!r}", lineno) from None


def parse_ratings(source: BinaryIO | bytes | str, errors: list | None = None) -> list[RatingTriple]:
    """Parse a MovieLens ``u.data`` stream (user, movie, rating, timestamp; TAB separated).

    Raises :class:`DataError` on the first bad line.  If an ``errors`` list is
    given, bad lines are appended to it and skipped instead.
    """
    triples = []
    seen: set[tuple[int, int]] = set()
    for lineno, text in _lines(source):
        try:
            fields = text.split("\t")
            if len(fields) != 4:
                raise DataError(f"expected 4 tab-separated fields, got {len(fields)}", lineno)
            user, movie, rating, ts = (
                _int_field(v, n, lineno)
                for v, n in zip(fields, ("user_id", "movie_id", "rating", "timestamp"))
            )
            if user <= 0 or movie <= 0:
                raise DataError("ids must be positive", lineno)
            if not RATING_MIN <= rating <= RATING_MAX:
                raise DataError(f"rating {rating} out of range [{RATING_MIN}, {RATING_MAX}]", lineno)
            if (user, movie) in seen:
                raise DataError(f"duplicate rating for user {user}, movie {movie}", lineno)
        except DataError as e:
            if errors is None:
                raise
            errors.append(e)
            continue
        seen.add((user, movie))
        triples.append(RatingTriple(user, movie, rating, ts))
    return triples


def parse_users(source: BinaryIO | bytes | str, errors: list | None = None) -> dict[int, UserProfile]:
    """Parse a MovieLens ``u.user`` stream (``id|age|gender|occupation|zip``).

    Only the gender survives; the other fields are checked for shape and dropped.
    """
    profiles: dict[int, UserProfile] = {}
    for lineno, text in _lines(source):
        try:
            fields = text.split("|")
            if len(fields) != 5:
                raise DataError(f"expected 5 pipe-separated fields, got {len(fields)}", lineno)
            user = _int_field(fields[0], "user_id", lineno)
            _int_field(fields[1], "age", lineno)
            if user <= 0:
                raise DataError("user id must be positive", lineno)
            if fields[2] not in ("M", "F"):
                raise DataError(f"unknown gender token {fields[2]!r}", lineno)
            if user in profiles:
                raise DataError(f"duplicate user id {user}", lineno)
        except DataError as e:
            if errors is None:
                raise
            errors.append(e)
            continue
        profiles[user] = UserProfile(user, Gender(fields[2]))
    return profiles


def format_ratings(triples: Iterable[RatingTriple]) -> str:
    """Serialize triples back to ``u.data`` text."""
    return "".join(f"{t.user_id}\t{t.movie_id}\t{t.rating}\t{t.timestamp}\n" for t in triples)


class SparseRatingMatrix:
    """User rows of ``movie -> rating`` with cached row means and sizes.

    Immutable after construction.  :attr:`dense` gives the equivalent
    ``(users x movies)`` arrays used by the vectorized kernels; users and
    movies are indexed in ascending id order.
    """

    def __init__(self, rows: Mapping[int, Mapping[int, float]]):
        self._rows = MappingProxyType(
            {u: MappingProxyType(dict(r)) for u, r in sorted(rows.items())}
        )
        self.row_size = MappingProxyType({u: len(r) for u, r in self._rows.items()})
        self.row_mean = MappingProxyType(
            {u: math.fsum(r.values()) / len(r) for u, r in self._rows.items() if r}
        )

    @property
    def rows(self) -> Mapping[int, Mapping[int, float]]:
        return self._rows

    @property
    def users(self) -> list[int]:
        return list(self._rows)

    def __len__(self) -> int:
        return len(self._rows)

    def __contains__(self, user_id) -> bool:
        return user_id in self._rows

    @cached_property
    def n_ratings(self) -> int:
        return sum(self.row_size.values())

    @cached_property
    def global_mean(self) -> float | None:
        """Mean of every rating in the matrix; ``None`` when empty."""
        vals = [v for r in self._rows.values() for v in r.values()]
        return math.fsum(vals) / len(vals) if vals else None

    def restrict(self, user_ids: Iterable[int]) -> "SparseRatingMatrix":
        keep = set(user_ids)
        return SparseRatingMatrix({u: r for u, r in self._rows.items() if u in keep})

    @cached_property
    def dense(self) -> "DenseView":
        users = np.array(self.users, dtype=np.int64)
        movies = np.array(sorted({m for r in self._rows.values() for m in r}), dtype=np.int64)
        col = {m: j for j, m in enumerate(movies.tolist())}
        values = np.zeros((len(users), len(movies)))
        mask = np.zeros((len(users), len(movies)), dtype=bool)
        for i, r in enumerate(self._rows.values()):
            for m, v in r.items():
                values[i, col[m]] = v
                mask[i, col[m]] = True
        means = np.array([self.row_mean.get(u, 0.0) for u in self.users])
        for a in (values, mask, means):
            a.flags.writeable = False
        return DenseView(users, movies, values, mask, means)

    def __repr__(self) -> str:
        return f"SparseRatingMatrix({len(self)} users, {self.n_ratings} ratings)"


@dataclass(frozen=True)
class DenseView:
    users: np.ndarray
    movies: np.ndarray
    values: np.ndarray
    mask: np.ndarray
    means: np.ndarray

    def user_index(self) -> dict[int, int]:
        return {u: i for i, u in enumerate(self.users.tolist())}

    def movie_index(self) -> dict[int, int]:
        return {m: j for j, m in enumerate(self.movies.tolist())}


def build_matrix(triples: Iterable[RatingTriple]) -> SparseRatingMatrix:
    rows: dict[int, dict[int, float]] = {}
    for t in triples:
        rows.setdefault(t.user_id, {})[t.movie_id] = t.rating
    return SparseRatingMatrix(rows)


@dataclass(frozen=True)
class RatingDataset:
    """Validated ratings plus gender profiles.

    Users listed in the profile table without any rating are allowed; rated
    users without a profile are not.
    """

    triples: tuple[RatingTriple, ...]
    profiles: Mapping[int, UserProfile]
    checksum: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "triples", tuple(self.triples))
        object.__setattr__(self, "profiles", MappingProxyType(dict(self.profiles)))
        seen = set()
        for t in self.triples:
            key = (t.user_id, t.movie_id)
            if key in seen:
                raise DataError(f"duplicate rating for user {t.user_id}, movie {t.movie_id}")
            seen.add(key)
        missing = sorted({t.user_id for t in self.triples} - set(self.profiles))
        if missing:
            raise DataError(f"{len(missing)} rated users have no profile, e.g. user {missing[0]}")

    @cached_property
    def n_users(self) -> int:
        return len({t.user_id for t in self.triples} | set(self.profiles))

    @cached_property
    def n_movies(self) -> int:
        return len({t.movie_id for t in self.triples})

    @cached_property
    def matrix(self) -> SparseRatingMatrix:
        return build_matrix(self.triples)

    def gender_counts(self) -> dict[Gender, int]:
        counts = {g: 0 for g in Gender}
        for p in self.profiles.values():
            counts[p.gender] += 1
        return counts

    def to_json(self) -> str:
        """Canonical JSON snapshot: ``{"counts", "profiles", "triples"}``."""
        doc = {
            "counts": {
                "n_ratings": len(self.triples),
                "n_users": self.n_users,
                "n_movies": self.n_movies,
            },
            "profiles": [[p.user_id, p.gender.value] for p in sorted(
                self.profiles.values(), key=lambda p: p.user_id)],
            "triples": [[t.user_id, t.movie_id, t.rating, t.timestamp] for t in self.triples],
        }
        return json.dumps(doc, separators=(",", ":"), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RatingDataset":
        doc = json.loads(text)
        ds = cls(
            tuple(RatingTriple(*row) for row in doc["triples"]),
            {u: UserProfile(u, Gender(g)) for u, g in doc["profiles"]},
        )
        counts = doc.get("counts", {})
        if counts and counts != {"n_ratings": len(ds.triples), "n_users": ds.n_users,
                                 "n_movies": ds.n_movies}:
            raise DataError("snapshot counts do not match its contents")
        return ds


def dataset_checksum(data_dir: Path | str) -> str:
    """SHA-256 over ``u.data`` followed by ``u.user``."""
    h = hashlib.sha256()
    for name in ("u.data", "u.user"):
        h.update((Path(data_dir) / name).read_bytes())
    return h.hexdigest()


def load_dataset(data_dir: Path | str) -> RatingDataset:
    data_dir = Path(data_dir)
    for name in ("u.data", "u.user"):
        if not (data_dir / name).is_file():
            raise FileNotFoundError(f"{name} not found in {data_dir}")
    with open(data_dir / "u.data", "rb") as f:
        triples = parse_ratings(f)
    with open(data_dir / "u.user", "rb") as f:
        profiles = parse_users(f)
    ds = RatingDataset(tuple(triples), profiles, checksum=dataset_checksum(data_dir))
    counts = ds.gender_counts()
    _log.info(
        "loaded %d ratings, %d users, %d movies (%d male, %d female profiles)",
        len(ds.triples), ds.n_users, ds.n_movies, counts[Gender.MALE], counts[Gender.FEMALE],
    )
    return ds
