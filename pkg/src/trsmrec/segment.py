"""Gender segmentation of the rating matrix.

Neighbor search only ever happens inside one segment, so the rest of the
pipeline works on a :class:`GenderSegment` rather than the global matrix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Hashable, Mapping

from .ingest import Gender, SparseRatingMatrix, UserProfile

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenderSegment:
    gender: Gender
    matrix: SparseRatingMatrix

    @property
    def users(self) -> list[int]:
        return self.matrix.users

    def __len__(self):
        return len(self.matrix)


def partition_rows(matrix: SparseRatingMatrix, labels: Mapping[int, Hashable]) -> dict:
    """Split ``matrix`` rows by an arbitrary ``user -> label`` map.

    Every row must be labelled; a missing label raises ``KeyError`` naming the user.
    """
    groups: dict = {}
    for u in matrix.users:
        try:
            label = labels[u]
        except KeyError:
            raise KeyError(f"user {u} has no segment label") from None
        groups.setdefault(label, []).append(u)
    return {label: matrix.restrict(users) for label, users in groups.items()}


def split_by_gender(
    matrix: SparseRatingMatrix, profiles: Mapping[int, UserProfile]
) -> tuple[GenderSegment, GenderSegment]:
    """Return ``(male, female)`` segments whose rows partition ``matrix``."""
    labels = {u: p.gender for u, p in profiles.items()}
    try:
        parts = partition_rows(matrix, labels)
    except KeyError as e:
        raise KeyError(f"cannot segment: {e.args[0]}") from None
    male = GenderSegment(Gender.MALE, parts.get(Gender.MALE, SparseRatingMatrix({})))
    female = GenderSegment(Gender.FEMALE, parts.get(Gender.FEMALE, SparseRatingMatrix({})))
    _log.debug("segmented %d rows: %d male, %d female", len(matrix), len(male), len(female))
    return male, female


def segment_of(
    user_id: int,
    profiles: Mapping[int, UserProfile],
    segments: tuple[GenderSegment, ...],
) -> GenderSegment:
    """The segment matching ``user_id``'s gender."""
    if user_id not in profiles:
        raise KeyError(f"unknown user {user_id}")
    gender = profiles[user_id].gender
    for seg in segments:
        if seg.gender is gender:
            return seg
    raise KeyError(f"no {gender.label} segment supplied")
