import os
from pathlib import Path

import pytest
from hypothesis import strategies as st

from trsmrec.ingest import Gender, RatingDataset, RatingTriple, UserProfile, build_matrix, load_dataset

ROOT = Path(__file__).resolve().parents[1]
ML100K_DIR = Path(os.environ.get("ML100K_DIR", ROOT / "data" / "ml-100k"))

# 5 users x 4 movies worked example; unrated cells omitted
EXAMPLE = {
    1: {1: 4, 2: 2, 3: 3},
    2: {2: 5, 3: 5, 4: 2},
    3: {1: 2, 4: 4},
    4: {1: 4, 2: 5, 3: 4},
    5: {1: 3, 3: 1},
}


def rows_to_triples(rows):
    return [RatingTriple(u, m, r, 0) for u, row in rows.items() for m, r in row.items()]


@pytest.fixture
def example_rows():
    return {u: dict(r) for u, r in EXAMPLE.items()}


@pytest.fixture
def example_matrix():
    return build_matrix(rows_to_triples(EXAMPLE))


@pytest.fixture
def example_dataset():
    genders = {1: "M", 2: "M", 3: "F", 4: "M", 5: "F"}
    return RatingDataset(
        tuple(rows_to_triples(EXAMPLE)),
        {u: UserProfile(u, Gender(g)) for u, g in genders.items()},
    )


@pytest.fixture(scope="session")
def ml100k():
    if not (ML100K_DIR / "u.data").is_file():
        pytest.skip(f"MovieLens 100K not found in {ML100K_DIR} (see README)")
    return load_dataset(ML100K_DIR)


@st.composite
def rating_rows(draw, max_users=6, max_movies=6, min_density=0.3, max_density=0.9, min_users=1):
    """Small random ``{user: {movie: rating}}`` matrices; every user rates at least one movie."""
    n_users = draw(st.integers(min_users, max_users))
    n_movies = draw(st.integers(1, max_movies))
    density = draw(st.floats(min_density, max_density))
    rows = {}
    for u in range(1, n_users + 1):
        flags = draw(st.lists(st.floats(0, 1), min_size=n_movies, max_size=n_movies))
        picked = [m for m, f in enumerate(flags, start=1) if f < density] or [draw(st.integers(1, n_movies))]
        rows[u] = {m: draw(st.integers(1, 5)) for m in picked}
    return rows


# -- acceptance summary: one PASS/FAIL line per criterion ------------------------

_criteria: dict[int, list[tuple[str, str]]] = {}
_requires: dict[int, set[int]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    n = getattr(report, "criterion", None)
    if n is None or (report.when != "call" and not (report.failed or report.skipped)):
        return
    _criteria.setdefault(n, []).append((report.nodeid.split("::")[-1], report.outcome))


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        rep.criterion = marker.args[0]
        _requires.setdefault(marker.args[0], set()).update(marker.kwargs.get("requires", ()))
    return rep


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    statuses = {}
    for n in sorted(_criteria):
        results = _criteria[n]
        if any(o == "failed" for _, o in results):
            status = "FAIL"
        elif all(o == "skipped" for _, o in results):
            status = "SKIP"
        else:
            status = "PASS"
        bad = [name for name, o in results if o != "passed"]
        # a criterion can also demand that other criteria hold
        unmet = sorted(r for r in _requires.get(n, ()) if statuses.get(r) != "PASS")
        if unmet and status == "PASS":
            status = "FAIL"
        bad += [f"criterion {r} not met" for r in unmet]
        statuses[n] = status
        detail = f"  ({', '.join(bad)})" if bad else ""
        tr.write_line(f"criterion {n}: {status}  [{len(results)} checks]{detail}")
