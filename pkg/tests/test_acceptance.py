"""Acceptance checks.  Each test carries a ``criterion(n)`` marker; the terminal
summary prints one PASS/FAIL line per criterion.

The example-matrix golden values, the reliability anchors and the MovieLens
counts are the published reference numbers; everything else is checked
against brute-force oracles or by construction.
"""

import itertools
import json
import logging
import random
import time
from pathlib import Path

import pytest

import oracle
from trsmrec.cli import ExperimentConfig, run_experiment
from trsmrec.evaluation import ClassificationCounts, log_segment_accounting, neighbor_rank_changes, topn_counts
from trsmrec.ingest import Gender, build_matrix, load_dataset
from trsmrec.predictor import neighbor_weights, predict, predict_many, rank_top_n, select_neighbors
from trsmrec.segment import GenderSegment, split_by_gender
from trsmrec.similarity import Measure, build_similarity_model, reliability, tanimoto, trsm

from conftest import EXAMPLE, ML100K_DIR, rows_to_triples

# printed reference values for user 1 against users 2..5, with printed decimals
PRINTED = {
    "tanimoto": {2: (0.5, 3), 3: (0.25, 3), 4: (1.0, 3), 5: (0.667, 3)},
    "reliability": {2: (0.622, 3), 3: (0.562, 3), 4: (0.679, 3), 5: (0.622, 3)},
    "trsm": {2: (0.311, 3), 3: (0.14, 2), 4: (0.679, 3), 5: (0.414, 3)},
}
PRINTED_RANK = [4, 5, 2, 3]


def _example_model():
    seg = GenderSegment(Gender.MALE, build_matrix(rows_to_triples(EXAMPLE)))
    return build_similarity_model(Measure.TRSM, seg)


# -- 1 ----------------------------------------------------------------------------

@pytest.mark.criterion(1)
@pytest.mark.parametrize(
    "quantity, other",
    [(q, v) for q in PRINTED for v in (2, 3, 4, 5)],
)
def test_example_golden_values(quantity, other):
    u, v = EXAMPLE[1], EXAMPLE[other]
    value = {
        "tanimoto": lambda: tanimoto(u, v),
        "reliability": lambda: reliability(len(u.keys() & v.keys())),
        "trsm": lambda: _example_model().score(1, other),
    }[quantity]()
    printed, decimals = PRINTED[quantity][other]
    assert round(value, decimals) == printed, f"{quantity}(1,{other}) = {value:.6f}, printed {printed}"


@pytest.mark.criterion(1)
def test_example_rank_order():
    t0 = time.perf_counter()
    model = _example_model()
    assert select_neighbors(model, 1, 200).ids == PRINTED_RANK
    assert time.perf_counter() - t0 < 0.1


# -- 2 ----------------------------------------------------------------------------

@pytest.mark.criterion(2)
def test_reliability_anchors():
    assert reliability(0) == 0.5
    assert reliability(9) > 0.9
    values = [reliability(c) for c in range(0, 101)]
    assert all(b > a for a, b in zip(values, values[1:]))


# -- 3 ----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def loaded():
    if not (ML100K_DIR / "u.data").is_file():
        pytest.skip(f"MovieLens 100K not found in {ML100K_DIR}")
    t0 = time.perf_counter()
    ds = load_dataset(ML100K_DIR)
    return ds, time.perf_counter() - t0


@pytest.mark.criterion(3)
def test_ml100k_counts(loaded):
    ds, elapsed = loaded
    assert len(ds.triples) == 100000
    assert ds.n_users == 943
    assert ds.n_movies == 1682
    assert ds.gender_counts()[Gender.MALE] == 670
    assert elapsed < 5.0


@pytest.mark.criterion(3)
def test_ml100k_female_count(loaded):
    ds, _ = loaded
    assert ds.gender_counts()[Gender.FEMALE] == 243


@pytest.mark.criterion(3)
def test_segment_accounting_is_logged(loaded, caplog):
    ds, _ = loaded
    with caplog.at_level(logging.INFO, logger="trsmrec"):
        acct = log_segment_accounting(ds)
    counts = ds.gender_counts()
    assert acct["unsegmented"] == 943 - counts[Gender.MALE] - counts[Gender.FEMALE]
    assert f"{counts[Gender.MALE]} male + {counts[Gender.FEMALE]} female of 943 users" in caplog.text
    assert f"{acct['unsegmented']} users in neither segment" in caplog.text


# -- 4 ----------------------------------------------------------------------------

def _random_rows(rnd):
    n_users, n_movies = rnd.randint(2, 6), rnd.randint(1, 6)
    density = rnd.uniform(0.3, 0.9)
    rows = {}
    for u in range(1, n_users + 1):
        picked = [m for m in range(1, n_movies + 1) if rnd.random() < density] or [rnd.randint(1, n_movies)]
        rows[u] = {m: rnd.randint(1, 5) for m in picked}
    return rows


@pytest.mark.criterion(4)
def test_oracle_equivalence():
    rnd = random.Random(2024)
    checked_scores = checked_preds = 0
    for _ in range(200):
        rows = _random_rows(rnd)
        matrix = build_matrix(rows_to_triples(rows))
        model = build_similarity_model(Measure.TRSM, GenderSegment(Gender.MALE, matrix))
        for u, v in itertools.combinations(rows, 2):
            assert abs(model.score(u, v) - oracle.trsm(rows[u], rows[v])) <= 1e-12
            assert abs(trsm(rows[u], rows[v]) - oracle.trsm(rows[u], rows[v])) <= 1e-12
            checked_scores += 1
        k = rnd.randint(1, 6)
        w = neighbor_weights(model, k)
        movies = sorted({m for r in rows.values() for m in r})
        queries = [(u, m) for u in rows for m in movies if m not in rows[u]]
        if not queries:
            continue
        batch, _ = predict_many(matrix, w, *zip(*queries))
        for (u, m), b in zip(queries, batch):
            expected = oracle.predict(rows, u, m, k)
            res = predict(matrix, select_neighbors(model, u, k), u, m)
            if expected is None:
                assert res.is_fallback
                continue
            assert abs(res.raw - expected) <= 1e-12
            assert abs(b - min(5.0, max(1.0, expected))) <= 1e-12
            checked_preds += 1
    assert checked_scores >= 100 and checked_preds >= 100


# -- 5 ----------------------------------------------------------------------------

@pytest.mark.criterion(5)
def test_topn_metrics_against_hand_tabulation():
    rnd = random.Random(5)
    for _ in range(2000):
        size = rnd.randint(1, 10)
        movies = rnd.sample(range(1, 100), size)
        actual = {m: rnd.randint(1, 5) for m in movies}
        preds = {m: rnd.choice([1.0, 2.5, 3.0, 3.7, 4.2, 5.0]) for m in movies}
        previous_recall = -1.0
        for n in range(0, 12):
            top = rank_top_n(1, preds, n)
            got = topn_counts(top, actual, 4)
            rec = set(top.movies)
            tp = sum(m in rec and actual[m] >= 4 for m in movies)
            fp = sum(m in rec and actual[m] < 4 for m in movies)
            fn = sum(m not in rec and actual[m] >= 4 for m in movies)
            tn = sum(m not in rec and actual[m] < 4 for m in movies)
            assert got == ClassificationCounts(tp, fp, tn, fn)
            assert got.accuracy == (tp + tn) / size
            assert got.precision == (tp / (tp + fp) if tp + fp else None)
            assert got.recall == (tp / (tp + fn) if tp + fn else None)
            if got.recall is not None:
                assert got.recall >= previous_recall
                previous_recall = got.recall


# -- 6, 7 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def default_runs(tmp_path_factory, loaded):
    outs, times = [], []
    for name in ("run_a", "run_b"):
        cfg = ExperimentConfig(data_dir=str(ML100K_DIR), output_dir=str(tmp_path_factory.mktemp(name) / "out"))
        t0 = time.perf_counter()
        run_experiment(cfg)
        times.append(time.perf_counter() - t0)
        outs.append(cfg.output_dir)
    return outs, times


def _report_bytes(out_dir):
    # the config block names its own output directory; everything else must match
    files = {}
    for p in sorted(Path(out_dir).iterdir()):
        data = p.read_bytes()
        if p.suffix == ".json":
            doc = json.loads(data)
            doc["config"].pop("output_dir")
            data = json.dumps(doc, sort_keys=True).encode()
        files[p.name] = data
    return files


@pytest.mark.criterion(6)
def test_default_run_scale_and_determinism(default_runs):
    (a, b), times = default_runs
    assert max(times) < 600
    fa, fb = _report_bytes(a), _report_bytes(b)
    assert len([n for n in fa if n.startswith("report_")]) == 12
    assert fa == fb


@pytest.mark.criterion(7, requires=(1, 2, 3, 4, 5))
def test_comparison_grid_reports_relative_gains(default_runs):
    (a, _), _ = default_runs
    summary = json.loads((Path(a) / "summary.json").read_text())
    for seg in ("male", "female"):
        entry = summary["segments"][seg]
        trsm_mae = entry["grid"]["trsm"]["mae"]
        assert set(entry["mae_improvement"]) == {"pearson", "cosine", "jaccard", "spcc", "cpc"}
        for name, gain in entry["mae_improvement"].items():
            base = entry["grid"][name]["mae"]
            assert abs(gain - (base - trsm_mae) / base) <= 5e-4


@pytest.mark.criterion(7)
def test_reliability_weight_changes_rankings(loaded):
    ds, _ = loaded
    for seg in split_by_gender(ds.matrix, ds.profiles):
        assert neighbor_rank_changes(seg, 200) > 0, f"weight inert in {seg.gender.label} segment"
