from dataclasses import replace
from pathlib import Path

import pytest

from surfmem.campaign import batch_seed, run_campaign
from surfmem.config import parse_config
from surfmem.errors import ConfigError, StoreError
from surfmem.store import emit, pooled, read_store


def config(seed=5, budget=8192):
    return parse_config({
        "seed": seed,
        "batch_size": 1024,
        "budget": budget,
        "min_errors": 10,
        "ladder": [[2048, 400], [8192, 10]],
        "tasks": [
            {"family": "rotated", "distances": [3], "ps": [0.004, 0.008]},
            {"family": "unrotated", "distances": [3], "ps": [0.006], "bases": ["X"]},
        ],
    })


@pytest.fixture(scope="module")
def reference(tmp_path_factory):
    path = tmp_path_factory.mktemp("ref") / "r.csv"
    result = run_campaign(config(), path, workers=1)
    return path, result


def test_uninterrupted_run_finishes_every_point(reference):
    path, result = reference
    cfg = config()
    assert len(result.finished) == len(cfg.points)
    rows = read_store(path)
    for pt in cfg.points:
        mine = [r for r in rows if r.key == pt.key]
        assert [r.batch for r in mine] == list(range(len(mine)))
        assert all(r.seed == batch_seed(cfg.seed, pt, r.batch) for r in mine)


def test_budget_safety(reference):
    path, _ = reference
    cfg = config()
    for stats in pooled(read_store(path)).values():
        assert stats.shots <= cfg.budget + cfg.batch_size


def test_worker_count_does_not_change_rows(reference, tmp_path):
    path, _ = reference
    other = tmp_path / "w2.csv"
    run_campaign(config(), other, workers=2)
    strip = lambda rows: [replace(r, seconds=0.0) for r in rows]  # noqa: E731
    assert sorted(strip(read_store(other)), key=lambda r: (r.key, r.batch)) == \
        sorted(strip(read_store(path)), key=lambda r: (r.key, r.batch))


def test_kill_and_resume_matches(reference, tmp_path):
    path, _ = reference
    resumed = tmp_path / "k.csv"
    first = run_campaign(config(), resumed, workers=1, max_batches=3)
    assert first.batches_run == 3 and len(first.finished) < len(config().points)
    with open(resumed, "a") as fh:
        fh.write("rotated,3,0.0")  # interrupted mid-write
    run_campaign(config(), resumed, workers=1)
    assert pooled(read_store(resumed)).keys() == pooled(read_store(path)).keys()
    for key, stats in pooled(read_store(path)).items():
        got = pooled(read_store(resumed))[key]
        assert (got.shots, got.errors) == (stats.shots, stats.errors)


def test_finished_store_runs_nothing(reference, tmp_path):
    path, _ = reference
    copy = tmp_path / "copy.csv"
    copy.write_text(path.read_text())
    assert run_campaign(config(), copy).batches_run == 0
    assert copy.read_text() == path.read_text()


def test_seed_mismatch_is_detected(reference, tmp_path):
    path, _ = reference
    copy = tmp_path / "copy.csv"
    copy.write_text(path.read_text())
    with pytest.raises(StoreError):
        run_campaign(config(seed=6), copy)


def test_empty_task_list(tmp_path):
    cfg = parse_config({"tasks": []})
    out = tmp_path / "empty.csv"
    result = run_campaign(cfg, out)
    assert result.batches_run == 0
    assert out.read_text() == emit([], cfg.batch_size)


def test_missing_output_path():
    with pytest.raises(ConfigError):
        run_campaign(parse_config({"tasks": []}))


def test_batch_seeds_depend_on_point_and_index():
    cfg = config()
    a, b, _ = cfg.points
    seeds = {batch_seed(1, a, 0), batch_seed(1, a, 1), batch_seed(1, b, 0), batch_seed(2, a, 0)}
    assert len(seeds) == 4
    assert batch_seed(1, a, 0) == batch_seed(1, a, 0)
