import numpy as np
import pytest

from fraudtrap.inject import InjectionSpec, inject, make_background
from fraudtrap.pipeline import detect, write_manifest


@pytest.fixture(scope="module")
def planted():
    bg = make_background(2000, 400, 8000, degree_skew=0.0, seed=2)
    return inject(bg, InjectionSpec(80, 25, 0.4, 10, "random", seed=3))


def test_planted_group_ranks_first(planted):
    g, truth = planted
    res = detect(g)
    top = res.reports[0]
    assert set(truth.fraud_objects) <= set(top.members.tolist())
    scores = res.object_scores()
    assert scores[sorted(truth.fraud_objects)].min() == scores.max()


def test_pruning_popular_objects_recovers_ranking():
    bg = make_background(2000, 400, 8000, degree_skew=1.5, seed=2)
    g, truth = inject(bg, InjectionSpec(80, 25, 0.4, 10, "random", seed=3))
    fraud = sorted(truth.fraud_objects)
    unpruned = detect(g)
    assert not set(fraud) <= set(unpruned.reports[0].members.tolist())
    pruned = detect(g, prune_quantile=0.99)
    scores = pruned.object_scores()
    assert scores[fraud].min() == scores.max()


@pytest.mark.parametrize("workers", [2, 4])
def test_reports_byte_identical_across_workers(planted, tmp_path, workers):
    g, _ = planted
    detect(g, workers=1).write(tmp_path / "w1", dump_osg=True)
    detect(g, workers=workers).write(tmp_path / "wn", dump_osg=True)
    for name in ("osg.tsv", "partition.tsv", "groups.jsonl", "groups.csv"):
        assert (tmp_path / "w1" / name).read_bytes() == (tmp_path / "wn" / name).read_bytes()


def test_pruned_run_maps_back_to_source(planted):
    g, truth = planted
    res = detect(g, prune_quantile=0.99)
    assert res.removed_objects
    assert res.object_scores().shape == (g.num_objects,)
    labels = res.source_labels()
    removed = [g.object_index[k] for k in res.removed_objects]
    assert (labels[removed] == -1).all()
    assert (res.object_scores()[removed] == 0).all()
    assert res.user_scores().shape == (g.num_users,)


def test_manifest(planted, tmp_path):
    g, _ = planted
    res = detect(g)
    write_manifest(tmp_path / "m.json", {"k": 3}, res)
    assert '"osg_edges"' in (tmp_path / "m.json").read_text()
