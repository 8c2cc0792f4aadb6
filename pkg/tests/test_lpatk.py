from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fraudtrap import _pykernels
from fraudtrap.inject import InjectionSpec, inject, make_background
from fraudtrap.lpatk import (
    CRITERIA,
    Partition,
    greedy_color,
    groups_from_labels,
    propagate,
    update_label,
)
from fraudtrap.osg import Osg, build_osg

try:
    from fraudtrap import _kernels
except ImportError:
    _kernels = None

needs_compiled = pytest.mark.skipif(_kernels is None, reason="compiled extension not built")


def star(weights):
    """Centre node 0 joined to nodes 1..len(weights)."""
    n = len(weights) + 1
    return Osg.from_weighted_edges(n, [0] * len(weights), list(range(1, n)), weights)


@st.composite
def random_osgs(draw, max_nodes=25, weight_pool=None):
    n = draw(st.integers(1, max_nodes))
    pairs = list(combinations(range(n), 2))
    keep = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    chosen = [p for p, k in zip(pairs, keep) if k]
    if weight_pool is None:
        w = draw(st.lists(st.floats(0.01, 2.0), min_size=len(chosen), max_size=len(chosen)))
    else:
        w = draw(st.lists(st.sampled_from(weight_pool), min_size=len(chosen),
                          max_size=len(chosen)))
    a = [p[0] for p in chosen]
    b = [p[1] for p in chosen]
    return Osg.from_weighted_edges(n, a, b, w)


def run_kernel(module, osg, criterion, k=3, strict=False, max_iters=100, workers=1,
               reverse_within_class=False):
    indptr, indices, weights = osg.adjacency
    color = greedy_color(osg).color
    n = osg.num_objects
    order = np.lexsort((np.arange(n), color)).astype(np.int64)
    counts = np.bincount(color, minlength=int(color.max(initial=-1)) + 1)
    class_ptr = np.zeros(counts.size + 1, dtype=np.int64)
    np.cumsum(counts, out=class_ptr[1:])
    if reverse_within_class:
        for lo, hi in zip(class_ptr[:-1], class_ptr[1:]):
            order[lo:hi] = order[lo:hi][::-1].copy()
    labels = np.arange(n, dtype=np.int64)
    out = module.propagate(indptr, indices, weights, order, class_ptr, labels,
                           CRITERIA[criterion], k, strict, max_iters, workers)
    return labels, out


# -- update_label ------------------------------------------------------------
A, B = 100, 200


def _labels(n, assign):
    lab = np.arange(n, dtype=np.int64)
    for node, l in assign.items():
        lab[node] = l
    return lab


def test_camouflage_pulls_sum_but_not_topk():
    osg = star([0.9] + [0.25] * 6)
    lab = _labels(8, {1: A, **{i: B for i in range(2, 8)}})
    assert update_label(0, osg, lab, "sum").label == B
    assert update_label(0, osg, lab, "max").label == A
    assert update_label(0, osg, lab, "topk", k=3).label == A


def test_single_strong_edge_pulls_max_but_not_topk():
    osg = star([0.5, 0.5, 0.6])
    lab = _labels(4, {1: A, 2: A, 3: B})
    assert update_label(0, osg, lab, "max").label == B
    assert update_label(0, osg, lab, "sum").label == A
    assert update_label(0, osg, lab, "topk", k=3).label == A


@pytest.mark.parametrize("criterion", sorted(CRITERIA))
def test_unanimous_neighbours(criterion):
    osg = star([0.3, 0.7, 0.1])
    lab = _labels(4, {1: 9, 2: 9, 3: 9})
    assert update_label(0, osg, lab, criterion) == (9, False)


def test_tie_keeps_current_label():
    osg = star([0.5, 0.5])
    lab = _labels(3, {0: 7, 1: 7, 2: 3})
    assert update_label(0, osg, lab, "sum") == (7, True)


def test_tie_without_current_takes_smallest():
    osg = star([0.5, 0.5])
    lab = _labels(3, {0: 1, 1: 7, 2: 3})
    assert update_label(0, osg, lab, "sum") == (3, True)


def test_isolated_node_keeps_label():
    osg = Osg.from_weighted_edges(3, [1], [2], [1.0])
    assert update_label(0, osg, np.arange(3), "topk") == (0, False)


def test_topk_sums_at_most_k():
    osg = star([0.4, 0.4, 0.4, 0.4, 1.5])
    lab = _labels(6, {1: A, 2: A, 3: A, 4: A, 5: B})
    # top-3 of A = 1.2 < 1.5; the fourth edge is not counted
    assert update_label(0, osg, lab, "topk", k=3).label == B
    assert update_label(0, osg, lab, "topk", k=4).label == A


def test_strict_topk_zeroes_short_labels():
    osg = star([0.9, 0.2, 0.2, 0.2])
    lab = _labels(5, {1: A, 2: B, 3: B, 4: B})
    assert update_label(0, osg, lab, "topk", k=3).label == A
    assert update_label(0, osg, lab, "topk", k=3, strict=True).label == B


def test_lpa_counts_neighbours():
    osg = star([5.0, 0.1, 0.1])
    lab = _labels(4, {1: A, 2: B, 3: B})
    assert update_label(0, osg, lab, "lpa").label == B


def test_unknown_criterion():
    with pytest.raises(ValueError, match="criterion"):
        update_label(0, star([1.0]), np.arange(2), "median")


# -- propagate ---------------------------------------------------------------
def test_two_disjoint_cliques():
    pairs = list(combinations(range(3), 2)) + list(combinations(range(3, 6), 2))
    osg = Osg.from_weighted_edges(6, *zip(*pairs), [1.0] * 6)
    part = propagate(osg, "topk", k=3)
    assert sorted(map(sorted, (g.tolist() for g in part.groups))) == [[0, 1, 2], [3, 4, 5]]
    assert part.converged


def test_edgeless_graph():
    osg = Osg.from_weighted_edges(4, [], [], [])
    part = propagate(osg, "topk")
    assert part.iterations_run == 1 and part.converged
    assert len(part.groups) == 4


def test_injected_group_gets_one_label():
    bg = make_background(2000, 400, 8000, seed=3)
    g, truth = inject(bg, InjectionSpec(100, 30, 0.5, 0, "none", seed=4))
    part = propagate(build_osg(g), "topk")
    assert len({int(part.label[m]) for m in truth.fraud_objects}) == 1


def test_max_iters_cap_reports_not_converged(caplog):
    osg = Osg.from_weighted_edges(3, [0, 1], [1, 2], [1.0, 1.0])
    part = propagate(osg, "lpa", max_iters=1)
    assert part.iterations_run == 1 and not part.converged
    assert "without converging" in caplog.text


def test_invalid_parameters():
    osg = star([1.0])
    with pytest.raises(ValueError):
        propagate(osg, "topk", k=0)
    with pytest.raises(ValueError):
        propagate(osg, "topk", max_iters=0)


def test_groups_ordering_and_dump(tmp_path):
    label = np.array([5, 5, 2, 9, 2, 2])
    groups = groups_from_labels(label)
    assert [g.tolist() for g in groups] == [[2, 4, 5], [0, 1], [3]]
    part = Partition(label, groups, 1, True)
    assert part.group_of.tolist() == [1, 1, 0, 2, 0, 0]
    part.dump(tmp_path / "p.tsv", [f"o{i}" for i in range(6)])
    assert (tmp_path / "p.tsv").read_text().splitlines()[0] == "o0\t1"


@given(random_osgs())
def test_coloring_is_proper(osg):
    col = greedy_color(osg)
    assert col.is_proper(osg)
    assert col.num_colors <= int(osg.degree.max(initial=0)) + 1


@given(random_osgs(), st.sampled_from(sorted(CRITERIA)))
def test_class_order_does_not_matter(osg, criterion):
    fwd, _ = run_kernel(_pykernels, osg, criterion, max_iters=1)
    rev, _ = run_kernel(_pykernels, osg, criterion, max_iters=1, reverse_within_class=True)
    assert np.array_equal(fwd, rev)


@given(random_osgs(), st.sampled_from(sorted(CRITERIA)), st.booleans())
def test_partition_is_a_fixed_point_when_converged(osg, criterion, strict):
    part = propagate(osg, criterion, strict=strict)
    if part.converged:
        for v in range(osg.num_objects):
            assert update_label(v, osg, part.label, criterion, strict=strict).label == \
                part.label[v]


@given(random_osgs(weight_pool=[1.0]))
def test_lpa_monochromatic_count_is_monotone(osg):
    part = propagate(osg, "lpa", max_iters=max(1, osg.num_edges))
    mono = [0] + [m for _, m in part.history]
    changes = [c for c, _ in part.history]
    for prev, cur, ch in zip(mono, mono[1:], changes):
        assert cur >= prev
        if ch:
            assert cur > prev
    assert sum(1 for c in changes if c) <= max(osg.num_edges, 1)


@needs_compiled
@given(random_osgs(), st.sampled_from(sorted(CRITERIA)), st.integers(1, 4), st.booleans(),
       st.integers(1, 4))
def test_compiled_propagate_matches_python(osg, criterion, k, strict, workers):
    lab_c, out_c = run_kernel(_kernels, osg, criterion, k, strict, workers=workers)
    lab_p, out_p = run_kernel(_pykernels, osg, criterion, k, strict)
    assert np.array_equal(lab_c, lab_p)
    assert tuple(out_c[:3]) == tuple(out_p[:3])
    assert [tuple(h) for h in out_c[3]] == [tuple(h) for h in out_p[3]]


@needs_compiled
def test_compiled_coloring_matches_python():
    rng = np.random.default_rng(1)
    pairs = [p for p in combinations(range(80), 2) if rng.random() < 0.1]
    osg = Osg.from_weighted_edges(80, *zip(*pairs), rng.random(len(pairs)))
    indptr, indices, _ = osg.adjacency
    assert np.array_equal(_kernels.greedy_color(indptr, indices, 80),
                          _pykernels.greedy_color(indptr, indices, 80))


@pytest.mark.parametrize("criterion", sorted(CRITERIA))
def test_workers_do_not_change_partition(criterion):
    bg = make_background(3000, 600, 15000, seed=5)
    g, _ = inject(bg, InjectionSpec(100, 30, 0.3, 10, "random", seed=6))
    osg = build_osg(g)
    base = propagate(osg, criterion, workers=1)
    for w in (2, 4):
        other = propagate(osg, criterion, workers=w)
        assert np.array_equal(base.label, other.label)
        assert base.history == other.history


@given(st.integers(4, 10), st.integers(0, 30), st.integers(0, 40), st.integers(0, 2**31))
def test_planted_clique_survives_weak_cross_edges(size, n_bg, n_camo, seed):
    rng = np.random.default_rng(seed)
    n = size + n_bg
    group = list(combinations(range(size), 2))
    bg = [p for p in combinations(range(size, n), 2) if rng.random() < 0.2]
    a, b = zip(*(group + bg))
    w = np.r_[rng.uniform(0.6, 1.0, len(group)), rng.uniform(0.05, 0.5, len(bg))]
    plain = Osg.from_weighted_edges(n, a, b, w)
    before = propagate(plain, "topk", k=3, max_iters=200)
    assert len(set(before.label[:size].tolist())) == 1
    if n_bg == 0:
        return
    cross = {(int(rng.integers(size)), int(rng.integers(size, n))) for _ in range(n_camo)}
    if not cross:
        return
    ca, cb = zip(*cross)
    camo = Osg.from_weighted_edges(n, a + ca, b + cb,
                                   np.r_[w, rng.uniform(0.01, 0.5, len(cross))])
    after = propagate(camo, "topk", k=3, max_iters=200)
    assert len(set(after.label[:size].tolist())) == 1
