"""Compare the compiled kernels with the pure-Python fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--edges 200000] [--repeat 3]

Both backends run on the same synthetic graph; results are checked for
equality before timings are printed.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from fraudtrap import _pykernels
from fraudtrap.inject import InjectionSpec, inject, make_background
from fraudtrap.lpatk import CRITERIA, greedy_color
from fraudtrap.osg import build_osg

try:
    from fraudtrap import _kernels
except ImportError:  # extension not built
    _kernels = None


def _best(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def _propagate_args(osg):
    indptr, indices, weights = osg.adjacency
    coloring = greedy_color(osg)
    n = osg.num_objects
    order = np.lexsort((np.arange(n), coloring.color)).astype(np.int64)
    class_ptr = np.zeros(coloring.num_colors + 1, dtype=np.int64)
    np.cumsum(np.bincount(coloring.color, minlength=coloring.num_colors), out=class_ptr[1:])
    return indptr, indices, weights, order, class_ptr


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=40_000)
    ap.add_argument("--objects", type=int, default=8_000)
    ap.add_argument("--edges", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)
    if _kernels is None:
        raise SystemExit("compiled extension is not available; nothing to compare")

    bg = make_background(args.users, args.objects, args.edges, seed=0)
    graph, _ = inject(bg, InjectionSpec(200, 50, 0.3, 15, "random", seed=1))
    inputs = (graph.key_indptr, graph.edge_object, graph.key_labeled, graph.num_objects)
    print(f"graph: {graph.num_users} users, {graph.num_objects} objects, "
          f"{graph.num_edges} edges")

    t_c, res_c = _best(lambda: _kernels.count_pairs(*inputs, args.workers), args.repeat)
    t_p, res_p = _best(lambda: _pykernels.count_pairs(*inputs, args.workers), args.repeat)
    assert all(np.array_equal(x, y) for x, y in zip(res_c, res_p)), "count_pairs mismatch"
    print(f"{'count_pairs':<16} compiled {t_c * 1e3:9.1f} ms   python {t_p * 1e3:9.1f} ms"
          f"   speedup {t_p / t_c:6.1f}x")

    osg = build_osg(graph)
    base = _propagate_args(osg)
    for name, mode in CRITERIA.items():
        def run(mod):
            labels = np.arange(osg.num_objects, dtype=np.int64)
            mod.propagate(*base, labels, mode, 3, False, 100, args.workers)
            return labels

        t_c, lab_c = _best(lambda: run(_kernels), args.repeat)
        t_p, lab_p = _best(lambda: run(_pykernels), 1)
        assert np.array_equal(lab_c, lab_p), f"propagate mismatch for {name}"
        print(f"{'propagate/' + name:<16} compiled {t_c * 1e3:9.1f} ms   python "
              f"{t_p * 1e3:9.1f} ms   speedup {t_p / t_c:6.1f}x")


if __name__ == "__main__":
    main()
