"""Object Similarity Graph construction.

Two objects are linked when at least one edge key points to both. The edge
weight ``c = s + s_l`` combines the Jaccard similarity of the two incoming
sets with the labeled co-occurrence count normalised by its global mean.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

import numpy as np

from fraudtrap._backend import kernels
from fraudtrap.bipartite import BipartiteGraph

log = logging.getLogger(__name__)

DEFAULT_HUB_GUARD = 10_000


class HubError(ValueError):
    """An edge key touches too many objects for pairwise counting."""


@dataclass(frozen=True, eq=False)
class Osg:
    """Weighted undirected graph over objects, stored as sorted edge arrays.

    Edge ``e`` joins ``a[e] < b[e]``; edges are sorted by ``(a, b)``.
    """

    num_objects: int
    a: np.ndarray
    b: np.ndarray
    overlap: np.ndarray
    labeled_overlap: np.ndarray
    s: np.ndarray
    s_l: np.ndarray
    c: np.ndarray
    mean_labeled_overlap: float
    graph: BipartiteGraph | None = None

    @classmethod
    def from_weighted_edges(cls, num_objects, a, b, c, overlap=None) -> "Osg":
        """Build an OSG fixture directly from edge weights (no bipartite source).

        ``s`` is set to ``c`` and labeled parts to zero; ``overlap`` defaults
        to 1 per edge. Pairs are normalised to ``a < b`` and sorted.
        """
        a, b = np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)
        c = np.asarray(c, dtype=np.float64)
        overlap = np.ones(a.size, dtype=np.int64) if overlap is None else np.asarray(
            overlap, dtype=np.int64)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        if np.any(lo == hi):
            raise ValueError("self-loops are not allowed")
        order = np.lexsort((hi, lo))
        lo, hi = lo[order], hi[order]
        if lo.size > 1 and np.any((lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])):
            raise ValueError("duplicate edge")
        zeros = np.zeros(a.size)
        return cls(int(num_objects), lo, hi, overlap[order], zeros.astype(np.int64),
                   c[order], zeros, c[order], 0.0, None)

    @property
    def num_edges(self) -> int:
        return int(self.a.size)

    @cached_property
    def degree(self) -> np.ndarray:
        return np.bincount(
            np.concatenate([self.a, self.b]), minlength=self.num_objects
        ).astype(np.int64)

    @cached_property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric CSR ``(indptr, indices, weights)``.

        Each neighbour list is ordered by descending ``c``, ties by ascending
        neighbour id, which is the order label updates consume it in.
        """
        src = np.concatenate([self.a, self.b])
        dst = np.concatenate([self.b, self.a])
        w = np.concatenate([self.c, self.c])
        order = np.lexsort((dst, -w, src))
        indptr = np.zeros(self.num_objects + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.num_objects), out=indptr[1:])
        return indptr, dst[order].astype(np.int64), w[order].astype(np.float64)

    def edge_dict(self) -> dict:
        """``{(a, b): (overlap, labeled_overlap, s, s_l, c)}`` for tests and debugging."""
        return {
            (int(x), int(y)): (int(o), int(lo), float(s), float(sl), float(c))
            for x, y, o, lo, s, sl, c in zip(
                self.a, self.b, self.overlap, self.labeled_overlap, self.s, self.s_l, self.c
            )
        }

    def dump(self, path, delimiter: str = "\t") -> None:
        """Write ``object_a object_b overlap labeled_overlap s s_l c`` rows."""
        keys = self.graph.object_keys if self.graph is not None else None
        with open(path, "w", encoding="utf-8") as fh:
            for x, y, o, lo, s, sl, c in zip(
                self.a, self.b, self.overlap, self.labeled_overlap, self.s, self.s_l, self.c
            ):
                ka, kb = (keys[x], keys[y]) if keys else (str(x), str(y))
                fh.write(delimiter.join([ka, kb, str(o), str(lo), repr(float(s)),
                                         repr(float(sl)), repr(float(c))]) + "\n")


def _assemble(graph, a, b, overlap, labeled, union=None) -> Osg:
    if union is None:
        deg = graph.in_degree
        union = deg[a] + deg[b] - overlap
    s = overlap / union if a.size else np.zeros(0)
    positive = labeled[labeled > 0]
    # exact integer sum keeps the mean independent of summation order
    mean_l = int(positive.sum()) / positive.size if positive.size else 0.0
    s_l = labeled / mean_l if mean_l > 0 else np.zeros(a.size)
    return Osg(
        num_objects=graph.num_objects,
        a=np.asarray(a, dtype=np.int64),
        b=np.asarray(b, dtype=np.int64),
        overlap=np.asarray(overlap, dtype=np.int64),
        labeled_overlap=np.asarray(labeled, dtype=np.int64),
        s=np.asarray(s, dtype=np.float64),
        s_l=np.asarray(s_l, dtype=np.float64),
        c=np.asarray(s + s_l, dtype=np.float64),
        mean_labeled_overlap=float(mean_l),
        graph=graph,
    )


def build_osg(
    graph: BipartiteGraph,
    hub_guard: int = DEFAULT_HUB_GUARD,
    workers: int = 1,
) -> Osg:
    """Build the OSG by key-value co-occurrence counting.

    Every edge key increments each pair of objects it points to; the union
    size then follows from in-degrees, so no set is ever materialised.

    Parameters
    ----------
    graph : BipartiteGraph
    hub_guard : int
        Largest per-key object list allowed. A key touching ``d`` objects
        costs ``d(d-1)/2`` increments.
    workers : int
        Threads for the compiled counter; output is identical for any value.

    Raises
    ------
    HubError
        If some edge key exceeds ``hub_guard`` objects.
    """
    lengths = np.diff(graph.key_indptr)
    if lengths.size and lengths.max() > hub_guard:
        worst = int(np.argmax(lengths))
        raise HubError(
            f"user {graph.user_keys[graph.key_user[worst]]!r} touches {int(lengths[worst])} "
            f"objects (guard {hub_guard}); run prune_popular or raise the guard"
        )
    a, b, overlap, labeled = kernels.count_pairs(
        graph.key_indptr, graph.edge_object, graph.key_labeled, graph.num_objects, workers
    )
    osg = _assemble(graph, a, b, overlap, labeled)
    log.info("OSG: %d objects, %d edges", osg.num_objects, osg.num_edges)
    return osg


def brute_force_osg(graph: BipartiteGraph, max_objects: int = 2_000) -> Osg:
    """Reference OSG from explicit set intersections over all object pairs."""
    if graph.num_objects > max_objects:
        raise ValueError(f"brute force limited to {max_objects} objects")
    incoming = [graph.incoming(j) for j in range(graph.num_objects)]
    incoming_l = [graph.incoming(j, labeled_only=True) for j in range(graph.num_objects)]
    rows = []
    for i, j in combinations(range(graph.num_objects), 2):
        ov = len(incoming[i] & incoming[j])
        if ov:
            rows.append((i, j, ov, len(incoming_l[i] & incoming_l[j]),
                         len(incoming[i] | incoming[j])))
    arr = np.asarray(rows, dtype=np.int64).reshape(-1, 5)
    return _assemble(graph, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], union=arr[:, 4])
