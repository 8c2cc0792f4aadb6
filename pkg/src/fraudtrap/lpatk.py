"""Label propagation on the OSG with selectable update criteria.

Criteria for choosing a node's new label among its neighbours' labels:

``lpa``   number of neighbours carrying the label (unweighted)
``sum``   total edge weight to neighbours carrying the label
``max``   largest single edge weight to a neighbour carrying the label
``topk``  sum of the K largest edge weights to neighbours carrying the label

Nodes are greedily colored so that each color class can be updated at once;
classes are swept in ascending color order against one shared label array.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from fraudtrap import _pykernels
from fraudtrap._backend import kernels
from fraudtrap.osg import Osg

log = logging.getLogger(__name__)

CRITERIA = {
    "lpa": _pykernels.MODE_LPA,
    "sum": _pykernels.MODE_SUM,
    "max": _pykernels.MODE_MAX,
    "topk": _pykernels.MODE_TOPK,
}
DEFAULT_K = 3
DEFAULT_MAX_ITERS = 100


@dataclass(frozen=True, eq=False)
class Coloring:
    color: np.ndarray
    num_colors: int

    def is_proper(self, osg: Osg) -> bool:
        return not np.any(self.color[osg.a] == self.color[osg.b])


@dataclass(frozen=True, eq=False)
class Partition:
    """Final labels and the groups they induce.

    ``groups`` is ordered by descending size, ties by smallest member id;
    a group's position in that list is its ``group_id``.
    """

    label: np.ndarray
    groups: list
    iterations_run: int
    converged: bool
    ties: int = 0
    history: list = field(default_factory=list)

    @property
    def group_of(self) -> np.ndarray:
        """Dense group id per object."""
        out = np.empty(self.label.size, dtype=np.int64)
        for gid, members in enumerate(self.groups):
            out[members] = gid
        return out

    def dump(self, path, object_keys=None, delimiter: str = "\t") -> None:
        group_of = self.group_of
        with open(path, "w", encoding="utf-8") as fh:
            for obj in range(self.label.size):
                key = object_keys[obj] if object_keys is not None else str(obj)
                fh.write(f"{key}{delimiter}{group_of[obj]}\n")


class Update(NamedTuple):
    label: int
    tie: bool


def _mode(criterion: str) -> int:
    try:
        return CRITERIA[criterion]
    except KeyError:
        raise ValueError(f"unknown criterion {criterion!r}; pick one of {sorted(CRITERIA)}") from None


def groups_from_labels(label: np.ndarray) -> list:
    if label.size == 0:
        return []
    order = np.argsort(label, kind="stable")
    bounds = np.flatnonzero(np.diff(label[order])) + 1
    groups = np.split(order, bounds)
    groups.sort(key=lambda g: (-g.size, int(g[0])))
    return groups


def greedy_color(osg: Osg) -> Coloring:
    """Smallest-free-color greedy coloring in ascending object id."""
    indptr, indices, _ = osg.adjacency
    color = kernels.greedy_color(indptr, indices, osg.num_objects)
    return Coloring(color, int(color.max()) + 1 if color.size else 0)


def update_label(
    obj: int,
    osg: Osg,
    labels,
    criterion: str = "topk",
    k: int = DEFAULT_K,
    strict: bool = False,
) -> Update:
    """New label for one object under ``criterion``.

    The current label is kept when it is among the maximisers; otherwise the
    smallest maximising label wins. ``tie`` reports more than one maximiser.
    Isolated objects keep their label.

    With ``strict=True`` the top-K score of a label with fewer than ``k``
    incident edges is zero instead of the sum of the edges it does have.
    """
    indptr, indices, weights = osg.adjacency
    labels = np.asarray(labels, dtype=np.int64)
    if indptr[obj] == indptr[obj + 1]:
        return Update(int(labels[obj]), False)
    new, tie = _pykernels._update(obj, indptr, indices, weights, labels, _mode(criterion),
                                  k, strict)
    return Update(int(new), bool(tie))


def propagate(
    osg: Osg,
    criterion: str = "topk",
    k: int = DEFAULT_K,
    max_iters: int | None = None,
    strict: bool = False,
    workers: int = 1,
) -> Partition:
    """Cluster OSG nodes by color-scheduled label propagation.

    Every object starts with its own id as label. One iteration sweeps all
    color classes; iteration stops after a sweep with no label change, or
    after ``max_iters`` sweeps (then ``converged`` is False).

    ``max_iters`` defaults to ``min(num_edges, 100)`` (at least 1).
    """
    mode = _mode(criterion)
    if k < 1:
        raise ValueError("k must be >= 1")
    if max_iters is None:
        max_iters = max(1, min(osg.num_edges, DEFAULT_MAX_ITERS))
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")

    indptr, indices, weights = osg.adjacency
    coloring = greedy_color(osg)
    n = osg.num_objects
    order = np.lexsort((np.arange(n), coloring.color)).astype(np.int64)
    class_ptr = np.zeros(coloring.num_colors + 1, dtype=np.int64)
    np.cumsum(np.bincount(coloring.color, minlength=coloring.num_colors), out=class_ptr[1:])

    labels = np.arange(n, dtype=np.int64)
    iterations, converged, ties, history = kernels.propagate(
        indptr, indices, weights, order, class_ptr, labels, mode, k, strict,
        max_iters, max(1, workers),
    )
    if not converged:
        log.warning("label propagation stopped at max_iters=%d without converging", max_iters)
    part = Partition(
        label=labels,
        groups=groups_from_labels(labels),
        iterations_run=int(iterations),
        converged=bool(converged),
        ties=int(ties),
        history=[(int(c), int(m)) for c, m in history],
    )
    log.info("%s: %d groups after %d iterations (%d colors)",
             criterion, len(part.groups), part.iterations_run, coloring.num_colors)
    return part
