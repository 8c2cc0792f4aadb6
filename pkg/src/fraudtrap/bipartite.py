"""User-object interaction graph, file ingestion and popularity pruning.

Edges are keyed by *edge key*: the user plus its quantized attribute buckets
(timestamps, ratings, ...). Two interactions with the same object collapse
into one edge when their edge keys are equal, so the incoming set of every
object is a true set.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """Raised on malformed edge or label files."""


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """Immutable bipartite graph from users to objects.

    Attributes
    ----------
    user_keys, object_keys : tuple of str
        Original identifiers; position is the dense integer id.
    key_user : ndarray of int64, shape (n_keys,)
        User id of every edge key.
    key_attrs : ndarray of int64, shape (n_keys, arity)
        Attribute buckets of every edge key.
    edge_key, edge_object : ndarray of int64, shape (n_edges,)
        Distinct (edge key, object) pairs sorted by key then object.
    labeled_users : frozenset of int
        Users known to be fraudulent (empty in unsupervised mode).
    """

    user_keys: tuple
    object_keys: tuple
    key_user: np.ndarray
    key_attrs: np.ndarray
    edge_key: np.ndarray
    edge_object: np.ndarray
    labeled_users: frozenset = field(default_factory=frozenset)

    # -- construction ---------------------------------------------------
    @classmethod
    def from_arrays(
        cls,
        users,
        objects,
        attrs=None,
        *,
        user_keys: Sequence[str] | None = None,
        object_keys: Sequence[str] | None = None,
        labeled_users: Iterable[int] = (),
    ) -> "BipartiteGraph":
        """Build a graph from parallel id arrays, deduplicating edges."""
        users = np.asarray(users, dtype=np.int64).reshape(-1)
        objects = np.asarray(objects, dtype=np.int64).reshape(-1)
        if users.shape != objects.shape:
            raise ValueError("users and objects must have the same length")
        if attrs is None:
            attrs = np.zeros((users.size, 0), dtype=np.int64)
        attrs = np.asarray(attrs, dtype=np.int64)
        if attrs.ndim != 2:
            attrs = attrs.reshape(users.size, -1) if users.size else attrs.reshape(0, 0)
        if attrs.shape[0] != users.size:
            raise ValueError("attrs must have one row per edge")

        n_users = len(user_keys) if user_keys is not None else int(users.max(initial=-1)) + 1
        n_objects = (
            len(object_keys) if object_keys is not None else int(objects.max(initial=-1)) + 1
        )
        if users.size and (users.min() < 0 or users.max() >= n_users):
            raise ValueError("user id out of range")
        if objects.size and (objects.min() < 0 or objects.max() >= n_objects):
            raise ValueError("object id out of range")
        if user_keys is None:
            user_keys = [f"u{i}" for i in range(n_users)]
        if object_keys is None:
            object_keys = [f"m{j}" for j in range(n_objects)]

        rows = np.column_stack([users, attrs])
        if rows.shape[0]:
            key_rows, key_of = np.unique(rows, axis=0, return_inverse=True)
            key_of = key_of.reshape(-1)
        else:
            key_rows = rows
            key_of = np.zeros(0, dtype=np.int64)
        code = np.unique(key_of.astype(np.int64) * max(n_objects, 1) + objects)
        labeled = frozenset(int(u) for u in labeled_users)
        if labeled and (min(labeled) < 0 or max(labeled) >= n_users):
            raise ValueError("labeled user id out of range")
        return cls(
            user_keys=tuple(user_keys),
            object_keys=tuple(object_keys),
            key_user=np.ascontiguousarray(key_rows[:, 0], dtype=np.int64),
            key_attrs=np.ascontiguousarray(key_rows[:, 1:], dtype=np.int64),
            edge_key=code // max(n_objects, 1),
            edge_object=code % max(n_objects, 1),
            labeled_users=labeled,
        )

    @classmethod
    def from_records(
        cls,
        records: Iterable[Sequence],
        bucket_widths: Sequence[float] = (),
        labeled_users: Iterable[str] = (),
    ) -> "BipartiteGraph":
        """Build from ``(user_key, object_key, *attr_values)`` tuples.

        Each raw attribute value ``v`` is quantized to ``floor(v / width)``.
        """
        user_index: dict[str, int] = {}
        object_index: dict[str, int] = {}
        users, objects, attrs = [], [], []
        for rec in records:
            u, m, *vals = rec
            if len(vals) != len(bucket_widths):
                raise ValueError(f"expected {len(bucket_widths)} attributes, got {len(vals)}")
            users.append(user_index.setdefault(str(u), len(user_index)))
            objects.append(object_index.setdefault(str(m), len(object_index)))
            attrs.append([quantize(v, w) for v, w in zip(vals, bucket_widths)])
        labeled = [user_index[k] for k in labeled_users if k in user_index]
        return cls.from_arrays(
            users,
            objects,
            np.asarray(attrs, dtype=np.int64).reshape(len(users), len(bucket_widths)),
            user_keys=list(user_index),
            object_keys=list(object_index),
            labeled_users=labeled,
        )

    # -- sizes ----------------------------------------------------------
    @property
    def num_users(self) -> int:
        return len(self.user_keys)

    @property
    def num_objects(self) -> int:
        return len(self.object_keys)

    @property
    def num_edges(self) -> int:
        return int(self.edge_key.size)

    @property
    def num_keys(self) -> int:
        return int(self.key_user.size)

    @property
    def arity(self) -> int:
        return int(self.key_attrs.shape[1])

    # -- derived structure ----------------------------------------------
    @cached_property
    def user_index(self) -> dict:
        return {k: i for i, k in enumerate(self.user_keys)}

    @cached_property
    def object_index(self) -> dict:
        return {k: i for i, k in enumerate(self.object_keys)}

    @cached_property
    def in_degree(self) -> np.ndarray:
        """``Deg(m_j)``: number of distinct edge keys pointing to each object."""
        return np.bincount(self.edge_object, minlength=self.num_objects).astype(np.int64)

    @cached_property
    def key_indptr(self) -> np.ndarray:
        """CSR offsets into ``edge_object`` for each edge key."""
        return np.searchsorted(self.edge_key, np.arange(self.num_keys + 1)).astype(np.int64)

    @cached_property
    def key_labeled(self) -> np.ndarray:
        if not self.labeled_users:
            return np.zeros(self.num_keys, dtype=bool)
        return np.isin(self.key_user, np.fromiter(self.labeled_users, dtype=np.int64))

    @cached_property
    def user_object_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct (user, object) pairs, attributes ignored, sorted."""
        n = max(self.num_objects, 1)
        code = np.unique(self.key_user[self.edge_key] * n + self.edge_object)
        return code // n, code % n

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Expanded ``(users, objects, attrs)`` arrays, one row per edge."""
        return (
            self.key_user[self.edge_key],
            self.edge_object.copy(),
            self.key_attrs[self.edge_key],
        )

    def incoming(self, obj: int, labeled_only: bool = False) -> set:
        """``I_j`` as a set of ``(user, *attr_buckets)`` tuples."""
        sel = self.edge_key[self.edge_object == obj]
        if labeled_only:
            sel = sel[self.key_labeled[sel]]
        return {(int(self.key_user[k]), *map(int, self.key_attrs[k])) for k in sel}

    # -- variants -------------------------------------------------------
    def with_labels(self, users: Iterable[int]) -> "BipartiteGraph":
        labeled = frozenset(int(u) for u in users)
        if labeled and (min(labeled) < 0 or max(labeled) >= self.num_users):
            raise ValueError("labeled user id out of range")
        return BipartiteGraph(
            self.user_keys, self.object_keys, self.key_user, self.key_attrs,
            self.edge_key, self.edge_object, labeled,
        )

    def labeled_subgraph(self) -> "BipartiteGraph":
        """``G^l``: the labeled users' edges over the full object set."""
        keep = self.key_labeled[self.edge_key]
        u, m, a = self.edges()
        return BipartiteGraph.from_arrays(
            u[keep], m[keep], a[keep],
            user_keys=self.user_keys, object_keys=self.object_keys,
            labeled_users=self.labeled_users,
        )


def quantize(value, width: float) -> int:
    if width <= 0:
        raise ValueError("bucket width must be positive")
    return int(math.floor(float(value) / width))


def _data_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, line


def ingest_edges(
    path,
    bucket_widths: Sequence[float] = (),
    delimiter: str = "\t",
    labels_path=None,
) -> BipartiteGraph:
    """Read a ``user<TAB>object[<TAB>attr...]`` edge file.

    ``bucket_widths`` gives one positive width per attribute column; its
    length fixes the expected column count.
    """
    if any(w <= 0 for w in bucket_widths):
        raise ValueError("bucket widths must be positive")
    n_cols = 2 + len(bucket_widths)
    records = []
    for lineno, line in _data_lines(Path(path)):
        cols = line.split(delimiter)
        if len(cols) != n_cols:
            raise GraphFormatError(
                f"{path}:{lineno}: expected {n_cols} columns, found {len(cols)}"
            )
        try:
            vals = [float(v) for v in cols[2:]]
        except ValueError:
            raise GraphFormatError(f"{path}:{lineno}: unparsable attribute value") from None
        if not all(math.isfinite(v) for v in vals):
            raise GraphFormatError(f"{path}:{lineno}: non-finite attribute value")
        records.append((cols[0], cols[1], *vals))
    if not records:
        raise GraphFormatError(f"{path}: no edges")
    graph = BipartiteGraph.from_records(records, bucket_widths)
    log.info("ingested %d edges, %d users, %d objects",
             graph.num_edges, graph.num_users, graph.num_objects)
    if labels_path is not None:
        graph = ingest_labels(labels_path, graph)
    return graph


def ingest_labels(path, graph: BipartiteGraph) -> BipartiteGraph:
    """Attach labeled fraud users read from a one-key-per-line file.

    Keys not present in the graph are reported with a warning and skipped.
    """
    index = graph.user_index
    labeled, unknown = set(), []
    for _, line in _data_lines(Path(path)):
        key = line.strip()
        if key in index:
            labeled.add(index[key])
        else:
            unknown.append(key)
    if unknown:
        warnings.warn(
            f"{len(unknown)} labeled user keys not in graph (first: {unknown[0]!r})",
            stacklevel=2,
        )
    return graph.with_labels(labeled)


def prune_popular(
    graph: BipartiteGraph,
    max_degree: int | None = None,
    quantile: float | None = None,
) -> tuple[BipartiteGraph, list]:
    """Remove objects whose in-degree exceeds a cutoff.

    Exactly one of ``max_degree`` (absolute, >= 1) or ``quantile`` (in
    (0, 1], linear-interpolated over the degree list) must be given. Objects
    are renumbered densely; user ids are unchanged.

    Returns
    -------
    pruned : BipartiteGraph
    removed : list of str
        Keys of the deleted objects.
    """
    if (max_degree is None) == (quantile is None):
        raise ValueError("give exactly one of max_degree or quantile")
    deg = graph.in_degree
    if max_degree is not None:
        if max_degree < 1:
            raise ValueError("max_degree must be >= 1")
        cutoff = float(max_degree)
    else:
        if not 0.0 < quantile <= 1.0:
            raise ValueError("quantile must be in (0, 1]")
        cutoff = float(np.quantile(deg, quantile)) if deg.size else 0.0
    drop = deg > cutoff
    if deg.size and drop.all():
        raise ValueError(f"cutoff {cutoff:g} removes every object")
    if not drop.any():
        return graph, []

    keep_ids = np.flatnonzero(~drop)
    remap = np.full(graph.num_objects, -1, dtype=np.int64)
    remap[keep_ids] = np.arange(keep_ids.size)
    keep_edge = ~drop[graph.edge_object]
    removed = [graph.object_keys[j] for j in np.flatnonzero(drop)]
    pruned = BipartiteGraph(
        user_keys=graph.user_keys,
        object_keys=tuple(graph.object_keys[j] for j in keep_ids),
        key_user=graph.key_user,
        key_attrs=graph.key_attrs,
        edge_key=graph.edge_key[keep_edge],
        edge_object=remap[graph.edge_object[keep_edge]],
        labeled_users=graph.labeled_users,
    )
    log.info("pruned %d objects with in-degree > %g", len(removed), cutoff)
    return pruned, removed


def write_edges(graph: BipartiteGraph, path, delimiter: str = "\t") -> None:
    """Write one ``user object [bucket...]`` row per distinct edge.

    Attribute columns hold the integer buckets, so re-reading the file with
    bucket width 1 reproduces the same graph.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for key, obj in zip(graph.edge_key, graph.edge_object):
            cols = [graph.user_keys[graph.key_user[key]], graph.object_keys[obj]]
            cols.extend(str(int(v)) for v in graph.key_attrs[key])
            fh.write(delimiter.join(cols) + "\n")
