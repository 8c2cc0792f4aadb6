"""Group suspiciousness scoring, ranking and fraud-user extraction.

For a group of ``n`` objects with intra-group OSG edges E, summing every
undirected edge in both orientations:

    f1 = sum(c) / (n (n-1))         mean similarity over ordered pairs
    f2 = sum(overlap) / (n (n-1))   mean shared edge keys over ordered pairs
    f  = f1 * f2 * n

Singleton groups score zero.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from fraudtrap.bipartite import BipartiteGraph
from fraudtrap.lpatk import Partition
from fraudtrap.osg import Osg

DEFAULT_MIN_OUTDEG = 3


@dataclass(eq=False)
class GroupReport:
    group_id: int
    members: np.ndarray
    f: float
    f1: float
    f2: float
    edge_density: float
    users: np.ndarray | None = field(default=None)

    @property
    def size(self) -> int:
        return int(self.members.size)

    def to_dict(self, graph: BipartiteGraph | None = None) -> dict:
        members = [int(m) for m in self.members]
        users = [] if self.users is None else [int(u) for u in self.users]
        if graph is not None:
            members = [graph.object_keys[m] for m in members]
            users = [graph.user_keys[u] for u in users]
        return {
            "group_id": self.group_id,
            "f": self.f,
            "f1": self.f1,
            "f2": self.f2,
            "edge_density": self.edge_density,
            "size": self.size,
            "members": members,
            "users": users,
        }


def _scores(n: int, sum_c: float, sum_overlap: float, n_edges: int):
    if n < 2:
        return 0.0, 0.0, 0.0, 0.0
    pairs = n * (n - 1)
    f1 = 2.0 * sum_c / pairs
    f2 = 2.0 * sum_overlap / pairs
    return f1 * f2 * n, f1, f2, 2.0 * n_edges / pairs


def score_group(osg: Osg, members, group_id: int = 0) -> GroupReport:
    """Score one object group; missing pairs contribute zero."""
    members = np.asarray(members, dtype=np.int64)
    if members.size == 0:
        raise ValueError("group must be nonempty")
    if np.unique(members).size != members.size:
        raise ValueError("duplicate member ids")
    if members.min() < 0 or members.max() >= osg.num_objects:
        raise ValueError("member id out of range")
    inside = np.isin(osg.a, members) & np.isin(osg.b, members)
    f, f1, f2, dens = _scores(
        members.size, float(osg.c[inside].sum()), float(osg.overlap[inside].sum()),
        int(inside.sum()),
    )
    return GroupReport(group_id, np.sort(members), f, f1, f2, dens)


def extract_users(graph: BipartiteGraph, members, min_outdeg: int = DEFAULT_MIN_OUTDEG):
    """Users linked to at least two members and to at least ``min_outdeg`` of them.

    Being in some ``H_i & H_j`` for distinct members is the same as touching
    two or more members, so no pairwise intersection is formed.
    """
    members = np.asarray(members, dtype=np.int64)
    users, objects = graph.user_object_pairs
    hit = np.isin(objects, members)
    counts = np.bincount(users[hit], minlength=graph.num_users)
    return np.flatnonzero(counts >= max(2, min_outdeg)).astype(np.int64)


def _extract_all(graph: BipartiteGraph, group_of: np.ndarray, n_groups: int,
                 min_outdeg: int) -> dict:
    users, objects = graph.user_object_pairs
    if users.size == 0:
        return {}
    code = users * n_groups + group_of[objects]
    uniq, counts = np.unique(code, return_counts=True)
    keep = counts >= max(2, min_outdeg)
    out: dict = {}
    for u, g in zip(uniq[keep] // n_groups, uniq[keep] % n_groups):
        out.setdefault(int(g), []).append(int(u))
    return out


def rank_groups(
    osg: Osg,
    partition: Partition,
    graph: BipartiteGraph | None = None,
    top_k: int | None = None,
    min_outdeg: int = DEFAULT_MIN_OUTDEG,
) -> list:
    """Score all groups and sort by ``f`` descending.

    Ties go to the larger group, then to the smaller smallest member id.
    Users are extracted for the first ``top_k`` groups (all if None) when a
    bipartite graph is available.
    """
    group_of = partition.group_of
    n_groups = len(partition.groups)
    intra = group_of[osg.a] == group_of[osg.b]
    g_intra = group_of[osg.a[intra]]
    sum_c = np.bincount(g_intra, weights=osg.c[intra], minlength=n_groups)
    sum_o = np.bincount(g_intra, weights=osg.overlap[intra], minlength=n_groups)
    n_e = np.bincount(g_intra, minlength=n_groups)

    reports = []
    for gid, members in enumerate(partition.groups):
        f, f1, f2, dens = _scores(members.size, float(sum_c[gid]), float(sum_o[gid]),
                                  int(n_e[gid]))
        reports.append(GroupReport(gid, np.sort(members), f, f1, f2, dens))
    reports.sort(key=lambda r: (-r.f, -r.size, int(r.members[0])))

    graph = graph if graph is not None else osg.graph
    if graph is not None and n_groups:
        chosen = reports if top_k is None else reports[:top_k]
        extracted = _extract_all(graph, group_of, n_groups, min_outdeg)
        for rep in chosen:
            rep.users = np.asarray(extracted.get(rep.group_id, []), dtype=np.int64)
    return reports


def entity_scores(reports, num_objects: int, num_users: int):
    """Per-object and per-user suspiciousness derived from group scores.

    An object gets its group's ``f``; a user gets the largest ``f`` among
    groups that extracted it, or 0.
    """
    obj = np.zeros(num_objects)
    usr = np.zeros(num_users)
    for rep in reports:
        obj[rep.members] = rep.f
        if rep.users is not None and rep.users.size:
            usr[rep.users] = np.maximum(usr[rep.users], rep.f)
    return obj, usr


def write_reports(reports, path, graph: BipartiteGraph | None = None) -> None:
    """One JSON object per line, in rank order."""
    with open(path, "w", encoding="utf-8") as fh:
        for rep in reports:
            fh.write(json.dumps(rep.to_dict(graph), sort_keys=True) + "\n")


def write_summary_csv(reports, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["group_id", "f", "f1", "f2", "edge_density", "size", "n_users"])
        for rep in reports:
            w.writerow([rep.group_id, repr(rep.f), repr(rep.f1), repr(rep.f2),
                        repr(rep.edge_density), rep.size,
                        "" if rep.users is None else rep.users.size])
