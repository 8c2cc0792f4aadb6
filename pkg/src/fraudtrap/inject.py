"""Synthetic fraud groups with loose synchrony and camouflage.

A group G(n_users, n_objects, rho, theta) adds fresh fraud users and fresh
fraud objects. Each fraud user reviews ``round(rho * n_objects)`` distinct
fraud objects. Camouflage then adds ``theta`` edges per fraud user:

random    fraud users -> uniformly chosen normal objects
biased    fraud users -> normal objects drawn proportional to in-degree
hijacked  existing normal users -> fraud objects (theta * n_users edges)
reverse   as hijacked, drawn from a disjoint pool of normal users
mixed     theta split evenly over the four kinds above
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from fraudtrap.bipartite import BipartiteGraph

CAMOUFLAGE_KINDS = ("none", "random", "biased", "hijacked", "reverse", "mixed")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-9))


@dataclass(frozen=True)
class InjectionSpec:
    n_users: int
    n_objects: int
    rho: float
    theta: int = 0
    camouflage: str = "none"
    seed: int = 0
    jitter: bool = False
    n_hijacked: int | None = None

    def __post_init__(self):
        if self.n_users < 1 or self.n_objects < 1:
            raise ValueError("fraud group needs at least one user and one object")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("rho must be in (0, 1]")
        if self.per_user_edges < 1:
            raise ValueError("round(rho * n_objects) must be >= 1")
        if self.theta < 0:
            raise ValueError("theta must be >= 0")
        if self.camouflage not in CAMOUFLAGE_KINDS:
            raise ValueError(f"camouflage must be one of {CAMOUFLAGE_KINDS}")
        if self.n_hijacked is not None and self.n_hijacked < 1:
            raise ValueError("n_hijacked must be >= 1")

    @property
    def per_user_edges(self) -> int:
        return round_half_up(self.rho * self.n_objects)

    @property
    def hijack_pool(self) -> int:
        return self.n_hijacked if self.n_hijacked is not None else self.n_users


@dataclass
class GroundTruth:
    fraud_users: set = field(default_factory=set)
    fraud_objects: set = field(default_factory=set)
    user_group: dict = field(default_factory=dict)
    object_group: dict = field(default_factory=dict)
    specs: list = field(default_factory=list)

    @property
    def num_groups(self) -> int:
        return len(self.specs)

    def objects_of(self, group: int) -> list:
        return sorted(o for o, g in self.object_group.items() if g == group)

    def users_of(self, group: int) -> list:
        return sorted(u for u, g in self.user_group.items() if g == group)

    def object_mask(self, n: int) -> np.ndarray:
        mask = np.zeros(n, dtype=bool)
        mask[list(self.fraud_objects)] = True
        return mask

    def user_mask(self, n: int) -> np.ndarray:
        mask = np.zeros(n, dtype=bool)
        mask[list(self.fraud_users)] = True
        return mask

    def write(self, directory, graph: BipartiteGraph) -> None:
        """``fraud_users.txt``, ``fraud_objects.txt`` and ``truth.json``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "fraud_users.txt").write_text(
            "".join(graph.user_keys[u] + "\n" for u in sorted(self.fraud_users)), encoding="utf-8")
        (d / "fraud_objects.txt").write_text(
            "".join(graph.object_keys[o] + "\n" for o in sorted(self.fraud_objects)),
            encoding="utf-8")
        manifest = {
            "specs": [asdict(s) for s in self.specs],
            "groups": [
                {"users": [graph.user_keys[u] for u in self.users_of(g)],
                 "objects": [graph.object_keys[o] for o in self.objects_of(g)]}
                for g in range(self.num_groups)
            ],
        }
        (d / "truth.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n",
                                      encoding="utf-8")


def make_background(
    n_users: int = 10_000,
    n_objects: int = 2_000,
    n_edges: int = 53_000,
    degree_skew: float = 1.5,
    seed: int = 0,
) -> BipartiteGraph:
    """Random bipartite graph with Zipf-like object popularity.

    Object ``j`` at popularity rank ``r`` is drawn with probability
    proportional to ``(r + 1) ** -degree_skew``; users are uniform. Exactly
    ``n_edges`` distinct edges are produced.
    """
    if n_users < 0 or n_objects < 0 or n_edges < 0:
        raise ValueError("sizes must be nonnegative")
    if n_edges > n_users * n_objects:
        raise ValueError("n_edges exceeds n_users * n_objects")
    if degree_skew < 0:
        raise ValueError("degree_skew must be >= 0")
    rng = np.random.default_rng(seed)
    if n_edges == 0:
        return BipartiteGraph.from_arrays(
            [], [], user_keys=[f"u{i}" for i in range(n_users)],
            object_keys=[f"m{j}" for j in range(n_objects)])

    rank = rng.permutation(n_objects)
    p = (rank + 1.0) ** -degree_skew
    p /= p.sum()
    seen = np.zeros(0, dtype=np.int64)
    while seen.size < n_edges:
        batch = max(2 * (n_edges - seen.size), 1024)
        code = rng.integers(0, n_users, batch) * n_objects + rng.choice(n_objects, batch, p=p)
        merged = np.concatenate([seen, code])
        _, first = np.unique(merged, return_index=True)
        seen = merged[np.sort(first)]
    seen = seen[:n_edges]
    return BipartiteGraph.from_arrays(
        seen // n_objects, seen % n_objects,
        user_keys=[f"u{i}" for i in range(n_users)],
        object_keys=[f"m{j}" for j in range(n_objects)],
    )


def _fraud_counts(spec: InjectionSpec, rng) -> np.ndarray:
    base = spec.per_user_edges
    if not spec.jitter:
        return np.full(spec.n_users, base, dtype=np.int64)
    delta = round_half_up(0.2 * base)
    counts = rng.integers(base - delta, base + delta + 1, spec.n_users)
    return np.clip(counts, 1, spec.n_objects)


def _object_camouflage(kind, theta, fraud_u, normal_objects, background, rng):
    if theta > normal_objects.size:
        raise ValueError(f"theta={theta} exceeds {normal_objects.size} normal objects")
    p = None
    if kind == "biased":
        deg = background.in_degree[normal_objects].astype(np.float64)
        if np.count_nonzero(deg) < theta:
            raise ValueError("not enough normal objects with positive in-degree")
        p = deg / deg.sum()
    picks = [normal_objects[rng.choice(normal_objects.size, theta, replace=False, p=p)]
             for _ in fraud_u]
    return np.repeat(fraud_u, theta), np.concatenate(picks)


def _account_camouflage(kind, theta, spec, fraud_m, perm, rng):
    # perm is one shuffle of the normal users; its two halves are the
    # hijacked and reverse pools, so they never overlap
    pool_size = spec.hijack_pool
    if 2 * pool_size > perm.size:
        raise ValueError(f"need {2 * pool_size} normal users for disjoint hijack pools, "
                         f"have {perm.size}")
    pool = perm[:pool_size] if kind == "hijacked" else perm[pool_size:2 * pool_size]
    total = theta * spec.n_users
    if total > pool_size * spec.n_objects:
        raise ValueError("theta * n_users exceeds available (user, object) pairs")
    picks = rng.choice(pool_size * spec.n_objects, total, replace=False)
    return pool[picks // spec.n_objects], fraud_m[picks % spec.n_objects]


def inject(
    background: BipartiteGraph,
    spec: InjectionSpec,
    truth: GroundTruth | None = None,
) -> tuple[BipartiteGraph, GroundTruth]:
    """Plant one fraud group; returns the new graph and updated ground truth.

    ``truth`` carries earlier injections so that later groups treat earlier
    fraud actors as non-normal.
    """
    truth = GroundTruth() if truth is None else replace(
        truth, fraud_users=set(truth.fraud_users), fraud_objects=set(truth.fraud_objects),
        user_group=dict(truth.user_group), object_group=dict(truth.object_group),
        specs=list(truth.specs))
    rng = np.random.default_rng(spec.seed)
    gid = truth.num_groups
    n_u0, n_m0 = background.num_users, background.num_objects
    fraud_u = np.arange(n_u0, n_u0 + spec.n_users, dtype=np.int64)
    fraud_m = np.arange(n_m0, n_m0 + spec.n_objects, dtype=np.int64)

    counts = _fraud_counts(spec, rng)
    new_u = [np.repeat(fraud_u, counts)]
    new_m = [np.concatenate([fraud_m[rng.choice(spec.n_objects, c, replace=False)]
                             for c in counts])]

    normal_objects = np.setdiff1d(np.arange(n_m0), np.fromiter(truth.fraud_objects, np.int64))
    normal_users = np.setdiff1d(np.arange(n_u0), np.fromiter(truth.fraud_users, np.int64))
    if spec.camouflage == "mixed":
        share = np.diff(np.floor(np.linspace(0, spec.theta, 5) + 1e-9)).astype(np.int64)
        parts = zip(("random", "biased", "hijacked", "reverse"), share)
    else:
        parts = [(spec.camouflage, spec.theta)]
    perm = None
    for kind, theta in parts:
        if theta <= 0 or kind == "none":
            continue
        if kind in ("random", "biased"):
            u, m = _object_camouflage(kind, theta, fraud_u, normal_objects, background, rng)
        else:
            if perm is None:
                perm = rng.permutation(normal_users)
            u, m = _account_camouflage(kind, theta, spec, fraud_m, perm, rng)
        new_u.append(u)
        new_m.append(m)

    u0, m0, a0 = background.edges()
    add_u = np.concatenate(new_u)
    add_m = np.concatenate(new_m)
    graph = BipartiteGraph.from_arrays(
        np.concatenate([u0, add_u]),
        np.concatenate([m0, add_m]),
        np.concatenate([a0, np.zeros((add_u.size, background.arity), dtype=np.int64)]),
        user_keys=list(background.user_keys) + [f"fraud{gid}_u{i}" for i in range(spec.n_users)],
        object_keys=list(background.object_keys)
        + [f"fraud{gid}_m{j}" for j in range(spec.n_objects)],
        labeled_users=background.labeled_users,
    )
    truth.fraud_users.update(int(u) for u in fraud_u)
    truth.fraud_objects.update(int(m) for m in fraud_m)
    truth.user_group.update((int(u), gid) for u in fraud_u)
    truth.object_group.update((int(m), gid) for m in fraud_m)
    truth.specs.append(spec)
    return graph, truth


def inject_many(background: BipartiteGraph, specs) -> tuple[BipartiteGraph, GroundTruth]:
    graph, truth = background, None
    for spec in specs:
        graph, truth = inject(graph, spec, truth)
    return graph, truth


def label_fraction(truth: GroundTruth, fraction: float, seed: int = 0) -> list:
    """Randomly pick ``round(fraction * |fraud users|)`` fraud users to label."""
    users = np.asarray(sorted(truth.fraud_users), dtype=np.int64)
    n = round_half_up(fraction * users.size)
    rng = np.random.default_rng(seed)
    return sorted(int(u) for u in rng.choice(users, n, replace=False))


def scheme1_specs(rhos=(0.1, 0.2, 0.3, 0.4, 0.5), n_users: int = 200, n_objects: int = 50,
                  camouflage: str = "random", seed: int = 0) -> list:
    """One spec per rho with ``theta = n_objects * rho``."""
    return [InjectionSpec(n_users, n_objects, rho, round_half_up(n_objects * rho), camouflage,
                          seed) for rho in rhos]


def scheme2_specs(n_users: int = 200, n_objects: int = 50, rho_range=(0.2, 0.6),
                  seed: int = 0) -> list:
    """Five disjoint groups: one without camouflage, one per camouflage kind."""
    rng = np.random.default_rng(seed)
    specs = []
    for i, kind in enumerate(CAMOUFLAGE_KINDS[:5]):
        rho = float(rng.uniform(*rho_range))
        specs.append(InjectionSpec(n_users, n_objects, rho, round_half_up(n_objects * rho),
                                   kind, seed * 1000 + i + 1))
    return specs
