import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from fraudtrap.bipartite import BipartiteGraph

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60
)
settings.load_profile("default")


def graph_from_sets(adj, labeled=()):
    """Graph from ``{user_key: [object_key, ...]}``; keys are sorted strings."""
    records = [(u, m) for u, objs in adj.items() for m in objs]
    return BipartiteGraph.from_records(records, labeled_users=labeled)


def random_graph(rng, n_users, n_objects, n_edges, n_labeled=0, arity=0):
    users = rng.integers(0, n_users, n_edges)
    objects = rng.integers(0, n_objects, n_edges)
    attrs = rng.integers(0, 3, (n_edges, arity))
    labeled = rng.choice(n_users, min(n_labeled, n_users), replace=False) if n_labeled else ()
    return BipartiteGraph.from_arrays(users, objects, attrs,
                                      user_keys=[f"u{i}" for i in range(n_users)],
                                      object_keys=[f"m{j}" for j in range(n_objects)],
                                      labeled_users=labeled)


@st.composite
def bipartite_graphs(draw, max_users=30, max_objects=20, max_edges=120, labels=True):
    n_users = draw(st.integers(1, max_users))
    n_objects = draw(st.integers(1, max_objects))
    n_edges = draw(st.integers(0, max_edges))
    arity = draw(st.integers(0, 1))
    seed = draw(st.integers(0, 2**32 - 1))
    n_labeled = draw(st.integers(0, n_users)) if labels else 0
    return random_graph(np.random.default_rng(seed), n_users, n_objects, n_edges,
                        n_labeled, arity)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one summary line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, ok, detail):
        lines.append((number, f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"))
        print(lines[-1][1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
