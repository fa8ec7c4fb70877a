import numpy as np
import pytest

import dilurank as dr


def prufer_tree(rng: np.random.Generator, n: int):
    """Uniform random labeled tree on n >= 2 vertices via a Prufer sequence."""
    if n == 2:
        return [(0, 1)]
    seq = rng.integers(0, n, size=n - 2)
    degree = np.ones(n, dtype=int)
    for v in seq:
        degree[v] += 1
    edges = []
    import heapq
    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, int(v)))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, int(v))
    u = heapq.heappop(leaves)
    w = heapq.heappop(leaves)
    edges.append((u, w))
    return edges


def random_small_graph(rng: np.random.Generator, nmax: int = 30) -> dr.Graph:
    """Mixed battery: ER at assorted densities plus configuration draws."""
    n = int(rng.integers(2, nmax + 1))
    kind = rng.integers(0, 4)
    if kind == 0:
        c = float(rng.uniform(0.3, 4.0))
        return dr.gen_erdos_renyi(n, min(c, n - 1e-9), rng)
    if kind == 1:
        return dr.gen_configuration(n, dr.parse_model("poisson:c=2"), rng)
    if kind == 2:
        return dr.gen_configuration(n, dr.parse_model("regular:d=3"), rng)
    return dr.gen_configuration(n, dr.parse_model("pmf:1:0.5,2:0.3,5:0.2"), rng)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
