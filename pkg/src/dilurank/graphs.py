"""Finite graphs: sparse generators and leaf removal.

Graphs are stored CSR-style (offsets + sorted neighbor lists), undirected and
simple.  The leaf-removal routine follows the round-synchronous bookkeeping
with three vertex classes:

    A  leaves removed against a non-leaf neighbor, plus isolated vertices
    B  the non-leaf neighbors
    P  pairs of adjacent leaves (isolated edges)

A vertex whose degree reaches zero mid-process joins A on the following
round; an isolated vertex contributes one dimension to the kernel and one
unit to |A|, which is what keeps the accounting identity

    dim ker = |A| - |B| + dim ker(core)

exact at every stage.  The residual graph after termination (the core) has
minimum degree >= 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .degrees import DegreeModel


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph in CSR form; neighbor lists sorted."""

    n: int
    offsets: np.ndarray
    neighbors: np.ndarray
    meta: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def edge_count(self) -> int:
        return len(self.neighbors) // 2

    def row(self, v: int) -> np.ndarray:
        return self.neighbors[self.offsets[v]:self.offsets[v + 1]]

    def edges(self) -> np.ndarray:
        """(m, 2) array of edges with u < v, lexicographically sorted."""
        u = np.repeat(np.arange(self.n), self.degrees)
        v = self.neighbors
        keep = u < v
        return np.column_stack([u[keep], v[keep]])

    def adjacency_dense(self, dtype=np.int64) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=dtype)
        e = self.edges()
        a[e[:, 0], e[:, 1]] = 1
        a[e[:, 1], e[:, 0]] = 1
        return a

    def induced(self, vertices: np.ndarray) -> "Graph":
        """Subgraph on ``vertices`` (sorted original ids), relabeled 0..k-1."""
        vertices = np.asarray(vertices, dtype=np.int64)
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[vertices] = np.arange(len(vertices))
        flat = _gather_rows(self.offsets, self.neighbors, vertices)
        owner = np.repeat(np.arange(len(vertices)), self.degrees[vertices])
        keep = remap[flat] >= 0
        return from_adjacency_pairs(len(vertices), owner[keep], remap[flat[keep]])

    def validate(self) -> None:
        u = np.repeat(np.arange(self.n), self.degrees)
        v = self.neighbors
        assert not np.any(u == v), "self loop"
        for w in range(self.n):
            r = self.row(w)
            assert np.all(np.diff(r) > 0), "unsorted or duplicate neighbors"
        fwd = set(map(tuple, np.column_stack([u, v])))
        assert all((b, a) in fwd for a, b in fwd), "asymmetric adjacency"

    def to_edge_text(self) -> str:
        return "".join(f"{a} {b}\n" for a, b in self.edges())


def _gather_rows(offsets: np.ndarray, data: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Concatenate data[offsets[i]:offsets[i+1]] for i in ids, in order."""
    counts = offsets[ids + 1] - offsets[ids]
    total = int(counts.sum())
    if total == 0:
        return data[:0]
    starts = offsets[ids]
    cum = np.zeros(len(ids), dtype=np.int64)
    np.cumsum(counts[:-1], out=cum[1:])
    idx = np.repeat(starts - cum, counts) + np.arange(total)
    return data[idx]


def from_adjacency_pairs(n: int, u: np.ndarray, v: np.ndarray, meta: dict | None = None) -> Graph:
    """Build a Graph from directed pair lists already containing both (u,v) and (v,u)."""
    order = np.lexsort((v, u))
    u, v = u[order], v[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(u, minlength=n), out=offsets[1:])
    return Graph(n=n, offsets=offsets, neighbors=v.astype(np.int64), meta=meta or {})


def from_edges(n: int, edges, meta: dict | None = None) -> Graph:
    """Build a Graph from an iterable of undirected edges (u, v), u != v."""
    e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if len(e):
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        if np.any(lo == hi):
            raise ValueError("self loop in edge list")
        key = lo * n + hi
        _, idx = np.unique(key, return_index=True)
        lo, hi = lo[idx], hi[idx]
    else:
        lo = hi = np.zeros(0, dtype=np.int64)
    return from_adjacency_pairs(n, np.concatenate([lo, hi]), np.concatenate([hi, lo]), meta)


def from_edge_text(text: str) -> Graph:
    pairs = []
    nmax = -1
    for line in text.strip().splitlines():
        if not line.strip():
            continue
        a, b = map(int, line.split())
        pairs.append((a, b))
        nmax = max(nmax, a, b)
    return from_edges(nmax + 1, pairs)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def gen_erdos_renyi(n: int, c: float, seed) -> Graph:
    """G(n, p) with p = c/n, by geometric skipping over the pair sequence.

    Cost O(n + |E|); each unordered pair appears independently with
    probability c/n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < c < n:
        raise ValueError("need 0 < c < n")
    rng = _rng(seed)
    p = c / n
    npairs = n * (n - 1) // 2
    logq = np.log1p(-p)
    picked = []
    pos = -1
    # draw skip batches until the pair sequence is exhausted
    batch = max(64, int(npairs * p * 1.2) + 64)
    while pos < npairs:
        gaps = np.floor(np.log(rng.random(batch)) / logq).astype(np.int64) + 1
        steps = np.cumsum(gaps)
        hits = pos + steps
        take = hits < npairs
        picked.append(hits[take])
        if not take.all():
            break
        pos = int(hits[-1])
    k = np.concatenate(picked) if picked else np.zeros(0, dtype=np.int64)
    if len(k) == 0:
        return Graph(n=n, offsets=np.zeros(n + 1, dtype=np.int64),
                     neighbors=np.zeros(0, dtype=np.int64))
    # invert the triangular ranking: pair (i, j), i < j, has index
    # i*(2n - i - 1)/2 + (j - i - 1)
    i = np.floor((2 * n - 1 - np.sqrt((2.0 * n - 1) ** 2 - 8.0 * k)) / 2).astype(np.int64)
    i = np.clip(i, 0, n - 2)
    off = i * (2 * n - i - 1) // 2
    # float sqrt can be off by one row either way
    too_far = off > k
    while np.any(too_far):
        i[too_far] -= 1
        off = i * (2 * n - i - 1) // 2
        too_far = off > k
    nxt = (i + 1) * (2 * n - i - 2) // 2
    short = nxt <= k
    while np.any(short):
        i[short] += 1
        off = i * (2 * n - i - 1) // 2
        nxt = (i + 1) * (2 * n - i - 2) // 2
        short = nxt <= k
    j = k - off + i + 1
    return from_adjacency_pairs(n, np.concatenate([i, j]), np.concatenate([j, i]))


def gen_configuration(n: int, model: DegreeModel, seed) -> Graph:
    """Erased configuration model with i.i.d. degrees from the model.

    The last degree is bumped by one if the draw sums odd; self-loops and
    parallel edges are erased.  Erasure counts land in ``meta``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed)
    degs = model.sample(rng, n).astype(np.int64)
    if degs.sum() % 2 == 1:
        degs[-1] += 1
    stubs = np.repeat(np.arange(n, dtype=np.int64), degs)
    stubs = stubs[rng.permutation(len(stubs))]
    u, v = stubs[0::2], stubs[1::2]
    loops = int(np.sum(u == v))
    keep = u != v
    u, v = u[keep], v[keep]
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    key = lo * n + hi
    uniq, idx = np.unique(key, return_index=True)
    parallel = len(lo) - len(uniq)
    lo, hi = lo[idx], hi[idx]
    meta = {"drawn_degree_sum": int(degs.sum()), "self_loops": loops,
            "parallel_edges": int(parallel),
            "erased_edges": loops + int(parallel)}
    return from_adjacency_pairs(n, np.concatenate([lo, hi]), np.concatenate([hi, lo]), meta)


# ---------------------------------------------------------------------------
# leaf removal
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KSResult:
    """Outcome of leaf removal: the A/B/P partition, per-round sizes, core."""

    a_set: np.ndarray
    b_set: np.ndarray
    p_set: np.ndarray
    a_sizes: np.ndarray   # |A_t| for t = 0..rounds
    b_sizes: np.ndarray
    rounds: int
    core: Graph
    core_vertices: np.ndarray

    @property
    def lr_trace(self) -> np.ndarray:
        return self.a_sizes - self.b_sizes

    @property
    def lr(self) -> int:
        return int(self.a_sizes[-1] - self.b_sizes[-1])


def karp_sipser(g: Graph, max_rounds: int | None = None) -> KSResult:
    """Round-synchronous leaf removal.

    Round t removes, simultaneously, every leaf of the current graph (into A
    when its neighbor is a non-leaf, into P when two leaves are adjacent),
    every non-leaf neighbor of a leaf (into B), and every vertex isolated by
    the previous round (into A).  Stops when the residual graph has minimum
    degree >= 2.  ``a_sizes[t]``/``b_sizes[t]`` snapshot |A_t|, |B_t|; index
    0 counts the initially isolated vertices.
    """
    n = g.n
    offsets, nbrs = g.offsets, g.neighbors
    deg = g.degrees.astype(np.int64).copy()
    alive = np.ones(n, dtype=bool)
    in_a = np.zeros(n, dtype=bool)
    in_b = np.zeros(n, dtype=bool)
    in_p = np.zeros(n, dtype=bool)

    iso = np.flatnonzero(deg == 0)
    in_a[iso] = True
    alive[iso] = False
    a_count, b_count = len(iso), 0
    a_sizes, b_sizes = [a_count], [0]

    rounds = 0
    while max_rounds is None or rounds < max_rounds:
        leaf_mask = alive & (deg == 1)
        iso_ids = np.flatnonzero(alive & (deg == 0))
        leaf_ids = np.flatnonzero(leaf_mask)
        if len(leaf_ids) == 0 and len(iso_ids) == 0:
            break

        in_a[iso_ids] = True
        alive[iso_ids] = False
        a_count += len(iso_ids)

        if len(leaf_ids):
            flat = _gather_rows(offsets, nbrs, leaf_ids)
            owner = np.repeat(leaf_ids, offsets[leaf_ids + 1] - offsets[leaf_ids])
            keep = alive[flat]
            owner, nbr = owner[keep], flat[keep]
            # exactly one alive neighbor per leaf, in leaf order
            pairmate = leaf_mask[nbr]
            p_new = owner[pairmate]
            a_new = owner[~pairmate]
            b_new = np.unique(nbr[~pairmate])
            in_p[p_new] = True
            in_a[a_new] = True
            in_b[b_new] = True
            a_count += len(a_new)
            b_count += len(b_new)
            removed = np.concatenate([leaf_ids, b_new])
            alive[removed] = False
            touched = _gather_rows(offsets, nbrs, removed)
            touched = touched[alive[touched]]
            np.subtract.at(deg, touched, 1)
            deg[removed] = 0
        deg[iso_ids] = 0
        rounds += 1
        a_sizes.append(a_count)
        b_sizes.append(b_count)

    core_vertices = np.flatnonzero(alive)
    core = g.induced(core_vertices)
    return KSResult(a_set=np.flatnonzero(in_a), b_set=np.flatnonzero(in_b),
                    p_set=np.flatnonzero(in_p),
                    a_sizes=np.array(a_sizes, dtype=np.int64),
                    b_sizes=np.array(b_sizes, dtype=np.int64),
                    rounds=rounds, core=core, core_vertices=core_vertices)


def karp_sipser_fast(g: Graph) -> KSResult:
    """Event-driven leaf removal (stack of low-degree vertices).

    The A/B/P split can differ from the synchronous variant round by round,
    but the union A+B+P, the final LR value and the core are identical; use
    this for rank preprocessing where round structure is irrelevant.
    """
    n = g.n
    offsets, nbrs = g.offsets, g.neighbors
    deg = g.degrees.astype(np.int64).copy()
    alive = np.ones(n, dtype=bool)
    in_a = np.zeros(n, dtype=bool)
    in_b = np.zeros(n, dtype=bool)
    in_p = np.zeros(n, dtype=bool)
    a_count = b_count = 0
    stack = list(np.flatnonzero(deg <= 1))
    while stack:
        v = stack.pop()
        if not alive[v]:
            continue
        d = deg[v]
        if d == 0:
            in_a[v] = True
            alive[v] = False
            a_count += 1
            continue
        if d != 1:
            continue
        row = nbrs[offsets[v]:offsets[v + 1]]
        w = -1
        for u in row:
            if alive[u]:
                w = int(u)
                break
        if deg[w] == 1:
            in_p[v] = True
            in_p[w] = True
            alive[v] = False
            alive[w] = False
            continue
        in_a[v] = True
        in_b[w] = True
        alive[v] = False
        alive[w] = False
        a_count += 1
        b_count += 1
        for u in nbrs[offsets[w]:offsets[w + 1]]:
            if alive[u]:
                deg[u] -= 1
                if deg[u] <= 1:
                    stack.append(int(u))
    core_vertices = np.flatnonzero(alive)
    core = g.induced(core_vertices)
    lr = a_count - b_count
    return KSResult(a_set=np.flatnonzero(in_a), b_set=np.flatnonzero(in_b),
                    p_set=np.flatnonzero(in_p),
                    a_sizes=np.array([a_count], dtype=np.int64),
                    b_sizes=np.array([b_count], dtype=np.int64),
                    rounds=0, core=core, core_vertices=core_vertices)


def ks_round_marginals(model: DegreeModel, rounds: int, n: int, seeds: int,
                       seed: int = 0, generator: str = "configuration",
                       er_c: float | None = None) -> dict:
    """Empirical per-round P(root in A_t), P(root in B_t) via set sizes.

    Vertices are exchangeable, so |A_t|/n estimates the root marginal with
    far less noise than a single-vertex indicator; results are averaged over
    ``seeds`` independent graphs.
    """
    a_fracs = np.zeros((seeds, rounds + 1))
    b_fracs = np.zeros((seeds, rounds + 1))
    root_seq = np.random.SeedSequence(seed)
    for s in range(seeds):
        rng = np.random.Generator(np.random.PCG64(root_seq.spawn(1)[0]))
        if generator == "erdos_renyi":
            if er_c is None:
                raise ValueError("er_c required for erdos_renyi generator")
            g = gen_erdos_renyi(n, er_c, rng)
        else:
            g = gen_configuration(n, model, rng)
        res = karp_sipser(g, max_rounds=rounds)
        ta = res.a_sizes / n
        tb = res.b_sizes / n
        # pad: once leaf removal halts the sets stop changing
        a_fracs[s, :len(ta)] = ta
        a_fracs[s, len(ta):] = ta[-1]
        b_fracs[s, :len(tb)] = tb
        b_fracs[s, len(tb):] = tb[-1]
    return {
        "a_frac": a_fracs.mean(axis=0),
        "b_frac": b_fracs.mean(axis=0),
        "lr": (a_fracs - b_fracs).mean(axis=0),
        "a_frac_per_seed": a_fracs,
        "b_frac_per_seed": b_fracs,
    }
