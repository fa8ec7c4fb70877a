"""Truncated branching-process trees and their leaves-up recursions.

Trees live in a BFS arena: node 0 is the root, generations occupy contiguous
index ranges, and each node's children form a contiguous block.  That layout
makes the three recursions run as vectorized per-generation sweeps:

* resolvent:  m_i(z) = -(z + sum_children m_j(z))^{-1}, boundary -1/z,
* h(t):       h_i = (1 + sum_j (t^2 + sum_k h_k)^{-1})^{-1}, boundary 1,
* zero atom:  x_i = (1 + sum_j (sum_k x_k)^{-1})^{-1} with exact 0/inf
              branches (1/0 = inf, 1/inf = 0), j children, k grandchildren.

Even truncation depths matter for h: with boundary value 1, h at depth
2n upper-bounds the untruncated value and decreases as 2n grows, so the
(depth, t) grid brackets the atom from above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .degrees import DegreeModel, size_biased

DEFAULT_NODE_CAP = 10_000_000


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(0, 2 ** 63)))
    return np.random.SeedSequence(seed)


@dataclass(frozen=True)
class TreeSample:
    """BFS arena for one rooted tree truncated at ``truncation_depth``."""

    parent: np.ndarray
    child_start: np.ndarray
    child_end: np.ndarray
    depth: np.ndarray
    gen_offsets: np.ndarray
    truncation_depth: int
    valid: bool = True

    @property
    def n(self) -> int:
        return len(self.parent)

    @property
    def max_depth(self) -> int:
        return len(self.gen_offsets) - 2

    def generation(self, g: int) -> slice:
        return slice(int(self.gen_offsets[g]), int(self.gen_offsets[g + 1]))


def sample_gwt(model: DegreeModel, depth: int, node_cap: int = DEFAULT_NODE_CAP,
               seed=None) -> TreeSample:
    """Sample a tree: root offspring from the degree law, interior offspring
    from its size-biased shift, truncated at ``depth`` generations.

    If the node budget is exceeded the sample comes back flagged invalid;
    callers discard and count it rather than silently truncating harder.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    rng = _rng(seed)
    offspring = size_biased(model) if model.mean > 0 else None

    gen_sizes = [1]
    counts_per_gen = []
    parent_chunks = [np.array([-1], dtype=np.int64)]
    current = np.array([0], dtype=np.int64)
    total = 1
    for g in range(depth):
        if len(current) == 0:
            break
        if g == 0:
            counts = model.sample(rng, 1).astype(np.int64)
        else:
            counts = offspring.sample(rng, len(current)).astype(np.int64)
        born = int(counts.sum())
        if total + born > node_cap:
            return TreeSample(parent=np.array([-1]), child_start=np.zeros(1, np.int64),
                              child_end=np.zeros(1, np.int64), depth=np.zeros(1, np.int64),
                              gen_offsets=np.array([0, 1], np.int64),
                              truncation_depth=depth, valid=False)
        counts_per_gen.append(counts)
        if born == 0:
            break
        children = np.arange(total, total + born, dtype=np.int64)
        parent_chunks.append(np.repeat(current, counts))
        gen_sizes.append(born)
        current = children
        total += born

    gen_offsets = np.zeros(len(gen_sizes) + 1, dtype=np.int64)
    np.cumsum(gen_sizes, out=gen_offsets[1:])
    n = int(gen_offsets[-1])
    parent = np.concatenate(parent_chunks)
    depth_arr = np.repeat(np.arange(len(gen_sizes), dtype=np.int64), gen_sizes)
    child_start = np.full(n, n, dtype=np.int64)
    child_end = np.full(n, n, dtype=np.int64)
    for g, counts in enumerate(counts_per_gen):
        lo, hi = int(gen_offsets[g]), int(gen_offsets[g + 1])
        excl = np.zeros(len(counts), dtype=np.int64)
        np.cumsum(counts[:-1], out=excl[1:])
        child_start[lo:hi] = gen_offsets[g + 1] + excl
        child_end[lo:hi] = child_start[lo:hi] + counts
    return TreeSample(parent=parent, child_start=child_start, child_end=child_end,
                      depth=depth_arr, gen_offsets=gen_offsets,
                      truncation_depth=depth)


def tree_from_edges(n: int, edges, root: int = 0) -> TreeSample:
    """Re-root an explicit tree (n-1 undirected edges) into a BFS arena.

    Node 0 of the arena is ``root``; useful for checking the recursions
    against direct linear algebra on arbitrary small trees.
    """
    adj: list[list[int]] = [[] for _ in range(n)]
    cnt = 0
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
        cnt += 1
    if cnt != n - 1:
        raise ValueError("not a tree: expected n-1 edges")
    order = [root]
    parent_of = {root: -1}
    gen_sizes = [1]
    frontier = [root]
    while frontier:
        nxt = []
        for v in frontier:
            for w in adj[v]:
                if w not in parent_of:
                    parent_of[w] = v
                    nxt.append(w)
        if nxt:
            gen_sizes.append(len(nxt))
            order.extend(nxt)
        frontier = nxt
    if len(order) != n:
        raise ValueError("not a tree: disconnected")
    newid = {v: i for i, v in enumerate(order)}
    parent = np.array([newid[parent_of[v]] if parent_of[v] >= 0 else -1 for v in order],
                      dtype=np.int64)
    child_start = np.full(n, n, dtype=np.int64)
    child_end = np.full(n, n, dtype=np.int64)
    # children of consecutive nodes are consecutive in BFS order
    counts = np.bincount(parent[1:], minlength=n)
    cursor = 1
    for i in range(n):
        child_start[i] = cursor
        cursor += int(counts[i])
        child_end[i] = cursor
    gen_offsets = np.zeros(len(gen_sizes) + 1, dtype=np.int64)
    np.cumsum(gen_sizes, out=gen_offsets[1:])
    depth_arr = np.repeat(np.arange(len(gen_sizes), dtype=np.int64), gen_sizes)
    return TreeSample(parent=parent, child_start=child_start, child_end=child_end,
                      depth=depth_arr, gen_offsets=gen_offsets,
                      truncation_depth=len(gen_sizes) - 1)


def truncate(tree: TreeSample, depth: int) -> TreeSample:
    """View of the tree truncated at ``depth`` generations."""
    if depth >= tree.max_depth:
        return tree
    go = tree.gen_offsets[:depth + 2].copy()
    n2 = int(go[-1])
    cs = tree.child_start[:n2].copy()
    ce = tree.child_end[:n2].copy()
    last = slice(int(go[depth]), n2)
    cs[last] = n2
    ce[last] = n2
    return TreeSample(parent=tree.parent[:n2], child_start=cs, child_end=ce,
                      depth=tree.depth[:n2], gen_offsets=go,
                      truncation_depth=depth, valid=tree.valid)


# ---------------------------------------------------------------------------
# leaves-up recursions
# ---------------------------------------------------------------------------

def h_recursion(tree: TreeSample, t: float) -> float:
    """Value at the root of the two-level h(t) recursion, in [0, 1].

    Nodes at the truncation depth have no stored children, so they take the
    boundary value 1 automatically (empty sums).
    """
    if t <= 0:
        raise ValueError("t must be positive")
    go = tree.gen_offsets
    n = tree.n
    ngen = len(go) - 1
    h = np.ones(n)
    s = np.zeros(n)
    inv = np.zeros(n)
    t2 = t * t
    for g in range(ngen - 1, -1, -1):
        lo, hi = int(go[g]), int(go[g + 1])
        h[lo:hi] = 1.0 / (1.0 + inv[lo:hi])
        if g >= 1:
            plo = int(go[g - 1])
            par = tree.parent[lo:hi] - plo
            width = lo - plo
            s[plo:lo] += np.bincount(par, weights=h[lo:hi], minlength=width)
            inv[plo:lo] += np.bincount(par, weights=1.0 / (t2 + s[lo:hi]), minlength=width)
    return float(h[0])


def exact_atom_finite_tree(tree: TreeSample) -> float:
    """Mass at zero of the root spectral measure of a finite tree.

    Leaves-up evaluation over the extended reals with explicit branch logic:
    an empty (or all-zero) grandchild sum makes the child's reciprocal
    infinite, which pins the parent value to exactly 0; floating inf never
    enters the arithmetic.
    """
    n = tree.n
    parent = tree.parent
    sum_child = np.zeros(n)
    recip = np.zeros(n)
    inf_flag = np.zeros(n, dtype=bool)
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        xi = 0.0 if inf_flag[i] else 1.0 / (1.0 + recip[i])
        x[i] = xi
        p = parent[i]
        if p >= 0:
            sum_child[p] += xi
            si = sum_child[i]
            if si == 0.0:
                inf_flag[p] = True
            else:
                recip[p] += 1.0 / si
    return float(x[0])


@dataclass(frozen=True)
class AtomEstimate:
    depths: list[int]
    t_grid: list[float]
    mean: np.ndarray          # (len(depths), len(t_grid))
    stderr: np.ndarray
    headline: float           # deepest depth, smallest t
    headline_stderr: float
    samples_used: int
    discarded: int
    depth_violations: int     # h(depth+2) > h(depth) occurrences (should be 0)
    t_violations: int         # h increasing as t decreases (should be 0)


def atom_at_zero_mc(model: DegreeModel, depths, t_grid, samples: int,
                    seed=None, node_cap: int = DEFAULT_NODE_CAP) -> AtomEstimate:
    """Monte Carlo matrix of E[h] over (truncation depth, t).

    Depths must be even (the bracketing direction of the h boundary value
    holds at even truncations) and t_grid decreasing.  Each sampled tree is
    drawn once at the deepest requested depth and re-truncated, so the
    monotonicity diagnostics compare apples to apples.
    """
    depths = [int(d) for d in depths]
    t_grid = [float(t) for t in t_grid]
    if any(d < 0 or d % 2 for d in depths):
        raise ValueError("depths must be even and nonnegative")
    if sorted(depths) != depths:
        raise ValueError("depths must be increasing")
    if any(t <= 0 for t in t_grid):
        raise ValueError("t grid must be positive")
    if any(t2 >= t1 for t1, t2 in zip(t_grid, t_grid[1:])):
        raise ValueError("t grid must be strictly decreasing")
    root = _seed_sequence(seed)
    dmax = max(depths)
    vals = np.zeros((samples, len(depths), len(t_grid)))
    used = 0
    discarded = 0
    depth_viol = 0
    t_viol = 0
    for k in range(samples):
        tree = sample_gwt(model, dmax, node_cap=node_cap,
                          seed=np.random.Generator(np.random.PCG64(root.spawn(1)[0])))
        if not tree.valid:
            discarded += 1
            continue
        for di, d in enumerate(depths):
            tr = truncate(tree, d)
            for ti, t in enumerate(t_grid):
                vals[used, di, ti] = h_recursion(tr, t)
        row = vals[used]
        if np.any(row[1:, :] > row[:-1, :] + 1e-12):
            depth_viol += 1
        if np.any(row[:, 1:] > row[:, :-1] + 1e-12):
            t_viol += 1
        used += 1
    vals = vals[:used]
    mean = vals.mean(axis=0) if used else np.full((len(depths), len(t_grid)), np.nan)
    nb = min(20, max(1, used))
    if used:
        batches = np.array_split(vals, nb, axis=0)
        bm = np.stack([b.mean(axis=0) for b in batches if len(b)])
        stderr = bm.std(axis=0, ddof=1) / np.sqrt(len(bm)) if len(bm) > 1 else np.zeros_like(mean)
    else:
        stderr = np.full_like(mean, np.nan)
    return AtomEstimate(depths=depths, t_grid=t_grid, mean=mean, stderr=stderr,
                        headline=float(mean[-1, -1]), headline_stderr=float(stderr[-1, -1]),
                        samples_used=used, discarded=discarded,
                        depth_violations=depth_viol, t_violations=t_viol)


@dataclass(frozen=True)
class DensityEstimate:
    energies: np.ndarray
    density: np.ndarray
    stderr: np.ndarray
    eta: float
    samples_used: int
    discarded: int


def _resolvent_root(tree: TreeSample, z: np.ndarray) -> np.ndarray:
    """m_root(z) for every z at once; boundary value -1/z at the deepest
    stored generation (childless nodes have empty sums)."""
    go = tree.gen_offsets
    ngen = len(go) - 1
    nz = len(z)
    gsize = int(go[ngen] - go[ngen - 1])
    m = np.tile(-1.0 / z, (gsize, 1))
    for g in range(ngen - 2, -1, -1):
        lo, hi = int(go[g]), int(go[g + 1])
        cs = tree.child_start[lo:hi] - int(go[g + 1])
        counts = tree.child_end[lo:hi] - tree.child_start[lo:hi]
        if len(m):
            idx = np.minimum(cs, len(m) - 1)
            S = np.add.reduceat(m, idx, axis=0)
            S[counts == 0] = 0.0
        else:
            S = np.zeros((hi - lo, nz), dtype=complex)
        S += z[None, :]
        m = -1.0 / S
    return m[0]


def resolvent_density(model: DegreeModel, energies, eta: float, depth: int,
                      samples: int, seed=None,
                      node_cap: int = DEFAULT_NODE_CAP) -> DensityEstimate:
    """Cauchy-smoothed spectral density of the expected root measure.

    Per sampled tree the resolvent recursion is evaluated leaves-up at
    z = E + i*eta over the whole energy grid; the estimate is the Monte
    Carlo mean of Im m_root / pi.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    energies = np.asarray(energies, dtype=float)
    z = energies + 1j * eta
    root = _seed_sequence(seed)
    acc = np.zeros(len(energies))
    acc2 = np.zeros(len(energies))
    used = 0
    discarded = 0
    for k in range(samples):
        tree = sample_gwt(model, depth, node_cap=node_cap,
                          seed=np.random.Generator(np.random.PCG64(root.spawn(1)[0])))
        if not tree.valid:
            discarded += 1
            continue
        im = np.imag(_resolvent_root(tree, z)) / np.pi
        acc += im
        acc2 += im * im
        used += 1
    if used == 0:
        nanv = np.full(len(energies), np.nan)
        return DensityEstimate(energies=energies, density=nanv, stderr=nanv,
                               eta=eta, samples_used=0, discarded=discarded)
    dens = acc / used
    var = np.maximum(acc2 / used - dens ** 2, 0.0)
    stderr = np.sqrt(var / used)
    return DensityEstimate(energies=energies, density=dens, stderr=stderr,
                           eta=eta, samples_used=used, discarded=discarded)
