import math

import numpy as np
import pytest
from scipy import stats

import dilurank as dr
from conftest import random_small_graph


def test_from_edges_dedup_and_validate():
    g = dr.from_edges(4, [(0, 1), (1, 0), (2, 3)])
    g.validate()
    assert g.edge_count == 2
    with pytest.raises(ValueError):
        dr.from_edges(3, [(1, 1)])


def test_edge_text_roundtrip():
    g = dr.gen_erdos_renyi(40, 3.0, 1)
    g2 = dr.from_edge_text(g.to_edge_text())
    # trailing isolated vertices are not encoded; edges survive exactly
    assert np.array_equal(g.edges(), g2.edges())


def test_er_single_vertex_empty():
    g = dr.gen_erdos_renyi(1, 0.5, 0)
    assert g.n == 1 and g.edge_count == 0


def test_er_edge_count_binomial(rng):
    n, c = 100_000, 2.0
    g = dr.gen_erdos_renyi(n, c, rng)
    g_small = dr.gen_erdos_renyi(200, 3.0, rng)
    g_small.validate()
    npairs = n * (n - 1) / 2
    p = c / n
    mean = npairs * p
    sd = math.sqrt(npairs * p * (1 - p))
    assert abs(g.edge_count - mean) < 4 * sd


def test_er_degree_chisquare_poisson(rng):
    # degree of vertex 0 across many independent graphs vs Binomial(n-1, c/n)
    n, c, reps = 300, 2.0, 10_000
    degs = np.zeros(reps, dtype=int)
    for k in range(reps):
        degs[k] = dr.gen_erdos_renyi(n, c, rng).degrees[0]
    kmax = 8
    obs = np.bincount(np.minimum(degs, kmax), minlength=kmax + 1)
    probs = np.array([stats.binom.pmf(k, n - 1, c / n) for k in range(kmax)])
    probs = np.append(probs, 1 - probs.sum())
    chi = stats.chisquare(obs, probs * reps)
    assert chi.pvalue > 0.001


def test_configuration_delta2_cycles():
    m = dr.parse_model("regular:d=2")
    g = dr.gen_configuration(3000, m, 3)
    assert g.meta["drawn_degree_sum"] == 6000
    # after erasure nearly everything is still degree 2; components are cycles
    assert np.mean(g.degrees == 2) > 0.99


def test_configuration_regular3_realized():
    g = dr.gen_configuration(10_000, dr.parse_model("regular:d=3"), 4)
    assert np.mean(g.degrees == 3) >= 0.99


def test_configuration_mixture_histogram_tv():
    m = dr.parse_model("mixture:d=3")
    g = dr.gen_configuration(10_000, m, 5)
    hist = np.bincount(g.degrees, minlength=28) / g.n
    tv = 0.5 * (abs(hist[3] - 0.75) + abs(hist[27] - 0.25)
                + hist.sum() - hist[3] - hist[27])
    assert tv < 0.01


def test_ks_single_edge_pair():
    res = dr.karp_sipser(dr.from_edges(2, [(0, 1)]))
    assert set(res.p_set) == {0, 1}
    assert len(res.a_set) == 0 and len(res.b_set) == 0
    assert res.lr == 0
    assert res.core.n == 0
    assert len(res.p_set) % 2 == 0


def test_ks_star_k13():
    res = dr.karp_sipser(dr.from_edges(4, [(0, 1), (0, 2), (0, 3)]))
    assert set(res.a_set) == {1, 2, 3}
    assert set(res.b_set) == {0}
    assert res.lr == 2
    assert res.core.n == 0
    kd, _ = dr.kernel_dim_exact(dr.from_edges(4, [(0, 1), (0, 2), (0, 3)]))
    assert kd == 2


def test_ks_cycle_c4_all_core():
    c4 = dr.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    res = dr.karp_sipser(c4)
    assert len(res.a_set) == len(res.b_set) == len(res.p_set) == 0
    assert res.core.n == 4 and res.lr == 0
    # the LR bound can be strict: dim ker C4 = 2 > 0
    kd, _ = dr.kernel_dim_exact(c4)
    assert kd == 2


def test_ks_isolated_vertices_all_a():
    g = dr.from_edges(5, [])
    res = dr.karp_sipser(g)
    assert set(res.a_set) == set(range(5))
    assert res.lr == 5 and res.rounds == 0


def test_ks_midprocess_isolation_goes_to_a():
    # path P5: round 0 takes ends into A, their neighbors into B, the middle
    # vertex is isolated in round 1 and must land in A
    g = dr.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    res = dr.karp_sipser(g)
    assert set(res.a_set) == {0, 2, 4}
    assert set(res.b_set) == {1, 3}
    assert res.lr == 1
    kd, _ = dr.kernel_dim_exact(g)
    assert kd == 1  # P5 kernel dimension


def test_ks_relabeling_invariance(rng):
    for _ in range(25):
        g = random_small_graph(rng)
        perm = rng.permutation(g.n)
        edges = g.edges()
        g2 = dr.from_edges(g.n, np.column_stack([perm[edges[:, 0]], perm[edges[:, 1]]]))
        r1 = dr.karp_sipser(g)
        r2 = dr.karp_sipser(g2)
        assert set(perm[r1.a_set]) == set(r2.a_set)
        assert set(perm[r1.b_set]) == set(r2.b_set)
        assert set(perm[r1.p_set]) == set(r2.p_set)
        assert set(perm[r1.core_vertices]) == set(r2.core_vertices)


def test_ks_core_min_degree_two(rng):
    for _ in range(40):
        g = random_small_graph(rng, nmax=60)
        res = dr.karp_sipser(g)
        if res.core.n:
            assert res.core.degrees.min() >= 2


def test_ks_lr_trace_nondecreasing(rng):
    for _ in range(40):
        g = random_small_graph(rng, nmax=60)
        res = dr.karp_sipser(g)
        assert np.all(np.diff(res.lr_trace) >= 0)


def test_ks_fast_agrees_with_synchronous(rng):
    for _ in range(60):
        g = random_small_graph(rng, nmax=80)
        a = dr.karp_sipser(g)
        b = dr.karp_sipser_fast(g)
        union_a = set(a.a_set) | set(a.b_set) | set(a.p_set)
        union_b = set(b.a_set) | set(b.b_set) | set(b.p_set)
        assert union_a == union_b
        assert set(a.core_vertices) == set(b.core_vertices)
        assert a.lr == b.lr


def test_kernel_identity_battery(rng):
    # dim ker == LR + dim ker(core) exactly, and dim ker >= LR_t per round
    for _ in range(200):
        g = random_small_graph(rng)
        res = dr.karp_sipser(g)
        kd = g.n - dr.rational_rank_oracle(g)
        core_kd = res.core.n - dr.rational_rank_oracle(res.core) if res.core.n else 0
        assert kd == res.lr + core_kd
        assert all(kd >= lr for lr in res.lr_trace)


def test_round_marginals_regular3_tiny():
    m = dr.parse_model("regular:d=3")
    res = dr.ks_round_marginals(m, rounds=3, n=4000, seeds=3, seed=2)
    assert np.all(res["a_frac"] < 0.01)
    assert np.all(res["b_frac"] < 0.01)


def test_round_marginals_match_trajectory_t1():
    # the round-1 closed form is exact for the A marginal
    m = dr.parse_model("poisson:c=2")
    res = dr.ks_round_marginals(m, rounds=2, n=50_000, seeds=4, seed=5)
    traj = dr.ks_trajectory(m, 2)
    assert abs(res["a_frac"][1] - traj.a_prob[1]) < 0.01
    assert abs(res["a_frac"][0] - traj.a_prob[0]) < 0.01
    assert abs(res["lr"][1] - traj.lr[1]) < 0.01
