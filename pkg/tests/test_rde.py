import math

import numpy as np
import pytest

import dilurank as dr
from dilurank.rde import _theta_arrays


def test_theta_all_ones_delta2():
    # N = 2, inner sums = 2, Y = 1/(1 + 2/2) = 1/2 exactly
    off = dr.size_biased(dr.parse_model("regular:d=3"))
    pop = dr.Population(samples=np.ones(3000))
    out = dr.theta_step(pop, off, off, seed=1)
    assert np.all(out.samples == 0.5)


def test_theta_all_zeros_delta2():
    off = dr.size_biased(dr.parse_model("regular:d=3"))
    pop = dr.Population(samples=np.zeros(3000))
    out = dr.theta_step(pop, off, off, seed=1)
    assert np.all(out.samples == 0.0)
    assert out.zero_mass == 1.0


def test_theta_zero_and_one_branches_exact():
    # outer law with mass at 0 gives exact ones; inner zero sums give exact zeros
    m = dr.parse_model("pmf:1:0.6,2:0.4")
    off = dr.size_biased(m)  # support {0, 1}
    pop = dr.Population(samples=np.full(5000, 0.25))
    out = dr.theta_step(pop, off, off, seed=7)
    vals = set(np.unique(out.samples).tolist())
    # N=0 -> 1.0; some inner sum zero -> 0.0; otherwise strictly inside (0,1)
    assert 1.0 in vals and 0.0 in vals
    assert np.all((out.samples >= 0) & (out.samples <= 1))


@pytest.mark.parametrize("p", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_one_step_mass_is_doubled_map(p):
    # nonzero mass after one step from Bernoulli(p) concentrates at xbarbar(p)
    m = dr.parse_model("poisson:c=2")
    off = dr.size_biased(m)
    pool = 60_000
    pop = dr.Population.bernoulli(p, pool)
    out = dr.theta_step(pop, off, off, seed=17)
    target = float(dr.xbarbar(m, p))
    se = math.sqrt(max(target * (1 - target), 1e-4) / pool)
    assert abs(out.nonzero_mass - target) < 4 * se


def test_monotone_coupling_shared_randomness():
    # pointwise-ordered pools stay ordered under a shared-stream step
    m = dr.parse_model("poisson:c=2")
    off = dr.size_biased(m)
    rng_lo = np.random.default_rng(5)
    lo = np.sort(rng_lo.random(4000) * 0.6)
    hi = np.clip(lo + 0.3 * rng_lo.random(4000), 0, 1)
    assert np.all(lo <= hi)
    for it in range(100):
        rng1 = np.random.Generator(np.random.PCG64(np.random.SeedSequence((99, it))))
        rng2 = np.random.Generator(np.random.PCG64(np.random.SeedSequence((99, it))))
        lo = _theta_arrays(lo, off, off, rng1)
        hi = _theta_arrays(hi, off, off, rng2)
        assert np.all(lo <= hi + 1e-15)


def test_solve_rde_regular_start_zero_stays_zero():
    pop, diag = dr.solve_rde(dr.parse_model("regular:d=3"), 0.0, iters=10,
                             pool=2000, seed=0)
    assert np.all(pop.samples == 0.0)
    assert np.all(diag.mean == 0.0)


def test_solve_rde_poisson2_mass_stabilizes_at_q():
    m = dr.parse_model("poisson:c=2")
    q = dr.er_q(2.0).q
    pool = 50_000
    pop, diag = dr.solve_rde(m, q, iters=120, pool=pool, seed=3)
    se = math.sqrt(q * (1 - q) / pool)
    # AR-correlated iteration noise: allow a few standard errors
    assert abs(pop.nonzero_mass - q) < 6 * se
    assert abs(np.mean(diag.nonzero_mass[-30:]) - q) < 4 * se


def test_solve_rde_warns_off_fixed_point():
    with pytest.warns(UserWarning, match="fixed point"):
        dr.solve_rde(dr.parse_model("poisson:c=2"), 0.9, iters=2, pool=500, seed=0)


def test_solve_rde_mean_decreasing_from_above():
    # starting from Bernoulli at a record, means decrease after the first step
    m = dr.parse_model("poisson:c=2")
    q = dr.er_q(2.0).q
    pool = 50_000
    _, diag = dr.solve_rde(m, q, iters=60, pool=pool, seed=9)
    noise = 4.0 / math.sqrt(pool)
    tail = diag.mean[1:]
    assert np.all(np.diff(tail) <= noise)


def test_solve_rde_mixture_two_ordered_solutions():
    m = dr.parse_model("mixture:d=3")
    rs = dr.find_records(m)
    p1, p2 = rs.locations
    pool = 40_000
    pop1, _ = dr.solve_rde(m, p1, iters=80, pool=pool, seed=21)
    pop2, _ = dr.solve_rde(m, p2, iters=80, pool=pool, seed=22)
    assert pop1.nonzero_mass == pytest.approx(p1, abs=0.01)
    assert pop2.nonzero_mass == pytest.approx(p2, abs=0.01)
    # stochastic order: quantile-wise comparison with Monte Carlo slack
    qs = np.linspace(0.01, 0.99, 99)
    q1 = np.quantile(pop1.samples, qs)
    q2 = np.quantile(pop2.samples, qs)
    assert np.all(q2 >= q1 - 0.01)
    assert pop2.mean > pop1.mean


def test_root_mean_regular3_zero_exactly():
    m = dr.parse_model("regular:d=3")
    pop = dr.Population(samples=np.zeros(5000))
    rm = dr.root_mean(pop, m, resamples=20_000, seed=5)
    # every outer draw is 3, every inner sum 0, so Y = 0 exactly
    assert rm.mean == 0.0


def test_root_mean_poisson1_omega_value():
    m = dr.parse_model("poisson:c=1")
    q = dr.er_q(1.0)
    pop, _ = dr.solve_rde(m, q.q, iters=150, pool=60_000, seed=30)
    rm = dr.root_mean(pop, m, resamples=150_000, seed=31)
    assert abs(rm.mean - q.kernel_mass) < max(4 * rm.stderr, 0.004)


def test_root_mean_poisson3():
    m = dr.parse_model("poisson:c=3")
    q3 = dr.er_q(3.0)
    pop, _ = dr.solve_rde(m, q3.q, iters=150, pool=60_000, seed=40)
    rm = dr.root_mean(pop, m, resamples=150_000, seed=41)
    target = float(dr.eval_M(m, q3.q))
    assert abs(rm.mean - target) < max(4 * rm.stderr, 0.004)


def test_population_bernoulli_bookkeeping():
    pop = dr.Population.bernoulli(0.3, 1000)
    assert pop.zero_mass == pytest.approx(0.7)
    assert pop.nonzero_mass == pytest.approx(0.3)
    assert pop.mean == pytest.approx(0.3)
    with pytest.raises(ValueError):
        dr.Population.bernoulli(1.5, 10)


def test_theta_step_deterministic_given_seed():
    m = dr.parse_model("poisson:c=2")
    off = dr.size_biased(m)
    pop = dr.Population.bernoulli(0.4, 10_000)
    a = dr.theta_step(pop, off, off, seed=123).samples
    b = dr.theta_step(pop, off, off, seed=123).samples
    assert np.array_equal(a, b)
