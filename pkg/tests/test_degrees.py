import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import dilurank as dr
from dilurank.degrees import DegreeModelError


def test_parse_regular_point_mass():
    assert dr.parse_model("regular:d=3").pmf == {3: 1.0}


def test_parse_mixture_d3():
    assert dr.parse_model("mixture:d=3").pmf == {3: 0.75, 27: 0.25}


def test_parse_explicit_pmf():
    assert dr.parse_model("pmf:1:0.5,2:0.5").pmf == {1: 0.5, 2: 0.5}


def test_parse_poisson_truncation_and_mean():
    for c in (0.5, 1.0, 2.0, 3.0):
        m = dr.parse_model(f"poisson:c={c}")
        assert abs(m.probs.sum() - 1.0) < 1e-12
        # pre-normalization tail mass below 1e-12: check the raw Poisson tail
        k = m.max_degree
        tail = 1.0 - sum(math.exp(-c) * c ** j / math.factorial(j)
                         for j in range(k + 1))
        assert tail < 1e-12
        assert abs(m.mean - c) < 1e-9


@pytest.mark.parametrize("bad", ["", "poisson", "poisson:x=2", "pmf:1:-0.5,2:1.5",
                                 "regular:d=", "nope:1", "pmf:", "pmf:2:0,3:0"])
def test_parse_errors(bad):
    with pytest.raises(DegreeModelError):
        dr.parse_model(bad)


def test_degree_cap_enforced():
    with pytest.raises(DegreeModelError):
        dr.parse_model("mixture:d=30")  # 27000 > default cap
    m = dr.parse_model("mixture:d=30", degree_cap=30_000)
    assert m.max_degree == 27_000


def test_size_biased_point_mass():
    assert dr.size_biased(dr.parse_model("regular:d=3")).pmf == {2: 1.0}


def test_size_biased_two_atom():
    off = dr.size_biased(dr.parse_model("pmf:1:0.5,2:0.5"))
    assert abs(off.pmf[0] - 1 / 3) < 1e-15
    assert abs(off.pmf[1] - 2 / 3) < 1e-15


def test_size_biased_poisson_is_poisson():
    # applying the shift to exp(-c) c^k/k! gives exp(-c) c^(k-1)/(k-1)!
    c = 2.0
    m = dr.parse_model(f"poisson:c={c}")
    off = dr.size_biased(m)
    ref = {k: math.exp(-c) * c ** k / math.factorial(k)
           for k in range(m.max_degree)}
    total = sum(ref.values())
    ref = {k: v / total for k, v in ref.items()}
    tv = 0.5 * sum(abs(off.pmf.get(k, 0.0) - ref[k]) for k in ref)
    assert tv < 1e-10


def test_size_biased_identity_exact():
    m = dr.parse_model("pmf:1:0.2,3:0.5,7:0.3")
    off = dr.size_biased(m)
    for k, p in m.pmf.items():
        if k >= 1:
            assert off.pmf[k - 1] == pytest.approx(k * p / m.mean, rel=1e-14)
    assert abs(sum(off.pmf.values()) - 1.0) < 1e-12


def test_size_biased_degenerate():
    with pytest.raises(DegreeModelError, match="degenerate"):
        dr.size_biased(dr.parse_model("pmf:0:1"))


def test_gf_eval_trivia():
    m3 = dr.parse_model("regular:d=3")
    assert dr.gf_eval(m3, 0.0, 0) == 0.0
    for spec in ("regular:d=3", "poisson:c=2", "mixture:d=3", "pmf:0:0.3,1:0.7"):
        assert dr.gf_eval(dr.parse_model(spec), 1.0, 0) == pytest.approx(1.0, abs=1e-12)


def test_gf_eval_poisson_derivative_analytic():
    # phi'(x) = c exp(c(x-1)); at c=2, x=0.5 this is 2/e
    m = dr.parse_model("poisson:c=2")
    assert dr.gf_eval(m, 0.5, 1) == pytest.approx(2 * math.exp(-1), abs=1e-9)


def test_gf_derivative_matches_finite_difference():
    h = 1e-6
    for spec in ("poisson:c=2", "mixture:d=3", "pmf:1:0.5,2:0.5"):
        m = dr.parse_model(spec)
        for x in np.linspace(0.01, 0.99, 17):
            fd = (dr.gf_eval(m, x + h, 0) - dr.gf_eval(m, x - h, 0)) / (2 * h)
            assert abs(dr.gf_eval(m, x, 1) - fd) < 1e-6


def test_offspring_gf_identity():
    # phi_offspring(x) * phi'(1) == phi'(x) pointwise
    for spec in ("poisson:c=1", "mixture:d=3", "pmf:1:0.5,2:0.5"):
        m = dr.parse_model(spec)
        off = dr.size_biased(m)
        xs = np.linspace(0, 1, 101)
        lhs = np.asarray(off.gf(xs)) * dr.gf_eval(m, 1.0, 1)
        rhs = np.asarray(dr.gf_eval(m, xs, 1))
        assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_logconcavity_poisson_true():
    rep = dr.is_phi2_logconcave(dr.parse_model("poisson:c=2"))
    assert rep.ok and not rep.vacuous


def test_logconcavity_regular_true():
    # phi''(x) = 6x, log is concave
    rep = dr.is_phi2_logconcave(dr.parse_model("regular:d=3"))
    assert rep.ok and not rep.vacuous


def test_logconcavity_mixture_false_with_witness():
    rep = dr.is_phi2_logconcave(dr.parse_model("mixture:d=3"))
    assert not rep.ok
    x = rep.first_violation
    # independent check at the reported x: second difference of
    # log(4.5 x + 175.5 x^25) from the closed-form monomials
    f = lambda t: math.log(4.5 * t + 175.5 * t ** 25)
    h = 1e-4
    assert f(x - h) - 2 * f(x) + f(x + h) > 0


def test_logconcavity_vacuous():
    rep = dr.is_phi2_logconcave(dr.parse_model("pmf:0:0.3,1:0.7"))
    assert rep.vacuous and rep.ok


def test_sampling_matches_pmf(rng):
    m = dr.parse_model("pmf:1:0.25,4:0.5,9:0.25")
    x = m.sample(rng, 200_000)
    for k, p in m.pmf.items():
        assert abs(np.mean(x == k) - p) < 4 * math.sqrt(p * (1 - p) / 200_000)


def test_json_roundtrip():
    m = dr.parse_model("mixture:d=3")
    import json
    payload = json.loads(m.to_json())
    m2 = dr.DegreeModel.from_pmf({int(k): v for k, v in payload["pmf"].items()})
    assert m2.pmf == m.pmf


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(st.integers(min_value=0, max_value=40),
                       st.floats(min_value=0.0, max_value=1.0,
                                 allow_nan=False, allow_infinity=False),
                       min_size=1, max_size=8))
def test_construction_invariants(pmf):
    total = sum(pmf.values())
    if total <= 0:
        with pytest.raises(DegreeModelError):
            dr.DegreeModel.from_pmf(pmf)
        return
    m = dr.DegreeModel.from_pmf(pmf)
    assert abs(m.probs.sum() - 1.0) < 1e-12
    assert m.mean == pytest.approx(float(np.dot(m.degrees, m.probs)), rel=1e-14)
    assert m.second_moment == pytest.approx(
        float(np.dot(m.degrees.astype(float) ** 2, m.probs)), rel=1e-14)
    assert np.all(m.probs > 0)
