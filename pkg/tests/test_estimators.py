import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unbiased_zakai import (UnbiasedSpec, allocate_levels, builtin_model, cpf_run, cs_estimate,
                            make_level_distribution, mlpf_run, pf_run, replicate_average, st_estimate)
from unbiased_zakai.errors import ConfigurationError, ResolutionError
from unbiased_zakai.estimators import distribution_from_pmf, replicate_seeds, seed_sequence


def test_allocate_levels_example():
    assert allocate_levels(0.5, sigma_constant=False) == (2, [6, 4, 2])
    assert allocate_levels(0.5, sigma_constant=True) == (2, [12, 6, 3])


@settings(max_examples=60, deadline=None)
@given(eps=st.floats(0.01, 0.99), const=st.booleans())
def test_allocate_levels_properties(eps, const):
    L, n = allocate_levels(eps, const)
    assert L == math.ceil(2 * math.log2(1 / eps) - 1e-9)
    assert len(n) == L + 1 and min(n) >= 1
    assert all(a >= b for a, b in zip(n, n[1:]))
    assert 2.0 ** -L <= eps ** 2 * (1 + 1e-9)


def test_halving_epsilon_quadruples_n0():
    for const in (False, True):
        L1, a = allocate_levels(2.0 ** -3, const)
        L2, b = allocate_levels(2.0 ** -4, const)
        # the eps**-2 factor quadruples; the level-dependent factor adds the rest
        growth = 4 * 2 ** ((L2 - L1) / 4) if not const else 4 * (L2 + 1) / (L1 + 1)
        assert b[0] == pytest.approx(a[0] * growth, rel=0.05)
    with pytest.raises(ConfigurationError):
        allocate_levels(1.5, False)


def test_level_distribution_constant_example():
    d = make_level_distribution("sigma_constant", 2)
    raw = np.array([1.0, math.log2(3) ** 2, 3.0])
    assert np.allclose(d.pmf, raw / raw.sum(), rtol=0, atol=1e-15)
    assert d.tails[0] == 1.0
    assert d.tails[2] == pytest.approx(d.pmf[2])
    assert np.all(d.pmf > 0)


def test_level_distribution_nonconstant_and_errors():
    d = make_level_distribution("nonconst", 5, alpha=0.25)
    l = np.arange(6)
    raw = 2.0 ** (-0.75 * l) * (l + 1) * np.log2(l + 2) ** 2
    assert np.allclose(d.pmf, raw / raw.sum(), atol=1e-15)
    for bad in (0.0, 0.5, -1.0):
        with pytest.raises(ConfigurationError):
            make_level_distribution("nonconst", 3, alpha=bad)
    with pytest.raises(ConfigurationError):
        make_level_distribution("geometric", 3)
    with pytest.raises(ConfigurationError):
        distribution_from_pmf([0.5, 0.0, 0.5])


def test_expected_cost_formulas():
    d = make_level_distribution("const", 3)
    t, n, m = 5, 100, 7
    st_cost = t * m * n * sum(d.pmf[l] * 2 ** l for l in range(4))
    cs_cost = t * m * n * sum(d.pmf[l] * sum(2 ** q for q in range(l + 1)) for l in range(4))
    assert d.expected_cost("st", t, n, m) == pytest.approx(st_cost, rel=1e-12)
    assert d.expected_cost("cs", t, n, m) == pytest.approx(cs_cost, rel=1e-12)


def test_mlpf_level_zero_is_pf(ou, path7):
    a = mlpf_run(ou, path7, 0, [40], 3, "ess", 5)
    b = pf_run(ou, path7, 0, 40, 3, "ess", seed_sequence(5).spawn(1)[0])
    assert np.array_equal(a.gamma_phi, b.gamma_phi)
    assert a.cost == 3 * 40


def test_mlpf_cost_and_errors(ou, path7):
    o = mlpf_run(ou, path7, 2, [30, 20, 10], 4, "ess", 1)
    assert o.cost == 4 * (30 + 2 * 20 + 4 * 10)
    with pytest.raises(ConfigurationError):
        mlpf_run(ou, path7, 2, [30, 20], 4)


def test_st_degenerate_distribution_is_pf(ou, path7):
    d = distribution_from_pmf([1.0])
    e = st_estimate(ou, path7, d, 30, 3, "ess", 8)
    filt = seed_sequence(8).spawn(2)[1]
    assert e.level_drawn == 0
    assert np.array_equal(e.value_phi, pf_run(ou, path7, 0, 30, 3, "ess", filt).gamma_phi)
    assert e.cost_units == 3 * 30


def test_cs_and_st_weighting_on_pinned_draw(ou, path7):
    d = make_level_distribution("const", 1)
    for seed in range(20):
        cs = cs_estimate(ou, path7, d, 20, 3, "ess", seed)
        if cs.level_drawn == 1:
            break
    psi0, psi1 = cs.terms[0][0], cs.terms[1][0]
    assert np.allclose(cs.value_phi, psi0 + psi1 / d.tails[1], rtol=1e-15)
    assert cs.cost_units == 3 * 20 * 3
    st_draw = st_estimate(ou, path7, d, 20, 3, "ess", seed)
    L = st_draw.level_drawn
    assert np.allclose(st_draw.value_phi, st_draw.terms[L][0] / d.pmf[L], rtol=1e-15)
    assert cs.cost_units >= st_draw.cost_units


def test_cs_level_zero_draw_is_psi0(ou, path7):
    d = make_level_distribution("const", 2)
    for seed in range(50):
        e = cs_estimate(ou, path7, d, 20, 2, "ess", seed)
        if e.level_drawn == 0:
            assert np.array_equal(e.value_phi, e.terms[0][0])
            assert list(e.terms) == [0]
            return
    pytest.fail("no level-0 draw in 50 seeds")


def test_psi_terms_match_filters(ou, path7):
    d = make_level_distribution("const", 2)
    e = cs_estimate(ou, path7, d, 20, 2, "ess", 3)
    seeds = seed_sequence(3).spawn(d.l_max + 2)[1:]
    for l, (phi_v, one_v) in e.terms.items():
        ref = pf_run(ou, path7, 0, 20, 2, "ess", seeds[0]).gamma_phi if l == 0 else \
            cpf_run(ou, path7, l, 20, 2, "ess", seeds[l]).gamma_diff
        assert np.array_equal(phi_v, ref)


def test_support_beyond_data_rejected(ou, short_path):
    with pytest.raises(ResolutionError):
        st_estimate(ou, short_path, make_level_distribution("const", 6), 10, 2)


def test_replicate_average_single_passthrough(ou, path7):
    spec = UnbiasedSpec("cs", ou, path7, make_level_distribution("const", 2), 20, 3)
    s = replicate_average(spec, 1, (4,))
    single = spec.draw((4, 0))
    assert np.array_equal(s.mean_phi, single.value_phi)
    assert np.all(np.isnan(s.var_phi))
    assert replicate_seeds((4,), 3) == [(4, 0), (4, 1), (4, 2)]


def test_replicate_average_workers_do_not_change_result(ou, path7):
    spec = UnbiasedSpec("st", ou, path7, make_level_distribution("const", 2), 20, 3)
    a = replicate_average(spec, 6, 11, workers=1)
    b = replicate_average(spec, 6, 11, workers=3)
    assert np.array_equal(a.mean_phi, b.mean_phi)
    assert [d.level_drawn for d in a.draws] == [d.level_drawn for d in b.draws]


def test_expected_cost_matches_realized_mean(ou, path7):
    d = make_level_distribution("const", 3)
    spec = UnbiasedSpec("cs", ou, path7, d, 10, 2)
    s = replicate_average(spec, 1000, 2)
    costs = np.array([x.cost_units for x in s.draws])
    assert abs(costs.mean() - spec.expected_cost(1)) < 3 * costs.std(ddof=1) / np.sqrt(costs.size)
    assert s.expected_cost == spec.expected_cost(1000)


@pytest.mark.slow
def test_variance_of_mean_scales_inversely_with_m(ou, path7):
    spec = UnbiasedSpec("st", ou, path7, make_level_distribution("const", 2), 10, 2, phi="one")
    pool = np.array([d.value_one[-1] for d in replicate_average(spec, 8000, 6).draws])
    means_100 = pool[:4000].reshape(40, 100).mean(axis=1)
    means_400 = pool[4000:].reshape(10, 400).mean(axis=1)
    ratio = means_100.var(ddof=1) / means_400.var(ddof=1)
    assert 2.5 <= ratio <= 6 or abs(np.log(ratio / 4)) < 3 * np.sqrt(2 / 39 + 2 / 9)
