import numpy as np
import pytest
from scipy import stats

from unbiased_zakai import builtin_model, cpf_run, pf_run, set_backend, compiled_available
from unbiased_zakai.errors import ConfigurationError, LevelError, ResolutionError
from unbiased_zakai.filters import EVERY_UNIT, ResamplingPolicy
from unbiased_zakai.models import MODEL_NAMES, without_kernel
from unbiased_zakai.observations import log_weight_g


def test_policy_parsing():
    assert ResamplingPolicy.parse("every") == EVERY_UNIT
    assert ResamplingPolicy.parse("ess") == ResamplingPolicy("ess_threshold", 0.25)
    assert ResamplingPolicy.parse("ess:0.5").threshold_fraction == 0.5
    assert str(ResamplingPolicy.parse("ess:0.5")) == "ess:0.5"
    for bad in ("sometimes", "ess:x", "ess:0"):
        with pytest.raises(ConfigurationError):
            ResamplingPolicy.parse(bad)
    assert EVERY_UNIT.fires(1e9, 10)
    assert not ResamplingPolicy().fires(30, 100) and ResamplingPolicy().fires(24.9, 100)


def test_phi_one_gives_unit_eta(ou, short_path):
    o = pf_run(ou, short_path, 2, 50, 4, "every", 1, phi="one")
    assert np.allclose(o.eta_phi, 1.0, rtol=0, atol=1e-15)
    c = cpf_run(ou, short_path, 2, 50, 4, "every", 1, phi="one")
    assert np.allclose(c.eta_diff, 0.0, atol=1e-15)


@pytest.mark.parametrize("policy", ["every", "ess:0.25"])
def test_h_zero_gives_unit_gamma(short_path, policy):
    m = builtin_model("NonlinearDiffusion", obs_scale=0.0)
    o = pf_run(m, short_path, 3, 30, 4, policy, 2, phi="one")
    assert np.array_equal(o.gamma_1, np.ones(4))
    assert np.allclose(o.gamma_phi, 1.0, rtol=0, atol=1e-15)


def _product_formula(model, path, level, n, t_max, seed):
    """Textbook particle filter with resampling at every unit time, one particle and one step at a time."""
    rng = np.random.default_rng(seed)
    K, dt = 2 ** level, 2.0 ** -level
    x = np.tile(model.initial_state, (n, 1)).astype(float)
    out = []
    gamma_prod = 1.0
    for t in range(1, t_max + 1):
        v = rng.standard_normal((n, K, model.d_x)) * np.sqrt(dt)
        w = np.ones(n)
        for i in range(n):
            xi = x[i].copy()
            for k in range(K):
                w[i] *= np.exp(log_weight_g(model, path, level, (t - 1) * K + k, xi))
                xi = xi + model.drift(xi) * dt + model.diffusion(xi) @ v[i, k]
            x[i] = xi
        out.append(gamma_prod * np.mean(w * x[:, 0]))
        gamma_prod *= np.mean(w)
        pmf = w / w.sum()
        if t < t_max:
            # uniforms are drawn after this block's noise and before the next block's
            u = rng.random(n)
            x = x[np.minimum(np.searchsorted(np.cumsum(pmf), u * np.cumsum(pmf)[-1], side="right"), n - 1)]
    return np.array(out)


@pytest.mark.parametrize("name", ["OU", "NonlinearDiffusion"])
def test_every_unit_matches_product_formula(short_path, name):
    m = without_kernel(builtin_model(name))
    for n in (1, 3, 8):
        for level in (0, 2):
            ref = _product_formula(m, short_path, level, n, 3, 17)
            got = pf_run(m, short_path, level, n, 3, "every", 17).gamma_phi
            assert np.allclose(got, ref, rtol=1e-10, atol=0)


@pytest.mark.skipif(not compiled_available(), reason="compiled kernels not built")
@pytest.mark.parametrize("name", MODEL_NAMES)
def test_backends_agree_bitwise(name, short_path):
    m = builtin_model(name)
    try:
        set_backend("python")
        a = pf_run(m, short_path, 3, 40, 4, "ess", 5)
        ca = cpf_run(m, short_path, 3, 40, 4, "ess", 5)
        set_backend("compiled")
        b = pf_run(m, short_path, 3, 40, 4, "ess", 5)
        cb = cpf_run(m, short_path, 3, 40, 4, "ess", 5)
    finally:
        set_backend("auto")
    assert np.array_equal(a.gamma_phi, b.gamma_phi) and np.array_equal(a.ess, b.ess)
    assert np.array_equal(ca.gamma_diff, cb.gamma_diff)


def test_determinism_and_seed_sensitivity(nld, short_path):
    a = pf_run(nld, short_path, 3, 50, 4, "ess", 9)
    b = pf_run(nld, short_path, 3, 50, 4, "ess", 9)
    c = pf_run(nld, short_path, 3, 50, 4, "ess", 10)
    assert np.array_equal(a.gamma_phi, b.gamma_phi)
    assert not np.array_equal(a.gamma_phi, c.gamma_phi)


def test_output_bookkeeping(ou, short_path):
    o = pf_run(ou, short_path, 2, 20, 3, "every", 1)
    assert np.array_equal(o.times, [1, 2, 3])
    assert o.cost == 3 * 20 * 4
    assert np.array_equal(o.resampled, [True, True, False])
    assert np.allclose(o.gamma_phi, o.gamma_1 * o.eta_phi)
    assert np.allclose(o.log_gamma_phi, np.log(np.abs(o.gamma_phi)))
    c = cpf_run(ou, short_path, 2, 20, 3, "every", 1)
    assert c.cost == 3 * 20 * 4 and c.coarse.level == 1
    assert np.isnan(c.meet_fraction[-1]) and np.all(c.meet_fraction[:2] >= 0)


def test_argument_errors(ou, short_path):
    with pytest.raises(LevelError):
        cpf_run(ou, short_path, 0, 10, 2)
    with pytest.raises(ResolutionError):
        pf_run(ou, short_path, 6, 10, 2)
    with pytest.raises(ResolutionError):
        pf_run(ou, short_path, 2, 10, 5)
    with pytest.raises(ConfigurationError):
        pf_run(ou, short_path, 2, 0, 2)
    with pytest.raises(ConfigurationError):
        pf_run(ou, short_path, 2, 10, 2, phi="square")


def test_pf_gamma_agrees_with_oracle_in_mean(ou, path7):
    from unbiased_zakai import oracle_gamma
    g1, _ = oracle_gamma(ou, path7, 1, 3)
    vals = np.array([pf_run(ou, path7, 1, 50, 3, "ess", s, phi="one").gamma_phi[-1] for s in range(300)])
    assert abs(vals.mean() - g1) < 3 * vals.std(ddof=1) / np.sqrt(vals.size)


def test_meet_fraction_exceeds_overlap(nld, path7):
    c = cpf_run(nld, path7, 3, 2000, 6, "every", 4)
    m, r = c.meet_fraction[:-1], c.overlap[:-1]
    assert np.all(m >= r - 3 * np.sqrt(r * (1 - r) / 2000) - 1e-12)


@pytest.mark.slow
def test_cpf_fine_marginal_matches_pf(nld, path7):
    n, reps = 100, 100
    fine, single = [], []
    for s in range(reps):
        c = cpf_run(nld, path7, 3, n, 3, "every", (1, s))
        fine.append(c.fine.eta_phi[-1])
        single.append(pf_run(nld, path7, 3, n, 3, "every", (2, s)).eta_phi[-1])
    assert stats.ks_2samp(fine, single).pvalue > 1e-3
