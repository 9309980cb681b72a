import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from bayeswalk.bib_core import (
    AgentState, InferenceParams, ParameterError, argmax_with_ties, gaussian_density, init_agent,
    inverse_bayes_update, learned_likelihood, mean_from_likelihood, sample_datum, select_h_max,
    step_agent, update_confidences,
)
from oracles import normal_pdf, ref_step


# ---- parameters and initial state ------------------------------------------ #
def test_default_params():
    p = InferenceParams()
    assert p.epsilon == 1e-8 and p.num_hypotheses == 11 and p.variance == 0.25
    assert p.delta == pytest.approx(math.sqrt(2 * math.pi * 0.25))


@pytest.mark.parametrize("kw", [dict(beta=-0.1), dict(beta=1.5), dict(gamma=2), dict(epsilon=0),
                                dict(variance=0), dict(delta=-1), dict(num_hypotheses=1),
                                dict(num_hypotheses=2.5)])
def test_invalid_params(kw):
    with pytest.raises(ParameterError):
        InferenceParams(**kw)


def test_init_agent_k11():
    s = init_agent(InferenceParams())
    np.testing.assert_allclose(s.means, np.linspace(-0.5, 0.5, 11), atol=1e-15)
    np.testing.assert_array_equal(s.confidences, np.full(11, 1 / 11))


@pytest.mark.parametrize("K,means", [(2, [-0.5, 0.5]), (3, [-0.5, 0.0, 0.5])])
def test_init_agent_small(K, means):
    s = init_agent(InferenceParams(num_hypotheses=K))
    np.testing.assert_array_equal(s.means, means)
    np.testing.assert_array_equal(s.confidences, np.full(K, 1 / K))


# ---- density ---------------------------------------------------------------- #
def test_density_peak_and_one_sd():
    peak = gaussian_density(0.2, 0.2, 0.25)
    assert peak == pytest.approx(0.7978845608, abs=1e-10)
    assert gaussian_density(0.2 + 0.5, 0.2, 0.25) == pytest.approx(peak * math.exp(-0.5), rel=1e-14)


def test_density_matches_scipy():
    # frozen from scipy.stats.norm(0.1, 0.5).pdf(0.3)
    assert gaussian_density(0.3, 0.1, 0.25) == pytest.approx(0.7365402806066467, rel=1e-14)
    assert gaussian_density(0.3, 0.1, 0.25) == pytest.approx(stats.norm(0.1, 0.5).pdf(0.3), rel=1e-14)


def test_density_rejects_bad_variance():
    with pytest.raises(ParameterError):
        gaussian_density(0.0, 0.0, 0.0)


# ---- hypothesis selection and sampling -------------------------------------- #
def test_select_unique_argmax():
    s = AgentState(np.array([0.1, 0.7, 0.2]), np.zeros(3))
    assert select_h_max(s, np.random.default_rng(0)) == 1


def test_tie_break_two_way():
    s = AgentState(np.array([0.5, 0.5]), np.zeros(2))
    rng = np.random.default_rng(1)
    picks = np.array([select_h_max(s, rng) for _ in range(10_000)])
    assert abs(picks.mean() - 0.5) < 0.02


def test_tie_break_uniform_over_k():
    K = 11
    u = np.random.default_rng(2).random(100_000)
    picks = argmax_with_ties(np.full((u.size, K), 1 / K), u)
    counts = np.bincount(picks, minlength=K)
    assert stats.chisquare(counts).pvalue > 0.001


def test_tie_break_only_among_maxima():
    c = np.array([0.3, 0.1, 0.3, 0.3])
    u = np.linspace(0, 0.999, 50)
    picks = set(argmax_with_ties(np.broadcast_to(c, (50, 4)), u).tolist())
    assert picks == {0, 2, 3}


def test_sample_datum_reproducible():
    s = init_agent(InferenceParams())
    a = [sample_datum(s, 3, np.random.default_rng(7)) for _ in range(2)]
    assert a[0] == a[1]


def test_sample_datum_moments():
    s = AgentState(np.array([0.5, 0.5]), np.array([0.2, -0.3]))
    x = sample_datum(s, 0, np.random.default_rng(11), variance=0.25, size=1_000_000)
    assert abs(x.mean() - 0.2) < 0.002
    assert abs(x.var() - 0.25) < 0.002


# ---- confidence update ------------------------------------------------------ #
def test_update_two_hypotheses_against_direct_formula():
    s = AgentState(np.array([0.5, 0.5]), np.array([-0.5, 0.5]))
    p = InferenceParams(beta=0.3, num_hypotheses=2)
    new = update_confidences(s, 0.5, p)
    # direct float evaluation of the forgetting update plus smoothing
    np.testing.assert_allclose(new, [0.11920293567990621, 0.8807970643200937], rtol=1e-13)
    ref, _ = ref_step([0.5, 0.5], [-0.5, 0.5], 0.5, 1, 0.3, 0.0)
    np.testing.assert_allclose(new, ref, rtol=1e-13)


def test_beta_zero_is_bayes_posterior():
    rng = np.random.default_rng(3)
    p = InferenceParams(beta=0.0)
    s = init_agent(p)
    s.confidences = rng.dirichlet(np.ones(11))
    d = 0.13
    lik = np.array([normal_pdf(d, m, 0.25) for m in s.means])
    post = s.confidences * lik / (s.confidences * lik).sum()
    assert np.max(np.abs(update_confidences(s, d, p) - post)) < 2 * 11 * p.epsilon


def test_beta_one_uses_likelihood_only():
    rng = np.random.default_rng(4)
    p = InferenceParams(beta=1.0, epsilon=1e-15)
    s = init_agent(p)
    s.confidences = rng.dirichlet(np.ones(11))
    d = -0.2
    lik = np.array([normal_pdf(d, m, 0.25) for m in s.means])
    np.testing.assert_allclose(update_confidences(s, d, p), lik / lik.sum(), rtol=1e-12)


def test_smoothing_survives_extreme_data():
    p = InferenceParams(beta=0.0)
    s = init_agent(p)
    for d in (50.0, -300.0, 1e4):
        c = update_confidences(s, d, p)
        assert np.all(np.isfinite(c)) and np.all(c > 0)
        assert abs(c.sum() - 1) < 1e-9


@settings(max_examples=200, deadline=None)
@given(conf=st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=12),
       d=st.floats(-3, 3), beta=st.floats(0, 1))
def test_simplex_preservation(conf, d, beta):
    c = np.array(conf) / sum(conf)
    K = len(c)
    s = AgentState(c, np.linspace(-0.5, 0.5, K))
    new = update_confidences(s, d, InferenceParams(beta=beta, num_hypotheses=K))
    assert abs(new.sum() - 1) < 1e-9
    assert new.min() > 0


def test_bayes_reduction_product_form():
    p = InferenceParams(beta=0.0, gamma=0.0, epsilon=1e-15)
    s = init_agent(p)
    data = [0.31, -0.12, 0.05, 0.44, -0.27]
    product = np.array(s.confidences)
    for d in data:
        s, _ = step_agent(s, d, p, h_max=0)
        product = product * np.array([normal_pdf(d, m, 0.25) for m in s.means])
    np.testing.assert_allclose(s.confidences, product / product.sum(), rtol=1e-9)


@pytest.mark.parametrize("beta", [0.1, 0.37, 0.8])
def test_forgetting_telescopes(beta):
    p = InferenceParams(beta=beta, gamma=0.0, epsilon=1e-15)
    rng = np.random.default_rng(5)
    s = init_agent(p)
    s.confidences = rng.dirichlet(np.ones(11))
    c1 = s.confidences.copy()
    data = [0.2, -0.4, 0.1, 0.35]
    t = len(data)
    for d in data:
        s, _ = step_agent(s, d, p, h_max=0)
    w = c1 ** ((1 - beta) ** t)
    for i, d in enumerate(data, 1):
        w = w * np.array([normal_pdf(d, m, 0.25) for m in s.means]) ** ((1 - beta) ** (t - i))
    np.testing.assert_allclose(s.confidences, w / w.sum(), rtol=1e-9)


# ---- inverse Bayes ---------------------------------------------------------- #
def test_gamma_zero_keeps_mean():
    s = init_agent(InferenceParams())
    assert inverse_bayes_update(s, 4, 0.37, InferenceParams(gamma=0.0)) == s.means[4]


def test_upper_clamp_gives_datum():
    p = InferenceParams(gamma=1.0)
    s = AgentState(np.array([1 - 1e-12, 1e-12]), np.array([0.0, 0.4]))
    # gamma = 1 with C(h_max) ~ 1 gives target 1/delta = peak density exactly at the clamp
    assert learned_likelihood(s.confidences, s.means, 0, 0.3, p) == pytest.approx(p.peak_density)
    assert mean_from_likelihood(p.peak_density, 0.3, 0.0, 0.25) == 0.3


def test_learning_moves_toward_datum_and_converges():
    p = InferenceParams(gamma=0.1)
    conf = np.array([1 - 1e-9] + [1e-10] * 10)
    means = np.linspace(-0.5, 0.5, 11)
    d = 0.3
    s = AgentState(conf, means.copy())
    old = s.means[0]
    new = inverse_bayes_update(s, 0, d, p)
    assert old < new < d
    dist = []
    for _ in range(400):
        s.means[0] = inverse_bayes_update(s, 0, d, p)
        dist.append(abs(s.means[0] - d))
    assert all(b <= a for a, b in zip(dist, dist[1:]))
    assert dist[-1] < 1e-3


@settings(max_examples=300, deadline=None)
@given(x0=st.floats(1e-6, 50.0), gamma=st.floats(0.01, 0.99), delta=st.floats(0.2, 5.0))
def test_fixed_point_map_converges_monotonically(x0, gamma, delta):
    fixed = 1 / delta
    x = x0
    seq = [x]
    for _ in range(4000):
        x = delta ** (-gamma) * x ** (1 - gamma)
        seq.append(x)
    if x0 < fixed:
        assert all(b >= a - 1e-15 for a, b in zip(seq, seq[1:]))
    elif x0 > fixed:
        assert all(b <= a + 1e-15 for a, b in zip(seq, seq[1:]))
    assert seq[-1] == pytest.approx(fixed, rel=1e-6)


@settings(max_examples=300, deadline=None)
@given(lik=st.floats(1e-8, 0.79788), d=st.floats(-2, 2), old=st.floats(-2, 2))
def test_root_choice_is_nearest(lik, d, old):
    r = math.sqrt(-2 * 0.25 * math.log(min(lik * math.sqrt(2 * math.pi * 0.25), 1.0)))
    roots = (d + r, d - r)
    assert abs(roots[0] - d) == pytest.approx(abs(roots[1] - d), rel=1e-12)
    new = float(mean_from_likelihood(lik, d, old, 0.25))
    assert new in roots
    assert abs(new - old) == min(abs(roots[0] - old), abs(roots[1] - old))


def test_root_tie_takes_plus():
    assert mean_from_likelihood(0.5, 0.2, 0.2, 0.25) > 0.2


@settings(max_examples=200, deadline=None)
@given(conf=st.lists(st.floats(1e-9, 1.0), min_size=2, max_size=11), d=st.floats(-5, 5),
       gamma=st.floats(0, 1))
def test_clamp_keeps_log_argument_in_unit_interval(conf, d, gamma):
    c = np.array(conf) / sum(conf)
    K = len(c)
    p = InferenceParams(gamma=gamma, num_hypotheses=K)
    target = learned_likelihood(c, np.linspace(-0.5, 0.5, K), int(np.argmax(c)), d, p)
    arg = target * math.sqrt(2 * math.pi * 0.25)
    assert 0 < arg <= 1 + 1e-15


# ---- full step -------------------------------------------------------------- #
def test_step_matches_reference_replay():
    p = InferenceParams(beta=0.3, gamma=0.1)
    data = [0.12, -0.33, 0.41, 0.05, -0.08, 0.27, -0.45, 0.6, 0.02, -0.19]
    s = init_agent(p)
    conf, means = list(s.confidences), list(s.means)
    rng = np.random.default_rng(9)
    for d in data:
        s, rec = step_agent(s, d, p, rng)
        conf, means = ref_step(conf, means, d, rec.h_max, 0.3, 0.1)
        np.testing.assert_allclose(s.confidences, conf, rtol=1e-11, atol=1e-300)
        np.testing.assert_allclose(s.means, means, rtol=1e-12, atol=1e-14)


def test_step_selects_max_of_snapshot():
    p = InferenceParams(beta=0.3, gamma=0.1)
    s = AgentState(np.array([0.1, 0.6, 0.3]), np.array([-0.5, 0.0, 0.5]))
    new, rec = step_agent(s, 0.2, p, np.random.default_rng(0))
    assert rec.h_max == 1
    assert rec.confidence_in_h_max == 0.6
    np.testing.assert_array_equal(rec.means_snapshot, s.means)
    assert new.means[0] == s.means[0] and new.means[2] == s.means[2]


def test_step_pure_bayes_frozen_stream():
    p = InferenceParams(beta=0.0, gamma=0.0)
    s = init_agent(p)
    rng = np.random.default_rng(12)
    data = rng.normal(0.1, 0.5, 100)
    post = s.confidences.copy()
    conf, means = list(s.confidences), list(s.means)
    for d in data:
        s, rec = step_agent(s, d, p, rng)
        conf, means = ref_step(conf, means, d, rec.h_max, 0.0, 0.0)
        lik = np.array([normal_pdf(d, m, 0.25) for m in s.means])
        post = post * lik
        post /= post.sum()
    np.testing.assert_allclose(s.confidences, conf, rtol=1e-10, atol=1e-300)
    # smoothing keeps every weight above ~epsilon, else this is the exact posterior
    np.testing.assert_allclose(s.confidences, post, atol=1e-5)
    np.testing.assert_array_equal(s.means, init_agent(p).means)


def test_step_bit_identical_replay():
    p = InferenceParams(beta=0.3, gamma=0.1)

    def run(seed):
        s, rng = init_agent(p), np.random.default_rng(seed)
        for _ in range(50):
            h = select_h_max(s, rng)
            s, _ = step_agent(s, sample_datum(s, h, rng), p, h_max=h)
        return s

    a, b = run(21), run(21)
    assert np.array_equal(a.confidences, b.confidences) and np.array_equal(a.means, b.means)


def test_step_requires_rng_or_hmax():
    with pytest.raises(ParameterError):
        step_agent(init_agent(InferenceParams()), 0.0, InferenceParams())
