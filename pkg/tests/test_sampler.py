import numpy as np
import pytest

from bninfer.exact import exact_posteriors
from bninfer.network import check_posterior_set
from bninfer.sampler import (
    WeightedSample,
    ZeroWeightTotal,
    forward_sample,
    lws_posteriors,
    lws_sample,
)

from conftest import chain_net, single_node_net


def test_forward_deterministic_cpt():
    net = single_node_net((1.0, 0.0))
    rng = np.random.default_rng(0)
    for _ in range(50):
        assert forward_sample(net, rng)[0] == 0


def test_forward_frequency_concentrates(single_node):
    rng = np.random.default_rng(123)
    draws = np.array([forward_sample(single_node, rng)[0] for _ in range(100_000)])
    freq = np.mean(draws == 0)
    assert freq == pytest.approx(0.7, abs=0.01)


def test_forward_copies_deterministic_chain(chain_copy):
    rng = np.random.default_rng(1)
    for _ in range(200):
        a, b = forward_sample(chain_copy, rng)
        assert a == b


def test_lws_empty_evidence_weight_is_one(asia_net):
    rng = np.random.default_rng(2)
    for _ in range(20):
        assert lws_sample(asia_net, {}, rng).weight == 1.0


def test_lws_root_clamp_weight(single_node):
    rng = np.random.default_rng(3)
    for _ in range(20):
        sample = lws_sample(single_node, {0: 0}, rng)
        assert sample.weight == pytest.approx(0.7)
        assert sample.assignment[0] == 0


def test_lws_chain_weight_matches_cpt_lookup():
    net = chain_net(p_a=0.4, copy=False)
    rng = np.random.default_rng(4)
    for _ in range(300):
        sample = lws_sample(net, {1: 0}, rng)
        a = int(sample.assignment[0])
        # independent recomputation of the weight from the CPT entry
        assert sample.weight == pytest.approx(net.cpts[1][a, 0])


def test_lws_posteriors_determinism(asia_net):
    ev = {asia_net.index("dysp"): 0}
    first = lws_posteriors(asia_net, ev, 500, np.random.default_rng(99))
    second = lws_posteriors(asia_net, ev, 500, np.random.default_rng(99))
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)


def test_lws_posteriors_normalized_and_degenerate(asia_net):
    ev = {asia_net.index("smoke"): 1, asia_net.index("xray"): 0}
    estimates = lws_posteriors(asia_net, ev, 400, np.random.default_rng(8))
    check_posterior_set(asia_net, estimates, evidence=ev, atol=1e-9)
    for vec in estimates:
        assert abs(float(np.sum(vec)) - 1.0) <= 1e-9


def test_lws_converges_to_prior_marginals(asia_net):
    # empty evidence: weights are all 1, estimate is a plain forward average
    estimates = lws_posteriors(asia_net, {}, 200_000, np.random.default_rng(321))
    exact, _ = exact_posteriors(asia_net, {})
    for est, ref in zip(estimates, exact):
        np.testing.assert_allclose(est, ref, atol=0.01)


def test_lws_fully_clamped(asia_net):
    full = {i: 0 for i in range(asia_net.n_variables)}
    estimates = lws_posteriors(asia_net, full, 5, np.random.default_rng(5))
    for i, vec in enumerate(estimates):
        assert vec[0] == 1.0


def test_lws_zero_weight_total(asia_net):
    # either is a deterministic OR: lung=yes forces either=yes
    ev = {asia_net.index("lung"): 0, asia_net.index("either"): 1}
    with pytest.raises(ZeroWeightTotal):
        lws_posteriors(asia_net, ev, 50, np.random.default_rng(6))


def test_lws_rejects_bad_sample_count(asia_net):
    with pytest.raises(ValueError):
        lws_posteriors(asia_net, {}, 0, np.random.default_rng(0))


def test_weighted_sample_fields(chain_copy):
    sample = lws_sample(chain_copy, {}, np.random.default_rng(0))
    assert isinstance(sample, WeightedSample)
    assert sample.weight == 1.0
    assert sample.assignment.shape == (2,)
