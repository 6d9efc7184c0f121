import itertools

import numpy as np
import pytest

from bninfer.exact import (
    CliqueTree,
    Factor,
    ImpossibleEvidence,
    constant_factor,
    cpt_factor,
    exact_posteriors,
    factor_marginalize,
    factor_product,
    factor_reduce,
    min_degree_order,
    variable_elimination,
)
from bninfer.network import check_posterior_set

from conftest import chain_net, single_node_net


# ---------------------------------------------------------------- oracles
# Brute-force machinery kept deliberately separate from the library code:
# factors are evaluated entry by entry with explicit index arithmetic.

def oracle_factor_value(factor, assignment):
    idx = 0
    for var, card in zip(factor.scope, factor.cards):
        idx = idx * card + assignment[var]
    return factor.values[idx]


def oracle_product(a, b, cards_by_var):
    scope = list(a.scope) + [v for v in b.scope if v not in a.scope]
    entries = []
    for combo in itertools.product(*(range(cards_by_var[v]) for v in scope)):
        assignment = dict(zip(scope, combo))
        entries.append(
            oracle_factor_value(a, assignment) * oracle_factor_value(b, assignment)
        )
    return scope, entries


def enumerate_posteriors(net, evidence):
    """Full-joint enumeration: sums CPT-entry products over every complete
    assignment consistent with the evidence."""
    sums = [np.zeros(c) for c in net.cards]
    p_evidence = 0.0
    for assignment in itertools.product(*(range(c) for c in net.cards)):
        if any(assignment[var] != val for var, val in evidence.items()):
            continue
        p = 1.0
        for i in range(net.n_variables):
            row = 0
            for parent in net.parents[i]:
                row = row * net.cards[parent] + assignment[parent]
            p *= net.cpts[i][row, assignment[i]]
        p_evidence += p
        for i in range(net.n_variables):
            sums[i][assignment[i]] += p
    if p_evidence == 0.0:
        return None, 0.0
    return [s / p_evidence for s in sums], p_evidence


# ---------------------------------------------------------------- factors

def test_product_with_constant_is_identity():
    f = Factor((0,), (2,), np.array([0.2, 0.8]))
    out = factor_product(f, constant_factor(1.0))
    assert out.scope == (0,)
    np.testing.assert_allclose(out.values, f.values)
    out = factor_product(constant_factor(1.0), f)
    np.testing.assert_allclose(out.values, f.values)


def test_product_disjoint_outer():
    a = Factor((0,), (2,), np.array([0.2, 0.8]))
    b = Factor((1,), (2,), np.array([0.5, 0.5]))
    out = factor_product(a, b)
    assert out.scope == (0, 1)
    np.testing.assert_allclose(out.values, [0.1, 0.1, 0.4, 0.4])


def test_product_overlapping_matches_oracle():
    rng = np.random.default_rng(11)
    a = Factor((0, 1), (2, 3), rng.random(6))
    b = Factor((1, 2), (3, 2), rng.random(6))
    out = factor_product(a, b)
    cards = {0: 2, 1: 3, 2: 2}
    scope, entries = oracle_product(a, b, cards)
    assert list(out.scope) == scope
    np.testing.assert_allclose(out.values, entries, rtol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_random_products_match_oracle(seed):
    rng = np.random.default_rng(seed)
    cards_by_var = {v: int(rng.integers(2, 4)) for v in range(4)}
    sa = tuple(sorted(rng.choice(4, size=2, replace=False)))
    sb = tuple(sorted(rng.choice(4, size=2, replace=False)))
    a = Factor(sa, tuple(cards_by_var[v] for v in sa),
               rng.random(int(np.prod([cards_by_var[v] for v in sa]))))
    b = Factor(sb, tuple(cards_by_var[v] for v in sb),
               rng.random(int(np.prod([cards_by_var[v] for v in sb]))))
    out = factor_product(a, b)
    scope, entries = oracle_product(a, b, cards_by_var)
    assert list(out.scope) == scope
    np.testing.assert_allclose(out.values, entries, rtol=1e-12)


def test_marginalize_single_variable_to_scalar():
    f = Factor((3,), (2,), np.array([0.3, 0.7]))
    out = factor_marginalize(f, 3)
    assert out.scope == ()
    assert out.values[0] == pytest.approx(1.0)


def test_marginalize_recovers_disjoint_component():
    a = Factor((0,), (2,), np.array([0.2, 0.8]))
    b = Factor((1,), (2,), np.array([0.5, 0.5]))
    out = factor_marginalize(factor_product(a, b), 1)
    np.testing.assert_allclose(out.values, [0.2, 0.8])


def test_marginalize_matches_nested_loop_oracle():
    rng = np.random.default_rng(3)
    f = Factor((0, 1, 2), (2, 3, 2), rng.random(12))
    out = factor_marginalize(f, 1)
    for v0 in range(2):
        for v2 in range(2):
            expected = sum(
                oracle_factor_value(f, {0: v0, 1: v1, 2: v2}) for v1 in range(3)
            )
            got = oracle_factor_value(out, {0: v0, 2: v2})
            assert got == pytest.approx(expected, rel=1e-12)


def test_marginalize_missing_variable_raises():
    f = Factor((0,), (2,), np.array([0.5, 0.5]))
    with pytest.raises(ValueError, match="not in factor scope"):
        factor_marginalize(f, 5)


def test_reduce_slices_axis():
    f = Factor((0, 1), (2, 2), np.array([1.0, 2.0, 3.0, 4.0]))
    out = factor_reduce(f, 0, 1)
    assert out.scope == (1,)
    np.testing.assert_allclose(out.values, [3.0, 4.0])


def test_variable_elimination_matches_enumeration(asia_net):
    factors = [cpt_factor(asia_net, i) for i in range(asia_net.n_variables)]
    query = asia_net.index("dysp")
    eliminate = [v for v in range(asia_net.n_variables) if v != query]
    result = variable_elimination(factors, eliminate)
    marginal = result.values / result.values.sum()
    expected, _ = enumerate_posteriors(asia_net, {})
    np.testing.assert_allclose(marginal, expected[query], atol=1e-12)


# ---------------------------------------------------------------- posteriors

def test_single_node_prior(single_node):
    posteriors, p = exact_posteriors(single_node, {})
    np.testing.assert_allclose(posteriors[0], [0.7, 0.3])
    assert p == pytest.approx(1.0)


def test_observed_variable_is_exactly_degenerate(asia_net):
    smoke = asia_net.index("smoke")
    posteriors, _ = exact_posteriors(asia_net, {smoke: 1})
    assert posteriors[smoke][1] == 1.0
    assert posteriors[smoke][0] == 0.0


@pytest.mark.parametrize("fixture", ["asia_net", "survey_net"])
def test_posteriors_match_enumeration(fixture, request):
    net = request.getfixturevalue(fixture)
    tree = CliqueTree(net)
    rng = np.random.default_rng(42)
    checked = 0
    while checked < 30:
        evidence = {
            i: int(rng.integers(net.cards[i]))
            for i in range(net.n_variables)
            if rng.random() < 0.4
        }
        expected, p_expected = enumerate_posteriors(net, evidence)
        if expected is None or p_expected < 1e-12:
            with pytest.raises(ImpossibleEvidence):
                tree.posteriors(evidence)
            continue
        got, p_got = tree.posteriors(evidence)
        assert p_got == pytest.approx(p_expected, rel=1e-9)
        for i in range(net.n_variables):
            np.testing.assert_allclose(got[i], expected[i], atol=1e-9)
        checked += 1


def test_posteriors_normalized_on_alarm(alarm_net):
    tree = CliqueTree(alarm_net)
    rng = np.random.default_rng(5)
    done = 0
    while done < 20:
        evidence = {
            i: int(rng.integers(alarm_net.cards[i]))
            for i in range(alarm_net.n_variables)
            if rng.random() < 0.25
        }
        try:
            posteriors, p = tree.posteriors(evidence)
        except ImpossibleEvidence:
            continue
        check_posterior_set(alarm_net, posteriors, evidence=evidence, atol=1e-9)
        assert 0.0 < p <= 1.0 + 1e-9
        done += 1


def test_impossible_evidence_raises(asia_net):
    # either is a deterministic OR of lung and tub
    evidence = {
        asia_net.index("lung"): 0,
        asia_net.index("either"): 1,
    }
    with pytest.raises(ImpossibleEvidence):
        exact_posteriors(asia_net, evidence)


def test_elimination_order_does_not_change_result(survey_net):
    rng = np.random.default_rng(0)
    evidence = {survey_net.index("T"): 1}
    base, p_base = exact_posteriors(survey_net, evidence)
    orders = [
        tuple(reversed(min_degree_order(survey_net))),
        tuple(rng.permutation(survey_net.n_variables)),
        tuple(rng.permutation(survey_net.n_variables)),
    ]
    for order in orders:
        got, p = exact_posteriors(survey_net, evidence, elimination_order=order)
        assert p == pytest.approx(p_base, rel=1e-9)
        for i in range(survey_net.n_variables):
            np.testing.assert_allclose(got[i], base[i], atol=1e-9)


def test_evidence_probability_chains_with_joint(asia_net):
    evidence = {asia_net.index("xray"): 0, asia_net.index("smoke"): 1}
    _, p = exact_posteriors(asia_net, evidence)
    _, p_expected = enumerate_posteriors(asia_net, evidence)
    assert p == pytest.approx(p_expected, rel=1e-9)


def test_full_evidence_gives_joint(chain_copy):
    posteriors, p = exact_posteriors(chain_copy, {0: 0, 1: 0})
    assert p == pytest.approx(0.5)
    for vec in posteriors:
        assert vec.max() == 1.0


def test_disconnected_network():
    net = single_node_net((0.6, 0.4))
    import numpy as np
    from bninfer.network import Network

    two = Network.build(
        "pair",
        [("x", ("0", "1")), ("y", ("0", "1"))],
        [(), ()],
        [np.array([[0.6, 0.4]]), np.array([[0.1, 0.9]])],
    )
    posteriors, p = exact_posteriors(two, {1: 0})
    assert p == pytest.approx(0.1)
    np.testing.assert_allclose(posteriors[0], [0.6, 0.4])
    np.testing.assert_allclose(posteriors[1], [1.0, 0.0])
