"""Forward sampling and likelihood-weighted sampling baselines.

Likelihood weighting clamps observed variables to their evidence values and
samples the rest in topological order from the CPT row selected by the
already-sampled parents. Each sample carries the product of the CPT
probabilities of the observed values given its sampled parents as its
importance weight; posterior estimates average value indicators under those
weights, normalized by the weight total.

All sampling is driven by an explicit ``numpy.random.Generator``; the same
generator state yields a bit-identical sample stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import Evidence, Network, PosteriorSet, check_evidence


class ZeroWeightTotal(Exception):
    """All sample weights were zero: the evidence was unreachable from the
    drawn parent configurations. Reported rather than silently uniform."""

    def __init__(self, evidence: Evidence, n_samples: int):
        self.evidence = dict(evidence)
        self.n_samples = n_samples
        super().__init__(
            f"all {n_samples} likelihood weights are zero for evidence {dict(evidence)}"
        )


@dataclass(frozen=True)
class WeightedSample:
    """A full assignment and its evidence likelihood weight (1 when the
    evidence is empty)."""

    assignment: np.ndarray
    weight: float


def _row_cumsums(net: Network) -> list[np.ndarray]:
    return [np.cumsum(cpt, axis=1) for cpt in net.cpts]


def _draw_value(cum_row: np.ndarray, rng: np.random.Generator) -> int:
    idx = int(np.searchsorted(cum_row, rng.random(), side="right"))
    return min(idx, len(cum_row) - 1)


def forward_sample(
    net: Network, rng: np.random.Generator, _cumsums: list[np.ndarray] | None = None
) -> np.ndarray:
    """One full assignment drawn from the joint, in topological order."""
    cumsums = _cumsums if _cumsums is not None else _row_cumsums(net)
    assignment = np.zeros(net.n_variables, dtype=np.int64)
    for var in net.topo_order:
        row = net.cpt_row(var, assignment)
        assignment[var] = _draw_value(cumsums[var][row], rng)
    return assignment


def lws_sample(
    net: Network,
    evidence: Evidence,
    rng: np.random.Generator,
    _cumsums: list[np.ndarray] | None = None,
) -> WeightedSample:
    """One likelihood-weighted sample: evidence clamped, rest forward-sampled,
    weight = product over observed variables of P(value | sampled parents)."""
    check_evidence(net, evidence)
    cumsums = _cumsums if _cumsums is not None else _row_cumsums(net)
    assignment = np.zeros(net.n_variables, dtype=np.int64)
    weight = 1.0
    for var in net.topo_order:
        row = net.cpt_row(var, assignment)
        observed = evidence.get(var)
        if observed is not None:
            assignment[var] = observed
            weight *= net.cpts[var][row, observed]
        else:
            assignment[var] = _draw_value(cumsums[var][row], rng)
    return WeightedSample(assignment, float(weight))


def lws_posteriors(
    net: Network,
    evidence: Evidence,
    n_samples: int,
    rng: np.random.Generator,
) -> PosteriorSet:
    """Weighted-frequency posterior estimate from ``n_samples`` draws.

    Each variable/value cell accumulates the weights of samples taking that
    value; the estimate divides by the weight total, so every returned block
    is a proper distribution and observed variables come back degenerate.
    Raises :class:`ZeroWeightTotal` if no sample carries positive weight.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    check_evidence(net, evidence)
    cumsums = _row_cumsums(net)
    n_vars = net.n_variables
    assignments = np.zeros((n_samples, n_vars), dtype=np.int64)
    weights = np.zeros(n_samples)
    for s in range(n_samples):
        sample = lws_sample(net, evidence, rng, _cumsums=cumsums)
        assignments[s] = sample.assignment
        weights[s] = sample.weight
    total = float(weights.sum())
    if total <= 0.0:
        raise ZeroWeightTotal(evidence, n_samples)
    estimates = []
    for var in range(n_vars):
        mass = np.bincount(assignments[:, var], weights=weights, minlength=net.cards[var])
        estimates.append(mass / mass.sum())
    return estimates
