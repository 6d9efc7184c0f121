"""Immutable discrete Bayesian network model.

The joint distribution factorizes into one conditional probability table per
variable, conditioned on that variable's parents in a DAG. Variables are
indexed densely ``0..n-1`` in declaration order; every downstream encoding
(one-hot layout, CPT row order) is derived from that order, so a network
instance pins the layout its models and datasets are bound to.

CPT rows are stored row-major over the parent tuple in declared parent order:
row index = ((v_p1 * card_p2 + v_p2) * card_p3 + ...) for parent values v_p.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

# Evidence maps variable index -> observed value index. Possibly empty.
Evidence = Mapping[int, int]

# One probability vector per variable, each over that variable's values.
PosteriorSet = Sequence[np.ndarray]

ROW_SUM_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Network:
    """Discrete Bayesian network. Immutable and thread-safe after build().

    Attributes:
        name: network name from the source file.
        names: variable names in declaration order.
        cards: cardinality of each variable.
        labels: value labels of each variable, in value-index order.
        parents: per-variable tuple of parent indices, in declared order.
        cpts: per-variable array of shape (prod(parent cards), card); row i
            holds P(var = * | parents take the i-th row-major value tuple).
        topo_order: a topological ordering of variable indices.
    """

    name: str
    names: tuple[str, ...]
    cards: tuple[int, ...]
    labels: tuple[tuple[str, ...], ...]
    parents: tuple[tuple[int, ...], ...]
    cpts: tuple[np.ndarray, ...]
    topo_order: tuple[int, ...]
    _index: dict[str, int] = field(repr=False, default_factory=dict)

    @classmethod
    def build(
        cls,
        name: str,
        variables: Sequence[tuple[str, Sequence[str]]],
        parents: Sequence[Sequence[int]],
        cpts: Sequence[np.ndarray],
    ) -> "Network":
        """Validate inputs, compute a topological order and freeze the model.

        Raises ValueError on cycles, shape mismatches, or CPT rows that do
        not sum to 1 within 1e-6.
        """
        names = tuple(v[0] for v in variables)
        labels = tuple(tuple(v[1]) for v in variables)
        cards = tuple(len(lab) for lab in labels)
        n = len(names)
        if len(set(names)) != n:
            raise ValueError("duplicate variable names")
        if len(parents) != n or len(cpts) != n:
            raise ValueError("parents/cpts length must match variable count")
        par = tuple(tuple(int(p) for p in ps) for ps in parents)
        for i, ps in enumerate(par):
            for p in ps:
                if not 0 <= p < n:
                    raise ValueError(f"variable {names[i]}: parent index {p} out of range")
            if len(set(ps)) != len(ps):
                raise ValueError(f"variable {names[i]}: repeated parent")
        tables = []
        for i, cpt in enumerate(cpts):
            rows = int(np.prod([cards[p] for p in par[i]], dtype=np.int64)) if par[i] else 1
            arr = np.asarray(cpt, dtype=np.float64).reshape(rows, cards[i])
            if np.any(arr < 0):
                raise ValueError(f"variable {names[i]}: negative CPT entry")
            sums = arr.sum(axis=1)
            if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
                bad = int(np.argmax(np.abs(sums - 1.0)))
                raise ValueError(
                    f"variable {names[i]}: CPT row {bad} sums to {sums[bad]:.8f}, not 1"
                )
            arr.setflags(write=False)
            tables.append(arr)
        topo = _topological_order(n, par)
        net = cls(
            name=name,
            names=names,
            cards=cards,
            labels=labels,
            parents=par,
            cpts=tuple(tables),
            topo_order=topo,
        )
        net._index.update({nm: i for i, nm in enumerate(names)})
        return net

    @property
    def n_variables(self) -> int:
        return len(self.names)

    @property
    def n_edges(self) -> int:
        return sum(len(ps) for ps in self.parents)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}") from None

    def value_index(self, var: int, label: str) -> int:
        try:
            return self.labels[var].index(label)
        except ValueError:
            raise KeyError(
                f"variable {self.names[var]!r} has no value {label!r}"
            ) from None

    def cpt_row(self, var: int, assignment: Sequence[int]) -> int:
        """Row-major CPT row index for ``var`` given a full assignment."""
        row = 0
        for p in self.parents[var]:
            row = row * self.cards[p] + int(assignment[p])
        return row


def _topological_order(n: int, parents: Sequence[Sequence[int]]) -> tuple[int, ...]:
    children: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n
    for child, ps in enumerate(parents):
        indeg[child] = len(ps)
        for p in ps:
            children[p].append(child)
    ready = sorted(i for i in range(n) if indeg[i] == 0)
    order: list[int] = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    if len(order) != n:
        raise ValueError("cycle detected in network graph")
    return tuple(order)


def check_evidence(net: Network, evidence: Evidence) -> None:
    """Raise ValueError if any observed index or value is out of range."""
    for var, val in evidence.items():
        if not 0 <= var < net.n_variables:
            raise ValueError(f"evidence variable index {var} out of range")
        if not 0 <= val < net.cards[var]:
            raise ValueError(
                f"evidence value {val} out of range for {net.names[var]} "
                f"(cardinality {net.cards[var]})"
            )


def joint_probability(
    net: Network, assignment: Sequence[int], order: Iterable[int] | None = None
) -> float:
    """Probability of a full assignment under the CPT factorization.

    Accumulates in log space to avoid underflow on long products; the result
    does not depend on the accumulation ``order``.
    """
    assignment = np.asarray(assignment, dtype=np.int64)
    if assignment.shape != (net.n_variables,):
        raise ValueError(
            f"assignment must cover all {net.n_variables} variables, "
            f"got shape {assignment.shape}"
        )
    for i, val in enumerate(assignment):
        if not 0 <= val < net.cards[i]:
            raise ValueError(f"value {val} out of range for {net.names[i]}")
    log_p = 0.0
    for i in order if order is not None else range(net.n_variables):
        p = net.cpts[i][net.cpt_row(i, assignment), assignment[i]]
        if p == 0.0:
            return 0.0
        log_p += float(np.log(p))
    return float(np.exp(log_p))


def evidence_dim(net: Network) -> int:
    """Width of the one-hot observation encoding: sum of all cardinalities."""
    return int(sum(net.cards))


def degenerate_posterior(card: int, value: int) -> np.ndarray:
    vec = np.zeros(card)
    vec[value] = 1.0
    return vec


def check_posterior_set(
    net: Network,
    posteriors: PosteriorSet,
    evidence: Evidence | None = None,
    atol: float = ROW_SUM_TOL,
) -> None:
    """Validate normalization, and degeneracy at observed variables."""
    if len(posteriors) != net.n_variables:
        raise ValueError("posterior count does not match variable count")
    for i, vec in enumerate(posteriors):
        vec = np.asarray(vec)
        if vec.shape != (net.cards[i],):
            raise ValueError(f"posterior for {net.names[i]} has shape {vec.shape}")
        if np.any(vec < 0):
            raise ValueError(f"posterior for {net.names[i]} has negative entries")
        if abs(float(vec.sum()) - 1.0) > atol:
            raise ValueError(
                f"posterior for {net.names[i]} sums to {float(vec.sum()):.8f}"
            )
    if evidence:
        for var, val in evidence.items():
            if posteriors[var][val] != 1.0:
                raise ValueError(
                    f"observed variable {net.names[var]} has non-degenerate posterior"
                )
