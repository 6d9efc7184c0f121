"""Exact posterior inference for every variable of a discrete network.

Built on two primitives over factors (non-negative tables indexed by a
variable scope): pointwise product and summing a variable out. Full
inference runs on a calibrated clique tree: the moral graph is triangulated
along a min-degree elimination order, CPTs are assigned to cliques, evidence
enters as indicator factors, and two message passes yield every variable's
unnormalized marginal plus the evidence probability in a single sweep.
Posteriors are identical for any valid elimination order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .network import Evidence, Network, check_evidence

IMPOSSIBLE_EVIDENCE_FLOOR = 1e-12


class ImpossibleEvidence(Exception):
    """Raised when the evidence probability is 0 (below the numeric floor)."""

    def __init__(self, evidence: Evidence, probability: float):
        self.evidence = dict(evidence)
        self.probability = probability
        super().__init__(
            f"evidence has probability {probability:.3e}, treated as impossible"
        )


@dataclass(frozen=True, eq=False)
class Factor:
    """Non-negative table over ``scope``; ``values`` is flat, row-major in
    scope order, with length equal to the product of the cardinalities."""

    scope: tuple[int, ...]
    cards: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        expected = int(np.prod(self.cards, dtype=np.int64)) if self.cards else 1
        if self.values.ndim != 1 or self.values.size != expected:
            raise ValueError(
                f"factor over {self.scope} needs {expected} values, "
                f"got shape {self.values.shape}"
            )

    def table(self) -> np.ndarray:
        return self.values.reshape(self.cards)


def cpt_factor(net: Network, var: int) -> Factor:
    """CPT of ``var`` as a factor with scope (parents..., var)."""
    scope = net.parents[var] + (var,)
    cards = tuple(net.cards[v] for v in scope)
    return Factor(scope, cards, net.cpts[var].ravel())


def indicator_factor(card: int, var: int, value: int) -> Factor:
    values = np.zeros(card)
    values[value] = 1.0
    return Factor((var,), (card,), values)


def constant_factor(value: float = 1.0) -> Factor:
    return Factor((), (), np.array([value]))


def factor_product(a: Factor, b: Factor) -> Factor:
    """Pointwise product over the union scope (a's variables first)."""
    if not a.scope:
        return Factor(b.scope, b.cards, a.values[0] * b.values)
    if not b.scope:
        return Factor(a.scope, a.cards, a.values * b.values[0])
    a_set = set(a.scope)
    extra = tuple(v for v in b.scope if v not in a_set)
    scope = a.scope + extra
    cards = a.cards + tuple(b.cards[b.scope.index(v)] for v in extra)
    lhs = a.table().reshape(a.cards + (1,) * len(extra))
    b_axes = [b.scope.index(v) for v in scope if v in b.scope]
    rhs = b.table().transpose(b_axes)
    shape = tuple(
        card if v in b.scope else 1 for v, card in zip(scope, cards)
    )
    rhs = rhs.reshape(shape)
    return Factor(scope, cards, (lhs * rhs).ravel())


def factor_marginalize(a: Factor, var: int) -> Factor:
    """Sum ``var`` out of the factor."""
    if var not in a.scope:
        raise ValueError(f"variable {var} not in factor scope {a.scope}")
    axis = a.scope.index(var)
    values = a.table().sum(axis=axis)
    scope = tuple(v for v in a.scope if v != var)
    cards = tuple(c for v, c in zip(a.scope, a.cards) if v != var)
    return Factor(scope, cards, np.asarray(values).ravel())


def factor_reduce(a: Factor, var: int, value: int) -> Factor:
    """Slice the factor at ``var = value``, dropping ``var`` from scope."""
    if var not in a.scope:
        raise ValueError(f"variable {var} not in factor scope {a.scope}")
    axis = a.scope.index(var)
    values = np.take(a.table(), value, axis=axis)
    scope = tuple(v for v in a.scope if v != var)
    cards = tuple(c for v, c in zip(a.scope, a.cards) if v != var)
    return Factor(scope, cards, np.asarray(values).ravel())


def _sum_out(factor: Factor, keep: Iterable[int]) -> Factor:
    keep = set(keep)
    axes = tuple(i for i, v in enumerate(factor.scope) if v not in keep)
    if not axes:
        return factor
    values = factor.table().sum(axis=axes)
    scope = tuple(v for v in factor.scope if v in keep)
    cards = tuple(c for v, c in zip(factor.scope, factor.cards) if v in keep)
    return Factor(scope, cards, np.asarray(values).ravel())


def variable_elimination(
    factors: Sequence[Factor], eliminate: Iterable[int]
) -> Factor:
    """Multiply-and-sum-out each variable in turn; the returned factor's
    scope is whatever the inputs mention minus the eliminated variables."""
    pool = list(factors)
    for var in eliminate:
        touched = [f for f in pool if var in f.scope]
        if not touched:
            continue
        pool = [f for f in pool if var not in f.scope]
        product = touched[0]
        for f in touched[1:]:
            product = factor_product(product, f)
        pool.append(factor_marginalize(product, var))
    result = constant_factor(1.0)
    for f in pool:
        result = factor_product(result, f)
    return result


def min_degree_order(net: Network) -> tuple[int, ...]:
    """Greedy min-degree elimination order on the moral graph."""
    neighbors = _moral_graph(net)
    remaining = set(range(net.n_variables))
    order = []
    while remaining:
        var = min(remaining, key=lambda v: (len(neighbors[v] & remaining), v))
        order.append(var)
        nbrs = neighbors[var] & remaining
        for a in nbrs:
            neighbors[a] |= nbrs - {a}
            neighbors[a].discard(var)
        remaining.discard(var)
    return tuple(order)


def _moral_graph(net: Network) -> list[set[int]]:
    neighbors: list[set[int]] = [set() for _ in range(net.n_variables)]
    for var in range(net.n_variables):
        family = net.parents[var] + (var,)
        for a, b in itertools.combinations(family, 2):
            neighbors[a].add(b)
            neighbors[b].add(a)
    return neighbors


class CliqueTree:
    """Calibrated clique tree over a network; reusable across evidence sets.

    Construction cost is paid once; :meth:`posteriors` then runs two message
    passes per query. Disconnected networks yield a forest, with the
    evidence probability combining per-component normalizers.
    """

    def __init__(self, net: Network, elimination_order: Sequence[int] | None = None):
        self.net = net
        order = tuple(elimination_order) if elimination_order is not None else min_degree_order(net)
        if sorted(order) != list(range(net.n_variables)):
            raise ValueError("elimination order must be a permutation of all variables")
        self.cliques = _triangulation_cliques(net, order)
        self.edges, self.component = _junction_forest(self.cliques)
        self.neighbors: list[list[int]] = [[] for _ in self.cliques]
        for a, b in self.edges:
            self.neighbors[a].append(b)
            self.neighbors[b].append(a)
        # smallest clique containing each variable, used for marginals and
        # evidence indicators
        self.home = [
            min(
                (k for k, c in enumerate(self.cliques) if v in c),
                key=lambda k: len(self.cliques[k]),
            )
            for v in range(net.n_variables)
        ]
        self.base = self._base_potentials()
        self.schedule, self.roots = _message_schedule(
            len(self.cliques), self.neighbors, self.component
        )

    def _base_potentials(self) -> list[Factor]:
        assigned: list[list[Factor]] = [[] for _ in self.cliques]
        for var in range(self.net.n_variables):
            family = set(self.net.parents[var]) | {var}
            hosts = [k for k, c in enumerate(self.cliques) if family <= set(c)]
            if not hosts:
                raise RuntimeError(f"no clique covers the family of variable {var}")
            assigned[min(hosts, key=lambda k: len(self.cliques[k]))].append(
                cpt_factor(self.net, var)
            )
        potentials = []
        for k, clique in enumerate(self.cliques):
            pot = constant_factor(1.0)
            for f in assigned[k]:
                pot = factor_product(pot, f)
            # materialize the full clique scope so messages always align
            for v in clique:
                if v not in pot.scope:
                    pot = factor_product(
                        pot, Factor((v,), (self.net.cards[v],), np.ones(self.net.cards[v]))
                    )
            potentials.append(pot)
        return potentials

    def posteriors(self, evidence: Evidence) -> tuple[list[np.ndarray], float]:
        """All per-variable posteriors plus the evidence probability.

        Observed variables come back exactly degenerate. Raises
        :class:`ImpossibleEvidence` when P(evidence) falls below 1e-12,
        which separates structural zeros from underflow.
        """
        check_evidence(self.net, evidence)
        pots = list(self.base)
        for var, val in evidence.items():
            k = self.home[var]
            pots[k] = factor_product(
                pots[k], indicator_factor(self.net.cards[var], var, val)
            )
        messages: dict[tuple[int, int], Factor] = {}
        for src, dst in self.schedule:
            product = pots[src]
            for other in self.neighbors[src]:
                if other != dst:
                    product = factor_product(product, messages[(other, src)])
            sepset = set(self.cliques[src]) & set(self.cliques[dst])
            messages[(src, dst)] = _sum_out(product, sepset)

        beliefs = []
        for k in range(len(self.cliques)):
            belief = pots[k]
            for other in self.neighbors[k]:
                belief = factor_product(belief, messages[(other, k)])
            beliefs.append(belief)

        component_z = {}
        for root in self.roots:
            component_z[self.component[root]] = float(beliefs[root].values.sum())
        p_evidence = 1.0
        for z in component_z.values():
            p_evidence *= z
        if not np.isfinite(p_evidence) or p_evidence < IMPOSSIBLE_EVIDENCE_FLOOR:
            raise ImpossibleEvidence(evidence, p_evidence)

        result = []
        for var in range(self.net.n_variables):
            belief = beliefs[self.home[var]]
            unnorm = _sum_out(belief, {var}).values
            total = float(unnorm.sum())
            if total <= 0.0:
                raise ImpossibleEvidence(evidence, 0.0)
            result.append(unnorm / total)
        return result, p_evidence


def _triangulation_cliques(
    net: Network, order: Sequence[int]
) -> list[tuple[int, ...]]:
    neighbors = _moral_graph(net)
    alive = set(range(net.n_variables))
    candidates: list[frozenset[int]] = []
    for var in order:
        clique = (neighbors[var] & alive) | {var}
        candidates.append(frozenset(clique))
        nbrs = neighbors[var] & alive
        for a in nbrs:
            neighbors[a] |= nbrs - {a}
        alive.discard(var)
    maximal: list[frozenset[int]] = []
    for c in sorted(candidates, key=len, reverse=True):
        if not any(c <= m for m in maximal):
            maximal.append(c)
    return [tuple(sorted(c)) for c in maximal]


def _junction_forest(
    cliques: list[tuple[int, ...]],
) -> tuple[list[tuple[int, int]], list[int]]:
    """Maximum-weight spanning forest over pairwise sepset sizes; for cliques
    from a triangulation this satisfies the running intersection property."""
    n = len(cliques)
    weights = []
    for a, b in itertools.combinations(range(n), 2):
        w = len(set(cliques[a]) & set(cliques[b]))
        if w > 0:
            weights.append((-w, a, b))
    weights.sort()
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges = []
    for _, a, b in weights:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            edges.append((a, b))
    component = [find(k) for k in range(n)]
    return edges, component


def _message_schedule(
    n: int, neighbors: list[list[int]], component: list[int]
) -> tuple[list[tuple[int, int]], list[int]]:
    """Upward then downward edge orderings for each tree in the forest."""
    roots = []
    seen_components = set()
    for k in range(n):
        if component[k] not in seen_components:
            seen_components.add(component[k])
            roots.append(k)
    schedule: list[tuple[int, int]] = []
    for root in roots:
        parent_of = {root: None}
        bfs = [root]
        order = []
        while bfs:
            node = bfs.pop(0)
            order.append(node)
            for nb in neighbors[node]:
                if nb not in parent_of:
                    parent_of[nb] = node
                    bfs.append(nb)
        for node in reversed(order):
            if parent_of[node] is not None:
                schedule.append((node, parent_of[node]))
        for node in order:
            if parent_of[node] is not None:
                schedule.append((parent_of[node], node))
    return schedule, roots


def exact_posteriors(
    net: Network,
    evidence: Evidence,
    elimination_order: Sequence[int] | None = None,
) -> tuple[list[np.ndarray], float]:
    """Posterior distribution of every variable given the evidence, plus the
    evidence probability. One-shot convenience; callers issuing many queries
    against the same network should build a :class:`CliqueTree` once."""
    return CliqueTree(net, elimination_order).posteriors(evidence)
