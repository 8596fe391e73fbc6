"""Directed acyclic graphs over named nodes.

Nodes keep their declaration order, and every operation that has to
break a tie does so by that order, so enumeration and sorting are
reproducible byte for byte.  Graph values are immutable; operations
return new graphs.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, Tuple

from .errors import (
    CycleError,
    GraphError,
    NodeSetMismatchError,
    OverlapError,
    UnknownNodeError,
)

Edge = Tuple[str, str]


@dataclass(frozen=True)
class Dag:
    """Directed graph with ordered nodes and a set of edges.

    Acyclicity is not enforced at construction time (so a cyclic
    parent structure can still be *reported* by model validation);
    :func:`topological_sort` raises :class:`CycleError` when asked to
    order a cyclic graph.

    Examples
    --------
    >>> g = Dag(("A", "B", "C"), {("A", "B"), ("B", "C")})
    >>> topological_sort(g)
    ('A', 'B', 'C')
    """

    nodes: Tuple[str, ...]
    edges: FrozenSet[Edge] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", frozenset(tuple(e) for e in self.edges))
        seen = set()
        for name in self.nodes:
            if not isinstance(name, str) or not name:
                raise GraphError(f"node names must be nonempty strings, got {name!r}")
            if name in seen:
                raise GraphError(f"duplicate node name {name!r}")
            seen.add(name)
        for parent, child in self.edges:
            if parent not in seen:
                raise UnknownNodeError(f"edge endpoint {parent!r} is not a declared node")
            if child not in seen:
                raise UnknownNodeError(f"edge endpoint {child!r} is not a declared node")
            if parent == child:
                raise GraphError(f"self-loop on {parent!r}")

    def parents(self, x: str) -> Tuple[str, ...]:
        """Parents of ``x`` in declaration order."""
        self._check_node(x)
        return tuple(n for n in self.nodes if (n, x) in self.edges)

    def children(self, x: str) -> Tuple[str, ...]:
        """Children of ``x`` in declaration order."""
        self._check_node(x)
        return tuple(n for n in self.nodes if (x, n) in self.edges)

    def _check_node(self, x: str):
        if x not in self.nodes:
            raise UnknownNodeError(f"unknown node {x!r}")


def topological_sort(dag: Dag) -> Tuple[str, ...]:
    """Order nodes so each appears after all of its parents.

    Ties are broken by declaration order (Kahn's algorithm with an
    ordered frontier), so the result is deterministic.

    Raises
    ------
    CycleError
        If the graph contains a directed cycle; the error carries the
        nodes of one such cycle.
    """
    indegree = {n: 0 for n in dag.nodes}
    for _, child in dag.edges:
        indegree[child] += 1
    order = []
    ready = deque(n for n in dag.nodes if indegree[n] == 0)
    while ready:
        node = ready.popleft()
        order.append(node)
        for child in dag.children(node):
            indegree[child] -= 1
            if indegree[child] == 0:
                ready.append(child)
    if len(order) < len(dag.nodes):
        raise CycleError(_find_cycle(dag, {n for n in dag.nodes if n not in order}))
    return tuple(order)


def _find_cycle(dag: Dag, candidates) -> list:
    """Walk parent links inside ``candidates`` until a node repeats."""
    start = next(n for n in dag.nodes if n in candidates)
    trail, seen = [], {}
    node = start
    while node not in seen:
        seen[node] = len(trail)
        trail.append(node)
        node = next(p for p in dag.parents(node) if p in candidates)
    return trail[seen[node]:] + [node]


def ancestors(dag: Dag, x: str) -> frozenset:
    """All nodes with a directed path to ``x``; excludes ``x``."""
    dag._check_node(x)
    found = set()
    frontier = deque([x])
    while frontier:
        for parent in dag.parents(frontier.popleft()):
            if parent not in found:
                found.add(parent)
                frontier.append(parent)
    return frozenset(found)


def descendants(dag: Dag, x: str) -> frozenset:
    """All nodes reachable from ``x`` via directed paths; excludes ``x``."""
    dag._check_node(x)
    found = set()
    frontier = deque([x])
    while frontier:
        for child in dag.children(frontier.popleft()):
            if child not in found:
                found.add(child)
                frontier.append(child)
    return frozenset(found)


def d_separated(dag: Dag, x: str, y: str, z: Iterable[str]) -> bool:
    """Whether every path between ``x`` and ``y`` is blocked given ``z``.

    Uses active-trail reachability: a trail may pass downward through
    a node outside ``z``, upward through a node outside ``z``, and may
    turn around at a collider only when the collider is in ``z`` or
    has a descendant in ``z``.

    Examples
    --------
    >>> g = Dag(("A", "B", "C"), {("A", "C"), ("B", "C")})
    >>> d_separated(g, "A", "B", set())
    True
    >>> d_separated(g, "A", "B", {"C"})
    False
    """
    z = frozenset(z)
    for node in (x, y, *z):
        dag._check_node(node)
    if x == y:
        raise OverlapError("x and y must be distinct")
    if x in z or y in z:
        raise OverlapError("x and y must not be conditioned on")

    opening = set(z)
    for node in z:
        opening |= ancestors(dag, node)

    # states are (node, came_from_child); the start behaves like an
    # arrival from a virtual child so both directions are explored
    visited = set()
    frontier = deque([(x, True)])
    while frontier:
        node, from_child = frontier.popleft()
        if (node, from_child) in visited:
            continue
        visited.add((node, from_child))
        if from_child:
            if node in z:
                continue
            if node == y:
                return False
            for p in dag.parents(node):
                frontier.append((p, True))
            for c in dag.children(node):
                frontier.append((c, False))
        else:
            if node not in z:
                if node == y:
                    return False
                for c in dag.children(node):
                    frontier.append((c, False))
            if node in opening:
                for p in dag.parents(node):
                    frontier.append((p, True))
    return True


def enumerate_d_separations(dag: Dag, max_cond_size: int) -> list:
    """All d-separated triples (x, y, z) with ``|z| <= max_cond_size``.

    Pairs are unordered and enumerated by declaration order; for each
    pair the conditioning sets run over all subsets of the remaining
    nodes, by size and then by declaration order.  The result order is
    therefore deterministic.
    """
    if max_cond_size < 0:
        raise GraphError("max_cond_size must be nonnegative")
    triples = []
    nodes = dag.nodes
    for i, x in enumerate(nodes):
        for y in nodes[i + 1:]:
            rest = tuple(n for n in nodes if n != x and n != y)
            for size in range(min(max_cond_size, len(rest)) + 1):
                for z in itertools.combinations(rest, size):
                    if d_separated(dag, x, y, z):
                        triples.append((x, y, frozenset(z)))
    return triples


def mutilate(dag: Dag, targets: Iterable[str]) -> Dag:
    """Copy of ``dag`` with every edge into a target removed."""
    targets = frozenset(targets)
    for node in targets:
        dag._check_node(node)
    return Dag(dag.nodes, frozenset(e for e in dag.edges if e[1] not in targets))


def shd(a: Dag, b: Dag) -> int:
    """Structural Hamming distance between two DAGs.

    Counts edge insertions, deletions and reversals needed to turn
    ``a`` into ``b``; a reversal costs 1.
    """
    if set(a.nodes) != set(b.nodes):
        raise NodeSetMismatchError("graphs are over different node sets")
    only_a = a.edges - b.edges
    only_b = b.edges - a.edges
    reversals = sum(1 for (p, c) in only_a if (c, p) in only_b)
    return len(only_a) + len(only_b) - reversals
