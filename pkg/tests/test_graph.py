import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalsynth.errors import CycleError, OverlapError, UnknownNodeError
from causalsynth.graph import (
    Dag,
    ancestors,
    d_separated,
    descendants,
    enumerate_d_separations,
    mutilate,
    shd,
    topological_sort,
)
from oracles import moral_separation

CHAIN = Dag(("A", "B", "C"), {("A", "B"), ("B", "C")})
FORK = Dag(("A", "B", "C"), {("B", "A"), ("B", "C")})
COLLIDER = Dag(("A", "B", "C"), {("A", "B"), ("C", "B")})
DIAMOND = Dag(("A", "B", "C", "D"),
              {("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")})


def test_dag_rejects_bad_nodes():
    with pytest.raises(UnknownNodeError):
        Dag(("A",), {("A", "B")})
    with pytest.raises(Exception):
        Dag(("A", "A"), set())
    with pytest.raises(Exception):
        Dag(("A",), {("A", "A")})


def test_topological_sort_respects_declaration_order():
    # B and C both depend only on A; declaration breaks the tie
    dag = Dag(("A", "C", "B"), {("A", "B"), ("A", "C")})
    assert topological_sort(dag) == ("A", "C", "B")
    assert topological_sort(CHAIN) == ("A", "B", "C")


def test_topological_sort_reports_cycle():
    dag = Dag(("A", "B", "C"), {("A", "B"), ("B", "C"), ("C", "A")})
    with pytest.raises(CycleError) as err:
        topological_sort(dag)
    cycle = err.value.cycle
    assert len(cycle) >= 4
    assert cycle[0] == cycle[-1]
    # the walk follows parent links, so each step is a reversed edge
    for child, parent in zip(cycle, cycle[1:]):
        assert (parent, child) in {("A", "B"), ("B", "C"), ("C", "A")}


def test_ancestors_descendants():
    assert ancestors(DIAMOND, "D") == {"A", "B", "C"}
    assert ancestors(DIAMOND, "A") == frozenset()
    assert descendants(DIAMOND, "A") == {"B", "C", "D"}
    assert descendants(DIAMOND, "D") == frozenset()
    with pytest.raises(UnknownNodeError):
        ancestors(DIAMOND, "nope")


def test_d_separation_textbook_cases():
    assert not d_separated(CHAIN, "A", "C", set())
    assert d_separated(CHAIN, "A", "C", {"B"})
    assert not d_separated(FORK, "A", "C", set())
    assert d_separated(FORK, "A", "C", {"B"})
    assert d_separated(COLLIDER, "A", "C", set())
    assert not d_separated(COLLIDER, "A", "C", {"B"})


def test_collider_descendant_opens_path():
    dag = Dag(("A", "B", "C", "D"),
              {("A", "B"), ("C", "B"), ("B", "D")})
    assert d_separated(dag, "A", "C", set())
    assert not d_separated(dag, "A", "C", {"D"})


def test_d_separation_is_symmetric():
    assert d_separated(DIAMOND, "B", "C", {"A"}) == \
        d_separated(DIAMOND, "C", "B", {"A"})


def test_d_separation_rejects_overlap():
    with pytest.raises(OverlapError):
        d_separated(CHAIN, "A", "A", set())
    with pytest.raises(OverlapError):
        d_separated(CHAIN, "A", "C", {"A"})


def test_d_separation_matches_moral_oracle_on_asia(asia):
    dag = asia.dag
    names = dag.nodes
    count = 0
    for x, y in itertools.combinations(names, 2):
        others = [n for n in names if n not in (x, y)]
        for size in (0, 1, 2):
            for z in itertools.combinations(others, size):
                got = d_separated(dag, x, y, set(z))
                want = moral_separation(names, dag.edges, x, y, set(z))
                assert got == want, (x, y, z)
                count += 1
    assert count > 500


def _random_dag(draw_edges, nodes):
    edges = set()
    names = [f"n{i}" for i in range(nodes)]
    for i, j in itertools.combinations(range(nodes), 2):
        if draw_edges():
            edges.add((names[i], names[j]))
    return Dag(tuple(names), edges)


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_d_separation_matches_moral_oracle_on_random_dags(data):
    nodes = data.draw(st.integers(min_value=3, max_value=6))
    dag = _random_dag(lambda: data.draw(st.booleans()), nodes)
    names = list(dag.nodes)
    x, y = data.draw(st.permutations(names))[:2]
    others = [n for n in names if n not in (x, y)]
    z = set(data.draw(st.sets(st.sampled_from(others), max_size=3))) if others else set()
    assert d_separated(dag, x, y, z) == \
        moral_separation(names, dag.edges, x, y, z)


def test_enumerate_d_separations_diamond():
    triples = enumerate_d_separations(DIAMOND, 2)
    as_set = {(x, y, z) for x, y, z in triples}
    assert ("B", "C", frozenset({"A"})) in as_set
    assert ("A", "D", frozenset({"B", "C"})) in as_set
    # every listed triple is in fact d-separated
    for x, y, z in triples:
        assert d_separated(DIAMOND, x, y, z)
    # none missing: complement check over all candidates
    names = DIAMOND.nodes
    for x, y in itertools.combinations(names, 2):
        others = [n for n in names if n not in (x, y)]
        for size in (0, 1, 2):
            for z in itertools.combinations(others, size):
                if d_separated(DIAMOND, x, y, frozenset(z)):
                    assert (x, y, frozenset(z)) in as_set


def test_enumerate_d_separations_cond_size_zero():
    triples = enumerate_d_separations(COLLIDER, 0)
    assert triples == [("A", "C", frozenset())]


def test_enumerate_is_deterministic():
    assert enumerate_d_separations(DIAMOND, 2) == \
        enumerate_d_separations(DIAMOND, 2)


def test_fully_connected_has_no_separations():
    nodes = ("A", "B", "C", "D")
    edges = {(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:]}
    assert enumerate_d_separations(Dag(nodes, edges), 2) == []


def test_mutilate_removes_incoming_edges():
    cut = mutilate(DIAMOND, {"D"})
    assert cut.edges == frozenset({("A", "B"), ("A", "C")})
    assert cut.nodes == DIAMOND.nodes
    again = mutilate(DIAMOND, {"A"})
    assert again.edges == DIAMOND.edges


def test_shd_examples():
    assert shd(CHAIN, CHAIN) == 0
    reversed_edge = Dag(("A", "B", "C"), {("B", "A"), ("B", "C")})
    assert shd(CHAIN, reversed_edge) == 1
    missing = Dag(("A", "B", "C"), {("A", "B")})
    assert shd(CHAIN, missing) == 1
    extra = Dag(("A", "B", "C"), {("A", "B"), ("B", "C"), ("A", "C")})
    assert shd(CHAIN, extra) == 1
    empty = Dag(("A", "B", "C"), set())
    assert shd(CHAIN, empty) == 2


def test_shd_symmetric():
    a = Dag(("A", "B", "C"), {("A", "B"), ("C", "B")})
    b = Dag(("A", "B", "C"), {("B", "A")})
    assert shd(a, b) == shd(b, a)
