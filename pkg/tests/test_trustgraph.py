import random
from itertools import combinations

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kcast.distribution import Report, ksets_containing
from kcast.netmodel import Config
from kcast.trustgraph import (
    TrustGraph,
    TrustNode,
    build_trust_graph,
    cluster_conflicts,
    decide,
    has_bistar,
    prune,
)

R = TrustNode.recipient


def S(v, j=0):
    return TrustNode.cluster((v,), j)


def graph(edges, h, nodes=None):
    nodes = set(nodes or ()) | {x for e in edges for x in e}
    return TrustGraph.from_edges(nodes, edges, h)


def cycle(m, h):
    return graph([(R(i), R((i + 1) % m)) for i in range(m)], h)


def complete(m, h):
    return graph([(R(a), R(b)) for a, b in combinations(range(m), 2)], h)


def naive_prune(g):
    """Independent fixpoint: recompute every edge's common neighbours until stable."""
    edges = {frozenset(e) for e in g.edges()}
    while True:
        nbr = {v: set() for v in g.nodes}
        for e in edges:
            a, b = tuple(e)
            nbr[a].add(b)
            nbr[b].add(a)
        keep = {e for e in edges if len(nbr[min(e)] & nbr[max(e)]) >= g.h - 2}
        if keep == edges:
            return edges
        edges = keep


def edge_set(g):
    return {frozenset(e) for e in g.edges()}


def rep(owner, recipients, k, value_of):
    ksets = ksets_containing(tuple(recipients), k, owner)
    return Report(owner, ksets, tuple(value_of(t) for t in ksets))


# -- construction --

def test_compliant_sender_graph_is_complete_plus_cluster():
    recips = (1, 2, 3, 4)
    reports = [rep(i, recips, 2, lambda t: (1,)) for i in recips]
    cfg = Config(n=5, k=2, h=5, f=0, d=0)
    g = build_trust_graph(reports, cfg)
    assert g.clusters() == [(1,)]
    expected = {frozenset((R(a), R(b))) for a, b in combinations(recips, 2)}
    expected |= {frozenset((S(1), R(i))) for i in recips}
    assert edge_set(g) == expected


def test_cluster_size_is_one_plus_d():
    recips = (1, 2, 3)
    reports = [rep(i, recips, 2, lambda t: (0,)) for i in recips]
    g = build_trust_graph(reports, Config(n=4, k=2, h=3, f=3, d=2))
    members = [v for v in g.nodes if v.is_cluster]
    assert members == [S(0, 0), S(0, 1), S(0, 2)]
    for a, b in combinations(members, 2):
        assert g.has_edge(a, b)
    assert g.dump().splitlines()[-1] == "S0#2: R1 R2 R3 S0#0 S0#1"


def test_two_opposite_uniform_recipients():
    # k=2 over recipients 1,2,3: 1 uniformly 0, 2 uniformly 1, 3 mixed
    recips = (1, 2, 3)
    r1 = rep(1, recips, 2, lambda t: (0,))
    r2 = rep(2, recips, 2, lambda t: (1,))
    r3 = rep(3, recips, 2, lambda t: (0,) if 1 in t else (1,))
    g = build_trust_graph([r1, r2, r3], Config(n=4, k=2, h=3, f=1, d=0))
    assert edge_set(g) == {
        frozenset((R(1), R(3))),
        frozenset((R(2), R(3))),
        frozenset((S(0), R(1))),
        frozenset((S(1), R(2))),
    }
    assert not g.has_edge(S(0), S(1))


def test_duplicate_owner_rejected():
    r = rep(1, (1, 2), 1, lambda t: (0,))
    with pytest.raises(ValueError):
        build_trust_graph([r, r], Config(n=3, k=1, h=2, f=1))


# -- bi-stars and pruning --

def test_h2_every_edge_is_a_bistar():
    g = cycle(5, 2)
    assert all(has_bistar(g, a, b) for a, b in g.edges())


def test_complete_graph_every_edge_passes():
    g = complete(4, 4)
    assert all(has_bistar(g, a, b) for a, b in g.edges())
    assert prune(g) == g


def test_five_cycle_h3():
    g = cycle(5, 3)
    for a, b in g.edges():
        # oracle: count common neighbours straight from the edge list
        common = [v for v in g.nodes if {frozenset((a, v)), frozenset((b, v))} <= edge_set(g)]
        assert common == []
        assert not has_bistar(g, a, b)
    assert prune(g).edges() == []


def test_missing_edge_is_no_bistar():
    g = cycle(5, 2)
    assert not has_bistar(g, R(0), R(2))


def test_clique_survives_pendant_removed():
    edges = [(R(a), R(b)) for a, b in combinations(range(3), 2)] + [(R(2), R(9))]
    g = graph(edges, 3)
    p = prune(g)
    assert edge_set(p) == {frozenset(e) for e in edges[:3]}
    assert p.nodes == g.nodes


def random_graph(rng, m, p, h):
    nodes = [R(i) for i in range(m)]
    edges = [(a, b) for a, b in combinations(nodes, 2) if rng.random() < p]
    return TrustGraph.from_edges(nodes, edges, h)


@pytest.mark.parametrize("seed", range(20))
def test_prune_matches_naive_fixpoint(seed):
    rng = random.Random(seed)
    g = random_graph(rng, rng.randint(3, 11), rng.uniform(0.2, 0.9), rng.randint(2, 6))
    assert edge_set(prune(g)) == naive_prune(g)


@pytest.mark.parametrize("seed", range(5))
def test_prune_order_independent(seed):
    rng = random.Random(1000 + seed)
    g = random_graph(rng, 9, 0.55, 4)
    ref = edge_set(prune(g))
    for order in range(20):
        assert edge_set(prune(g, random.Random(order))) == ref


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 4), st.data())
def test_clique_survival_and_monotonicity(h, extra, data):
    clique = list(range(h))
    others = list(range(h, h + extra))
    noise = data.draw(st.sets(st.tuples(st.sampled_from(clique + others), st.sampled_from(others or clique))))
    edges = {frozenset((R(a), R(b))) for a, b in combinations(clique, 2)}
    edges |= {frozenset((R(a), R(b))) for a, b in noise if a != b}
    g = graph([tuple(e) for e in edges], h, nodes=[R(i) for i in clique + others])
    p = prune(g)
    assert p.nodes == g.nodes
    assert edge_set(p) <= edge_set(g)
    assert {frozenset((R(a), R(b))) for a, b in combinations(clique, 2)} <= edge_set(p)


# -- decision --

def test_decide_adjacent_to_true_cluster():
    g = prune(graph([(R(1), S(1)), (R(1), R(2)), (R(2), S(1))], 3))
    assert decide(g, 1, 1).value == (1,)


def test_decide_isolated_outputs_zero():
    g = graph([(R(2), S(1))], 2, nodes=[R(1)])
    d = decide(g, 1, 3)
    assert d.value == (0, 0, 0) and not d.anomaly


def test_decide_two_clusters_is_anomaly():
    g = graph([(S(0), R(1)), (R(1), R(2)), (R(2), S(1))], 2)
    d = decide(g, 1, 1)
    assert d.value == (0,)
    assert d.anomaly and d.reached == ((0,), (1,))
    assert cluster_conflicts(g) == [((0,), (1,))]


@pytest.mark.parametrize("seed", range(15))
def test_reachability_matches_networkx(seed):
    rng = random.Random(seed)
    nodes = [R(i) for i in range(6)] + [S(0), S(1)]
    edges = [(a, b) for a, b in combinations(nodes, 2)
             if rng.random() < 0.3 and not (a.is_cluster and b.is_cluster)]
    g = TrustGraph.from_edges(nodes, edges, 2)
    nxg = nx.Graph()
    nxg.add_nodes_from(nodes)
    nxg.add_edges_from(edges)
    for i in range(6):
        comp = nx.node_connected_component(nxg, R(i))
        reached = sorted({v.value for v in comp if v.is_cluster})
        d = decide(g, i, 1)
        assert list(d.reached) == reached
        assert d.value == (reached[0] if len(reached) == 1 else (0,))
    multi = sorted(tuple(sorted({v.value for v in c if v.is_cluster}))
                   for c in nx.connected_components(nxg)
                   if len({v.value for v in c if v.is_cluster}) > 1)
    assert sorted(cluster_conflicts(g)) == multi


def test_labels():
    assert R(3).label() == "R3"
    assert TrustNode.cluster((1, 0, 1, 1, 0), 2).label() == "S16#2"
