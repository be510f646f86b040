import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_kappa, brute_partitionable, random_edges
from partdetect.graph import (
    TOPOLOGY_KINDS,
    DroneParams,
    GenerationError,
    Graph,
    GraphError,
    byz_partitionable_oracle,
    components,
    gen_bridge_attack,
    gen_drone,
    gen_topology,
    induced,
    is_partitioned,
    reachable_component,
    read_graph,
    vertex_connectivity,
    wheel,
    write_graph,
)


def complete(n):
    return Graph.from_edges(n, ((u, v) for u in range(n) for v in range(u + 1, n)))


STAR5 = Graph.from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)])
# six edges, no single cut vertex
FIVE_NODE_BICONNECTED = Graph.from_edges(5, [(0, 2), (1, 2), (4, 2), (0, 1), (1, 3), (3, 4)])


@st.composite
def small_graphs(draw, max_n=8):
    n = draw(st.integers(1, max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Graph.from_edges(n, [e for e, keep in zip(pairs, mask) if keep])


class TestGraphType:
    def test_rejects_self_loops_and_out_of_range(self):
        with pytest.raises(GraphError):
            Graph.from_edges(3, [(1, 1)])
        with pytest.raises(GraphError):
            Graph.from_edges(3, [(0, 3)])

    def test_edges_are_canonical_and_deduplicated(self):
        g = Graph.from_edges(3, [(1, 0), (0, 1), (2, 1)])
        assert g.edges == frozenset({(0, 1), (1, 2)})
        assert g.has_edge(1, 0) and g.has_edge(0, 1)
        assert g.neighbors(1) == frozenset({0, 2})

    def test_file_round_trip(self, tmp_path):
        g = gen_topology("k-regular", 12, 3, seed=7)
        path = tmp_path / "g.txt"
        write_graph(g, path)
        assert read_graph(path) == g

    def test_file_comments_and_bad_header(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("# a path\n3 2\n0 1  # first\n1 2\n")
        assert read_graph(path).edges == frozenset({(0, 1), (1, 2)})
        path.write_text("3 5\n0 1\n")
        with pytest.raises(GraphError):
            read_graph(path)


class TestConnectivity:
    def test_known_values(self):
        assert vertex_connectivity(complete(5)) == 4
        assert vertex_connectivity(Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])) == 1
        assert vertex_connectivity(FIVE_NODE_BICONNECTED) == 2
        assert vertex_connectivity(Graph(1, frozenset())) == 0
        assert vertex_connectivity(Graph.from_edges(4, [(0, 1), (2, 3)])) == 0

    def test_is_partitioned(self):
        two_triangles = Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
        assert is_partitioned(two_triangles)
        assert not is_partitioned(complete(3))

    def test_reachable_component(self):
        assert reachable_component(complete(3), 0) == {0, 1, 2}
        assert reachable_component(Graph.from_edges(4, [(0, 1), (2, 3)]), 0) == {0, 1}
        # c1 - b - c2 with b's edges removed
        bridge = Graph.from_edges(3, [(0, 1), (1, 2)])
        cut = Graph.from_edges(3, [e for e in bridge.edges if 1 not in e])
        assert reachable_component(cut, 0) == {0}

    def test_oracle_examples(self):
        assert byz_partitionable_oracle(STAR5, 1) is True
        assert byz_partitionable_oracle(complete(5), 3) is False
        assert byz_partitionable_oracle(FIVE_NODE_BICONNECTED, 1) is False

    def test_oracle_preconditions(self):
        with pytest.raises(GraphError):
            byz_partitionable_oracle(complete(3), 3)
        with pytest.raises(GraphError):
            byz_partitionable_oracle(complete(3), -1)

    def test_complete_graph_corner(self):
        # With t >= n-1 nothing can be split off a clique, although kappa <= t.
        g = complete(4)
        assert vertex_connectivity(g) == 3
        assert byz_partitionable_oracle(g, 3) is False

    @settings(max_examples=300, deadline=None)
    @given(small_graphs())
    def test_matches_brute_force(self, g):
        assert vertex_connectivity(g) == brute_kappa(g.n, g.edges)

    @settings(max_examples=200, deadline=None)
    @given(small_graphs(), st.integers(0, 3))
    def test_oracle_matches_independent_enumeration(self, g, t):
        if t >= g.n:
            return
        assert byz_partitionable_oracle(g, t) == brute_partitionable(g.n, g.edges, t)

    @settings(max_examples=200, deadline=None)
    @given(small_graphs(), st.integers(0, 3))
    def test_oracle_agrees_with_connectivity_outside_clique_corner(self, g, t):
        if t >= g.n or (g.is_complete and t >= g.n - 1):
            return
        assert byz_partitionable_oracle(g, t) == (vertex_connectivity(g) <= t)

    @settings(max_examples=200, deadline=None)
    @given(small_graphs())
    def test_zero_connectivity_iff_partitioned(self, g):
        if g.n >= 2:
            assert (vertex_connectivity(g) == 0) == is_partitioned(g)

    def test_agrees_with_networkx_on_larger_graphs(self):
        rng = random.Random(11)
        for _ in range(20):
            n = rng.randint(10, 25)
            g = Graph.from_edges(n, random_edges(n, rng.uniform(0.2, 0.6), rng))
            assert vertex_connectivity(g) == nx.node_connectivity(g.to_networkx())

    def test_induced_relabels(self):
        g = Graph.from_edges(5, [(0, 4), (4, 2), (1, 3)])
        h = induced(g, [0, 2, 4])
        assert h.n == 3 and h.edges == frozenset({(0, 2), (1, 2)})
        assert len(components(g)) == 2


class TestGenerators:
    @pytest.mark.parametrize("kind", TOPOLOGY_KINDS)
    @pytest.mark.parametrize("n,k", [(10, 2), (12, 3), (16, 4), (30, 6)])
    def test_families_reach_target_connectivity(self, kind, n, k):
        g = gen_topology(kind, n, k, seed=3)
        assert g.n == n
        kappa = vertex_connectivity(g)
        assert kappa >= k
        if kind == "k-regular":
            assert kappa == k
            assert all(g.degree(i) == k for i in range(n))

    @pytest.mark.parametrize("kind", TOPOLOGY_KINDS)
    def test_deterministic(self, kind):
        assert gen_topology(kind, 20, 4, seed=5) == gen_topology(kind, 20, 4, seed=5)

    def test_regular_seed_matters(self):
        assert gen_topology("k-regular", 30, 4, 1) != gen_topology("k-regular", 30, 4, 2)

    def test_k4_is_the_only_3_regular_graph_on_4_nodes(self):
        assert gen_topology("k-regular", 4, 3, seed=0) == complete(4)

    def test_large_regular(self):
        g = gen_topology("k-regular", 100, 34, seed=0)
        assert g.m == 100 * 34 // 2 and vertex_connectivity(g) == 34

    def test_inadmissible_parameters(self):
        with pytest.raises(GraphError):
            gen_topology("k-regular", 5, 3, 0)  # n*k odd
        with pytest.raises(GraphError):
            gen_topology("k-regular", 4, 4, 0)
        with pytest.raises(GraphError):
            gen_topology("hypercube", 8, 3, 0)
        with pytest.raises(GraphError):
            gen_topology("generalized-wheel", 4, 4, 0)

    def test_small_wheel_with_three_hub_nodes(self):
        g = wheel(5, 3)
        assert g.has_edge(3, 4)
        assert vertex_connectivity(g) == brute_kappa(5, g.edges) == 4

    def test_multipartite_hub_has_no_intra_part_edges(self):
        g = wheel(10, 4, part_size=2)
        assert not g.has_edge(0, 1) and not g.has_edge(2, 3) and g.has_edge(0, 2)
        assert vertex_connectivity(g) == brute_kappa(10, g.edges)

    def test_regular_retry_budget_is_bounded(self, monkeypatch):
        import partdetect.graph as gm

        monkeypatch.setattr(gm, "vertex_connectivity", lambda g: -1)
        with pytest.raises(GenerationError):
            gm.gen_topology("k-regular", 10, 3, 0)


class TestDrone:
    def test_d0_radius_2_4_is_complete(self):
        for seed in range(5):
            assert gen_drone(DroneParams(20, 0.0, 2.4, seed)).is_complete

    def test_d6_is_partitioned(self):
        for radius in (1.2, 2.4):
            for seed in range(5):
                g = gen_drone(DroneParams(20, 6.0, radius, seed))
                assert is_partitioned(g)
                assert len(components(g)) >= 2

    def test_two_nodes_always_connected_at_radius_above_diameter(self):
        g = gen_drone(DroneParams(2, 0.0, 2.01, 4))
        assert g.edges == frozenset({(0, 1)})

    def test_deterministic(self):
        p = DroneParams(20, 2.0, 1.6, 9)
        assert gen_drone(p) == gen_drone(p)

    def test_parameter_validation(self):
        with pytest.raises(GraphError):
            DroneParams(1, 0.0, 1.0, 0)
        with pytest.raises(GraphError):
            DroneParams(5, -1.0, 1.0, 0)
        with pytest.raises(GraphError):
            DroneParams(5, 0.0, 0.0, 0)


class TestBridge:
    def test_minimal_bridge_is_a_path(self):
        g, byz = gen_bridge_attack(1, 1, 1, 0.5, seed=0)
        assert byz == {2}
        assert g.edges == frozenset({(0, 2), (1, 2)})

    def test_single_byzantine_bridge_on_35_nodes(self):
        g, byz = gen_bridge_attack(17, 17, 1, 0.3, seed=4)
        assert g.n == 35 and len(byz) == 1
        assert vertex_connectivity(g) <= 1
        correct = [i for i in range(35) if i not in byz]
        assert is_partitioned(induced(g, correct))

    @pytest.mark.parametrize("seed", range(10))
    def test_byzantine_set_is_a_cut(self, seed):
        g, byz = gen_bridge_attack(5, 5, 3, 0.5, seed)
        correct = [i for i in range(g.n) if i not in byz]
        parts = components(induced(g, correct))
        assert len(parts) == 2
        assert not is_partitioned(g)

    def test_low_density_fails_cleanly(self):
        with pytest.raises(GenerationError):
            gen_bridge_attack(30, 30, 1, 0.001, seed=0)
