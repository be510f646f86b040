import pytest

from partdetect.adversary import (
    AdversaryContext,
    ConfigurationError,
    Protocol,
    Strategy,
    StrategyKind,
    make_adversary,
    strategy_catalog,
)
from partdetect.crypto import keygen, make_directory
from partdetect.graph import Graph, gen_bridge_attack
from partdetect.nectar import Verdict
from scenarios import agreement, bound_violations, correct_ids, forged_edges, safety_and_validity, simulate

SIX = Graph.from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3), (1, 4)])


def test_catalog():
    cat = strategy_catalog()
    assert len(cat) == 7
    assert {e.kind for e in cat} == set(StrategyKind)
    assert all(e.doc for e in cat)


@pytest.mark.parametrize("entry", strategy_catalog(), ids=lambda e: e.kind.value)
def test_every_kind_runs_on_six_nodes(entry):
    for proto in entry.protocols:
        tr, nodes = simulate(proto, SIX, {4, 5}, 2, entry.kind, seed=1)
        assert len(tr.decisions) == 6
        for i in correct_ids(SIX, {4, 5}):
            assert tr.decisions[i] is not None


def test_inapplicable_pairs():
    keys = {i: keygen(i) for i in range(6)}
    ctx = AdversaryContext(SIX, frozenset({5}), 1, {5: keys[5]}, make_directory(keys), {})
    with pytest.raises(ConfigurationError):
        make_adversary(Protocol.NECTAR, "ALL_ONES_FILTER", keys[5], ctx)
    with pytest.raises(ConfigurationError):
        make_adversary(Protocol.MTGV2, "STALE_CHAIN_INJECT", keys[5], ctx)
    with pytest.raises(ConfigurationError):
        make_adversary(Protocol.MTG, "SILENT", keys[4], ctx)  # not Byzantine


def test_context_refuses_correct_keys():
    keys = {i: keygen(i) for i in range(6)}
    with pytest.raises(ConfigurationError):
        AdversaryContext(SIX, frozenset({5}), 1, {0: keys[0], 5: keys[5]}, make_directory(keys), {})


def test_strategy_parsing():
    s = Strategy.parse({"kind": "one_sided", "favored": [1, 2]})
    assert s.kind is StrategyKind.ONE_SIDED and s.favored == {1, 2}
    assert Strategy.parse("silent").kind is StrategyKind.SILENT
    with pytest.raises(ConfigurationError):
        Strategy.parse(3)


def test_silent_neighbour_still_recorded():
    tr, nodes = simulate("NECTAR", SIX, {5}, 1, "SILENT")
    assert all(e.sender != 5 for envs in tr.rounds for e in envs)
    assert (0, 5) in nodes[0].discovered and (4, 5) in nodes[4].discovered


def test_one_sided_bridge_starves_the_other_side():
    g, byz = gen_bridge_attack(4, 4, 1, 0.6, seed=2)
    tr, nodes = simulate("NECTAR", g, byz, 1, "ONE_SIDED")
    favored = set(range(4))
    for i in range(8):
        d = tr.decisions[i]
        assert d.verdict is Verdict.PARTITIONABLE
        if i not in favored:
            assert d.confirmed  # never hears of the favoured side
    assert agreement(tr, byz)


def test_one_sided_respects_explicit_favoured_side():
    g, byz = gen_bridge_attack(3, 3, 1, 0.7, seed=5)
    tr, _ = simulate("MTGV2", g, byz, 1, {"kind": "ONE_SIDED", "favored": [3, 4, 5]})
    got = {i: tr.decisions[i].verdict for i in range(6)}
    assert all(got[i] is Verdict.NOT_PARTITIONABLE for i in (3, 4, 5))
    assert all(got[i] is Verdict.PARTITIONABLE for i in (0, 1, 2))


def test_fake_edges_accepted_but_harmless():
    # two correct triangles joined only through Byzantine 6 and 7, which are not adjacent
    g = Graph.from_edges(8, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 6), (3, 6), (2, 7), (5, 7)])
    byz = frozenset({6, 7})
    tr, nodes = simulate("NECTAR", g, byz, 2, "FAKE_BYZ_EDGES")
    assert all((6, 7) in nodes[i].discovered for i in correct_ids(g, byz))
    assert not forged_edges(nodes, g, byz)
    assert all(tr.decisions[i].verdict is Verdict.PARTITIONABLE for i in correct_ids(g, byz))
    assert bound_violations(tr, byz, fake_possible=True) == []


def test_fake_edge_peers_must_be_byzantine():
    keys = {i: keygen(i) for i in range(6)}
    ctx = AdversaryContext(SIX, frozenset({5}), 1, {5: keys[5]}, make_directory(keys), {})
    with pytest.raises(ConfigurationError):
        make_adversary("NECTAR", {"kind": "FAKE_BYZ_EDGES", "peers": [0]}, keys[5], ctx)


def test_withhold_hides_byzantine_edges():
    tr, nodes = simulate("NECTAR", SIX, {5}, 1, "WITHHOLD_OWN_EDGES")
    for envs in tr.rounds:
        for e in envs:
            if e.sender == 5:
                assert 5 not in e.payload.edge
    # correct neighbours still announce their own edges to 5
    assert all((0, 5) in nodes[i].discovered for i in correct_ids(SIX, {5}))


def test_stale_injection_emits_wrong_length_chains():
    tr, _ = simulate("NECTAR", SIX, {4, 5}, 2, "STALE_CHAIN_INJECT")
    wrong = [e for rnd, envs in enumerate(tr.rounds, 1) for e in envs if e.payload.length != rnd]
    assert wrong and all(e.sender in (4, 5) for e in wrong)


@pytest.mark.parametrize("kind", ["SILENT", "CORRECT_FACADE", "ONE_SIDED", "WITHHOLD_OWN_EDGES",
                                  "FAKE_BYZ_EDGES", "STALE_CHAIN_INJECT"])
@pytest.mark.parametrize("seed", range(3))
def test_nectar_invariants_under_attack(kind, seed):
    g, byz = gen_bridge_attack(4, 5, 2, 0.5, seed)
    tr, nodes = simulate("NECTAR", g, byz, 2, kind, seed=seed)
    assert agreement(tr, byz)
    assert safety_and_validity(tr, byz) == (True, True)
    assert not forged_edges(nodes, g, byz)
    assert bound_violations(tr, byz, fake_possible=kind == "FAKE_BYZ_EDGES") == []
