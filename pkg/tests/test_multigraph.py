import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nbwalk.multigraph import (
    Dart,
    FamilySpec,
    LoopedTreeOracle,
    Multigraph,
    RegularTreeOracle,
    ResourceGuardError,
    TreePlusCycleOracle,
    ball,
    bouquet,
    build_graph,
    complete_graph,
    cycle_graph,
    graph_from_json,
    load_graph,
    make_oracle,
    petersen_graph,
    validate,
)


def test_single_edge_gives_two_paired_darts():
    g = build_graph([("a", "b")])
    assert [(e.id, e.reversal) for e in g.darts] == [(0, 1), (1, 0)]
    assert g.degree("a") == g.degree("b") == 1


def test_single_loop_is_one_self_reversed_dart():
    g = build_graph([], ["a"])
    (e,) = g.darts
    assert e.reversal == e.id and e.is_loop
    assert g.degree("a") == 1


def test_k4_counts():
    g = complete_graph(4)
    assert len(g.darts) == 12
    assert {g.degree(v) for v in g.vertices} == {3}
    assert g.is_regular(3)


def test_loop_ids_follow_edge_ids():
    g = build_graph([(0, 1), (1, 2)], [2, 0])
    assert [e.id for e in g.darts if e.is_loop] == [4, 5]
    assert g.darts[4].tail == 2 and g.darts[5].tail == 0


def test_incidence_sorted_and_partitioned():
    g = build_graph([(0, 1), (1, 2), (0, 2), (0, 1)], [1])
    ids = [i for v in g.vertices for i in g.incidence[v]]
    assert sorted(ids) == list(range(len(g.darts)))
    for v in g.vertices:
        assert list(g.incidence[v]) == sorted(g.incidence[v])


def test_rejects_empty_vertex_set():
    with pytest.raises(ValueError):
        build_graph([])


def test_rejects_duplicate_vertices():
    with pytest.raises(ValueError):
        build_graph([(0, 1)], vertices=[0, 0, 1])


def test_validate_k4():
    rep = validate(complete_graph(4))
    assert rep.connected and rep.regular_degree == 3 and rep.min_degree == 3 and rep.ok


def test_validate_two_disjoint_edges():
    assert not validate(build_graph([(0, 1), (2, 3)])).connected


def test_validate_single_loop():
    rep = validate(bouquet(1))
    assert rep.connected and rep.regular_degree == 1


def test_validate_reports_broken_involution():
    darts = (Dart(0, "a", "b", 1), Dart(1, "b", "a", 1))
    g = Multigraph(("a", "b"), darts, {"a": (0,), "b": (1,)})
    rep = validate(g)
    assert rep.involution_violations and not rep.ok


def test_graph_json_round_trip(tmp_path):
    g = build_graph([(0, 1), (1, 2)], [2])
    path = tmp_path / "g.json"
    path.write_text(json.dumps(g.to_json()))
    h = load_graph(path)
    assert h.darts == g.darts and h.vertices == g.vertices


def test_graph_from_json_tuple_keys():
    g = graph_from_json({"vertices": [[0, 0], [0, 1]], "edges": [[[0, 0], [0, 1]]]})
    assert g.vertices == ((0, 0), (0, 1))


def test_petersen_is_cubic_with_girth_five():
    g = petersen_graph()
    assert len(g.vertices) == 10 and g.is_regular(3)
    from nbwalk.census import shortest_cycle_through

    assert {shortest_cycle_through(g, v) for v in g.vertices} == {5}


# --- oracles -----------------------------------------------------------------


def test_regular_tree_root():
    t = make_oracle({"family": "regular_tree", "d": 3})
    darts = t.darts_at(t.root)
    assert t.degree(t.root) == 3 and len(darts) == 3
    assert not any(e.is_loop for e in darts)


def test_regular_tree_keys_are_reduced_words():
    t = RegularTreeOracle(3)
    v = t.root
    for a in (0, 1, 1, 2, 0, 0, 1):
        v = t.dart_at(v, a).head
    # 0 1 1 cancels to 0; then 2 0 0 cancels to 0 2; then 1
    assert v == bytes([0, 2, 1])
    assert all(v[i] != v[i + 1] for i in range(len(v) - 1))


def test_looped_tree_has_one_loop_per_vertex():
    t = make_oracle({"family": "looped_tree", "d": 3})
    v = t.root
    for a in (0, 1, 0, 1):
        v = t.dart_at(v, a).head
        darts = t.darts_at(v)
        assert t.degree(v) == 3
        assert sum(e.reversal == e.id for e in darts) == 1


def test_finite_oracle_matches_incidence():
    g = complete_graph(4)
    o = make_oracle(g)
    for v in g.vertices:
        assert [e.id for e in o.darts_at(v)] == list(g.incidence[v])


@pytest.mark.parametrize(
    "spec",
    [
        {"family": "regular_tree", "d": 1},
        {"family": "looped_tree", "d": 2},
        {"family": "cycle", "k": 2},
        {"family": "complete", "m": 1},
        {"family": "bouquet", "j": 0},
        {"family": "tree_plus_cycle", "d": 3, "L": 0},
        {"family": "unknown"},
        {"family": "regular_tree"},
        {"family": "regular_tree", "d": 3, "q": 1},
    ],
)
def test_make_oracle_rejects(spec):
    with pytest.raises(ValueError):
        make_oracle(spec)


def test_family_spec_round_trip():
    spec = FamilySpec.from_dict({"family": "tree_plus_cycle", "d": 3, "L": 4})
    assert spec.to_dict() == {"family": "tree_plus_cycle", "d": 3, "L": 4}


def test_tree_plus_cycle_degrees():
    t = TreePlusCycleOracle(3, 4)
    assert t.degree(t.root) == 5
    cyc = t._cyc
    assert [t.degree(v) for v in cyc[1:]] == [2, 2, 2]
    # walking forward around the cycle returns to the root after L steps
    v = t.root
    for _ in range(4):
        v = t.dart_at(v, 3).head if v == t.root else t.dart_at(v, 0).head
    assert v == t.root


def test_tree_plus_cycle_loop_case():
    t = TreePlusCycleOracle(3, 1)
    assert t.degree(t.root) == 4
    assert sum(e.is_loop for e in t.darts_at(t.root)) == 1


# --- balls ---------------------------------------------------------------------


def test_tree_ball_radius_one():
    b = ball(RegularTreeOracle(3), b"", 1)
    assert len(b.graph.vertices) == 4 and b.graph.n_edges == 3
    assert len(b.boundary) == 3


def test_tree_ball_radius_two():
    b = ball(RegularTreeOracle(3), b"", 2)
    assert len(b.graph.vertices) == 10 and b.graph.n_edges == 9


def test_finite_ball_covers_graph():
    b = ball(complete_graph(4), 0, 10)
    assert len(b.graph.vertices) == 4 and len(b.graph.darts) == 12
    assert not b.boundary


def test_ball_keeps_darts_between_boundary_vertices():
    b = ball(cycle_graph(4), 0, 1)
    # vertices 1 and 3 are both at distance 1 but not adjacent
    assert b.graph.n_edges == 2
    b = ball(cycle_graph(5), 0, 2)
    assert b.graph.n_edges == 5 and b.boundary == {2, 3}


def test_ball_guard():
    with pytest.raises(ResourceGuardError):
        ball(RegularTreeOracle(3), b"", 12, max_vertices=1000)


def test_ball_dart_map_is_consistent():
    o = TreePlusCycleOracle(3, 4)
    b = ball(o, o.root, 3)
    for v in b.graph.vertices:
        if b.distance[v] < 3:
            assert b.graph.degree(v) == o.degree(v)
            for e in o.darts_at(v):
                local = b.graph.darts[b.dart_map[e.id]]
                assert (local.tail, local.head) == (e.tail, e.head)


FAMILIES = [
    {"family": "regular_tree", "d": 3},
    {"family": "regular_tree", "d": 4},
    {"family": "looped_tree", "d": 3},
    {"family": "looped_tree", "d": 4},
    {"family": "tree_plus_cycle", "d": 3, "L": 4},
    {"family": "tree_plus_cycle", "d": 3, "L": 1},
    {"family": "tree_plus_cycle", "d": 2, "L": 2},
    {"family": "cycle", "k": 5},
    {"family": "complete", "m": 4},
    {"family": "bouquet", "j": 3},
    {"family": "petersen"},
]


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: "-".join(str(v) for v in s.values()))
@given(labels=st.lists(st.integers(0, 1000), max_size=30))
def test_involution_on_sampled_vertices(spec, labels):
    o = make_oracle(spec)
    v = o.root
    for a in labels:
        darts = o.darts_at(v)
        assert len(darts) == o.degree(v)
        for e in darts:
            r = next(f for f in o.darts_at(e.head) if f.id == e.reversal)
            assert r.reversal == e.id and r.tail == e.head and r.head == e.tail
            assert (r.id == e.id) == (e.tail == e.head)
            assert o.dart_index(e.tail, e.id) == darts.index(e)
        v = darts[a % len(darts)].head


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("r", [0, 1, 2, 3, 4])
def test_tree_balls_are_trees(d, r):
    b = ball(RegularTreeOracle(d), b"", r)
    assert b.graph.n_edges == len(b.graph.vertices) - 1
    assert validate(b.graph).connected


@pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: "-".join(str(v) for v in s.values()))
def test_ball_degrees_match_oracle(spec):
    o = make_oracle(spec)
    b = ball(o, o.root, 3)
    for v in b.graph.vertices:
        assert b.graph.degree(v) == len(b.graph.incidence[v])
        if b.distance[v] < 3:
            assert b.graph.degree(v) == o.degree(v)


def test_looped_tree_rejects_small_degree():
    with pytest.raises(ValueError):
        LoopedTreeOracle(2)
