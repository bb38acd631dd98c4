import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hubsolve import mincut
from hubsolve.mincut import CapacityGraph, first_violated_cut, gomory_hu, max_flow
from oracles import brute_min_cut


def _sym(rng, n, density=0.6):
    A = rng.uniform(0, 10, size=(n, n)) * (rng.random((n, n)) < density)
    A = np.triu(A, 1)
    return A + A.T


def test_single_arc():
    cap = np.zeros((2, 2))
    cap[0, 1] = 5
    val, S = max_flow(CapacityGraph(cap), 0, 1)
    assert val == 5 and S == {0}


def test_parallel_paths():
    cap = np.zeros((4, 4))
    cap[0, 1] = cap[1, 3] = 3
    cap[0, 2] = cap[2, 3] = 4
    val, S = max_flow(CapacityGraph(cap), 0, 3)
    assert val == 7
    assert 0 in S and 3 not in S


def test_same_endpoints_rejected():
    with pytest.raises(ValueError):
        max_flow(CapacityGraph(np.ones((3, 3))), 1, 1)


def test_tiny_capacities_dropped():
    g = CapacityGraph(np.array([[0, 1e-12], [1e-12, 0]]))
    assert g.cap.sum() == 0


def test_negative_capacity_rejected():
    with pytest.raises(ValueError):
        CapacityGraph(np.array([[0, -1.0], [0, 0]]))


@pytest.mark.parametrize("seed", range(8))
def test_max_flow_matches_bipartitions(seed):
    rng = np.random.default_rng(seed)
    cap = rng.uniform(0, 5, size=(6, 6)) * (rng.random((6, 6)) < 0.5)
    g = CapacityGraph(cap)
    val, S = max_flow(g, 0, 5)
    assert val == pytest.approx(brute_min_cut(g.cap, 0, 5))
    assert g.cut_value(S) == pytest.approx(val)


def test_relabeling_interior_nodes(rng):
    cap = rng.uniform(0, 5, size=(6, 6))
    perm = np.array([0, 3, 1, 4, 2, 5])       # fixes 0 and 5
    P = cap[np.ix_(perm, perm)]
    a, _ = max_flow(CapacityGraph(cap), 0, 5)
    b, _ = max_flow(CapacityGraph(P), 0, 5)
    assert a == pytest.approx(b)


def test_two_node_tree():
    T = gomory_hu(CapacityGraph(np.array([[0, 7.0], [7, 0]])))
    assert T.label[1] == 7 and T.parent[1] == 0


def test_star_leaf_labels():
    caps = [2.0, 5.0, 1.5, 4.0]
    A = np.zeros((5, 5))
    for k, v in enumerate(caps, start=1):
        A[0, k] = A[k, 0] = v
    T = gomory_hu(CapacityGraph(A, directed=False))
    for k, v in enumerate(caps, start=1):
        assert T.path_min(0, k) == v


def test_asymmetric_rejected():
    with pytest.raises(ValueError):
        gomory_hu(CapacityGraph(np.array([[0, 1.0], [2, 0]])))


def test_exactly_n_minus_one_flows(monkeypatch, rng):
    calls = []
    real = mincut.max_flow
    monkeypatch.setattr(mincut, "max_flow", lambda *a: calls.append(1) or real(*a))
    gomory_hu(CapacityGraph(_sym(rng, 7), directed=False))
    assert len(calls) == 6


@pytest.mark.parametrize("seed", range(5))
def test_tree_all_pairs_seven_nodes(seed):
    rng = np.random.default_rng(100 + seed)
    A = _sym(rng, 7)
    T = gomory_hu(CapacityGraph(A, directed=False))
    for u, v in itertools.combinations(range(7), 2):
        assert T.path_min(u, v) == pytest.approx(brute_min_cut(A, u, v))


@pytest.mark.parametrize("seed", range(5))
def test_tree_sides_are_min_cuts(seed):
    rng = np.random.default_rng(200 + seed)
    A = _sym(rng, 6)
    g = CapacityGraph(A, directed=False)
    T = gomory_hu(g)
    for u in range(1, 6):
        assert g.cut_value(T.side(u)) == pytest.approx(T.label[u])


def test_first_violated_never_hit():
    g = CapacityGraph(np.ones((5, 5)), directed=False)
    assert first_violated_cut(g, lambda S: False) is None


def test_first_violated_early_stop(monkeypatch):
    calls = []
    real = mincut.max_flow
    monkeypatch.setattr(mincut, "max_flow", lambda *a: calls.append(1) or real(*a))
    g = CapacityGraph(np.ones((5, 5)), directed=False)
    hit = first_violated_cut(g, lambda S: True)
    assert hit is not None and len(calls) == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.floats(0, 10), min_size=n * n, max_size=n * n),
    st.integers(0, 2 ** n - 1))))
def test_reported_cut_passes_predicate(data):
    n, vals, code = data
    A = np.array(vals).reshape(n, n)
    target = frozenset(i for i in range(n) if code >> i & 1)
    g = CapacityGraph.symmetrized(A)
    seen = []

    def pred(S):
        seen.append(S)
        return S == target
    hit = first_violated_cut(g, pred)
    if hit is not None:
        assert pred(hit)
    else:
        assert target not in seen
