import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from beta_forge.errors import BudgetError, ValidationError
from beta_forge.tree import (PrunedTree, enumerate_truncation, format_vertex, gca, hop_distances,
                             is_ancestor, make_vertex, pair_tree_distances, parse_vertex,
                             prefix_closure, tree_distance, truncation_size)

vertices = st.sets(st.integers(1, 12), max_size=6).map(lambda s: tuple(sorted(s)))


def bfs_hops(tree):
    # unweighted shortest paths on the truncation graph
    c, p = tree.edges()
    n = len(tree)
    A = coo_matrix((np.ones(len(c)), (c, p)), shape=(n, n))
    return shortest_path(A, directed=False, unweighted=True)


def test_make_vertex():
    assert make_vertex([]) == ()
    assert make_vertex([1, 3, 7]) == (1, 3, 7)
    for bad in ([2, 2], [3, 1], [0, 1], [-1]):
        with pytest.raises(ValidationError):
            make_vertex(bad)


def test_is_ancestor_examples():
    assert is_ancestor((), (1, 2))
    assert is_ancestor((1, 2), (1, 2, 5))
    assert not is_ancestor((1, 3), (1, 2, 5))
    assert not is_ancestor((1, 2), (1, 2))


def test_gca_examples():
    assert gca((1, 2, 5), (1, 3)) == (1,)
    assert gca((2, 4), (3, 5)) == ()
    assert gca((1, 2), (1, 2, 9)) == (1, 2)


def test_tree_distance_examples():
    assert tree_distance((1, 2, 5), (1, 3)) == 3
    assert tree_distance((), (1, 3)) == 2


def test_vertex_text_roundtrip():
    assert format_vertex(()) == "[]"
    assert format_vertex((1, 3, 7)) == "[1,3,7]"
    assert parse_vertex("[1,3,7]") == (1, 3, 7)
    assert parse_vertex("[]") == ()


def test_enumerate_truncation_examples():
    assert enumerate_truncation(0, 3).vertices == [()]
    assert set(enumerate_truncation(1, 3).vertices) == {(), (1,), (2,), (3,)}
    t = enumerate_truncation(2, 2)
    assert len(t) == 7
    assert t.children_of((2,)) == [(2, 3), (2, 4)]


def test_truncation_size_and_budget():
    assert truncation_size(5, 3) == 364
    assert len(enumerate_truncation(5, 3)) == 364
    with pytest.raises(BudgetError):
        enumerate_truncation(10, 10, budget=1000)


def test_bfs_oracle_all_pairs():
    t = enumerate_truncation(5, 3)
    D = bfs_hops(t)
    iu, ju = np.triu_indices(len(t), 1)
    assert np.array_equal(pair_tree_distances(t, iu, ju), D[iu, ju].astype(int))
    assert np.array_equal(hop_distances(t, iu, ju), D[iu, ju].astype(int))


def test_scalar_and_vector_distances_agree():
    t = enumerate_truncation(3, 3)
    iu, ju = np.triu_indices(len(t), 1)
    vec = pair_tree_distances(t, iu, ju)
    scal = [tree_distance(t.vertices[i], t.vertices[j]) for i, j in zip(iu, ju)]
    assert vec.tolist() == scal


@pytest.mark.parametrize("H,b", [(3, 3), (4, 2), (2, 3)])
def test_metric_axioms_exhaustive(H, b):
    t = enumerate_truncation(H, b)
    n = len(t)
    D = np.array([[tree_distance(u, v) for v in t.vertices] for u in t.vertices])
    assert np.array_equal(D, D.T)
    assert np.all((D == 0) == np.eye(n, dtype=bool))
    # D[i, k] <= D[i, j] + D[j, k] for all triples
    assert np.all(D[:, None, :] <= D[:, :, None] + D[None, :, :])


def test_ancestor_distance_is_height_gap():
    t = enumerate_truncation(4, 3)
    for u, v in itertools.combinations(t.vertices, 2):
        if is_ancestor(u, v):
            assert tree_distance(u, v) == len(v) - len(u)


@given(vertices, vertices, vertices)
def test_metric_axioms_random(a, b, c):
    assert tree_distance(a, b) == tree_distance(b, a)
    assert (tree_distance(a, b) == 0) == (a == b)
    assert tree_distance(a, c) <= tree_distance(a, b) + tree_distance(b, c)


@given(vertices, vertices)
def test_distance_splits_at_gca(a, b):
    g = gca(a, b)
    assert tree_distance(a, b) == tree_distance(a, g) + tree_distance(g, b)
    assert a[:len(g)] == g == b[:len(g)]
    assert len(g) == len(a) or len(g) == len(b) or a[len(g)] != b[len(g)]


def test_from_vertices_rebuilds_structure():
    t = enumerate_truncation(3, 2)
    u = PrunedTree.from_vertices(reversed(t.vertices))
    assert u == t


def test_prefix_closure():
    assert prefix_closure([(1, 4), (2,)]) == [(), (1,), (2,), (1, 4)]
