import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beta_forge.embeddings import Embedding, certify, james_embedding
from beta_forge.errors import PreconditionError, ValidationError
from beta_forge.modulus import BetaConfig, config_value
from beta_forge.pruned import GreedyTree, greedy_pruned, verify_pruned
from beta_forge.selfimprove import (ModulusProvider, fork_geometry, improve_step, materialize_support,
                                    random_walk_embedding, run)
from beta_forge.spaces import SeqSpace
from beta_forge.tree import PrunedTree

LINF2 = SeqSpace(math.inf, 2)


def fork(points, child=(0.5, 0.5), space=LINF2):
    """Root, one child, and one grandchild per candidate point."""
    k = len(points)
    V = [(), (1,)] + [(1, j) for j in range(2, k + 2)]
    P = [-1, 0] + [1] * k
    tree = PrunedTree(V, P, 0)
    table = {(): (0.0, 0.0), (1,): child}
    table.update({(1, j): p for j, p in zip(range(2, k + 2), points)})
    return tree, Embedding(space, table, source=tree)


def test_selects_closest_grandchild():
    tree, emb = fork([(1, 1), (0.5, 0), (1, 0)])
    refined, stats = improve_step(tree, emb, 0.1)
    (sel,) = stats.selections
    assert sel.index == 1 and sel.chosen == (1, 3)
    assert sel.distance == 0.5 and sel.candidates == 3
    assert refined.vertices == [(), (1, 3)]


def test_ties_pick_smallest_index():
    tree, emb = fork([(1, 0), (0, 1), (-1, 0)])
    _, stats = improve_step(tree, emb, 0.1)
    assert stats.selections[0].index == 0


def test_single_candidate_forced():
    tree, emb = fork([(5, 5)])
    _, stats = improve_step(tree, emb, 0.1)
    sel = stats.selections[0]
    assert sel.index == 0 and sel.distance == 5 and math.isinf(sel.s)


def test_fork_geometry_values():
    tree, emb = fork([(1, 1), (0.5, 0), (1, 0)])
    dist, r, s = fork_geometry(emb, (), (1,), [(1, 2), (1, 3), (1, 4)])
    assert dist.tolist() == [1, 0.5, 1]
    assert r == 0.5 and s == 0.5


def test_improve_step_rejects_gamma():
    tree, emb = fork([(1, 1)])
    with pytest.raises(ValidationError):
        improve_step(tree, emb, 0.0)


def _random_table(tree, space, seed):
    rng = np.random.default_rng(seed)
    return Embedding(space, {v: rng.normal(size=space.dim) for v in tree.vertices}, source=tree)


@settings(max_examples=25)
@given(st.integers(0, 2**31), st.sampled_from([1.0, 2.0, math.inf]))
def test_selection_is_an_admissible_configuration(seed, p):
    # the rescaled candidates around phi(child) form a feasible configuration
    # whose value is exactly chosen / (2r)
    space = SeqSpace(p, 3)
    tree = greedy_pruned(0, 2, 4)
    emb = _random_table(tree, space, seed)
    _, stats = improve_step(tree, emb, 0.1)
    for sel in stats.selections:
        c = emb.point(sel.child)
        cands = tree.children_of(sel.child)
        pts = (emb.points(cands) - c) / sel.r
        cfg = BetaConfig(space, (emb.point(sel.node) - c) / sel.r, pts, sel.s / sel.r)
        assert config_value(cfg, eps=1e-12) == pytest.approx(sel.distance / (2 * sel.r), rel=1e-12)


def test_bound_with_zero_modulus_always_holds(rng):
    tree = greedy_pruned(0, 4, 3)
    emb = _random_table(tree, SeqSpace(2, 3), 5)
    trace = run(emb, certify(emb).gamma, 2, modulus=ModulusProvider(emb.space, "const", const=0.0))
    assert trace.bounds_pass is True
    assert all(s.bound == pytest.approx(2 * s.r) for s in trace.selections)


def test_james_linf_trace_is_flat():
    emb = james_embedding(0.9, greedy_pruned(0, 4, 4))
    trace = run(emb, 0.45, 2, modulus=ModulusProvider(emb.space, "const", const=0.0))
    assert trace.scale == pytest.approx(0.9)
    for lv in trace.levels:
        assert lv.lip_observed == pytest.approx(1.0, abs=1e-12)
        assert lv.lip_observed * trace.scale == pytest.approx(0.9, abs=1e-12)
    assert trace.monotone and trace.gamma_consistent and trace.bounds_pass


def test_levels_zero_gives_input_certificate_only():
    emb = james_embedding(0.9, greedy_pruned(0, 2, 2))
    trace = run(emb, 0.45, 0)
    assert len(trace.levels) == 1 and trace.levels[0].selections == []


def test_run_preconditions():
    emb = james_embedding(0.9, greedy_pruned(0, 3, 2))
    with pytest.raises(PreconditionError, match="gamma"):
        run(emb, 0.9, 1)
    with pytest.raises(PreconditionError, match="height >= 4"):
        run(emb, 0.45, 2)
    with pytest.raises(ValidationError):
        run(emb, 0.45, 1, space=SeqSpace(2, 3))


@pytest.mark.parametrize("seed", range(4))
def test_random_walk_runs_are_monotone_and_consistent(seed):
    sp = SeqSpace(2, 4)
    emb = materialize_support(random_walk_embedding(sp, seed), GreedyTree(0, 4, 5), 2)
    trace = run(emb, certify(emb).gamma, 2)
    assert trace.monotone and trace.gamma_consistent
    for lv in trace.levels[1:]:
        assert lv.nodes > 1


def test_support_run_matches_full_tree_run():
    sp = SeqSpace(2, 3)
    lazy = random_walk_embedding(sp, 11)
    full = GreedyTree(0, 4, 4).materialize()
    lazy_full = random_walk_embedding(sp, 11)
    lazy_full.points(full.vertices)
    a = lazy_full.materialized(level=0)
    b = materialize_support(lazy, GreedyTree(0, 4, 4), 2)
    assert len(b) < len(a)
    Pa, Pb = a.source, b.source
    for _ in range(2):
        Pa, sa = improve_step(Pa, a)
        Pb, sb = improve_step(Pb, b)
        assert Pa == Pb
        assert [s.chosen for s in sa.selections] == [s.chosen for s in sb.selections]
        assert verify_pruned(Pa).passed


def test_random_walk_is_order_independent():
    sp = SeqSpace(2, 2)
    a, b = random_walk_embedding(sp, 3), random_walk_embedding(sp, 3)
    x = a.point((1, 4, 6))
    b.point((2,))
    assert np.array_equal(b.point((1, 4, 6)), x)


def test_trace_determinism():
    sp = SeqSpace(2, 4)

    def once():
        emb = materialize_support(random_walk_embedding(sp, 2), GreedyTree(0, 4, 4), 2)
        prov = ModulusProvider(sp, "random-restart", budget=1500, restarts=2, seed=9)
        return run(emb, certify(emb).gamma, 2, modulus=prov).to_dict()

    assert once() == once()


class TestProvider:
    def test_parse(self):
        sp = SeqSpace(2, 2)
        assert ModulusProvider.parse("grid:step=0.1", sp).step == 0.1
        p = ModulusProvider.parse("random-restart:budget=500:restarts=3", sp)
        assert (p.kind, p.budget, p.restarts) == ("random-restart", 500, 3)
        assert ModulusProvider.parse("const:0", sp).const == 0.0
        with pytest.raises(ValidationError):
            ModulusProvider.parse("magic", sp)
        with pytest.raises(ValidationError):
            ModulusProvider.parse("grid:speed=3", sp)

    def test_trivial_arguments(self):
        p = ModulusProvider(SeqSpace(2, 2), "grid", step=0.1)
        assert p(1.0, 1) == (0.0, 0.0, "trivial")
        assert p(0.0, 3)[0] == 0.0

    def test_grid_lowers_t_and_reports_slack(self):
        sp = SeqSpace(2, 2)
        p = ModulusProvider(sp, "grid", step=0.1)
        beta, slack, method = p(2.0, 2)
        assert method == "grid" and slack > 0
        assert p.estimates[0].t < 2.0
        p(2.0, 2)
        assert len(p.estimates) == 1  # cached

    def test_grid_falls_back_outside_limits(self):
        p = ModulusProvider(SeqSpace(2, 4), "grid", step=0.1, budget=800, restarts=2)
        _, slack, method = p(1.0, 5)
        assert method == "random-restart" and slack == 0
