"""Pruned isometric subsets: greedy closed form, the window-skipping
refinement step, and exhaustive verification."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .errors import ValidationError
from .tree import (ROOT, PrunedTree, Vertex, _check_budget, format_vertex,
                   hop_distances, pair_tree_distances, truncation_size)

log = logging.getLogger(__name__)

# chooser(J, child, grandchildren) -> index into grandchildren
Chooser = Callable[[Vertex, Vertex, list], int]


class TreeLike(Protocol):
    level: int

    @property
    def root(self) -> Vertex: ...

    @property
    def height(self) -> int: ...

    def children_of(self, v: Vertex) -> list: ...

    def depth_of(self, v: Vertex) -> int: ...


class GreedyTree:
    """Implicit greedy pruned tree; children are computed on demand.

    The i-th child of ``J`` is ``J`` followed by the ``2**level`` consecutive
    labels starting at ``max J + 1 + (i - 1) * 2**level``.
    """

    def __init__(self, level: int, height: int, branching: int, root: Vertex = ROOT):
        if level < 0 or height < 0 or branching < 1:
            raise ValidationError("need level >= 0, height >= 0, branching >= 1")
        self.level = level
        self._height = height
        self.branching = branching
        self._root = tuple(root)

    @property
    def root(self) -> Vertex:
        return self._root

    @property
    def height(self) -> int:
        return self._height

    def depth_of(self, v: Vertex) -> int:
        return (len(v) - len(self._root)) >> self.level

    def children_of(self, v: Vertex) -> list[Vertex]:
        if self.depth_of(v) >= self._height:
            return []
        w = 2**self.level
        top = v[-1] if v else 0
        out = []
        for i in range(self.branching):
            s = top + 1 + i * w
            out.append(tuple(v) + tuple(range(s, s + w)))
        return out

    def materialize(self, budget: int | None = None) -> PrunedTree:
        _check_budget(truncation_size(self._height, self.branching), budget)
        vertices = [self._root]
        parents = [-1]
        frontier = [0]
        for _ in range(self._height):
            nxt = []
            for idx in frontier:
                for c in self.children_of(vertices[idx]):
                    vertices.append(c)
                    parents.append(idx)
                    nxt.append(len(vertices) - 1)
            frontier = nxt
        return PrunedTree(vertices, parents, level=self.level)


def greedy_pruned(level: int, height: int, branching: int, budget: int | None = None) -> PrunedTree:
    return GreedyTree(level, height, branching).materialize(budget)


def first_chooser(J, child, grandchildren) -> int:
    return 0


def random_chooser(rng: np.random.Generator) -> Chooser:
    def choose(J, child, grandchildren):
        return int(rng.integers(len(grandchildren)))
    return choose


@dataclass
class RefineReport:
    level: int
    height: int
    # per expanded node: (vertex, achieved children, parent children scanned)
    achieved: list[tuple[Vertex, int, int]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def min_branching(self) -> int:
        return min((a for _, a, _ in self.achieved), default=0)

    @property
    def max_branching(self) -> int:
        return max((a for _, a, _ in self.achieved), default=0)


def inductive_refine(parent: TreeLike, chooser: Chooser = first_chooser) -> tuple[PrunedTree, RefineReport]:
    """One refinement step: level n -> level n + 1.

    For each selected node ``J`` the children of ``J`` in ``parent`` are
    scanned in order; a child is usable only if its block starts after the
    last selected grandchild block, and ``chooser`` picks one grandchild
    under each usable child.  Achieved branching is reported, not demanded.
    """
    if parent.height < 2:
        raise ValidationError("parent must have height >= 2 to refine")
    height = parent.height // 2
    root = parent.root
    vertices: list[Vertex] = [root]
    parents = [-1]
    report = RefineReport(level=parent.level + 1, height=height)
    queue = deque([(0, root, 0)])
    while queue:
        idx, J, depth = queue.popleft()
        if depth >= height:
            continue
        kids = parent.children_of(J)
        last_max = None
        got = 0
        for child in kids:
            if last_max is not None and child[len(J)] <= last_max:
                continue
            grand = parent.children_of(child)
            if not grand:
                continue
            pick = chooser(J, child, grand)
            if not 0 <= pick < len(grand):
                raise ValidationError(f"chooser returned {pick} for {len(grand)} candidates")
            gc = tuple(grand[pick])
            vertices.append(gc)
            parents.append(idx)
            queue.append((len(vertices) - 1, gc, depth + 1))
            last_max = gc[-1]
            got += 1
        report.achieved.append((J, got, len(kids)))
        if got < len(kids):
            msg = f"{format_vertex(J)}: achieved branching {got} of {len(kids)}"
            report.warnings.append(msg)
            log.debug(msg)
    return PrunedTree(vertices, parents, level=parent.level + 1), report


@dataclass
class PrunedReport:
    passed: bool
    condition: str | None = None
    detail: str | None = None
    witness: list | None = None
    pairs_checked: int = 0

    def to_dict(self) -> dict:
        return {"passed": self.passed, "condition": self.condition, "detail": self.detail,
                "witness": self.witness, "pairs_checked": self.pairs_checked}


def verify_pruned(tree: PrunedTree, chunk: int = 4096) -> PrunedReport:
    """Check block sizes (a), parent/block windows (b), sibling window order
    (c) and the exact ``2**level`` scaling of all pairwise distances (d)."""
    w = 2**tree.level
    V = tree.vertices
    for i in range(1, len(tree)):
        v, p = V[i], V[tree.parents[i]]
        if v[: len(p)] != p:
            return PrunedReport(False, "a", f"{format_vertex(v)} does not extend its parent {format_vertex(p)}",
                                [list(p), list(v)])
        if len(v) - len(p) != w:
            return PrunedReport(False, "a", f"block of {format_vertex(v)} under {format_vertex(p)} "
                                f"has size {len(v) - len(p)}, expected {w}",
                                [list(p), list(v)])
        if p and not p[-1] < v[len(p)]:
            return PrunedReport(False, "b", f"block of {format_vertex(v)} does not start after max of parent",
                                [list(p), list(v)])
    for i, kids in enumerate(tree.children):
        n = len(V[i])
        for a, b in zip(kids, kids[1:]):
            if not V[a][-1] < V[b][n]:
                return PrunedReport(False, "c", f"sibling windows out of order under {format_vertex(V[i])}",
                                    [list(V[a]), list(V[b])])
    n = len(tree)
    iu, ju = np.triu_indices(n, k=1)
    for s in range(0, len(iu), chunk * 64):
        i, j = iu[s: s + chunk * 64], ju[s: s + chunk * 64]
        dt = pair_tree_distances(tree, i, j)
        dh = hop_distances(tree, i, j)
        bad = np.nonzero(dt != w * dh)[0]
        if len(bad):
            k = bad[0]
            return PrunedReport(False, "d", f"tree distance {dt[k]} != {w} * {dh[k]} hops",
                                [list(V[i[k]]), list(V[j[k]])], pairs_checked=s + int(k))
    return PrunedReport(True, pairs_checked=len(iu))


def is_nested(inner: PrunedTree, outer: PrunedTree) -> bool:
    return all(v in outer for v in inner.vertices)


def greedy_restriction(source: PrunedTree, level: int) -> GreedyTree:
    """Largest greedy level-``level`` tree contained in a greedy source.

    For a greedy source of level ``j <= level`` with branching ``b`` and
    height ``H``, child ``i`` of the coarser tree starts at the source child
    ``(i - 1) * 2**(level - j) + 1``, so ``i <= (b - 1) // 2**(level - j) + 1``.
    """
    if level < source.level:
        raise ValidationError(f"cannot restrict level {source.level} source to coarser level {level}")
    f = 2 ** (level - source.level)
    height = source.height // f
    branching = (source.branching - 1) // f + 1
    return GreedyTree(level, height, branching, root=source.root)
