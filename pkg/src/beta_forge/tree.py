"""Vertices of the countably branching tree, its shortest-path metric, and
finite rooted structures whose payloads are such vertices.

A vertex is a plain ``tuple`` of strictly increasing positive integers; the
root is ``()``.  The infinite tree is never materialized: everything below
works on pure functions of tuples or on explicit finite structures
(:class:`PrunedTree`).
"""
from __future__ import annotations

from collections.abc import Iterable, Iterator, Sequence

import numpy as np

from . import config
from .errors import BudgetError, ValidationError

Vertex = tuple
ROOT: Vertex = ()
MAX_LABEL = 2**31 - 1


def make_vertex(labels: Iterable[int]) -> Vertex:
    out = tuple(int(x) for x in labels)
    prev = 0
    for x in out:
        if x <= prev:
            raise ValidationError(f"labels must be strictly increasing positive integers, got {list(out)}")
        if x > MAX_LABEL:
            raise ValidationError(f"label {x} does not fit in 32 bits")
        prev = x
    return out


def format_vertex(v: Vertex) -> str:
    return "[" + ",".join(str(x) for x in v) + "]"


def parse_vertex(text: str) -> Vertex:
    s = text.strip()
    if not (s.startswith("[") and s.endswith("]")):
        raise ValidationError(f"vertex must look like [1,2,3], got {text!r}")
    body = s[1:-1].strip()
    if not body:
        return ROOT
    try:
        return make_vertex(int(x) for x in body.split(","))
    except ValueError as exc:
        raise ValidationError(f"bad vertex {text!r}") from exc


def is_ancestor(a: Vertex, b: Vertex) -> bool:
    """True iff ``a`` is a proper prefix of ``b``."""
    return len(a) < len(b) and tuple(b[: len(a)]) == tuple(a)


def gca(a: Vertex, b: Vertex) -> Vertex:
    """Greatest common ancestor, i.e. the longest common prefix."""
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return tuple(a[:n])


def tree_distance(a: Vertex, b: Vertex) -> int:
    return len(a) + len(b) - 2 * len(gca(a, b))


def _check_budget(count: int, budget: int | None) -> None:
    limit = config.vertex_budget() if budget is None else budget
    if count > limit:
        raise BudgetError(f"construction needs {count} vertices, budget is {limit}")


def truncation_size(height: int, branching: int) -> int:
    return sum(branching**h for h in range(height + 1))


def enumerate_truncation(height: int, branching: int, budget: int | None = None) -> "PrunedTree":
    """Height-``height`` truncation with ``branching`` children per vertex.

    Children of ``J`` are ``J + (max J + i,)`` for ``i = 1..branching``
    (``max () = 0``), listed in label order.
    """
    if height < 0 or branching < 1:
        raise ValidationError("need height >= 0 and branching >= 1")
    _check_budget(truncation_size(height, branching), budget)
    vertices: list[Vertex] = [ROOT]
    parents = [-1]
    frontier = [0]
    for _ in range(height):
        nxt = []
        for idx in frontier:
            v = vertices[idx]
            top = v[-1] if v else 0
            for i in range(1, branching + 1):
                vertices.append(v + (top + i,))
                parents.append(idx)
                nxt.append(len(vertices) - 1)
        frontier = nxt
    return PrunedTree(vertices, parents, level=0)


class PrunedTree:
    """Finite rooted tree whose nodes carry vertices of the big tree.

    ``level`` is the weight exponent: every edge of the structure joins
    payloads ``2**level`` apart in the tree metric.  Nodes are stored in
    creation order with parent indices (parent before child); sibling order
    is the order of appearance.  A level-0 uniform structure is a plain
    truncation.
    """

    def __init__(self, vertices: Sequence[Vertex], parents: Sequence[int], level: int = 0):
        if len(vertices) != len(parents) or not vertices:
            raise ValidationError("vertices and parents must be non-empty and aligned")
        if parents[0] != -1:
            raise ValidationError("first node must be the root (parent -1)")
        self.level = int(level)
        self.vertices = [tuple(v) for v in vertices]
        self.parents = [int(p) for p in parents]
        self.index = {}
        for i, v in enumerate(self.vertices):
            if v in self.index:
                raise ValidationError(f"duplicate vertex {format_vertex(v)}")
            self.index[v] = i
        self.children: list[list[int]] = [[] for _ in self.vertices]
        self.depth = [0] * len(self.vertices)
        for i, p in enumerate(self.parents[1:], start=1):
            if not 0 <= p < i:
                raise ValidationError(f"node {i} has invalid parent index {p}")
            self.children[p].append(i)
            self.depth[i] = self.depth[p] + 1
        self._cache: dict = {}

    @classmethod
    def from_vertices(cls, vertices: Iterable[Vertex], level: int = 0) -> "PrunedTree":
        """Rebuild the structure from a payload set: the parent of ``v`` is
        ``v`` minus its last ``2**level`` labels; the shortest payload is the root."""
        vs = sorted({tuple(v) for v in vertices}, key=lambda v: (len(v), v))
        if not vs:
            raise ValidationError("empty vertex set")
        step = 2**level
        root = vs[0]
        index = {root: 0}
        parents = [-1]
        for v in vs[1:]:
            if (len(v) - len(root)) % step:
                raise ValidationError(f"{format_vertex(v)} is not a level-{level} descendant of the root")
            p = v[: len(v) - step]
            if p not in index:
                raise ValidationError(f"parent {format_vertex(p)} of {format_vertex(v)} missing")
            index[v] = len(parents)
            parents.append(index[p])
        return cls(vs, parents, level=level)

    # --- structure -----------------------------------------------------
    def __len__(self) -> int:
        return len(self.vertices)

    def __contains__(self, v) -> bool:
        return tuple(v) in self.index

    def __iter__(self) -> Iterator[Vertex]:
        return iter(self.vertices)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PrunedTree):
            return NotImplemented
        return (self.level, self.vertices, self.parents) == (other.level, other.vertices, other.parents)

    def __repr__(self) -> str:
        return (f"PrunedTree(level={self.level}, height={self.height}, "
                f"branching={self.branching}, nodes={len(self)})")

    @property
    def root(self) -> Vertex:
        return self.vertices[0]

    @property
    def height(self) -> int:
        return max(self.depth)

    @property
    def branching(self) -> int:
        return max(len(c) for c in self.children)

    @property
    def min_branching(self) -> int:
        counts = [len(c) for i, c in enumerate(self.children) if self.depth[i] < self.height]
        return min(counts) if counts else 0

    def children_of(self, v: Vertex) -> list[Vertex]:
        return [self.vertices[c] for c in self.children[self.index[tuple(v)]]]

    def parent_of(self, v: Vertex) -> Vertex | None:
        p = self.parents[self.index[tuple(v)]]
        return None if p < 0 else self.vertices[p]

    def depth_of(self, v: Vertex) -> int:
        return self.depth[self.index[tuple(v)]]

    def descriptor(self) -> str:
        return f"pruned:level={self.level}:height={self.height}:branch={self.branching}"

    # --- vectorized helpers ----------------------------------------------
    def label_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Payloads padded with -1 into an (N, max_len) int array, plus lengths."""
        if "labels" not in self._cache:
            lens = np.array([len(v) for v in self.vertices], dtype=np.int64)
            mat = np.full((len(self), max(int(lens.max()), 1)), -1, dtype=np.int64)
            for i, v in enumerate(self.vertices):
                mat[i, : len(v)] = v
            self._cache["labels"] = (mat, lens)
        return self._cache["labels"]

    def path_matrix(self) -> np.ndarray:
        """Row i lists node indices on the root-to-i path, padded with -1."""
        if "paths" not in self._cache:
            mat = np.full((len(self), self.height + 1), -1, dtype=np.int64)
            for i in range(len(self)):
                p = self.parents[i]
                if p >= 0:
                    mat[i, : self.depth[i]] = mat[p, : self.depth[i]]
                mat[i, self.depth[i]] = i
            self._cache["paths"] = mat
        return self._cache["paths"]

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        child = np.arange(1, len(self), dtype=np.int64)
        return child, np.array(self.parents[1:], dtype=np.int64)

    def ancestor_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """(descendant, ancestor) index arrays over all proper ancestor pairs."""
        if "anc" not in self._cache:
            paths = self.path_matrix()
            depth = np.asarray(self.depth)
            desc, anc = [], []
            for k in range(self.height):
                rows = np.nonzero(depth > k)[0]
                desc.append(rows)
                anc.append(paths[rows, k])
            if desc:
                self._cache["anc"] = (np.concatenate(desc), np.concatenate(anc))
            else:
                self._cache["anc"] = (np.zeros(0, np.int64), np.zeros(0, np.int64))
        return self._cache["anc"]

    def eligible_pair_count(self) -> int:
        return sum(len(i) for i, _, _ in self.eligible_pairs())

    def eligible_pairs(self, chunk: int = 200_000) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """Yield chunks ``(i, j, d)`` of eligible sibling pairs.

        A pair is eligible when both nodes descend from a common node ``J``
        at the same depth, with suffixes ``J1``, ``J2`` satisfying
        ``max J1 < min J2``; ``d`` is their tree distance ``2 |J1|``.
        """
        desc, anc = self.ancestor_pairs()
        if len(desc) == 0:
            return
        labels, lens = self.label_matrix()
        depth = np.asarray(self.depth)
        rel = depth[desc] - depth[anc]
        mins = labels[desc, lens[anc]]
        maxs = labels[desc, lens[desc] - 1]
        order = np.lexsort((mins, rel, anc))
        desc, anc, rel, mins, maxs = desc[order], anc[order], rel[order], mins[order], maxs[order]
        new_group = np.ones(len(desc), dtype=bool)
        new_group[1:] = (anc[1:] != anc[:-1]) | (rel[1:] != rel[:-1])
        gid = np.cumsum(new_group) - 1
        starts = np.nonzero(new_group)[0]
        ends = np.append(starts[1:], len(desc))
        big = int(labels.max()) + 2
        keys = gid * big + mins
        first = np.searchsorted(keys, gid * big + maxs, side="right")
        last = ends[gid]
        counts = np.maximum(last - first, 0)
        dist = 2 * (lens[desc] - lens[anc])
        pos = 0
        n = len(desc)
        while pos < n:
            # take as many rows as fit in the chunk (at least one)
            csum = np.cumsum(counts[pos:])
            stop = pos + max(1, int(np.searchsorted(csum, chunk, side="right")))
            c = counts[pos:stop]
            total = int(c.sum())
            if total:
                rows = np.repeat(np.arange(pos, stop), c)
                offs = np.arange(total) - np.repeat(np.cumsum(c) - c, c)
                cols = first[rows] + offs
                yield desc[rows], desc[cols], dist[rows]
            pos = stop


def pair_tree_distances(tree: PrunedTree, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Tree-metric distances between payloads of node index arrays ``i``, ``j``."""
    labels, lens = tree.label_matrix()
    eq = labels[i] == labels[j]
    eq &= labels[i] >= 0
    common = np.cumprod(eq, axis=1).sum(axis=1)
    return lens[i] + lens[j] - 2 * common


def hop_distances(tree: PrunedTree, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Edge counts within the structure between nodes ``i`` and ``j``."""
    paths = tree.path_matrix()
    eq = (paths[i] == paths[j]) & (paths[i] >= 0)
    lca_depth = np.cumprod(eq, axis=1).sum(axis=1) - 1
    depth = np.asarray(tree.depth)
    return depth[i] + depth[j] - 2 * lca_depth


def prefix_closure(vertices: Iterable[Vertex]) -> list[Vertex]:
    """All prefixes of the given vertices (including the root), sorted by (length, labels)."""
    out = {tuple(v[:i]) for v in vertices for i in range(len(v) + 1)}
    return sorted(out, key=lambda v: (len(v), v))
