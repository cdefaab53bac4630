"""Tree embeddings as finite tables, the James-type construction, and
exhaustive certificates."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import MissingPointsError, PreconditionError, ValidationError
from .pruned import is_nested, verify_pruned
from .spaces import SeqSpace
from .tree import PrunedTree, Vertex, format_vertex, pair_tree_distances

EXHAUSTIVE_LIMIT = 3000


class Embedding:
    """Map from tree vertices to points of ``space``.

    ``table`` holds explicit values; ``fill`` (optional) computes missing
    ones on demand and memoizes them, so the table always lists exactly the
    vertices that were evaluated.  ``source`` is the domain structure used
    for certification.
    """

    def __init__(self, space: SeqSpace, table: dict | None = None, source: PrunedTree | None = None,
                 fill: Callable[[Vertex], np.ndarray] | None = None):
        self.space = space
        self.table: dict[Vertex, np.ndarray] = {}
        for v, p in (table or {}).items():
            p = np.asarray(p, dtype=float)
            if p.shape != (space.dim,):
                raise ValidationError(f"point for {format_vertex(v)} has shape {p.shape}, expected ({space.dim},)")
            self.table[tuple(v)] = p
        self.source = source
        self.fill = fill
        self._matrix = None

    def __len__(self) -> int:
        return len(self.table)

    def __contains__(self, v) -> bool:
        return tuple(v) in self.table

    def point(self, v: Vertex) -> np.ndarray:
        v = tuple(v)
        p = self.table.get(v)
        if p is None:
            if self.fill is None:
                raise MissingPointsError(f"no point for {format_vertex(v)}", [v])
            p = np.asarray(self.fill(v), dtype=float)
            self.table[v] = p
        return p

    def points(self, vertices: Iterable[Vertex]) -> np.ndarray:
        vertices = list(vertices)
        if self.fill is None:
            missing = [v for v in vertices if tuple(v) not in self.table]
            if missing:
                raise MissingPointsError(f"{len(missing)} vertices have no point, first "
                                         f"{format_vertex(missing[0])}", missing)
        if not vertices:
            return np.zeros((0, self.space.dim))
        return np.stack([self.point(v) for v in vertices])

    def source_matrix(self) -> np.ndarray:
        if self.source is None:
            raise PreconditionError("embedding has no source structure")
        if self._matrix is None or len(self._matrix) != len(self.source):
            self._matrix = self.points(self.source.vertices)
        return self._matrix

    def restrict(self, tree: PrunedTree) -> "Embedding":
        return Embedding(self.space, {v: self.point(v) for v in tree.vertices}, source=tree)

    def scaled(self, c: float) -> "Embedding":
        fill = None if self.fill is None else (lambda v, f=self.fill: c * np.asarray(f(v), dtype=float))
        return Embedding(self.space, {v: c * p for v, p in self.table.items()}, self.source, fill)

    def compose(self, f: Callable[[np.ndarray], np.ndarray], space: SeqSpace) -> "Embedding":
        return Embedding(space, {v: f(p) for v, p in self.table.items()}, self.source)

    def materialized(self, level: int | None = None) -> "Embedding":
        """Freeze the evaluated vertices into a table whose source structure
        is rebuilt from them."""
        lvl = self.source.level if level is None and self.source is not None else (level or 0)
        src = PrunedTree.from_vertices(self.table.keys(), level=lvl)
        return Embedding(self.space, dict(self.table), source=src)


def james_point(theta: float, v: Vertex, dim: int) -> np.ndarray:
    """``theta * sum_{n in v} (e_1 + ... + e_n)``: coordinate ``j`` counts labels >= j."""
    labels = np.asarray(v, dtype=np.int64)
    if len(labels) and labels[-1] > dim:
        raise ValidationError(f"label {labels[-1]} exceeds dimension {dim}")
    js = np.arange(1, dim + 1)
    return theta * (len(labels) - np.searchsorted(labels, js, side="left")).astype(float)


def james_embedding(theta: float, tree: PrunedTree | None = None, dim: int | None = None) -> Embedding:
    """James-type embedding into l_inf^dim.

    With a tree, the table covers every payload and ``dim`` defaults to the
    largest label.  Without one, the embedding is evaluated lazily and
    ``dim`` must be given.
    """
    if not 0 < theta < 1:
        raise ValidationError(f"theta must lie in (0, 1), got {theta}")
    if tree is None:
        if dim is None:
            raise ValidationError("a lazy James embedding needs an explicit dimension")
        return Embedding(SeqSpace(np.inf, dim), fill=lambda v: james_point(theta, v, dim))
    labels, lens = tree.label_matrix()
    top = max(int(labels.max()), 1)
    dim = top if dim is None else dim
    if dim < top:
        raise ValidationError(f"dimension {dim} below largest label {top}")
    N = len(tree)
    hits = np.zeros((N, dim + 2))
    rows = np.repeat(np.arange(N), lens)
    np.add.at(hits, (rows, labels[labels >= 0]), 1.0)
    counts = np.cumsum(hits[:, ::-1], axis=1)[:, ::-1]
    mat = theta * counts[:, 1:dim + 1]
    emb = Embedding(SeqSpace(np.inf, dim), source=tree,
                    fill=lambda v: james_point(theta, v, dim))
    emb.table = dict(zip(tree.vertices, mat))
    emb._matrix = mat
    return emb


def indicator_embedding(tree: PrunedTree, dim: int | None = None) -> Embedding:
    """``J -> sum_{j in J} e_j`` in l_1; disjoint supports make it an isometry."""
    labels, lens = tree.label_matrix()
    dim = max(int(labels.max()), 1) if dim is None else dim
    mat = np.zeros((len(tree), dim))
    rows = np.repeat(np.arange(len(tree)), lens)
    mat[rows, labels[labels >= 0] - 1] = 1.0
    return Embedding(SeqSpace(1, dim), dict(zip(tree.vertices, mat)), source=tree)


@dataclass
class EmbeddingCertificate:
    lip: float
    lip_ancestor: float
    colip_ancestor: float
    gamma: float
    ancestor_pairs: int
    eligible_pairs: int
    lip_method: str

    def to_dict(self) -> dict:
        return {"lip": self.lip, "lip_ancestor": self.lip_ancestor,
                "colip_ancestor": self.colip_ancestor,
                "gamma": None if np.isinf(self.gamma) else self.gamma,
                "ancestor_pairs": self.ancestor_pairs, "eligible_pairs": self.eligible_pairs,
                "lip_method": self.lip_method}


def _ratios(space, M, tree, i, j, d=None):
    if d is None:
        d = pair_tree_distances(tree, i, j)
    return space.norm(M[i] - M[j]) / d


def ancestor_ratios(emb: Embedding) -> np.ndarray:
    tree = emb.source
    M = emb.source_matrix()
    desc, anc = tree.ancestor_pairs()
    _, lens = tree.label_matrix()
    out = np.empty(len(desc))
    for s in range(0, len(desc), 100_000):
        i, j = desc[s:s + 100_000], anc[s:s + 100_000]
        out[s:s + len(i)] = emb.space.norm(M[i] - M[j]) / (lens[i] - lens[j])
    return out


def eligible_min_ratio(emb: Embedding) -> tuple[float, int, tuple | None]:
    """Smallest ``||phi(J1) - phi(J2)|| / d`` over eligible sibling pairs,
    the pair count, and the minimizing pair of node indices."""
    tree = emb.source
    M = emb.source_matrix()
    best, count, arg = np.inf, 0, None
    for i, j, d in tree.eligible_pairs():
        r = emb.space.norm(M[i] - M[j]) / d
        k = int(np.argmin(r))
        count += len(r)
        if r[k] < best:
            best, arg = float(r[k]), (int(i[k]), int(j[k]))
    return best, count, arg


def global_lip(emb: Embedding, exhaustive_limit: int = EXHAUSTIVE_LIMIT) -> tuple[float, str]:
    """Lipschitz constant over all pairs of the source.

    Above ``exhaustive_limit`` nodes the maximum is taken over structure
    edges, which is exact because the source metric is a path metric.
    """
    tree = emb.source
    M = emb.source_matrix()
    n = len(tree)
    if n < 2:
        return 0.0, "all-pairs"
    if n > exhaustive_limit:
        c, p = tree.edges()
        return float(_ratios(emb.space, M, tree, c, p).max()), "edges"
    iu, ju = np.triu_indices(n, 1)
    best = 0.0
    for s in range(0, len(iu), 200_000):
        best = max(best, float(_ratios(emb.space, M, tree, iu[s:s + 200_000], ju[s:s + 200_000]).max()))
    return best, "all-pairs"


def certify(emb: Embedding, exhaustive_limit: int = EXHAUSTIVE_LIMIT) -> EmbeddingCertificate:
    if emb.source is None:
        raise PreconditionError("certify needs an embedding with a source structure")
    lip, method = global_lip(emb, exhaustive_limit)
    r = ancestor_ratios(emb)
    gamma, count, _ = eligible_min_ratio(emb)
    return EmbeddingCertificate(
        lip=lip,
        lip_ancestor=float(r.max()) if len(r) else 0.0,
        colip_ancestor=float(r.min()) if len(r) else 0.0,
        gamma=gamma,
        ancestor_pairs=len(r),
        eligible_pairs=count,
        lip_method=method,
    )


@dataclass
class CheckReport:
    passed: bool
    condition: str | None = None
    detail: str | None = None
    witness: list | None = None
    checked: dict | None = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "condition": self.condition, "detail": self.detail,
                "witness": self.witness, "checked": self.checked or {}}


def verify_characterization_iii(emb: Embedding, pruned_seq: Sequence[PrunedTree], C: float, L: float,
                                gamma: float, tol: float = 1e-12) -> CheckReport:
    """(a) ancestor pairs of the base structure satisfy
    ``d / C <= ||phi(J) - phi(K)|| <= L d``; (b) within each supplied pruned
    tree of level ``l``, distinct same-height payloads are ``>= 2**l gamma`` apart."""
    if C <= 0 or L <= 0 or gamma <= 0:
        raise ValidationError("C, L and gamma must be positive")
    for k, t in enumerate(pruned_seq):
        rep = verify_pruned(t)
        if not rep.passed:
            raise PreconditionError(f"pruned tree {k} fails condition ({rep.condition}): {rep.detail}")
        if k and not is_nested(t, pruned_seq[k - 1]):
            raise PreconditionError(f"pruned tree {k} is not nested in tree {k - 1}")
    tree = emb.source
    M = emb.source_matrix()
    desc, anc = tree.ancestor_pairs()
    _, lens = tree.label_matrix()
    d = (lens[desc] - lens[anc]).astype(float)
    dist = emb.space.norm(M[desc] - M[anc]) if len(desc) else np.zeros(0)
    checked = {"ancestor_pairs": int(len(desc)), "same_height_pairs": 0}
    low = np.nonzero(dist < d / C - tol)[0]
    if len(low):
        k = low[0]
        return CheckReport(False, "a", f"lower bound: {dist[k]:.12g} < {d[k] / C:.12g}",
                           [list(tree.vertices[anc[k]]), list(tree.vertices[desc[k]])], checked)
    high = np.nonzero(dist > L * d + tol)[0]
    if len(high):
        k = high[0]
        return CheckReport(False, "a", f"upper bound: {dist[k]:.12g} > {L * d[k]:.12g}",
                           [list(tree.vertices[anc[k]]), list(tree.vertices[desc[k]])], checked)
    for t in pruned_seq:
        P = emb.points(t.vertices)
        need = 2**t.level * gamma
        depth = np.asarray(t.depth)
        for h in range(1, t.height + 1):
            idx = np.nonzero(depth == h)[0]
            if len(idx) < 2:
                continue
            D = emb.space.pairwise(P[idx])
            iu, ju = np.triu_indices(len(idx), 1)
            checked["same_height_pairs"] += len(iu)
            bad = np.nonzero(D[iu, ju] < need - tol)[0]
            if len(bad):
                a, b = idx[iu[bad[0]]], idx[ju[bad[0]]]
                return CheckReport(False, "b", f"level {t.level}: {D[iu[bad[0]], ju[bad[0]]]:.12g} < {need:.12g}",
                                   [list(t.vertices[a]), list(t.vertices[b])], checked)
    return CheckReport(True, checked=checked)
