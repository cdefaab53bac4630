"""Sampled maps between metric spaces: moduli, large-distance Lipschitz
constants, covering checks, composition with tree embeddings and greedy
lifting through quotient maps."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .embeddings import Embedding, certify
from .errors import LiftingError, MissingPointsError, PreconditionError, ValidationError
from .pruned import GreedyTree, greedy_restriction, is_nested
from .spaces import SeqSpace
from .tree import PrunedTree, format_vertex

log = logging.getLogger(__name__)

TOL = 1e-12
MATCH_TOL = 1e-9
_ROWS = 512


class SampledMap:
    """A map known on finitely many points.

    The domain is either a point array in ``domain_space`` or an abstract
    finite metric given by ``distance_table``.  ``codomain_points`` are
    extra target points used by covering checks (defaults to the values).
    """

    def __init__(self, domain, values, codomain_space: SeqSpace, domain_space: SeqSpace | None = None,
                 distance_table=None, codomain_points=None):
        self.values = np.atleast_2d(np.asarray(values, dtype=float))
        self.codomain_space = codomain_space
        self.domain_space = domain_space
        n = len(self.values)
        if self.values.shape[1] != codomain_space.dim:
            raise ValidationError(f"values have dimension {self.values.shape[1]}, codomain is {codomain_space}")
        if distance_table is not None:
            D = np.asarray(distance_table, dtype=float)
            if D.shape != (n, n) or not np.all(np.isfinite(D)):
                raise ValidationError("distance table must be a finite n x n matrix aligned with values")
            if not np.allclose(D, D.T) or np.any(np.diag(D) != 0) or np.any(D < 0):
                raise ValidationError("distance table must be symmetric, non-negative, zero on the diagonal")
            self.domain = None
            self._dx = D
        else:
            if domain_space is None:
                raise ValidationError("point domains need a domain_space")
            self.domain = np.atleast_2d(np.asarray(domain, dtype=float))
            if self.domain.shape != (n, domain_space.dim):
                raise ValidationError(f"domain has shape {self.domain.shape}, expected ({n}, {domain_space.dim})")
            self._dx = None
        if not (np.all(np.isfinite(self.values)) and (self.domain is None or np.all(np.isfinite(self.domain)))):
            raise ValidationError("sampled points must be finite")
        self.codomain_points = (None if codomain_points is None
                                else np.atleast_2d(np.asarray(codomain_points, dtype=float)))
        self._index = None

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], points, domain_space: SeqSpace,
                      codomain_space: SeqSpace, codomain_points=None) -> "SampledMap":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        vals = np.stack([np.asarray(fn(p), dtype=float).reshape(-1) for p in pts])
        return cls(pts, vals, codomain_space, domain_space, codomain_points=codomain_points)

    def __len__(self) -> int:
        return len(self.values)

    def dx_rows(self, rows) -> np.ndarray:
        if self._dx is not None:
            return self._dx[rows]
        return self.domain_space.pairwise(self.domain[rows], self.domain)

    def dy_rows(self, rows) -> np.ndarray:
        return self.codomain_space.pairwise(self.values[rows], self.values)

    def pair_blocks(self):
        """Yield ``(rows, DX, DY)`` over row blocks of the upper triangle."""
        n = len(self)
        for s in range(0, n, _ROWS):
            rows = np.arange(s, min(n, s + _ROWS))
            DX, DY = self.dx_rows(rows), self.dy_rows(rows)
            # keep j > i only
            mask = np.arange(n)[None, :] > rows[:, None]
            yield rows, np.where(mask, DX, np.nan), np.where(mask, DY, np.nan)

    def lookup(self, points) -> np.ndarray:
        """Sample indices of ``points`` (exact up to ``MATCH_TOL``); raises
        :class:`MissingPointsError` listing the absent ones."""
        if self.domain is None:
            raise PreconditionError("abstract domains cannot be searched by coordinates")
        P = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(len(P), -1, dtype=np.int64)
        for s in range(0, len(P), _ROWS):
            D = self.domain_space.pairwise(P[s:s + _ROWS], self.domain)
            k = np.argmin(D, axis=1)
            ok = D[np.arange(len(k)), k] <= MATCH_TOL
            out[s:s + len(k)] = np.where(ok, k, -1)
        missing = np.nonzero(out < 0)[0]
        if len(missing):
            raise MissingPointsError(f"{len(missing)} points are absent from the domain sample",
                                     [P[i].tolist() for i in missing])
        return out


@dataclass(frozen=True)
class QuotientConstants:
    K: float
    C: float
    d: float

    def __post_init__(self):
        if not self.K >= 0:
            raise ValidationError(f"K must be >= 0, got {self.K}")
        if not self.C > 0:
            raise ValidationError(f"C must be > 0, got {self.C}")
        if not self.d > 0:
            raise ValidationError(f"d must be > 0, got {self.d}")


def omega(f: SampledMap, t: float) -> float:
    """Largest image distance over sampled pairs at domain distance <= t."""
    if not t >= 0:
        raise ValidationError("t must be >= 0")
    best = 0.0
    for _, DX, DY in f.pair_blocks():
        sel = DX <= t + TOL
        if sel.any():
            best = max(best, float(DY[sel].max()))
    return best


def _ratio_extreme(f: SampledMap, d: float, largest: bool) -> tuple[float, int]:
    best, count = (0.0 if largest else math.inf), 0
    for _, DX, DY in f.pair_blocks():
        sel = DX >= d - TOL
        if sel.any():
            r = DY[sel] / DX[sel]
            count += int(sel.sum())
            best = max(best, float(r.max())) if largest else min(best, float(r.min()))
    return best, count


def lip_d(f: SampledMap, d: float) -> float:
    """Largest ratio of image to domain distance over pairs at distance >= d."""
    if not d > 0:
        raise ValidationError("d must be > 0")
    best, count = _ratio_extreme(f, d, True)
    if count == 0:
        log.warning("lip_d: no sampled pair at distance >= %g", d)
        return 0.0
    return best


def colip_d(f: SampledMap, d: float) -> float:
    """Smallest ratio of image to domain distance over pairs at distance >= d
    (``1 / A`` for a coarse Lipschitz embedding); ``inf`` when no pair qualifies."""
    if not d > 0:
        raise ValidationError("d must be > 0")
    return _ratio_extreme(f, d, False)[0]


@dataclass
class CoveringReport:
    passed: bool
    checked: int
    violations: int
    witness: dict | None = None
    note: str = "inclusion verified over the sample only"

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checked": self.checked, "violations": self.violations,
                "witness": self.witness, "note": self.note}


def check_covering(f: SampledMap, consts: QuotientConstants, r_grid, codomain_points=None) -> CoveringReport:
    """For each sampled ``x``, radius ``r`` and codomain point ``y`` within
    ``r`` of ``f(x)``, look for a sampled ``s`` with ``d(x, s) <= C r`` and
    ``d(f(s), y) <= K``."""
    r_grid = [float(r) for r in r_grid]
    if not r_grid or min(r_grid) <= 0:
        raise ValidationError("r_grid must be a non-empty list of positive radii")
    Y = codomain_points if codomain_points is not None else f.codomain_points
    Y = f.values if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
    Dfy = f.codomain_space.pairwise(f.values, Y)  # (n, m)
    hit = Dfy <= consts.K + TOL
    checked = violations = 0
    witness = None
    for i in range(len(f)):
        dx = f.dx_rows(np.array([i]))[0]
        for r in r_grid:
            want = Dfy[i] <= r + TOL
            if not want.any():
                continue
            near = dx <= consts.C * r + TOL
            covered = hit[near].any(axis=0)
            bad = np.nonzero(want & ~covered)[0]
            checked += int(want.sum())
            violations += len(bad)
            if len(bad) and witness is None:
                witness = {"x_index": i, "r": r, "y": Y[bad[0]].tolist(),
                           "x": None if f.domain is None else f.domain[i].tolist()}
    return CoveringReport(violations == 0, checked, violations, witness)


def minimal_level(gamma: float, threshold: float) -> int:
    """Smallest ``k >= 0`` with ``2**k * gamma > threshold``."""
    if not gamma > 0:
        raise ValidationError("gamma must be positive")
    k = max(0, math.floor(math.log2(max(threshold, TOL) / gamma)))
    while 2**k * gamma <= threshold:
        k += 1
    while k > 0 and 2 ** (k - 1) * gamma > threshold:
        k -= 1
    return k


def _level_tree(phi: Embedding, k: int, height: int | None, branching: int | None) -> tuple[PrunedTree, int]:
    """Greedy level-k structure on which ``phi`` is evaluated."""
    if phi.source is not None:
        if phi.source.level >= k:
            return phi.source, phi.source.level

        T = greedy_restriction(phi.source, k).materialize()
        if not is_nested(T, phi.source):
            raise PreconditionError("source is not a greedy pruned tree; cannot restrict to level "
                                    f"{k}")
        return T, k
    if phi.fill is None or height is None or branching is None:
        raise PreconditionError("an embedding without source needs a lazy fill plus height and branching")
    return GreedyTree(k, height, branching).materialize(), k


def _pair_checks(space: SeqSpace, M: np.ndarray, tree: PrunedTree):
    """Ancestor ratios (with index pairs) and eligible pair distances."""
    desc, anc = tree.ancestor_pairs()
    _, lens = tree.label_matrix()
    dT = (lens[desc] - lens[anc]).astype(float)
    anc_ratio = space.norm(M[desc] - M[anc]) / dT if len(desc) else np.zeros(0)
    ei, ej, ed, ex = [], [], [], []
    for i, j, d in tree.eligible_pairs():
        ei.append(i), ej.append(j), ed.append(d), ex.append(space.norm(M[i] - M[j]))
    cat = (lambda a: np.concatenate(a) if a else np.zeros(0))
    return (desc, anc, anc_ratio), (cat(ei).astype(np.int64), cat(ej).astype(np.int64),
                                    cat(ed).astype(float), cat(ex))


def _vpair(tree, i, j):
    return [list(tree.vertices[int(i)]), list(tree.vertices[int(j)])]


@dataclass
class ClaimReport:
    passed: bool
    k: int
    k_min: int
    constants: dict
    estimated: list[str]
    claims: dict = field(default_factory=dict)
    nodes: int = 0
    sample_indices: list[int] | None = None

    def to_dict(self) -> dict:
        out = {"passed": self.passed, "k": self.k, "k_min": self.k_min, "constants": self.constants,
               "estimated": self.estimated, "claims": self.claims, "nodes": self.nodes}
        if self.sample_indices is not None:
            out["sample_indices"] = self.sample_indices
        return out


def _claim(passed, value, required, pairs, witness=None) -> dict:
    return {"pass": bool(passed), "value": value, "required": required, "pairs": int(pairs),
            "witness": witness}


def compose_cle(f: SampledMap, phi: Embedding, gamma: float, d: float, A: float | None = None,
                B: float | None = None, *, height: int | None = None,
                branching: int | None = None) -> tuple[Embedding, ClaimReport]:
    """Compose a coarse Lipschitz embedding ``f`` with ``phi`` on the greedy
    level-k subtree, ``k`` minimal with ``2**k gamma > d``, and check
    ``Lip(g) <= B`` on ancestor pairs and ``||g(J1) - g(J2)|| >= gamma d_T / A``
    on eligible pairs."""
    if not gamma > 0 or not d >= 0:
        raise ValidationError("need gamma > 0 and d >= 0")
    estimated = []
    if A is None:
        c = colip_d(f, max(d, TOL))
        if not 0 < c < math.inf:
            raise PreconditionError("cannot estimate A: no sampled pair at distance >= d with distinct images")
        A = 1 / c
        estimated.append("A")
    if B is None:
        B = lip_d(f, max(d, TOL))
        estimated.append("B")
    if not A > 0 or not B > 0:
        raise ValidationError("A and B must be positive")
    k_min = minimal_level(gamma, d)
    T, k = _level_tree(phi, k_min, height, branching)
    sub = Embedding(phi.space, {v: phi.point(v) for v in T.vertices}, source=T)
    cert = certify(sub)
    if cert.lip_ancestor > 1 + 1e-9:
        raise PreconditionError(f"phi must satisfy ||dphi|| <= d_T on ancestor pairs, got ratio {cert.lip_ancestor}")
    if cert.colip_ancestor < gamma - TOL or cert.gamma < gamma - TOL:
        raise PreconditionError(f"phi is not certified at gamma={gamma}: ancestor colip {cert.colip_ancestor}, "
                                f"sibling gamma {cert.gamma}")
    idx = f.lookup(sub.source_matrix())
    g = Embedding(f.codomain_space, {v: f.values[i] for v, i in zip(T.vertices, idx)}, source=T)
    (desc, anc, ar), (ei, ej, ed, ex) = _pair_checks(g.space, g.source_matrix(), T)
    lip_g = float(ar.max()) if len(ar) else 0.0
    c1 = lip_g <= B + TOL
    w1 = None if c1 else _vpair(T, anc[np.argmax(ar)], desc[np.argmax(ar)])
    sep = ex / ed if len(ed) else np.zeros(0)
    need = gamma / A
    sep_min = float(sep.min()) if len(sep) else None
    c2 = sep_min is None or sep_min >= need - TOL
    w2 = None if c2 else _vpair(T, ei[np.argmin(sep)], ej[np.argmin(sep)])
    rep = ClaimReport(c1 and c2, k, k_min, {"gamma": gamma, "d": d, "A": A, "B": B}, estimated,
                      {"lipschitz": _claim(c1, lip_g, B, len(ar), w1),
                       "separation": _claim(c2, sep_min, need, len(sep), w2)}, len(T))
    return g, rep


def lift_quotient(f: SampledMap, v: Embedding, consts: QuotientConstants, gamma: float, *,
                  lip_d_value: float | None = None, omega_value: float | None = None,
                  height: int | None = None, branching: int | None = None) -> tuple[Embedding, ClaimReport]:
    """Lift ``v`` (into the codomain) through the sampled quotient ``f`` on
    the greedy level-k subtree, ``k`` minimal with
    ``2**k gamma > omega_f(d) + 2K``.  Preimages are picked root to leaf,
    smallest sample index first; raises :class:`LiftingError` when the
    sample has no admissible point."""
    if not gamma > 0:
        raise ValidationError("gamma must be positive")
    if f.codomain_space != v.space:
        raise ValidationError(f"embedding lives in {v.space}, map codomain is {f.codomain_space}")
    K, C, d = consts.K, consts.C, consts.d
    estimated = []
    if omega_value is None:
        omega_value = omega(f, d)
        estimated.append("omega_d")
    if lip_d_value is None:
        lip_d_value = lip_d(f, d)
        estimated.append("lip_d")
    if not lip_d_value > 0 or not math.isfinite(omega_value):
        raise PreconditionError(f"need 0 < Lip_d(f) < inf and finite omega_f(d); got {lip_d_value}, {omega_value}")
    k_min = minimal_level(gamma, omega_value + 2 * K)
    T, k = _level_tree(v, k_min, height, branching)
    V = v.points(T.vertices)
    FY = f.values
    u = np.full(len(T), -1, dtype=np.int64)
    for n in range(len(T)):
        near_v = f.codomain_space.norm(FY - V[n]) <= K + TOL
        p = T.parents[n]
        if p < 0:
            ok = near_v
            radius = None
        else:
            radius = C * (float(f.codomain_space.norm(V[n] - V[p])) + K)
            ok = near_v & (f.dx_rows(np.array([u[p]]))[0] <= radius + TOL)
        hits = np.nonzero(ok)[0]
        if not len(hits):
            raise LiftingError(f"no admissible sample point for {format_vertex(T.vertices[n])}",
                               T.vertices[n],
                               {"K": K, "C": C, "radius": radius,
                                "parent_index": None if p < 0 else int(u[p]),
                                "candidates_near_image": int(near_v.sum())})
        u[n] = hits[0]
    if f.domain is None:
        raise PreconditionError("lifting into an abstract domain has no coordinates to report")
    g = Embedding(f.domain_space, {w: f.domain[i] for w, i in zip(T.vertices, u)}, source=T)
    (desc, anc, ar), (ei, ej, ed, ex) = _pair_checks(g.space, g.source_matrix(), T)
    lip_g = float(ar.max()) if len(ar) else 0.0
    c1 = lip_g <= 2 * C + TOL
    w1 = None if c1 else _vpair(T, anc[np.argmax(ar)], desc[np.argmax(ar)])
    sep = ex / ed if len(ed) else np.zeros(0)
    need = gamma / (2 * lip_d_value)
    sep_min = float(sep.min()) if len(sep) else None
    c2 = sep_min is None or sep_min >= need - TOL
    w2 = None if c2 else _vpair(T, ei[np.argmin(sep)], ej[np.argmin(sep)])
    resid = f.codomain_space.norm(FY[u] - V)
    c3 = float(resid.max()) <= K + TOL
    dmin = float(ex.min()) if len(ex) else None
    c4 = dmin is None or dmin >= d - TOL
    w4 = None if c4 else _vpair(T, ei[np.argmin(ex)], ej[np.argmin(ex)])
    claims = {"lipschitz": _claim(c1, lip_g, 2 * C, len(ar), w1),
              "separation": _claim(c2, sep_min, need, len(sep), w2),
              "k_invariant": _claim(c3, float(resid.max()), K, len(T)),
              "dichotomy": _claim(c4, dmin, d, len(ex), w4)}
    if not c4:
        log.error("lifted eligible pair closer than d: contradicts the choice of k on this sample")
    rep = ClaimReport(c1 and c2 and c3 and c4, k, k_min,
                      {"gamma": gamma, "K": K, "C": C, "d": d, "omega_d": omega_value, "lip_d": lip_d_value},
                      estimated, claims, len(T), u.tolist())
    return g, rep


def projection_sample(points, pad: float = 0.5, stride: int = 8, p: float = math.inf) -> SampledMap:
    """Quotient ``(y, z) -> y`` from ``l_p^{2n}`` onto ``l_p^n`` sampled on
    ``points`` padded with zero and with ``+-pad`` along every ``stride``-th
    padding axis.  Each image point has an exact section, so ``K = 0`` and
    ``C = 1`` hold on the sample."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    n = P.shape[1]
    offs = [np.zeros(n)]
    if pad > 0:
        for i in range(0, n, max(stride, 1)):
            for s in (pad, -pad):
                e = np.zeros(n)
                e[i] = s
                offs.append(e)
    X = np.concatenate([np.hstack([P, np.broadcast_to(o, P.shape)]) for o in offs])
    return SampledMap(X, X[:, :n].copy(), SeqSpace(p, n), SeqSpace(p, 2 * n))
