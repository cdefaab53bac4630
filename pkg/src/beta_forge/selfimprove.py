"""Self-improvement engine: repeated window-skipping refinement that keeps,
under every usable child, the grandchild whose image is closest to the
grandparent's image, with per-fork (beta) bound checks and per-level
contraction records."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .embeddings import Embedding, ancestor_ratios, certify, eligible_min_ratio
from .errors import PreconditionError, ValidationError
from .modulus import beta_finite, grid_slack
from .pruned import RefineReport, TreeLike, inductive_refine
from .spaces import SeqSpace
from .tree import PrunedTree, Vertex

BOUND_ATOL = 1e-9


class ModulusProvider:
    """Callable ``(t, m) -> (beta, tolerance, method)`` with caching.

    ``t`` is floored to a bucket of width ``bucket`` (and, for the grid
    oracle, first lowered by the lattice separation slack) so that the
    returned value never exceeds the modulus at ``t``; ``tolerance`` is on
    the modulus scale.  Grid requests outside the oracle's limits fall back
    to ``random-restart``.
    """

    def __init__(self, space: SeqSpace, kind: str = "random-restart", *, step: float = 0.05,
                 budget: int | None = None, restarts: int = 8, seed: int = 0,
                 bucket: float = 0.01, const: float | None = None):
        if kind not in ("grid", "random-restart", "anneal", "const"):
            raise ValidationError(f"unknown modulus source {kind!r}")
        if kind == "const" and (const is None or not 0 <= const <= 1):
            raise ValidationError("const modulus needs a value in [0, 1]")
        self.space, self.kind, self.step = space, kind, step
        self.budget = budget if budget is not None else 8000
        self.restarts, self.seed, self.bucket, self.const = restarts, seed, bucket, const
        self.cache: dict = {}
        self.estimates: list = []

    @classmethod
    def parse(cls, text: str, space: SeqSpace, seed: int = 0) -> "ModulusProvider":
        """``grid:step=0.1``, ``random-restart:budget=8000:restarts=8``,
        ``anneal:budget=8000``, ``const:0``."""
        head, *rest = text.strip().split(":")
        kw: dict = {}
        for part in rest:
            if "=" not in part:
                kw["const"] = float(part)
                continue
            k, v = part.split("=", 1)
            if k in ("step", "bucket", "value"):
                kw["const" if k == "value" else k] = float(v)
            elif k in ("budget", "restarts"):
                kw[k] = int(v)
            else:
                raise ValidationError(f"unknown modulus option {k!r}")
        return cls(space, head, seed=seed, **kw)

    def describe(self) -> str:
        if self.kind == "const":
            return f"const:{self.const}"
        if self.kind == "grid":
            return f"grid:step={self.step}"
        return f"{self.kind}:budget={self.budget}:restarts={self.restarts}"

    def __call__(self, t: float, m: int) -> tuple[float, float, str]:
        if self.kind == "const":
            return self.const, 0.0, "const"
        if m < 2 or not t > 0:
            # a single point (or no separation) can sit antipodal to the center
            return 0.0, 0.0, "trivial"
        use_grid = (self.kind == "grid" and self.space.dim <= 3 and m <= 3)
        rho = grid_slack(self.space, self.step) if use_grid else 0.0
        tq = min(t, 2.0) - 2 * rho
        tq = math.floor(tq / self.bucket + 1e-9) * self.bucket
        if tq <= 0:
            return 0.0, 0.0, "trivial"
        key = (round(tq, 12), m)
        if key not in self.cache:
            method = "grid" if use_grid else ("anneal" if self.kind == "anneal" else "random-restart")
            est = beta_finite(self.space, tq, m, method, step=self.step, budget=self.budget,
                              restarts=self.restarts, seed=self.seed)
            self.estimates.append(est)
            self.cache[key] = (est.value, rho if use_grid else 0.0, method)
        return self.cache[key]


@dataclass
class Selection:
    node: Vertex
    child: Vertex
    chosen: Vertex
    index: int
    candidates: int
    distance: float
    r: float
    s: float
    beta: float | None = None
    bound: float | None = None
    passed: bool | None = None
    method: str | None = None

    def to_dict(self) -> dict:
        return {"node": list(self.node), "child": list(self.child), "chosen": list(self.chosen),
                "index": self.index, "candidates": self.candidates, "chosen_distance": self.distance,
                "r": self.r, "s": None if math.isinf(self.s) else self.s,
                "beta": self.beta, "bound": self.bound, "pass": self.passed, "modulus_method": self.method}


@dataclass
class StepStats:
    selections: list[Selection]
    refine: RefineReport


def fork_geometry(phi: Embedding, J: Vertex, child: Vertex, candidates: list) -> tuple[np.ndarray, float, float]:
    """Distances from phi(J) to each candidate, local radius r and local separation s."""
    sp = phi.space
    pJ, pc = phi.point(J), phi.point(child)
    G = phi.points(candidates)
    dist = sp.norm(G - pJ)
    r = max(float(sp.norm(pJ - pc)), float(sp.norm(G - pc).max()))
    if len(G) > 1:
        D = sp.pairwise(G)
        s = float(D[np.triu_indices(len(G), 1)].min())
    else:
        s = math.inf
    return dist, r, s


def improve_step(P: TreeLike, phi: Embedding, gamma: float | None = None,
                 modulus: ModulusProvider | None = None, tol: float = BOUND_ATOL
                 ) -> tuple[PrunedTree, StepStats]:
    """Refine ``P`` one level, choosing under each usable child the
    grandchild closest to the grandparent's image (ties: lowest index)."""
    if gamma is not None and not gamma > 0:
        raise ValidationError("gamma must be positive")
    selections: list[Selection] = []

    def choose(J, child, cands):
        dist, r, s = fork_geometry(phi, J, child, cands)
        k = int(np.argmin(dist))
        sel = Selection(tuple(J), tuple(child), tuple(cands[k]), k, len(cands), float(dist[k]), r, s)
        if modulus is not None:
            if r == 0:
                sel.beta, sel.bound, sel.passed, sel.method = 0.0, 0.0, sel.distance <= tol, "trivial"
            else:
                beta, slack, method = modulus(s / r, len(cands))
                sel.beta, sel.method = beta, method
                sel.bound = 2 * r * (1 - beta)
                sel.passed = bool(sel.distance <= sel.bound + 2 * r * slack + tol)
        selections.append(sel)
        return k

    refined, report = inductive_refine(P, choose)
    return refined, StepStats(selections, report)


@dataclass
class LevelRecord:
    n: int
    lip_bound_paper: float | None
    lip_observed: float
    achieved_branching: int
    min_branching: int
    nodes: int
    eligible_pairs: int
    gamma_ok: bool
    selections: list[Selection] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"n": self.n, "lip_bound_paper": self.lip_bound_paper, "lip_observed": self.lip_observed,
                "achieved_branching": self.achieved_branching, "min_branching": self.min_branching,
                "nodes": self.nodes, "eligible_pairs": self.eligible_pairs, "gamma_ok": self.gamma_ok,
                "selections": [s.to_dict() for s in self.selections]}


@dataclass
class ContractionTrace:
    space: SeqSpace
    gamma: float
    scale: float
    gamma_normalized: float
    tau: float | None
    modulus: str | None
    levels: list[LevelRecord]

    @property
    def selections(self) -> list[Selection]:
        return [s for lv in self.levels for s in lv.selections]

    @property
    def bounds_pass(self) -> bool | None:
        checked = [s.passed for s in self.selections if s.passed is not None]
        return all(checked) if checked else None

    @property
    def monotone(self) -> bool:
        obs = [lv.lip_observed for lv in self.levels]
        return all(b <= a + BOUND_ATOL for a, b in zip(obs, obs[1:]))

    @property
    def gamma_consistent(self) -> bool:
        return all(lv.gamma_ok for lv in self.levels)

    def to_dict(self) -> dict:
        return {"space": str(self.space), "gamma": self.gamma, "scale": self.scale,
                "gamma_normalized": self.gamma_normalized, "tau": self.tau, "modulus": self.modulus,
                "monotone": self.monotone, "gamma_consistent": self.gamma_consistent,
                "bounds_pass": self.bounds_pass,
                "levels": [lv.to_dict() for lv in self.levels]}

    def csv_rows(self) -> list[dict]:
        return [{"level": lv.n, "lip_bound_paper": "" if lv.lip_bound_paper is None else lv.lip_bound_paper,
                 "lip_observed": lv.lip_observed, "branching": lv.achieved_branching}
                for lv in self.levels]


def _level_record(n, psi, tree, gamma_n, bound, selections=()):
    sub = Embedding(psi.space, {v: psi.point(v) for v in tree.vertices}, source=tree)
    r = ancestor_ratios(sub)
    lip_obs = float(r.max()) if len(r) else 0.0
    _, count, _ = eligible_min_ratio(sub)
    # with no eligible pair the separation hypothesis says nothing at this level
    ok = count == 0 or gamma_n <= lip_obs + BOUND_ATOL
    return LevelRecord(n, bound, lip_obs, tree.branching, tree.min_branching, len(tree), count, ok,
                       list(selections))


def run(phi: Embedding, gamma: float, levels: int, space: SeqSpace | None = None,
        modulus: ModulusProvider | None = None) -> ContractionTrace:
    """Iterate :func:`improve_step` ``levels`` times after rescaling ``phi``
    to Lipschitz constant 1; record per-level contraction and check the
    per-fork bound when a modulus source is given."""
    if phi.source is None:
        raise PreconditionError("run needs an embedding with a source structure")
    if levels < 0:
        raise ValidationError("levels must be non-negative")
    if not gamma > 0:
        raise ValidationError("gamma must be positive")
    if space is not None and space != phi.space:
        raise ValidationError(f"space {space} does not match embedding space {phi.space}")
    need = 2**levels
    if phi.source.height < need:
        raise PreconditionError(f"source height {phi.source.height} too shallow: {levels} levels need height >= {need}")
    cert = certify(phi)
    if gamma > cert.gamma + BOUND_ATOL:
        raise PreconditionError(f"gamma={gamma} exceeds the certified separation {cert.gamma}")
    if cert.lip <= 0:
        raise PreconditionError("embedding is constant; nothing to normalize")
    scale = cert.lip
    psi = phi.scaled(1 / scale)
    gamma_n = gamma / scale
    tau = None
    if modulus is not None:
        beta, _, _ = modulus(min(2 * gamma_n, 2.0), max(phi.source.branching, 2))
        tau = 1 - beta / 2
    bound = (lambda n: tau**n) if tau is not None else (lambda n: None)
    recs = [_level_record(0, psi, phi.source, gamma_n, bound(0))]
    P: TreeLike = phi.source
    for n in range(levels):
        P, stats = improve_step(P, psi, gamma_n, modulus)
        recs.append(_level_record(n + 1, psi, P, gamma_n, bound(n + 1), stats.selections))
    return ContractionTrace(phi.space, gamma, scale, gamma_n, tau,
                            None if modulus is None else modulus.describe(), recs)


def materialize_support(phi: Embedding, tree: TreeLike, levels: int) -> Embedding:
    """Evaluate a lazily defined ``phi`` on exactly the vertices a
    ``levels``-step run over ``tree`` touches, and return it as a finite
    table whose source is that (parent-closed) vertex set.

    Selection depends only on distances, so a run over the returned
    embedding makes the same choices as over the full tree.
    """
    if phi.fill is None:
        raise ValidationError("materialize_support needs a lazily evaluated embedding")
    phi.point(tree.root)
    P = tree
    for _ in range(levels):
        if P.height < 2:
            break
        P, _ = improve_step(P, phi)
    return phi.materialized(level=tree.level)


def random_walk_embedding(space: SeqSpace, seed: int, step: float = 1.0) -> Embedding:
    """Lazy embedding ``phi(J + (a,)) = phi(J) + step * N(0, I)``; each
    increment is seeded by the vertex itself, so values do not depend on
    evaluation order."""
    emb = Embedding(space)

    def fill(v):
        if not v:
            return np.zeros(space.dim)
        rng = np.random.default_rng([seed, len(v), *v])
        return emb.point(v[:-1]) + step * rng.normal(size=space.dim)

    emb.fill = fill
    return emb
