"""Finite-configuration estimates of the property (beta) modulus.

For a space ``X``, separation ``t`` and ``m`` points,

    beta_m(t) = 1 - sup { min_i ||x - x_i|| / 2 :
                          x, x_i in B_X, ||x_i - x_j|| >= t for i != j }

with ``sup {} = 0`` (value 1, flagged vacuous).  The grid method is an exact
search over a lattice inside the unit ball; the heuristic methods return the
value of an explicit feasible witness, hence an upper bound on ``beta_m(t)``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import config
from .errors import BudgetError, InfeasibleConfigError, ValidationError, VacuousRangeError
from .spaces import SeqSpace

FEAS_EPS = 1e-9
GRID_MAX_DIM = 3
GRID_MAX_M = 3
GRID_MIN_STEP = 0.05
METHODS = ("grid", "random-restart", "anneal")


@dataclass
class BetaConfig:
    space: SeqSpace
    x: np.ndarray
    points: np.ndarray
    t: float

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))

    @property
    def m(self) -> int:
        return len(self.points)

    def validate(self, eps: float = FEAS_EPS) -> None:
        sp = self.space
        if self.x.shape != (sp.dim,) or self.points.shape[1] != sp.dim:
            raise ValidationError("configuration dimension does not match the space")
        if sp.norm(self.x) > 1 + eps:
            raise InfeasibleConfigError(f"center has norm {sp.norm(self.x):.12g} > 1")
        norms = sp.norm(self.points)
        if np.any(norms > 1 + eps):
            i = int(np.argmax(norms))
            raise InfeasibleConfigError(f"point {i} has norm {norms[i]:.12g} > 1")
        if self.m > 1:
            d = sp.pairwise(self.points)
            d[np.diag_indices(self.m)] = np.inf
            i, j = np.unravel_index(np.argmin(d), d.shape)
            if d[i, j] < self.t - eps:
                raise InfeasibleConfigError(
                    f"points {i} and {j} are {d[i, j]:.12g} apart, below separation {self.t}")

    def to_dict(self) -> dict:
        return {"x": [float(v) for v in self.x], "points": [[float(v) for v in p] for p in self.points]}


def config_value(cfg: BetaConfig, eps: float = FEAS_EPS) -> float:
    """``min_i ||x - x_i|| / 2`` of a feasible configuration."""
    cfg.validate(eps)
    return float(np.min(cfg.space.dist(cfg.x, cfg.points)) / 2)


@dataclass
class ModulusEstimate:
    space: SeqSpace
    t: float
    m: int
    value: float
    witness: BetaConfig | None
    method: str
    is_oracle: bool
    slack: float = 0.0
    separation_slack: float = 0.0
    evaluations: int = 0
    vacuous: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def sup(self) -> float:
        return 1.0 - self.value

    def to_dict(self) -> dict:
        return {
            "space": str(self.space), "t": self.t, "m": self.m, "method": self.method,
            "value": self.value, "slack": self.slack, "separation_slack": self.separation_slack,
            "is_oracle": self.is_oracle, "vacuous": self.vacuous,
            "witness": None if self.witness is None else self.witness.to_dict(),
            "evaluations": int(self.evaluations),
        }


def tau(beta_value: float) -> float:
    if not 0 <= beta_value <= 1:
        raise ValidationError(f"modulus value must lie in [0, 1], got {beta_value}")
    return 1 - beta_value / 2


def grid_slack(space: SeqSpace, step: float) -> float:
    """Distance a ball point moves when every coordinate is rounded toward
    zero onto the lattice (bounded by ``step * dim**(1/p)``)."""
    return step if space.p == math.inf else step * space.dim ** (1 / space.p)


def _check_args(space: SeqSpace, t: float, m: int) -> None:
    if not t > 0:
        raise ValidationError(f"separation must be positive, got {t}")
    if t > 2:
        raise VacuousRangeError(f"t={t} exceeds 2, the diameter of the unit ball")
    if m < 2:
        raise ValidationError(f"need m >= 2 points, got {m}")


def beta_finite(space: SeqSpace, t: float, m: int, method: str = "grid", *,
                step: float = 0.05, budget: int | None = None, seed: int = 0,
                restarts: int = 16, eps: float = FEAS_EPS, threads: int = 1) -> ModulusEstimate:
    """Estimate ``beta_m(t)`` for ``space``.

    ``grid`` is exhaustive over the lattice of spacing ``step`` in the unit
    ball (``dim <= 3``, ``m <= 3``, ``step >= 0.05``).  ``random-restart`` and
    ``anneal`` are seeded local searches; their witness is always feasible.
    """
    _check_args(space, t, m)
    if method == "grid":
        return _grid_estimate(space, t, m, step, eps)
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; choose from {METHODS}")
    budget = config.eval_budget() if budget is None else budget
    if budget <= 0 or restarts <= 0:
        raise ValidationError("budget and restarts must be positive")
    per = max(budget // restarts, 1)
    seeds = np.random.SeedSequence(seed).spawn(restarts)
    job = _anneal_restart if method == "anneal" else _local_restart

    def one(k):
        return job(space, t, m, np.random.default_rng(seeds[k]), per, eps)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(one, range(restarts)))
    else:
        results = [one(k) for k in range(restarts)]
    best, evals = None, 0
    for val, X, n in results:
        evals += n
        if X is not None and (best is None or val > best[0]):
            best = (val, X)
    if best is None:
        return ModulusEstimate(space, t, m, 1.0, None, method, False, evaluations=evals, vacuous=True)
    cfg = BetaConfig(space, best[1][0], best[1][1:], t)
    v = config_value(cfg, eps)
    return ModulusEstimate(space, t, m, _clip(1.0 - v), cfg, method, False, evaluations=evals)


# --- exhaustive lattice oracle ---------------------------------------------

def grid_points(space: SeqSpace, step: float, eps: float = FEAS_EPS) -> tuple[np.ndarray, np.ndarray]:
    n = int(math.floor(1 / step + 1e-9))
    ax = np.arange(-n, n + 1)
    ints = np.stack(np.meshgrid(*([ax] * space.dim), indexing="ij"), -1).reshape(-1, space.dim)
    pts = ints * step
    keep = space.norm(pts) <= 1 + eps
    return ints[keep], pts[keep]


def _grid_estimate(space, t, m, step, eps) -> ModulusEstimate:
    if space.dim > GRID_MAX_DIM or m > GRID_MAX_M or step < GRID_MIN_STEP:
        raise BudgetError(f"grid oracle limited to dim <= {GRID_MAX_DIM}, m <= {GRID_MAX_M}, "
                          f"step >= {GRID_MIN_STEP}")
    ints, pts = grid_points(space, step, eps)
    # signed permutations are isometries preserving the lattice, so only
    # centers with 0 <= k_1 <= ... <= k_d need to be tried
    reps = np.nonzero(np.all(ints >= 0, axis=1) & np.all(np.diff(ints, axis=1) >= 0, axis=1))[0]
    reps = reps[np.argsort(-space.norm(pts[reps]), kind="stable")]
    best, witness, evals = -1.0, None, 0
    thr = t - eps
    for c in reps:
        dx = space.pairwise(pts[c], pts)[0]
        evals += len(pts)
        order = np.argsort(-dx, kind="stable")
        ds = dx[order]
        limit = int(np.searchsorted(-ds, -2 * best, side="left")) if best >= 0 else len(ds)
        if limit < m:
            continue
        found, n = _first_clique(space, pts[order[:limit]], m, thr)
        evals += n
        if found is None:
            continue
        pos, members = found
        val = ds[pos] / 2
        if val > best:
            best = float(val)
            witness = (pts[c], pts[order[members]])
    rho = grid_slack(space, step)
    if witness is None:
        return ModulusEstimate(space, t, m, 1.0, None, "grid", True, rho, 2 * rho, evals, vacuous=True,
                               extra={"step": step, "grid_points": len(pts)})
    cfg = BetaConfig(space, witness[0], witness[1], t)
    v = config_value(cfg, eps)
    return ModulusEstimate(space, t, m, _clip(1.0 - v), cfg, "grid", True, rho, 2 * rho, evals,
                           extra={"step": step, "grid_points": len(pts)})


def _first_clique(space, P, m, thr):
    """Smallest ``pos`` such that ``P[:pos + 1]`` holds ``m`` points pairwise
    at distance >= ``thr`` including ``P[pos]``; returns (pos, members)."""
    n = len(P)
    evals = 0
    lo, size = 0, 32
    while lo < n:
        hi = min(n, lo + size)
        R = space.pairwise(P[lo:hi], P[:hi]) >= thr
        evals += R.size
        for r in range(hi - lo):
            pos = lo + r
            nb = np.nonzero(R[r, :pos])[0]
            if len(nb) < m - 1:
                continue
            if m == 2:
                return (pos, [int(nb[0]), pos]), evals
            sub = _find_clique(space, P[nb], m - 1, thr)
            evals += len(nb) ** 2
            if sub is not None:
                return (pos, [int(nb[k]) for k in sub] + [pos]), evals
        lo = hi
        size = min(size * 2, 1024)
    return None, evals


def _find_clique(space, Q, k, thr):
    A = space.pairwise(Q) >= thr
    np.fill_diagonal(A, False)

    def extend(chosen, cand):
        if len(chosen) == k:
            return chosen
        for c in cand:
            rest = [d for d in cand if d > c and A[c, d]]
            if len(rest) + len(chosen) + 1 < k:
                continue
            got = extend(chosen + [c], rest)
            if got is not None:
                return got
        return None

    return extend([], list(range(len(Q))))


# --- heuristic local searches -------------------------------------------------

def _project(space: SeqSpace, X: np.ndarray) -> np.ndarray:
    n = space.norm(X)
    over = n > 1
    if np.any(over):
        X = X.copy()
        X[over] /= n[over, None]
    return X


def _score(space, X, t, eps):
    """(penalized value, secondary, feasible) of a stacked configuration."""
    dc = space.norm(X[1:] - X[0])
    P = X[1:]
    m = len(P)
    if m > 1:
        i, j = np.triu_indices(m, 1)
        sep = space.norm(P[i] - P[j]).min()
    else:
        sep = np.inf
    viol = max(0.0, t - eps - sep)
    val = dc.min() / 2
    return val - 10 * viol, dc.mean() / 2 + 0.01 * min(sep, 2.0), viol == 0.0


def _pattern_search(space, X, t, eps, budget, h0=0.25, hmin=1e-7):
    """Coordinate-wise projected search on (penalized value, spread)."""
    X = _project(space, X)
    cur = _score(space, X, t, eps)
    evals = 1
    h = h0
    rows, d = X.shape
    while h >= hmin and evals < budget:
        improved = False
        for k in range(rows):
            for c in range(d):
                for sgn in (1.0, -1.0):
                    Y = X.copy()
                    Y[k, c] += sgn * h
                    nk = space.norm(Y[k])
                    if nk > 1:
                        Y[k] /= nk
                    s = _score(space, Y, t, eps)
                    evals += 1
                    if s[0] > cur[0] + 1e-15 or (s[0] >= cur[0] and s[1] > cur[1] + 1e-15):
                        X, cur, improved = Y, s, True
                        break
        if not improved:
            h /= 2
    return X, cur, evals


def _init(space, m, rng):
    d = space.dim
    u = rng.normal(size=d)
    u /= space.norm(u)
    if rng.random() < 0.5:
        pts = rng.uniform(-1, 1, size=(m, d))
    else:
        pts = -0.6 * u + 0.6 * rng.uniform(-1, 1, size=(m, d))
    return _project(space, np.vstack([u, pts]))


def _slsqp(space, X0, t, budget):
    """Smooth epigraph solve: maximize s subject to ball, separation and
    ``||x - x_i|| >= s``; only for 1 < p < inf."""
    p = space.p
    rows, d = X0.shape
    m = rows - 1
    ii, jj = np.triu_indices(m, 1)

    def nrm_grad(U):
        n = np.linalg.norm(U, ord=p, axis=-1)
        g = np.sign(U) * np.abs(U) ** (p - 1) / np.maximum(n, 1e-12)[:, None] ** (p - 1)
        return n, g

    def cons(z):
        X = z[:-1].reshape(rows, d)
        s = z[-1]
        nb, _ = nrm_grad(X)
        ns, _ = nrm_grad(X[1 + ii] - X[1 + jj])
        nc, _ = nrm_grad(X[1:] - X[0])
        return np.concatenate([1 - nb, ns - t, nc - s])

    def cons_jac(z):
        X = z[:-1].reshape(rows, d)
        nv = len(z)
        J = np.zeros((rows + len(ii) + m, nv))
        _, gb = nrm_grad(X)
        for k in range(rows):
            J[k, k * d:(k + 1) * d] = -gb[k]
        _, gs = nrm_grad(X[1 + ii] - X[1 + jj])
        for r, (a, b) in enumerate(zip(ii, jj)):
            J[rows + r, (1 + a) * d:(2 + a) * d] = gs[r]
            J[rows + r, (1 + b) * d:(2 + b) * d] = -gs[r]
        _, gc = nrm_grad(X[1:] - X[0])
        base = rows + len(ii)
        for i in range(m):
            J[base + i, (1 + i) * d:(2 + i) * d] = gc[i]
            J[base + i, 0:d] = -gc[i]
            J[base + i, -1] = -1.0
        return J

    s0 = max(float(np.min(np.linalg.norm(X0[1:] - X0[0], ord=p, axis=1))), 0.0)
    z0 = np.concatenate([X0.ravel(), [s0]])
    obj_grad = np.zeros(len(z0))
    obj_grad[-1] = -1.0
    res = minimize(lambda z: -z[-1], z0, jac=lambda z: obj_grad, method="SLSQP",
                   constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
                   options={"maxiter": max(20, min(200, budget // 4)), "ftol": 1e-12})
    return res.x[:-1].reshape(rows, d), int(res.nfev + res.get("njev", 0))


def _local_restart(space, t, m, rng, budget, eps):
    X = _init(space, m, rng)
    evals = 0
    if 1 < space.p < math.inf:
        X, n = _slsqp(space, X, t, budget)
        evals += n
    X, cur, n = _pattern_search(space, X, t, eps, max(budget - evals, 1))
    evals += n
    if not cur[2]:
        return -1.0, None, evals
    return cur[0], X, evals


def _anneal_restart(space, t, m, rng, budget, eps):
    X = _init(space, m, rng)
    cur = _score(space, X, t, eps)
    best = (cur[0], X) if cur[2] else (-1.0, None)
    sa_budget = max(budget * 3 // 4, 1)
    T0, sigma0 = 0.05, 0.3
    for it in range(sa_budget):
        frac = it / sa_budget
        T = T0 * (1e-3 ** frac)
        sigma = sigma0 * (1e-2 ** frac)
        k = int(rng.integers(m + 1))
        Y = X.copy()
        Y[k] += rng.normal(scale=sigma, size=space.dim)
        nk = space.norm(Y[k])
        if nk > 1:
            Y[k] /= nk
        s = _score(space, Y, t, eps)
        if s[0] >= cur[0] or rng.random() < math.exp((s[0] - cur[0]) / T):
            X, cur = Y, s
            if s[2] and s[0] > best[0]:
                best = (s[0], Y)
    start = best[1] if best[1] is not None else X
    evals = sa_budget
    if 1 < space.p < math.inf:
        start, n = _slsqp(space, start, t, max(budget - evals, 1))
        evals += n
    Xp, sp, n = _pattern_search(space, start, t, eps, max(budget - evals, 1))
    evals += n
    if sp[2] and sp[0] >= best[0]:
        best = (sp[0], Xp)
    return best[0], best[1], evals


def grid_refine(est: ModulusEstimate, step: float = 0.05, rounds: int = 4,
                eps: float = FEAS_EPS) -> tuple[float, BetaConfig]:
    """Best-improvement search over every single-point lattice move of the
    witness (each point shifted by +-step along each axis), halving ``step``
    ``rounds`` times.  Returns the refined configuration value."""
    if est.witness is None:
        raise ValidationError("estimate has no witness to refine")
    space, t = est.space, est.t
    X = np.vstack([est.witness.x, est.witness.points])

    def value(Y):
        dc = space.norm(Y[1:] - Y[0]).min() / 2
        return dc

    def feasible(Y):
        if np.any(space.norm(Y) > 1 + eps):
            return False
        P = Y[1:]
        i, j = np.triu_indices(len(P), 1)
        return len(i) == 0 or space.norm(P[i] - P[j]).min() >= t - eps

    cur = value(X)
    h = step
    for _ in range(rounds + 1):
        while True:
            best_move, best_val = None, cur
            for k in range(len(X)):
                for c in range(space.dim):
                    for sgn in (1.0, -1.0):
                        Y = X.copy()
                        Y[k, c] += sgn * h
                        if not feasible(Y):
                            continue
                        v = value(Y)
                        if v > best_val + 1e-15:
                            best_move, best_val = Y, v
            if best_move is None:
                break
            X, cur = best_move, best_val
        h /= 2
    cfg = BetaConfig(space, X[0], X[1:], t)
    return config_value(cfg, eps), cfg


def _clip(v: float) -> float:
    return min(1.0, max(0.0, v))
