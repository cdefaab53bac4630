"""Finite-dimensional l_p spaces."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ValidationError


@dataclass(frozen=True)
class SeqSpace:
    p: float
    dim: int

    def __post_init__(self):
        if not (self.p >= 1 or self.p == math.inf):
            raise ValidationError(f"p must be in [1, inf], got {self.p}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValidationError(f"dim must be a positive integer, got {self.dim}")

    def __str__(self) -> str:
        p = "inf" if self.p == math.inf else (str(int(self.p)) if float(self.p).is_integer() else repr(self.p))
        return f"lp:p={p}:dim={self.dim}"

    @classmethod
    def parse(cls, text: str) -> "SeqSpace":
        """Parse ``lp:p=<value|inf>:dim=<n>``."""
        parts = text.strip().split(":")
        if len(parts) != 3 or parts[0] != "lp":
            raise ValidationError(f"space spec must be lp:p=<p>:dim=<n>, got {text!r}")
        try:
            kv = dict(part.split("=", 1) for part in parts[1:])
            p = math.inf if kv["p"].lower() in ("inf", "infinity") else float(kv["p"])
            return cls(p, int(kv["dim"]))
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"bad space spec {text!r}") from exc

    def with_dim(self, dim: int) -> "SeqSpace":
        return SeqSpace(self.p, dim)

    def _check(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if a.shape[-1] != self.dim:
            raise ValidationError(f"expected dimension {self.dim}, got {a.shape[-1]}")
        return a

    def norm(self, x) -> float | np.ndarray:
        """l_p norm along the last axis."""
        x = self._check(x)
        return np.linalg.norm(x, ord=self.p, axis=-1)

    def dist(self, x, y) -> float | np.ndarray:
        return self.norm(self._check(x) - self._check(y))

    def pairwise(self, a, b=None) -> np.ndarray:
        a = np.atleast_2d(self._check(a))
        b = a if b is None else np.atleast_2d(self._check(b))
        if self.p == math.inf:
            return cdist(a, b, "chebyshev")
        if self.p == 1:
            return cdist(a, b, "cityblock")
        if self.p == 2:
            return cdist(a, b, "euclidean")
        return cdist(a, b, "minkowski", p=self.p)

    def in_ball(self, x, radius: float = 1.0, eps: float = 1e-9) -> bool | np.ndarray:
        return self.norm(x) <= radius + eps


def norm(space: SeqSpace, x) -> float:
    return float(space.norm(x))


def midpoint(space: SeqSpace, x, y, lam: float) -> np.ndarray:
    """Metric-convexity witness ``(1 - lam) x + lam y`` for ``0 < lam < 1``."""
    if not 0 < lam < 1:
        raise ValidationError(f"lambda must lie in (0, 1), got {lam}")
    x = space._check(x)
    y = space._check(y)
    return (1 - lam) * x + lam * y
