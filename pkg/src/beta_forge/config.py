"""Run configuration, budgets and seeding.

Budgets default to the values below and can be overridden globally with the
``BETA_FORGE_BUDGET`` environment variable, either a single integer (applied
to both budgets) or ``vertex=N,eval=M``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

DEFAULT_VERTEX_BUDGET = 10**6
DEFAULT_EVAL_BUDGET = 2 * 10**5
DEFAULT_TOLERANCE = 1e-9
SCHEMA_TAG = "beta-forge/1"
ENV_BUDGET = "BETA_FORGE_BUDGET"


def _env_budgets() -> dict[str, int]:
    raw = os.environ.get(ENV_BUDGET, "").strip()
    if not raw:
        return {}
    try:
        if "=" not in raw:
            n = int(raw)
            return {"vertex": n, "eval": n}
        out = {}
        for part in raw.split(","):
            key, val = part.split("=")
            key = key.strip()
            if key not in ("vertex", "eval"):
                raise ValueError(key)
            out[key] = int(val)
        return out
    except ValueError as exc:
        raise ValidationError(f"cannot parse {ENV_BUDGET}={raw!r}") from exc


def vertex_budget() -> int:
    return _env_budgets().get("vertex", DEFAULT_VERTEX_BUDGET)


def eval_budget() -> int:
    return _env_budgets().get("eval", DEFAULT_EVAL_BUDGET)


@dataclass
class RunConfig:
    seed: int = 0
    vertex_budget: int = DEFAULT_VERTEX_BUDGET
    eval_budget: int = DEFAULT_EVAL_BUDGET
    tolerance: float = DEFAULT_TOLERANCE
    output_path: str | None = None
    threads: int = 1

    def __post_init__(self):
        if self.vertex_budget <= 0 or self.eval_budget <= 0:
            raise ValidationError("budgets must be positive")
        if self.tolerance < 0:
            raise ValidationError("tolerance must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must fit in 64 bits")

    @classmethod
    def from_env(cls, **overrides) -> "RunConfig":
        env = _env_budgets()
        kw = {"vertex_budget": env.get("vertex", DEFAULT_VERTEX_BUDGET),
              "eval_budget": env.get("eval", DEFAULT_EVAL_BUDGET)}
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)

    def rngs(self, n: int) -> list[np.random.Generator]:
        """Independent generators split from the run seed."""
        return spawn_rngs(self.seed, n)


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.default_rng(s) for s in children]
