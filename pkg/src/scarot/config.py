"""Run-time configuration shared by the library entry points and the CLI."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass

from .errors import BadParameter

TOL_ORTH = 1e-10
TOL_REPROJECT = 1e-6
EPS_STRAT = 1e-8
TOL_OPT = 1e-10


@dataclass(frozen=True)
class RunConfig:
    k: float = 1.0
    eps: float = 1e-12
    tol_opt: float = TOL_OPT
    eps_strat: float = EPS_STRAT
    max_iter: int = 1000
    max_outer: int = 100
    seed: int = 0
    B: int = 200
    level: float = 0.95

    def __post_init__(self):
        for name in ("k", "eps", "tol_opt", "eps_strat"):
            if not getattr(self, name) > 0:
                raise BadParameter(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("max_iter", "max_outer", "B"):
            if int(getattr(self, name)) < 1:
                raise BadParameter(f"{name} must be >= 1, got {getattr(self, name)!r}")
        if not 0.0 < self.level < 1.0:
            raise BadParameter(f"level must lie in (0, 1), got {self.level!r}")
        if self.seed < 0:
            raise BadParameter("seed must be non-negative")

    def as_dict(self) -> dict:
        return asdict(self)


def max_threads() -> int:
    """Parallelism cap from ``SCAROT_THREADS`` (default 1)."""
    raw = os.environ.get("SCAROT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)
