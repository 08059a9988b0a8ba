"""Shared solver result and configuration types."""
from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

from ..model.ir import Solution

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
TIMEOUT_NO_SOLUTION = "timeout_no_solution"

SOLVER_PATH_ENV = "WDNRECOVER_SOLVER"


class BackendError(RuntimeError):
    """Solver process failure, rejected input or unparseable output."""

    def __init__(self, message: str, output: str = "") -> None:
        super().__init__(message if not output else f"{message}\n--- solver output ---\n{output}")
        self.output = output


@dataclass
class SolveOutcome:
    status: str
    solution: Solution | None = None
    objective: float = math.nan
    dual_bound: float | None = None
    wall_time: float = 0.0
    nodes: int = 0
    log: str = ""
    iterations: int = 0
    # total elastic slack used by the nonlinear solver
    elastic: float = 0.0

    @property
    def has_solution(self) -> bool:
        return self.solution is not None

    @property
    def values(self) -> dict[str, float]:
        if self.solution is None:
            raise ValueError(f"outcome with status {self.status} carries no solution")
        return self.solution.values


@dataclass
class BackendConfig:
    kind: str = "highs"  # micro | external | highs
    executable: str | None = None
    # placeholders {mps}, {sol}, {timelimit}; the default runs the bundled HiGHS runner
    arguments: tuple[str, ...] = ("-m", "wdnrecover.solvers.highs_runner", "{mps}", "{sol}",
                                  "{timelimit}")
    time_limit: float = 3000.0
    mip_gap: float = 1e-9
    threads: int = 1
    max_binaries: int = 40
    max_vars: int = 2000
    # absolute time.monotonic() deadline shared across calls; None means no global limit
    deadline: float | None = None

    def __post_init__(self) -> None:
        if not self.time_limit > 0:
            raise ValueError("time limit must be positive")
        if self.kind not in ("micro", "external", "highs"):
            raise ValueError(f"unknown backend kind {self.kind!r}")

    def resolved_executable(self) -> str:
        import sys

        return self.executable or os.environ.get(SOLVER_PATH_ENV) or sys.executable

    def effective_limit(self) -> float:
        """Seconds available to the next call, honoring the global deadline."""
        limit = self.time_limit
        if self.deadline is not None:
            limit = min(limit, self.deadline - time.monotonic())
        return max(limit, 0.0)


@dataclass
class SlpConfig:
    max_iterations: int = 200
    radius_initial: float = 0.25
    radius_min: float = 1e-8
    radius_max: float = 1.0
    tolerance: float = 1e-7
    step_tolerance: float = 1e-10
    penalties: tuple[float, ...] = field(default=(10.0, 1e2, 1e3, 1e4, 1e5, 1e6))
    polish_iterations: int = 30
    time_limit: float = 300.0

    def __post_init__(self) -> None:
        vals = (self.max_iterations, self.radius_initial, self.radius_min, self.radius_max,
                self.tolerance, self.step_tolerance, self.time_limit)
        if any(not v > 0 for v in vals) or not self.penalties or min(self.penalties) <= 0:
            raise ValueError("SLP settings must be positive")
        if not self.radius_min <= self.radius_initial <= self.radius_max:
            raise ValueError("trust radii must satisfy min <= initial <= max")
