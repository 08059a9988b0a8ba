"""Solver-agnostic optimization model representation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Union

import numpy as np
import scipy.sparse as sp

CONTINUOUS = "continuous"
BINARY = "binary"

LE, EQ, GE = "<=", "=", ">="

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
TIMEOUT = "timeout"

# Constraint families of the physical model. Variable bounds, linear rows and
# nonlinear terms are each labelled with one of these so model evaluation and
# the independent oracle can be compared family by family.
FAMILIES = (
    "head_bounds",
    "pipe_flow",
    "pipe_flow_bounds",
    "pipe_head_bounds",
    "pipe_head_difference",
    "pipe_head_loss",
    "pump_flow_bounds",
    "pump_head",
    "pump_head_gain",
    "pump_power",
    "tank_volume_head",
    "tank_initial",
    "tank_bounds",
    "tank_update",
    "reservoir_nonneg",
    "demand_cap",
    "conservation",
    "integrality",
)
VOLUME_FAMILIES = frozenset({"tank_volume_head", "tank_initial", "tank_bounds", "tank_update"})


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Var:
    id: str
    kind: str = CONTINUOUS
    lower: float = -math.inf
    upper: float = math.inf
    tag: str = ""
    family: str | None = None

    @property
    def is_binary(self) -> bool:
        return self.kind == BINARY


@dataclass(frozen=True)
class LinConstraint:
    id: str
    coeffs: Mapping[str, float]
    sense: str
    rhs: float
    family: str = ""

    def activity(self, values: Mapping[str, float]) -> float:
        return sum(c * values[v] for v, c in self.coeffs.items())

    def violation(self, values: Mapping[str, float]) -> float:
        lhs = self.activity(values)
        if self.sense == LE:
            return max(lhs - self.rhs, 0.0)
        if self.sense == GE:
            return max(self.rhs - lhs, 0.0)
        return abs(lhs - self.rhs)


@dataclass(frozen=True)
class SignedPower:
    """out = coeff * base**exponent on base >= 0."""

    id: str
    base: str
    out: str
    coeff: float
    exponent: float
    group: str
    family: str = "pipe_head_loss"
    arc: str = ""
    t: int | None = None

    def value(self, base: float) -> float:
        return self.coeff * max(base, 0.0) ** self.exponent

    def slope(self, base: float) -> float:
        return self.coeff * self.exponent * max(base, 0.0) ** (self.exponent - 1.0)

    def residual(self, values: Mapping[str, float]) -> float:
        return values[self.out] - self.value(values[self.base])


@dataclass(frozen=True)
class Quadratic:
    """out = alpha*q**2 + beta*q + gamma*z."""

    id: str
    q: str
    z: str
    out: str
    alpha: float
    beta: float
    gamma: float
    group: str
    q_min: float = 0.0
    family: str = "pump_head_gain"
    arc: str = ""
    t: int | None = None

    def value(self, q: float, z: float = 1.0) -> float:
        return self.alpha * q * q + self.beta * q + self.gamma * z

    def slope(self, q: float) -> float:
        return 2.0 * self.alpha * q + self.beta

    def residual(self, values: Mapping[str, float]) -> float:
        return values[self.out] - self.value(values[self.q], values[self.z])

    @property
    def base(self) -> str:
        return self.q


NonlinearTerm = Union[SignedPower, Quadratic]


@dataclass(frozen=True)
class ModelIR:
    vars: Mapping[str, Var]
    constraints: tuple[LinConstraint, ...]
    nonlinear: tuple[NonlinearTerm, ...] = ()
    objective: Mapping[str, float] = field(default_factory=dict)
    sense: str = "max"
    provenance: str = "N1"

    # -- queries ------------------------------------------------------------

    @property
    def binaries(self) -> list[str]:
        return [v.id for v in self.vars.values() if v.is_binary]

    def vars_with_tag(self, *tags: str) -> list[str]:
        return [v.id for v in self.vars.values() if v.tag in tags]

    @property
    def is_linear(self) -> bool:
        return not self.nonlinear

    def objective_value(self, values: Mapping[str, float]) -> float:
        return sum(c * values[v] for v, c in self.objective.items())

    def check(self) -> list[str]:
        """Structural invariant problems (empty when the model is well formed)."""
        issues = []
        for v in self.vars.values():
            if v.lower > v.upper:
                issues.append(f"var {v.id}: lower exceeds upper")
            if v.is_binary and (v.lower < 0 or v.upper > 1):
                issues.append(f"var {v.id}: binary bounds outside [0, 1]")
        for c in self.constraints:
            if not any(x != 0 for x in c.coeffs.values()):
                issues.append(f"row {c.id}: no nonzero coefficient")
            if not math.isfinite(c.rhs):
                issues.append(f"row {c.id}: rhs not finite")
            if c.sense not in (LE, EQ, GE):
                issues.append(f"row {c.id}: bad comparator {c.sense}")
            for vid in c.coeffs:
                if vid not in self.vars:
                    issues.append(f"row {c.id}: unknown var {vid}")
        for vid in self.objective:
            if vid not in self.vars:
                issues.append(f"objective: unknown var {vid}")
        for t in self.nonlinear:
            refs = (t.base, t.out) if isinstance(t, SignedPower) else (t.q, t.z, t.out)
            for vid in refs:
                if vid not in self.vars:
                    issues.append(f"term {t.id}: unknown var {vid}")
            if isinstance(t, SignedPower) and not t.exponent > 1:
                issues.append(f"term {t.id}: exponent must exceed 1")
            if isinstance(t, Quadratic) and not (t.alpha < 0 and t.gamma > 0):
                issues.append(f"term {t.id}: needs alpha < 0 and gamma > 0")
        return issues

    # -- evaluation -----------------------------------------------------------

    def violations(self, values: Mapping[str, float], tol: float = 1e-6,
                   volume_tol: float = 1e-4) -> dict[str, float]:
        """Worst violation per constraint family, only families exceeding tolerance."""
        worst: dict[str, float] = {}

        def note(family: str | None, mag: float) -> None:
            if not family:
                return
            limit = volume_tol if family in VOLUME_FAMILIES else tol
            if mag > limit:
                worst[family] = max(worst.get(family, 0.0), mag)

        for v in self.vars.values():
            x = values[v.id]
            if v.is_binary:
                note("integrality", min(abs(x), abs(x - 1.0)))
                note("integrality", max(v.lower - x, x - v.upper, 0.0))
            else:
                note(v.family, max(v.lower - x, x - v.upper, 0.0))
        for c in self.constraints:
            note(c.family, c.violation(values))
        for t in self.nonlinear:
            note(t.family, abs(t.residual(values)))
        return worst

    # -- copies -----------------------------------------------------------------

    def with_changes(self, *, vars: Mapping[str, Var] | None = None,
                     constraints: Iterable[LinConstraint] | None = None,
                     extra_constraints: Iterable[LinConstraint] = (),
                     **kw) -> "ModelIR":
        rows = tuple(self.constraints if constraints is None else constraints)
        rows = rows + tuple(extra_constraints)
        return replace(self, vars=dict(self.vars if vars is None else vars),
                       constraints=rows, **kw)


@dataclass
class Solution:
    values: dict[str, float]
    objective: float
    status: str

    def within_bounds(self, model: ModelIR, tol: float = 1e-6) -> bool:
        return all(
            v.lower - tol <= self.values[v.id] <= v.upper + tol for v in model.vars.values()
        )


@dataclass
class MatrixForm:
    """Column-ordered linear data of a model: ``sense`` applied to c."""

    names: list[str]
    c: np.ndarray
    A: sp.csr_matrix
    row_lower: np.ndarray
    row_upper: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integer: np.ndarray
    maximize: bool
    row_ids: list[str]

    @property
    def index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.names)}


def to_matrix(model: ModelIR) -> MatrixForm:
    if model.nonlinear:
        raise ModelError("model has nonlinear terms; only linear models have a matrix form")
    names = list(model.vars)
    idx = {n: i for i, n in enumerate(names)}
    rows, cols, data = [], [], []
    rlo, rhi = [], []
    for r, c in enumerate(model.constraints):
        for vid, a in c.coeffs.items():
            if a != 0:
                rows.append(r)
                cols.append(idx[vid])
                data.append(float(a))
        rlo.append(c.rhs if c.sense in (EQ, GE) else -np.inf)
        rhi.append(c.rhs if c.sense in (EQ, LE) else np.inf)
    m = len(model.constraints)
    A = sp.csr_matrix((data, (rows, cols)), shape=(m, len(names)))
    cvec = np.zeros(len(names))
    for vid, a in model.objective.items():
        cvec[idx[vid]] += a
    vs = list(model.vars.values())
    return MatrixForm(
        names=names,
        c=cvec,
        A=A,
        row_lower=np.array(rlo, dtype=float),
        row_upper=np.array(rhi, dtype=float),
        lower=np.array([v.lower for v in vs], dtype=float),
        upper=np.array([v.upper for v in vs], dtype=float),
        integer=np.array([v.is_binary for v in vs], dtype=bool),
        maximize=model.sense == "max",
        row_ids=[c.id for c in model.constraints],
    )
