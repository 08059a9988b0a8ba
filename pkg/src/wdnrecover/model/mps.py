"""Fixed-format MPS output for linear models and the key-value solution format.

Names are mangled to 8 characters (``C0000001`` for columns, ``R0000001`` for
rows) through a table returned with the text, so any model id survives the
format's name limits. Numbers use Python's shortest round-trip repr, which can
exceed the classic 12-character field; every reader we target splits on
whitespace.

Solution file grammar, one item per line::

    status <optimal|feasible|infeasible|timeout>
    objective <float>          (optional)
    bound <float>              (optional)
    <column name> <float>      (zero or more)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .ir import BINARY, EQ, GE, LE, LinConstraint, ModelError, ModelIR, Solution, Var

OBJ_ROW = "OBJ"
MAX_NAMES = 9_999_999
SOLUTION_STATUSES = ("optimal", "feasible", "infeasible", "timeout")


class MpsError(ValueError):
    pass


@dataclass(frozen=True)
class NameTable:
    columns: dict[str, str]  # var id -> mangled
    rows: dict[str, str]  # row id -> mangled

    def column_ids(self) -> dict[str, str]:
        return {v: k for k, v in self.columns.items()}

    def row_ids(self) -> dict[str, str]:
        return {v: k for k, v in self.rows.items()}


def _num(x: float) -> str:
    x = float(x)
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def write_mps(model: ModelIR, name: str = "MODEL") -> tuple[str, NameTable]:
    if model.nonlinear:
        raise ModelError("write_mps needs a linear model; nonlinear terms present")
    if len(model.vars) > MAX_NAMES or len(model.constraints) > MAX_NAMES:
        raise MpsError("name table overflow: more than 9999999 columns or rows")
    cols = {vid: f"C{i:07d}" for i, vid in enumerate(model.vars, start=1)}
    rows = {c.id: f"R{i:07d}" for i, c in enumerate(model.constraints, start=1)}
    table = NameTable(cols, rows)

    out = [f"NAME          {name[:8]}"]
    if model.sense == "max":
        out += ["OBJSENSE", "    MAX"]
    out.append("ROWS")
    out.append(f" N  {OBJ_ROW}")
    kind = {LE: "L", GE: "G", EQ: "E"}
    for c in model.constraints:
        out.append(f" {kind[c.sense]}  {rows[c.id]}")

    # column-major coefficient lists in declaration order
    entries: dict[str, list[tuple[str, float]]] = {vid: [] for vid in model.vars}
    for vid, a in model.objective.items():
        if a != 0:
            entries[vid].append((OBJ_ROW, a))
    for c in model.constraints:
        for vid, a in c.coeffs.items():
            if a != 0:
                entries[vid].append((rows[c.id], a))
    out.append("COLUMNS")
    for vid in model.vars:
        for rname, a in entries[vid]:
            out.append(f"    {cols[vid]:<8}  {rname:<8}  {_num(a)}")
        if not entries[vid]:
            # keep the column declared even without coefficients
            out.append(f"    {cols[vid]:<8}  {OBJ_ROW:<8}  0")

    out.append("RHS")
    for c in model.constraints:
        if c.rhs != 0:
            out.append(f"    RHS       {rows[c.id]:<8}  {_num(c.rhs)}")

    out.append("BOUNDS")
    for vid, v in model.vars.items():
        col = cols[vid]
        if v.is_binary:
            out.append(f" BV BND       {col}")
            if v.lower == v.upper:
                out.append(f" FX BND       {col:<8}  {_num(v.lower)}")
            continue
        lo, hi = v.lower, v.upper
        if lo == hi:
            out.append(f" FX BND       {col:<8}  {_num(lo)}")
            continue
        if lo == -math.inf and hi == math.inf:
            out.append(f" FR BND       {col}")
            continue
        if lo == -math.inf:
            out.append(f" MI BND       {col}")
        elif lo != 0 or hi < 0:
            out.append(f" LO BND       {col:<8}  {_num(lo)}")
        if hi != math.inf:
            out.append(f" UP BND       {col:<8}  {_num(hi)}")
    out.append("ENDATA")
    return "\n".join(out) + "\n", table


def read_mps(text: str, table: NameTable | None = None) -> ModelIR:
    """Parse MPS text (free or fixed spacing) into a linear ModelIR.

    With ``table`` the original ids are restored; otherwise the file's names are used.
    """
    col_ids = table.column_ids() if table else {}
    row_ids = table.row_ids() if table else {}
    section = None
    sense = "min"
    row_kind: dict[str, str] = {}
    row_order: list[str] = []
    obj_name = None
    coeffs: dict[str, dict[str, float]] = {}
    objective: dict[str, float] = {}
    rhs: dict[str, float] = {}
    ranges: dict[str, float] = {}
    columns: list[str] = []
    bounds: dict[str, list[float]] = {}
    binary: set[str] = set()
    integer_block = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("*"):
            continue
        tok = raw.split()
        if not raw[0].isspace():
            section = tok[0].upper()
            if section == "OBJSENSE" and len(tok) > 1:
                sense = "max" if tok[1].upper().startswith("MAX") else "min"
            if section == "ENDATA":
                break
            continue
        try:
            if section == "OBJSENSE":
                sense = "max" if tok[0].upper().startswith("MAX") else "min"
            elif section == "ROWS":
                kind, rname = tok[0].upper(), tok[1]
                if kind == "N":
                    if obj_name is None:
                        obj_name = rname
                    continue
                row_kind[rname] = kind
                row_order.append(rname)
                coeffs[rname] = {}
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1].strip("'").upper() == "MARKER":
                    integer_block = "INTORG" in tok[2].upper()
                    continue
                cname = tok[0]
                if cname not in bounds:
                    columns.append(cname)
                    bounds[cname] = [0.0, math.inf]
                    if integer_block:
                        binary.add(cname)
                for rname, val in zip(tok[1::2], tok[2::2]):
                    a = float(val)
                    if rname == obj_name:
                        if a != 0:
                            objective[cname] = objective.get(cname, 0.0) + a
                    elif rname in coeffs:
                        coeffs[rname][cname] = coeffs[rname].get(cname, 0.0) + a
                    else:
                        raise MpsError(f"line {lineno}: unknown row {rname}")
            elif section in ("RHS", "RANGES"):
                pairs = tok[1:] if len(tok) % 2 == 1 else tok
                target = rhs if section == "RHS" else ranges
                for rname, val in zip(pairs[0::2], pairs[1::2]):
                    if rname == obj_name:
                        continue
                    if rname not in row_kind:
                        raise MpsError(f"line {lineno}: unknown row {rname}")
                    target[rname] = float(val)
            elif section == "BOUNDS":
                kind = tok[0].upper()
                cname = tok[2] if len(tok) >= 3 else tok[1]
                if cname not in bounds:
                    raise MpsError(f"line {lineno}: unknown column {cname}")
                val = float(tok[3]) if len(tok) >= 4 else None
                b = bounds[cname]
                if kind == "UP":
                    b[1] = val
                elif kind == "LO":
                    b[0] = val
                elif kind == "FX":
                    b[0] = b[1] = val
                elif kind == "FR":
                    b[0], b[1] = -math.inf, math.inf
                elif kind == "MI":
                    b[0] = -math.inf
                elif kind == "PL":
                    b[1] = math.inf
                elif kind == "BV":
                    b[0], b[1] = 0.0, 1.0
                    binary.add(cname)
                else:
                    raise MpsError(f"line {lineno}: unsupported bound type {kind}")
            elif section in ("NAME",):
                continue
            else:
                raise MpsError(f"line {lineno}: data outside a known section")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, MpsError):
                raise
            raise MpsError(f"line {lineno}: malformed entry: {raw.strip()}") from exc

    def cid(name: str) -> str:
        return col_ids.get(name, name)

    vars_: dict[str, Var] = {}
    for cname in columns:
        lo, hi = bounds[cname]
        vid = cid(cname)
        vars_[vid] = Var(vid, BINARY if cname in binary else "continuous", lo, hi)
    rows: list[LinConstraint] = []
    for rname in row_order:
        kind = row_kind[rname]
        b = rhs.get(rname, 0.0)
        c = {cid(k): v for k, v in coeffs[rname].items()}
        rid = row_ids.get(rname, rname)
        if rname in ranges:
            r = ranges[rname]
            if kind == "E":
                lo, hi = (b, b + r) if r >= 0 else (b + r, b)
            elif kind == "L":
                lo, hi = b - abs(r), b
            else:
                lo, hi = b, b + abs(r)
            rows.append(LinConstraint(rid + "#lo", c, GE, lo))
            rows.append(LinConstraint(rid + "#hi", c, LE, hi))
            continue
        sense_ = {"L": LE, "G": GE, "E": EQ}[kind]
        rows.append(LinConstraint(rid, c, sense_, b))
    obj = {cid(k): v for k, v in objective.items()}
    return ModelIR(vars_, tuple(rows), (), obj, sense, "MPS")


def write_solution(status: str, values: dict[str, float], objective: float | None = None,
                   bound: float | None = None) -> str:
    if status not in SOLUTION_STATUSES:
        raise MpsError(f"unknown status {status!r}")
    out = [f"status {status}"]
    if objective is not None and math.isfinite(objective):
        out.append(f"objective {objective!r}")
    if bound is not None and math.isfinite(bound):
        out.append(f"bound {bound!r}")
    out += [f"{k} {float(v)!r}" for k, v in values.items()]
    return "\n".join(out) + "\n"


@dataclass
class SolutionFile:
    status: str
    objective: float | None
    bound: float | None
    values: dict[str, float]


def parse_solution_file(text: str, table: NameTable | None = None) -> SolutionFile:
    col_ids = table.column_ids() if table else None
    status = None
    objective = bound = None
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tok = raw.split()
        if not tok:
            continue
        if len(tok) != 2:
            raise MpsError(f"solution line {lineno}: expected 'name value'")
        key, val = tok
        if key == "status":
            if val not in SOLUTION_STATUSES:
                raise MpsError(f"unparseable status {val!r}")
            status = val
            continue
        try:
            x = float(val)
        except ValueError:
            raise MpsError(f"solution line {lineno}: bad number {val!r}") from None
        if key == "objective":
            objective = x
        elif key == "bound":
            bound = x
        else:
            if col_ids is not None:
                if key not in col_ids:
                    raise MpsError(f"unknown variable {key!r} in solution")
                key = col_ids[key]
            values[key] = x
    if status is None:
        raise MpsError("solution file has no status line")
    return SolutionFile(status, objective, bound, values)


def read_solution(text: str, table: NameTable) -> Solution:
    sf = parse_solution_file(text, table)
    obj = sf.objective if sf.objective is not None else math.nan
    return Solution(sf.values, obj, sf.status)
