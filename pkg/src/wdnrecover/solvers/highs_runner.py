"""Command-line MILP runner: ``python -m wdnrecover.solvers.highs_runner MPS SOL TIMELIMIT``.

Reads an MPS file with HiGHS, solves it and writes the key-value solution
format of :mod:`wdnrecover.model.mps`. Exit code 0 whenever a status was
written, 1 on solver errors.
"""
from __future__ import annotations

import math
import sys

import highspy

from ..model.mps import write_solution


def run(mps_path: str, sol_path: str, time_limit: float, mip_gap: float = 1e-9) -> int:
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", 1)
    if h.readModel(mps_path) == highspy.HighsStatus.kError:
        print(f"cannot read model {mps_path}", file=sys.stderr)
        return 1
    h.setOptionValue("time_limit", float(time_limit))
    h.setOptionValue("mip_rel_gap", mip_gap)
    h.setOptionValue("mip_abs_gap", 1e-12)
    h.run()
    ms = h.getModelStatus()
    if ms == highspy.HighsModelStatus.kUnboundedOrInfeasible:
        h.setOptionValue("presolve", "off")
        h.run()
        ms = h.getModelStatus()
    S = highspy.HighsModelStatus
    info = h.getInfo()
    has_primal = info.primal_solution_status == 2  # kSolutionStatusFeasible
    if ms == S.kOptimal:
        status = "optimal"
    elif ms in (S.kInfeasible, S.kUnboundedOrInfeasible):
        status = "infeasible"
    elif ms in (S.kTimeLimit, S.kIterationLimit, S.kInterrupt, S.kSolutionLimit):
        status = "feasible" if has_primal else "timeout"
    else:
        print(f"solver status {h.modelStatusToString(ms)}", file=sys.stderr)
        return 1
    values: dict[str, float] = {}
    obj = bound = None
    if status in ("optimal", "feasible"):
        lp = h.getLp()
        sol = h.getSolution()
        values = dict(zip(lp.col_names_, sol.col_value))
        obj = info.objective_function_value
        bound = info.mip_dual_bound if lp.integrality_ else obj
        if bound is not None and not math.isfinite(bound):
            bound = None
    with open(sol_path, "w", encoding="utf-8") as fh:
        fh.write(write_solution(status, values, obj, bound))
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) not in (3, 4):
        print("usage: highs_runner MPS SOL TIMELIMIT [MIPGAP]", file=sys.stderr)
        return 2
    gap = float(argv[3]) if len(argv) == 4 else 1e-9
    return run(argv[0], argv[1], float(argv[2]), gap)


if __name__ == "__main__":
    sys.exit(main())
