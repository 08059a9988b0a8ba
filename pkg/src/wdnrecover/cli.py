"""Command-line entry point.

Exit codes: 0 success or certified, 2 feasible but not certified, 3 no
feasible solution, 4 input error, 5 backend error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from .instances import SHIPPED, load_shipped
from .io.inp import InpError, parse_inp
from .io.native import NativeFormatError, parse_native
from .model.build import build_n1
from .model.ir import ModelError
from .network import Network
from .recovery.core import RecoveryConfig, neighborhood_recover, refine_loop_tiebreak, select_subset
from .relax.builders import build_l1
from .relax.partition import partition_at_level
from .solvers.backend import solve_milp
from .solvers.base import FEASIBLE, BackendConfig, BackendError
from .validate.oracle import MissingValueError, check_feasibility
from .validate.report import emit_report, emit_timings

EXIT_OK, EXIT_FEASIBLE, EXIT_NONE, EXIT_INPUT, EXIT_BACKEND = 0, 2, 3, 4, 5


class InputError(Exception):
    pass


def load_instance(source: str, fmt: str | None = None) -> Network:
    path = Path(source)
    if not path.exists():
        if source in SHIPPED:
            return load_shipped(source)
        raise InputError(f"instance {source} not found (shipped: {', '.join(SHIPPED)})")
    fmt = fmt or ("inp" if path.suffix.lower() == ".inp" else "json")
    text = path.read_text(encoding="utf-8")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        net = parse_inp(text) if fmt == "inp" else parse_native(text)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return net


def _config(args) -> RecoveryConfig:
    backend = BackendConfig(kind=args.backend, executable=args.solver_path, time_limit=args.tmax)
    return RecoveryConfig(subset=args.subset, t_max=args.tmax, k_max=args.kmax,
                          eps_opt=args.eps_opt, inner_offset=args.inner_offset,
                          time_limit=args.time_limit, backend=backend)


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _dump_values(values: dict[str, float], objective: float) -> str:
    return json.dumps({"objective": objective, "values": values}, indent=1, sort_keys=True) + "\n"


def cmd_validate(args) -> int:
    net = load_instance(args.instance, args.format)
    print(json.dumps({"name": net.name, **net.census()}, sort_keys=True))
    if args.solution:
        doc = json.loads(Path(args.solution).read_text(encoding="utf-8"))
        report = check_feasibility(net, doc.get("values", doc))
        for e in report.entries:
            print(f"{e.family}\t{e.element}\tt={e.t}\t{e.magnitude:.3e}")
        print(f"max violation {report.max_violation:.3e}")
        return EXIT_OK if report.ok else EXIT_NONE
    return EXIT_OK


def cmd_solve(args) -> int:
    net = load_instance(args.instance, args.format)
    cfg = _config(args)
    result = refine_loop_tiebreak(net, cfg, checkpoint=args.checkpoint, resume=args.resume)
    print(emit_report(result, "csv"), end="", file=sys.stderr)
    if not result.feasible:
        print(f"no feasible solution ({result.termination})")
        return EXIT_NONE
    if args.out:
        _write(args.out, _dump_values(result.incumbent.values, result.objective))
    print(f"objective {result.objective!r} bound {result.best_bound!r} "
          f"termination {result.termination}")
    return EXIT_OK if result.certified else EXIT_FEASIBLE


def cmd_relax(args) -> int:
    net = load_instance(args.instance, args.format)
    n1 = build_n1(net)
    model = build_l1(n1, partition_at_level(n1, args.level), args.tangents)
    out = solve_milp(model, BackendConfig(kind=args.backend, executable=args.solver_path,
                                          time_limit=args.tmax))
    print(f"status {out.status} objective {out.objective!r} binaries {len(model.binaries)}")
    if not out.has_solution:
        return EXIT_NONE
    if args.out:
        _write(args.out, _dump_values(out.values, out.objective))
    return EXIT_OK


def cmd_recover(args) -> int:
    net = load_instance(args.instance, args.format)
    try:
        doc = json.loads(Path(args.candidate).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"candidate file: {exc}") from None
    n1 = build_n1(net)
    missing = [b for b in n1.binaries if b not in doc]
    if missing:
        raise InputError(f"candidate file lacks {missing[0]}")
    candidate = {b: int(doc[b]) for b in n1.binaries}
    cfg = _config(args)
    out, h_bar = neighborhood_recover(net, candidate, select_subset(n1, cfg.subset), cfg, n1=n1,
                                      level=cfg.inner_offset)
    if out.status != FEASIBLE:
        print(f"recovery failed: {out.status}")
        return EXIT_NONE
    print(f"recovered objective {out.objective!r} h_bar {h_bar}")
    if args.out:
        _write(args.out, _dump_values(out.values, out.objective))
    return EXIT_OK


def cmd_bench(args) -> int:
    net = load_instance(args.instance, args.format)
    cfg = _config(args)
    cfg.stop_when_certified = False
    result = refine_loop_tiebreak(net, cfg, checkpoint=args.checkpoint, resume=args.resume)
    _write(args.out, emit_report(result, args.report, include_timings=False))
    if args.timings:
        _write(args.timings, emit_timings(result))
    if not result.feasible:
        return EXIT_NONE
    return EXIT_OK if result.certified else EXIT_FEASIBLE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wdnrecover", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, solver: bool = True) -> None:
        sp.add_argument("--instance", required=True, help=f"file path or one of {', '.join(SHIPPED)}")
        sp.add_argument("--format", choices=("inp", "json"), default=None)
        if solver:
            sp.add_argument("--backend", choices=("micro", "highs", "external"), default="highs")
            sp.add_argument("--solver-path", default=None, help="executable for the external backend")
            sp.add_argument("--tmax", type=float, default=3000.0, help="seconds per solver call")
            sp.add_argument("--out", default=None)

    def loop(sp) -> None:
        sp.add_argument("--kmax", type=int, default=6)
        sp.add_argument("--eps-opt", type=float, default=1e-4)
        sp.add_argument("--is", dest="subset", choices=("pumps", "all", "none"), default="pumps")
        sp.add_argument("--inner-offset", type=int, default=2)
        sp.add_argument("--time-limit", type=float, default=None, help="whole-run seconds")
        sp.add_argument("--checkpoint", default=None)
        sp.add_argument("--resume", default=None)

    sp = sub.add_parser("validate", help="check an instance, optionally a solution file")
    common(sp, solver=False)
    sp.add_argument("--solution", default=None)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("solve", help="refinement with tie-breaking, end to end")
    common(sp)
    loop(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("relax", help="solve the demand-maximizing MILP relaxation only")
    common(sp)
    sp.add_argument("--level", type=int, default=1)
    sp.add_argument("--tangents", type=int, default=3)
    sp.set_defaults(func=cmd_relax)

    sp = sub.add_parser("recover", help="neighborhood recovery from a candidate file")
    common(sp)
    loop(sp)
    sp.add_argument("--candidate", required=True)
    sp.set_defaults(func=cmd_recover)

    sp = sub.add_parser("bench", help="iteration sweep k = 1..kmax, emitting the table")
    common(sp)
    loop(sp)
    sp.add_argument("--report", choices=("csv", "json"), default="csv")
    sp.add_argument("--timings", default=None, help="separate CSV for raw timings")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, InpError, NativeFormatError, MissingValueError, OSError,
            ValueError, ModelError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
