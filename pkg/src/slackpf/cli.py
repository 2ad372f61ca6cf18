"""Command-line entry point.

Exit codes: 0 success, 1 usage or invalid configuration, 2 non-convergence
(or a failed ``check``), 3 file-system errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__, benchmarks
from .config import ConfigError, parse_config, with_overrides
from .fem import DofMap
from .mesh import MeshError, save_mesh
from .output import (
    ld_row,
    load_checkpoint,
    run_metadata,
    save_checkpoint,
    write_fields,
    write_kkt_csv,
    write_ld_csv,
    write_metadata,
)
from .solver import Formulation, run_simulation

log = logging.getLogger("slackpf")

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGENCE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="slackpf", description="Phase-field fracture with slack-variable irreversibility.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log every Newton step failure and retry")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a configured simulation")
    run.add_argument("config", type=Path)
    run.add_argument("--formulation", choices=[f.value for f in Formulation])
    run.add_argument("--eta", type=float, help="penalty parameter in N/mm^2")
    run.add_argument("--tol", type=float)
    run.add_argument("--out", type=Path, help="output directory (overrides the config)")
    run.add_argument("--snapshot-every", type=int, metavar="K")
    run.add_argument("--max-steps", type=int, metavar="N")
    run.add_argument("--resume", type=Path, metavar="CHECKPOINT", help="continue from a checkpoint.npz")

    sub.add_parser("list-benchmarks", help="print the benchmark names")
    sub.add_parser("check", help="run the fast oracle checks")

    mesh = sub.add_parser("mesh", help="write a benchmark mesh without solving")
    mesh.add_argument("benchmark")
    mesh.add_argument("--out", type=Path, required=True)
    return p


def _positive(name: str, value) -> None:
    if value is not None and not value > 0:
        raise UsageError(f"--{name} must be positive, got {value}")


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    _positive("eta", args.eta)
    _positive("tol", args.tol)
    _positive("max-steps", args.max_steps)
    if args.snapshot_every is not None and args.snapshot_every < 0:
        raise UsageError("--snapshot-every must be >= 0")
    cfg = with_overrides(
        cfg,
        formulation=Formulation(args.formulation) if args.formulation else None,
        eta=args.eta,
        tol=args.tol,
        max_steps=args.max_steps,
    )
    if args.out is not None:
        cfg = replace(cfg, output=args.out)
    if args.snapshot_every is not None:
        cfg = replace(cfg, snapshot_every=args.snapshot_every)
    for ref in cfg.references:
        if not ref.is_file():
            raise FileNotFoundError(f"reference curve not found: {ref}")

    problem = cfg.build_problem()
    solver = cfg.solver
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)
    resume = None
    if args.resume is not None:
        resume = load_checkpoint(args.resume, DofMap(problem.mesh.n_nodes, solver.formulation))

    csv_path = out / "load_displacement.csv"
    write_ld_csv(resume.records if resume else [], csv_path)
    csv = csv_path.open("a")
    eta = solver.eta if solver.formulation is Formulation.PENALTY else None

    def on_step(prog, rec):
        csv.write(ld_row(rec) + "\n")
        csv.flush()
        if cfg.snapshot_every and rec.step % cfg.snapshot_every == 0:
            write_fields(prog.state, problem.mesh, out / f"fields_{rec.step:06d}.vtk", eta)
            save_checkpoint(out / "checkpoint.npz", prog)
        log.info("step %d  u=%.6e mm  F=%.6e kN  iters=%d", rec.step, rec.u_applied, rec.load_kN, rec.iterations)

    t0 = time.perf_counter()
    try:
        result = run_simulation(problem, solver, resume=resume, on_step=on_step)
    finally:
        csv.close()
    elapsed = time.perf_counter() - t0

    write_ld_csv(result.records, csv_path)
    write_kkt_csv(result.records, out / "kkt.csv")
    write_fields(result.state, problem.mesh, out / "fields_final.vtk", eta)
    if result.progress is not None:
        save_checkpoint(out / "checkpoint.npz", result.progress)
    meta = run_metadata(
        problem, solver, result,
        config_file=str(args.config), elapsed_s=round(elapsed, 3),
        references=[str(r) for r in cfg.references], resumed_from=str(args.resume) if args.resume else None,
        schedule=[list(ph) for ph in problem.schedule.phases],
    )
    write_metadata(meta, out / "metadata.json")
    print(f"{result.status}: {len(result.records)} steps, {result.message}; results in {out}")
    if result.status == "non-convergence":
        print(f"error: {result.message}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_list(_args) -> int:
    manifest = benchmarks.load_manifest()
    for name in benchmarks.BENCHMARKS:
        print(f"{name:14s} {manifest.get(name, {}).get('title', '')}".rstrip())
    return EXIT_OK


def cmd_check(_args) -> int:
    from .checks import run_checks

    results = run_checks()
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_NONCONVERGENCE


def cmd_mesh(args) -> int:
    try:
        problem = benchmarks.build(args.benchmark)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_mesh(problem.mesh, args.out)
    m = problem.mesh
    print(f"{problem.name}: {m.n_nodes} nodes, {m.n_elements} elements -> {args.out}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "list-benchmarks": cmd_list, "check": cmd_check, "mesh": cmd_mesh}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, MeshError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
