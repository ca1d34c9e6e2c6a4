"""Command-line entry point: simulate-kinetic, simulate-euler, sweep, verify, fit."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .errors import FlockError, SolverAbort
from .kinetic_solver import LOCAL_STEPS, SPLITTINGS
from .model import PhaseGrid, SpaceGrid


def _apply_overrides(cfg: harness.ExperimentConfig, args) -> harness.ExperimentConfig:
    model = cfg.model
    g = model.grid
    nx = args.nx if args.nx is not None else g.nx
    nv = args.nv if args.nv is not None else g.nv
    vmax = args.vmax if args.vmax is not None else g.v_max
    if (nx, nv, vmax) != (g.nx, g.nv, g.v_max):
        s = g.space
        model = replace(model, grid=PhaseGrid(SpaceGrid(s.x_min, s.x_max, nx, s.boundary), vmax, nv))
    if args.tfinal is not None:
        model = replace(model, t_final=args.tfinal)
    changes = {"model": model}
    if args.epsilon_list:
        changes["epsilon_list"] = harness._floats(args.epsilon_list)
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["output_dir"] = Path(args.out)
    for token in (args.scheme or "").split(","):
        token = token.strip()
        if not token:
            continue
        if token in SPLITTINGS:
            changes["splitting"] = token
        elif token in LOCAL_STEPS:
            changes["local_step"] = token
        elif token in ("order1", "order2"):
            changes["transport_order"] = int(token[-1])
        else:
            raise FlockError(f"unknown --scheme token {token!r}")
    return replace(cfg, **changes)


def _config(args) -> harness.ExperimentConfig:
    if args.config is None:
        raise FlockError("--config is required for this command")
    return _apply_overrides(harness.load_config(args.config), args)


def cmd_simulate_kinetic(args) -> int:
    cfg = _config(args)
    eps = harness._floats(args.epsilon_list)[0] if args.epsilon_list else None
    out = cfg.output_dir
    result = harness.run_single(cfg, eps, out_dir=out, dump_snapshots=args.snapshots)
    harness.write_euler(out, result.reference)
    ledger = harness.verify_inequalities(result.series)
    print(ledger.text(), end="")
    return 0 if ledger.ok else 1


def cmd_simulate_euler(args) -> int:
    cfg = _config(args)
    out = cfg.output_dir
    ref = harness.run_reference(cfg, dump_dir=out / "snapshots" if args.snapshots else None)
    harness.write_euler(out, ref)
    d = ref.trajectory.balance_defect()
    print(f"euler: {ref.trajectory.steps} steps, final entropy balance defect {float(d[-1])!r}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    out = cfg.output_dir
    res = harness.run_sweep(cfg, out_dir=out, dump_snapshots=args.snapshots)
    harness.write_euler(out, res.runs[0].reference)
    ledgers = [harness.verify_inequalities(r.series) for r in res.runs]
    (out / "ledger.txt").write_text("".join(lg.text() for lg in ledgers))
    for eps, err in res.points():
        print(f"epsilon={eps!r} error={err!r}")
    if res.fit is not None:
        print(f"slope={res.fit.slope!r} max_residual={res.fit.max_residual!r}")
    return 0 if all(lg.ok for lg in ledgers) else 1


def cmd_verify(args) -> int:
    """Rebuild the ledger from the CSVs of a finished run directory (or each eps_* subdirectory)."""
    out = Path(args.out) if args.out else Path("out")
    dirs = sorted(p for p in out.glob("eps_*") if p.is_dir()) or [out]
    ledgers = [harness.verify_inequalities(harness.load_series(d)) for d in dirs]
    text = "".join(lg.text() for lg in ledgers)
    (out / "ledger.txt").write_text(text)
    print(text, end="")
    seed = args.seed if args.seed is not None else 0
    for name, value in harness.oracle_checks(seed).items():
        print(f"oracle {name} max_discrepancy={value!r}")
    return 0 if all(lg.ok for lg in ledgers) else 1


def cmd_fit(args) -> int:
    path = Path(args.input) if args.input else Path(args.out or "out") / "sweep.csv"
    points = harness.read_sweep(path)
    fit = harness.fit_rate(points)
    print(f"slope={fit.slope!r} intercept={fit.intercept!r} max_residual={fit.max_residual!r}")
    if len(points) > 3:
        head = harness.fit_rate(points[:3])
        print(f"largest-3 slope={head.slope!r} max_residual={head.max_residual!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kinflock", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    handlers = {
        "simulate-kinetic": cmd_simulate_kinetic,
        "simulate-euler": cmd_simulate_euler,
        "sweep": cmd_sweep,
        "verify": cmd_verify,
        "fit": cmd_fit,
    }
    for name, fn in handlers.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0] if fn.__doc__ else None)
        sp.set_defaults(func=fn)
        sp.add_argument("--config")
        sp.add_argument("--out")
        sp.add_argument("--epsilon-list", dest="epsilon_list")
        sp.add_argument("--nx", type=int)
        sp.add_argument("--nv", type=int)
        sp.add_argument("--vmax", type=float)
        sp.add_argument("--tfinal", type=float)
        sp.add_argument("--snapshots", action="store_true", help="dump per-snapshot field CSVs")
        sp.add_argument("--scheme", help="comma list, e.g. strang,chang-cooper,order2")
        sp.add_argument("--seed", type=int)
        if name == "fit":
            sp.add_argument("input", nargs="?", help="CSV with epsilon,error columns (default <out>/sweep.csv)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SolverAbort as exc:
        print(f"solver aborted: {exc}", file=sys.stderr)
        return 2
    except FlockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
