"""Command-line interface.

Subcommands: ``sweep``, ``cm``, ``analyze``, ``train`` and ``equiv``.
Exit status is 0 on success, 1 on usage errors and 2 on numerical failure.

Every flag may also come from a JSON file given with ``--config`` (keys are
the long flag names with dashes turned into underscores); flags on the
command line win.  ``BLCONV_SEED`` sets the default seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import bl_core, learning, model, netgen, sweep
from .errors import BLError, NoSolutionError, UsageError

SEED_ENV = "BLCONV_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _add_gen_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("generator parameters (nominal values by default)")
    g.add_argument("--n", type=int, help="number of neurons N (30)")
    g.add_argument("--b", type=int, help="connection distance B (20)")
    g.add_argument("--c", type=float, help="connection density C (0.5)")
    g.add_argument("--d", type=float, help="excitatory fraction D (0.5)")
    g.add_argument("--p-hat", type=float, help="normalized membrane potential (5)")
    g.add_argument("--w-hat", type=float, help="normalized synapse strength (25)")
    g.add_argument("--perturb-max", type=float, help="perturbation bound (0.10)")
    g.add_argument("--trials", type=int, help="trial count R (20)")
    g.add_argument("--seed", type=int, help=f"master seed (env {SEED_ENV}, else 0)")
    g.add_argument("--self-loops", action="store_true", default=None, help="allow n -> n synapses")


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("network", help="network JSON file")
    p.add_argument("--inputs", help="input rates as 'id=rate,...' (default: file 'inputs', else 1.0)")
    p.add_argument("--targets", help="output targets as 'id=rate,...' (default: file 'targets')")
    p.add_argument("--gamma", type=float, default=None, help="error gain (1.0)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="blconv", description="convergence toolkit for a local weight-derivative learning rule")
    parser.add_argument("--config", help="JSON file with default flag values")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("sweep", help="vary one generator parameter and record CM")
    p.add_argument("--vary", choices=sweep.PARAMS)
    p.add_argument("--grid", help="comma-separated grid values")
    p.add_argument("--from", dest="from_", type=float, help="grid start")
    p.add_argument("--to", type=float, help="grid end")
    p.add_argument("--steps", type=int, help="number of grid points")
    p.add_argument("--out-csv", help="CSV output path (default sweep_<vary>.csv)")
    p.add_argument("--out-svg", help="optional SVG chart path")
    _add_gen_flags(p)

    p = sub.add_parser("cm", help="CM over R random networks at one parameter set")
    _add_gen_flags(p)

    p = sub.add_parser("analyze", help="hierarchy, det(I-G) and CM of a network file")
    _add_problem_flags(p)
    p.add_argument("--dump-csv", help="write G and h as CSV")

    p = sub.add_parser("train", help="run the learning rule on a network file")
    _add_problem_flags(p)
    p.add_argument("--step", type=float, help="Euler step (0.05)")
    p.add_argument("--max-steps", type=int, help="step cap (20000)")
    p.add_argument("--stop-error", type=float, help="stop once E <= this (1e-6)")
    p.add_argument("--out-csv", help="trace CSV path (default: stdout)")
    p.add_argument("--out-network", help="write the trained network here")

    p = sub.add_parser("equiv", help="compare wdot* against finite-difference gradient flow")
    _add_problem_flags(p)
    p.add_argument("--delta", type=float, help="finite-difference step (1e-6)")
    return parser


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    if not args.config:
        return args
    try:
        conf = json.loads(Path(args.config).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(conf, dict):
        raise UsageError("config file must hold a JSON object")
    for key, value in conf.items():
        dest = "from_" if key == "from" else key.replace("-", "_")
        if not hasattr(args, dest):
            raise UsageError(f"unknown config key {key!r} for '{args.command}'")
        if getattr(args, dest) is None:
            setattr(args, dest, value)
    return args


def _gen_params(args) -> netgen.GenParams:
    overrides = {
        "N": args.n,
        "B": args.b,
        "C": args.c,
        "D": args.d,
        "p_hat": args.p_hat,
        "w_hat": args.w_hat,
        "perturb_max": args.perturb_max,
        "R": args.trials,
        "seed": args.seed if args.seed is not None else _default_seed(),
        "self_loops": args.self_loops,
    }
    kwargs = {k: v for k, v in overrides.items() if v is not None}
    return netgen.GenParams(**kwargs)


def _parse_map(text) -> dict[int, float]:
    if isinstance(text, dict):
        return {int(k): float(v) for k, v in text.items()}
    out = {}
    for item in filter(None, (t.strip() for t in str(text).split(","))):
        try:
            k, v = item.split("=")
            out[int(k)] = float(v)
        except ValueError:
            raise UsageError(f"expected 'id=value', got {item!r}") from None
    return out


def _load_problem(args):
    try:
        doc = json.loads(Path(args.network).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read network {args.network}: {exc}") from exc
    net = model.network_from_dict(doc)
    inputs = {n: 1.0 for n in net.input_ids}
    if "inputs" in doc:
        inputs.update(_parse_map(doc["inputs"]))
    if args.inputs:
        inputs.update(_parse_map(args.inputs))
    targets = _parse_map(doc["targets"]) if "targets" in doc else None
    if args.targets:
        targets = _parse_map(args.targets)
    return net, inputs, targets


def _require_targets(net, targets):
    if targets is None:
        if net.output_ids:
            raise UsageError("targets are required (--targets or a 'targets' entry in the file)")
        return {}
    return targets


def cmd_sweep(args) -> int:
    if args.vary is None:
        raise UsageError("--vary is required")
    if isinstance(args.grid, list):
        grid = [float(v) for v in args.grid]
    elif args.grid is not None:
        try:
            grid = [float(v) for v in str(args.grid).split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"bad --grid {args.grid!r}") from None
    elif args.from_ is not None or args.to is not None or args.steps is not None:
        if None in (args.from_, args.to, args.steps) or args.steps < 1:
            raise UsageError("--from, --to and --steps must be given together (steps >= 1)")
        grid = [round(float(v), 12) for v in np.linspace(args.from_, args.to, args.steps)]
    else:
        grid = list(sweep.DEFAULT_GRIDS[args.vary])
    if args.vary in ("N", "B"):
        grid = [int(v) if float(v).is_integer() else v for v in grid]
    out_csv = args.out_csv or f"sweep_{args.vary}.csv"
    spec = sweep.SweepSpec(args.vary, tuple(grid), _gen_params(args), out_csv, args.out_svg)
    table = sweep.run_sweep(spec)
    sweep.emit_outputs(table, spec)
    for row in table:
        print(f"{args.vary}={row.value:g}  cm_max={row.cm_max:.6f}  cm_mean={row.cm_mean:.6f}  cm_min={row.cm_min:.6f}")
    if len(table) > 1:
        verdict = sweep.trend_verdict(args.vary, table)
        print(f"trend: {'as reported' if verdict.ok else 'NOT as reported'} ({verdict.detail})")
    return 0


def cmd_cm(args) -> int:
    params = _gen_params(args)
    res = netgen.cm_over_trials(params)
    for k, cm in enumerate(res.per_trial):
        print(f"trial {k}: CM={cm:.10g}")
    print(f"cm_max={res.cm_max:.10g}")
    return 0


def cmd_analyze(args) -> int:
    net, inputs, targets = _load_problem(args)
    state = model.forward(net, inputs)
    if targets is None:
        targets = {n: state.rate(n) for n in net.output_ids}
    report = bl_core.hierarchy_analysis(net)
    gamma = 1.0 if args.gamma is None else args.gamma
    system = bl_core.assemble_system(net, state, targets, gamma, report.synapse_order)
    cm = bl_core.system_convergence_measure(system, report.neuron_order)
    if args.dump_csv:
        bl_core.dump_system_csv(system, args.dump_csv)
    try:
        det_text = repr(bl_core.solvability_and_solution(system).det_IG)
    except NoSolutionError:
        det_text = "0 (singular, no unique solution)"
    print(f"hierarchical: {str(report.is_hierarchical).lower()}, det(I-G)={det_text}, CM={cm:.10g}")
    if not report.is_hierarchical:
        print("cycle: " + " -> ".join(map(str, report.cycle_witness + report.cycle_witness[:1])))
    print(f"verdict: {bl_core.convergence_verdict(cm)} (CM {'<' if cm < 1 else '>='} 1)")
    return 0


def _learning_config(args) -> learning.LearningConfig:
    defaults = learning.LearningConfig()
    return learning.LearningConfig(
        gamma=defaults.gamma if args.gamma is None else args.gamma,
        step=getattr(args, "step", None) or defaults.step,
        max_steps=getattr(args, "max_steps", None) or defaults.max_steps,
        stop_error=defaults.stop_error if getattr(args, "stop_error", None) is None else args.stop_error,
    )


def cmd_train(args) -> int:
    net, inputs, targets = _load_problem(args)
    targets = _require_targets(net, targets)
    cfg = _learning_config(args)
    trace = learning.train(net, inputs, targets, cfg)
    if args.out_csv:
        learning.write_trace_csv(trace, args.out_csv)
    else:
        sys.stdout.write(learning.trace_csv(trace))
    if args.out_network:
        model.save_network(trace.network, args.out_network, inputs=inputs, targets=targets)
    print(
        f"steps={len(trace.records)} final_E={trace.final_error:.6g} monotone={str(trace.monotone).lower()}",
        file=sys.stderr,
    )
    return 0


def cmd_equiv(args) -> int:
    net, inputs, targets = _load_problem(args)
    targets = _require_targets(net, targets)
    cfg = _learning_config(args)
    err = learning.bp_equivalence_check(net, inputs, targets, cfg, delta=args.delta or 1e-6)
    print(f"max relative error = {err:.3e}")
    return 0


COMMANDS = {
    "sweep": cmd_sweep,
    "cm": cmd_cm,
    "analyze": cmd_analyze,
    "train": cmd_train,
    "equiv": cmd_equiv,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("blconv: error: a subcommand is required", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args = _apply_config(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"blconv: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"blconv: error: {exc}", file=sys.stderr)
        return 1
    except BLError as exc:
        print(f"blconv: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
