"""Command-line interface: ``mechlogic <subcommand> [options]``.

Lengths are in σ, times in t0 and energies in k0 σ². Exit status is 0 on
success, 1 on a domain error (its class name goes to standard error) and
2 on a usage error. Output files are written only after a command succeeds.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import replace

from . import analysis, netlist
from .dynamics import ActuationSchedule, SimParams, run
from .errors import InvalidSpec, MechLogicError
from .geometry import CoreSpec, Hinge, LeverSpec, solve_core, solve_lever, sweep_core, sweep_to_csv
from .model import GateKind, SignalMode, build_gate

UNITS_TEXT = ("units: length σ (muscle rest length), time t0 = 1000 γ/k0, "
              "energy k0 σ², dt in γ/k0\n")


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    """Comma list ``a,b,c`` or inclusive range ``start:stop:step``."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(round((stop - start) / step))
            return [start + k * step for k in range(n + 1)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("expected positive integers")
    return values


def _bits(text: str) -> tuple[int, ...]:
    if not text or any(c not in "01" for c in text):
        raise argparse.ArgumentTypeError("expected a string of 0/1 digits")
    return tuple(int(c) for c in text)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base random seed")
    common.add_argument("-o", "--out", help="output file (default: standard output)")
    common.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    common.add_argument("--units", action="store_true", help="print unit conventions")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--dt", type=float, default=0.05, help="time step in γ/k0")
    sim.add_argument("--kbt", type=float, default=1e-5, help="thermal energy in k0 σ²")
    sim.add_argument("--record-every", type=int, default=200)

    p = argparse.ArgumentParser(prog="mechlogic", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve-core", parents=[common], help="solve the logic-core geometry")
    s.add_argument("--delta-in", type=float, default=0.5)
    s.add_argument("--h", type=float, default=2.0)
    s.add_argument("--tol", type=float, default=1e-12)

    s = sub.add_parser("solve-lever", parents=[common], help="solve a scissor lever")
    s.add_argument("--l-in", type=float, default=1.0)
    s.add_argument("--l-out", type=float, default=1.0)
    s.add_argument("--dl-in", type=float, default=-0.5)
    s.add_argument("--dl-out", type=float, default=0.5)
    s.add_argument("--l", type=float, default=1.5)
    s.add_argument("--hinge", choices=[h.value.lower() for h in Hinge], default="open")
    s.add_argument("--convention", choices=["verbatim", "halved"], default="verbatim")
    s.add_argument("--tol", type=float, default=1e-12)

    s = sub.add_parser("sweep-core", parents=[common], help="tabulate Δout over (Δin, h)")
    s.add_argument("--delta-in", type=_floats, default=_floats("0:0.8:0.02"))
    s.add_argument("--h", type=_floats, default=[1.6, 2.0, 2.4])

    s = sub.add_parser("simulate", parents=[common, sim], help="run a netlist circuit")
    s.add_argument("-c", "--circuit", required=True)
    s.add_argument("--duration", type=float, default=10.0)
    s.add_argument("--input", type=_bits, help="constant states for the sorted channels")
    s.add_argument("--states", action="store_true", help="include body states in JSON lines")

    s = sub.add_parser("truth-table", parents=[common, sim], help="simulated truth table")
    s.add_argument("-c", "--circuit")
    s.add_argument("--kind", choices=[k.value for k in GateKind], default="NAND")
    s.add_argument("--muscle-mode", choices=["expand", "contract"], default="contract")
    s.add_argument("--output-mode", choices=["expand", "contract"], default="contract")
    s.add_argument("--trials", type=int, default=5)
    s.add_argument("--settle", type=float, default=20.0)

    s = sub.add_parser("freq-response", parents=[common, sim], help="RMSD vs actuation frequency")
    s.add_argument("-c", "--circuit")
    s.add_argument("--units-list", type=_ints, default=[5])
    s.add_argument("--freqs", type=_floats, default=list(analysis.PAPER_FREQS))
    s.add_argument("--cycles", type=int, default=2)

    s = sub.add_parser("attenuation", parents=[common, sim], help="stage signal statistics")
    s.add_argument("--units-list", type=_ints, default=[5])
    s.add_argument("--tolerances", type=_floats, default=list(analysis.DEFAULT_TOLERANCES))
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--settle", type=float, default=20.0)
    s.add_argument("--sample", type=float, default=5.0)

    s = sub.add_parser("tetris", parents=[common, sim], help="fold the skeleton robot")
    s.add_argument("--input", type=_bits, help="two bits (y, b); default: all four")
    s.add_argument("--duration", type=float, default=200.0)
    s.add_argument("--trials", type=int, default=1, help="seeds per input")

    sub.add_parser("estimates", parents=[common], help="kBT / kσ² at three scales")
    return p


def _params(args) -> SimParams:
    try:
        return SimParams(dt=args.dt, kbt=args.kbt, seed=args.seed,
                         record_every=args.record_every)
    except InvalidSpec as exc:
        raise UsageError(str(exc)) from None


def _load_circuit(path: str):
    if not os.path.isfile(path):
        raise UsageError(f"circuit file {path!r} not found")
    return netlist.elaborate(netlist.load(path))


def _cmd_solve_core(args):
    g = solve_core(CoreSpec(args.delta_in, args.h), args.tol)
    d = g.to_dict()
    d["max_residual"] = float(abs(g.residuals()).max())
    return json.dumps(d, indent=2, sort_keys=True) + "\n"


def _cmd_solve_lever(args):
    spec = LeverSpec(args.l_in, args.l_out, args.dl_in, args.dl_out, args.l,
                     Hinge(args.hinge.capitalize()))
    g = solve_lever(spec, args.tol, convention=args.convention)
    d = g.to_dict()
    d["max_residual"] = float(abs(g.residuals()).max())
    return json.dumps(d, indent=2, sort_keys=True) + "\n"


def _cmd_sweep_core(args):
    rows = sweep_core(args.delta_in, args.h)
    if args.json:
        return analysis.to_json([{"delta_in_frac": r.delta_in_frac, "h_frac": r.h_frac,
                                  "delta_out_frac": r.delta_out_frac, "feasible": r.feasible}
                                 for r in rows]) + "\n"
    return sweep_to_csv(rows)


def _cmd_simulate(args):
    assembly, schedule = _load_circuit(args.circuit)
    if args.input is not None:
        chans = assembly.channels
        if len(args.input) != len(chans):
            raise UsageError(f"--input needs {len(chans)} bits for channels {chans}")
        schedule = ActuationSchedule.constant(**dict(zip(chans, args.input)))
    tr = run(assembly, _params(args), schedule, args.duration, record_states=args.states)
    return tr.to_jsonl() if args.json else tr.to_csv()


def _cmd_truth_table(args):
    if args.circuit:
        assembly, _ = _load_circuit(args.circuit)
    else:
        assembly = build_gate(GateKind(args.kind), SignalMode.parse(args.muscle_mode),
                              SignalMode.parse(args.output_mode))
    table = analysis.truth_table(assembly, settle=args.settle, trials=args.trials,
                                 params=_params(args))
    return analysis.to_json(table) + "\n" if args.json else table.to_csv()


def _cmd_freq_response(args):
    rows = []
    if args.circuit:
        assembly, _ = _load_circuit(args.circuit)
        pts = analysis.frequency_response(freqs=args.freqs, cycles=args.cycles,
                                          params=_params(args), assembly=assembly)
        rows.append((None, pts))
    else:
        for units in args.units_list:
            rows.append((units, analysis.frequency_response(units, args.freqs, cycles=args.cycles,
                                                            params=_params(args))))
    if args.json:
        return analysis.to_json([{"units": u, "points": pts} for u, pts in rows]) + "\n"
    out = ["units," + analysis.response_to_csv([]).strip()]
    for u, pts in rows:
        body = analysis.response_to_csv(pts).splitlines()[1:]
        out.extend(f"{'' if u is None else u},{line}" for line in body)
    return "\n".join(out) + "\n"


def _cmd_attenuation(args):
    exps = [analysis.signal_attenuation(u, tol, args.trials, params=_params(args),
                                        settle=args.settle, sample=args.sample)
            for u in args.units_list for tol in args.tolerances]
    return analysis.to_json(exps) + "\n" if args.json else analysis.attenuation_to_csv(exps)


def _cmd_tetris(args):
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    seeds = [args.seed + k for k in range(args.trials)]
    params = _params(args)
    if args.input is not None:
        if len(args.input) != 2:
            raise UsageError("--input takes two bits (y, b)")
        rows = [analysis.tetris_run(args.input, duration=args.duration,
                                    params=replace(params, seed=s)) for s in seeds]
    else:
        rows = analysis.tetris_table(seeds=seeds, duration=args.duration, params=params)
    return analysis.to_json(rows) + "\n" if args.json else analysis.tetris_to_csv(rows)


def _cmd_estimates(args):
    rows = analysis.scale_estimates()
    return analysis.to_json(rows) + "\n" if args.json else analysis.estimates_to_csv(rows)


COMMANDS = {
    "solve-core": _cmd_solve_core, "solve-lever": _cmd_solve_lever,
    "sweep-core": _cmd_sweep_core, "simulate": _cmd_simulate,
    "truth-table": _cmd_truth_table, "freq-response": _cmd_freq_response,
    "attenuation": _cmd_attenuation, "tetris": _cmd_tetris, "estimates": _cmd_estimates,
}


def _write(path: str, text: str):
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".mechlogic-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.units:
        sys.stderr.write(UNITS_TEXT)
    if args.out and not os.path.isdir(os.path.dirname(os.path.abspath(args.out))):
        sys.stderr.write(f"mechlogic: error: output directory for {args.out!r} does not exist\n")
        return 2
    try:
        text = COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"mechlogic: error: {exc}\n")
        return 2
    except MechLogicError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return 1
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
