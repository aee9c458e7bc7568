"""Line-oriented circuit description language (``.mlc``).

Grammar, one statement per line, ``#`` starts a comment::

    muscle <id> mode (expand|contract) channel <id>
    gate <id> kind (AND|OR|NAND|NOR) [out_mode (expand|contract)]
    connector <id> units <int> [tolerance <float>]
    skeleton <id> units <int>
    wire <id>.<port> -> <id>.<port>
    schedule <channel> square period <float> [duty <float>]
    schedule <channel> step <t>:<0|1> [<t>:<0|1> ...]
    schedule <channel> const <0|1>

A wire from a muscle binds that muscle's channel to the target input; one
muscle may drive several inputs. Wires into skeleton DOFs from σ-level
signals get an adaptor lever inserted automatically.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterator

from .dynamics.schedule import ActuationSchedule, Constant, Square, Step, Waveform
from .errors import (DoubleWire, DuplicateId, InvalidSpec, NetlistSyntaxError, PortMismatch,
                     UnboundChannel, UnknownReference)
from .geometry import CoreGeometry
from .model import (Assembly, GateKind, SignalMode, adaptor_spec, add_drive, add_struts,
                    build_connector, build_gate, build_lever, build_skeleton, compose)
from .model.assembly import SIGNAL, ProbeRole, SceneBuilder

IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
DEFAULT_OUT_MODE = {GateKind.NAND: SignalMode.EXPAND}  # all other kinds contract


# ---------------------------------------------------------------------------
# syntax tree

@dataclass(frozen=True)
class MuscleDecl:
    id: str
    mode: SignalMode
    channel: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class GateDecl:
    id: str
    kind: GateKind
    out_mode: SignalMode
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ConnectorDecl:
    id: str
    units: int
    tolerance: float = 0.0
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SkeletonDecl:
    id: str
    units: int
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Wire:
    src: tuple[str, str]
    dst: tuple[str, str]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ScheduleDecl:
    channel: str
    waveform: Waveform
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CircuitSpec:
    muscles: tuple[MuscleDecl, ...] = ()
    gates: tuple[GateDecl, ...] = ()
    connectors: tuple[ConnectorDecl, ...] = ()
    skeletons: tuple[SkeletonDecl, ...] = ()
    wires: tuple[Wire, ...] = ()
    schedules: tuple[ScheduleDecl, ...] = ()

    @property
    def instances(self) -> dict:
        return {d.id: d for group in (self.muscles, self.gates, self.connectors, self.skeletons)
                for d in group}

    @property
    def channels(self) -> list[str]:
        return sorted({m.channel for m in self.muscles})


def ports_of(decl) -> tuple[set[str], set[str]]:
    """(input ports, output ports) exposed by a declaration."""
    if isinstance(decl, MuscleDecl):
        return set(), {"out"}
    if isinstance(decl, GateDecl):
        return {"in1", "in2"}, {"out"}
    if isinstance(decl, ConnectorDecl):
        return {"in"}, {"out"}
    return {f"dof{k}" for k in range(1, 2 * decl.units + 1)}, set()


# ---------------------------------------------------------------------------
# parsing

@dataclass
class _Tok:
    text: str
    col: int


class _Line:
    def __init__(self, number: int, text: str):
        self.number = number
        self.text = text
        body = text.split("#", 1)[0]
        self.toks = [_Tok(m.group(), m.start() + 1) for m in re.finditer(r"\S+", body)]
        self.end_col = len(body.rstrip()) + 1
        self.pos = 0

    def fail(self, expected: str, tok: _Tok | None = None):
        col = tok.col if tok is not None else (
            self.toks[self.pos].col if self.pos < len(self.toks) else self.end_col + 1)
        raise NetlistSyntaxError(self.number, col, expected, self.text)

    def peek(self) -> _Tok | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self, expected: str) -> _Tok:
        tok = self.peek()
        if tok is None:
            self.fail(expected)
        self.pos += 1
        return tok

    def keyword(self, *words: str) -> str:
        tok = self.take(" or ".join(repr(w) for w in words))
        low = tok.text.lower()
        for w in words:
            if low == w.lower():
                return w
        self.fail(" or ".join(repr(w) for w in words), tok)

    def ident(self, what: str = "identifier") -> _Tok:
        tok = self.take(what)
        if not IDENT.match(tok.text):
            self.fail(what, tok)
        return tok

    def integer(self, what: str = "positive integer") -> int:
        tok = self.take(what)
        if not re.fullmatch(r"[0-9]+", tok.text) or int(tok.text) < 1:
            self.fail(what, tok)
        return int(tok.text)

    def real(self, what: str = "number", *, positive=False, nonneg=False) -> float:
        tok = self.take(what)
        try:
            value = float(tok.text)
        except ValueError:
            self.fail(what, tok)
        if not math.isfinite(value) or (positive and value <= 0) or (nonneg and value < 0):
            self.fail(what, tok)
        return value

    def bit(self, tok: _Tok | None = None, text: str | None = None) -> int:
        text = text if text is not None else self.take("0 or 1").text
        if text not in ("0", "1"):
            self.fail("0 or 1", tok)
        return int(text)

    def port_ref(self) -> tuple[_Tok, tuple[str, str]]:
        tok = self.take("<id>.<port>")
        inst, dot, port = tok.text.partition(".")
        if not dot or not IDENT.match(inst) or not IDENT.match(port):
            self.fail("<id>.<port>", tok)
        return tok, (inst, port)

    def done(self):
        if self.peek() is not None:
            self.fail("end of line")


def _parse_line(ln: _Line):
    head = ln.keyword("muscle", "gate", "connector", "skeleton", "wire", "schedule")
    if head == "muscle":
        ident = ln.ident()
        ln.keyword("mode")
        mode = SignalMode.parse(ln.keyword("expand", "contract"))
        ln.keyword("channel")
        channel = ln.ident("channel identifier")
        ln.done()
        return MuscleDecl(ident.text, mode, channel.text, ln.number), ident
    if head == "gate":
        ident = ln.ident()
        ln.keyword("kind")
        kind = GateKind(ln.keyword("AND", "OR", "NAND", "NOR"))
        out_mode = DEFAULT_OUT_MODE.get(kind, SignalMode.CONTRACT)
        if ln.peek() is not None:
            ln.keyword("out_mode")
            out_mode = SignalMode.parse(ln.keyword("expand", "contract"))
        ln.done()
        return GateDecl(ident.text, kind, out_mode, ln.number), ident
    if head == "connector":
        ident = ln.ident()
        ln.keyword("units")
        units = ln.integer()
        tol = 0.0
        if ln.peek() is not None:
            ln.keyword("tolerance")
            tol = ln.real("non-negative number", nonneg=True)
        ln.done()
        return ConnectorDecl(ident.text, units, tol, ln.number), ident
    if head == "skeleton":
        ident = ln.ident()
        ln.keyword("units")
        units = ln.integer()
        ln.done()
        return SkeletonDecl(ident.text, units, ln.number), ident
    if head == "wire":
        src_tok, src = ln.port_ref()
        ln.keyword("->")
        dst_tok, dst = ln.port_ref()
        ln.done()
        return Wire(src, dst, ln.number), (src_tok, dst_tok)
    # schedule
    channel = ln.ident("channel identifier")
    form = ln.keyword("square", "step", "const")
    if form == "square":
        ln.keyword("period")
        period = ln.real("positive number", positive=True)
        duty = 0.5
        if ln.peek() is not None:
            ln.keyword("duty")
            tok = ln.peek()
            duty = ln.real("number in (0, 1)")
            if not 0 < duty < 1:
                ln.fail("number in (0, 1)", tok)
        wave = Square(period, duty)
    elif form == "const":
        wave = Constant(ln.bit())
    else:
        points = []
        while True:
            tok = ln.take("<time>:<0|1>")
            t, colon, s = tok.text.partition(":")
            try:
                time = float(t)
            except ValueError:
                ln.fail("<time>:<0|1>", tok)
            if not colon or not math.isfinite(time) or time < 0 or s not in ("0", "1"):
                ln.fail("<time>:<0|1>", tok)
            if points and time <= points[-1][0]:
                ln.fail("strictly increasing time", tok)
            points.append((time, int(s)))
            if ln.peek() is None:
                break
        wave = Step(tuple(points))
    ln.done()
    return ScheduleDecl(channel.text, wave, ln.number), channel


def parse(text: str) -> CircuitSpec:
    """Parse netlist source into a :class:`CircuitSpec`.

    Raises
    ------
    NetlistSyntaxError
        With 1-based ``line``/``column`` and the ``expected`` token class.
    DuplicateId
        An instance identifier or a scheduled channel appears twice.
    UnknownReference
        A wire names an undeclared instance or a port it does not expose.
    """
    groups = {MuscleDecl: [], GateDecl: [], ConnectorDecl: [], SkeletonDecl: [],
              Wire: [], ScheduleDecl: []}
    seen: dict[str, int] = {}
    scheduled: dict[str, int] = {}
    wire_toks = []
    for number, raw in enumerate(text.splitlines(), start=1):
        ln = _Line(number, raw)
        if not ln.toks:
            continue
        node, tok = _parse_line(ln)
        if isinstance(node, (MuscleDecl, GateDecl, ConnectorDecl, SkeletonDecl)):
            if node.id in seen:
                raise DuplicateId(node.id, number, ln.toks[1].col)
            seen[node.id] = number
        elif isinstance(node, ScheduleDecl):
            if node.channel in scheduled:
                raise DuplicateId(node.channel, number, ln.toks[1].col)
            scheduled[node.channel] = number
        elif isinstance(node, Wire):
            wire_toks.append(tok)
        groups[type(node)].append(node)
    spec = CircuitSpec(*(tuple(groups[k]) for k in
                         (MuscleDecl, GateDecl, ConnectorDecl, SkeletonDecl, Wire, ScheduleDecl)))
    inst = spec.instances
    for w, (src_tok, dst_tok) in zip(spec.wires, wire_toks):
        for (name, port), tok, side in ((w.src, src_tok, 1), (w.dst, dst_tok, 0)):
            if name not in inst:
                raise UnknownReference(name, w.line, tok.col)
            if port not in ports_of(inst[name])[side]:
                raise UnknownReference(f"{name}.{port}", w.line, tok.col + len(name) + 1)
    return spec


# ---------------------------------------------------------------------------
# printing

def _num(x: float) -> str:
    return repr(float(x))


def _wave_text(w: Waveform) -> str:
    if isinstance(w, Square):
        return f"square period {_num(w.period)} duty {_num(w.duty)}"
    if isinstance(w, Constant):
        return f"const {w.state}"
    return "step " + " ".join(f"{_num(t)}:{s}" for t, s in w.points)


def iter_lines(spec: CircuitSpec) -> Iterator[str]:
    for m in spec.muscles:
        yield f"muscle {m.id} mode {m.mode.value.lower()} channel {m.channel}"
    for g in spec.gates:
        yield f"gate {g.id} kind {g.kind.value} out_mode {g.out_mode.value.lower()}"
    for c in spec.connectors:
        yield f"connector {c.id} units {c.units} tolerance {_num(c.tolerance)}"
    for s in spec.skeletons:
        yield f"skeleton {s.id} units {s.units}"
    for w in spec.wires:
        yield f"wire {w.src[0]}.{w.src[1]} -> {w.dst[0]}.{w.dst[1]}"
    for s in spec.schedules:
        yield f"schedule {s.channel} {_wave_text(s.waveform)}"


def pretty(spec: CircuitSpec) -> str:
    """Canonical source text; ``parse(pretty(s)) == s``."""
    lines = list(iter_lines(spec))
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# elaboration

def _muscle_fixture(m: MuscleDecl) -> Assembly:
    """Two free slabs held σ apart by the muscle; port ``out`` reads its length."""
    sb = SceneBuilder(m.id)
    x = [1.0, 0.0, 0.0]
    y = [0.0, 1.0, 0.0]
    sb.body("A", [-0.5, 0.0, 0.0], y, x, nominal=(0.5, 0.25, 0.005))
    sb.body("B", [0.5, 0.0, 0.0], y, x, nominal=(0.5, 0.25, 0.005))
    sb.muscle("m", "A", [-0.5, 0.0, 0.0], "B", [0.5, 0.0, 0.0], 1.0, m.mode, m.channel)
    sb.probe("out", "A", [-0.5, 0.0, 0.0], "B", [0.5, 0.0, 0.0], 1.0,
             m.mode.sign * SIGNAL, ProbeRole.GATE_OUTPUT)
    sb.port("out", "out", "out")
    return sb.build(kind="muscle")


class _Elaborator:
    def __init__(self, spec: CircuitSpec, core: CoreGeometry | None, name: str):
        self.spec = spec
        self.core = core
        self.name = name
        self.inst = spec.instances
        self.drivers: dict[tuple[str, str], Wire] = {}
        for w in spec.wires:
            if w.dst in self.drivers:
                raise DoubleWire(f"{w.dst[0]}.{w.dst[1]} is driven twice (line {w.line})")
            self.drivers[w.dst] = w
        used = {}
        for w in spec.wires:
            if isinstance(self.inst[w.src[0]], MuscleDecl):
                continue
            if w.src in used:
                raise DoubleWire(f"{w.src[0]}.{w.src[1]} drives two inputs (line {w.line})")
            used[w.src] = w
        self._signals: dict[str, float] = {}

    def out_signal(self, ident: str, stack=()) -> float:
        """Signed signal carried by the output of ``ident``."""
        decl = self.inst[ident]
        if isinstance(decl, MuscleDecl):
            return decl.mode.sign * SIGNAL
        if isinstance(decl, GateDecl):
            return decl.out_mode.sign * SIGNAL
        if ident in stack:
            raise InvalidSpec(f"connector loop through {ident!r}")
        w = self.drivers.get((ident, "in"))
        return SIGNAL if w is None else self.out_signal(w.src[0], stack + (ident,))

    def gate_mode(self, g: GateDecl) -> SignalMode:
        modes = {}
        for port in ("in1", "in2"):
            w = self.drivers.get((g.id, port))
            if w is not None:
                modes[port] = SignalMode.from_sign(self.out_signal(w.src[0]))
        if len(set(modes.values())) > 1:
            raise PortMismatch(f"gate {g.id!r}: inputs are driven with opposite signal modes")
        return next(iter(modes.values()), SignalMode.EXPAND)

    def gate_channels(self, g: GateDecl) -> tuple[str, str]:
        out = []
        for port in ("in1", "in2"):
            w = self.drivers.get((g.id, port))
            src = None if w is None else self.inst[w.src[0]]
            out.append(src.channel if isinstance(src, MuscleDecl) else f"{g.id}.{port}")
        return tuple(out)

    def build(self) -> tuple[Assembly, ActuationSchedule]:
        parts = []
        wires = []
        channels = set(self.spec.channels)
        muscle_used = {w.src[0] for w in self.spec.wires}
        for m in self.spec.muscles:
            if m.id not in muscle_used:
                parts.append(_muscle_fixture(m))
        for g in self.spec.gates:
            parts.append(build_gate(g.kind, self.gate_mode(g), g.out_mode, self.core, name=g.id,
                                    channels=self.gate_channels(g)))
        for c in self.spec.connectors:
            part = build_connector(c.units, c.tolerance, signal=self.out_signal(c.id), name=c.id)
            w = self.drivers.get((c.id, "in"))
            if w is not None and isinstance(self.inst[w.src[0]], MuscleDecl):
                m = self.inst[w.src[0]]
                part = add_drive(part, "in", m.mode, m.channel)
            parts.append(part)
        for s in self.spec.skeletons:
            part = build_skeleton(s.units, name=s.id)
            free = [f"dof{k}" for k in range(1, 2 * s.units + 1)
                    if (s.id, f"dof{k}") not in self.drivers]
            parts.append(add_struts(part, free))

        for w in self.spec.wires:
            src, dst = self.inst[w.src[0]], self.inst[w.dst[0]]
            if isinstance(dst, SkeletonDecl):
                lever = f"{dst.id}_{w.dst[1]}"
                if lever in self.inst:
                    raise DuplicateId(lever, w.line)
                sig = self.out_signal(src.id)
                muscle = (src.mode, src.channel) if isinstance(src, MuscleDecl) else None
                parts.append(build_lever(adaptor_spec(sig), name=lever, muscle=muscle))
                if muscle is None:
                    wires.append((f"{src.id}.{w.src[1]}", f"{lever}.in"))
                wires.append((f"{lever}.out", f"{dst.id}.{w.dst[1]}"))
            elif not isinstance(src, MuscleDecl):
                wires.append((f"{src.id}.{w.src[1]}", f"{dst.id}.{w.dst[1]}"))

        schedule = {}
        for s in self.spec.schedules:
            if s.channel not in channels:
                raise UnboundChannel(f"schedule for {s.channel!r} (line {s.line}) "
                                     "names no declared muscle channel")
            schedule[s.channel] = s.waveform
        if not parts:
            return Assembly(self.name, (), (), (), (), (), {"kind": "empty"}), ActuationSchedule()
        assembly = compose(parts, wires, name=self.name)
        return assembly, ActuationSchedule(schedule)


def elaborate(spec: CircuitSpec, core: CoreGeometry | None = None, *,
              name: str = "circuit") -> tuple[Assembly, ActuationSchedule]:
    """Build the assembly and actuation schedule described by ``spec``.

    Gate inputs driven by muscles take those muscles' channels and mode.
    Undriven gate inputs get private channels ``<gate>.<port>`` held at rest;
    undriven skeleton DOFs are held at rest by struts.

    Raises
    ------
    PortMismatch, GeometryInfeasible
        Propagated from the builders and :func:`compose`.
    UnboundChannel
        A schedule names a channel no muscle declares.
    """
    return _Elaborator(spec, core, name).build()


def load(path) -> CircuitSpec:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


__all__ = [
    "CircuitSpec", "MuscleDecl", "GateDecl", "ConnectorDecl", "SkeletonDecl", "Wire",
    "ScheduleDecl", "parse", "pretty", "elaborate", "load", "ports_of",
]
