"""Builders turning solved geometry into rigid-slab assemblies.

Every builder places its bodies so that the built configuration is exactly
stress free: all joint bonds have zero length and every muscle sits at its
equilibrium for channel state 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import GeometryInfeasible, InvalidSpec, NoConvergence, PortMismatch
from ..geometry import (CoreGeometry, CoreSpec, Hinge, LeverGeometry, LeverSpec,
                        solve_core, solve_lever)
from .assembly import SIGNAL, Assembly, ProbeRole, SceneBuilder, SignalMode

INPUT_LEVER_EXTENT = 1.5
OUTPUT_LEVER_EXTENT = 2.0
ADAPTOR_EXTENT = 2.0
LEVER_CONVENTION = "halved"

CONNECTOR_SLAB = 1.1
CONNECTOR_ANGLE = math.pi / 4  # slab inclination to the chain axis

SKELETON_PITCH = 4.0
SKELETON_HALF_HEIGHT = 0.75
SKELETON_DOF_REST = 2.0
SKELETON_DOF_SIGNAL = 1.0
SLAB_DEPTH = 0.25


class GateKind(str, enum.Enum):
    AND = "AND"
    OR = "OR"
    NAND = "NAND"
    NOR = "NOR"

    @property
    def input_not(self) -> bool:
        """Input levers invert the muscle signal (OR = NOT CORE(NOT a, NOT b))."""
        return self in (GateKind.OR, GateKind.NOR)

    @property
    def output_not(self) -> bool:
        """Output lever maps a raised apex to output state 0."""
        return self in (GateKind.NAND, GateKind.OR)

    def truth(self, a: int, b: int) -> int:
        return int({GateKind.AND: a and b, GateKind.OR: a or b,
                    GateKind.NAND: not (a and b), GateKind.NOR: not (a or b)}[self])


def default_core() -> CoreGeometry:
    return _default_core()


@lru_cache(maxsize=1)
def _default_core() -> CoreGeometry:
    return solve_core(CoreSpec(0.5, 2.0))


def hinge_for(dl_in: float, dl_out: float) -> Hinge:
    """Crossed keeps the direction of the signal, open inverts it."""
    return Hinge.CROSSED if (dl_in > 0) == (dl_out > 0) else Hinge.OPEN


def _solve(spec: LeverSpec) -> LeverGeometry:
    try:
        return solve_lever(spec, convention=LEVER_CONVENTION)
    except NoConvergence as exc:
        raise GeometryInfeasible(f"no lever for {spec}") from exc


@dataclass(frozen=True)
class LeverPose:
    a_in: np.ndarray
    b_in: np.ndarray
    hinge: np.ndarray
    a_out: np.ndarray
    b_out: np.ndarray


def lever_pose(geom: LeverGeometry, actuated: bool, u, v, *, n_in=None, m_out=None) -> LeverPose:
    """Scissor-lever joint positions in one of its two design states.

    ``u`` points from the input pair to the output pair and ``v`` along the
    input pair (from body B to body A). Exactly one of the input midpoint
    ``n_in`` or the output midpoint ``m_out`` anchors the lever.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    t1 = geom.theta1 + (geom.dtheta if actuated else 0.0)
    t2 = geom.theta2 + (geom.spec.hinge.sign * geom.dtheta if actuated else 0.0)
    side = -geom.spec.hinge.sign  # open: output arm on the same side as the input arm
    reach_in = geom.l1 * math.cos(t1)
    reach_out = geom.l2 * math.cos(t2)
    if n_in is None:
        n_in = np.asarray(m_out, dtype=float) - (reach_in + reach_out) * u
    n_in = np.asarray(n_in, dtype=float)
    h = n_in + reach_in * u
    half_in = geom.l1 * math.sin(t1) * v
    half_out = side * geom.l2 * math.sin(t2) * v
    return LeverPose(n_in + half_in, n_in - half_in, h,
                     h + reach_out * u + half_out, h + reach_out * u - half_out)


def _add_lever(sb: SceneBuilder, prefix: str, pose: LeverPose, axis):
    """Two lever bodies joined by their central hinge; returns (A, B)."""
    a, b = f"{prefix}A", f"{prefix}B"
    sb.body(a, (pose.a_in + pose.hinge + pose.a_out) / 3.0, pose.a_out - pose.a_in, axis)
    sb.body(b, (pose.b_in + pose.hinge + pose.b_out) / 3.0, pose.b_out - pose.b_in, axis)
    sb.hinge([a, b], pose.hinge, axis, label=f"{prefix}H")
    return a, b


# ---------------------------------------------------------------------------
# gate

def gate_lever_specs(kind: GateKind, muscle_mode: SignalMode, output_mode: SignalMode,
                     core: CoreGeometry) -> tuple[LeverSpec, LeverSpec]:
    """Input- and output-lever specs realizing ``kind``.

    The input lever is referenced to the muscle at rest. The output lever is
    referenced to the apex height at which the output probe reads state 0.
    """
    kind = GateKind(kind)
    d_in = core.spec.delta_in_frac
    m = muscle_mode.sign * SIGNAL
    if kind.input_not:
        lo, dlo = 1.0 + d_in, -d_in
    else:
        lo, dlo = 1.0, d_in
    in_spec = LeverSpec(1.0, lo, m, dlo, INPUT_LEVER_EXTENT, hinge_for(m, dlo))

    rise = core.delta_out_frac
    h = core.spec.h_frac
    s = output_mode.sign * SIGNAL
    if kind.output_not:
        li, dli = h + rise, -rise
    else:
        li, dli = h, rise
    out_spec = LeverSpec(li, 1.0, dli, s, OUTPUT_LEVER_EXTENT, hinge_for(dli, s))
    return in_spec, out_spec


def build_gate(kind, muscle_mode=SignalMode.EXPAND, output_mode=SignalMode.EXPAND,
               core: CoreGeometry | None = None, *, name: str | None = None,
               channels=("in1", "in2"), tolerance: float = 0.0,
               stiffness: float = 1.0) -> Assembly:
    """Logic core plus two input levers and one output lever.

    The core lies in the x-y plane with the base ``ab`` on the x axis and the
    apex ``d`` on the y axis. The input levers lie in the same plane; the
    output lever stands in the y-z plane and its output pair points along y.

    Returns an assembly of 8 bodies and 8 joints with ports ``in1``, ``in2``
    and ``out``.
    """
    kind = GateKind(kind)
    muscle_mode = SignalMode.parse(muscle_mode)
    output_mode = SignalMode.parse(output_mode)
    core = default_core() if core is None else core
    if core.delta_out_frac <= 0:
        raise GeometryInfeasible("core apex does not move")
    in_spec, out_spec = gate_lever_specs(kind, muscle_mode, output_mode, core)
    in_geom = _solve(in_spec)
    out_geom = _solve(out_spec)

    sb = SceneBuilder(name or kind.value.lower(), tolerance, stiffness)
    z = np.array([0.0, 0.0, 1.0])
    xhat = np.array([1.0, 0.0, 0.0])

    # core at inputs (0, 0)
    s = math.sin(core.phi)
    side = in_spec.l_out
    pa = np.array([-s, 0.0, 0.0])
    pb = np.array([s, 0.0, 0.0])
    pc = np.array([0.0, math.sqrt(side * side - s * s), 0.0])
    pd = pc + np.array([0.0, core.x_frac, 0.0])
    pm = 0.5 * (pa + pb)

    sb.slab_between("ab", pa, pb, z)
    sb.slab_between("cd", pc, pd, z)

    pins = {}
    for i, (p_out, other) in enumerate(((pa, pb), (pb, pa)), start=1):
        mid = 0.5 * (p_out + pc)
        v = (p_out - pc) / np.linalg.norm(p_out - pc)
        u = np.cross(z, v)
        if u @ (other - mid) < 0:
            u = -u
        # v points from the pin at c to the base corner; flip for the crossed arm
        vv = v * (-in_geom.spec.hinge.sign)
        pose = lever_pose(in_geom, False, u, vv, m_out=mid)
        la, lb = _add_lever(sb, f"L{i}", pose, z)
        if np.linalg.norm(pose.a_out - p_out) > 1e-9:
            la, lb = lb, la
            pose = LeverPose(pose.b_in, pose.a_in, pose.hinge, pose.b_out, pose.a_out)
        pins[i] = (la, lb, pose)
        ch = channels[i - 1]
        sb.muscle(f"m{i}", la, pose.a_in, lb, pose.b_in, 1.0, muscle_mode, ch)
        sb.probe(f"in{i}", la, pose.a_in, lb, pose.b_in, 1.0, muscle_mode.sign * SIGNAL,
                 ProbeRole.GATE_INPUT)
        sb.port(f"in{i}", f"in{i}", "in", f"m{i}")

    (l1a, l1b, _), (l2a, l2b, _) = pins[1], pins[2]
    sb.hinge(["ab", l1a], pa, z, label="pa")
    sb.hinge(["ab", l2a], pb, z, label="pb")
    sb.hinge(["cd", l1b, l2b], pc, z, label="pc")

    raised = kind.input_not
    rest_state = raised == kind.output_not
    v = (pm - pd) / np.linalg.norm(pm - pd)
    pose = lever_pose(out_geom, not rest_state, z, v, n_in=0.5 * (pm + pd))
    oa, ob = _add_lever(sb, "L3", pose, xhat)
    sb.hinge(["ab", oa], pm, xhat, label="pm")
    sb.universal("cd", ob, pd, label="pd")

    sb.probe("core", "ab", pm, "cd", pd, core.spec.h_frac, core.delta_out_frac,
             ProbeRole.CORE_OUTPUT)
    sb.probe("out", oa, pose.a_out, ob, pose.b_out, 1.0, output_mode.sign * SIGNAL,
             ProbeRole.GATE_OUTPUT)
    sb.port("out", "out", "out")
    return sb.build(kind=kind.value, muscle_mode=muscle_mode.value,
                    output_mode=output_mode.value,
                    hinges={"input": in_spec.hinge.value, "output": out_spec.hinge.value})


# ---------------------------------------------------------------------------
# standalone lever (used as an adaptor between parts)

def build_lever(spec: LeverSpec, *, name: str = "lever", tolerance: float = 0.0,
                stiffness: float = 1.0, muscle: tuple[SignalMode, str | None] | None = None) -> Assembly:
    """A single scissor lever with ports ``in`` and ``out`` at its rest state.

    ``muscle=(mode, channel)`` adds a muscle across the input pair, which must
    then have rest length σ and signal ±σ/2.
    """
    geom = _solve(spec)
    sb = SceneBuilder(name, tolerance, stiffness)
    z = np.array([0.0, 0.0, 1.0])
    pose = lever_pose(geom, False, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], n_in=np.zeros(3))
    a, b = _add_lever(sb, "", pose, z)
    sb.probe("in", a, pose.a_in, b, pose.b_in, spec.l_in, spec.dl_in, ProbeRole.GATE_INPUT)
    sb.probe("out", a, pose.a_out, b, pose.b_out, spec.l_out, spec.dl_out,
             ProbeRole.GATE_OUTPUT)
    mname = None
    if muscle is not None:
        mode, channel = SignalMode.parse(muscle[0]), muscle[1]
        if not (math.isclose(spec.l_in, 1.0) and math.isclose(spec.dl_in, mode.sign * SIGNAL)):
            raise InvalidSpec("a muscle-driven lever needs input rest σ and signal ±σ/2")
        sb.muscle("m", a, pose.a_in, b, pose.b_in, 1.0, mode, channel)
        mname = "m"
    sb.port("in", "in", "in", mname)
    sb.port("out", "out", "out")
    return sb.build(kind="lever", hinge=spec.hinge.value)


def adaptor_spec(signal: float = SIGNAL) -> LeverSpec:
    """Lever from a gate-level signal (σ, ±σ/2) to a skeleton DOF (2σ, +σ)."""
    return LeverSpec(1.0, SKELETON_DOF_REST, signal, SKELETON_DOF_SIGNAL, ADAPTOR_EXTENT,
                     hinge_for(signal, SKELETON_DOF_SIGNAL))


# ---------------------------------------------------------------------------
# connector

def connector_dimensions() -> dict:
    """Built-state dimensions of one half-unit (input pair at rest, σ apart)."""
    a = CONNECTOR_SLAB * math.cos(CONNECTOR_ANGLE)
    side2 = CONNECTOR_SLAB ** 2 - a * a  # squared rhombus side seen along the chain
    p = 0.5
    return {"p": p, "q": math.sqrt(side2 - p * p), "a": a}


def build_connector(units: int, tolerance: float = 0.0, *, signal: float = SIGNAL,
                    name: str = "connector", stiffness: float = 1.0) -> Assembly:
    """Chain of connector units along +x.

    Each half-unit is a closed loop of four slabs whose hinges all point along
    the chain axis. Seen along that axis the loop is a rhombus, so widening
    the input pair narrows the perpendicular middle pair, and the mirrored
    second half turns it back. Halves and units are joined by pairs of
    universal joints, leaving a floppy bending mode at each junction.
    """
    if int(units) != units or units < 1:
        raise InvalidSpec("units must be a positive integer")
    if tolerance < 0:
        raise InvalidSpec("tolerance must be >= 0")
    if signal == 0 or abs(signal) >= 1.0:
        raise InvalidSpec("signal must be non-zero and below σ")
    dims = connector_dimensions()
    p, q, a = dims["p"], dims["q"], dims["a"]
    xhat = np.array([1.0, 0.0, 0.0])
    sb = SceneBuilder(name, tolerance, stiffness)
    rest = 1.0

    def outer(x):
        return np.array([x, p, 0.0]), np.array([x, -p, 0.0])

    def inner(x):
        return np.array([x, 0.0, q]), np.array([x, 0.0, -q])

    prev = None  # (slab at +p, slab at -p, +point, -point) of the previous outer pair
    n_half = 2 * int(units)
    for k in range(n_half):
        x0 = k * a
        if k % 2 == 0:
            (o_p, o_m), (i_p, i_m) = outer(x0), inner(x0 + a)
            loop = [o_p, i_p, o_m, i_m]
        else:
            (i_p, i_m), (o_p, o_m) = inner(x0), outer(x0 + a)
            loop = [i_p, o_p, i_m, o_m]
        ids = [f"h{k}s{j}" for j in range(4)]
        for j in range(4):
            sb.slab_between(ids[j], loop[j], loop[(j + 1) % 4], xhat)
        for j in range(4):
            sb.hinge([ids[j - 1], ids[j]], loop[j], xhat, label=f"h{k}v{j}")
        if k % 2 == 0:
            near_p, near_m = ids[0], ids[2]  # slabs starting at the outer pair
            far_p, far_m = ids[1], ids[3]    # slabs starting at the inner pair
            if prev is not None:
                sb.universal(prev[0], near_p, o_p, label=f"u{k}p")
                sb.universal(prev[1], near_m, o_m, label=f"u{k}m")
            else:
                sb.probe("in", near_p, o_p, near_m, o_m, rest, signal,
                         ProbeRole.CONNECTOR_STAGE)
            mid = (ids[0], ids[2], i_p, i_m)  # slabs ending at the inner pair
        else:
            sb.universal(mid[0], ids[0], i_p, label=f"u{k}p")
            sb.universal(mid[1], ids[2], i_m, label=f"u{k}m")
            unit = k // 2
            sb.probe(f"stage{unit + 1}", ids[0], o_p, ids[2], o_m, rest, signal,
                     ProbeRole.CONNECTOR_STAGE)
            prev = (ids[0], ids[2], o_p, o_m)
    sb.port("in", "in", "in")
    sb.port("out", f"stage{int(units)}", "out")
    return sb.build(kind="connector", units=int(units))


# ---------------------------------------------------------------------------
# skeleton

def build_skeleton(units: int, *, name: str = "skeleton", tolerance: float = 0.0,
                   stiffness: float = 1.0) -> Assembly:
    """Chain of ``2 * units + 1`` rigid blocks along +x.

    Unit ``k`` has a top hinge and a bottom hinge, both with axes along z.
    Expanding ``dof{2k+1}`` (below the top hinge) bends the chain towards +y;
    expanding ``dof{2k+2}`` (above the bottom hinge) bends it towards -y.
    """
    if int(units) != units or units < 1:
        raise InvalidSpec("units must be a positive integer")
    units = int(units)
    w = SKELETON_HALF_HEIGHT
    z = np.array([0.0, 0.0, 1.0])
    xhat = np.array([1.0, 0.0, 0.0])
    sb = SceneBuilder(name, tolerance, stiffness)
    nominal = (1.0, w, SLAB_DEPTH)
    names = []
    for k in range(units + 1):
        x = SKELETON_PITCH * k
        names.append((f"L{k}", x - 1.0))
        if k < units:
            names.append((f"C{k}", x + 1.0))
    for ident, cx in names:
        sb.body(ident, [cx, 0.0, 0.0], xhat, [0.0, 1.0, 0.0], nominal=nominal)
    for k in range(units):
        x = SKELETON_PITCH * k
        left, mid, right = f"L{k}", f"C{k}", f"L{k + 1}"
        sb.hinge([left, mid], [x, w, 0.0], z, label=f"top{k}")
        sb.hinge([mid, right], [x + 2.0, -w, 0.0], z, label=f"bottom{k}")
        up, down = f"dof{2 * k + 1}", f"dof{2 * k + 2}"
        sb.probe(up, left, [x - 1.0, -w, 0.0], mid, [x + 1.0, -w, 0.0],
                 SKELETON_DOF_REST, SKELETON_DOF_SIGNAL, ProbeRole.SKELETON_DOF)
        sb.probe(down, mid, [x + 1.0, w, 0.0], right, [x + 3.0, w, 0.0],
                 SKELETON_DOF_REST, SKELETON_DOF_SIGNAL, ProbeRole.SKELETON_DOF)
        sb.port(up, up, "in")
        sb.port(down, down, "in")
    return sb.build(kind="skeleton", units=units)



def add_drive(assembly: Assembly, port: str, mode, channel: str | None) -> Assembly:
    """Attach a muscle on ``channel`` across an input port's probe.

    ``channel=None`` gives a strut that holds the port at rest.
    """
    from dataclasses import replace

    from .assembly import Muscle

    p = assembly.port(port)
    pr = assembly.probe(p.probe)
    mode = SignalMode.parse(mode)
    if channel is not None and not math.isclose(pr.signal, mode.sign * SIGNAL):
        raise PortMismatch(f"a {mode.value} muscle cannot drive port {port!r} "
                           f"(signal {pr.signal:+g})")
    mid = f"drive.{port}" if channel is not None else f"strut.{port}"
    m = Muscle(mid, pr.endpoints, pr.rest_length, mode, channel)
    ports = tuple(replace(q, muscle=mid) if q.name == port else q for q in assembly.ports)
    return replace(assembly, muscles=assembly.muscles + (m,), ports=ports)


def add_struts(assembly: Assembly, ports) -> Assembly:
    """Lock the named input ports with never-actuated struts."""
    for port in ports:
        assembly = add_drive(assembly, port, SignalMode.EXPAND, None)
    return assembly
