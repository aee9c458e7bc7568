"""Logic circuit driving a four-unit skeleton chain."""

from __future__ import annotations

from dataclasses import replace
from typing import Mapping

from ..errors import InvalidSpec
from .assembly import Assembly, SignalMode
from .builders import GateKind, adaptor_spec, add_struts, build_gate, build_lever, build_skeleton
from .compose import compose

TETRIS_UNITS = 4
CHANNELS = ("y", "b")

# skeleton DOF -> driving signal; a channel name or a gate kind over (y, b)
DEFAULT_DOF_TABLE = {
    "dof1": "y",
    "dof4": "b",
    "dof5": "AND",
    "dof8": "OR",
}


def dof_targets(table: Mapping[str, str], y: int, b: int, units: int = TETRIS_UNITS) -> tuple[int, ...]:
    """Ideal 0/1 state of every skeleton DOF for inputs ``(y, b)``."""
    states = {"y": int(y), "b": int(b)}
    out = []
    for k in range(1, 2 * units + 1):
        src = table.get(f"dof{k}")
        if src is None:
            out.append(0)
        elif src in states:
            out.append(states[src])
        else:
            out.append(GateKind(src).truth(states["y"], states["b"]))
    return tuple(out)


def _check_table(table: Mapping[str, str], units: int):
    valid = {f"dof{k}" for k in range(1, 2 * units + 1)}
    for dof, src in table.items():
        if dof not in valid:
            raise InvalidSpec(f"unknown skeleton DOF {dof!r}")
        if src not in CHANNELS and src not in {g.value for g in GateKind}:
            raise InvalidSpec(f"DOF source must be one of {CHANNELS} or a gate kind, got {src!r}")


def build_tetris_robot(table: Mapping[str, str] | None = None, *, core=None,
                       tolerance: float = 0.0, name: str = "tetris") -> Assembly:
    """Gates and adaptor levers wired onto the DOFs of a 4-unit skeleton.

    Parameters
    ----------
    table : mapping, optional
        ``{"dofN": source}`` with source ``"y"``, ``"b"`` or a gate kind
        evaluated on ``(y, b)``. DOFs missing from the table are held at
        rest by struts. Defaults to :data:`DEFAULT_DOF_TABLE`.

    Returns
    -------
    Assembly
        Expanding muscles on channels ``y`` and ``b``; the skeleton probes
        are ``skeleton.dof1`` .. ``skeleton.dof8``.
    """
    table = dict(DEFAULT_DOF_TABLE if table is None else table)
    _check_table(table, TETRIS_UNITS)
    skeleton = build_skeleton(TETRIS_UNITS, tolerance=tolerance)
    unused = [f"dof{k}" for k in range(1, 2 * TETRIS_UNITS + 1) if f"dof{k}" not in table]
    skeleton = add_struts(skeleton, unused)

    parts = [skeleton]
    wires = []
    for dof, src in sorted(table.items(), key=lambda kv: int(kv[0][3:])):
        lever_name = f"a{dof[3:]}"
        if src in CHANNELS:
            lever = build_lever(adaptor_spec(), name=lever_name, tolerance=tolerance,
                                muscle=(SignalMode.EXPAND, src))
        else:
            lever = build_lever(adaptor_spec(), name=lever_name, tolerance=tolerance)
            gate = build_gate(GateKind(src), SignalMode.EXPAND, SignalMode.EXPAND, core,
                              name=f"g{dof[3:]}", channels=CHANNELS, tolerance=tolerance)
            parts.append(gate)
            wires.append((f"{gate.name}.out", f"{lever_name}.in"))
        parts.append(lever)
        wires.append((f"{lever_name}.out", f"skeleton.{dof}"))
    robot = compose(parts, wires, name=name, tolerance=tolerance)
    return replace(robot, meta=dict(robot.meta, kind="tetris", dof_table=table))
