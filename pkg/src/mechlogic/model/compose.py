"""Wiring assemblies together through their ports."""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Sequence

import numpy as np

from ..errors import DoubleWire, InvalidSpec, PortMismatch, UnknownPort
from .assembly import Assembly, AttachmentPoint, Joint, JointKind, Port

FUSE_TOL = 1e-9
_N_ANGLES = 72


def _split(ref) -> tuple[str, str]:
    if isinstance(ref, str):
        part, sep, port = ref.partition(".")
        if not sep:
            raise UnknownPort(f"port reference {ref!r} is not of the form part.port")
        return part, port
    part, port = ref
    return str(part), str(port)


def _rotation_between(a, b) -> np.ndarray:
    """Smallest rotation taking unit vector ``a`` onto unit vector ``b``."""
    a = np.asarray(a, dtype=float) / np.linalg.norm(a)
    b = np.asarray(b, dtype=float) / np.linalg.norm(b)
    c = float(a @ b)
    if c < -1.0 + 1e-12:
        axis = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(axis) < 1e-6:
            axis = np.cross(a, [0.0, 1.0, 0.0])
        axis /= np.linalg.norm(axis)
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    k = np.cross(a, b)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + kx + kx @ kx / (1.0 + c)


def _axis_rotation(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    kx = np.array([[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]],
                   [-axis[1], axis[0], 0.0]])
    return np.eye(3) + math.sin(angle) * kx + (1.0 - math.cos(angle)) * kx @ kx


def _probe_points(part: Assembly, port: Port) -> tuple[np.ndarray, np.ndarray]:
    pr = part.probe(port.probe)
    return part.world(pr.endpoints[0]), part.world(pr.endpoints[1])


def _place(moving: Assembly, src, dst, avoid) -> Assembly:
    """Move ``moving`` so its point pair ``src`` lands on ``dst``.

    The remaining rotation about the pair axis is chosen to keep the part's
    centroid as far as possible from ``avoid``.
    """
    s0, s1 = src
    d0, d1 = dst
    base = _rotation_between(s1 - s0, d1 - d0)
    axis = (d1 - d0) / np.linalg.norm(d1 - d0)
    s_mid = 0.5 * (s0 + s1)
    d_mid = 0.5 * (d0 + d1)
    c = moving.centroid() - s_mid
    best, best_dist = None, -1.0
    for i in range(_N_ANGLES):
        rot = _axis_rotation(axis, 2.0 * math.pi * i / _N_ANGLES) @ base
        dist = float(np.linalg.norm(rot @ c + d_mid - avoid))
        if dist > best_dist + 1e-12:
            best, best_dist = rot, dist
    return moving.transformed(best, d_mid - best @ s_mid)


def _prefixed(part: Assembly) -> Assembly:
    """Copy of ``part`` with every identifier namespaced by the part name."""
    n = part.name

    def ap(a: AttachmentPoint) -> AttachmentPoint:
        return AttachmentPoint(f"{n}.{a.body}", a.local)

    return Assembly(
        name=n,
        slabs=tuple(replace(s, id=f"{n}.{s.id}") for s in part.slabs),
        joints=tuple(replace(j, id=f"{n}.{j.id}",
                             endpoints=tuple((ap(a), ap(b)) for a, b in j.endpoints))
                     for j in part.joints),
        muscles=tuple(replace(m, id=f"{n}.{m.id}", endpoints=(ap(m.endpoints[0]), ap(m.endpoints[1])))
                      for m in part.muscles),
        probes=tuple(replace(p, id=f"{n}.{p.id}", endpoints=(ap(p.endpoints[0]), ap(p.endpoints[1])))
                     for p in part.probes),
        ports=tuple(Port(f"{n}.{p.name}", f"{n}.{p.probe}", p.direction,
                         None if p.muscle is None else f"{n}.{p.muscle}")
                    for p in part.ports),
        meta=dict(part.meta),
    )


def check_wire(out_part: Assembly, out_port: str, in_part: Assembly, in_port: str):
    """Raise unless ``out_part.out_port`` may drive ``in_part.in_port``."""
    po = out_part.port(out_port)
    pi = in_part.port(in_port)
    if po.direction != "out" or pi.direction != "in":
        raise PortMismatch(f"{out_part.name}.{out_port} -> {in_part.name}.{in_port}: "
                           "wires run from an output port to an input port")
    a = out_part.probe(po.probe)
    b = in_part.probe(pi.probe)
    if not math.isclose(a.rest_length, b.rest_length, abs_tol=1e-9):
        raise PortMismatch(f"rest length {a.rest_length:g} vs {b.rest_length:g}")
    if not math.isclose(a.signal, b.signal, abs_tol=1e-9):
        raise PortMismatch(f"signal {a.signal:+g} vs {b.signal:+g}")


def compose(parts: Sequence[Assembly], wires: Sequence = (), *, name: str = "circuit",
            tolerance: float = 0.0, relax_mismatch: bool = True) -> Assembly:
    """Merge ``parts`` and fuse wired port pairs with universal joints.

    Parameters
    ----------
    parts : sequence of Assembly
        Parts with distinct names. The first part stays where it is; the
        others are moved so that wired probe endpoints coincide.
    wires : sequence of (out_ref, in_ref)
        References are ``"part.port"`` strings or ``(part, port)`` tuples.
    tolerance : float
        Slack of the fusing joints.

    Returns
    -------
    Assembly
        Identifiers are namespaced ``part.id``; unwired ports are re-exported
        as ``part.port``. The muscle behind a driven input port is removed.
    """
    parts = list(parts)
    by_name = {}
    for p in parts:
        if p.name in by_name:
            raise InvalidSpec(f"duplicate part name {p.name!r}")
        by_name[p.name] = p

    resolved = []
    used = set()
    for w in wires:
        (po, so), (pi, si) = _split(w[0]), _split(w[1])
        for part, port in ((po, so), (pi, si)):
            if part not in by_name:
                raise UnknownPort(f"no part named {part!r}")
            by_name[part].port(port)
            if (part, port) in used:
                raise DoubleWire(f"{part}.{port} is wired twice")
            used.add((part, port))
        check_wire(by_name[po], so, by_name[pi], si)
        resolved.append((po, so, pi, si))

    # breadth-first placement along the wire graph
    placed = {}
    order = [p.name for p in parts]
    for root in order:
        if root in placed:
            continue
        placed[root] = by_name[root]
        frontier = [root]
        while frontier:
            current = frontier.pop(0)
            for po, so, pi, si in resolved:
                if current not in (po, pi):
                    continue
                other = pi if current == po else po
                if other in placed:
                    continue
                fixed = placed[current]
                moving = by_name[other]
                fp = fixed.port(so if current == po else si)
                mp = moving.port(si if current == po else so)
                avoid = np.mean([a.centroid() for a in placed.values()], axis=0)
                placed[other] = _place(moving, _probe_points(moving, mp),
                                       _probe_points(fixed, fp), avoid)
                frontier.append(other)

    merged = [_prefixed(placed[n]) for n in order]
    slabs = [s for m in merged for s in m.slabs]
    joints = [j for m in merged for j in m.joints]
    muscles = [mu for m in merged for mu in m.muscles]
    probes = [pr for m in merged for pr in m.probes]
    ports = {p.name: p for m in merged for p in m.ports}
    probe_index = {pr.id: pr for pr in probes}

    dropped = set()
    mismatch = 0.0
    scene = Assembly(name, slabs, (), (), probes, (), {})
    for k, (po, so, pi, si) in enumerate(resolved):
        out_port = ports.pop(f"{po}.{so}")
        in_port = ports.pop(f"{pi}.{si}")
        if in_port.muscle is not None:
            dropped.add(in_port.muscle)
        a = probe_index[out_port.probe].endpoints
        b = probe_index[in_port.probe].endpoints
        for e, (ea, eb) in enumerate(zip(a, b)):
            mismatch = max(mismatch, float(np.linalg.norm(scene.world(ea) - scene.world(eb))))
            joints.append(Joint(f"wire{k}.{e}", JointKind.make(False, tolerance),
                                ((ea, eb),), 1.0, tolerance))
    muscles = [m for m in muscles if m.id not in dropped]
    meta = {"parts": {m.name: dict(m.meta) for m in merged},
            "wires": [[f"{po}.{so}", f"{pi}.{si}"] for po, so, pi, si in resolved]}
    out = Assembly(name, slabs, joints, muscles, probes, tuple(ports.values()), meta)
    if mismatch > FUSE_TOL and relax_mismatch:
        from ..dynamics import relax

        out = relax(out)
    return out
