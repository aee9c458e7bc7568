"""Immutable description of a rigid-slab assembly and its JSON scene format.

An :class:`Assembly` is the hand-off between the builders and the dynamics
engine: rigid bodies with poses, joints and muscles expressed as harmonic
bonds between body-frame attachment points, probes that read a distance
between two attachment points, and named ports exposing probes to the
outside world.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np
from scipy.spatial.transform import Rotation

from ..errors import InvalidSpec, UnknownPort

SLAB_HALF_WIDTH = 0.25
SLAB_HALF_THICKNESS = 0.005
SIGNAL = 0.5


class JointKind(str, enum.Enum):
    HINGE = "Hinge"
    UNIVERSAL = "Universal"
    TOLERANCE_HINGE = "ToleranceHinge"
    TOLERANCE_UNIVERSAL = "ToleranceUniversal"

    @property
    def is_hinge(self) -> bool:
        return self in (JointKind.HINGE, JointKind.TOLERANCE_HINGE)

    @property
    def has_tolerance(self) -> bool:
        return self in (JointKind.TOLERANCE_HINGE, JointKind.TOLERANCE_UNIVERSAL)

    @classmethod
    def make(cls, hinge: bool, tolerance: float) -> "JointKind":
        if hinge:
            return cls.TOLERANCE_HINGE if tolerance > 0 else cls.HINGE
        return cls.TOLERANCE_UNIVERSAL if tolerance > 0 else cls.UNIVERSAL


class SignalMode(str, enum.Enum):
    EXPAND = "Expand"
    CONTRACT = "Contract"

    @property
    def sign(self) -> int:
        return 1 if self is SignalMode.EXPAND else -1

    @classmethod
    def from_sign(cls, s: float) -> "SignalMode":
        return cls.EXPAND if s > 0 else cls.CONTRACT

    @classmethod
    def parse(cls, value) -> "SignalMode":
        if isinstance(value, cls):
            return value
        return cls(str(value).capitalize())


class ProbeRole(str, enum.Enum):
    GATE_INPUT = "GateInput"
    GATE_OUTPUT = "GateOutput"
    CORE_OUTPUT = "CoreOutput"
    CONNECTOR_STAGE = "ConnectorStage"
    SKELETON_DOF = "SkeletonDof"


# ---------------------------------------------------------------------------
# quaternion helpers, (w, x, y, z) convention

def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return Rotation.from_quat([x, y, z, w]).as_matrix()


def matrix_to_quat(m) -> tuple[float, float, float, float]:
    x, y, z, w = Rotation.from_matrix(np.asarray(m, dtype=float)).as_quat()
    if w < 0:
        w, x, y, z = -w, -x, -y, -z
    return (float(w), float(x), float(y), float(z))


def quat_mul(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def _vec3(v) -> tuple[float, float, float]:
    a = np.asarray(v, dtype=float).reshape(3)
    return (float(a[0]), float(a[1]), float(a[2]))


# ---------------------------------------------------------------------------
# records

@dataclass(frozen=True)
class RigidSlab:
    id: str
    half_extents: tuple[float, float, float]
    position: tuple[float, float, float]
    orientation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    drag: float = 1.0
    rot_drag: float = 1.0

    def __post_init__(self):
        if any(h <= 0 for h in self.half_extents):
            raise InvalidSpec(f"slab {self.id}: half extents must be positive")
        q = np.asarray(self.orientation, dtype=float)
        n = np.linalg.norm(q)
        if not n > 0:
            raise InvalidSpec(f"slab {self.id}: zero quaternion")
        object.__setattr__(self, "orientation", tuple(float(c) for c in q / n))

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def to_world(self, local) -> np.ndarray:
        return np.asarray(self.position) + self.rotation @ np.asarray(local, dtype=float)

    def to_local(self, world) -> np.ndarray:
        return self.rotation.T @ (np.asarray(world, dtype=float) - np.asarray(self.position))


@dataclass(frozen=True)
class AttachmentPoint:
    body: str
    local: tuple[float, float, float]


Pair = tuple[AttachmentPoint, AttachmentPoint]


@dataclass(frozen=True)
class Joint:
    id: str
    kind: JointKind
    endpoints: tuple[Pair, ...]
    stiffness: float = 1.0
    tolerance: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", JointKind(self.kind))
        n = len(self.endpoints)
        if self.kind.is_hinge:
            # a pin may carry several bodies; each one adds two bonds to the hub
            if n < 2 or n % 2:
                raise InvalidSpec(f"hinge {self.id} needs bond pairs in twos, got {n}")
        elif n != 1:
            raise InvalidSpec(f"universal joint {self.id} needs exactly one bond, got {n}")
        if self.tolerance < 0:
            raise InvalidSpec("tolerance must be >= 0")
        if not self.kind.has_tolerance and self.tolerance != 0:
            raise InvalidSpec(f"joint {self.id}: tolerance on a {self.kind.value} joint")

    @property
    def bodies(self) -> set[str]:
        return {p.body for pair in self.endpoints for p in pair}


@dataclass(frozen=True)
class Muscle:
    id: str
    endpoints: Pair
    rest_length: float = 1.0
    mode: SignalMode = SignalMode.EXPAND
    channel: str | None = None
    stiffness: float = 1.0
    actuated_length: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", SignalMode.parse(self.mode))
        expected = self.rest_length + self.mode.sign * SIGNAL
        if self.actuated_length is None:
            object.__setattr__(self, "actuated_length", expected)
        elif not math.isclose(self.actuated_length, expected, abs_tol=1e-12):
            raise InvalidSpec(f"muscle {self.id}: actuated length must be rest {self.mode.sign:+d}0.5")

    def length_for(self, state: int) -> float:
        return self.actuated_length if state else self.rest_length


@dataclass(frozen=True)
class Probe:
    id: str
    endpoints: Pair
    rest_length: float
    signal: float
    role: ProbeRole

    def __post_init__(self):
        object.__setattr__(self, "role", ProbeRole(self.role))
        if self.signal == 0:
            raise InvalidSpec(f"probe {self.id}: signal must be non-zero")
        if abs(self.signal) > self.rest_length:
            raise InvalidSpec(f"probe {self.id}: |signal| exceeds rest length")

    @property
    def mode(self) -> SignalMode:
        return SignalMode.from_sign(self.signal)

    @property
    def actuated_length(self) -> float:
        return self.rest_length + self.signal


@dataclass(frozen=True)
class Port:
    name: str
    probe: str
    direction: str  # "in" or "out"
    muscle: str | None = None

    def __post_init__(self):
        if self.direction not in ("in", "out"):
            raise InvalidSpec(f"port {self.name}: direction must be 'in' or 'out'")


@dataclass(frozen=True)
class Assembly:
    name: str
    slabs: tuple[RigidSlab, ...] = ()
    joints: tuple[Joint, ...] = ()
    muscles: tuple[Muscle, ...] = ()
    probes: tuple[Probe, ...] = ()
    ports: tuple[Port, ...] = ()
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for attr in ("slabs", "joints", "muscles", "probes", "ports"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        self.validate()

    # -- lookup -------------------------------------------------------------
    def slab(self, ident: str) -> RigidSlab:
        return self._slab_index[ident]

    def probe(self, ident: str) -> Probe:
        for p in self.probes:
            if p.id == ident:
                return p
        raise KeyError(ident)

    def muscle(self, ident: str) -> Muscle:
        for m in self.muscles:
            if m.id == ident:
                return m
        raise KeyError(ident)

    def port(self, name: str) -> Port:
        for p in self.ports:
            if p.name == name:
                return p
        raise UnknownPort(f"{self.name} has no port {name!r}")

    @property
    def port_map(self) -> dict[str, Port]:
        return {p.name: p for p in self.ports}

    @property
    def channels(self) -> list[str]:
        return sorted({m.channel for m in self.muscles if m.channel is not None})

    @property
    def _slab_index(self) -> dict[str, RigidSlab]:
        return {s.id: s for s in self.slabs}

    # -- invariants ---------------------------------------------------------
    def validate(self):
        ids = [s.id for s in self.slabs]
        if len(set(ids)) != len(ids):
            raise InvalidSpec("duplicate slab id")
        index = {s.id: s for s in self.slabs}

        def check(ap: AttachmentPoint, owner: str):
            slab = index.get(ap.body)
            if slab is None:
                raise InvalidSpec(f"{owner} references unknown body {ap.body!r}")
            if any(abs(c) > h + 1e-9 for c, h in zip(ap.local, slab.half_extents)):
                raise InvalidSpec(f"{owner}: attachment lies outside body {ap.body!r}")

        for j in self.joints:
            for pair in j.endpoints:
                for ap in pair:
                    check(ap, f"joint {j.id}")
        for group in (self.muscles, self.probes):
            seen = set()
            for item in group:
                if item.id in seen:
                    raise InvalidSpec(f"duplicate id {item.id!r}")
                seen.add(item.id)
                for ap in item.endpoints:
                    check(ap, item.id)
        probe_ids = {p.id for p in self.probes}
        muscle_ids = {m.id for m in self.muscles}
        names = set()
        for port in self.ports:
            if port.name in names:
                raise InvalidSpec(f"duplicate port {port.name!r}")
            names.add(port.name)
            if port.probe not in probe_ids:
                raise InvalidSpec(f"port {port.name} references missing probe {port.probe!r}")
            if port.muscle is not None and port.muscle not in muscle_ids:
                raise InvalidSpec(f"port {port.name} references missing muscle {port.muscle!r}")

    # -- geometry -----------------------------------------------------------
    def world(self, ap: AttachmentPoint) -> np.ndarray:
        return self.slab(ap.body).to_world(ap.local)

    def probe_length(self, ident: str) -> float:
        p = self.probe(ident)
        return float(np.linalg.norm(self.world(p.endpoints[1]) - self.world(p.endpoints[0])))

    def centroid(self) -> np.ndarray:
        return np.mean([s.position for s in self.slabs], axis=0)

    def transformed(self, rot: np.ndarray, shift) -> "Assembly":
        """Apply ``x -> rot @ x + shift`` to every body pose."""
        q = matrix_to_quat(rot)
        slabs = []
        for s in self.slabs:
            pos = rot @ np.asarray(s.position) + np.asarray(shift, dtype=float)
            slabs.append(replace(s, position=_vec3(pos),
                                 orientation=tuple(quat_mul(q, s.orientation))))
        return replace(self, slabs=tuple(slabs))

    def with_poses(self, positions, orientations) -> "Assembly":
        slabs = tuple(replace(s, position=_vec3(p), orientation=tuple(float(c) for c in q))
                      for s, p, q in zip(self.slabs, positions, orientations))
        return replace(self, slabs=slabs)

    def renamed(self, name: str) -> "Assembly":
        return replace(self, name=name)

    # -- serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        def ap(a):
            return {"body": a.body, "local": list(a.local)}

        return {
            "name": self.name,
            "slabs": [{"id": s.id, "half_extents": list(s.half_extents),
                       "position": list(s.position), "orientation": list(s.orientation),
                       "drag": s.drag, "rot_drag": s.rot_drag} for s in self.slabs],
            "joints": [{"id": j.id, "kind": j.kind.value,
                        "endpoints": [[ap(a), ap(b)] for a, b in j.endpoints],
                        "stiffness": j.stiffness, "tolerance": j.tolerance}
                       for j in self.joints],
            "muscles": [{"id": m.id, "endpoints": [ap(a) for a in m.endpoints],
                         "stiffness": m.stiffness, "rest_length": m.rest_length,
                         "actuated_length": m.actuated_length, "mode": m.mode.value,
                         "channel": m.channel} for m in self.muscles],
            "probes": [{"id": p.id, "endpoints": [ap(a) for a in p.endpoints],
                        "rest_length": p.rest_length, "signal": p.signal,
                        "role": p.role.value} for p in self.probes],
            "ports": [{"name": p.name, "probe": p.probe, "direction": p.direction,
                       "muscle": p.muscle} for p in self.ports],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "Assembly":
        def ap(a):
            return AttachmentPoint(a["body"], tuple(a["local"]))

        return cls(
            name=d.get("name", "scene"),
            slabs=[RigidSlab(s["id"], tuple(s["half_extents"]), tuple(s["position"]),
                             tuple(s["orientation"]), s.get("drag", 1.0), s.get("rot_drag", 1.0))
                   for s in d["slabs"]],
            joints=[Joint(j["id"], JointKind(j["kind"]),
                          tuple((ap(a), ap(b)) for a, b in j["endpoints"]),
                          j.get("stiffness", 1.0), j.get("tolerance", 0.0))
                    for j in d["joints"]],
            muscles=[Muscle(m["id"], (ap(m["endpoints"][0]), ap(m["endpoints"][1])),
                            m["rest_length"], m["mode"], m.get("channel"),
                            m.get("stiffness", 1.0), m.get("actuated_length"))
                     for m in d["muscles"]],
            probes=[Probe(p["id"], (ap(p["endpoints"][0]), ap(p["endpoints"][1])),
                          p["rest_length"], p["signal"], ProbeRole(p["role"]))
                    for p in d["probes"]],
            ports=[Port(p["name"], p["probe"], p["direction"], p.get("muscle"))
                   for p in d["ports"]],
        )

    @classmethod
    def from_json(cls, text: str) -> "Assembly":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# incremental construction in world coordinates

class SceneBuilder:
    """Collects bodies and bonds in world coordinates, then freezes an Assembly.

    ``stiffness`` applies to joint bonds; muscles default to k0. Bodies are declared with a pose; attachments are given as world points
    and converted to body-frame coordinates. Half extents are grown at the end
    to cover every attachment.
    """

    def __init__(self, name: str, tolerance: float = 0.0, stiffness: float = 1.0):
        self.name = name
        self.tolerance = float(tolerance)
        self.stiffness = float(stiffness)
        self._bodies: dict[str, dict] = {}
        self.joints: list[Joint] = []
        self.muscles: list[Muscle] = []
        self.probes: list[Probe] = []
        self.ports: list[Port] = []
        self._n_joints = 0

    def body(self, ident: str, center, axis1, axis2=None, nominal=None):
        e1 = np.asarray(axis1, dtype=float)
        e1 = e1 / np.linalg.norm(e1)
        if axis2 is None:
            axis2 = np.cross(e1, [0.0, 0.0, 1.0])
            if np.linalg.norm(axis2) < 1e-9:
                axis2 = [0.0, 1.0, 0.0]
        e2 = np.asarray(axis2, dtype=float)
        e2 = e2 - e1 * (e1 @ e2)
        e2 = e2 / np.linalg.norm(e2)
        e3 = np.cross(e1, e2)
        rot = np.column_stack([e1, e2, e3])
        if nominal is None:
            nominal = (1e-3, SLAB_HALF_WIDTH, SLAB_HALF_THICKNESS)
        self._bodies[ident] = {"center": np.asarray(center, dtype=float), "rot": rot,
                               "ext": np.array(nominal, dtype=float)}
        return ident

    def slab_between(self, ident: str, p, q, width_axis):
        """Straight slab whose long axis runs from ``p`` to ``q``."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        half = 0.5 * np.linalg.norm(q - p)
        return self.body(ident, 0.5 * (p + q), q - p, width_axis,
                         nominal=(half, SLAB_HALF_WIDTH, SLAB_HALF_THICKNESS))

    def attach(self, body: str, world) -> AttachmentPoint:
        b = self._bodies[body]
        local = b["rot"].T @ (np.asarray(world, dtype=float) - b["center"])
        b["ext"] = np.maximum(b["ext"], np.abs(local))
        return AttachmentPoint(body, _vec3(local))

    def _joint_id(self, label):
        self._n_joints += 1
        return label or f"j{self._n_joints}"

    def hinge(self, bodies, point, axis, label=None, half_span=SLAB_HALF_WIDTH,
              tolerance=None):
        """Pin joint: the first body is the hub, every other body gets two bonds."""
        tol = self.tolerance if tolerance is None else tolerance
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        point = np.asarray(point, dtype=float)
        ends = []
        hub = bodies[0]
        for other in bodies[1:]:
            for s in (-1.0, 1.0):
                w = point + s * half_span * axis
                ends.append((self.attach(hub, w), self.attach(other, w)))
        j = Joint(self._joint_id(label), JointKind.make(True, tol), tuple(ends),
                  self.stiffness, tol)
        self.joints.append(j)
        return j

    def universal(self, a: str, b: str, point, label=None, tolerance=None):
        tol = self.tolerance if tolerance is None else tolerance
        j = Joint(self._joint_id(label), JointKind.make(False, tol),
                  ((self.attach(a, point), self.attach(b, point)),), self.stiffness, tol)
        self.joints.append(j)
        return j

    def muscle(self, ident, a, pa, b, pb, rest, mode, channel, stiffness=1.0):
        m = Muscle(ident, (self.attach(a, pa), self.attach(b, pb)), float(rest),
                   SignalMode.parse(mode), channel, float(stiffness))
        self.muscles.append(m)
        return m

    def probe(self, ident, a, pa, b, pb, rest, signal, role):
        p = Probe(ident, (self.attach(a, pa), self.attach(b, pb)), float(rest),
                  float(signal), role)
        self.probes.append(p)
        return p

    def port(self, name, probe, direction, muscle=None):
        self.ports.append(Port(name, probe, direction, muscle))

    def build(self, **meta) -> Assembly:
        slabs = []
        for ident, b in self._bodies.items():
            ext = b["ext"] + 1e-9
            slabs.append(RigidSlab(ident, _vec3(ext), _vec3(b["center"]),
                                   matrix_to_quat(b["rot"])))
        # attachment coordinates were taken against the exact rotation matrix;
        # re-express them against the stored quaternion so round-off stays < 1e-15
        fixed = {s.id: s for s in slabs}

        def refresh(ap: AttachmentPoint) -> AttachmentPoint:
            b = self._bodies[ap.body]
            world = b["center"] + b["rot"] @ np.asarray(ap.local)
            return AttachmentPoint(ap.body, _vec3(fixed[ap.body].to_local(world)))

        joints = [replace(j, endpoints=tuple((refresh(a), refresh(c)) for a, c in j.endpoints))
                  for j in self.joints]
        muscles = [replace(m, endpoints=(refresh(m.endpoints[0]), refresh(m.endpoints[1])))
                   for m in self.muscles]
        probes = [replace(p, endpoints=(refresh(p.endpoints[0]), refresh(p.endpoints[1])))
                  for p in self.probes]
        return Assembly(self.name, tuple(slabs), tuple(joints), tuple(muscles),
                        tuple(probes), tuple(self.ports), dict(meta))


def iter_bonds(assembly: Assembly) -> Iterable[tuple[AttachmentPoint, AttachmentPoint, float, float]]:
    """Yield ``(a, b, stiffness, tolerance)`` for every joint bond."""
    for j in assembly.joints:
        for a, b in j.endpoints:
            yield a, b, j.stiffness, j.tolerance
