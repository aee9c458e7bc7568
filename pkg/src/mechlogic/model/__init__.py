"""Rigid-slab assemblies and the builders that produce them."""

from .assembly import (Assembly, AttachmentPoint, Joint, JointKind, Muscle, Port, Probe,
                       ProbeRole, RigidSlab, SignalMode)
from .builders import (GateKind, adaptor_spec, add_drive, add_struts, build_connector, build_gate,
                       build_lever, build_skeleton, default_core, gate_lever_specs, lever_pose)
from .circuits import build_attenuation_circuit, build_relay_circuit
from .compose import check_wire, compose
from .tetris import DEFAULT_DOF_TABLE, build_tetris_robot, dof_targets

__all__ = [
    "Assembly", "AttachmentPoint", "Joint", "JointKind", "Muscle", "Port", "Probe",
    "ProbeRole", "RigidSlab", "SignalMode", "GateKind", "adaptor_spec", "add_drive", "add_struts",
    "build_connector", "build_gate", "build_lever", "build_skeleton", "default_core",
    "gate_lever_specs", "lever_pose", "check_wire", "compose", "DEFAULT_DOF_TABLE",
    "build_tetris_robot", "dof_targets", "build_attenuation_circuit", "build_relay_circuit",
]
