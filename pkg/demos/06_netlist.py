"""
Describing circuits in a netlist
================================

Parse the shipped relay circuit, print it in canonical form, elaborate it
into an assembly and run it briefly with its own schedule.
"""

import pathlib

from mechlogic.dynamics import SimParams, run
from mechlogic.netlist import elaborate, load, pretty

here = pathlib.Path(__file__).resolve().parent.parent
spec = load(here / "circuits" / "relay.mlc")
print(pretty(spec))

assembly, schedule = elaborate(spec)
print(f"{len(assembly.slabs)} slabs, ports {[p.name for p in assembly.ports]}")
print("schedule:", schedule.to_dict())

traj = run(assembly, SimParams(seed=0, record_every=4000), schedule, 2.0)
print(traj.to_csv().splitlines()[0])
print(f"{len(traj)} samples, output probe {traj.output_probe}")
