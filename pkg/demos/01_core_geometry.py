"""
Logic-core and lever geometry
=============================

Solve the four-link logic core for the default design point, tabulate the
apex rise over a small design grid and size the levers of a NAND gate.
"""

import numpy as np

from mechlogic.geometry import CoreSpec, solve_core, solve_lever, sweep_core
from mechlogic.model import GateKind, SignalMode, gate_lever_specs

# the default core: muscles expand by half a rest length, apex at 2 sigma
core = solve_core(CoreSpec(delta_in_frac=0.5, h_frac=2.0))
print(f"delta_out / sigma = {core.delta_out_frac:.4f}")
print(f"largest residual  = {np.abs(core.residuals()).max():.1e}")

# a coarse design table; taller cores amplify less
deltas = np.round(np.arange(0.1, 0.81, 0.1), 2)
rows = sweep_core(deltas, [1.5, 2.0, 2.5])
print("\ndelta_in  " + "  ".join(f"h={h:<4}" for h in (1.5, 2.0, 2.5)))
for d in deltas:
    cells = [r for r in rows if r.delta_in_frac == d]
    print(f"{d:8.2f}  " + "  ".join(f"{r.delta_out_frac:6.3f}" for r in cells))

# NAND with contracting muscles: open input levers, crossed output lever
for spec in gate_lever_specs(GateKind.NAND, SignalMode.CONTRACT, SignalMode.CONTRACT, core):
    g = solve_lever(spec, convention="halved")
    print(f"\n{spec.hinge.value:8s} lever: l1={g.l1:.3f} l2={g.l2:.3f} "
          f"theta1={np.degrees(g.theta1):.1f} deg dtheta={np.degrees(g.dtheta):.1f} deg")
