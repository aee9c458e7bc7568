"""
Folding a skeleton with two muscles
===================================

Two muscle channels, an AND gate and an OR gate drive four of the eight
degrees of freedom of a four-unit skeleton. Each input pair folds the chain
into a different shape.
"""

import itertools

from mechlogic.analysis import classify_tetris, tetris_run
from mechlogic.dynamics import SimParams
from mechlogic.model import DEFAULT_DOF_TABLE, build_tetris_robot, dof_targets

print("DOF table:", DEFAULT_DOF_TABLE)
robot = build_tetris_robot()
print(f"robot: {len(robot.slabs)} slabs, {len(robot.joints)} joints")

# the chain settles well within 40 t0; the acceptance run uses 200 t0
for y, b in itertools.product((0, 1), repeat=2):
    expected = classify_tetris(dof_targets(DEFAULT_DOF_TABLE, y, b))
    row = tetris_run((y, b), duration=40.0, params=SimParams(seed=0), assembly=robot)
    print(f"(y, b) = ({y}, {b}): DOFs {''.join(map(str, row.bits))} -> {row.label:5s} "
          f"(target {expected}, margin {row.margin:.3f})")
