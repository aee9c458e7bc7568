"""
Signal transmission along a connector
=====================================

An actuated AND gate drives a connector. With rigid joints every stage
carries the full signal; joint slack lets it sag along the chain, while
thermal noise spreads it.
"""

from mechlogic.analysis import (first_exceeds_last, means_non_increasing, signal_attenuation,
                                variances_non_decreasing)
from mechlogic.dynamics import SimParams

# few trials keep this quick; the acceptance run uses 20
for tol in (0.0, 0.05):
    s = signal_attenuation(5, tol, trials=4, params=SimParams(kbt=1e-5), settle=20.0,
                           sample=2.0)
    print(f"\ntolerance {tol} sigma")
    for k, (m, v) in enumerate(zip(s.mean, s.variance), start=1):
        print(f"  stage {k}: mean {m:.4f} sigma, variance {v:.2e}")
    print("  means non-increasing:", means_non_increasing(s),
          " first above last:", first_exceeds_last(s),
          " variances non-decreasing:", variances_non_decreasing(s))
