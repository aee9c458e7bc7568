"""
Frequency response of a gate-connector-gate relay
=================================================

Two AND gates joined by a five-unit connector are driven with square waves
of decreasing frequency. Slow driving lets the output follow the ideal
trace more closely, so the RMSD falls with the frequency.
"""

from mechlogic.analysis import PAPER_FREQS, frequency_response
from mechlogic.dynamics import SimParams
from mechlogic.model import build_relay_circuit

relay = build_relay_circuit(5)
print(f"relay circuit: {len(relay.slabs)} slabs, channels {relay.channels}")

# two periods per frequency; the slowest one takes about 40 t0
points = frequency_response(5, PAPER_FREQS, cycles=2, params=SimParams(seed=0))
for p in points:
    print(f"f = {p.frequency:5.2f} / t0   period {p.period:5.1f} t0   RMSD {p.rmsd:.3f}")
