"""Prebuilt multi-part circuits."""

from __future__ import annotations

from dataclasses import replace

from .assembly import Assembly, SignalMode
from .builders import GateKind, build_connector, build_gate
from .compose import compose


def build_relay_circuit(units: int = 5, *, core=None, tolerance: float = 0.0,
                        name: str = "relay") -> Assembly:
    """Two AND gates joined by a connector of ``units`` units.

    Gate ``g1`` reads channels ``b`` and ``y``; its output travels through
    connector ``c`` into ``g2.in1``. ``g2.in2`` is driven by channel ``y``,
    so expanding both channels together raises ``g2.out``.
    """
    g1 = build_gate(GateKind.AND, SignalMode.EXPAND, SignalMode.EXPAND, core, name="g1",
                    channels=("b", "y"), tolerance=tolerance)
    g2 = build_gate(GateKind.AND, SignalMode.EXPAND, SignalMode.EXPAND, core, name="g2",
                    channels=("x", "y"), tolerance=tolerance)
    c = build_connector(units, tolerance, name="c")
    out = compose([g1, c, g2], [("g1.out", "c.in"), ("c.out", "g2.in1")], name=name,
                  tolerance=tolerance)
    return replace(out, meta=dict(out.meta, kind="relay", units=int(units)))


def build_attenuation_circuit(units: int, *, core=None, tolerance: float = 0.0,
                              name: str = "attenuation") -> Assembly:
    """AND gate on channels ``a``/``b`` feeding a connector of ``units`` units."""
    g = build_gate(GateKind.AND, SignalMode.EXPAND, SignalMode.EXPAND, core, name="g",
                   channels=("a", "b"), tolerance=tolerance)
    c = build_connector(units, tolerance, name="c")
    out = compose([g, c], [("g.out", "c.in")], name=name, tolerance=tolerance)
    return replace(out, meta=dict(out.meta, kind="attenuation", units=int(units)))
