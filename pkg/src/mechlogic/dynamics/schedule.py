"""Piecewise-constant actuation schedules, times in units of t0."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Union

from ..errors import InvalidSpec


@dataclass(frozen=True)
class Constant:
    state: int = 0

    def __post_init__(self):
        if self.state not in (0, 1):
            raise InvalidSpec("state must be 0 or 1")

    def at(self, t: float) -> int:
        return self.state

    def edges(self, t_end: float) -> list[float]:
        return []

    def to_dict(self) -> dict:
        return {"type": "const", "state": self.state}


@dataclass(frozen=True)
class Square:
    """Square wave: state 1 during the first ``duty`` fraction of each period."""

    period: float
    duty: float = 0.5
    phase: float = 0.0

    def __post_init__(self):
        if not (self.period > 0 and math.isfinite(self.period)):
            raise InvalidSpec("period must be positive")
        if not 0 < self.duty < 1:
            raise InvalidSpec("duty must lie in (0, 1)")

    def at(self, t: float) -> int:
        frac = (t / self.period + self.phase) % 1.0
        return int(frac < self.duty)

    def edges(self, t_end: float) -> list[float]:
        out = []
        n = math.floor(self.phase) - 1
        while True:
            rise = (n - self.phase) * self.period
            fall = (n + self.duty - self.phase) * self.period
            if rise > t_end:
                break
            out.extend(e for e in (rise, fall) if 0 < e <= t_end)
            n += 1
        return sorted(out)

    def to_dict(self) -> dict:
        return {"type": "square", "period": self.period, "duty": self.duty, "phase": self.phase}


@dataclass(frozen=True)
class Step:
    """Piecewise-constant trace; state 0 before the first listed time."""

    points: tuple[tuple[float, int], ...]

    def __post_init__(self):
        pts = tuple((float(t), int(s)) for t, s in self.points)
        if not pts:
            raise InvalidSpec("step waveform needs at least one point")
        times = [t for t, _ in pts]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidSpec("step times must be strictly increasing")
        if any(s not in (0, 1) for _, s in pts):
            raise InvalidSpec("states must be 0 or 1")
        object.__setattr__(self, "points", pts)

    def at(self, t: float) -> int:
        state = 0
        for time, s in self.points:
            if t >= time:
                state = s
            else:
                break
        return state

    def edges(self, t_end: float) -> list[float]:
        return [t for t, _ in self.points if 0 < t <= t_end]

    def to_dict(self) -> dict:
        return {"type": "step", "points": [list(p) for p in self.points]}


Waveform = Union[Constant, Square, Step]


def waveform_from_dict(d: Mapping) -> Waveform:
    kind = d["type"]
    if kind == "const":
        return Constant(int(d["state"]))
    if kind == "square":
        return Square(float(d["period"]), float(d.get("duty", 0.5)), float(d.get("phase", 0.0)))
    if kind == "step":
        return Step(tuple((float(t), int(s)) for t, s in d["points"]))
    raise InvalidSpec(f"unknown waveform type {kind!r}")


@dataclass(frozen=True)
class ActuationSchedule:
    """Waveform per channel; channels without an entry stay at state 0."""

    waveforms: Mapping[str, Waveform] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "waveforms", dict(sorted(dict(self.waveforms).items())))

    @classmethod
    def constant(cls, **states: int) -> "ActuationSchedule":
        return cls({ch: Constant(int(s)) for ch, s in states.items()})

    @classmethod
    def from_states(cls, states: Mapping[str, int]) -> "ActuationSchedule":
        return cls({ch: Constant(int(s)) for ch, s in states.items()})

    @property
    def channels(self) -> list[str]:
        return list(self.waveforms)

    def state(self, channel: str, t: float) -> int:
        w = self.waveforms.get(channel)
        return 0 if w is None else w.at(t)

    def states(self, t: float) -> dict[str, int]:
        return {ch: w.at(t) for ch, w in self.waveforms.items()}

    def edges(self, t_end: float) -> list[float]:
        return sorted({e for w in self.waveforms.values() for e in w.edges(t_end)})

    def to_dict(self) -> dict:
        return {ch: w.to_dict() for ch, w in self.waveforms.items()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ActuationSchedule":
        return cls({ch: waveform_from_dict(w) for ch, w in d.items()})
