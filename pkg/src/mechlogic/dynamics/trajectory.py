"""Recorded simulation output and its CSV / JSON-lines export."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass
class Trajectory:
    """Time-sampled probe lengths of one run.

    Attributes
    ----------
    times : ndarray, shape (n,)
        Sample times in t0, strictly increasing.
    probe_lengths : ndarray, shape (n, n_probes)
    schedule_trace : ndarray, shape (n, n_channels)
        Ideal 0/1 state of each channel at each sample.
    body_positions, body_orientations : ndarray or None
        Optional full states, shapes (n, n_bodies, 3) and (n, n_bodies, 4).
    """

    times: np.ndarray
    probe_ids: list
    probe_lengths: np.ndarray
    channels: list
    schedule_trace: np.ndarray
    body_ids: list = field(default_factory=list)
    body_positions: np.ndarray | None = None
    body_orientations: np.ndarray | None = None
    final_state: Any = None
    probe_meta: dict = field(default_factory=dict)
    output_probe: str | None = None
    schedule: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.times)
        if self.probe_lengths.shape[0] != n or self.schedule_trace.shape[0] != n:
            raise ValueError("row counts differ")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def probe(self, ident: str) -> np.ndarray:
        return self.probe_lengths[:, self.probe_ids.index(ident)]

    def ideal(self, channel: str) -> np.ndarray:
        return self.schedule_trace[:, self.channels.index(channel)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *self.probe_ids, *(f"{c}_ideal" for c in self.channels)])
        for k in range(len(self.times)):
            w.writerow([repr(float(self.times[k])),
                        *(repr(float(x)) for x in self.probe_lengths[k]),
                        *(int(s) for s in self.schedule_trace[k])])
        return buf.getvalue()

    def to_jsonl(self) -> str:
        """One JSON object per sample; includes body states when recorded."""
        lines = []
        for k in range(len(self.times)):
            row = {"t": float(self.times[k]),
                   "probes": dict(zip(self.probe_ids, map(float, self.probe_lengths[k]))),
                   "ideal": dict(zip(self.channels, map(int, self.schedule_trace[k])))}
            if self.body_positions is not None:
                row["bodies"] = {
                    b: {"position": self.body_positions[k, i].tolist(),
                        "orientation": self.body_orientations[k, i].tolist()}
                    for i, b in enumerate(self.body_ids)}
            lines.append(json.dumps(row))
        return "\n".join(lines) + ("\n" if lines else "")
