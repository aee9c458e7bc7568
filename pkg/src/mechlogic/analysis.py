"""State classification, truth tables, response and attenuation statistics."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .dynamics import ActuationSchedule, SimParams, Square, run
from .dynamics.trajectory import Trajectory
from .errors import InvalidSpec, NoCycles, Unsettled
from .model import Assembly, Probe
from .model.circuits import build_attenuation_circuit, build_relay_circuit
from .model.tetris import DEFAULT_DOF_TABLE, TETRIS_UNITS, build_tetris_robot, dof_targets

WINDOW = 0.2  # trailing fraction of a settle run that is averaged
PAPER_FREQS = (5.0, 0.5, 0.05)
DEFAULT_TOLERANCES = (0.0, 0.02, 0.05)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def worker_count(jobs: int) -> int:
    """Threads for ``jobs`` independent runs, capped by ``MLC_THREADS``."""
    cap = os.environ.get("MLC_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(jobs, limit))


def map_trials(fn: Callable, items: Sequence) -> list:
    """Apply ``fn`` to every item on worker threads; results keep item order."""
    n = worker_count(len(items))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _tail(values: np.ndarray, window: float = WINDOW) -> np.ndarray:
    n = len(values)
    start = min(n - 1, int(math.floor((1.0 - window) * n)))
    return values[start:]


# ---------------------------------------------------------------------------
# binary states

@dataclass(frozen=True)
class StateReading:
    probe: str
    length: float
    state: int
    margin: float


def classify_state(length: float, probe: Probe) -> StateReading:
    """Midpoint threshold between rest and rest + signal."""
    if probe.signal == 0:
        raise InvalidSpec("probe signal must be non-zero")
    threshold = probe.rest_length + 0.5 * probe.signal
    if probe.signal > 0:
        state = int(length >= threshold)
    else:
        state = int(length <= threshold)
    return StateReading(probe.id, float(length), state, abs(float(length) - threshold))


# ---------------------------------------------------------------------------
# truth tables

@dataclass(frozen=True)
class TruthRow:
    inputs: tuple[int, ...]
    state: int
    margin: float
    lengths: tuple[float, ...]  # settled output length per trial


@dataclass(frozen=True)
class TruthTable:
    channels: tuple[str, ...]
    probe: str
    rows: tuple[TruthRow, ...]

    def mapping(self) -> dict[tuple[int, ...], int]:
        return {r.inputs: r.state for r in self.rows}

    @property
    def min_margin(self) -> float:
        return min(r.margin for r in self.rows)

    def to_csv(self) -> str:
        return _csv([*self.channels, "out", "margin", "trials"],
                    [[*r.inputs, r.state, repr(r.margin), len(r.lengths)] for r in self.rows])

    def to_dict(self) -> dict:
        return {"channels": list(self.channels), "probe": self.probe,
                "rows": [{"inputs": list(r.inputs), "out": r.state, "margin": r.margin,
                          "lengths": list(r.lengths)} for r in self.rows]}


def _output_probe(assembly: Assembly, probe: str | None) -> Probe:
    if probe is not None:
        return assembly.probe(probe)
    outs = [p for p in assembly.ports if p.direction == "out"]
    if len(outs) != 1:
        raise InvalidSpec("assembly needs exactly one output port, or name the probe")
    return assembly.probe(outs[0].probe)


def settled_length(trajectory: Trajectory, probe: str, window: float = WINDOW) -> float:
    """Mean probe length over the trailing ``window`` of the run."""
    return float(np.mean(_tail(trajectory.probe(probe), window)))


def truth_table(assembly: Assembly, channels: Sequence[str] | None = None, *,
                settle: float = 20.0, trials: int = 5, params: SimParams | None = None,
                probe: str | None = None) -> TruthTable:
    """Simulated truth table of ``assembly`` over its input channels.

    Every input combination is held constant for ``settle`` t0 in each of
    ``trials`` runs with seeds ``params.seed + trial``. The settled output is
    the mean over the final 20% of samples.

    Raises
    ------
    Unsettled
        If trials disagree on the output state of some row.
    """
    if trials < 1:
        raise InvalidSpec("trials must be >= 1")
    params = params or SimParams()
    channels = tuple(channels if channels is not None else assembly.channels)
    out = _output_probe(assembly, probe)
    combos = list(itertools.product((0, 1), repeat=len(channels)))
    jobs = [(c, t) for c in combos for t in range(trials)]

    def one(job):
        combo, trial = job
        sched = ActuationSchedule.constant(**dict(zip(channels, combo)))
        tr = run(assembly, replace(params, seed=params.seed + trial), sched, settle)
        return settled_length(tr, out.id)

    lengths = map_trials(one, jobs)
    rows = []
    for i, combo in enumerate(combos):
        ls = lengths[i * trials:(i + 1) * trials]
        readings = [classify_state(x, out) for x in ls]
        states = {r.state for r in readings}
        if len(states) != 1:
            raise Unsettled(f"inputs {combo}: trials disagree on the output state "
                            f"(lengths {', '.join(f'{x:.3f}' for x in ls)})")
        rows.append(TruthRow(combo, states.pop(), min(r.margin for r in readings), tuple(ls)))
    return TruthTable(channels, out.id, tuple(rows))


# ---------------------------------------------------------------------------
# frequency response

def rmsd_from_lengths(lengths, ideal, rest: float, actuated: float) -> float:
    """RMSD between lengths mapped affinely (rest -> 0, actuated -> 1) and ``ideal``."""
    lengths = np.asarray(lengths, dtype=float)
    ideal = np.asarray(ideal, dtype=float)
    if lengths.shape != ideal.shape or lengths.size == 0:
        raise InvalidSpec("lengths and ideal trace must be non-empty and equally long")
    if rest == actuated:
        raise InvalidSpec("rest and actuated lengths must differ")
    x = (lengths - rest) / (actuated - rest)
    return float(np.sqrt(np.mean((x - ideal) ** 2)))


def rmsd_response(trajectory: Trajectory, channel: str, probe: str | None = None) -> float:
    """Root-mean-square deviation of the normalized output from the ideal trace.

    For a square-wave channel only whole periods are scored; the final sample
    at the end of the last whole period is excluded.

    Raises
    ------
    NoCycles
        If the run is shorter than one period.
    """
    probe = probe or trajectory.output_probe
    if probe is None:
        raise InvalidSpec("trajectory has no unique output probe; name one")
    rest, signal = trajectory.probe_meta[probe]
    t = trajectory.times
    mask = np.ones(len(t), dtype=bool)
    wave = trajectory.schedule.get(channel)
    if wave is not None and wave.get("type") == "square":
        period = float(wave["period"])
        n_cycles = math.floor(t[-1] / period + 1e-9)
        if n_cycles < 1:
            raise NoCycles(f"run of {t[-1]:g} t0 is shorter than one period ({period:g} t0)")
        mask = t < n_cycles * period - 1e-12
    return rmsd_from_lengths(trajectory.probe(probe)[mask], trajectory.ideal(channel)[mask],
                             rest, rest + signal)


@dataclass(frozen=True)
class ResponsePoint:
    frequency: float
    period: float
    duration: float
    rmsd: float


def frequency_response(units: int = 5, freqs: Sequence[float] = PAPER_FREQS, *,
                       cycles: int = 2, min_duration: float = 2.0,
                       params: SimParams | None = None, tolerance: float = 0.0,
                       assembly: Assembly | None = None) -> list[ResponsePoint]:
    """RMSD of the relay circuit under square-wave actuation of both channels.

    Each frequency (in 1/t0) runs for ``cycles`` periods, extended to whole
    periods covering at least ``min_duration`` t0.
    """
    params = params or SimParams()
    circuit = assembly or build_relay_circuit(units, tolerance=tolerance)

    def one(f):
        if not f > 0:
            raise InvalidSpec("frequencies must be positive")
        period = 1.0 / f
        n = max(int(cycles), math.ceil(min_duration / period - 1e-9))
        wave = Square(period)
        sched = ActuationSchedule({ch: wave for ch in circuit.channels})
        tr = run(circuit, params, sched, n * period)
        return ResponsePoint(float(f), period, n * period, rmsd_response(tr, circuit.channels[0]))

    return map_trials(one, list(freqs))


def response_to_csv(points: Sequence[ResponsePoint]) -> str:
    return _csv(["frequency", "period", "duration", "rmsd"],
                [[repr(p.frequency), repr(p.period), repr(p.duration), repr(p.rmsd)]
                 for p in points])


# ---------------------------------------------------------------------------
# attenuation

@dataclass(frozen=True)
class AttenuationStats:
    """Stage statistics of one experiment.

    ``mean``/``variance``/``count`` pool every sample of every trial;
    ``trial_means`` and ``trial_variances`` (trials x units) feed the
    confidence tests.
    """

    units: int
    tolerance: float
    mean: tuple[float, ...]
    variance: tuple[float, ...]
    count: tuple[int, ...]
    trial_means: np.ndarray = field(repr=False)
    trial_variances: np.ndarray = field(repr=False)

    def to_rows(self):
        return [[self.units, k + 1, repr(self.tolerance), repr(self.mean[k]),
                 repr(self.variance[k]), self.count[k]] for k in range(self.units)]

    def to_csv(self) -> str:
        return attenuation_to_csv([self])

    def to_dict(self) -> dict:
        return {"units": self.units, "tolerance": self.tolerance, "mean": list(self.mean),
                "variance": list(self.variance), "count": list(self.count)}


def attenuation_to_csv(experiments: Sequence[AttenuationStats]) -> str:
    return _csv(["units", "unit", "tolerance", "mean", "variance", "count"],
                [row for e in experiments for row in e.to_rows()])


def signal_attenuation(units: int = 5, tolerance: float = 0.0, trials: int = 20, *,
                       params: SimParams | None = None, settle: float = 20.0,
                       sample: float = 5.0) -> AttenuationStats:
    """Stage lengths of an actuated AND gate feeding a connector.

    Each trial (seed ``params.seed + trial``) settles for ``settle`` t0 with
    both inputs expanded and then records every stage for ``sample`` t0.
    """
    if trials < 2:
        raise InvalidSpec("trials must be >= 2")
    params = params or SimParams()
    circuit = build_attenuation_circuit(units, tolerance=tolerance)
    stages = [f"c.stage{k}" for k in range(1, int(units) + 1)]
    sched = ActuationSchedule.constant(a=1, b=1)

    def one(trial):
        p = replace(params, seed=params.seed + trial)
        tr = run(circuit, p, sched, settle + sample)
        keep = tr.times > settle + 1e-12
        return np.stack([tr.probe(s)[keep] for s in stages], axis=1)

    samples = map_trials(one, list(range(trials)))
    pooled = np.concatenate(samples, axis=0)
    ddof = 1 if pooled.shape[0] > 1 else 0
    return AttenuationStats(
        int(units), float(tolerance),
        tuple(float(x) for x in pooled.mean(axis=0)),
        tuple(float(x) for x in pooled.var(axis=0, ddof=ddof)),
        tuple(int(pooled.shape[0]) for _ in stages),
        np.array([s.mean(axis=0) for s in samples]),
        np.array([s.var(axis=0, ddof=1 if s.shape[0] > 1 else 0) for s in samples]))


def _no_significant_rise(per_trial: np.ndarray, confidence: float) -> bool:
    """True unless some consecutive pair rises significantly (paired one-sided t-test)."""
    for k in range(per_trial.shape[1] - 1):
        d = per_trial[:, k + 1] - per_trial[:, k]
        if np.allclose(d, 0.0, atol=1e-15):
            continue
        res = stats.ttest_1samp(d, 0.0, alternative="greater")
        if res.pvalue < 1.0 - confidence:
            return False
    return True


def means_non_increasing(s: AttenuationStats, confidence: float = 0.95) -> bool:
    return _no_significant_rise(s.trial_means, confidence)


def variances_non_decreasing(s: AttenuationStats, confidence: float = 0.95) -> bool:
    return _no_significant_rise(-s.trial_variances, confidence)


def first_exceeds_last(s: AttenuationStats, confidence: float = 0.95) -> bool:
    """Mean at unit 1 is significantly above the mean at the last unit."""
    d = s.trial_means[:, 0] - s.trial_means[:, -1]
    return bool(stats.ttest_1samp(d, 0.0, alternative="greater").pvalue < 1.0 - confidence)


# ---------------------------------------------------------------------------
# tetris

STRAIGHT = "I"


def classify_tetris(bits: Sequence[int]) -> str:
    """Canonical label of a skeleton DOF pattern.

    Each unit contributes one character: ``u`` (up DOF only), ``d`` (down
    DOF only), ``x`` (both) or ``-`` (neither). An unbent chain is ``"I"``.
    """
    bits = [int(b) for b in bits]
    if len(bits) % 2 or any(b not in (0, 1) for b in bits):
        raise InvalidSpec("expected an even number of 0/1 DOF states")
    code = {(0, 0): "-", (1, 0): "u", (0, 1): "d", (1, 1): "x"}
    sig = "".join(code[(bits[2 * k], bits[2 * k + 1])] for k in range(len(bits) // 2))
    return STRAIGHT if set(sig) == {"-"} else sig


@dataclass(frozen=True)
class TetrisRow:
    inputs: tuple[int, int]
    seed: int
    bits: tuple[int, ...]
    label: str
    expected: str
    margin: float


def tetris_run(inputs: tuple[int, int], *, duration: float = 200.0,
               params: SimParams | None = None, assembly: Assembly | None = None,
               table: Mapping[str, str] | None = None) -> TetrisRow:
    """Fold the robot for one ``(y, b)`` input and classify the settled skeleton."""
    params = params or SimParams()
    table = dict(DEFAULT_DOF_TABLE if table is None else table)
    robot = assembly or build_tetris_robot(table)
    y, b = (int(v) for v in inputs)
    tr = run(robot, params, ActuationSchedule.constant(y=y, b=b), duration)
    readings = [classify_state(settled_length(tr, f"skeleton.dof{k}"),
                               robot.probe(f"skeleton.dof{k}"))
                for k in range(1, 2 * TETRIS_UNITS + 1)]
    bits = tuple(r.state for r in readings)
    return TetrisRow((y, b), params.seed, bits, classify_tetris(bits),
                     classify_tetris(dof_targets(table, y, b)), min(r.margin for r in readings))


def tetris_table(*, seeds: Sequence[int] = (0,), duration: float = 200.0,
                 params: SimParams | None = None,
                 table: Mapping[str, str] | None = None) -> list[TetrisRow]:
    params = params or SimParams()
    robot = build_tetris_robot(table)
    jobs = [(inp, s) for inp in itertools.product((0, 1), repeat=2) for s in seeds]
    return map_trials(lambda job: tetris_run(job[0], duration=duration,
                                             params=replace(params, seed=job[1]),
                                             assembly=robot, table=table), jobs)


def tetris_to_csv(rows: Sequence[TetrisRow]) -> str:
    return _csv(["y", "b", "seed", "dofs", "label", "expected", "margin"],
                [[*r.inputs, r.seed, "".join(map(str, r.bits)), r.label, r.expected,
                  repr(r.margin)] for r in rows])


# ---------------------------------------------------------------------------
# thermal-to-binding energy ratio at three length scales

KBT_PN_NM = 4.1


@dataclass(frozen=True)
class ScaleEstimate:
    scale: str
    binding_energy_pn_nm: float
    ratio: float
    log10_order: int


def scale_estimates() -> list[ScaleEstimate]:
    """Order of magnitude of kBT / kσ² for DNA and metal hinges."""
    # 10 nm: ~10 DNA bonds, each broken by 15 pN over ~1 nm
    e_10nm = 10 * 15.0
    # 1 µm: ~1e3 DNA bonds of ~6 kBT each
    e_1um = 1e3 * 6.0 * KBT_PN_NM
    # 100 µm: 1 GPa over (100 µm)² pulled 1 µm, converted from J to pN·nm
    e_100um = 1e9 * (100e-6) ** 2 * 1e-6 * 1e21
    out = []
    for scale, e in (("10nm", e_10nm), ("1um", e_1um), ("100um", e_100um)):
        ratio = KBT_PN_NM / e
        out.append(ScaleEstimate(scale, e, ratio, int(math.floor(math.log10(ratio)))))
    return out


def estimates_to_csv(rows: Sequence[ScaleEstimate]) -> str:
    return _csv(["scale", "binding_energy_pn_nm", "kbt_over_ksigma2", "log10_order"],
                [[r.scale, repr(r.binding_energy_pn_nm), repr(r.ratio), r.log10_order]
                 for r in rows])


def to_json(obj) -> str:
    """JSON summary of analysis results (dataclasses, lists of them, or dicts)."""
    def conv(o):
        if hasattr(o, "to_dict"):
            return o.to_dict()
        if isinstance(o, (list, tuple)):
            return [conv(x) for x in o]
        if isinstance(o, np.ndarray):
            return o.tolist()
        if hasattr(o, "__dataclass_fields__"):
            return {k: conv(v) for k, v in asdict(o).items()}
        return o
    return json.dumps(conv(obj), indent=2, sort_keys=True)


__all__ = [
    "StateReading", "classify_state", "TruthRow", "TruthTable", "truth_table",
    "settled_length", "rmsd_from_lengths", "rmsd_response", "ResponsePoint",
    "frequency_response", "response_to_csv", "AttenuationStats", "signal_attenuation",
    "attenuation_to_csv",
    "means_non_increasing", "variances_non_decreasing", "first_exceeds_last",
    "classify_tetris", "TetrisRow", "tetris_run", "tetris_table", "tetris_to_csv",
    "ScaleEstimate", "scale_estimates", "estimates_to_csv", "to_json", "worker_count",
    "map_trials", "PAPER_FREQS", "DEFAULT_TOLERANCES",
]
