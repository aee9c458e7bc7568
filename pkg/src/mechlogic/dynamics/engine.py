"""Overdamped Brownian dynamics of rigid-slab assemblies.

Units: lengths in σ, energies in k0 σ², times inside the integrator in γ/k0.
Public durations and schedule times are in t0 = 1000 γ/k0.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..errors import InvalidSpec, NumericalBlowup
from ..model.assembly import Assembly
from . import kernel
from .schedule import ActuationSchedule
from .trajectory import Trajectory

T0 = 1000.0
NOISE_BLOCK = 2048
WCA_RANGE = 2.0 ** (1.0 / 6.0)


@dataclass(frozen=True)
class SimParams:
    """Integrator settings.

    Parameters
    ----------
    dt : float
        Time step in γ/k0; must satisfy ``0 < dt < 1``.
    kbt : float
        Thermal energy in k0 σ².
    eps_wca, r0 : float
        Strength and core radius of the center-center repulsion, which acts
        between body centers closer than ``2**(1/6) * 2 * r0``.
    record_every : int
        Steps between recorded samples.
    """

    dt: float = 0.05
    kbt: float = 1e-5
    eps_wca: float = 1e-4
    r0: float = 0.1
    seed: int = 0
    record_every: int = 200

    def __post_init__(self):
        if not (0 < self.dt < 1) or not math.isfinite(self.dt):
            raise InvalidSpec("dt must satisfy 0 < dt·k0/γ < 1")
        if not (self.kbt >= 0) or not math.isfinite(self.kbt):
            raise InvalidSpec("kbt must be >= 0")
        if self.eps_wca < 0 or self.r0 <= 0:
            raise InvalidSpec("WCA parameters must be non-negative")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise InvalidSpec("record_every must be a positive integer")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidSpec("seed must fit in 64 bits")

    def steps(self, duration: float) -> int:
        """Number of integration steps covering ``duration`` t0."""
        return int(round(duration * T0 / self.dt))


@dataclass
class State:
    positions: np.ndarray    # (n, 3)
    orientations: np.ndarray  # (n, 4), (w, x, y, z)

    def copy(self) -> "State":
        return State(self.positions.copy(), self.orientations.copy())


def initial_state(assembly: Assembly) -> State:
    return State(np.array([s.position for s in assembly.slabs], dtype=float),
                 np.array([s.orientation for s in assembly.slabs], dtype=float))


def _body_key(ident: str) -> int:
    return int.from_bytes(hashlib.blake2b(ident.encode(), digest_size=8).digest(), "little")


class Packed:
    """Flat arrays describing an assembly for the compiled kernels."""

    def __init__(self, assembly: Assembly, params: SimParams | None = None):
        params = params or SimParams()
        self.assembly = assembly
        self.ids = [s.id for s in assembly.slabs]
        index = {ident: k for k, ident in enumerate(self.ids)}
        self.inv_drag = np.array([1.0 / s.drag for s in assembly.slabs])
        self.inv_rdrag = np.array([1.0 / s.rot_drag for s in assembly.slabs])

        rows = []
        bonded = set()
        for j in assembly.joints:
            for a, b in j.endpoints:
                rows.append((index[a.body], index[b.body], a.local, b.local, j.stiffness, 0.0,
                             j.tolerance))
                bonded.add(frozenset((index[a.body], index[b.body])))
        self.n_joint_bonds = len(rows)
        self.muscle_channels = []
        self.muscle_lengths = []
        for m in assembly.muscles:
            a, b = m.endpoints
            rows.append((index[a.body], index[b.body], a.local, b.local, m.stiffness,
                         m.rest_length, 0.0))
            self.muscle_channels.append(m.channel)
            self.muscle_lengths.append((m.rest_length, m.actuated_length))
        m = len(rows)
        self.bi = np.array([r[0] for r in rows], dtype=np.int64).reshape(m)
        self.bj = np.array([r[1] for r in rows], dtype=np.int64).reshape(m)
        self.li = np.array([r[2] for r in rows], dtype=float).reshape(m, 3)
        self.lj = np.array([r[3] for r in rows], dtype=float).reshape(m, 3)
        self.bk = np.array([r[4] for r in rows], dtype=float).reshape(m)
        self.br0 = np.array([r[5] for r in rows], dtype=float).reshape(m)
        self.btol = np.array([r[6] for r in rows], dtype=float).reshape(m)

        # center-center repulsion between bodies that share no joint
        n = len(self.ids)
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)
                 if frozenset((i, j)) not in bonded]
        self.wi = np.array([p[0] for p in pairs], dtype=np.int64)
        self.wj = np.array([p[1] for p in pairs], dtype=np.int64)
        self.eps = float(params.eps_wca)
        self.sig = 2.0 * float(params.r0)
        self.rc2 = (WCA_RANGE * self.sig) ** 2

        self.probe_ids = [p.id for p in assembly.probes]
        k = len(self.probe_ids)
        self.pi = np.array([index[p.endpoints[0].body] for p in assembly.probes], dtype=np.int64)
        self.pj = np.array([index[p.endpoints[1].body] for p in assembly.probes], dtype=np.int64)
        self.lpi = np.array([p.endpoints[0].local for p in assembly.probes], dtype=float).reshape(k, 3)
        self.lpj = np.array([p.endpoints[1].local for p in assembly.probes], dtype=float).reshape(k, 3)

    def set_channels(self, states: Mapping[str, int]):
        """Select muscle equilibrium lengths for the given channel states."""
        off = self.n_joint_bonds
        for k, (ch, (rest, act)) in enumerate(zip(self.muscle_channels, self.muscle_lengths)):
            on = ch is not None and states.get(ch, 0)
            self.br0[off + k] = act if on else rest

    def bond_args(self):
        return (self.bi, self.bj, self.li, self.lj, self.bk, self.br0, self.btol,
                self.wi, self.wj, self.eps, self.sig, self.rc2)


def compute_forces(assembly: Assembly, state: State | None = None,
                   channels: Mapping[str, int] | None = None,
                   params: SimParams | None = None, packed: Packed | None = None):
    """Per-body forces, torques and the total potential energy.

    Returns
    -------
    force, torque : ndarray, shape (n, 3)
    energy : float
    """
    packed = packed or Packed(assembly, params)
    state = state or initial_state(assembly)
    packed.set_channels(channels or {})
    n = len(packed.ids)
    rot = np.empty((n, 3, 3))
    kernel.quat_matrices(np.ascontiguousarray(state.orientations, dtype=float), rot)
    force = np.zeros((n, 3))
    torque = np.zeros((n, 3))
    energy = kernel.forces(np.ascontiguousarray(state.positions, dtype=float), rot,
                           *packed.bond_args(), force, torque)
    return force, torque, float(energy)


def potential_energy(assembly, state=None, channels=None, params=None, packed=None) -> float:
    return compute_forces(assembly, state, channels, params, packed)[2]


class NoiseSource:
    """Per-body Gaussian streams keyed by (seed, body id) and block index.

    Step ``k`` of body ``b`` always receives the same three normals, no
    matter how the run is split into segments.
    """

    def __init__(self, seed: int, ids):
        self.seed = int(seed)
        self.keys = [(self.seed << 64) | _body_key(i) for i in ids]
        self._cache = {}

    def _block(self, body: int, block: int) -> np.ndarray:
        key = (body, block)
        blk = self._cache.get(key)
        if blk is None:
            gen = np.random.Generator(np.random.Philox(key=self.keys[body],
                                                       counter=[0, 0, 0, block]))
            blk = gen.standard_normal((NOISE_BLOCK, 3))
            self._cache[key] = blk
        return blk

    def draw(self, start: int, count: int) -> np.ndarray:
        """Normals for steps ``start .. start + count - 1``, shape (count, n, 3)."""
        out = np.empty((count, len(self.keys), 3))
        first = start // NOISE_BLOCK
        last = (start + count - 1) // NOISE_BLOCK
        for b in range(len(self.keys)):
            for blk in range(first, last + 1):
                lo = max(start, blk * NOISE_BLOCK)
                hi = min(start + count, (blk + 1) * NOISE_BLOCK)
                data = self._block(b, blk)
                out[lo - start:hi - start, b] = data[lo - blk * NOISE_BLOCK:hi - blk * NOISE_BLOCK]
        # keep only blocks that can still be needed
        self._cache = {k: v for k, v in self._cache.items() if k[1] >= last}
        return out


def _empty_records(nprobe):
    return (np.empty((0, nprobe)), np.empty((0, 0, 3)), np.empty((0, 0, 4)))


def step(assembly: Assembly, state: State, params: SimParams,
         schedule: ActuationSchedule | None = None, t: float = 0.0,
         packed: Packed | None = None) -> State:
    """One Euler-Maruyama step starting at time ``t`` (t0 units).

    The noise is that of global step ``round(t * T0 / dt)`` so that chaining
    ``step`` reproduces :func:`run` exactly.
    """
    packed = packed or Packed(assembly, params)
    schedule = schedule or ActuationSchedule()
    index = int(round(t * T0 / params.dt))
    packed.set_channels(schedule.states((index + 0.5) * params.dt / T0))
    new = state.copy()
    amp = np.sqrt(2.0 * params.kbt * params.dt * packed.inv_drag)
    if params.kbt > 0:
        noise = NoiseSource(params.seed, packed.ids).draw(index, 1)
    else:
        noise = np.empty((0, len(packed.ids), 3))
    rec, rp, rq = _empty_records(len(packed.probe_ids))
    code = kernel.advance(new.positions, new.orientations, 1, params.dt, packed.inv_drag,
                          packed.inv_rdrag, amp, noise, *packed.bond_args(), index,
                          2 ** 62, packed.pi, packed.pj, packed.lpi, packed.lpj, rec, rp, rq, 0)
    if code < 0:
        raise NumericalBlowup(f"non-finite coordinates at step {index}; reduce dt")
    return new


def run(assembly: Assembly, params: SimParams | None = None,
        schedule: ActuationSchedule | None = None, duration: float = 1.0, *,
        state: State | None = None, record_states: bool = False,
        block: int = NOISE_BLOCK) -> Trajectory:
    """Integrate from the built configuration for ``duration`` t0.

    Muscle lengths switch instantly at schedule edges; edges are rounded up
    to the next step boundary.
    """
    params = params or SimParams()
    schedule = schedule or ActuationSchedule()
    if not duration > 0:
        raise InvalidSpec("duration must be positive")
    packed = Packed(assembly, params)
    state = (state or initial_state(assembly)).copy()
    pos = np.ascontiguousarray(state.positions, dtype=float)
    quat = np.ascontiguousarray(state.orientations, dtype=float)
    n_steps = params.steps(duration)
    every = int(params.record_every)
    n_rec = n_steps // every + 1
    nb = len(packed.ids)
    npr = len(packed.probe_ids)
    rec = np.empty((n_rec, npr))
    rec_pos = np.empty((n_rec if record_states else 0, nb, 3))
    rec_q = np.empty((n_rec if record_states else 0, nb, 4))

    # sample 0 is the starting configuration
    rot = np.empty((nb, 3, 3))
    kernel.quat_matrices(quat, rot)
    first = np.empty(npr)
    kernel.probe_lengths(pos, rot, packed.pi, packed.pj, packed.lpi, packed.lpj, first)
    rec[0] = first
    if record_states:
        rec_pos[0] = pos
        rec_q[0] = quat
    count = 1

    cuts = {0, n_steps}
    for e in schedule.edges(duration):
        cuts.add(min(n_steps, int(math.ceil(e * T0 / params.dt - 1e-9))))
    cuts = sorted(cuts)
    amp = np.sqrt(2.0 * params.kbt * params.dt * packed.inv_drag)
    noise_src = NoiseSource(params.seed, packed.ids) if params.kbt > 0 else None
    no_noise = np.empty((0, nb, 3))
    for lo, hi in zip(cuts, cuts[1:]):
        packed.set_channels(schedule.states((lo + 0.5) * params.dt / T0))
        s = lo
        while s < hi:
            n = min(block, hi - s)
            noise = noise_src.draw(s, n) if noise_src is not None else no_noise
            count = kernel.advance(pos, quat, n, params.dt, packed.inv_drag, packed.inv_rdrag,
                                   amp, noise, *packed.bond_args(), s, every, packed.pi,
                                   packed.pj, packed.lpi, packed.lpj, rec, rec_pos, rec_q, count)
            if count < 0:
                raise NumericalBlowup(f"non-finite coordinates between steps {s} and {s + n}; "
                                      "reduce dt")
            s += n

    steps_rec = np.arange(count) * every
    times = steps_rec * params.dt / T0
    trace = np.array([[schedule.state(ch, t) for ch in schedule.channels] for t in times],
                     dtype=np.int8).reshape(count, len(schedule.channels))
    probes = {p.id: (p.rest_length, p.signal) for p in assembly.probes}
    outs = [p.probe for p in assembly.ports if p.direction == "out"]
    return Trajectory(times=times, probe_ids=list(packed.probe_ids), probe_lengths=rec[:count],
                      channels=list(schedule.channels), schedule_trace=trace,
                      body_ids=list(packed.ids),
                      body_positions=rec_pos[:count] if record_states else None,
                      body_orientations=rec_q[:count] if record_states else None,
                      final_state=State(pos, quat), probe_meta=probes,
                      output_probe=outs[0] if len(outs) == 1 else None,
                      schedule=schedule.to_dict())


def relax(assembly: Assembly, channels: Mapping[str, int] | None = None, *,
          ftol: float = 1e-8, dt: float = 0.1, max_steps: int = 5_000_000,
          params: SimParams | None = None) -> Assembly:
    """Noise-free descent to the nearest static minimum; returns the moved assembly.

    Raises
    ------
    NoConvergence
        If the force residual is still above ``ftol`` after ``max_steps``.
    """
    from ..errors import NoConvergence

    packed = Packed(assembly, params)
    packed.set_channels(channels or {})
    st = initial_state(assembly)
    pos = np.ascontiguousarray(st.positions)
    quat = np.ascontiguousarray(st.orientations)
    taken = kernel.descend(pos, quat, max_steps, dt, packed.inv_drag, packed.inv_rdrag,
                           *packed.bond_args(), ftol)
    if taken < 0:
        raise NumericalBlowup("relaxation blew up; reduce dt")
    if taken >= max_steps:
        raise NoConvergence(f"force residual above {ftol:g} after {max_steps} steps")
    return assembly.with_poses(pos, quat)
