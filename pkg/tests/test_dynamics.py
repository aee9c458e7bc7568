import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mechlogic.dynamics import (T0, ActuationSchedule, Constant, SimParams, Square, State, Step,
                                compute_forces, initial_state, potential_energy, run, step)
from mechlogic.dynamics.schedule import waveform_from_dict
from mechlogic.errors import InvalidSpec, NumericalBlowup
from mechlogic.model import (Assembly, AttachmentPoint, GateKind, Joint, JointKind, Muscle, Probe,
                             ProbeRole, RigidSlab, SignalMode, build_gate)

ORIGIN = (0.0, 0.0, 0.0)
EXT = (0.5, 0.25, 0.05)


def pair(sep, *, tolerance=0.0, muscle_rest=None, local=ORIGIN):
    """Two slabs on the x axis joined center to center by one bond."""
    slabs = (RigidSlab("a", EXT, ORIGIN), RigidSlab("b", EXT, (sep, 0.0, 0.0)))
    ends = (AttachmentPoint("a", local), AttachmentPoint("b", local))
    joints, muscles = (), ()
    if muscle_rest is None:
        kind = JointKind.make(False, tolerance)
        joints = (Joint("j", kind, (ends,), 1.0, tolerance),)
    else:
        muscles = (Muscle("m", ends, muscle_rest, SignalMode.EXPAND, "x"),)
    probe = Probe("sep", ends, 1.0, 0.5, ProbeRole.GATE_OUTPUT)
    return Assembly("pair", slabs, joints, muscles, (probe,))


def free_slabs(n, spacing=10.0):
    slabs = tuple(RigidSlab(f"s{k}", EXT, (spacing * k, 0.0, 0.0)) for k in range(n))
    return Assembly("free", slabs)


# --- forces -------------------------------------------------------------------

def test_coincident_bond_is_force_free():
    f, t, e = compute_forces(pair(0.0))
    assert np.all(f == 0) and np.all(t == 0) and e == 0


def test_muscle_harmonic_law():
    f, t, e = compute_forces(pair(1.3, muscle_rest=1.0))
    np.testing.assert_allclose(f[0], [0.3, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(f[1], [-0.3, 0.0, 0.0], atol=1e-15)
    assert np.all(t == 0)
    assert e == pytest.approx(0.5 * 0.3 ** 2)


def test_muscle_actuation_switches_length():
    asm = pair(1.5, muscle_rest=1.0)
    f0, _, _ = compute_forces(asm, channels={"x": 0})
    f1, _, _ = compute_forces(asm, channels={"x": 1})
    assert f0[0, 0] == pytest.approx(0.5)
    assert f1[0, 0] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("sep,force", [(0.03, 0.0), (0.05, 0.0), (0.08, 0.03)])
def test_tolerance_bond(sep, force):
    f, _, _ = compute_forces(pair(sep, tolerance=0.05))
    assert f[0, 0] == pytest.approx(force, abs=1e-15)
    assert f[1, 0] == pytest.approx(-force, abs=1e-15)


@given(st.floats(0.0, 0.0499999), st.floats(0.001, 0.2))
def test_tolerance_bond_exactly_zero_below_slack(frac, tol):
    f, t, e = compute_forces(pair(frac / 0.05 * tol * 0.999, tolerance=tol))
    assert np.all(f == 0.0) and np.all(t == 0.0) and e == 0.0


@given(st.floats(0.0, 1.0), st.floats(0.0, 0.2))
def test_tolerance_bond_piecewise_law(sep, tol):
    f, _, _ = compute_forces(pair(sep, tolerance=tol))
    assert f[0, 0] == pytest.approx(max(0.0, sep - tol), abs=1e-12)


def test_off_center_bond_gives_torque():
    # arms along y, stretch along x: torque about z on both bodies
    slabs = (RigidSlab("a", EXT, ORIGIN), RigidSlab("b", EXT, (0.2, 0.0, 0.0)))
    ends = (AttachmentPoint("a", (0.0, 0.1, 0.0)), AttachmentPoint("b", (0.0, 0.1, 0.0)))
    asm = Assembly("p", slabs, (Joint("j", JointKind.UNIVERSAL, (ends,)),))
    f, t, _ = compute_forces(asm)
    np.testing.assert_allclose(t[0], [0.0, 0.0, -0.1 * 0.2], atol=1e-15)
    np.testing.assert_allclose(f.sum(axis=0), 0.0, atol=1e-15)


# --- integrator -----------------------------------------------------------------

def test_zero_force_zero_noise_is_stationary():
    asm = pair(0.0)
    s0 = initial_state(asm)
    s1 = step(asm, s0, SimParams(kbt=0.0))
    assert np.array_equal(s0.positions, s1.positions)
    assert np.array_equal(s0.orientations, s1.orientations)


def test_free_diffusion_msd():
    # 200 non-interacting slabs x 50 seeds = 10^4 samples
    asm = free_slabs(200)
    kbt, dt, nsteps = 1e-3, 0.05, 400
    x0 = initial_state(asm).positions
    sq = []
    for seed in range(50):
        p = SimParams(dt=dt, kbt=kbt, eps_wca=0.0, seed=seed, record_every=nsteps)
        tr = run(asm, p, duration=nsteps * dt / T0)
        sq.append(np.sum((tr.final_state.positions - x0) ** 2, axis=1))
    msd = float(np.mean(sq))
    expected = 6.0 * kbt * nsteps * dt
    assert msd == pytest.approx(expected, rel=0.05)


def _relaxation_rate(dt):
    asm = pair(0.1)
    nsteps = int(round(1.5 / dt))
    p = SimParams(dt=dt, kbt=0.0, record_every=1)
    tr = run(asm, p, duration=nsteps * dt / T0)
    t = tr.times * T0
    slope = np.polyfit(t, np.log(tr.probe("sep")), 1)[0]
    return -slope


def test_two_body_relaxation_rate():
    assert _relaxation_rate(0.01) == pytest.approx(2.0, rel=0.02)


def test_two_body_rate_matches_euler_map():
    # the discrete map contracts by (1 - 2 dt) per step
    for dt in (0.01, 0.05):
        assert _relaxation_rate(dt) == pytest.approx(-math.log(1 - 2 * dt) / dt, rel=1e-9)


def test_determinism():
    g = build_gate(GateKind.NAND)
    p = SimParams(seed=7, record_every=50)
    sch = ActuationSchedule({"in1": Square(0.02)})
    a = run(g, p, sch, 0.05)
    b = run(g, p, sch, 0.05)
    assert a.probe_lengths.tobytes() == b.probe_lengths.tobytes()
    assert a.final_state.positions.tobytes() == b.final_state.positions.tobytes()
    c = run(g, SimParams(seed=8, record_every=50), sch, 0.05)
    assert not np.array_equal(a.probe_lengths, c.probe_lengths)


def test_step_chain_equals_run():
    g = build_gate(GateKind.AND)
    p = SimParams(seed=3, kbt=1e-3, record_every=10)
    sch = ActuationSchedule({"in1": Step(((0.0005, 1),))})
    n = 30
    tr = run(g, p, sch, n * p.dt / T0)
    s = initial_state(g)
    for k in range(n):
        s = step(g, s, p, sch, t=k * p.dt / T0)
    np.testing.assert_array_equal(s.positions, tr.final_state.positions)
    np.testing.assert_array_equal(s.orientations, tr.final_state.orientations)


def test_block_size_does_not_change_physics():
    g = build_gate(GateKind.OR)
    p = SimParams(seed=11, record_every=7)
    a = run(g, p, None, 0.01)
    b = run(g, p, None, 0.01, block=333)
    assert a.probe_lengths.tobytes() == b.probe_lengths.tobytes()


def test_energy_non_increasing_without_noise():
    g = build_gate(GateKind.AND, SignalMode.EXPAND, SignalMode.EXPAND)
    p = SimParams(kbt=0.0, record_every=100)
    ch = {"in1": 1, "in2": 1}
    tr = run(g, p, ActuationSchedule.constant(**ch), 0.5, record_states=True)
    energies = [potential_energy(g, State(tr.body_positions[k], tr.body_orientations[k]), ch)
                for k in range(len(tr))]
    assert energies[0] > 1e-3
    assert all(b <= a + 1e-15 for a, b in zip(energies, energies[1:]))


def test_quaternion_norm():
    g = build_gate(GateKind.NOR)
    tr = run(g, SimParams(kbt=1e-3, seed=2), ActuationSchedule.constant(in1=1), 0.2,
             record_states=True)
    norms = np.linalg.norm(tr.body_orientations, axis=2)
    assert np.max(np.abs(norms - 1.0)) < 1e-9


def test_blowup_detected():
    g = build_gate(GateKind.AND)
    with pytest.raises(NumericalBlowup):
        run(g, SimParams(dt=0.5, kbt=0.0), ActuationSchedule.constant(in1=1), 0.5)


@pytest.mark.parametrize("kw", [{"dt": 0.0}, {"dt": 1.0}, {"dt": float("nan")}, {"kbt": -1.0},
                                {"record_every": 0}, {"seed": -1}, {"r0": 0.0}])
def test_params_validation(kw):
    with pytest.raises(InvalidSpec):
        SimParams(**kw)


def test_nand_rest_inputs_hold_state_one():
    g = build_gate(GateKind.NAND, SignalMode.CONTRACT, SignalMode.CONTRACT)
    out = g.probe("out")
    tr = run(g, SimParams(seed=0), ActuationSchedule.constant(in1=0, in2=0), 10.0)
    assert tr.output_probe == "out"
    assert np.max(np.abs(tr.probe("out") - out.actuated_length)) < 0.1


def test_short_run_has_initial_sample_only():
    g = build_gate(GateKind.AND)
    tr = run(g, SimParams(), None, 1e-6)
    assert len(tr) == 1
    assert tr.times[0] == 0.0


def test_run_rejects_nonpositive_duration():
    with pytest.raises(InvalidSpec):
        run(build_gate(GateKind.AND), SimParams(), None, 0.0)


# --- schedules and trajectory -----------------------------------------------------

def test_square_wave():
    w = Square(2.0)
    assert [w.at(t) for t in (0.0, 0.5, 0.99, 1.0, 1.5, 2.0)] == [1, 1, 1, 0, 0, 1]
    assert w.edges(4.0) == [1.0, 2.0, 3.0, 4.0]


def test_step_wave():
    w = Step(((1.0, 1), (2.0, 0)))
    assert [w.at(t) for t in (0.0, 1.0, 1.5, 2.0)] == [0, 1, 1, 0]
    with pytest.raises(InvalidSpec):
        Step(((2.0, 1), (1.0, 0)))


@pytest.mark.parametrize("w", [Constant(1), Square(3.0, 0.25, 0.1), Step(((0.5, 1),))])
def test_waveform_dict_roundtrip(w):
    assert waveform_from_dict(w.to_dict()) == w


def test_schedule_switches_in_run():
    g = build_gate(GateKind.AND, SignalMode.EXPAND, SignalMode.EXPAND)
    sch = ActuationSchedule({"in1": Square(4.0), "in2": Square(4.0)})
    tr = run(g, SimParams(kbt=0.0, record_every=2000), sch, 8.0)
    out = tr.probe("out")
    ideal = tr.ideal("in1")
    hi = out[(ideal == 1) & (tr.times % 4.0 > 1.5)]
    lo = out[(ideal == 0) & (tr.times % 4.0 > 3.5)]
    assert np.all(hi > 1.4) and np.all(lo < 1.1)


def test_trajectory_csv():
    g = build_gate(GateKind.AND)
    tr = run(g, SimParams(record_every=100), ActuationSchedule.constant(in1=1), 0.01)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,in1,in2,core,out,in1_ideal"
    assert len(lines) == len(tr) + 1
    assert tr.to_jsonl().count("\n") == len(tr)
