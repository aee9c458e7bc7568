import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st
from scipy.optimize import root

from mechlogic.errors import InvalidSpec, NoConvergence
from mechlogic.geometry import (CoreGeometry, CoreSpec, Hinge, LeverGeometry, LeverSpec,
                                core_jacobian, core_residuals, lever_jacobian, lever_residuals,
                                solve_core, solve_lever, sweep_core, sweep_to_csv)


def core_oracle(g: CoreGeometry) -> np.ndarray:
    """Loop-closure equations transcribed independently of the solver module."""
    s = 1.0 + g.spec.delta_in_frac
    x, p, g1, g2, g3, z, d = (g.x_frac, g.phi, g.gamma1, g.gamma2, g.gamma3, g.zeta,
                              g.delta_out_frac)
    return np.array([
        np.sin(p) - np.cos(g1) - x * np.sin(g3),
        np.sin(g1) + x * np.cos(g3) - x - np.cos(p),
        np.cos(g1) + s * np.cos(g2) - 2 * np.sin(p),
        np.sin(g1) - s * np.sin(g2),
        s * np.cos(z) - np.cos(p) - d,
        np.sin(p) / s - np.sin(z),
        x + np.cos(p) - g.spec.h_frac,
    ])


def lever_closed_form(spec: LeverSpec, rest: float = 1.0):
    """Eliminate the arm lengths, leaving A cos(d) + B sin(d) = C in dtheta.

    ``rest`` scales the rest-state rows (1 verbatim, 0.5 halved).
    """
    p = (spec.l_in + spec.dl_in) / (2 * rest * spec.l_in)
    q = (spec.l_out + spec.dl_out) / (2 * rest * spec.l_out)
    sgn = spec.hinge.sign
    a = spec.l_in + sgn * spec.l_out
    b = spec.l / rest
    c = spec.l_in * p + sgn * spec.l_out * q
    r = math.hypot(a, b)
    beta = math.atan2(b, a)
    sols = []
    for branch in (1, -1):
        d = math.remainder(beta + branch * math.acos(c / r), 2 * math.pi)
        if abs(math.sin(d)) < 1e-12:
            continue
        cot1 = (p - math.cos(d)) / math.sin(d)
        cot2 = sgn * (q - math.cos(d)) / math.sin(d)
        t1 = math.atan2(1.0, cot1)
        t2 = math.atan2(1.0, cot2)
        sols.append((d, t1, t2, rest * spec.l_in / math.sin(t1),
                     rest * spec.l_out / math.sin(t2)))
    return sols


# --- core -------------------------------------------------------------------

def test_core_paper_value():
    g = solve_core(CoreSpec(0.5, 2.0))
    assert g.delta_out_frac == pytest.approx(0.56, abs=0.01)


def test_core_frozen_solution():
    # frozen from an independent scipy root solve (see test_core_matches_scipy_root)
    g = solve_core(CoreSpec(0.5, 2.0))
    assert g.delta_out_frac == pytest.approx(0.5572933861, abs=1e-9)
    assert g.phi == pytest.approx(0.5682478961, abs=1e-9)
    assert g.x_frac == pytest.approx(1.1571548262, abs=1e-9)


def test_core_matches_scipy_root():
    spec = CoreSpec(0.5, 2.0)
    g = solve_core(spec)
    guess = g.as_vector() + 0.02
    sol = root(lambda v: core_residuals(v, spec), guess, tol=1e-14)
    assert sol.success
    np.testing.assert_allclose(sol.x, g.as_vector(), atol=1e-9)


def test_core_rest_configuration():
    g = solve_core(CoreSpec(0.0, 2.0))
    assert g.delta_out_frac == 0.0
    assert g.gamma1 == pytest.approx(g.gamma2)
    assert g.zeta == pytest.approx(g.phi)


def test_core_residual_oracle_quarter():
    g = solve_core(CoreSpec(0.25, 1.5))
    assert np.max(np.abs(core_oracle(g))) < 1e-10


def test_core_delta_out_closed_form():
    # eliminating zeta from the last two rows gives delta_out from phi alone
    g = solve_core(CoreSpec(0.4, 2.2))
    s = 1.4
    assert g.delta_out_frac == pytest.approx(math.sqrt(s * s - math.sin(g.phi) ** 2)
                                             - math.cos(g.phi), abs=1e-11)


@given(st.floats(0.02, 0.8), st.floats(1.3, 3.0))
def test_core_residual_closure(d, h):
    try:
        g = solve_core(CoreSpec(d, h), tol=1e-12)
    except NoConvergence:
        return
    assert np.max(np.abs(core_oracle(g))) < 1e-10
    assert 0 < g.phi < math.pi / 2
    assert g.delta_out_frac >= 0
    assert g.x_frac + math.cos(g.phi) == pytest.approx(h, abs=1e-10)


@given(st.floats(1.2, 3.0))
def test_core_rest_closure_property(h):
    assert solve_core(CoreSpec(0.0, h)).delta_out_frac == 0.0


def test_core_deterministic():
    a = solve_core(CoreSpec(0.35, 1.8))
    b = solve_core(CoreSpec(0.35, 1.8))
    assert a.as_vector().tobytes() == b.as_vector().tobytes()


@pytest.mark.parametrize("d,h", [(-0.1, 2.0), (0.5, 0.0), (float("nan"), 2.0), (0.5, math.inf)])
def test_core_invalid(d, h):
    with pytest.raises(InvalidSpec):
        CoreSpec(d, h)


def test_core_infeasible():
    with pytest.raises(NoConvergence):
        solve_core(CoreSpec(0.5, 0.8))


def test_core_json_roundtrip():
    g = solve_core(CoreSpec(0.5, 2.0))
    assert CoreGeometry.from_dict(g.to_dict()) == g
    assert set(g.to_dict()) == {"spec", "x_frac", "phi", "gamma1", "gamma2", "gamma3", "zeta",
                                "delta_out_frac"}


# --- sweep ------------------------------------------------------------------

def test_sweep_monotone():
    deltas = [0.02 * k for k in range(41)]
    rows = sweep_core(deltas, [1.6, 2.0, 2.4])
    for h in (1.6, 2.0, 2.4):
        col = [r.delta_out_frac for r in rows if r.h_frac == h and r.feasible]
        assert len(col) > 10
        assert all(b >= a - 1e-12 for a, b in zip(col, col[1:]))


def test_sweep_contains_paper_point_and_rest_rows():
    rows = sweep_core([0.0, 0.5], [2.0, 2.5])
    by = {(r.delta_in_frac, r.h_frac): r for r in rows}
    assert by[(0.5, 2.0)].delta_out_frac == pytest.approx(0.56, abs=0.01)
    assert by[(0.0, 2.0)].delta_out_frac == 0.0
    assert by[(0.0, 2.5)].delta_out_frac == 0.0


def test_sweep_marks_infeasible():
    rows = sweep_core([0.3], [0.9, 2.0])
    assert [r.feasible for r in rows] == [False, True]
    text = sweep_to_csv(rows)
    assert text.splitlines()[0] == "delta_in_frac,h_frac,delta_out_frac,feasible"
    assert text.splitlines()[1].endswith(",,false")


def test_sweep_rejects_empty():
    with pytest.raises(InvalidSpec):
        sweep_core([], [2.0])


# --- lever ------------------------------------------------------------------

def test_lever_closed_form_example():
    spec = LeverSpec(1.0, 1.0, -0.5, 0.5, 1.5, Hinge.OPEN)
    g = solve_lever(spec)
    assert math.sin(g.dtheta) == pytest.approx(-1.0 / 3.0, abs=1e-10)
    assert 1 / math.tan(g.theta1) == pytest.approx(2.0784, abs=1e-4)
    assert 1 / math.tan(g.theta2) == pytest.approx(-0.5784, abs=1e-4)
    assert g.l1 == pytest.approx(2.306, abs=1e-3)
    assert g.l2 == pytest.approx(1.155, abs=1e-3)


def test_lever_matches_independent_elimination():
    spec = LeverSpec(1.0, 1.0, -0.5, 0.5, 1.5, Hinge.OPEN)
    g = solve_lever(spec)
    best = min(lever_closed_form(spec), key=lambda s: abs(s[0] - g.dtheta))
    np.testing.assert_allclose([g.dtheta, g.theta1, g.theta2, g.l1, g.l2], best, atol=1e-10)


@pytest.mark.parametrize("convention,rest", [("verbatim", 1.0), ("halved", 0.5)])
@pytest.mark.parametrize("hinge", list(Hinge))
def test_lever_solutions_lie_on_closed_form_branch(convention, rest, hinge):
    spec = LeverSpec(1.2, 0.9, 0.3, -0.4, 1.4, hinge)
    try:
        g = solve_lever(spec, convention=convention)
    except NoConvergence:
        pytest.skip("no admissible branch")
    sols = lever_closed_form(spec, rest)
    err = min(np.max(np.abs(np.subtract(s, [g.dtheta, g.theta1, g.theta2, g.l1, g.l2])))
              for s in sols)
    assert err < 1e-9


def test_lever_output_nand_residuals():
    spec = LeverSpec(2.0, 1.0, 0.56, -0.5, 2.0, Hinge.CROSSED)
    g = solve_lever(spec)
    assert np.max(np.abs(lever_residuals(g.as_vector(), spec))) < 1e-10
    assert g.l1 > 0 and g.l2 > 0
    assert 0 < g.theta1 < math.pi and 0 < g.theta2 < math.pi


lever_specs = st.builds(
    lambda li, lo, fi, fo, l, h: LeverSpec(li, lo, fi * li, fo * lo, l, h),
    st.floats(0.5, 2.5), st.floats(0.5, 2.5), st.floats(-0.6, 0.6).filter(lambda v: abs(v) > 0.05),
    st.floats(-0.6, 0.6).filter(lambda v: abs(v) > 0.05), st.floats(0.8, 3.0),
    st.sampled_from(list(Hinge)))


@given(lever_specs, st.sampled_from(["verbatim", "halved"]))
def test_lever_residual_closure(spec, convention):
    try:
        g = solve_lever(spec, 1e-12, convention=convention)
    except NoConvergence:
        return
    assert np.max(np.abs(lever_residuals(g.as_vector(), spec, convention))) < 1e-10
    assert g.l1 > 0 and g.l2 > 0
    assert 0 < g.theta1 < math.pi and 0 < g.theta2 < math.pi


@given(lever_specs, st.sampled_from([0.1, 10.0, 3.7]))
@example(LeverSpec(0.5, 0.65625, -0.1953125 * 0.5, -0.1953125 * 0.65625, 2.875, Hinge.OPEN), 0.1)
@example(LeverSpec(0.5, 0.65625, -0.1875 * 0.5, -0.21875 * 0.65625, 2.875, Hinge.OPEN), 0.1)
def test_lever_homogeneity(spec, c):
    try:
        g = solve_lever(spec)
    except NoConvergence:
        return
    s = solve_lever(spec.scaled(c))
    assert s.theta1 == pytest.approx(g.theta1, abs=1e-9)
    assert s.theta2 == pytest.approx(g.theta2, abs=1e-9)
    assert s.dtheta == pytest.approx(g.dtheta, abs=1e-9)
    assert s.l1 == pytest.approx(c * g.l1, rel=1e-9)
    assert s.l2 == pytest.approx(c * g.l2, rel=1e-9)


def test_lever_deterministic_and_json():
    spec = LeverSpec(1.0, 1.5, 0.5, 0.5, 1.5, Hinge.CROSSED)
    a, b = solve_lever(spec), solve_lever(spec)
    assert a.as_vector().tobytes() == b.as_vector().tobytes()
    assert LeverGeometry.from_dict(a.to_dict()) == a


@pytest.mark.parametrize("args", [(0.0, 1, 0.1, 0.1, 1), (1, 1, 1.0, 0.1, 1), (1, 1, 0.1, -1.2, 1),
                                  (1, 1, 0.1, 0.1, -1)])
def test_lever_invalid(args):
    with pytest.raises(InvalidSpec):
        LeverSpec(*args, Hinge.OPEN)


def test_lever_bad_tolerance_and_convention():
    spec = LeverSpec(1.0, 1.0, -0.5, 0.5, 1.5, Hinge.OPEN)
    with pytest.raises(InvalidSpec):
        solve_lever(spec, tol=0.0)
    with pytest.raises(InvalidSpec):
        solve_lever(spec, convention="other")


# --- analytic Jacobians and sweep continuation ----------------------------------

def _fd_jacobian(fun, x, h=1e-6):
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((fun(x + e) - fun(x - e)) / (2 * h))
    return np.column_stack(cols)


def test_core_jacobian_matches_differences():
    spec = CoreSpec(0.3, 1.7)
    v = solve_core(spec).as_vector() + 0.05
    np.testing.assert_allclose(core_jacobian(v, spec),
                               _fd_jacobian(lambda z: core_residuals(z, spec), v), atol=1e-8)


@pytest.mark.parametrize("hinge", list(Hinge))
def test_lever_jacobian_matches_differences(hinge):
    spec = LeverSpec(1.2, 0.9, 0.3, -0.4, 1.4, hinge)
    v = np.array([0.7, 1.9, 1.3, 1.1, -0.2])
    for conv in ("verbatim", "halved"):
        np.testing.assert_allclose(lever_jacobian(v, spec, conv),
                                   _fd_jacobian(lambda z: lever_residuals(z, spec, conv), v),
                                   atol=1e-8)


def test_sweep_matches_direct_solves():
    rows = sweep_core([0.6, 0.1, 0.35, 0.0], [1.4, 2.6])
    assert [(r.delta_in_frac, r.h_frac) for r in rows][:4] == [(0.6, 1.4), (0.1, 1.4),
                                                               (0.35, 1.4), (0.0, 1.4)]
    for r in rows:
        direct = solve_core(CoreSpec(r.delta_in_frac, r.h_frac))
        assert r.delta_out_frac == pytest.approx(direct.delta_out_frac, abs=1e-11)
        assert np.max(np.abs(r.geometry.residuals())) < 1e-10
