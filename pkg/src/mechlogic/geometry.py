"""Design equations for the logic core and the scissor levers.

All lengths are in units of the muscle rest length sigma. The logic core is
described by seven unknowns ``(x, phi, gamma1, gamma2, gamma3, zeta, delta_out)``
closed by six loop-closure equations plus the height definition
``h = x + cos(phi)``. A scissor lever is described by five unknowns
``(theta1, theta2, l1, l2, dtheta)`` and five equations.

Both systems are small and smooth, so they are solved by a damped Newton
iteration with a finite-difference Jacobian.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidSpec, NoConvergence

__all__ = [
    "CoreSpec",
    "CoreGeometry",
    "Hinge",
    "LeverSpec",
    "LeverGeometry",
    "SweepRow",
    "core_residuals",
    "core_jacobian",
    "lever_residuals",
    "lever_jacobian",
    "solve_core",
    "sweep_core",
    "solve_lever",
    "sweep_to_csv",
    "newton",
]

MAX_ITER = 200
PROGRESS_WINDOW = 20
CONTINUATION_STEP = 0.05


# --------------------------------------------------------------------------
# generic damped Newton

def _jacobian(fun, x, step=1e-7):
    n = x.size
    f0 = fun(x)
    jac = np.empty((f0.size, n))
    for i in range(n):
        h = step * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (fun(xp) - fun(xm)) / (2.0 * h)
    return jac


def newton(fun: Callable[[np.ndarray], np.ndarray], x0, tol: float,
           max_iter: int = MAX_ITER, jac: Callable | None = None) -> np.ndarray:
    """Damped Newton iteration on ``fun(x) = 0``.

    ``jac`` returns the Jacobian; central differences are used without it.
    The step is the least-squares solution of ``J dx = -f`` so mildly
    singular Jacobians do not abort the iteration. Steps are halved until the
    max-norm of the residual decreases.

    Raises
    ------
    NoConvergence
        If ``max |f| < tol`` is not reached within ``max_iter`` iterations,
        the residual fails to halve over ``PROGRESS_WINDOW`` iterations or
        the iterate becomes non-finite.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = fun(x)
    norm = np.max(np.abs(r))
    checkpoint = norm
    for it in range(1, max_iter + 1):
        if norm < tol:
            return x
        j = jac(x) if jac is not None else _jacobian(fun, x)
        dx = np.linalg.lstsq(j, -r, rcond=None)[0]
        alpha = 1.0
        while True:
            trial = x + alpha * dx
            r_trial = fun(trial)
            n_trial = np.max(np.abs(r_trial))
            if np.isfinite(n_trial) and n_trial < norm:
                break
            alpha *= 0.5
            if alpha < 1e-6:
                # accept the tiny step; the next Jacobian may do better
                break
        x, r, norm = trial, r_trial, n_trial
        if it % PROGRESS_WINDOW == 0:
            # creeping towards a local minimum of |f| rather than a root
            if norm >= tol and norm > 0.5 * checkpoint:
                raise NoConvergence(f"residual stuck near {norm:.3e}")
            checkpoint = norm
        if not np.all(np.isfinite(x)):
            raise NoConvergence("Newton iterate became non-finite")
    if norm < tol:
        return x
    raise NoConvergence(f"residual {norm:.3e} after {max_iter} iterations")


# --------------------------------------------------------------------------
# logic core

@dataclass(frozen=True)
class CoreSpec:
    delta_in_frac: float = 0.5
    h_frac: float = 2.0

    def __post_init__(self):
        d, h = self.delta_in_frac, self.h_frac
        if not (math.isfinite(d) and math.isfinite(h)):
            raise InvalidSpec("core spec values must be finite")
        if d < 0:
            raise InvalidSpec("delta_in_frac must be >= 0")
        if h <= 0:
            raise InvalidSpec("h_frac must be > 0")


@dataclass(frozen=True)
class CoreGeometry:
    spec: CoreSpec
    x_frac: float
    phi: float
    gamma1: float
    gamma2: float
    gamma3: float
    zeta: float
    delta_out_frac: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.x_frac, self.phi, self.gamma1, self.gamma2,
                         self.gamma3, self.zeta, self.delta_out_frac])

    def residuals(self) -> np.ndarray:
        return core_residuals(self.as_vector(), self.spec)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "CoreGeometry":
        fields = dict(data)
        fields["spec"] = CoreSpec(**fields["spec"])
        return cls(**fields)

    @property
    def base_half(self) -> float:
        """Half the length of the passive link ab."""
        return math.sin(self.phi)


def core_residuals(v, spec: CoreSpec) -> np.ndarray:
    """Six loop-closure residuals followed by the height residual."""
    x, phi, g1, g2, g3, zeta, dout = v
    s = 1.0 + spec.delta_in_frac
    return np.array([
        math.sin(phi) - math.cos(g1) - x * math.sin(g3),
        math.sin(g1) + x * math.cos(g3) - x - math.cos(phi),
        math.cos(g1) + s * math.cos(g2) - 2.0 * math.sin(phi),
        math.sin(g1) - s * math.sin(g2),
        s * math.cos(zeta) - math.cos(phi) - dout,
        math.sin(phi) / s - math.sin(zeta),
        x + math.cos(phi) - spec.h_frac,
    ])


def core_jacobian(v, spec: CoreSpec) -> np.ndarray:
    """Analytic Jacobian of :func:`core_residuals`."""
    x, phi, g1, g2, g3, zeta, _ = v
    s = 1.0 + spec.delta_in_frac
    sp, cp = math.sin(phi), math.cos(phi)
    return np.array([
        [-math.sin(g3), cp, math.sin(g1), 0.0, -x * math.cos(g3), 0.0, 0.0],
        [math.cos(g3) - 1.0, sp, math.cos(g1), 0.0, -x * math.sin(g3), 0.0, 0.0],
        [0.0, -2.0 * cp, -math.sin(g1), -s * math.sin(g2), 0.0, 0.0, 0.0],
        [0.0, 0.0, math.cos(g1), -s * math.cos(g2), 0.0, 0.0, 0.0],
        [0.0, sp, 0.0, 0.0, 0.0, -s * math.sin(zeta), -1.0],
        [0.0, cp / s, 0.0, 0.0, 0.0, -math.cos(zeta), 0.0],
        [1.0, -sp, 0.0, 0.0, 0.0, 0.0, 0.0],
    ])


def _core_seed(delta: float, h: float) -> np.ndarray:
    # small-delta asymptote of the branch leaving phi = 0: phi^2 ~ delta / h
    phi = min(math.sqrt(delta / h), 1.4)
    s = 1.0 + delta
    base = 2.0 * math.sin(phi)
    cx = (1.0 + base * base - s * s) / (2.0 * base)
    if abs(cx) < 1.0:
        g1 = math.atan2(math.sqrt(1.0 - cx * cx), cx)
    else:
        g1 = 0.5 * math.pi - phi
    g2 = math.atan2(math.sin(g1) / s, (2.0 * math.sin(phi) - math.cos(g1)) / s)
    x = h - math.cos(phi)
    g3 = math.asin(max(-1.0, min(1.0, (math.sin(phi) - math.cos(g1)) / x))) if x > 0 else 0.0
    zeta = math.asin(min(1.0, math.sin(phi) / s))
    dout = s * math.cos(zeta) - math.cos(phi)
    return np.array([x, phi, g1, g2, g3, zeta, dout])


def _rest_core(spec: CoreSpec) -> CoreGeometry:
    # Degenerate limit of the continuation branch at delta_in = 0: the passive
    # link ab shrinks to a point and every residual vanishes identically.
    return CoreGeometry(spec, x_frac=spec.h_frac - 1.0, phi=0.0,
                        gamma1=0.5 * math.pi, gamma2=0.5 * math.pi, gamma3=0.0,
                        zeta=0.0, delta_out_frac=0.0)


def _check_core(v, spec: CoreSpec):
    x, phi = v[0], v[1]
    if not (0.0 < phi < 0.5 * math.pi):
        raise NoConvergence(f"phi={phi:.4f} left (0, pi/2)")
    if x <= 0.0:
        raise NoConvergence(f"x/sigma={x:.4f} is not positive")
    if v[6] < -1e-12:
        raise NoConvergence("negative delta_out on the continuation branch")


def solve_core(spec: CoreSpec, tol: float = 1e-12) -> CoreGeometry:
    """Solve the logic-core design equations for ``(delta_in, h)``.

    The solution is continued from ``delta_in = 0`` in steps of 0.05 sigma so
    Newton stays on the physical branch. ``delta_in = 0`` returns the
    degenerate limit with ``phi = 0`` and ``delta_out = 0``.
    """
    if not tol > 0:
        raise InvalidSpec("tol must be positive")
    if spec.h_frac <= 1.0:
        # x = h - cos(phi) must stay positive along the whole branch
        raise NoConvergence("h/sigma <= 1 leaves no room for the link cd")
    if spec.delta_in_frac == 0.0:
        return _rest_core(spec)
    return CoreGeometry(spec, *map(float, _continue_core(spec, None, 0.0, tol)))


def _continue_core(spec: CoreSpec, v, start: float, tol: float) -> np.ndarray:
    """Follow the branch from ``(start, v)`` up to ``spec.delta_in_frac``."""
    target = spec.delta_in_frac
    n_steps = max(1, math.ceil((target - start) / CONTINUATION_STEP - 1e-9))
    for k in range(1, n_steps + 1):
        delta = target if k == n_steps else start + k * CONTINUATION_STEP
        step_spec = CoreSpec(delta, spec.h_frac)
        guess = _core_seed(delta, spec.h_frac) if v is None else v
        v = newton(lambda z: core_residuals(z, step_spec), guess, tol,
                   jac=lambda z: core_jacobian(z, step_spec))
        _check_core(v, step_spec)
    return v


@dataclass(frozen=True)
class SweepRow:
    delta_in_frac: float
    h_frac: float
    delta_out_frac: float | None
    geometry: CoreGeometry | None = field(default=None, compare=False, repr=False)

    @property
    def feasible(self) -> bool:
        return self.delta_out_frac is not None


def sweep_core(delta_in_range: Sequence[float], h_values: Sequence[float],
               tol: float = 1e-12) -> list[SweepRow]:
    """Tabulate delta_out over a (delta_in, h) grid, marking infeasible points."""
    deltas = [float(d) for d in delta_in_range]
    hs = [float(h) for h in h_values]
    if not deltas or not hs:
        raise InvalidSpec("sweep ranges must be non-empty")
    found = {}
    for h in hs:
        # walk each column upwards so every point continues from the last one
        prev_d, prev_v = 0.0, None
        for d in sorted(set(deltas)):
            spec = CoreSpec(d, h)
            try:
                if d == 0.0 or h <= 1.0:
                    v = solve_core(spec, tol).as_vector()
                else:
                    v = _continue_core(spec, prev_v, prev_d, tol)
                    prev_d, prev_v = d, v
                found[(d, h)] = CoreGeometry(spec, *map(float, v))
            except NoConvergence:
                found[(d, h)] = None
                prev_d, prev_v = 0.0, None
    rows = []
    for h in hs:
        for d in deltas:
            g = found[(d, h)]
            rows.append(SweepRow(d, h, None if g is None else g.delta_out_frac, g))
    return rows


def sweep_to_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta_in_frac", "h_frac", "delta_out_frac", "feasible"])
    for r in rows:
        w.writerow([repr(r.delta_in_frac), repr(r.h_frac),
                    "" if r.delta_out_frac is None else repr(r.delta_out_frac),
                    "true" if r.feasible else "false"])
    return buf.getvalue()


# --------------------------------------------------------------------------
# scissor lever

class Hinge(str, enum.Enum):
    OPEN = "Open"
    CROSSED = "Crossed"

    @property
    def sign(self) -> int:
        return 1 if self is Hinge.CROSSED else -1


@dataclass(frozen=True)
class LeverSpec:
    l_in: float
    l_out: float
    dl_in: float
    dl_out: float
    l: float
    hinge: Hinge

    def __post_init__(self):
        object.__setattr__(self, "hinge", Hinge(self.hinge))
        vals = (self.l_in, self.l_out, self.dl_in, self.dl_out, self.l)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidSpec("lever spec values must be finite")
        if min(self.l_in, self.l_out, self.l) <= 0:
            raise InvalidSpec("l_in, l_out and l must be positive")
        if abs(self.dl_in) >= self.l_in or abs(self.dl_out) >= self.l_out:
            raise InvalidSpec("signals must be smaller than the rest lengths")

    def scaled(self, c: float) -> "LeverSpec":
        return LeverSpec(c * self.l_in, c * self.l_out, c * self.dl_in,
                         c * self.dl_out, c * self.l, self.hinge)


@dataclass(frozen=True)
class LeverGeometry:
    spec: LeverSpec
    theta1: float
    theta2: float
    l1: float
    l2: float
    dtheta: float
    convention: str = "verbatim"

    def as_vector(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2, self.l1, self.l2, self.dtheta])

    def residuals(self) -> np.ndarray:
        return lever_residuals(self.as_vector(), self.spec, self.convention)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["spec"]["hinge"] = self.spec.hinge.value
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "LeverGeometry":
        fields = dict(data)
        fields["spec"] = LeverSpec(**fields["spec"])
        return cls(**fields)


CONVENTIONS = ("verbatim", "halved")


def lever_residuals(v, spec: LeverSpec, convention: str = "verbatim") -> np.ndarray:
    """Residuals of the lever equations.

    ``"verbatim"`` uses un-halved rest rows and halved actuated rows, exactly
    as the design equations are usually written. ``"halved"`` halves both, so
    ``l1 sin(theta1)`` is the half-separation of a mirror-symmetric scissor in
    both states; the assembly builders use this form.
    """
    t1, t2, l1, l2, dt = v
    rest = 0.5 if convention == "halved" else 1.0
    s = spec.hinge.sign
    return np.array([
        l1 * math.sin(t1) - rest * spec.l_in,
        l2 * math.sin(t2) - rest * spec.l_out,
        l1 * math.sin(t1 + dt) - 0.5 * (spec.l_in + spec.dl_in),
        l2 * math.sin(t2 + s * dt) - 0.5 * (spec.l_out + spec.dl_out),
        l1 * math.cos(t1) + l2 * math.cos(t2) - spec.l,
    ])


def lever_jacobian(v, spec: LeverSpec, convention: str = "verbatim") -> np.ndarray:
    """Analytic Jacobian of :func:`lever_residuals` (independent of ``convention``)."""
    t1, t2, l1, l2, dt = v
    s = spec.hinge.sign
    a, b = t1 + dt, t2 + s * dt
    return np.array([
        [l1 * math.cos(t1), 0.0, math.sin(t1), 0.0, 0.0],
        [0.0, l2 * math.cos(t2), 0.0, math.sin(t2), 0.0],
        [l1 * math.cos(a), 0.0, math.sin(a), 0.0, l1 * math.cos(a)],
        [0.0, l2 * math.cos(b), 0.0, math.sin(b), s * l2 * math.cos(b)],
        [-l1 * math.sin(t1), -l2 * math.sin(t2), math.cos(t1), math.cos(t2), 0.0],
    ])


def _wrap(a: float) -> float:
    return math.remainder(a, 2.0 * math.pi)


def solve_lever(spec: LeverSpec, tol: float = 1e-12,
                convention: str = "verbatim") -> LeverGeometry:
    """Solve the lever equations, selecting the physically sensible branch.

    Newton is started from ``theta1 = theta2 = pi/3`` and a few rotated
    variants; among converged solutions with positive arm lengths and angles
    in ``(0, pi)`` the one with the smallest ``|dtheta|`` wins. Lengths are
    normalised by ``spec.l`` before solving, so ``tol`` is relative to ``l``
    and the branch choice does not depend on the overall scale.
    """
    if convention not in CONVENTIONS:
        raise InvalidSpec(f"unknown convention {convention!r}")
    if not tol > 0:
        raise InvalidSpec("tol must be positive")
    unit = spec.l
    t1, t2, l1, l2, dt = _solve_lever_unit(spec.scaled(1.0 / unit), tol, convention)
    return LeverGeometry(spec, t1, t2, unit * l1, unit * l2, dt, convention=convention)


def _solve_lever_unit(spec: LeverSpec, tol: float, convention: str) -> tuple:
    rest = 0.5 if convention == "halved" else 1.0
    fun = lambda z: lever_residuals(z, spec, convention)  # noqa: E731
    jac = lambda z: lever_jacobian(z, spec, convention)  # noqa: E731

    best = None
    for t1, t2 in ((math.pi / 3, math.pi / 3), (math.pi / 3, 2 * math.pi / 3),
                   (2 * math.pi / 3, math.pi / 3)):
        for dt0 in (0.0, 0.3, -0.3):
            guess = np.array([t1, t2, rest * spec.l_in / math.sin(t1),
                              rest * spec.l_out / math.sin(t2), dt0])
            try:
                v = newton(fun, guess, tol, jac=jac)
            except NoConvergence:
                continue
            t1s = _wrap(v[0]) % (2 * math.pi)
            t2s = _wrap(v[1]) % (2 * math.pi)
            dts = _wrap(v[4])
            cand = np.array([t1s, t2s, v[2], v[3], dts])
            if not (0 < t1s < math.pi and 0 < t2s < math.pi):
                continue
            if v[2] <= 0 or v[3] <= 0:
                continue
            if np.max(np.abs(fun(cand))) >= tol:
                cand = newton(fun, cand, tol, jac=jac)
            if best is None or abs(cand[4]) < abs(best[4]) - 1e-12:
                best = cand
    if best is None:
        raise NoConvergence("no lever branch with positive arms and angles in (0, pi)")
    return tuple(map(float, best))
