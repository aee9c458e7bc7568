"""Compiled inner loops: bond and WCA forces and the Euler-Maruyama update."""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True, error_model="numpy")
def quat_matrices(q, out):
    for b in range(q.shape[0]):
        w, x, y, z = q[b, 0], q[b, 1], q[b, 2], q[b, 3]
        out[b, 0, 0] = 1.0 - 2.0 * (y * y + z * z)
        out[b, 0, 1] = 2.0 * (x * y - z * w)
        out[b, 0, 2] = 2.0 * (x * z + y * w)
        out[b, 1, 0] = 2.0 * (x * y + z * w)
        out[b, 1, 1] = 1.0 - 2.0 * (x * x + z * z)
        out[b, 1, 2] = 2.0 * (y * z - x * w)
        out[b, 2, 0] = 2.0 * (x * z - y * w)
        out[b, 2, 1] = 2.0 * (y * z + x * w)
        out[b, 2, 2] = 1.0 - 2.0 * (x * x + y * y)


@njit(cache=True, nogil=True, error_model="numpy")
def _arm(rot, b, local, k, out):
    for a in range(3):
        out[a] = rot[b, a, 0] * local[k, 0] + rot[b, a, 1] * local[k, 1] + rot[b, a, 2] * local[k, 2]


@njit(cache=True, nogil=True, error_model="numpy")
def forces(pos, rot, bi, bj, li, lj, bk, br0, btol, wi, wj, eps, sig, rc2, force, torque):
    """Accumulate forces and torques; returns the potential energy.

    Bonds with positive ``btol`` are slack joints with zero rest length:
    they pull only once their length exceeds the tolerance.
    """
    force[:] = 0.0
    torque[:] = 0.0
    energy = 0.0
    ra = np.empty(3)
    rb = np.empty(3)
    d = np.empty(3)
    for m in range(bi.shape[0]):
        i = bi[m]
        j = bj[m]
        _arm(rot, i, li, m, ra)
        _arm(rot, j, lj, m, rb)
        for a in range(3):
            d[a] = pos[j, a] + rb[a] - pos[i, a] - ra[a]
        r = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
        if btol[m] > 0.0:
            ext = r - btol[m]
            if ext <= 0.0:
                continue
        else:
            ext = r - br0[m]
        energy += 0.5 * bk[m] * ext * ext
        if r == 0.0:
            continue
        s = bk[m] * ext / r
        fx = s * d[0]
        fy = s * d[1]
        fz = s * d[2]
        force[i, 0] += fx
        force[i, 1] += fy
        force[i, 2] += fz
        force[j, 0] -= fx
        force[j, 1] -= fy
        force[j, 2] -= fz
        torque[i, 0] += ra[1] * fz - ra[2] * fy
        torque[i, 1] += ra[2] * fx - ra[0] * fz
        torque[i, 2] += ra[0] * fy - ra[1] * fx
        torque[j, 0] -= rb[1] * fz - rb[2] * fy
        torque[j, 1] -= rb[2] * fx - rb[0] * fz
        torque[j, 2] -= rb[0] * fy - rb[1] * fx
    s2 = sig * sig
    for p in range(wi.shape[0]):
        i = wi[p]
        j = wj[p]
        for a in range(3):
            d[a] = pos[j, a] - pos[i, a]
        r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
        if r2 >= rc2:
            continue
        sr6 = (s2 / r2) ** 3
        energy += 4.0 * eps * (sr6 * sr6 - sr6) + eps
        f = 24.0 * eps * (2.0 * sr6 * sr6 - sr6) / r2
        for a in range(3):
            force[i, a] -= f * d[a]
            force[j, a] += f * d[a]
    return energy


@njit(cache=True, nogil=True, error_model="numpy")
def _rotate(q, b, wx, wy, wz, dt):
    n = math.sqrt(wx * wx + wy * wy + wz * wz)
    if n > 0.0:
        half = 0.5 * n * dt
        s = math.sin(half) / n
        aw = math.cos(half)
        ax = s * wx
        ay = s * wy
        az = s * wz
        w, x, y, z = q[b, 0], q[b, 1], q[b, 2], q[b, 3]
        q[b, 0] = aw * w - ax * x - ay * y - az * z
        q[b, 1] = aw * x + ax * w + ay * z - az * y
        q[b, 2] = aw * y - ax * z + ay * w + az * x
        q[b, 3] = aw * z + ax * y - ay * x + az * w
    norm = math.sqrt(q[b, 0] ** 2 + q[b, 1] ** 2 + q[b, 2] ** 2 + q[b, 3] ** 2)
    for a in range(4):
        q[b, a] /= norm


@njit(cache=True, nogil=True, error_model="numpy")
def probe_lengths(pos, rot, pi, pj, lpi, lpj, out):
    ra = np.empty(3)
    rb = np.empty(3)
    for p in range(pi.shape[0]):
        _arm(rot, pi[p], lpi, p, ra)
        _arm(rot, pj[p], lpj, p, rb)
        s = 0.0
        for a in range(3):
            d = pos[pj[p], a] + rb[a] - pos[pi[p], a] - ra[a]
            s += d * d
        out[p] = math.sqrt(s)


@njit(cache=True, nogil=True, error_model="numpy")
def advance(pos, q, nsteps, dt, inv_drag, inv_rdrag, amp, noise,
            bi, bj, li, lj, bk, br0, btol, wi, wj, eps, sig, rc2,
            step0, record_every, pi, pj, lpi, lpj, rec, rec_pos, rec_q, rec_count):
    """Advance ``nsteps`` Euler-Maruyama steps in place.

    Samples are written whenever the global step index is a multiple of
    ``record_every``. Returns the new record count, or -1 if a coordinate
    became non-finite.
    """
    n = pos.shape[0]
    rot = np.empty((n, 3, 3))
    force = np.empty((n, 3))
    torque = np.empty((n, 3))
    lengths = np.empty(pi.shape[0])
    use_noise = noise.shape[0] > 0
    keep_state = rec_pos.shape[0] > 0
    for s in range(nsteps):
        quat_matrices(q, rot)
        forces(pos, rot, bi, bj, li, lj, bk, br0, btol, wi, wj, eps, sig, rc2, force, torque)
        bad = False
        for b in range(n):
            for a in range(3):
                dx = dt * inv_drag[b] * force[b, a]
                if use_noise:
                    dx += amp[b] * noise[s, b, a]
                pos[b, a] += dx
                if not math.isfinite(pos[b, a]):
                    bad = True
            _rotate(q, b, inv_rdrag[b] * torque[b, 0], inv_rdrag[b] * torque[b, 1],
                    inv_rdrag[b] * torque[b, 2], dt)
            if not math.isfinite(q[b, 0]):
                bad = True
        if bad:
            return -1
        if (step0 + s + 1) % record_every == 0:
            quat_matrices(q, rot)
            probe_lengths(pos, rot, pi, pj, lpi, lpj, lengths)
            rec[rec_count, :] = lengths
            if keep_state:
                rec_pos[rec_count] = pos
                rec_q[rec_count] = q
            rec_count += 1
    return rec_count


@njit(cache=True, nogil=True, error_model="numpy")
def descend(pos, q, max_steps, dt, inv_drag, inv_rdrag, bi, bj, li, lj, bk, br0, btol,
            wi, wj, eps, sig, rc2, ftol):
    """Noise-free descent until every force and torque component is below ``ftol``.

    Returns the number of steps taken, or -1 on blow-up.
    """
    n = pos.shape[0]
    rot = np.empty((n, 3, 3))
    force = np.empty((n, 3))
    torque = np.empty((n, 3))
    for s in range(max_steps):
        quat_matrices(q, rot)
        forces(pos, rot, bi, bj, li, lj, bk, br0, btol, wi, wj, eps, sig, rc2, force, torque)
        worst = 0.0
        for b in range(n):
            for a in range(3):
                worst = max(worst, abs(force[b, a]), abs(torque[b, a]))
        if not math.isfinite(worst):
            return -1
        if worst < ftol:
            return s
        for b in range(n):
            for a in range(3):
                pos[b, a] += dt * inv_drag[b] * force[b, a]
            _rotate(q, b, inv_rdrag[b] * torque[b, 0], inv_rdrag[b] * torque[b, 1],
                    inv_rdrag[b] * torque[b, 2], dt)
    return max_steps
