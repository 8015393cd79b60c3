"""Compiled per-row integrator for the built-in intruder policies.

Rows are integrated one after another with scalar arithmetic, so a row's
result never depends on which other rows share the call.
"""
import math

import numpy as np
from numba import njit

POLICY_DIRECT = 0
POLICY_SCRIPTED = 1

KIND_RUNNING = -1
KIND_CAPTURE = 0
KIND_BREACH = 1
KIND_TIMEOUT = 2


@njit(cache=True, inline="always", error_model="numpy")
def _heading(policy, t, y0, y1, tx, ty, sched_t, sched_c, sched_s):
    if policy == POLICY_DIRECT:
        rx = tx - y0
        ry = ty - y1
        n = math.sqrt(rx * rx + ry * ry)
        if n > 0.0:
            return rx / n, ry / n
        return 1.0, 0.0
    k = 0
    while k + 1 < sched_t.shape[0] and sched_t[k + 1] <= t:
        k += 1
    return sched_c[k], sched_s[k]


@njit(cache=True, inline="always", error_model="numpy")
def _velocity(x, y0, y1, t, w, b, speeds, v_int, tx, ty, eps_cap, eps_sing,
              policy, sched_t, sched_c, sched_s, vx):
    n = x.shape[0]
    total = 0.0
    for i in range(n):
        dx = 0.0
        dy = 0.0
        for j in range(n):
            wij = w[i, j]
            if wij != 0.0:
                dx += wij * (x[j, 0] - x[i, 0])
                dy += wij * (x[j, 1] - x[i, 1])
        bi = b[i]
        if bi != 0.0:
            dx += bi * (y0 - x[i, 0])
            dy += bi * (y1 - x[i, 1])
        nd = math.sqrt(dx * dx + dy * dy)
        if nd > eps_sing:
            vx[i, 0] = speeds[i] * (dx / nd)
            vx[i, 1] = speeds[i] * (dy / nd)
        else:
            vx[i, 0] = 0.0
            vx[i, 1] = 0.0
        ex = x[i, 0] - y0
        ey = x[i, 1] - y1
        total += math.sqrt(ex * ex + ey * ey)
    if total > n * eps_cap:
        hx, hy = _heading(policy, t, y0, y1, tx, ty, sched_t, sched_c, sched_s)
        return v_int * hx, v_int * hy
    return 0.0, 0.0


@njit(cache=True, inline="always", error_model="numpy")
def _euler(x, y, t, dt, w, b, speeds, v_int, tx, ty, eps_cap, eps_sing,
           policy, sched_t, sched_c, sched_s, k1):
    n = x.shape[0]
    u0, u1 = _velocity(x, y[0], y[1], t, w, b, speeds, v_int, tx, ty, eps_cap, eps_sing,
                       policy, sched_t, sched_c, sched_s, k1)
    for i in range(n):
        x[i, 0] = x[i, 0] + dt * k1[i, 0]
        x[i, 1] = x[i, 1] + dt * k1[i, 1]
    y[0] = y[0] + dt * u0
    y[1] = y[1] + dt * u1


@njit(cache=True, error_model="numpy")
def _rk4(x, y, t, dt, w, b, speeds, v_int, tx, ty, eps_cap, eps_sing,
         policy, sched_t, sched_c, sched_s, k1, k2, k3, k4, tmp):
    n = x.shape[0]
    u0, u1 = _velocity(x, y[0], y[1], t, w, b, speeds, v_int, tx, ty, eps_cap, eps_sing,
                       policy, sched_t, sched_c, sched_s, k1)
    h2 = 0.5 * dt
    for i in range(n):
        tmp[i, 0] = x[i, 0] + h2 * k1[i, 0]
        tmp[i, 1] = x[i, 1] + h2 * k1[i, 1]
    v0, v1 = _velocity(tmp, y[0] + h2 * u0, y[1] + h2 * u1, t + h2, w, b, speeds, v_int, tx, ty,
                       eps_cap, eps_sing, policy, sched_t, sched_c, sched_s, k2)
    for i in range(n):
        tmp[i, 0] = x[i, 0] + h2 * k2[i, 0]
        tmp[i, 1] = x[i, 1] + h2 * k2[i, 1]
    r0, r1 = _velocity(tmp, y[0] + h2 * v0, y[1] + h2 * v1, t + h2, w, b, speeds, v_int, tx, ty,
                       eps_cap, eps_sing, policy, sched_t, sched_c, sched_s, k3)
    for i in range(n):
        tmp[i, 0] = x[i, 0] + dt * k3[i, 0]
        tmp[i, 1] = x[i, 1] + dt * k3[i, 1]
    s0, s1 = _velocity(tmp, y[0] + dt * r0, y[1] + dt * r1, t + dt, w, b, speeds, v_int, tx, ty,
                       eps_cap, eps_sing, policy, sched_t, sched_c, sched_s, k4)
    c = dt / 6.0
    for i in range(n):
        x[i, 0] = x[i, 0] + c * (k1[i, 0] + 2.0 * k2[i, 0] + 2.0 * k3[i, 0] + k4[i, 0])
        x[i, 1] = x[i, 1] + c * (k1[i, 1] + 2.0 * k2[i, 1] + 2.0 * k3[i, 1] + k4[i, 1])
    y[0] = y[0] + c * (u0 + 2.0 * v0 + 2.0 * r0 + s0)
    y[1] = y[1] + c * (u1 + 2.0 * v1 + 2.0 * r1 + s1)


@njit(cache=True, error_model="numpy")
def advance(x, y, t, dt, rk4, w, b, speeds, v_int, tx, ty, eps_cap, eps_sing,
            policy, sched_t, sched_c, sched_s, k1, k2, k3, k4, tmp):
    """One Euler or RK4 step of a single row; updates ``x`` and ``y`` in place.

    ``k1`` .. ``tmp`` are (N, 2) scratch arrays.
    """
    if rk4:
        _rk4(x, y, t, dt, w, b, speeds, v_int, tx, ty, eps_cap, eps_sing,
             policy, sched_t, sched_c, sched_s, k1, k2, k3, k4, tmp)
    else:
        _euler(x, y, t, dt, w, b, speeds, v_int, tx, ty, eps_cap, eps_sing,
               policy, sched_t, sched_c, sched_s, k1)


@njit(cache=True, inline="always", error_model="numpy")
def classify(x, y, tx, ty, eps_cap, eps_target):
    captured = True
    for i in range(x.shape[0]):
        ex = x[i, 0] - y[0]
        ey = x[i, 1] - y[1]
        if not math.sqrt(ex * ex + ey * ey) <= eps_cap:
            captured = False
            break
    if captured:
        return KIND_CAPTURE
    ex = y[0] - tx
    ey = y[1] - ty
    if math.sqrt(ex * ex + ey * ey) <= eps_target:
        return KIND_BREACH
    return KIND_RUNNING


@njit(cache=True, error_model="numpy")
def run_row(x, y, t0, dt, t_max, rk4, w, b, speeds, v_int, tx, ty, eps_cap, eps_target, eps_sing,
            policy, sched_t, sched_c, sched_s, stride, rec_t, rec_x, rec_y):
    """Integrate one row to its terminal event.

    Records every ``stride``-th state plus the final one when ``stride > 0``.
    Returns ``(kind, step, n_recorded)``; ``x``, ``y`` hold the final state.
    """
    k = 0
    nrec = 0
    n = x.shape[0]
    k1 = np.empty((n, 2))
    k2 = np.empty((n, 2))
    k3 = np.empty((n, 2))
    k4 = np.empty((n, 2))
    tmp = np.empty((n, 2))
    while True:
        kind = classify(x, y, tx, ty, eps_cap, eps_target)
        if kind == KIND_RUNNING and k * dt >= t_max:
            kind = KIND_TIMEOUT
        if kind != KIND_RUNNING:
            if stride > 0:
                rec_t[nrec] = t0 + k * dt
                rec_x[nrec] = x
                rec_y[nrec] = y
                nrec += 1
            return kind, k, nrec
        if stride > 0 and k % stride == 0:
            rec_t[nrec] = t0 + k * dt
            rec_x[nrec] = x
            rec_y[nrec] = y
            nrec += 1
        if rk4:
            _rk4(x, y, t0 + k * dt, dt, w, b, speeds, v_int, tx, ty, eps_cap, eps_sing,
                 policy, sched_t, sched_c, sched_s, k1, k2, k3, k4, tmp)
        else:
            _euler(x, y, t0 + k * dt, dt, w, b, speeds, v_int, tx, ty, eps_cap, eps_sing,
                   policy, sched_t, sched_c, sched_s, k1)
        k += 1


@njit(cache=True, error_model="numpy")
def run_rows(x0, ys, dt, t_max, rk4, w, b, speeds, v_int, tx, ty, eps_cap, eps_target, eps_sing,
             policy, sched_t, sched_c, sched_s, kinds, steps):
    dummy_t = np.empty(0)
    dummy_x = np.empty((0, x0.shape[0], 2))
    dummy_y = np.empty((0, 2))
    for r in range(ys.shape[0]):
        x = x0.copy()
        y = ys[r].copy()
        kind, k, _ = run_row(x, y, 0.0, dt, t_max, rk4, w, b, speeds, v_int, tx, ty, eps_cap,
                             eps_target, eps_sing, policy, sched_t, sched_c, sched_s, 0,
                             dummy_t, dummy_x, dummy_y)
        kinds[r] = kind
        steps[r] = k
