"""Hot numeric kernels.

Everything here is written against scalars and flat float64 arrays so the
same source runs under ``numba.njit`` or as plain Python (see ``_jit``).
The vehicle state lives in a single array indexed by the constants below;
higher level modules wrap it in dataclasses.
"""

import math

import numpy as np

from ._jit import njit

TWO_PI = 2.0 * math.pi

# vehicle state layout
TX, TY, TTH = 0, 1, 2  # true pose
BX, BY, BTH = 3, 4, 5  # believed pose
DX, DY = 6, 7  # accumulated localization drift
FREEZE_LEFT = 8  # seconds of localization freeze remaining
TIME = 9
VX, VY, OM = 10, 11, 12  # last applied command
ODOMETER = 13  # metres travelled
NFREEZE = 14  # number of freeze events started
STATE_SIZE = 15

# follower state layout
F_PROGRESS = 0  # believed (dead-reckoned) progress
F_CP1, F_CP2 = 1, 2  # checkpoint flags
F_LAST_FB = 3
F_STALL = 4
F_SX, F_SY, F_STH = 5, 6, 7  # believed pose at segment start
F_ACC_TH = 8  # accumulated believed rotation
F_PREV_TH = 9
F_STEPS = 10
F_QUERIES = 11  # checkpoint feedback queries performed
FOLLOW_SIZE = 12

# tracker state layout
K_LOST = 0
K_RANGE = 1
K_BEARING = 2
K_ELAPSED = 3
K_STEPS = 4
TRACK_SIZE = 5

# motion kinds and return codes
TRANSLATE = 0
ROTATE = 1

RUNNING = 0
DONE = 1
STALLED = 2
ARRIVED = 3
LOST = 4

RAMP = 0.1


@njit
def wrap_angle(a):
    if -math.pi < a <= math.pi:
        return a
    r = a - TWO_PI * math.floor((a + math.pi) / TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    elif r > math.pi:
        r -= TWO_PI
    return r


@njit
def trapezoid_velocity(target, v_max, progress):
    ramp = RAMP * target
    if progress <= 0.0 or progress >= target:
        return 0.0
    if progress < ramp:
        return v_max * progress / ramp
    if progress > target - ramp:
        return v_max * (target - progress) / ramp
    return v_max


# ---------------------------------------------------------------------------
# PCA


@njit
def cloud_moments(points):
    n = points.shape[0]
    mean = np.zeros(3)
    for i in range(n):
        for k in range(3):
            mean[k] += points[i, k]
    for k in range(3):
        mean[k] /= n
    cov = np.zeros((3, 3))
    for i in range(n):
        d0 = points[i, 0] - mean[0]
        d1 = points[i, 1] - mean[1]
        d2 = points[i, 2] - mean[2]
        cov[0, 0] += d0 * d0
        cov[0, 1] += d0 * d1
        cov[0, 2] += d0 * d2
        cov[1, 1] += d1 * d1
        cov[1, 2] += d1 * d2
        cov[2, 2] += d2 * d2
    for a in range(3):
        for b in range(a, 3):
            cov[a, b] /= n
            cov[b, a] = cov[a, b]
    return mean, cov


@njit
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit
def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


@njit
def _eigvec_simple(m, value):
    # null vector of (m - value*I) from the largest cross product of its rows
    r0 = np.array([m[0, 0] - value, m[0, 1], m[0, 2]])
    r1 = np.array([m[0, 1], m[1, 1] - value, m[1, 2]])
    r2 = np.array([m[0, 2], m[1, 2], m[2, 2] - value])
    c01 = _cross(r0, r1)
    c02 = _cross(r0, r2)
    c12 = _cross(r1, r2)
    d01 = _dot(c01, c01)
    d02 = _dot(c02, c02)
    d12 = _dot(c12, c12)
    if d01 >= d02 and d01 >= d12:
        return c01 / math.sqrt(d01)
    if d02 >= d12:
        return c02 / math.sqrt(d02)
    return c12 / math.sqrt(d12)


@njit
def _orthogonal_basis(w):
    if abs(w[0]) > abs(w[1]):
        inv = 1.0 / math.sqrt(w[0] * w[0] + w[2] * w[2])
        u = np.array([-w[2] * inv, 0.0, w[0] * inv])
    else:
        inv = 1.0 / math.sqrt(w[1] * w[1] + w[2] * w[2])
        u = np.array([0.0, w[2] * inv, -w[1] * inv])
    v = _cross(w, u)
    return u, v


@njit
def _eigvec_in_plane(m, known, value):
    # eigenvector for `value` restricted to the plane orthogonal to `known`
    u, v = _orthogonal_basis(known)
    mu = m @ u
    mv = m @ v
    m00 = _dot(u, mu) - value
    m01 = _dot(u, mv)
    m11 = _dot(v, mv) - value
    a00 = abs(m00)
    a01 = abs(m01)
    a11 = abs(m11)
    if a00 >= a11:
        big = max(a00, a01)
        if big > 0.0:
            if a00 >= a01:
                m01 /= m00
                m00 = 1.0 / math.sqrt(1.0 + m01 * m01)
                m01 *= m00
            else:
                m00 /= m01
                m01 = 1.0 / math.sqrt(1.0 + m00 * m00)
                m00 *= m01
            return m01 * u - m00 * v
        return u
    big = max(a11, a01)
    if big > 0.0:
        if a11 >= a01:
            m01 /= m11
            m11 = 1.0 / math.sqrt(1.0 + m01 * m01)
            m01 *= m11
        else:
            m11 /= m01
            m01 = 1.0 / math.sqrt(1.0 + m11 * m11)
            m11 *= m01
        return m11 * u - m01 * v
    return u


@njit
def sym3_eigh(a):
    """Closed-form eigen-decomposition of a symmetric 3x3 matrix.

    Eigenvalues come from the trigonometric solution of the characteristic
    cubic; eigenvectors from row cross products, with the second one solved
    in the orthogonal complement of the first so the triad stays orthonormal
    when two eigenvalues are close. Returns ``(values, vectors)`` sorted by
    descending eigenvalue, vectors as columns.
    """
    scale = 0.0
    for i in range(3):
        for j in range(3):
            if abs(a[i, j]) > scale:
                scale = abs(a[i, j])
    values = np.zeros(3)
    vectors = np.eye(3)
    if scale == 0.0:
        return values, vectors
    m = a / scale
    q = (m[0, 0] + m[1, 1] + m[2, 2]) / 3.0
    b00 = m[0, 0] - q
    b11 = m[1, 1] - q
    b22 = m[2, 2] - q
    off = m[0, 1] * m[0, 1] + m[0, 2] * m[0, 2] + m[1, 2] * m[1, 2]
    p = math.sqrt((b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * off) / 6.0)
    if p == 0.0:
        values[:] = q * scale
        return values, vectors
    c00 = b11 * b22 - m[1, 2] * m[1, 2]
    c01 = m[0, 1] * b22 - m[1, 2] * m[0, 2]
    c02 = m[0, 1] * m[1, 2] - b11 * m[0, 2]
    det = (b00 * c00 - m[0, 1] * c01 + m[0, 2] * c02) / (p * p * p)
    half = 0.5 * det
    if half > 1.0:
        half = 1.0
    elif half < -1.0:
        half = -1.0
    angle = math.acos(half) / 3.0
    beta_hi = 2.0 * math.cos(angle)
    beta_lo = 2.0 * math.cos(angle + TWO_PI / 3.0)
    beta_mid = -(beta_lo + beta_hi)
    lam_hi = q + p * beta_hi
    lam_mid = q + p * beta_mid
    lam_lo = q + p * beta_lo
    if half >= 0.0:
        v_hi = _eigvec_simple(m, lam_hi)
        v_mid = _eigvec_in_plane(m, v_hi, lam_mid)
        v_lo = _cross(v_hi, v_mid)
    else:
        v_lo = _eigvec_simple(m, lam_lo)
        v_mid = _eigvec_in_plane(m, v_lo, lam_mid)
        v_hi = _cross(v_mid, v_lo)
    values[0] = lam_hi * scale
    values[1] = lam_mid * scale
    values[2] = lam_lo * scale
    for k in range(3):
        vectors[k, 0] = v_hi[k]
        vectors[k, 1] = v_mid[k]
        vectors[k, 2] = v_lo[k]
    return values, vectors


# ---------------------------------------------------------------------------
# vehicle


@njit
def integrate(s, vx, vy, om, dt):
    """Holonomic body-frame integration of the true pose. Returns metres moved."""
    c = math.cos(s[TTH])
    sn = math.sin(s[TTH])
    dx = (c * vx - sn * vy) * dt
    dy = (sn * vx + c * vy) * dt
    s[TX] += dx
    s[TY] += dy
    s[TTH] = wrap_angle(s[TTH] + om * dt)
    s[VX] = vx
    s[VY] = vy
    s[OM] = om
    s[TIME] += dt
    return math.sqrt(dx * dx + dy * dy)


@njit
def localize(s, ds, dt, freeze_p, freeze_duration, drift_sigma, u, n1, n2):
    """Update the believed pose after the true pose moved ``ds`` metres."""
    s[ODOMETER] += ds
    if drift_sigma > 0.0 and ds > 0.0:
        k = drift_sigma * math.sqrt(ds)
        s[DX] += k * n1
        s[DY] += k * n2
    if s[FREEZE_LEFT] > 0.0:
        s[FREEZE_LEFT] -= dt
        if s[FREEZE_LEFT] > 1e-12:
            return
        s[FREEZE_LEFT] = 0.0
    elif ds > 0.0 and freeze_p > 0.0 and freeze_duration > 0.0:
        if freeze_p >= 1.0:
            p_step = 1.0
        else:
            p_step = -math.expm1(ds * math.log1p(-freeze_p))
        if u < p_step:
            s[FREEZE_LEFT] = freeze_duration
            s[NFREEZE] += 1.0
            return
    s[BX] = s[TX] + s[DX]
    s[BY] = s[TY] + s[DY]
    s[BTH] = s[TTH]


@njit
def advance(s, vx, vy, om, dt, loc, u, n1, n2):
    ds = integrate(s, vx, vy, om, dt)
    localize(s, ds, dt, loc[0], loc[1], loc[2], u, n1, n2)
    return ds


# ---------------------------------------------------------------------------
# profile following


@njit
def follow_init(s, f):
    f[:] = 0.0
    f[F_SX] = s[BX]
    f[F_SY] = s[BY]
    f[F_STH] = s[BTH]
    f[F_PREV_TH] = s[BTH]


@njit
def follow_speed(target, v_max, creep, progress, dt):
    p = progress
    if p < 0.0:
        p = 0.0
    elif p > target:
        p = target
    v = trapezoid_velocity(target, v_max, p)
    if v < creep:
        v = creep
    rem = (target - progress) / dt
    if v > rem:
        v = rem
    return v


@njit
def follow_update(f, target, fb, dt, stall_timeout, speed):
    """Bookkeeping after one emitted command. Returns a status code."""
    f[F_PROGRESS] += speed * dt
    f[F_STEPS] += 1.0
    if abs(fb - f[F_LAST_FB]) > 1e-12:
        f[F_LAST_FB] = fb
        f[F_STALL] = 0.0
    else:
        f[F_STALL] += dt
        if f[F_STALL] >= stall_timeout - 1e-9:
            return STALLED
    if f[F_CP1] == 0.0 and f[F_PROGRESS] >= RAMP * target:
        f[F_CP1] = 1.0
        f[F_QUERIES] += 1.0
        f[F_PROGRESS] = fb
    if f[F_CP2] == 0.0 and f[F_PROGRESS] >= (1.0 - RAMP) * target:
        f[F_CP2] = 1.0
        f[F_QUERIES] += 1.0
        f[F_PROGRESS] = fb
    if f[F_PROGRESS] >= target * (1.0 - 1e-12):
        return DONE
    return RUNNING


@njit
def follow_chunk(
    s, f, target, v_max, creep, kind, ax, ay, dt, stall_timeout, loc, uniforms, normals, n
):
    """Drive one profiled segment for up to ``n`` steps.

    ``kind`` is TRANSLATE (unit body direction ``(ax, ay)``) or ROTATE
    (``ax`` is the turn sign). Feedback progress is measured from the
    believed pose, exactly what a localization query would return.
    Returns ``(status, steps_taken)``.
    """
    if kind == TRANSLATE:
        c = math.cos(f[F_STH])
        sn = math.sin(f[F_STH])
        ex = c * ax - sn * ay
        ey = sn * ax + c * ay
    else:
        ex = 0.0
        ey = 0.0
    for i in range(n):
        v = follow_speed(target, v_max, creep, f[F_PROGRESS], dt)
        if kind == TRANSLATE:
            advance(s, v * ax, v * ay, 0.0, dt, loc, uniforms[i], normals[i, 0], normals[i, 1])
            fb = (s[BX] - f[F_SX]) * ex + (s[BY] - f[F_SY]) * ey
        else:
            advance(s, 0.0, 0.0, ax * v, dt, loc, uniforms[i], normals[i, 0], normals[i, 1])
            f[F_ACC_TH] += wrap_angle(s[BTH] - f[F_PREV_TH])
            f[F_PREV_TH] = s[BTH]
            fb = ax * f[F_ACC_TH]
        status = follow_update(f, target, fb, dt, stall_timeout, v)
        if status != RUNNING:
            s[VX] = 0.0
            s[VY] = 0.0
            s[OM] = 0.0
            return status, i + 1
    return RUNNING, n


# ---------------------------------------------------------------------------
# camera and visual tracking


@njit
def bearing_range(x, y, th, mount_x, mount_y, mount_th, mount_h, px, py, pz):
    """Bearing (positive to the camera's right) and 3D range of a point."""
    c = math.cos(th)
    sn = math.sin(th)
    cx = x + c * mount_x - sn * mount_y
    cy = y + sn * mount_x + c * mount_y
    dx = px - cx
    dy = py - cy
    dz = pz - mount_h
    left = wrap_angle(math.atan2(dy, dx) - (th + mount_th))
    return -left, math.sqrt(dx * dx + dy * dy + dz * dz)


@njit
def is_visible(bearing, rng, fov, max_range):
    half = 0.5 * fov
    return rng > 0.0 and rng <= max_range and -half <= bearing < half


@njit
def track_command(offset, rng, g):
    """Visual-servo command from the normalized horizontal pixel offset.

    ``g`` = (k_lat, k_fwd, k_yaw, v_max, w_max, slow_range, stop_range,
    creep_fraction, fov, near_range). Inside ``[near_range, stop_range]``
    the target counts as reached; closer than ``near_range`` the base backs
    away. Returns ``(vx, vy, omega, arrived)``.
    """
    k_lat = g[0]
    k_fwd = g[1]
    k_yaw = g[2]
    v_max = g[3]
    w_max = g[4]
    slow = g[5]
    stop = g[6]
    creep = g[7] * v_max
    fov = g[8]
    near = g[9]
    vy = -k_lat * v_max * offset
    if vy > v_max:
        vy = v_max
    elif vy < -v_max:
        vy = -v_max
    om = -k_yaw * offset * fov
    if om > w_max:
        om = w_max
    elif om < -w_max:
        om = -w_max
    if rng <= stop:
        if rng >= near:
            return 0.0, vy, om, True
        vx = -k_fwd * (stop - rng)
        if vx > -creep:
            vx = -creep
        elif vx < -v_max:
            vx = -v_max
        return vx, vy, om, False
    if rng >= slow:
        vx = min(v_max, k_fwd * rng)
    else:
        vx = min(v_max, k_fwd * slow) * (rng - stop) / (slow - stop)
        if vx < creep:
            vx = creep
    return vx, vy, om, False


@njit
def track_chunk(s, k, target, cam, g, lost_timeout, max_time, dt, loc, uniforms, normals, n):
    """Close the visual tracking loop for up to ``n`` steps.

    ``cam`` = (mount_x, mount_y, mount_th, mount_h, fov, max_range).
    Returns ``(status, steps_taken)`` with status ARRIVED, LOST or RUNNING.
    """
    for i in range(n):
        b, r = bearing_range(
            s[TX], s[TY], s[TTH], cam[0], cam[1], cam[2], cam[3], target[0], target[1], target[2]
        )
        if is_visible(b, r, cam[4], cam[5]):
            k[K_LOST] = 0.0
            k[K_RANGE] = r
            k[K_BEARING] = b
            vx, vy, om, arrived = track_command(b / cam[4], r, g)
            if arrived:
                s[VX] = 0.0
                s[VY] = 0.0
                s[OM] = 0.0
                return ARRIVED, i
        else:
            k[K_LOST] += dt
            if k[K_LOST] > lost_timeout:
                return LOST, i
            vx = 0.0
            vy = 0.0
            om = 0.0
        if k[K_ELAPSED] >= max_time:
            return LOST, i
        advance(s, vx, vy, om, dt, loc, uniforms[i], normals[i, 0], normals[i, 1])
        k[K_ELAPSED] += dt
        k[K_STEPS] += 1.0
    return RUNNING, n
