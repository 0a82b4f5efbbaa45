"""Pure-Python Dormand-Prince 5(4) transport of a matrix ODE along one segment.

Mirrors ``_rk_kernel.pyx`` exactly (same signature, same step control);
used when the compiled extension is not available.
"""

import math

import numpy as np

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_MAXSTEPS = 2


def _geometry(kind, p0, p1, center, radius, th0, th1):
    if kind == 0:
        d = p1 - p0

        def point(s):
            return p0 + d * s, d

        return point, abs(d)
    sweep = th1 - th0

    def point(s):
        t = center + radius * complex(math.cos(th0 + sweep * s), math.sin(th0 + sweep * s))
        return t, 1j * sweep * (t - center)

    return point, radius * abs(sweep)


def _rhs(point, coeffs, sings, s, y):
    t, dt = point(s)
    a = coeffs[-1]
    for p in range(coeffs.shape[0] - 2, -1, -1):
        a = a * t + coeffs[p]
    f = 1.0 + 0j
    for z in sings:
        f *= t - z
    return (a @ y) * (dt / f)


def transport(core, kind, p0, p1, center, radius, th0, th1, coeffs, sings,
              tol, h0, hmin, max_steps, record):
    """Integrate Y' = B(t(s)) t'(s) Y for s in [0, 1].

    Returns ``(core, log_add, n_accepted, n_rejected, status, grid)`` where
    the represented result is ``exp(log_add) * core`` and ``grid`` holds the
    accepted step boundaries when ``record`` is true.
    """
    y = np.array(core, dtype=complex)
    coeffs = np.asarray(coeffs, dtype=complex)
    sings = np.asarray(sings, dtype=complex)
    point, length = _geometry(kind, p0, p1, center, radius, th0, th1)
    f = lambda s, v: _rhs(point, coeffs, sings, s, v)  # noqa: E731
    log_add = 0.0
    s = 0.0
    h = min(h0, 1.0)
    nacc = nrej = 0
    prev_ratio = 1e-4
    grid = [0.0] if record else None
    k1 = f(s, y)
    while s < 1.0:
        if nacc + nrej >= max_steps:
            return y, log_add, nacc, nrej, STATUS_MAXSTEPS, grid
        if h < hmin:
            return y, log_add, nacc, nrej, STATUS_UNDERFLOW, grid
        last = s + h >= 1.0
        if last:
            h = 1.0 - s
        k2 = f(s + C2 * h, y + h * (A21 * k1))
        k3 = f(s + C3 * h, y + h * (A31 * k1 + A32 * k2))
        k4 = f(s + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = f(s + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = f(s + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        ynew = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = f(s + h, ynew)
        errm = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        scale = max(np.abs(y).max(), np.abs(ynew).max(), 1e-300)
        err = np.abs(errm).max() / scale
        allowed = tol * max(length * h, 1e-300)
        ratio = err / allowed
        if ratio <= 1.0:
            s = 1.0 if last else s + h
            y = ynew
            k1 = k7
            nacc += 1
            if record:
                grid.append(s)
            m = np.abs(y).max()
            if m > 2.0 or m < 0.5:
                y = y / m
                k1 = k1 / m
                log_add += math.log(m)
            fac = 0.9 * max(ratio, 1e-10) ** (-0.7 / 5) * prev_ratio ** (0.4 / 5)
            fac = min(5.0, max(0.2, fac))
            prev_ratio = max(ratio, 1e-4)
            h *= fac
        else:
            nrej += 1
            h *= max(0.2, 0.9 * ratio ** (-1 / 5))
    return y, log_add, nacc, nrej, STATUS_OK, grid


def transport_fixed(core, kind, p0, p1, center, radius, th0, th1, coeffs, sings, grid):
    """Same scheme on a prescribed step grid, no error control."""
    y = np.array(core, dtype=complex)
    coeffs = np.asarray(coeffs, dtype=complex)
    sings = np.asarray(sings, dtype=complex)
    point, _ = _geometry(kind, p0, p1, center, radius, th0, th1)
    f = lambda s, v: _rhs(point, coeffs, sings, s, v)  # noqa: E731
    log_add = 0.0
    for i in range(len(grid) - 1):
        s = grid[i]
        h = grid[i + 1] - s
        k1 = f(s, y)
        k2 = f(s + C2 * h, y + h * (A21 * k1))
        k3 = f(s + C3 * h, y + h * (A31 * k1 + A32 * k2))
        k4 = f(s + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = f(s + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = f(s + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        y = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        m = np.abs(y).max()
        if m > 2.0 or m < 0.5:
            y = y / m
            log_add += math.log(m)
    return y, log_add
