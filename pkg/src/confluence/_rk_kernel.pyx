# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dormand-Prince 5(4) transport of a matrix ODE along one segment.

Same contract as ``_rk_fallback``; see that module for the argument list.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, log, fabs, pow

cnp.import_array()

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920
cdef double E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40


cdef struct Geom:
    int kind
    double complex p0
    double complex d
    double complex center
    double radius
    double th0
    double sweep


cdef inline double cabs_(double complex z) nogil:
    return (z.real * z.real + z.imag * z.imag) ** 0.5


cdef inline void geom_point(Geom* g, double s, double complex* t, double complex* dt) nogil:
    cdef double th
    if g.kind == 0:
        t[0] = g.p0 + g.d * s
        dt[0] = g.d
    else:
        th = g.th0 + g.sweep * s
        t[0] = g.center + g.radius * (cos(th) + 1j * sin(th))
        dt[0] = 1j * g.sweep * (t[0] - g.center)


cdef void rhs(Geom* g, double complex[:, :, ::1] coeffs, double complex[::1] sings,
              double s, double complex[:, ::1] y, double complex[:, ::1] a,
              double complex[:, ::1] out) nogil:
    cdef double complex t, dt, f, fac, acc
    cdef Py_ssize_t n = y.shape[0], P = coeffs.shape[0], i, j, k, p
    geom_point(g, s, &t, &dt)
    for i in range(n):
        for j in range(n):
            a[i, j] = coeffs[P - 1, i, j]
    for p in range(P - 2, -1, -1):
        for i in range(n):
            for j in range(n):
                a[i, j] = a[i, j] * t + coeffs[p, i, j]
    f = 1.0
    for k in range(sings.shape[0]):
        f = f * (t - sings[k])
    fac = dt / f
    for i in range(n):
        for j in range(n):
            acc = 0
            for k in range(n):
                acc = acc + a[i, k] * y[k, j]
            out[i, j] = acc * fac


cdef inline double maxabs(double complex[:, ::1] y) nogil:
    cdef double m = 0, v
    cdef Py_ssize_t i, j
    for i in range(y.shape[0]):
        for j in range(y.shape[1]):
            v = cabs_(y[i, j])
            if v > m:
                m = v
    return m


cdef void stages(Geom* g, double complex[:, :, ::1] coeffs, double complex[::1] sings,
                 double s, double h, double complex[:, ::1] y, double complex[:, :, ::1] k,
                 double complex[:, ::1] tmp, double complex[:, ::1] a,
                 double complex[:, ::1] ynew) nogil:
    # k[0] must hold f(s, y) on entry; fills k[1..5] and ynew
    cdef Py_ssize_t n = y.shape[0], i, j
    for i in range(n):
        for j in range(n):
            tmp[i, j] = y[i, j] + h * (A21 * k[0, i, j])
    rhs(g, coeffs, sings, s + C2 * h, tmp, a, k[1])
    for i in range(n):
        for j in range(n):
            tmp[i, j] = y[i, j] + h * (A31 * k[0, i, j] + A32 * k[1, i, j])
    rhs(g, coeffs, sings, s + C3 * h, tmp, a, k[2])
    for i in range(n):
        for j in range(n):
            tmp[i, j] = y[i, j] + h * (A41 * k[0, i, j] + A42 * k[1, i, j] + A43 * k[2, i, j])
    rhs(g, coeffs, sings, s + C4 * h, tmp, a, k[3])
    for i in range(n):
        for j in range(n):
            tmp[i, j] = y[i, j] + h * (A51 * k[0, i, j] + A52 * k[1, i, j]
                                       + A53 * k[2, i, j] + A54 * k[3, i, j])
    rhs(g, coeffs, sings, s + C5 * h, tmp, a, k[4])
    for i in range(n):
        for j in range(n):
            tmp[i, j] = y[i, j] + h * (A61 * k[0, i, j] + A62 * k[1, i, j] + A63 * k[2, i, j]
                                       + A64 * k[3, i, j] + A65 * k[4, i, j])
    rhs(g, coeffs, sings, s + h, tmp, a, k[5])
    for i in range(n):
        for j in range(n):
            ynew[i, j] = y[i, j] + h * (B1 * k[0, i, j] + B3 * k[2, i, j] + B4 * k[3, i, j]
                                        + B5 * k[4, i, j] + B6 * k[5, i, j])


cdef Geom make_geom(int kind, double complex p0, double complex p1, double complex center,
                    double radius, double th0, double th1):
    cdef Geom g
    g.kind = kind
    g.p0 = p0
    g.d = p1 - p0
    g.center = center
    g.radius = radius
    g.th0 = th0
    g.sweep = th1 - th0
    return g


def transport(core, int kind, double complex p0, double complex p1, double complex center,
              double radius, double th0, double th1, coeffs, sings, double tol, double h0,
              double hmin, long max_steps, bint record):
    cdef double complex[:, ::1] y = np.array(core, dtype=np.complex128, order="C")
    cdef double complex[:, :, ::1] cf = np.ascontiguousarray(coeffs, dtype=np.complex128)
    cdef double complex[::1] sg = np.ascontiguousarray(sings, dtype=np.complex128)
    cdef Py_ssize_t n = y.shape[0], i, j
    cdef double complex[:, :, ::1] k = np.zeros((7, n, n), dtype=np.complex128)
    cdef double complex[:, ::1] tmp = np.zeros((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] a = np.zeros((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] ynew = np.zeros((n, n), dtype=np.complex128)
    cdef Geom g = make_geom(kind, p0, p1, center, radius, th0, th1)
    cdef double length = cabs_(p1 - p0) if kind == 0 else radius * fabs(th1 - th0)
    cdef double s = 0.0, h = h0 if h0 < 1.0 else 1.0, err, scale, ratio, fac, m, v, prev_ratio = 1e-4
    cdef long nacc = 0, nrej = 0
    cdef double log_add = 0.0
    cdef bint last
    cdef double complex e
    grid = [0.0] if record else None
    rhs(&g, cf, sg, s, y, a, k[0])
    while s < 1.0:
        if nacc + nrej >= max_steps:
            return np.asarray(y), log_add, nacc, nrej, 2, grid
        if h < hmin:
            return np.asarray(y), log_add, nacc, nrej, 1, grid
        last = s + h >= 1.0
        if last:
            h = 1.0 - s
        stages(&g, cf, sg, s, h, y, k, tmp, a, ynew)
        rhs(&g, cf, sg, s + h, ynew, a, k[6])
        err = 0
        for i in range(n):
            for j in range(n):
                e = h * (E1 * k[0, i, j] + E3 * k[2, i, j] + E4 * k[3, i, j]
                         + E5 * k[4, i, j] + E6 * k[5, i, j] + E7 * k[6, i, j])
                v = cabs_(e)
                if v > err:
                    err = v
        scale = maxabs(y)
        v = maxabs(ynew)
        if v > scale:
            scale = v
        if scale < 1e-300:
            scale = 1e-300
        v = length * h
        if v < 1e-300:
            v = 1e-300
        ratio = err / scale / (tol * v)
        if ratio <= 1.0:
            s = 1.0 if last else s + h
            nacc += 1
            for i in range(n):
                for j in range(n):
                    y[i, j] = ynew[i, j]
                    k[0, i, j] = k[6, i, j]
            if record:
                grid.append(s)
            m = maxabs(y)
            if m > 2.0 or m < 0.5:
                for i in range(n):
                    for j in range(n):
                        y[i, j] = y[i, j] / m
                        k[0, i, j] = k[0, i, j] / m
                log_add += log(m)
            v = ratio if ratio > 1e-10 else 1e-10
            fac = 0.9 * pow(v, -0.7 / 5) * pow(prev_ratio, 0.4 / 5)
            if fac > 5.0:
                fac = 5.0
            if fac < 0.2:
                fac = 0.2
            prev_ratio = ratio if ratio > 1e-4 else 1e-4
            h *= fac
        else:
            nrej += 1
            fac = 0.9 * pow(ratio, -0.2)
            if fac < 0.2:
                fac = 0.2
            h *= fac
    return np.asarray(y), log_add, nacc, nrej, 0, grid


def transport_fixed(core, int kind, double complex p0, double complex p1, double complex center,
                    double radius, double th0, double th1, coeffs, sings, grid):
    cdef double complex[:, ::1] y = np.array(core, dtype=np.complex128, order="C")
    cdef double complex[:, :, ::1] cf = np.ascontiguousarray(coeffs, dtype=np.complex128)
    cdef double complex[::1] sg = np.ascontiguousarray(sings, dtype=np.complex128)
    cdef double[::1] gr = np.ascontiguousarray(grid, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0], i, j, q
    cdef double complex[:, :, ::1] k = np.zeros((7, n, n), dtype=np.complex128)
    cdef double complex[:, ::1] tmp = np.zeros((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] a = np.zeros((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] ynew = np.zeros((n, n), dtype=np.complex128)
    cdef Geom g = make_geom(kind, p0, p1, center, radius, th0, th1)
    cdef double s, h, m, log_add = 0.0
    for q in range(gr.shape[0] - 1):
        s = gr[q]
        h = gr[q + 1] - s
        rhs(&g, cf, sg, s, y, a, k[0])
        stages(&g, cf, sg, s, h, y, k, tmp, a, ynew)
        m = maxabs(ynew)
        if m > 2.0 or m < 0.5:
            for i in range(n):
                for j in range(n):
                    y[i, j] = ynew[i, j] / m
            log_add += log(m)
        else:
            for i in range(n):
                for j in range(n):
                    y[i, j] = ynew[i, j]
    return np.asarray(y), log_add
