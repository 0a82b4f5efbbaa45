"""Transport of fundamental matrix solutions of z' = B(t) z along paths in C.

The hot loop (one Dormand-Prince 5(4) sweep over a segment) lives in the
compiled ``_rk_kernel`` extension; ``_rk_fallback`` is a line-by-line pure
Python mirror that is selected when the extension is missing or when
``CONFLUENCE_BACKEND=python`` is set.
"""

import math
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import PathTooCloseToSingularity, StepUnderflow
from . import _rk_fallback

try:
    if os.environ.get("CONFLUENCE_BACKEND", "").lower() == "python":
        raise ImportError("fallback forced")
    from . import _rk_kernel as _kernel

    BACKEND = "cython"
except ImportError:
    _kernel = _rk_fallback
    BACKEND = "python"


def set_backend(name):
    """Switch between ``"cython"`` and ``"python"`` kernels; returns the previous name."""
    global _kernel, BACKEND
    prev = BACKEND
    if name == "python":
        _kernel, BACKEND = _rk_fallback, "python"
    elif name == "cython":
        from . import _rk_kernel

        _kernel, BACKEND = _rk_kernel, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")
    return prev


# -- paths -------------------------------------------------------------------

_SNAP = 1e-12


@dataclass(frozen=True)
class PathSegment:
    """A straight segment or a circular arc.

    Arc angles are stored in units of pi (``th0``, ``th1``) so that common
    angles such as 1/2 or 5/2 are exact and a precise re-evaluation can close
    circles exactly. ``theta0`` and ``theta1`` give radians.
    """

    kind: str
    start: complex
    end: complex
    center: complex = 0j
    radius: float = 0.0
    th0: float = 0.0
    th1: float = 0.0

    def __post_init__(self):
        if self.kind == "line":
            if abs(self.end - self.start) == 0:
                raise ValueError("zero-length segment")
        elif self.kind == "arc":
            if not self.radius > 0:
                raise ValueError("arc radius must be positive")
            if self.th0 == self.th1:
                raise ValueError("zero-length arc")
        else:
            raise ValueError(f"unknown segment kind {self.kind!r}")

    @classmethod
    def line(cls, a, b):
        return cls("line", complex(a), complex(b))

    @classmethod
    def arc(cls, center, radius, th0, th1):
        """Arc from angle ``th0*pi`` to ``th1*pi``; counterclockwise iff th1 > th0."""
        center = complex(center)
        radius = float(radius)
        start = center + radius * _cis_pi(th0)
        end = center + radius * _cis_pi(th1)
        return cls("arc", start, end, center, radius, float(th0), float(th1))

    @property
    def theta0(self):
        return math.pi * self.th0

    @property
    def theta1(self):
        return math.pi * self.th1

    @property
    def orientation(self):
        return 1 if self.th1 > self.th0 else -1

    @property
    def length(self):
        if self.kind == "line":
            return abs(self.end - self.start)
        return self.radius * math.pi * abs(self.th1 - self.th0)

    def reversed(self):
        if self.kind == "line":
            return PathSegment("line", self.end, self.start)
        return PathSegment("arc", self.end, self.start, self.center, self.radius, self.th1, self.th0)

    def distance_to(self, z):
        """Euclidean distance from the point ``z`` to the segment."""
        if self.kind == "line":
            d = self.end - self.start
            s = ((z - self.start) * d.conjugate()).real / abs(d) ** 2
            s = min(1.0, max(0.0, s))
            return abs(self.start + s * d - z)
        w = z - self.center
        if abs(self.th1 - self.th0) >= 2 or abs(w) == 0:
            return abs(abs(w) - self.radius)
        lo, hi = sorted((self.th0, self.th1))
        phi = math.atan2(w.imag, w.real) / math.pi
        phi = lo + (phi - lo) % 2
        if phi <= hi:
            return abs(abs(w) - self.radius)
        return min(abs(z - self.start), abs(z - self.end))

    def _kernel_args(self):
        if self.kind == "line":
            return 0, self.start, self.end, 0j, 0.0, 0.0, 0.0
        return 1, self.start, self.end, self.center, self.radius, self.theta0, self.theta1


def _cis_pi(x):
    # exact at multiples of 1/2
    r = x % 2
    table = {0.0: 1 + 0j, 0.5: 1j, 1.0: -1 + 0j, 1.5: -1j}
    if r in table:
        return table[r]
    return complex(math.cos(math.pi * x), math.sin(math.pi * x))


@dataclass(frozen=True)
class Path:
    """Concatenation of segments; traversal order is list order."""

    segments: tuple
    loop: bool = False

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("empty path")
        for a, b in zip(segs[:-1], segs[1:]):
            if abs(a.end - b.start) > _SNAP * (1 + abs(b.start)):
                raise ValueError(f"segments do not join: {a.end} vs {b.start}")
        object.__setattr__(self, "segments", segs)
        if self.loop and abs(segs[-1].end - segs[0].start) > _SNAP * (1 + abs(segs[0].start)):
            raise ValueError("loop does not return to its basepoint")

    @property
    def basepoint(self):
        return self.segments[0].start

    @property
    def end(self):
        return self.segments[-1].end

    @property
    def length(self):
        return sum(s.length for s in self.segments)

    def __add__(self, other):
        """``p + q`` traverses p first, then q."""
        segs = self.segments + other.segments
        closes = abs(segs[-1].end - segs[0].start) <= _SNAP * (1 + abs(segs[0].start))
        return Path(segs, loop=closes)

    def reversed(self):
        return Path(tuple(s.reversed() for s in reversed(self.segments)), loop=self.loop)

    def distance_to(self, z):
        return min(s.distance_to(z) for s in self.segments)

    @classmethod
    def line(cls, a, b):
        return cls((PathSegment.line(a, b),))

    @classmethod
    def arc(cls, center, radius, th0, th1):
        return cls((PathSegment.arc(center, radius, th0, th1),), loop=abs(th1 - th0) == 2)

    @classmethod
    def circle(cls, center, radius, start=0.0, orientation=1):
        """Full circle starting at angle ``start*pi``."""
        return cls.arc(center, radius, start, start + 2 * orientation)

    @classmethod
    def polyline(cls, points):
        pts = [complex(p) for p in points]
        return cls(tuple(PathSegment.line(a, b) for a, b in zip(pts[:-1], pts[1:])))


# -- scaled matrices -----------------------------------------------------------


@dataclass(frozen=True)
class ScaledMatrix:
    """Represents ``exp(log_scale) * core`` with ``max|core|`` kept in [1/2, 2]."""

    core: np.ndarray
    log_scale: complex = 0j
    stats: dict = dc_field(default=None, compare=False, repr=False)

    @classmethod
    def from_array(cls, a, log_scale=0j):
        return cls(np.asarray(a, dtype=complex), complex(log_scale)).normalized()

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n, dtype=complex), 0j)

    @property
    def n(self):
        return self.core.shape[0]

    def normalized(self):
        m = np.abs(self.core).max()
        if m == 0 or 0.5 <= m <= 2.0:
            return self
        return ScaledMatrix(self.core / m, self.log_scale + math.log(m), self.stats)

    def to_array(self):
        return self.core * np.exp(self.log_scale)

    def __matmul__(self, other):
        return compose(self, other)

    def inverse(self):
        return ScaledMatrix(np.linalg.inv(self.core), -self.log_scale).normalized()

    def log_det(self):
        sign, logabs = np.linalg.slogdet(self.core)
        return logabs + np.log(sign) + self.n * self.log_scale

    def distance(self, other, relative=True):
        """Max-norm distance of the represented matrices after aligning scales."""
        a = self.normalized()
        b = other.normalized()
        shift = b.log_scale - a.log_scale
        if shift.real > 0:
            a, b, shift = b, a, -shift
        # |b| <= |a| in scale: express b in a's scale
        diff = a.core - b.core * np.exp(shift)
        d = np.abs(diff).max()
        if relative:
            return d / np.abs(a.core).max()
        return d * math.exp(a.log_scale.real)


def compose(left, right):
    """Product ``left @ right`` of two ScaledMatrix values."""
    if left.core.shape[1] != right.core.shape[0]:
        raise ValueError(f"dimension mismatch {left.core.shape} @ {right.core.shape}")
    return ScaledMatrix(left.core @ right.core, left.log_scale + right.log_scale).normalized()


# -- coefficient fields -------------------------------------------------------


@dataclass(frozen=True)
class CoefficientField:
    """B(t) = A(t) / prod(t - s_k) with A polynomial: ``coeffs[p]`` multiplies t**p."""

    coeffs: np.ndarray
    singularities: tuple

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValueError("coeffs must have shape (P, n, n)")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "singularities", tuple(complex(s) for s in self.singularities))

    @property
    def n(self):
        return self.coeffs.shape[1]

    @property
    def d_min(self):
        """Default clearance: an eighth of the smallest singularity separation."""
        s = self.singularities
        gaps = [abs(a - b) for i, a in enumerate(s) for b in s[i + 1:] if a != b]
        return min(gaps) / 8 if gaps else 0.0

    def A(self, t):
        a = self.coeffs[-1]
        for p in range(self.coeffs.shape[0] - 2, -1, -1):
            a = a * t + self.coeffs[p]
        return a

    def __call__(self, t):
        f = 1 + 0j
        for s in self.singularities:
            if t == s:
                raise PathTooCloseToSingularity(f"evaluation at singular point {s}")
            f *= t - s
        return self.A(t) / f

    def trace_integrand(self, t):
        return np.trace(self(t))


# -- transport ----------------------------------------------------------------


def _check_clearance(field, path, d_min):
    for s in field.singularities:
        d = path.distance_to(s)
        if d < d_min or d == 0:
            raise PathTooCloseToSingularity(f"distance {d:.3e} to {s} below d_min {d_min:.3e}")


def transfer_matrix(field, path, tol=1e-10, d_min=None, self_check=False,
                    h0=0.02, hmin=1e-13, max_steps=2_000_000):
    """Transfer matrix F with z(end) = F z(start) along ``path``.

    With ``self_check`` the whole path is re-integrated on the accepted grid
    with every step halved; the relative deviation is stored in
    ``result.stats["self_check"]``.
    """
    d_min = field.d_min if d_min is None else d_min
    _check_clearance(field, path, d_min)
    n = field.n
    core = np.eye(n, dtype=complex)
    log_scale = 0j
    sings = np.array(field.singularities, dtype=complex)
    nacc = nrej = 0
    grids = []
    for seg in path.segments:
        args = seg._kernel_args()
        core, log_add, a, r, status, grid = _kernel.transport(
            core, *args, field.coeffs, sings, tol, h0, hmin, max_steps, self_check)
        nacc += a
        nrej += r
        if status == _rk_fallback.STATUS_UNDERFLOW:
            raise StepUnderflow(f"step below {hmin} on {seg.kind} segment from {seg.start}")
        if status == _rk_fallback.STATUS_MAXSTEPS:
            raise StepUnderflow(f"more than {max_steps} steps on segment from {seg.start}")
        log_scale += log_add
        grids.append(grid)
    stats = {"accepted": nacc, "rejected": nrej, "backend": BACKEND}
    out = ScaledMatrix(np.asarray(core), log_scale, stats).normalized()
    if self_check:
        half = _rerun_half(field, path, grids)
        stats["self_check"] = out.distance(half)
    return ScaledMatrix(out.core, out.log_scale, stats)


def _rerun_half(field, path, grids):
    core = np.eye(field.n, dtype=complex)
    log_scale = 0j
    sings = np.array(field.singularities, dtype=complex)
    for seg, grid in zip(path.segments, grids):
        g = np.asarray(grid)
        fine = np.empty(2 * len(g) - 1)
        fine[0::2] = g
        fine[1::2] = 0.5 * (g[:-1] + g[1:])
        core, log_add = _kernel.transport_fixed(core, *seg._kernel_args(), field.coeffs, sings, fine)
        log_scale += log_add
    return ScaledMatrix(np.asarray(core), log_scale).normalized()


def trace_integral(field, path, **quad_kw):
    """Independent scalar quadrature of the integral of tr B(t) dt along ``path``."""
    from scipy.integrate import quad

    total = 0j
    for seg in path.segments:
        if seg.kind == "line":
            d = seg.end - seg.start

            def g(s, seg=seg, d=d):
                return field.trace_integrand(seg.start + s * d) * d
        else:
            sweep = seg.theta1 - seg.theta0

            def g(s, seg=seg, sweep=sweep):
                t = seg.center + seg.radius * np.exp(1j * (seg.theta0 + sweep * s))
                return field.trace_integrand(t) * 1j * sweep * (t - seg.center)
        kw = dict(limit=400, epsabs=0, epsrel=1e-12)
        kw.update(quad_kw)
        re = quad(lambda s: g(s).real, 0, 1, **kw)[0]
        im = quad(lambda s: g(s).imag, 0, 1, **kw)[0]
        total += re + 1j * im
    return total
