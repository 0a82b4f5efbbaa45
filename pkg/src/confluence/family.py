"""Confluent families z' = A(t, eps) / ((t - a0)(t - a1)) z with a0 = c eps = -a1.

Also: dividing rays, good sectors, genericity, associated sectors, the
monodromy loops based at t0, and the plain-text family file format.
"""

import cmath
import math
from dataclasses import dataclass

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .errors import (BasePointOnSingularLine, DegenerateRoots, LabelUndefined,
                     NotGeneric, ParseError)
from .integrator import CoefficientField, Path, PathSegment
from .precise import PreciseField

TWO_PI = 2 * math.pi
_ANGLE_TOL = 1e-12


# -- the family ---------------------------------------------------------------


class ConfluentFamily:
    """Family of Poincare rank one with a quadratic denominator.

    ``terms`` maps ``(p, q)`` to the n x n matrix multiplying ``t**p eps**q``.
    ``Lambda`` fixes the numbering of the eigenvalues of A(0, 0); it is
    computed when omitted.
    """

    k = 1

    def __init__(self, terms, alphac, Lambda=None, name=""):
        self.terms = {(int(p), int(q)): np.array(m, dtype=complex) for (p, q), m in terms.items()}
        shapes = {m.shape for m in self.terms.values()}
        if len(shapes) != 1:
            raise ValueError("all coefficient matrices must share one shape")
        (shape,) = shapes
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError("coefficient matrices must be square")
        self.n = shape[0]
        self.alphac = complex(alphac)
        self.name = name
        if Lambda is None:
            Lambda = np.linalg.eigvals(self.A0)
            Lambda = sorted(Lambda, key=lambda z: (-z.real, -z.imag))
        self.Lambda = tuple(complex(x) for x in Lambda)
        if len(self.Lambda) != self.n:
            raise ValueError("Lambda must have n entries")

    @property
    def degree(self):
        return max(p for p, _ in self.terms)

    @property
    def A0(self):
        """A(0, 0)."""
        return self.terms.get((0, 0), np.zeros((self.n, self.n), complex))

    def coeffs(self, eps):
        """t-power coefficients of A(t, eps), shape (P, n, n)."""
        out = np.zeros((self.degree + 1, self.n, self.n), complex)
        for (p, q), m in self.terms.items():
            out[p] += m * eps ** q
        return out

    def coeffs_mp(self, eps):
        """Same in the active gmpy2 precision, with eps taken exactly."""
        e = mpfr(eps)
        out = [[[mpc(0)] * self.n for _ in range(self.n)] for _ in range(self.degree + 1)]
        for (p, q), m in self.terms.items():
            f = e ** q
            for i in range(self.n):
                for j in range(self.n):
                    out[p][i][j] += mpc(m[i, j].real, m[i, j].imag) * f
        return out

    def A(self, t, eps):
        c = self.coeffs(eps)
        a = c[-1]
        for p in range(c.shape[0] - 2, -1, -1):
            a = a * t + c[p]
        return a

    def alpha0(self, eps):
        return singularities(self, eps)[0]

    def alpha1(self, eps):
        return singularities(self, eps)[1]

    def field(self, eps):
        return CoefficientField(self.coeffs(eps), singularities(self, eps))

    def precise_field(self, eps, bits):
        """Field for the Taylor engine; coefficients and poles built at ``bits``."""
        singularities(self, eps)
        with gmpy2.context(gmpy2.get_context(), precision=bits):
            c = mpc(self.alphac.real, self.alphac.imag)
            if c.imag < 0:
                c = -c
            a0 = c * mpfr(eps)
            return PreciseField(self.coeffs_mp(eps), (a0, -a0))

    def unperturbed_field(self):
        return CoefficientField(self.coeffs(0.0), (0j, 0j))

    def unperturbed_coeffs(self):
        return self.coeffs(0.0)

    def normalized(self):
        """Equivalent family with A(0,0) diagonal, lambda_1 - lambda_2 > 0 (n = 2).

        Returns ``(family, omega)``: the substitution t = omega * s maps the
        new family back to the old one, and a constant gauge diagonalizes A(0,0).
        """
        lam, vecs = np.linalg.eig(self.A0)
        order = [int(np.argmin(np.abs(lam - x))) for x in self.Lambda]
        vecs = vecs[:, order]
        lam = lam[order]
        vinv = np.linalg.inv(vecs)
        d = lam[0] - lam[1]
        omega = d / abs(d)
        terms = {}
        for (p, q), m in self.terms.items():
            terms[(p, q)] = vinv @ m @ vecs * omega ** (p - 1)
        new_lam = [x / omega for x in lam]
        c = self.alphac / omega
        if c.imag < 0:
            c = -c
        return ConfluentFamily(terms, c, new_lam, self.name), omega

    def __repr__(self):
        return f"ConfluentFamily(n={self.n}, alphac={self.alphac}, Lambda={self.Lambda})"


def euler_family():
    """A = diag(1, -1), a0 = i eps: diagonal, hence trivial Stokes data."""
    return ConfluentFamily({(0, 0): np.diag([1, -1])}, 1j, (1, -1), name="euler")


def coupled_family(c, cp=0.0):
    """A = diag(1, -1) + t (c E21 + cp E12), a0 = i eps.

    ``coupled_family(c)`` is the triangular family T2 and
    ``coupled_family(0.3, 0.3)`` the symmetric family T3.
    """
    terms = {(0, 0): np.diag([1, -1]), (1, 0): np.array([[0, cp], [c, 0]])}
    return ConfluentFamily(terms, 1j, (1, -1), name=f"coupled({c},{cp})")


# -- singularities ------------------------------------------------------------


def singularities(fam, eps):
    """(a0, a1) labelled so that Im a0 > 0 > Im a1."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    c = fam.alphac
    if c == 0:
        raise DegenerateRoots(f"a0 = a1 = 0 at eps={eps}")
    if c.imag == 0:
        raise LabelUndefined(f"both roots real at eps={eps}")
    a = c * eps
    return (a, -a) if a.imag > 0 else (-a, a)


# -- rays and sectors ---------------------------------------------------------


@dataclass(frozen=True)
class Ray:
    angle: float
    kind: str
    pair: tuple


def _check_distinct(Lambda):
    for i, a in enumerate(Lambda):
        for b in Lambda[i + 1:]:
            if abs(a - b) == 0:
                raise ValueError("eigenvalues must be pairwise distinct")


def dividing_rays(k, Lambda, kind):
    """Imaginary rays solve Re((l_j - l_i)/t^k) = 0, real rays Im(...) = 0."""
    if kind not in ("imaginary", "real"):
        raise ValueError("kind is 'imaginary' or 'real'")
    Lambda = [complex(x) for x in Lambda]
    _check_distinct(Lambda)
    out = []
    for i in range(len(Lambda)):
        for j in range(i + 1, len(Lambda)):
            base = cmath.phase(Lambda[j] - Lambda[i])
            if kind == "imaginary":
                base += math.pi / 2
            for m in range(2 * k):
                th = ((base + m * math.pi) / k) % TWO_PI
                if TWO_PI - th < _ANGLE_TOL:
                    th = 0.0
                out.append(Ray(th, kind, (i + 1, j + 1)))
    return sorted(out, key=lambda r: (r.angle, r.pair))


@dataclass(frozen=True)
class Sector:
    """Open sector {0 < |t| < radius, theta1 < arg t < theta2}."""

    theta1: float
    theta2: float
    radius: float = 1.0

    def __post_init__(self):
        for name in ("theta1", "theta2", "radius"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not 0 < self.theta2 - self.theta1 < TWO_PI:
            raise ValueError("need 0 < theta2 - theta1 < 2 pi")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def width(self):
        return self.theta2 - self.theta1

    @property
    def bisector(self):
        return 0.5 * (self.theta1 + self.theta2)

    def _lift(self, angle):
        return self.theta1 + (angle - self.theta1) % TWO_PI

    def contains_angle(self, angle, closed=False):
        a = self._lift(angle)
        if closed:
            return a <= self.theta2 + _ANGLE_TOL or a >= self.theta1 + TWO_PI - _ANGLE_TOL
        return self.theta1 + _ANGLE_TOL < a < self.theta2 - _ANGLE_TOL

    def contains(self, z, closed=False):
        z = complex(z)
        if z == 0 or abs(z) >= self.radius:
            return False
        return self.contains_angle(math.atan2(z.imag, z.real), closed)


@dataclass(frozen=True)
class SlitSector:
    """Sector with the segment [a0, a1] removed."""

    base: Sector
    a0: complex
    a1: complex

    def contains(self, z):
        if not self.base.contains(z):
            return False
        seg = PathSegment.line(self.a0, self.a1)
        return seg.distance_to(complex(z)) > 0


def is_good_sector(s, k, Lambda):
    """Each pair has exactly one imaginary dividing ray in the sector and in its closure."""
    rays = dividing_rays(k, Lambda, "imaginary")
    pairs = sorted({r.pair for r in rays})
    for pr in pairs:
        mine = [r.angle for r in rays if r.pair == pr]
        inside = sum(s.contains_angle(a) for a in mine)
        closure = sum(s.contains_angle(a, closed=True) for a in mine)
        if inside != 1 or closure != 1:
            return False
    return True


def covers_punctured_disc(sectors):
    """True iff the angular intervals cover the whole circle."""
    pieces = []
    for s in sectors:
        a = s.theta1 % TWO_PI
        pieces.append((a, a + s.width))
        pieces.append((a - TWO_PI, a - TWO_PI + s.width))
    return _covers(pieces)


def _covers(pieces):
    reach = None
    for a, b in sorted(pieces):
        if reach is None:
            if a > 0:
                return False
            reach = b
        elif a <= reach + _ANGLE_TOL:
            reach = max(reach, b)
        elif a < TWO_PI:
            return False
        if reach is not None and reach >= TWO_PI - _ANGLE_TOL:
            return True
    return reach is not None and reach >= TWO_PI - _ANGLE_TOL


def _line_angle(fam, eps):
    a0, a1 = singularities(fam, eps)
    return math.atan2((a0 - a1).imag, (a0 - a1).real)


def is_generic(fam, eps_list, delta=math.pi / 6):
    """Line through a0, a1 meets every real dividing ray at angle >= delta, on the grid."""
    if not 0 < delta < math.pi / 2:
        raise ValueError("delta must lie in (0, pi/2)")
    try:
        rays = dividing_rays(fam.k, fam.Lambda, "real")
    except ValueError:
        return False
    for eps in eps_list:
        try:
            beta = _line_angle(fam, eps)
        except (DegenerateRoots, LabelUndefined):
            return False
        for r in rays:
            gap = (beta - r.angle) % math.pi
            if min(gap, math.pi - gap) < delta - _ANGLE_TOL:
                return False
    return True


def _reference_eps(fam):
    return [0.4 * 2.0 ** -j for j in range(8)]


def associated_sectors(fam, delta=math.pi / 6):
    """Good sectors S0, S1 with a_j in S_j, covering a punctured disc.

    Default rule: S0 spans 3 pi/4 on each side of the imaginary dividing ray
    closest to a0, and S1 = S0 rotated by pi. When that is not good
    (n > 2), sectors of width pi + 2m centered on arg a0 and arg a1 are tried
    with margins m < delta.
    """
    eps_grid = _reference_eps(fam)
    if not is_generic(fam, eps_grid, delta):
        raise NotGeneric(f"line through a0, a1 within {delta:.4f} of a real dividing ray")
    a0 = fam.alpha0(eps_grid[-1])
    beta = math.atan2(a0.imag, a0.real)
    rays = dividing_rays(fam.k, fam.Lambda, "imaginary")
    candidates = []
    if fam.n == 2:
        r0 = min((r.angle for r in rays), key=lambda a: abs((a - beta + math.pi) % TWO_PI - math.pi))
        r0 = beta + ((r0 - beta + math.pi) % TWO_PI - math.pi)
        candidates.append((r0 - 0.75 * math.pi, r0 + 0.75 * math.pi))
    for frac in (0.9, 0.75, 0.5, 0.25, 0.1):
        m = frac * delta
        candidates.append((beta - math.pi / 2 - m, beta + math.pi / 2 + m))
    for lo, hi in candidates:
        s0 = Sector(lo, hi)
        s1 = Sector(lo + math.pi, hi + math.pi)
        ok = (is_good_sector(s0, fam.k, fam.Lambda) and is_good_sector(s1, fam.k, fam.Lambda)
              and all(s0.contains_angle(np.angle(fam.alpha0(e))) and s1.contains_angle(np.angle(fam.alpha1(e)))
                      for e in eps_grid)
              and _covers([(lo, hi), (lo + math.pi, hi + math.pi), (lo - math.pi, hi - math.pi),
                           (lo + TWO_PI, hi + TWO_PI), (lo - TWO_PI, hi - TWO_PI)]))
        if ok:
            return s0, s1
    raise NotGeneric("no pair of good associated sectors found")


def intersection_components(s0, s1):
    """Bisector angles of the left and right components of S0 and S1.

    Left is crossed going counterclockwise from S0 to S1.
    """
    left = 0.5 * (s1.theta1 + s0.theta2)
    right = 0.5 * (s0.theta1 + s1.theta2 - TWO_PI)
    return left, right


# -- loops ----------------------------------------------------------------------


def loop_radius(fam, eps):
    a0, a1 = singularities(fam, eps)
    return abs(a0 - a1) / 4


def _check_basepoint(fam, eps, t0):
    a0, a1 = singularities(fam, eps)
    d = a1 - a0
    off = ((t0 - a0) / d).imag * abs(d)
    if abs(off) <= 1e-12 * max(1.0, abs(t0)):
        raise BasePointOnSingularLine(f"t0={t0} lies on the line through {a0}, {a1}")


def monodromy_loop(fam, eps, i, t0=-0.5):
    """psi_i: segment t0 -> a_i, counterclockwise circle around alpha_i, segment back."""
    t0 = complex(t0)
    _check_basepoint(fam, eps, t0)
    alpha = singularities(fam, eps)[i]
    r = loop_radius(fam, eps)
    w = t0 - alpha
    start = math.atan2(w.imag, w.real) / math.pi
    circle = PathSegment.arc(alpha, r, start, start + 2)
    approach = PathSegment("line", t0, circle.start)
    return Path((approach, circle, approach.reversed()), loop=True)


def conditioned_loop_parts(fam, eps, i, t0=-0.5):
    """Approach path and circle of a loop homotopic to psi_i.

    From t0 the approach follows |t| = |t0| the short way to the ray through
    alpha_i, then runs radially to alpha_i + r alpha_i/|alpha_i|; the circle
    starts and ends there. Unlike the straight segment this never grazes the
    Stokes-growth direction, so the transfer stays well conditioned.
    """
    t0 = complex(t0)
    _check_basepoint(fam, eps, t0)
    alpha = singularities(fam, eps)[i]
    r = loop_radius(fam, eps)
    R = abs(t0)
    if abs(R - abs(alpha)) < 2 * r:
        # the arc |t| = |t0| would graze alpha_i: approach along the segment instead
        w = t0 - alpha
        start = math.atan2(w.imag, w.real) / math.pi
        circle = PathSegment.arc(alpha, r, start, start + 2)
        return Path((PathSegment("line", t0, circle.start),)), Path((circle,), loop=True)
    phi0 = math.atan2(t0.imag, t0.real) / math.pi
    phi1 = math.atan2(alpha.imag, alpha.real) / math.pi
    dphi = (phi1 - phi0 + 1) % 2 - 1
    segs = []
    if dphi != 0:
        segs.append(PathSegment.arc(0, R, phi0, phi0 + dphi))
    circle = PathSegment.arc(alpha, r, phi1, phi1 + 2)
    here = segs[-1].end if segs else t0
    if abs(here - circle.start) > 1e-14:
        segs.append(PathSegment("line", here, circle.start))
    return Path(tuple(segs)), Path((circle,), loop=True)


def conditioned_loop(fam, eps, i, t0=-0.5):
    approach, circle = conditioned_loop_parts(fam, eps, i, t0)
    return approach + circle + approach.reversed()


def complete_loop(t0=-0.5):
    """Counterclockwise circle |t| = |t0| starting at t0."""
    t0 = complex(t0)
    return Path.circle(0, abs(t0), math.atan2(t0.imag, t0.real) / math.pi)


# -- family files ---------------------------------------------------------------


def _fmt_complex(z):
    return f"{float(z.real)!r},{float(z.imag)!r}"


def _parse_complex(tok, line):
    parts = tok.split(",")
    if len(parts) != 2:
        raise ParseError(line, f"expected 're,im', got {tok!r}")
    try:
        return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        raise ParseError(line, f"bad number in {tok!r}") from None


def format_family(fam):
    lines = [f"n = {fam.n}"]
    for j, lam in enumerate(fam.Lambda, 1):
        lines.append(f"lambda_{j} = {_fmt_complex(lam)}")
    lines.append(f"alphac = {_fmt_complex(fam.alphac)}")
    for (p, q) in sorted(fam.terms):
        m = fam.terms[(p, q)]
        toks = " ".join(_fmt_complex(x) for x in m.ravel())
        lines.append(f"A t^{p} eps^{q} = {toks}")
    return "\n".join(lines) + "\n"


def parse_family(text, name=""):
    """Parse the key = value family format; errors carry the 1-based line number."""
    n = None
    lams = {}
    alphac = None
    raw_terms = []
    seen = set()
    nlines = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        nlines = lineno
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(lineno, "missing '='")
        key, val = (x.strip() for x in line.split("=", 1))
        key = " ".join(key.split())
        if key in seen:
            raise ParseError(lineno, f"duplicate key {key!r}")
        seen.add(key)
        if key == "n":
            try:
                n = int(val)
            except ValueError:
                raise ParseError(lineno, "n must be an integer") from None
            if n < 2:
                raise ParseError(lineno, "n must be at least 2")
        elif key.startswith("lambda_"):
            try:
                j = int(key[len("lambda_"):])
            except ValueError:
                raise ParseError(lineno, f"bad key {key!r}") from None
            lams[j] = (_parse_complex(val, lineno), lineno)
        elif key == "alphac":
            alphac = (_parse_complex(val, lineno), lineno)
        elif key.startswith("A "):
            parts = key.split()
            if (len(parts) != 3 or not parts[1].startswith("t^") or not parts[2].startswith("eps^")):
                raise ParseError(lineno, f"bad coefficient key {key!r}")
            try:
                p, q = int(parts[1][2:]), int(parts[2][4:])
            except ValueError:
                raise ParseError(lineno, f"bad exponents in {key!r}") from None
            if p < 0 or q < 0:
                raise ParseError(lineno, "negative exponent")
            vals = [_parse_complex(tok, lineno) for tok in val.split()]
            raw_terms.append((p, q, vals, lineno))
        else:
            raise ParseError(lineno, f"unknown key {key!r}")
    end = nlines + 1
    if n is None:
        raise ParseError(end, "missing n")
    if alphac is None:
        raise ParseError(end, "missing alphac")
    if alphac[0].imag == 0:
        raise ParseError(alphac[1], "alphac must have nonzero imaginary part")
    terms = {}
    for p, q, vals, lineno in raw_terms:
        if len(vals) != n * n:
            raise ParseError(lineno, f"expected {n * n} entries, got {len(vals)}")
        terms[(p, q)] = np.array(vals, dtype=complex).reshape(n, n)
    if (0, 0) not in terms:
        raise ParseError(end, "missing A t^0 eps^0")
    Lambda = None
    if lams:
        if sorted(lams) != list(range(1, n + 1)):
            raise ParseError(max(ln for _, ln in lams.values()), "lambda_1..lambda_n required")
        Lambda = [lams[j][0] for j in range(1, n + 1)]
        ev = np.linalg.eigvals(terms[(0, 0)])
        for j in range(1, n + 1):
            if np.min(np.abs(ev - lams[j][0])) > 1e-8 * (1 + abs(lams[j][0])):
                raise ParseError(lams[j][1], "not an eigenvalue of A(0,0)")
    try:
        return ConfluentFamily(terms, alphac[0], Lambda, name=name)
    except ValueError as exc:
        raise ParseError(end, str(exc)) from None


def load_family(path):
    with open(path) as fh:
        return parse_family(fh.read(), name=str(path))


def save_family(fam, path):
    with open(path, "w") as fh:
        fh.write(format_family(fam))
