"""Projective dynamics of 2x2 monodromy operators.

Operators act on the extended plane through the ratio chart [z1 : z2] -> z1/z2.
Points are mpmath numbers, with ``INF`` for the point at infinity; all
coincidence tests use the chordal metric so that they do not depend on the
chart. Entries of the monodromy operators grow like exp(pi/eps), so maps
keep mpmath entries at the precision of the operators they came from.
"""

import itertools
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import NonHyperbolic, SampleHitsExcludedSet, SampleNearRepeller, WordNotReduced

INF = mpmath.inf
COINCIDENCE_TOL = 1e-6


def is_inf(z):
    return not isinstance(z, mpmath.mpc) and mpmath.isinf(z)


def chordal(z, w):
    """Chordal distance on the Riemann sphere (diameter 1 normalization)."""
    if is_inf(z) and is_inf(w):
        return 0.0
    if is_inf(z):
        z, w = w, z
    z = mpmath.mpc(z)  # before squaring: large floats would overflow
    if is_inf(w):
        return float(1 / mpmath.sqrt(1 + abs(z) ** 2))
    w = mpmath.mpc(w)
    return float(abs(z - w) / (mpmath.sqrt(1 + abs(z) ** 2) * mpmath.sqrt(1 + abs(w) ** 2)))


def _ratio(z1, z2):
    if z2 == 0:
        return INF
    return z1 / z2


class MobiusMap:
    """z -> (a z + b)/(c z + d), stored with determinant 1."""

    def __init__(self, a, b, c, d, prec=53):
        self.prec = prec
        with mpmath.workprec(prec):
            a, b, c, d = (mpmath.mpc(x) for x in (a, b, c, d))
            det = a * d - b * c
            if det == 0:
                raise ValueError("singular matrix has no projectivization")
            s = mpmath.sqrt(det)
            self.a, self.b, self.c, self.d = a / s, b / s, c / s, d / s

    @classmethod
    def _unit(cls, a, b, c, d, prec):
        # entries already of determinant 1; recomputing it would cancel catastrophically
        m = cls.__new__(cls)
        m.prec, m.a, m.b, m.c, m.d = prec, a, b, c, d
        return m

    @classmethod
    def identity(cls, prec=53):
        return cls(1, 0, 0, 1, prec)

    @property
    def matrix(self):
        return mpmath.matrix([[self.a, self.b], [self.c, self.d]])

    def to_numpy(self):
        return np.array([[complex(self.a), complex(self.b)], [complex(self.c), complex(self.d)]])

    def norm(self):
        """Max-norm of the determinant-1 matrix."""
        return max(abs(x) for x in (self.a, self.b, self.c, self.d))

    def act(self, v):
        """Linear action on a homogeneous pair."""
        z1, z2 = v
        with mpmath.workprec(self.prec):
            return (self.a * z1 + self.b * z2, self.c * z1 + self.d * z2)

    def __call__(self, z):
        with mpmath.workprec(self.prec):
            if is_inf(z):
                return _ratio(self.a, self.c)
            return _ratio(*self.act((mpmath.mpc(z), mpmath.mpc(1))))

    def __matmul__(self, other):
        """Composition: (self @ other)(z) = self(other(z))."""
        p = max(self.prec, other.prec)
        with mpmath.workprec(p):
            return MobiusMap._unit(self.a * other.a + self.b * other.c, self.a * other.b + self.b * other.d,
                                   self.c * other.a + self.d * other.c, self.c * other.b + self.d * other.d, p)

    def inverse(self):
        with mpmath.workprec(self.prec):  # mpmath rounds even negation to the ambient precision
            return MobiusMap._unit(self.d, -self.b, -self.c, self.a, self.prec)

    def __pow__(self, k):
        base = self if k >= 0 else self.inverse()
        out = MobiusMap.identity(self.prec)
        for _ in range(abs(k)):
            out = base @ out
        return out

    def conjugate(self, h):
        """h self h^-1."""
        return h @ self @ h.inverse()

    def trace(self):
        return self.a + self.d

    def eigenvalues(self):
        """(big, small) eigenvalues of the determinant-1 matrix, big * small = 1."""
        with mpmath.workprec(self.prec + 20):
            tr = self.a + self.d
            disc = mpmath.sqrt(tr * tr - 4)
            l1, l2 = (tr + disc) / 2, (tr - disc) / 2
            big = l1 if abs(l1) >= abs(l2) else l2
            return big, 1 / big

    def fixed_point(self, lam):
        """Fixed point belonging to eigenvalue ``lam``."""
        with mpmath.workprec(self.prec):
            r1 = (self.a - lam, self.b)
            r2 = (self.c, self.d - lam)
            if max(abs(r1[0]), abs(r1[1])) >= max(abs(r2[0]), abs(r2[1])):
                v = (r1[1], -r1[0])
            else:
                v = (-r2[1], r2[0])
            if v[0] == 0 and v[1] == 0:
                # scalar matrix: every point is fixed, report 0
                return mpmath.mpc(0)
            return _ratio(*v)


def projectivize(M, prec=None):
    """MobiusMap of a 2x2 matrix (numpy, nested lists or mpmath).

    The chart action is checked on three points against the linear action.
    """
    if isinstance(M, mpmath.matrix):
        prec = prec or mpmath.mp.prec
        a, b, c, d = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
    else:
        M = np.asarray(M, dtype=complex)
        if M.shape != (2, 2):
            raise ValueError("projectivization needs a 2x2 matrix")
        prec = prec or 53
        a, b, c, d = (complex(x) for x in M.ravel())
    m = MobiusMap(a, b, c, d, prec)
    for z in (mpmath.mpc(0), mpmath.mpc(1), INF):
        v = (mpmath.mpc(1), mpmath.mpc(0)) if is_inf(z) else (z, mpmath.mpc(1))
        if chordal(m(z), _ratio(*m.act(v))) > 1e-9:
            raise ValueError("chart action inconsistent")
    return m


@dataclass
class FixedPointData:
    attractor: object
    repeller: object
    multiplier: object  # derivative at the attractor, |.| < 1

    def check(self, m, tol=1e-9):
        return (chordal(m(self.attractor), self.attractor) <= tol
                and chordal(m(self.repeller), self.repeller) <= tol)


def _log_multiplier_modulus(m):
    big, small = m.eigenvalues()
    with mpmath.workprec(m.prec):
        if small == 0:
            return -math.inf
        return float(mpmath.log(abs(small / big)))


def classify(m, tol=1e-9):
    """"hyperbolic" when the multiplier module differs from 1 by more than ``tol``."""
    lm = _log_multiplier_modulus(m)
    if not (1 - math.exp(lm) > tol):
        return "non-hyperbolic"
    return "hyperbolic"


def fixed_points(m, tol=1e-9):
    """FixedPointData of a hyperbolic map; raises NonHyperbolic otherwise."""
    if classify(m, tol) != "hyperbolic":
        raise NonHyperbolic("multiplier module within tolerance of 1")
    big, small = m.eigenvalues()
    with mpmath.workprec(m.prec):
        return FixedPointData(m.fixed_point(big), m.fixed_point(small), small / big)


# -- limit geometry ----------------------------------------------------------------------


LABELS = ("p01", "p02", "p11", "p12")


@dataclass
class FixedPointRow:
    eps: float
    m0: FixedPointData
    m1: FixedPointData

    @property
    def points(self):
        """p01, p02 (attractor, repeller of m0), p11, p12 (repeller, attractor of m1)."""
        return {"p01": self.m0.attractor, "p02": self.m0.repeller,
                "p11": self.m1.repeller, "p12": self.m1.attractor}


@dataclass
class FixedPointReport:
    rows: list
    cauchy: dict  # label -> successive chordal differences along the grid
    coincidence: float  # chordal(p02, p12) at the smallest eps
    coincidence_abs: float  # |p02 - p12| in the chart (nan if either is infinite)

    @property
    def limits(self):
        return self.rows[-1].points


def maps_of(pair):
    """Projectivized (m0, m1) of a MonodromyPair."""
    return projectivize(pair.M0_mp, pair.prec), projectivize(pair.M1_mp, pair.prec)


def fixed_point_geometry(pairs, tol=1e-9):
    """Fixed points of m0, m1 along a decreasing eps grid.

    ``pairs`` is a sequence of MonodromyPair (or objects with ``.pair``,
    such as sweep points).
    """
    rows = []
    for p in pairs:
        p = getattr(p, "pair", p)
        m0, m1 = maps_of(p)
        try:
            rows.append(FixedPointRow(p.eps, fixed_points(m0, tol), fixed_points(m1, tol)))
        except NonHyperbolic as e:
            raise NonHyperbolic(f"eps={p.eps}: {e}") from None
    cauchy = {k: [chordal(a.points[k], b.points[k]) for a, b in zip(rows[:-1], rows[1:])]
              for k in LABELS}
    last = rows[-1].points
    p02, p12 = last["p02"], last["p12"]
    ab = float("nan") if is_inf(p02) or is_inf(p12) else float(abs(p02 - p12))
    return FixedPointReport(rows, cauchy, chordal(p02, p12), ab)


# -- words ----------------------------------------------------------------------------------


_LETTERS = {"a": (0, 1), "A": (0, -1), "b": (1, 1), "B": (1, -1)}
_CHARS = {v: k for k, v in _LETTERS.items()}


@dataclass(frozen=True)
class WordSpec:
    """Word m_{j_n}^{s_n} ... m_{j_1}^{s_1}, letters listed left to right.

    ``classification`` is "reduced", "complete-power" (with ``power`` k, the
    word is literally (M0 M1)^k), "identity" (empty) or "reducible" (letters
    contain an adjacent inverse pair, only for words built unnormalized).
    """

    letters: tuple
    classification: str
    power: int = 0
    cancelled: int = 0

    def __str__(self):
        return "".join(_CHARS[x] for x in self.letters) or "1"

    def __len__(self):
        return len(self.letters)

    @property
    def reduced(self):
        return self.classification == "reduced"

    def __add__(self, other):
        return normalize_word(list(self.letters) + list(other.letters))

    def inverse(self):
        return normalize_word([(j, -s) for j, s in reversed(self.letters)])


def classify_letters(letters):
    letters = tuple(letters)
    if not letters:
        return "identity", 0
    if any(x[0] == y[0] and x[1] == -y[1] for x, y in zip(letters[:-1], letters[1:])):
        return "reducible", 0
    n = len(letters)
    if n % 2 == 0:
        if letters == ((0, 1), (1, 1)) * (n // 2):
            return "complete-power", n // 2
        if letters == ((1, -1), (0, -1)) * (n // 2):
            return "complete-power", -(n // 2)
    return "reduced", 0


def normalize_word(raw):
    """Expand (index, exponent) factors into +-1 letters and cancel inverses.

    ``raw`` lists the factors as written, leftmost applied last.
    """
    stack = []
    cancelled = 0
    for j, e in raw:
        if j not in (0, 1) or int(e) != e:
            raise ValueError(f"bad factor {(j, e)}")
        s = 1 if e > 0 else -1
        for _ in range(abs(int(e))):
            if stack and stack[-1] == (j, -s):
                stack.pop()
                cancelled += 1
            else:
                stack.append((j, s))
    cls, k = classify_letters(stack)
    return WordSpec(tuple(stack), cls, k, cancelled)


def parse_word(text):
    """Letters a, A, b, B for M0, M0^-1, M1, M1^-1 (leftmost applied last)."""
    text = text.strip()
    if text in ("", "1"):
        return normalize_word([])
    try:
        return normalize_word([_LETTERS[ch] for ch in text])
    except KeyError as e:
        raise ValueError(f"bad word letter {e.args[0]!r}") from None


def parse_words(spec):
    """Comma-separated words; ``all<L>`` expands to every freely reduced word up to length L."""
    out = []
    for tok in spec.split(","):
        tok = tok.strip()
        if tok.startswith("all"):
            out.extend(all_words(int(tok[3:])))
        elif tok:
            out.append(parse_word(tok))
    return out


def all_words(max_len):
    """Every freely reduced nonempty word of length at most ``max_len``."""
    out = []
    letters = list(_LETTERS.values())
    for n in range(1, max_len + 1):
        for w in itertools.product(letters, repeat=n):
            cls, k = classify_letters(w)
            if cls != "reducible":
                out.append(WordSpec(tuple(w), cls, k))
    return out


def evaluate_word(w, m0, m1):
    """Product of the letters in order, the rightmost applied first."""
    prec = max(m0.prec, m1.prec)
    gens = {(0, 1): m0, (0, -1): m0.inverse(), (1, 1): m1, (1, -1): m1.inverse()}
    out = MobiusMap.identity(prec)
    for x in w.letters:
        out = out @ gens[x]
    return out


def factorization(w):
    """Split w = (m0 m1)^k w' where w' has no leading ab or BA pair.

    Returns ``(k, w')``; re-multiplying gives back ``w``.
    """
    letters = list(w.letters)
    k = 0
    while len(letters) >= 2:
        head = tuple(letters[:2])
        if head == ((0, 1), (1, 1)):
            k += 1
        elif head == ((1, -1), (0, -1)):
            k -= 1
        else:
            break
        letters = letters[2:]
    cls, p = classify_letters(letters)
    return k, WordSpec(tuple(letters), cls, p)


def complete_power_word(k):
    return normalize_word([(0, 1), (1, 1)] * k if k >= 0 else [(1, -1), (0, -1)] * -k)


# -- typicality and divergence --------------------------------------------------------------


# continuing f_11 once around 0 gives f_01 (the right Stokes matrix is upper
# triangular), so with both branches taken at arg t0 these two coincidences
# hold for every equation and are not part of the condition
STRUCTURAL = ((1, "p11", "p01"), (-1, "p01", "p11"))


def typicality_check(m_limit, points, K=8, tol=COINCIDENCE_TOL, exempt=STRUCTURAL):
    """True when no m^k (0 < |k| <= K) sends one labelled point onto another label's point.

    ``points`` is a dict with keys p01, p02, p11, p12 or a sequence in that
    order. Mapping a point onto its own label is allowed, as are the
    ``exempt`` (k, source, target) coincidences. The condition is only
    checked up to K ("typical up to K").
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if not isinstance(points, dict):
        points = dict(zip(LABELS, points))
    skip = set(exempt or ())
    for sign, step in ((1, m_limit), (-1, m_limit.inverse())):
        cur = dict(points)
        for k in range(1, K + 1):
            cur = {lab: step(z) for lab, z in cur.items()}
            for lab, z in cur.items():
                for other, w in points.items():
                    if other == lab or (sign * k, lab, other) in skip:
                        continue
                    if chordal(z, w) <= tol:
                        return False
    return True


@dataclass
class LimitData:
    """Limit map m = lim m0 m1 and the limit points p_ij at the base point."""

    m: MobiusMap
    points: dict
    t0: complex


def limit_data(fam, t0=-0.5, stokes=None, tol=1e-12):
    """Projectivized unperturbed monodromy and canonical-solution lines at ``t0``."""
    from .monodromy import unperturbed_monodromy
    from .stokes import stokes_for_family

    sp = stokes if stokes is not None else stokes_for_family(fam)
    m = projectivize(unperturbed_monodromy(fam, t0, tol).to_array())
    Z0 = sp.bases[0].at(complex(t0))
    Z1 = sp.bases[1].at(complex(t0))
    pts = {"p01": _ratio(mpmath.mpc(Z0[0, 0]), mpmath.mpc(Z0[1, 0])),
           "p02": _ratio(mpmath.mpc(Z0[0, 1]), mpmath.mpc(Z0[1, 1])),
           "p11": _ratio(mpmath.mpc(Z1[0, 0]), mpmath.mpc(Z1[1, 0])),
           "p12": _ratio(mpmath.mpc(Z1[0, 1]), mpmath.mpc(Z1[1, 1]))}
    return LimitData(m, pts, complex(t0))


def excluded(x, n, limit, tol=1e-3):
    """True when m^s x comes within ``tol`` of some p_ij for some |s| <= n."""
    for step in (limit.m, limit.m.inverse()):
        z = x
        for s in range(n + 1):
            if any(chordal(z, p) <= tol for p in limit.points.values()):
                return True
            z = step(z)
    return False


def sample_points(rng, count, n, limit, tol=1e-3, scale=2.0, max_tries=100000):
    """``count`` random plane points that avoid the excluded set for words up to length n."""
    out = []
    for _ in range(max_tries):
        if len(out) == count:
            break
        x = mpmath.mpc(*(scale * rng.standard_normal(2)))
        if limit is None or not excluded(x, n, limit, tol):
            out.append(x)
    if len(out) < count:
        raise SampleHitsExcludedSet("could not draw enough admissible samples")
    return out


def predicted_image(w, m0, m1):
    """Point the image of a generic x approaches: the attractor of the leftmost letter.

    Words with leading ab / BA pairs are factorized first and the prediction
    for the remainder is pushed by (m0 m1)^k. Complete powers have none.
    """
    k, rest = factorization(w)
    if not rest.letters:
        return None
    j, s = rest.letters[0]
    g = (m0, m1)[j]
    fp = fixed_points(g if s > 0 else g.inverse())
    p = fp.attractor
    if k:
        p = ((m0 @ m1) ** k)(p)
    return p


@dataclass
class DivergenceRow:
    word: str
    eps: float
    norm: float  # log of the determinant-1 max-norm is in ``log_norm``
    log_norm: float
    classification: str
    predicted: object = None
    observed: object = None
    hits: int = 0  # samples whose image lies within ``match_tol`` of the prediction
    samples: int = 0


@dataclass
class DivergenceReport:
    rows: list
    limit: LimitData = None
    typical_up_to: int = 0
    typical: bool = None
    growth: dict = field(default_factory=dict)  # word -> norm(smallest eps)/norm(largest eps), inf past doubles
    log_growth: dict = field(default_factory=dict)  # natural log of the same ratio

    def by_word(self):
        out = {}
        for r in self.rows:
            out.setdefault(r.word, []).append(r)
        return out


def divergence_experiment(fam=None, eps_grid=None, words=(), x_samples=(), pairs=None, limit=None,
                          t0=-0.5, K=8, match_tol=1e-6, exclude_tol=1e-3, require_reduced=False, **kw):
    """Norms and sample-point images of monodromy words along an eps grid.

    Either ``pairs`` (MonodromyPair per eps, decreasing eps) or ``fam`` and
    ``eps_grid`` must be given. Samples must avoid the excluded set; with
    ``require_reduced`` every word must be reduced.
    """
    from .monodromy import monodromy_operators

    if pairs is None:
        pairs = [monodromy_operators(fam, e, t0, **kw) for e in eps_grid]
    pairs = [getattr(p, "pair", p) for p in pairs]
    if require_reduced:
        bad = [str(w) for w in words if not w.reduced]
        if bad:
            raise WordNotReduced("not reduced: " + ",".join(bad))
    if limit is None and fam is not None:
        limit = limit_data(fam, pairs[0].t0)
    xs = [mpmath.mpc(x) if not is_inf(x) else x for x in x_samples]
    if limit is not None:
        n = max((len(w) for w in words), default=0)
        for x in xs:
            if excluded(x, n, limit, exclude_tol):
                raise SampleHitsExcludedSet(f"sample {complex(x)} too close to the excluded set")
    rows = []
    for p in pairs:
        m0, m1 = maps_of(p)
        for w in words:
            mw = evaluate_word(w, m0, m1)
            nm = mw.norm()
            row = DivergenceRow(str(w), p.eps, float(nm), float(mpmath.log(nm)), w.classification)
            if w.classification == "reduced" and xs:
                row.predicted = predicted_image(w, m0, m1)
                imgs = [mw(x) for x in xs]
                row.observed = imgs[0]
                row.samples = len(imgs)
                row.hits = sum(chordal(z, row.predicted) <= match_tol for z in imgs)
            rows.append(row)
    rep = DivergenceReport(rows, limit)
    if limit is not None:
        rep.typical_up_to = K
        rep.typical = typicality_check(limit.m, limit.points, K)
    for wname, rs in rep.by_word().items():
        lg = rs[-1].log_norm - rs[0].log_norm
        rep.log_growth[wname] = lg
        rep.growth[wname] = math.exp(lg) if lg < 700 else math.inf
    return rep


@dataclass
class PushResult:
    limit: object
    attractor: object
    distance: float
    ok: bool


def hyperbolic_push(maps, x, tol=1e-3, repel_tol=1e-3):
    """Image of ``x`` under the last map of a diverging hyperbolic family.

    ``x`` is a point or one point per map. The image is compared with the
    attractor of the last map (the estimate of the attractor limit).
    """
    maps = list(maps)
    xs = list(x) if isinstance(x, (list, tuple)) else [x] * len(maps)
    fp = fixed_points(maps[-1])
    xl = xs[-1]
    if chordal(xl, fp.repeller) <= repel_tol:
        raise SampleNearRepeller(f"sample within {repel_tol} of the repeller")
    img = maps[-1](xl)
    d = chordal(img, fp.attractor)
    return PushResult(img, fp.attractor, d, d <= tol)
