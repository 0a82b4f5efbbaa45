"""Monodromy operators of a confluent family, their eigen-structure, fractional
powers, transition matrices and commutators, plus the asymptotic checks.

Operators are computed either with the double-precision integrator or with
the Taylor engine in ``precise`` (default for small eps, where entries of
size exp(pi/eps) must be resolved against exp(-pi/eps)). Post-processing is
done in mpmath at the working precision of the pair, so the factored
commutator never forms large powers explicitly.
"""

import math
import warnings
from dataclasses import dataclass, field as dc_field

import mpmath
import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import EigenvalueCollision
from .family import (complete_loop, conditioned_loop, conditioned_loop_parts,
                     monodromy_loop, singularities)
from .integrator import ScaledMatrix, transfer_matrix
from .precise import (precise_conjugated_loop, precise_transfer,
                      to_mpmath)

GAP_MIN = 1e-3


def _mat(a):
    return mpmath.matrix([[mpmath.mpc(complex(x)) for x in row] for row in np.asarray(a)])


def to_numpy(m):
    return np.array([[complex(m[i, j]) for j in range(m.cols)] for i in range(m.rows)])


def mp_scaled(m):
    """ScaledMatrix view of an mpmath matrix."""
    big = max(abs(m[i, j]) for i in range(m.rows) for j in range(m.cols))
    core = np.array([[complex(m[i, j] / big) for j in range(m.cols)] for i in range(m.rows)])
    return ScaledMatrix(core, complex(mpmath.log(big)))


def mp_maxnorm(m):
    return max(abs(m[i, j]) for i in range(m.rows) for j in range(m.cols))


def _diag(v):
    n = len(v)
    d = mpmath.zeros(n, n)
    for i, x in enumerate(v):
        d[i, i] = x
    return d


# -- residues -------------------------------------------------------------------


def residue_logs(fam, eps, i):
    """log eigenvalues of M_i from the residue at alpha_i, indexed by fam.Lambda.

    M_i has eigenvalues exp(2 pi i r) with r the eigenvalues of
    A(alpha_i)/(alpha_i - alpha_{1-i}). The returned values are the exact
    continuous-in-eps logarithms, matched to the limit eigenvalues lambda_j.
    """
    a = singularities(fam, eps)
    alpha, other = a[i], a[1 - i]
    ev = np.linalg.eigvals(fam.A(alpha, eps))
    lam = np.array(fam.Lambda)
    cost = np.abs(ev[:, None] - lam[None, :])
    rows, cols = linear_sum_assignment(cost)
    matched = np.empty(len(lam), complex)
    matched[cols] = ev[rows]
    return 2j * math.pi * matched / (alpha - other)


def residue_logs_mp(fam, eps, i, prec):
    """Same as ``residue_logs`` but refined in mpmath at ``prec`` bits."""
    approx = residue_logs(fam, eps, i)
    with mpmath.workprec(prec):
        c = mpmath.mpc(fam.alphac)
        if c.imag < 0:
            c = -c
        e = mpmath.mpf(eps)
        a0 = c * e
        alpha, other = (a0, -a0) if i == 0 else (-a0, a0)
        A = mpmath.zeros(fam.n, fam.n)
        for (p, q), m in fam.terms.items():
            f = alpha ** p * e ** q
            for r in range(fam.n):
                for s in range(fam.n):
                    A[r, s] += mpmath.mpc(complex(m[r, s])) * f
        ev = _eigvals_mp(A)
        out = []
        for j in range(fam.n):
            target = approx[j] * (alpha - other) / (2j * math.pi)
            best = min(ev, key=lambda z: abs(complex(z) - target))
            out.append(2j * mpmath.pi * best / (alpha - other))
        return out


def _eigvals_mp(A):
    if A.rows == 2:
        tr = A[0, 0] + A[1, 1]
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        disc = mpmath.sqrt(tr * tr - 4 * det)
        return [(tr + disc) / 2, (tr - disc) / 2]
    return list(mpmath.eig(A, left=False, right=False))


def working_bits(fam, eps, guard_digits=40):
    """Bits needed to resolve exp(-spread) against O(1), plus guard digits."""
    spread = 0.0
    for i in (0, 1):
        re = residue_logs(fam, eps, i).real
        spread = max(spread, re.max() - re.min())
    digits = spread / math.log(10) + guard_digits
    return int(digits * 3.33) + 16


# -- operators ----------------------------------------------------------------------


@dataclass
class MonodromyPair:
    """M0, M1 acting on initial conditions at t0 (transfer matrices).

    ``M0_mp``/``M1_mp`` are mpmath matrices at ``prec`` bits; ``M0``/``M1``
    are their ScaledMatrix views.
    """

    t0: complex
    eps: float
    M0_mp: object
    M1_mp: object
    prec: int
    engine: str
    info: dict = dc_field(default_factory=dict)

    @property
    def M0(self):
        return mp_scaled(self.M0_mp)

    @property
    def M1(self):
        return mp_scaled(self.M1_mp)

    def product(self):
        with mpmath.workprec(self.prec):
            return self.M0_mp * self.M1_mp

    # mpmath's matrix class is bound to its context and does not pickle;
    # ship entries instead (mpc pickles exactly) so sweeps can use processes
    def __getstate__(self):
        st = dict(self.__dict__)
        for k in ("M0_mp", "M1_mp"):
            M = st[k]
            st[k] = [[M[i, j] for j in range(M.cols)] for i in range(M.rows)]
        return st

    def __setstate__(self, st):
        for k in ("M0_mp", "M1_mp"):
            st[k] = mpmath.matrix(st[k])
        self.__dict__.update(st)


def monodromy_operators(fam, eps, t0=-0.5, tol=1e-10, engine="auto", loops="conditioned",
                        rho=0.3, bits=None, self_check=False):
    """Monodromy pair at base point ``t0``.

    ``engine``: "double" (adaptive Runge-Kutta), "taylor" (arbitrary
    precision) or "auto" (double when the eigenvalue spread fits in about
    six digits, taylor otherwise). ``loops``: "conditioned" (default,
    homotopic to the standard loops but well conditioned) or "straight"
    (segment, circle, segment).
    """
    t0 = complex(t0)
    need = working_bits(fam, eps)
    if engine == "auto":
        engine = "double" if _spread_digits(fam, eps) <= 6 else "taylor"
    info = {}
    if engine == "double":
        mats = []
        checks = []
        field = fam.field(eps)
        for i in (0, 1):
            path = conditioned_loop(fam, eps, i, t0) if loops == "conditioned" else monodromy_loop(fam, eps, i, t0)
            F = transfer_matrix(field, path, tol=tol, self_check=self_check)
            if self_check:
                checks.append(F.stats["self_check"])
            mats.append(_mat(F.to_array()) if abs(F.log_scale) < 600 else _scaled_to_mp(F))
        if self_check:
            info["self_check"] = max(checks)
        return MonodromyPair(t0, eps, mats[0], mats[1], 53, "double", info)
    if engine != "taylor":
        raise ValueError(f"unknown engine {engine!r}")
    bits = bits or need
    pf = fam.precise_field(eps, bits)
    mats = []
    steps = 0
    for i in (0, 1):
        if loops == "conditioned":
            approach, circle = conditioned_loop_parts(fam, eps, i, t0)
            M, inf = precise_conjugated_loop(pf, approach, circle, bits, rho)
        else:
            M, inf = precise_transfer(pf, monodromy_loop(fam, eps, i, t0), bits, rho)
        steps += inf["steps"]
        with mpmath.workprec(bits):
            mats.append(to_mpmath(M))
    info.update(steps=steps, bits=bits, rho=rho)
    pair = MonodromyPair(t0, eps, mats[0], mats[1], bits, "taylor", info)
    if self_check:
        finer = monodromy_operators(fam, eps, t0, engine="taylor", loops=loops, rho=rho / 2,
                                    bits=bits + 64)
        with mpmath.workprec(bits):
            d = max(mp_maxnorm(pair.M0_mp - finer.M0_mp) / mp_maxnorm(finer.M0_mp),
                    mp_maxnorm(pair.M1_mp - finer.M1_mp) / mp_maxnorm(finer.M1_mp))
        info["self_check"] = float(d)
    return pair


def _spread_digits(fam, eps):
    s = 0.0
    for i in (0, 1):
        re = residue_logs(fam, eps, i).real
        s = max(s, re.max() - re.min())
    return s / math.log(10)


def _scaled_to_mp(F):
    with mpmath.workprec(64):
        s = mpmath.exp(mpmath.mpc(F.log_scale))
        return _mat(F.core) * s


def complete_monodromy_check(fam, pair, tol=1e-10):
    """Relative distance between M0 M1 and the transfer around |t| = |t0|."""
    F = transfer_matrix(fam.field(pair.eps), complete_loop(pair.t0), tol=tol)
    with mpmath.workprec(pair.prec):
        P = mp_scaled(pair.product())
    return P.distance(F), F


def unperturbed_monodromy(fam, t0=-0.5, tol=1e-12):
    """Monodromy of the limit equation around 0 (the limit of M0 M1)."""
    return transfer_matrix(fam.unperturbed_field(), complete_loop(t0), tol=tol, d_min=0.0)


# -- eigen data -------------------------------------------------------------------------


@dataclass
class EigenData:
    """Eigen-structure of one monodromy operator, indexed by the limit eigenvalues.

    Column j of ``V`` (max-norm 1) and ``log_eigenvalues[j]`` belong to the
    eigenfunction converging to the canonical solution with exponent
    lambda_j. ``order`` lists indices by increasing Re(lambda_j/(i alpha0)).
    """

    which: int
    eps: float
    log_eigenvalues: list
    eigenvalues: list
    V: object
    order: list
    prec: int
    perm: list
    branch_shift: list
    residue_mismatch: float
    ordering_ok: bool

    @property
    def n(self):
        return len(self.log_eigenvalues)

    def moduli_log(self):
        return [float(mpmath.re(x)) for x in self.log_eigenvalues]

    def reconstruct(self):
        with mpmath.workprec(self.prec):
            return self.V * _diag([mpmath.exp(x) for x in self.log_eigenvalues]) * mpmath.inverse(self.V)


def _eig_mp(M):
    """Eigenvalues and max-norm-1 eigenvectors of an mpmath matrix."""
    n = M.rows
    if n == 2:
        a, b, c, d = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
        tr = a + d
        det = a * d - b * c
        disc = mpmath.sqrt(tr * tr - 4 * det)
        l1 = (tr + disc) / 2 if abs(tr + disc) >= abs(tr - disc) else (tr - disc) / 2
        l2 = det / l1
        vals = [l1, l2]
        vecs = []
        for lam in vals:
            v1 = [b, lam - a]
            v2 = [lam - d, c]
            v = v1 if max(abs(v1[0]), abs(v1[1])) >= max(abs(v2[0]), abs(v2[1])) else v2
            if max(abs(v[0]), abs(v[1])) == 0:
                v = [mpmath.mpc(1), mpmath.mpc(0)] if lam == vals[0] else [mpmath.mpc(0), mpmath.mpc(1)]
            vecs.append(v)
        V = mpmath.matrix([[vecs[0][0], vecs[1][0]], [vecs[0][1], vecs[1][1]]])
    else:
        vals, V = mpmath.eig(M)
        vals = list(vals)
    for j in range(n):
        s = max(abs(V[i, j]) for i in range(n))
        k = max(range(n), key=lambda i: abs(V[i, j]))
        ph = V[k, j] / abs(V[k, j])
        for i in range(n):
            V[i, j] = V[i, j] / (s * ph)
    return vals, V


def eigen_data(M, logs, alpha0, Lambda, which, eps, prec, gap_min=GAP_MIN, branch_ref=None):
    """Eigen-structure of ``M`` matched to predicted log eigenvalues ``logs``.

    ``logs[j]`` is the log eigenvalue predicted for the limit eigenvalue
    ``Lambda[j]``; numeric eigenvalues are matched to it by log-modulus.
    """
    n = len(Lambda)
    with mpmath.workprec(prec):
        vals, V = _eig_mp(M)
        mods = sorted(float(mpmath.log(abs(v))) if v != 0 else -math.inf for v in vals)
        for a, b in zip(mods[:-1], mods[1:]):
            if not b - a >= -math.log1p(-gap_min):
                raise EigenvalueCollision(f"relative module gap below {gap_min} at eps={eps}")
        pred = np.array([float(mpmath.re(x)) for x in logs])
        got = np.array([float(mpmath.log(abs(v))) for v in vals])
        rows, cols = linear_sum_assignment(np.abs(pred[:, None] - got[None, :]))
        perm = [0] * n
        for r, c in zip(rows, cols):
            perm[r] = int(c)
        Vo = mpmath.matrix(n, n)
        for j in range(n):
            for i in range(n):
                Vo[i, j] = V[i, perm[j]]
        ev = [vals[perm[j]] for j in range(n)]
        mismatch = max(float(abs(ev[j] / mpmath.exp(logs[j]) - 1)) for j in range(n))
        logs = [mpmath.mpc(x) for x in logs]
        if branch_ref is None:
            shift = [-round(float(mpmath.im(x)) / (2 * math.pi)) for x in logs]
        else:
            shift = list(branch_ref.branch_shift)
        logs = [x + 2j * mpmath.pi * k for x, k in zip(logs, shift)]
    key = [(complex(l) / (1j * alpha0)).real for l in Lambda]
    order = sorted(range(n), key=lambda j: key[j])
    re = [float(mpmath.re(logs[j])) for j in order]
    if which == 0:
        ok = all(a > b for a, b in zip(re[:-1], re[1:]))
    else:
        ok = all(a < b for a, b in zip(re[:-1], re[1:]))
    return EigenData(which, eps, logs, ev, Vo, order, prec, perm, shift, mismatch, ok)


def eigen_index(pair, fam, gap_min=GAP_MIN, branch_ref=None):
    """EigenData for M0 and M1 of ``pair``; ``branch_ref`` is a prior (ed0, ed1)."""
    a0 = singularities(fam, pair.eps)[0]
    out = []
    for i, M in ((0, pair.M0_mp), (1, pair.M1_mp)):
        logs = residue_logs_mp(fam, pair.eps, i, pair.prec)
        ref = branch_ref[i] if branch_ref is not None else None
        out.append(eigen_data(M, logs, a0, fam.Lambda, i, pair.eps, pair.prec, gap_min, ref))
    return tuple(out)


def eigen_data_from_matrix(M, order_hint=None, gap_min=GAP_MIN, prec=53, which=0):
    """EigenData of a plain matrix; index j is the j-th eigenvalue by decreasing modulus.

    With ``order_hint`` (a list of target eigenvalues) index j is matched to
    the closest eigenvalue instead.
    """
    with mpmath.workprec(prec):
        Mm = M if isinstance(M, mpmath.matrix) else _mat(M)
        vals, _ = _eig_mp(Mm)
        if order_hint is None:
            vals = sorted(vals, key=lambda v: -abs(v))
        else:
            vals = [min(vals, key=lambda v: abs(v - mpmath.mpc(h))) for h in order_hint]
        logs = [mpmath.log(v) for v in vals]
    n = Mm.rows
    # placeholder limit exponents whose Re(lambda/(i*i)) ordering is the index order
    Lambda = [-(j + 1.0) for j in range(n)] if which == 0 else [j + 1.0 for j in range(n)]
    return eigen_data(Mm, logs, 1j, Lambda, which, float("nan"), prec, gap_min)


def projective_multiplier(ed):
    """Ratio of the eigenvalue of smaller modulus over the larger one (n = 2)."""
    if ed.n != 2:
        raise ValueError("projective multiplier needs n = 2")
    a, b = ed.log_eigenvalues
    if mpmath.re(a) == mpmath.re(b):
        raise EigenvalueCollision("equal moduli")
    with mpmath.workprec(ed.prec):
        small, big = (a, b) if mpmath.re(a) < mpmath.re(b) else (b, a)
        return mpmath.exp(small - big)


def log_projective_multiplier(ed):
    a, b = ed.log_eigenvalues
    small, big = (a, b) if mpmath.re(a) < mpmath.re(b) else (b, a)
    return small - big


def fractional_power(ed, d, branch_ref=None):
    """V diag(exp(d log lambda_j)) V^-1 as an mpmath matrix.

    ``branch_ref`` re-uses the integer branch shifts of a previous EigenData.
    """
    with mpmath.workprec(ed.prec):
        logs = ed.log_eigenvalues
        if branch_ref is not None:
            logs = [x + 2j * mpmath.pi * (k - k0)
                    for x, k, k0 in zip(logs, branch_ref.branch_shift, ed.branch_shift)]
        D = _diag([mpmath.exp(d * x) for x in logs])
        return ed.V * D * mpmath.inverse(ed.V)


# -- transition matrices and commutators ----------------------------------------------


@dataclass
class TransitionMatrix:
    C: object
    eps: float
    prec: int
    row_scale: list = None

    @property
    def u(self):
        """Upper-triangular entry (n = 2)."""
        return self.C[0, 1]

    def to_numpy(self):
        return to_numpy(self.C)


def transition_matrix(ed0, ed1, reference=None):
    """C with V1 = V0 C, columns rescaled to a unit diagonal.

    Without ``reference`` the eigenvectors keep their max-norm scaling. With
    ``reference`` (the canonical fundamental matrix Z^0 at the base point in
    the same coordinates) the M0 eigenvectors are first rescaled so that
    Z^0(t0)^-1 V0 has a unit diagonal; this is the normalization under which
    C converges to the Stokes matrix itself rather than to a diagonal
    conjugate of it.
    """
    prec = max(ed0.prec, ed1.prec)
    with mpmath.workprec(prec):
        G = mpmath.inverse(ed0.V) * ed1.V
        n = G.rows
        scale = None
        if reference is not None:
            W = mpmath.inverse(_mat(reference)) * ed0.V
            scale = [W[i, i] for i in range(n)]
            for i in range(n):
                for j in range(n):
                    G[i, j] = G[i, j] * scale[i]
        for j in range(n):
            dj = G[j, j]
            for i in range(n):
                G[i, j] = G[i, j] / dj
    return TransitionMatrix(G, ed0.eps, prec, scale)


@dataclass
class CommutatorResult:
    K: object  # in base-point (initial condition) coordinates
    Ktilde: object  # in the eigenbase of the conjugating operator
    det_error: float
    variant: int
    prec: int

    def scaled(self):
        return mp_scaled(self.K)

    def to_numpy(self):
        return to_numpy(self.K)

    def distance(self, Z, target):
        """max |Z^-1 K Z - target|: compares in the canonical basis Z at the base point."""
        with mpmath.workprec(self.prec):
            Zm = _mat(Z)
            X = mpmath.inverse(Zm) * self.K * Zm
            return float(mp_maxnorm(X - _mat(target)))


def commutator(pair, ed0, ed1, d0, d1, variant=0):
    """Fractional-power commutator in factored form.

    variant 0: M1^-d1 M0^d0 M1^d1 M0^-d0 = V0 [G L1^-1 G^-1 L0 G L1 G^-1 L0^-1] V0^-1
    variant 1: M0^-d0 M1^d1 M0^d0 M1^-d1 = V1 [G^-1 L0^-1 G L1 G^-1 L0 G L1^-1] V1^-1
    with G = V0^-1 V1 and L_i = Lambda_i^{d_i}.
    """
    if not (d0 > 0 and d1 > 0 and d0 + d1 < 1) and (d0, d1) != (0, 0):
        warnings.warn(f"(d0, d1) = ({d0}, {d1}) outside the cone d0, d1 > 0, d0 + d1 < 1")
    prec = max(ed0.prec, ed1.prec)
    with mpmath.workprec(prec):
        G = mpmath.inverse(ed0.V) * ed1.V
        Gi = mpmath.inverse(G)
        L0 = _diag([mpmath.exp(d0 * x) for x in ed0.log_eigenvalues])
        L0i = _diag([mpmath.exp(-d0 * x) for x in ed0.log_eigenvalues])
        L1 = _diag([mpmath.exp(d1 * x) for x in ed1.log_eigenvalues])
        L1i = _diag([mpmath.exp(-d1 * x) for x in ed1.log_eigenvalues])
        if variant == 0:
            Kt = G * L1i * Gi * L0 * G * L1 * Gi * L0i
            V = ed0.V
        else:
            Kt = Gi * L0i * G * L1 * Gi * L0 * G * L1i
            V = ed1.V
        K = V * Kt * mpmath.inverse(V)
        det_err = float(abs(mpmath.det(Kt) - 1))
    return CommutatorResult(K, Kt, det_err, variant, prec)


# -- sweeps and reports -----------------------------------------------------------------


@dataclass
class SweepPoint:
    eps: float
    pair: object
    ed0: object
    ed1: object
    C: object = None
    K: object = None
    pair_right: object = None
    ed_right: tuple = None
    K_right: object = None


def _pair_job(args):
    fam, eps, t0, kw = args
    return monodromy_operators(fam, eps, t0, **kw)


def sweep(fam, eps_grid, t0=-0.5, d0=0.4, d1=0.4, reference=None, right=False,
          workers=1, **kw):
    """Monodromy data along a decreasing eps grid with branch tracking.

    Operator computation is parallel over eps (``workers`` processes);
    eigen-indexing and branch continuation run sequentially in grid order.
    """
    jobs = [(fam, e, t0, kw) for e in eps_grid]
    if right:
        jobs += [(fam, e, -t0, kw) for e in eps_grid]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as ex:
            pairs = list(ex.map(_pair_job, jobs))
    else:
        pairs = [_pair_job(j) for j in jobs]
    out = []
    ref = ref_r = None
    m = len(eps_grid)
    for k, eps in enumerate(eps_grid):
        pair = pairs[k]
        ed0, ed1 = eigen_index(pair, fam, branch_ref=ref)
        ref = (ed0, ed1)
        C = transition_matrix(ed0, ed1, reference)
        K = commutator(pair, ed0, ed1, d0, d1, 0)
        pt = SweepPoint(eps, pair, ed0, ed1, C, K)
        if right:
            pr = pairs[m + k]
            e0, e1 = eigen_index(pr, fam, branch_ref=ref_r)
            ref_r = (e0, e1)
            pt.pair_right, pt.ed_right = pr, (e0, e1)
            pt.K_right = commutator(pr, e0, e1, d0, d1, 1)
        out.append(pt)
    return out


@dataclass
class AsymptoticsRow:
    eps: float
    logs0: list
    logs1: list
    log_mu0: complex
    log_mu1: complex
    ratio_lambda: complex  # ln lambda_01 / ln lambda_02
    ratio_mu: complex  # ln mu_0 / ln mu_1
    u: complex
    u_times_mu1: complex
    u_over_mu1: complex
    rescaled: object = None  # n >= 3: C_jk lambda_1k / lambda_1j


def asymptotics_report(fam, eps_grid, t0=-0.5, reference=None, points=None, **kw):
    """Per-eps asymptotic quantities (see AsymptoticsRow).

    ``points`` may pass a precomputed sweep; otherwise one is run.
    """
    if list(eps_grid) != sorted(eps_grid, reverse=True):
        raise ValueError("eps grid must be sorted decreasing")
    if points is None:
        points = sweep(fam, eps_grid, t0, reference=reference, **kw)
    rows = []
    for pt in points:
        ed0, ed1 = pt.ed0, pt.ed1
        with mpmath.workprec(pt.pair.prec):
            l0 = [mpmath.mpc(x) for x in ed0.log_eigenvalues]
            l1 = [mpmath.mpc(x) for x in ed1.log_eigenvalues]
            u = pt.C.C[0, 1]
            if fam.n == 2:
                lm0 = log_projective_multiplier(ed0)
                lm1 = log_projective_multiplier(ed1)
                mu1 = mpmath.exp(lm1)
                umu = u * mu1
                uover = u / mu1
                r_lam = l0[0] / l0[1]
                r_mu = lm0 / lm1
            else:
                lm0 = lm1 = r_mu = umu = uover = mpmath.mpc(mpmath.nan)
                r_lam = l0[0] / l0[-1]
            resc = None
            if fam.n >= 3:
                n = fam.n
                resc = mpmath.matrix(n, n)
                for j in range(n):
                    for k in range(n):
                        resc[j, k] = pt.C.C[j, k] * mpmath.exp(l1[k] - l1[j])
        rows.append(AsymptoticsRow(pt.eps, l0, l1, lm0, lm1, r_lam, r_mu, u, umu, uover, resc))
    return rows


# -- synthetic checks (conjugation and commutator lemmas) ------------------------------


def synthetic_commutator(C, lam0, lam1):
    """C L1^-1 C^-1 L0 C L1 C^-1 L0^-1 for diagonal L0, L1 given as vectors (numpy)."""
    C = np.asarray(C, dtype=complex)
    L0 = np.diag(lam0)
    L1 = np.diag(lam1)
    Ci = np.linalg.inv(C)
    return C @ np.diag(1 / np.asarray(lam1)) @ Ci @ L0 @ C @ L1 @ Ci @ np.diag(1 / np.asarray(lam0))


def conjugated_by_diagonal(C, lam):
    """Lambda^-1 C Lambda."""
    lam = np.asarray(lam, dtype=complex)
    return (np.asarray(C) / lam[:, None]) * lam[None, :]


def random_lower_unipotent(rng, n, scale=1.0):
    C = np.eye(n, dtype=complex)
    for j in range(n):
        for k in range(j):
            C[j, k] = scale * (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2)
    return C


def synthetic_family(rng, n, nu, C0=None, little_o=None):
    """A synthetic transition/eigenvalue family at scale ``nu``.

    Multipliers: lambda_0 = (1, nu, nu^2, ...) up to random phases and
    lambda_1 in reverse, so lambda_0j/lambda_0k -> inf and
    lambda_1j/lambda_1k -> 0 for j < k. C(nu) = C0 + O(nu) below the
    diagonal and C_jk = (ratio bound of the higher-dimensional O-estimate)
    times ``little_o(nu)`` above it, so the o-version of that estimate holds.
    """
    little_o = little_o or (lambda x: x)
    C0 = random_lower_unipotent(rng, n) if C0 is None else np.asarray(C0, dtype=complex)
    ph0 = np.exp(2j * math.pi * rng.random(n))
    ph1 = np.exp(2j * math.pi * rng.random(n))
    lam0 = np.array([nu ** j for j in range(n)], dtype=complex) * ph0
    lam1 = np.array([nu ** (n - 1 - j) for j in range(n)], dtype=complex) * ph1
    C = C0.copy()
    for j in range(n):
        for k in range(n):
            z = (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2)
            if j > k:
                C[j, k] += nu * z
            elif j < k:
                bound = abs(lam1[j] / lam1[k] * lam0[k] / lam0[j])
                C[j, k] = bound * little_o(nu) * z
    return C0, C, lam0, lam1


def synthetic_rate_scale(lam0, lam1, C):
    """max(|nu_0|, |nu_1|, |u/(nu_0 nu_1)|) for n = 2."""
    nu0 = abs(lam0[1] / lam0[0])
    nu1 = abs(lam1[0] / lam1[1])
    return max(nu0, nu1, abs(C[0, 1]) / (nu0 * nu1))
