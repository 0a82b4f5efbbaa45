"""Formal normal form, sectorial canonical bases and Stokes matrices of
t^2 z' = A(t) z with A(0) = diag(Lambda) having distinct entries.

The canonical basis on a good sector is seeded from the least-term
truncation of the normalizing series on the sector bisector and then
transported with the double-precision integrator. Everything here is
independent of the perturbed family, so it serves as ground truth for the
confluence limits.
"""

import cmath
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import CoverFailure, MatchingRadiusTooLarge, ResonantLeadingMatrix
from .family import Sector, covers_punctured_disc, intersection_components
from .integrator import CoefficientField, Path, PathSegment, transfer_matrix


@dataclass(frozen=True)
class FormalNormalForm:
    """b_i(t) = lam_i + b1_i t (rank one, so degree <= 1)."""

    Lambda: np.ndarray
    b1: np.ndarray

    def b(self, t):
        return self.Lambda + self.b1 * t


@dataclass(frozen=True)
class TruncatedNormalization:
    H: list
    N: int
    residual: float


def _leading(coeffs):
    A = np.asarray(coeffs, dtype=complex)
    A0 = A[0]
    if np.abs(A0 - np.diag(np.diag(A0))).max() > 0:
        raise ValueError("A(0) must be diagonal; normalize the family first")
    lam = np.diag(A0).copy()
    for i in range(len(lam)):
        for j in range(i + 1, len(lam)):
            if abs(lam[i] - lam[j]) == 0:
                raise ResonantLeadingMatrix(f"repeated eigenvalue {lam[i]} of A(0)")
    return A, lam


def formal_normal_form(coeffs, N):
    """Coefficients H_0 = I, ..., H_N of the normalizing series and the normal form.

    Order m of A H - t^2 H' = H B with B = Lambda + B1 t reads
    sum_p A_p H_{m-p} - (m-1) H_{m-1} = H_m Lambda + H_{m-1} B1.
    Its off-diagonal part fixes offdiag(H_m); its diagonal part fixes
    diag(H_{m-1}), so one extra order is computed internally.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    A, lam = _leading(coeffs)
    n = len(lam)
    P = A.shape[0]

    def Ap(p):
        return A[p] if p < P else np.zeros((n, n), complex)

    B1 = np.diag(np.diag(Ap(1)))
    off = ~np.eye(n, dtype=bool)
    dl = lam[:, None] - lam[None, :]
    dl[~off] = 1.0
    H = [np.eye(n, dtype=complex)]
    H1 = np.where(off, -Ap(1) / dl, 0)
    H.append(H1)
    for m in range(2, N + 2):
        prev = H[m - 1]
        s = sum((Ap(p) @ H[m - p] for p in range(2, m + 1)), np.zeros((n, n), complex))
        offprev = np.where(off, prev, 0)
        np.fill_diagonal(prev, np.diag(Ap(1) @ offprev + s) / (m - 1))
        R = (m - 1) * prev - sum(Ap(p) @ H[m - p] for p in range(1, m + 1)) + prev @ B1
        H.append(np.where(off, R / dl, 0))
    H = H[:N + 1]
    fnf = FormalNormalForm(lam, np.diag(B1).copy())
    res = normal_form_residual(A, H, fnf)
    return fnf, TruncatedNormalization(H, N, res)


def normal_form_residual(coeffs, H, fnf):
    """Largest coefficient of A H - t^2 H' - H B through the order of H (relative)."""
    A = np.asarray(coeffs, dtype=complex)
    n = len(fnf.Lambda)
    L = np.diag(fnf.Lambda)
    B1 = np.diag(fnf.b1)
    worst = 0.0
    for m in range(len(H)):
        lhs = sum((A[p] @ H[m - p] for p in range(min(m, A.shape[0] - 1) + 1)), np.zeros((n, n), complex))
        if m >= 1:
            lhs = lhs - (m - 1) * H[m - 1] - H[m - 1] @ B1
        lhs = lhs - H[m] @ L
        scale = max(1.0, max(np.abs(h).max() for h in H[max(0, m - A.shape[0]):m + 1]))
        worst = max(worst, np.abs(lhs).max() / scale)
    return worst


def least_term(H, r):
    """(N*, minimal term) for the series sum H_m t^m at |t| = r."""
    norms = [np.abs(h).max() * r ** m for m, h in enumerate(H)]
    N = int(np.argmin(norms[1:]) + 1)
    return N, norms[N]


def choose_matching_radius(H, target=1e-9, r_max=0.25, shrink=0.95):
    """Largest radius (on a geometric grid below r_max) whose least term is <= target."""
    r = r_max
    while r > 1e-3:
        N, term = least_term(H, r)
        if term <= target and N < len(H) - 1:
            return r, N, term
        r *= shrink
    raise MatchingRadiusTooLarge("no radius with least term below target")


def _W(fnf, t, arg):
    """diag(exp(-lam_i/t) t^{b1_i}) with log t = ln|t| + i arg."""
    logt = math.log(abs(t)) + 1j * arg
    return np.diag(np.exp(-fnf.Lambda / t + fnf.b1 * logt))


class CanonicalBasis:
    """Canonical sectorial basis Z = H W on a good sector.

    Call with a point given in polar form ``(radius, angle)``; the angle is
    taken literally as the branch of arg t, so it must lie in the sector's
    angular range (angles beyond it continue the basis analytically).
    """

    def __init__(self, coeffs, sector, fnf, trunc, r_star, tol=1e-12, match_tol=1e-9):
        self.coeffs = np.asarray(coeffs, dtype=complex)
        self.sector = sector
        self.fnf = fnf
        self.trunc = trunc
        self.r_star = r_star
        self.tol = tol
        self.N_star, self.seed_error = least_term(trunc.H, r_star)
        if self.seed_error > match_tol:
            raise MatchingRadiusTooLarge(f"least term {self.seed_error:.2e} at r*={r_star}")
        self.field = CoefficientField(self.coeffs, (0j, 0j))
        th = sector.bisector
        self.seed_angle = th
        self.seed_point = r_star * cmath.exp(1j * th)
        t = self.seed_point
        Ht = sum(trunc.H[m] * t ** m for m in range(self.N_star))
        self.seed = Ht @ _W(fnf, t, th)
        self.self_checks = []

    def path_to(self, radius, angle):
        th = self.seed_angle
        segs = []
        p = radius * cmath.exp(1j * th)
        if abs(radius - self.r_star) > 0:
            segs.append(PathSegment.line(self.seed_point, p))
        if angle != th:
            segs.append(PathSegment.arc(0, radius, th / math.pi, angle / math.pi))
        return Path(tuple(segs)) if segs else None

    def __call__(self, radius, angle):
        path = self.path_to(radius, angle)
        if path is None:
            return self.seed.copy()
        F = transfer_matrix(self.field, path, tol=self.tol, d_min=0.0, self_check=True)
        self.self_checks.append(F.stats["self_check"])
        return F.to_array() @ self.seed

    def at(self, t, angle=None):
        """Value at complex ``t``; ``angle`` selects the branch (default: lifted into the sector)."""
        if angle is None:
            a = math.atan2(t.imag, t.real)
            angle = self.sector.theta1 + (a - self.sector.theta1) % (2 * math.pi)
        return self(abs(t), angle)


def canonical_basis(coeffs, sector, fnf=None, trunc=None, r_star=None, **kw):
    if fnf is None or trunc is None:
        fnf, trunc = formal_normal_form(coeffs, 120)
    if r_star is None:
        r_star, _, _ = choose_matching_radius(trunc.H)
    return CanonicalBasis(coeffs, sector, fnf, trunc, r_star, **kw)


# -- Stokes matrices --------------------------------------------------------------


def triangularity_order(Lambda, t, k=1):
    """Permutation sorting Re(lam_j / t^k) increasingly (0-based indices)."""
    vals = [(complex(l) / complex(t) ** k).real for l in Lambda]
    s = sorted(vals)
    for a, b in zip(s[:-1], s[1:]):
        if abs(a - b) <= 1e-12 * max(1.0, abs(a), abs(b)):
            raise ValueError(f"tie in Re(lambda/t^k) at t={t}")
    return [int(i) for i in np.argsort(vals, kind="stable")]


def lower_in_order(C, order):
    """Entries of C that must vanish for C to be lower-triangular in ``order``, and |diag - 1|."""
    n = C.shape[0]
    upper = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            upper = max(upper, abs(C[order[a], order[b]]))
    diag = np.abs(np.diag(C) - 1).max()
    return upper, diag


def project_lower(C, order):
    out = C.copy()
    n = C.shape[0]
    for a in range(n):
        for b in range(a + 1, n):
            out[order[a], order[b]] = 0
    np.fill_diagonal(out, 1)
    return out


@dataclass
class StokesPair:
    C0: np.ndarray
    C1: np.ndarray
    C0_raw: np.ndarray
    C1_raw: np.ndarray
    residuals: dict
    projected: bool
    fnf: FormalNormalForm = None
    r_star: float = None
    N_star: int = None
    bases: tuple = dc_field(default=None, repr=False)
    points: dict = dc_field(default_factory=dict)

    @property
    def c0(self):
        """Lower-left entry of C0 (n = 2)."""
        return self.C0[1, 0]

    @property
    def c1(self):
        """Upper-right entry of C1 (n = 2)."""
        return self.C1[0, 1]


def stokes_matrices(coeffs, S0, S1, r_star=None, R=0.5, N=120, tol=1e-12,
                    scale=None, check=1e-6):
    """Stokes matrices C0 (left component) and C1 (right component).

    Z^1 = Z^0 C0 on the left component; on the right Z^2 = Z^1 C1 where Z^2
    is Z^0 continued counterclockwise once around 0. Both are evaluated at
    radius ``R`` on the bisectors of the intersection components. ``scale``
    multiplies both canonical bases on the right by a constant diagonal.
    """
    if not covers_punctured_disc([S0, S1]):
        raise CoverFailure("sectors do not cover a punctured disc")
    coeffs = np.asarray(coeffs, dtype=complex)
    fnf, trunc = formal_normal_form(coeffs, N)
    if r_star is None:
        r_star, _, _ = choose_matching_radius(trunc.H)
    Z0 = CanonicalBasis(coeffs, S0, fnf, trunc, r_star, tol=tol)
    Z1 = CanonicalBasis(coeffs, S1, fnf, trunc, r_star, tol=tol)
    D = np.eye(len(fnf.Lambda)) if scale is None else np.diag(np.asarray(scale, dtype=complex))
    left, right = intersection_components(S0, S1)
    # angles as branches: left lies in both ranges; right is below S0 and above S1
    left0 = S0.theta1 + (left - S0.theta1) % (2 * math.pi)
    left1 = S1.theta1 + (left - S1.theta1) % (2 * math.pi)
    right0 = S0.theta1 + (right - S0.theta1) % (2 * math.pi)
    right1 = S1.theta1 + (right - S1.theta1) % (2 * math.pi)
    Z0L = Z0(R, left0) @ D
    Z1L = Z1(R, left1) @ D
    Z0R = Z0(R, right0) @ D
    Z1R = Z1(R, right1) @ D
    formal = np.diag(np.exp(2j * math.pi * fnf.b1))
    C0 = np.linalg.solve(Z0L, Z1L)
    C1 = np.linalg.solve(Z1R, Z0R @ np.linalg.solve(D, formal @ D))
    t_left = R * cmath.exp(1j * left)
    t_right = R * cmath.exp(1j * right)
    o0 = triangularity_order(fnf.Lambda, t_left)
    o1 = triangularity_order(fnf.Lambda, t_right)
    u0, d0 = lower_in_order(C0, o0)
    u1, d1 = lower_in_order(C1, o1)
    residuals = {"C0_offtriangle": u0, "C0_diag": d0, "C1_offtriangle": u1, "C1_diag": d1,
                 "seed_error": Z0.seed_error, "normal_form": trunc.residual,
                 "self_check": max(Z0.self_checks + Z1.self_checks)}
    ok = max(u0, d0, u1, d1) <= check
    P0 = project_lower(C0, o0) if ok else C0
    P1 = project_lower(C1, o1) if ok else C1
    return StokesPair(P0, P1, C0, C1, residuals, ok, fnf, r_star, Z0.N_star, (Z0, Z1),
                      {"left": t_left, "right": t_right, "left0": left0, "left1": left1,
                       "right0": right0, "right1": right1})


def stokes_for_family(fam, **kw):
    """Stokes pair of the unperturbed equation of a family with diagonal A(0,0)."""
    from .family import associated_sectors

    S0, S1 = associated_sectors(fam)
    return stokes_matrices(fam.unperturbed_coeffs(), S0, S1, **kw)


def default_sectors():
    return Sector(-math.pi / 4, 5 * math.pi / 4), Sector(3 * math.pi / 4, 9 * math.pi / 4)
