"""Acceptance criteria 1-9, each at its stated tolerance.

Every test records a one-line verdict that the terminal summary prints
(see conftest.py). Where a criterion is stated in a form that cannot hold,
the literal check is kept and left failing; a companion check measures the
form that does hold. The reasoning for each is in notes/decisions.md.
"""

import math
import time

import mpmath
import numpy as np
import pytest

from conftest import T3_GRID, record
from confluence.family import euler_family
from confluence.mobius import (all_words, complete_power_word, evaluate_word, limit_data, maps_of,
                               typicality_check)
from confluence.monodromy import (asymptotics_report, complete_monodromy_check, eigen_index,
                                  monodromy_operators, mp_scaled, synthetic_commutator,
                                  synthetic_family)
from confluence.stokes import stokes_for_family

TOL = 1e-10


def _distances(t3_sweep, t3_stokes):
    pts, _ = t3_sweep
    Z0 = t3_stokes.bases[0].at(-0.5 + 0j)
    return [pt.K.distance(Z0, t3_stokes.C0) for pt in pts]


# 1 -------------------------------------------------------------------------------------


def test_c1_euler_eigenvalues():
    fam = euler_family()
    t = time.perf_counter()
    worst = 0.0
    for eps in (0.5, 0.25, 0.125):
        pair = monodromy_operators(fam, eps)
        ed0, ed1 = eigen_index(pair, fam)
        with mpmath.workprec(pair.prec):
            e = mpmath.exp(mpmath.pi / eps)
            for ed in (ed0, ed1):
                big = max(ed.eigenvalues, key=abs)
                small = min(ed.eigenvalues, key=abs)
                worst = max(worst, float(abs(big / e - 1)), float(abs(small * e - 1)))
    elapsed = time.perf_counter() - t
    ok = worst <= 1e-8 and elapsed < 10
    record("1", ok, f"max rel error {worst:.2e} (<= 1e-8), {elapsed:.1f} s (< 10 s)")
    assert worst <= 1e-8
    assert elapsed < 10


def test_c1_reference_value():
    # e^(2 pi) at eps = 0.5
    pair = monodromy_operators(euler_family(), 0.5)
    ed0, _ = eigen_index(pair, euler_family())
    big = max(ed0.eigenvalues, key=abs)
    assert abs(complex(big) - 535.4916555247646) < 1e-6 * 535.49


# 2 -------------------------------------------------------------------------------------


def test_c2_commutator_converges_to_stokes(t3_sweep, t3_stokes):
    dist = _distances(t3_sweep, t3_stokes)
    elapsed = t3_sweep[1]
    mono = all(b < a for a, b in zip(dist[2:], dist[3:]))
    ok = mono and dist[-1] <= 1e-2 and elapsed < 300
    record("2", ok, "distances " + " ".join(f"{d:.2e}" for d in dist)
           + f"; monotone k>=2: {mono}; sweep {elapsed:.0f} s (< 300 s)")
    assert mono
    assert dist[-1] <= 1e-2
    assert elapsed < 300


# 3 -------------------------------------------------------------------------------------


def test_c3_transition_matrix_matches_oracle(t3_sweep, t3_stokes):
    pts, _ = t3_sweep
    C = pts[-1].C.to_numpy()
    err = np.abs(C - t3_stokes.C0).max()
    u = [abs(pt.C.u) for pt in pts]  # mpmath: |u| underflows doubles at small eps
    shrinking = all(b < a for a, b in zip(u, u[1:]))
    ok = err <= 1e-3 and shrinking and u[-1] < 1e-3
    record("3", ok, f"max entry error {err:.2e} (<= 1e-3) at eps={pts[-1].eps:g}; "
           f"|u| {mpmath.nstr(u[0], 2)} -> {mpmath.nstr(u[-1], 2)}, decreasing: {shrinking}")
    assert err <= 1e-3
    assert shrinking and u[-1] < 1e-3


# 4 -------------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def asym(t3, t3_sweep):
    return asymptotics_report(t3, T3_GRID, points=t3_sweep[0])


def test_c4_literal_u_times_mu1(asym, t3_stokes):
    c1 = complex(t3_stokes.c1)
    d = [abs(complex(r.u_times_mu1) + c1) for r in asym]
    dec = all(b < a for a, b in zip(d, d[1:]))
    ok = dec and d[-1] <= 0.05 * abs(c1)
    record("4", ok, f"literal |u mu1 + c1|: {d[0]:.2e} -> {d[-1]:.2e} vs 0.05|c1| = "
           f"{0.05 * abs(c1):.3f}; decreasing: {dec}")
    assert dec
    assert d[-1] <= 0.05 * abs(c1)


def test_c4_u_over_mu1_form(asym, t3_stokes):
    # with mu1 the small/big multiplier, u decays like mu1 and u/mu1 carries the limit
    c1 = complex(t3_stokes.c1)
    d = [abs(complex(r.u_over_mu1) + c1) for r in asym]
    dec = all(b < a for a, b in zip(d[2:], d[3:]))
    ok = dec and d[-1] <= 0.05 * abs(c1)
    record("4 (u/mu1 form)", ok, "|u/mu1 + c1|: " + " ".join(f"{x:.2e}" for x in d)
           + f"; <= {0.05 * abs(c1):.3f}")
    assert dec
    assert d[-1] <= 0.05 * abs(c1)


# 5 -------------------------------------------------------------------------------------


def test_c5_log_ratios(asym):
    row = next(r for r in asym if abs(r.eps - 0.05) < 1e-12)
    a = abs(complex(row.ratio_lambda) + 1)
    b = abs(complex(row.ratio_mu) - 1)
    ok = a <= 0.1 and b <= 0.1
    record("5", ok, f"|ln l01/ln l02 + 1| = {a:.2e}, |ln mu0/ln mu1 - 1| = {b:.2e} (<= 0.1)")
    assert a <= 0.1
    assert b <= 0.1


# 6 -------------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def t3_limit(t3, t3_stokes):
    return limit_data(t3, -0.5, t3_stokes)


def test_c6_reduced_words_diverge(t3_sweep):
    pts, _ = t3_sweep
    p_hi = next(pt.pair for pt in pts if abs(pt.eps - 0.4) < 1e-12)
    p_lo = next(pt.pair for pt in pts if abs(pt.eps - 0.05) < 1e-12)
    t = time.perf_counter()
    words = [w for w in all_words(6) if w.reduced]
    maps_hi, maps_lo = maps_of(p_hi), maps_of(p_lo)
    worst, worst_w = math.inf, None
    for w in words:
        g = float(evaluate_word(w, *maps_lo).norm() / evaluate_word(w, *maps_hi).norm())
        if g < worst:
            worst, worst_w = g, str(w)
    elapsed = time.perf_counter() - t
    ok = worst >= 10 and elapsed < 600
    record("6", ok, f"{len(words)} reduced words, min norm growth {worst:.1e} ({worst_w}) >= 10; "
           f"{elapsed:.0f} s (< 600 s)")
    assert worst >= 10
    assert elapsed < 600


def test_c6_complete_powers_stay_bounded(t3_sweep, t3_limit):
    pts, _ = t3_sweep
    lo, hi = math.inf, 0.0
    for pt in pts:
        m0, m1 = maps_of(pt.pair)
        for k in (-3, -2, -1, 1, 2, 3):
            with mpmath.workprec(pt.pair.prec):
                r = float(evaluate_word(complete_power_word(k), m0, m1).norm() / (t3_limit.m ** k).norm())
            lo, hi = min(lo, r), max(hi, r)
    ok = lo >= 0.5 and hi <= 2
    record("6 (complete powers)", ok, f"norm / limit norm in [{lo:.2f}, {hi:.2f}] (within factor 2)")
    assert lo >= 0.5 and hi <= 2


def test_c6_premise_t3_typical(t3_limit):
    # stated as a premise; measured here. The limit map is elliptic of
    # order 5, so its iterates return lines to themselves.
    typ = typicality_check(t3_limit.m, t3_limit.points, K=8)
    record("6 (premise: T3 typical up to K=8)", typ, f"typicality_check -> {typ}; "
           f"trace of limit map {complex(t3_limit.m.trace()):.4f}")
    assert typ


# 7 -------------------------------------------------------------------------------------


def _synthetic_errors(n, nu, count=100):
    errs = []
    for seed in range(count):
        C0, C, l0, l1 = synthetic_family(np.random.default_rng(seed), n, nu)
        errs.append(np.abs(synthetic_commutator(C, l0, l1) - C0).max())
    return np.array(errs)


def test_c7_literal_1e6_at_nu_1e4():
    e2 = _synthetic_errors(2, 1e-4)
    e3 = _synthetic_errors(3, 1e-4, count=10)
    worst = max(e2.max(), e3.max())
    ok = worst <= 1e-6
    record("7", ok, f"max distance at nu=1e-4: n=2 {e2.max():.2e}, n=3 {e3.max():.2e} (<= 1e-6)")
    assert worst <= 1e-6


def test_c7_rate_is_first_order():
    rows = []
    for n, count in ((2, 100), (3, 10)):
        for nu in (1e-2, 1e-3, 1e-4):
            rows.append((n, nu, _synthetic_errors(n, nu, count).max()))
    ratios = [e / nu for _, nu, e in rows]
    ok = max(ratios) < 10
    record("7 (rate)", ok, "max error/nu " + " ".join(f"n{n}:{nu:g}:{e / nu:.1f}" for n, nu, e in rows)
           + " (< 10)")
    assert max(ratios) < 10


# 8 -------------------------------------------------------------------------------------


def test_c8_structural_invariants(t3_sweep, t3_stokes, t2):
    pts, _ = t3_sweep
    det = max(max(pt.K.det_error, pt.K_right.det_error) for pt in pts)
    sp2 = stokes_for_family(t2)
    keys = ("C0_offtriangle", "C0_diag", "C1_offtriangle", "C1_diag")
    tri = max(sp.residuals[k] for sp in (t3_stokes, sp2) for k in keys)
    e = stokes_for_family(euler_family())
    exact = np.array_equal(e.C0, np.eye(2)) and np.array_equal(e.C1, np.eye(2))
    ok = det <= 1e-8 and tri <= 1e-6 and exact
    record("8", ok, f"|det K - 1| max {det:.1e} (<= 1e-8); Stokes pre-projection residual "
           f"{tri:.1e} (<= 1e-6); diagonal input exact identity: {exact}")
    assert det <= 1e-8
    assert tri <= 1e-6
    assert exact


# 9 -------------------------------------------------------------------------------------


def test_c9_self_check_and_homotopy(t3, t3_stokes):
    e = euler_family()
    checks = {}
    for fam, name, eps, eng in ((e, "E", 0.5, "double"), (e, "E", 0.125, "double"),
                                (t3, "T3", 0.25, "double"), (t3, "T3", 0.4, "taylor"),
                                (t3, "T3", 0.1, "taylor")):
        p = monodromy_operators(fam, eps, engine=eng, tol=TOL, self_check=True)
        checks[f"{name}@{eps:g}"] = p.info["self_check"]
    checks["Stokes bases"] = t3_stokes.residuals["self_check"]
    worst_sc = max(checks.values())

    homot = {}
    for fam, name, eps in ((e, "E", 0.125), (t3, "T3", 0.25)):
        a = monodromy_operators(fam, eps, engine="double", tol=TOL)
        b = monodromy_operators(fam, eps, engine="double", tol=TOL, loops="straight")
        for i, (x, y) in enumerate(((a.M0_mp, b.M0_mp), (a.M1_mp, b.M1_mp))):
            homot[f"M{i} {name}@{eps:g}"] = mp_scaled(x).distance(mp_scaled(y))
    pt = monodromy_operators(t3, 0.1, engine="taylor")
    homot["M0M1 vs |t|=1/2 T3@0.1"] = complete_monodromy_check(t3, pt, tol=TOL)[0]
    worst_h = max(homot.values())
    ok = worst_sc <= 10 * TOL and worst_h <= 10 * TOL
    record("9", ok, f"max self-check {worst_sc:.1e}, max homotopy gap {worst_h:.1e} over "
           f"{len(homot)} loop comparisons (<= {10 * TOL:g})")
    assert worst_sc <= 10 * TOL, checks
    assert worst_h <= 10 * TOL, homot
