"""Closed-form identities every build must reproduce (the ``selftest`` command).

Each check yields ``(name, value, tol, ok)`` where ``value`` is an error
measure (0 or 1 for yes/no checks).
"""

import math

import mpmath
import numpy as np

from . import errors
from .family import (ConfluentFamily, Sector, associated_sectors, covers_punctured_disc,
                     dividing_rays, euler_family, is_generic, is_good_sector, monodromy_loop,
                     singularities)
from .integrator import CoefficientField, Path, ScaledMatrix, transfer_matrix
from .mobius import (INF, chordal, classify, evaluate_word, fixed_points, hyperbolic_push, maps_of,
                     normalize_word, parse_word, projectivize, typicality_check)
from .monodromy import (commutator, eigen_data_from_matrix, eigen_index, fractional_power,
                        monodromy_operators, projective_multiplier, to_numpy, transition_matrix)
from .stokes import formal_normal_form, stokes_for_family, triangularity_order


def _raises(fn, exc):
    try:
        fn()
    except exc:
        return True
    return False


def trivial_checks():
    out = []

    def check(name, value, tol=0.0):
        value = float(value)
        out.append((name, value, tol, value <= tol))

    def yes(name, cond):
        check(name, 0.0 if cond else 1.0)

    # integrator
    F = transfer_matrix(CoefficientField([np.diag([1, -1])], ()), Path.line(0, 1), tol=1e-12)
    check("constant diagonal field, segment 0->1", np.abs(F.to_array() - np.diag([math.e, 1 / math.e])).max(), 1e-10)
    fam = euler_family()
    field = fam.field(0.5)
    F = transfer_matrix(field, Path.circle(2 + 0j, 0.5), tol=1e-10)
    check("contractible loop gives identity", np.abs(F.to_array() - np.eye(2)).max(), 1e-9)
    Id = ScaledMatrix.identity(2)
    check("scaled identity product", (Id @ Id).distance(Id))
    P = ScaledMatrix(np.diag([1, 2]) / 2, math.log(2)) @ ScaledMatrix(np.diag([2, 1]) / 2, math.log(2))
    check("scaled diagonal product", np.abs(P.to_array() - 2 * np.eye(2)).max(), 1e-14)

    # family geometry
    a0, a1 = singularities(fam, 0.5)
    check("Euler singularities at eps=0.5", max(abs(a0 - 0.5j), abs(a1 + 0.5j)), 1e-15)
    rot = ConfluentFamily({(0, 0): np.diag([1, -1])}, complex(math.cos(math.pi / 3), math.sin(math.pi / 3)), (1, -1))
    b0, _ = singularities(rot, 1.0)
    check("label by sign of Im", abs(b0 - np.exp(1j * math.pi / 3)), 1e-15)
    real = ConfluentFamily({(0, 0): np.diag([1, -1])}, 1.0, (1, -1))
    yes("real roots raise LabelUndefined", _raises(lambda: singularities(real, 0.5), errors.LabelUndefined))
    rays = sorted(r.angle for r in dividing_rays(1, (1, -1), "real"))
    check("real dividing rays at 0 and pi", max(abs(rays[0]), abs(rays[1] - math.pi)), 1e-15)
    yes("sector (0, pi/4) not good", not is_good_sector(Sector(0, math.pi / 4), 1, (1, -1)))
    yes("sector wider than pi not good", not is_good_sector(Sector(-math.pi / 2 - 0.1, math.pi / 2 + 0.1), 1, (1, -1)))
    yes("Euler family generic", is_generic(fam, [0.5, 0.1], math.pi / 4))
    yes("real-root family not generic", not _generic_or_false(real))
    S0, S1 = associated_sectors(fam)
    yes("associated sectors good, cover, contain i eps",
        is_good_sector(S0, 1, fam.Lambda) and is_good_sector(S1, 1, fam.Lambda)
        and covers_punctured_disc([S0, S1]) and S0.contains(0.1j))
    loop = monodromy_loop(fam, 0.5, 0, -0.5)
    circ = loop.segments[1]
    check("loop circle center 0.5i radius 0.25", abs(circ.center - 0.5j) + abs(circ.radius - 0.25), 1e-15)
    yes("base point on singular line raises",
        _raises(lambda: monodromy_loop(fam, 0.5, 0, 0.3j), errors.BasePointOnSingularLine))

    # monodromy
    pair = monodromy_operators(fam, 0.5)
    ed0, ed1 = eigen_index(pair, fam)
    with mpmath.workprec(pair.prec):
        e = mpmath.exp(2 * mpmath.pi)
        check("Euler M0 eigenvalues e^(+-2pi)", max(float(abs(ed0.eigenvalues[0] / e - 1)),
                                                   float(abs(ed0.eigenvalues[1] * e - 1))), 1e-8)
        check("Euler M1 eigenvalues e^(-+2pi)", max(float(abs(ed1.eigenvalues[0] * e - 1)),
                                                   float(abs(ed1.eigenvalues[1] / e - 1))), 1e-8)
        check("Euler mu0 = e^(-4pi)", abs(float(abs(projective_multiplier(ed0))) / math.exp(-4 * math.pi) - 1), 1e-8)
        C = transition_matrix(ed0, ed1)
        check("Euler transition matrix identity", np.abs(C.to_numpy() - np.eye(2)).max(), 1e-8)
        K = commutator(pair, ed0, ed1, 0.4, 0.4)
        check("Euler commutator identity", np.abs(K.to_numpy() - np.eye(2)).max(), 1e-8)
        K00 = commutator(pair, ed0, ed1, 0.0, 0.0)
        check("d0 = d1 = 0 commutator identity", np.abs(K00.to_numpy() - np.eye(2)).max(), 1e-12)
        r = ed0.log_eigenvalues[0] / ed0.log_eigenvalues[1]
        check("Euler ln lambda01 / ln lambda02 = -1", abs(complex(r) + 1), 1e-12)
    D = eigen_data_from_matrix(np.diag([2.0, 1.0]))
    yes("diag(2,1) identity permutation", list(D.perm) == [0, 1])
    yes("equal moduli raise EigenvalueCollision",
        _raises(lambda: eigen_data_from_matrix(np.diag([1.0, -1.0])), errors.EigenvalueCollision))
    check("multiplier of eigenvalues (4,1)", abs(complex(projective_multiplier(eigen_data_from_matrix(np.diag([4.0, 1.0])))) - 0.25), 1e-14)
    check("multiplier of eigenvalues (2i,1)", abs(complex(projective_multiplier(eigen_data_from_matrix(np.diag([2j, 1.0])))) + 0.5j), 1e-14)
    D4 = eigen_data_from_matrix(np.diag([4.0, 1.0]))
    with mpmath.workprec(D4.prec):
        check("fractional power d = 1", np.abs(to_numpy(fractional_power(D4, 1)) - np.diag([4, 1])).max(), 1e-12)
        check("fractional power d = 0", np.abs(to_numpy(fractional_power(D4, 0)) - np.eye(2)).max(), 1e-12)
        check("diag(4,1)^(1/2) = diag(2,1)", np.abs(to_numpy(fractional_power(D4, 0.5)) - np.diag([2, 1])).max(), 1e-12)

    # Stokes
    fnf, trunc = formal_normal_form(np.array([np.diag([1.0, -1.0]), np.diag([0.5, 0.25])]), 10)
    check("diagonal A: H = I, b = A_1 diagonal",
          max(max(np.abs(h - (np.eye(2) if m == 0 else 0)).max() for m, h in enumerate(trunc.H)),
              np.abs(np.asarray(fnf.b1) - [0.5, 0.25]).max()), 1e-14)
    yes("resonant leading matrix raises",
        _raises(lambda: formal_normal_form(np.array([np.eye(2)]), 5), errors.ResonantLeadingMatrix))
    sp = stokes_for_family(fam)
    check("diagonal input: identity Stokes matrices", max(np.abs(sp.C0 - np.eye(2)).max(), np.abs(sp.C1 - np.eye(2)).max()))
    yes("order at t = 1 reversed", triangularity_order((1, -1), 1) == [1, 0])
    yes("tie on the dividing ray raises", _raises(lambda: triangularity_order((1, -1), 1j), ValueError))

    # Mobius
    m = projectivize(np.diag([4.0, 1.0]))
    fp = fixed_points(m)
    yes("diag(4,1): attractor inf, repeller 0", chordal(fp.attractor, INF) == 0 and chordal(fp.repeller, 0) == 0)
    check("diag(4,1): multiplier 1/4", abs(complex(fp.multiplier) - 0.25), 1e-15)
    check("identity projectivizes to the identity", chordal(projectivize(np.eye(2))(2 + 1j), 2 + 1j))
    par = projectivize([[1, 1], [0, 1]])
    yes("z -> z+1 is non-hyperbolic", classify(par) == "non-hyperbolic" and chordal(par(1), 2) < 1e-15)
    fp2 = fixed_points(projectivize(np.diag([2.0, 1.0])))
    check("z -> 2z multiplier 1/2", abs(complex(fp2.multiplier) - 0.5), 1e-15)
    yes("M0 M1 is a complete power", normalize_word([(0, 1), (1, 1)]).classification == "complete-power")
    yes("M1 M0 is reduced", parse_word("ba").reduced)
    w = normalize_word([(0, 1), (0, -1), (1, 1)])
    yes("M0 M0^-1 M1 cancels to M1", str(w) == "b" and w.reduced)
    m0, m1 = maps_of(pair)
    check("empty word is the identity", chordal(evaluate_word(parse_word(""), m0, m1)(3), 3))
    with mpmath.workprec(pair.prec):
        check("single letter word", float(max(abs(x - y) for x, y in zip(
            (m0.a, m0.b, m0.c, m0.d), (lambda q: (q.a, q.b, q.c, q.d))(evaluate_word(parse_word("a"), m0, m1))))))
        check("Euler m0 m1 is the identity", chordal(evaluate_word(parse_word("ab"), m0, m1)(2 + 1j), 2 + 1j), 1e-12)
    yes("typicality: z -> 2z with {1, -1, 3i, inf}",
        typicality_check(projectivize(np.diag([2.0, 1.0])), [1, -1, 3j, INF], K=10))
    yes("typicality: Euler limit fails", not typicality_check(projectivize(np.eye(2)), [INF, 0, INF, 0]))
    g = projectivize([[2.0, 1.0], [1.0, 1.0]])
    p11 = 0.3 + 0.1j
    yes("typicality: planted p01 = m^2(p11) fails",
        not typicality_check(g, {"p01": (g @ g)(p11), "p02": 5.0, "p11": p11, "p12": -7.0}))
    maps = [projectivize(np.diag([lam, 1.0])) for lam in (1e2, 1e4, 1e8)]
    yes("push of 1 under z -> lambda z tends to inf", hyperbolic_push(maps, 1.0).ok)
    yes("push from the repeller raises", _raises(lambda: hyperbolic_push(maps, 0.0), errors.SampleNearRepeller))
    return out


def _generic_or_false(fam):
    try:
        return is_generic(fam, [0.5, 0.1])
    except errors.ConfluenceError:
        return False
