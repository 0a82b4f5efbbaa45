import math

import mpmath
import numpy as np

from confluence.family import conditioned_loop, coupled_family, euler_family
from confluence.integrator import Path, transfer_matrix
from confluence.monodromy import monodromy_operators, mp_scaled
from confluence.precise import bits_for, from_mpmath, precise_transfer, to_scaled


def test_bits_grow_like_inverse_eps():
    assert bits_for(0.1) > bits_for(0.4)
    # resolves exp(-2 pi/eps) with 40 guard digits
    assert bits_for(0.05) * math.log10(2) > 2 * math.pi / 0.05 / math.log(10) + 40


def test_taylor_matches_double_on_a_segment():
    fam = coupled_family(0.3, 0.3)
    path = Path.polyline([-0.5, -0.5 + 0.9j, 0.4 + 0.9j, 0.6])
    F = transfer_matrix(fam.field(0.4), path, tol=1e-12)
    M, info = precise_transfer(fam.precise_field(0.4, 120), path, 120)
    assert to_scaled(M).distance(F) < 1e-10
    assert info["steps"] > 0


def test_taylor_matches_double_on_a_loop():
    fam = coupled_family(0.3, 0.3)
    F = transfer_matrix(fam.field(0.4), conditioned_loop(fam, 0.4, 0), tol=1e-12)
    M, _ = precise_transfer(fam.precise_field(0.4, 160), conditioned_loop(fam, 0.4, 0), 160)
    assert to_scaled(M).distance(F) < 1e-9


def test_engines_agree_on_monodromy():
    fam = coupled_family(0.3, 0.3)
    a = monodromy_operators(fam, 0.4, engine="double")
    b = monodromy_operators(fam, 0.4, engine="taylor")
    with mpmath.workprec(b.prec):
        assert mp_scaled(b.M0_mp).distance(mp_scaled(a.M0_mp)) < 1e-9
        assert mp_scaled(b.M1_mp).distance(mp_scaled(a.M1_mp)) < 1e-9


def test_euler_eigenvalues_at_high_precision():
    # monodromy of z' = diag(1,-1) z/(t^2 + eps^2) around i eps is diag(e^(pi/eps), e^(-pi/eps))
    eps = 0.1
    p = monodromy_operators(euler_family(), eps, engine="taylor")
    with mpmath.workprec(p.prec):
        M = p.M0_mp
        e = mpmath.exp(mpmath.pi / eps)
        assert abs(M[0, 0] / e - 1) < mpmath.mpf(10) ** -40
        assert abs(M[1, 1] * e - 1) < mpmath.mpf(10) ** -40
        assert abs(M[0, 1]) < mpmath.mpf(10) ** -40


def test_from_mpmath_shape():
    m = mpmath.matrix([[1, 2j], [3, 4]])
    a = np.array(from_mpmath(m), dtype=complex)
    assert a.shape == (2, 2) and a[0, 1] == 2j
