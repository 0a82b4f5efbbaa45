import cmath
import math

import mpmath
import numpy as np
import pytest

from confluence.errors import CoverFailure, ResonantLeadingMatrix
from confluence.family import ConfluentFamily, Sector, associated_sectors, coupled_family, euler_family
from confluence.stokes import (CanonicalBasis, choose_matching_radius, default_sectors,
                               formal_normal_form, normal_form_residual, stokes_for_family,
                               stokes_matrices, triangularity_order)

GOLDEN = (1 + math.sqrt(5)) / 2


def test_diagonal_input_gives_identity_exactly():
    sp = stokes_for_family(euler_family())
    assert np.array_equal(sp.C0, np.eye(2)) and np.array_equal(sp.C1, np.eye(2))
    assert sp.projected


def test_normal_form_of_diagonal_series():
    A = np.array([np.diag([1.0, -1.0]), np.diag([0.25, 0.5j])])
    fnf, trunc = formal_normal_form(A, 8)
    assert np.allclose(fnf.b1, [0.25, 0.5j])
    assert all(np.abs(h).max() == 0 for h in trunc.H[1:])


def test_normal_form_constant_coupling_residual():
    # a non-diagonal A(0) is diagonalized first; a constant coupling then disappears,
    # so the residual is checked on a polynomial coupling
    fam, _ = ConfluentFamily({(0, 0): [[1.0, 0.0], [0.3, -1.0]]}, 1j).normalized()
    assert np.abs(fam.A0 - np.diag([1, -1])).max() < 1e-15
    A = np.array([np.diag([1.0, -1.0]), [[0.2, 0.3], [0.3, -0.1]], [[0.0, 0.1j], [0.05, 0.0]]])
    fnf, trunc = formal_normal_form(A, 20)
    assert np.allclose(fnf.Lambda, [1, -1])
    assert np.allclose(fnf.b1, [0.2, -0.1])
    assert normal_form_residual(A, trunc.H, fnf) <= 1e-12
    assert np.array_equal(trunc.H[0], np.eye(2))


def test_resonant_leading_matrix():
    with pytest.raises(ResonantLeadingMatrix):
        formal_normal_form(np.array([np.eye(2)]), 4)


def test_t2_basis_column_matches_exponential_integral():
    # z1 = e^(-1/t), z2 = c e^(1/t) E1(2/t) solves the triangular system
    c = 0.3
    fam = coupled_family(c)
    S0, _ = associated_sectors(fam)
    fnf, trunc = formal_normal_form(fam.unperturbed_coeffs(), 120)

    def worst(r_star, angles):
        B = CanonicalBasis(fam.unperturbed_coeffs(), S0, fnf, trunc, r_star)
        out = 0.0
        for a in angles:
            t = 0.3 * cmath.exp(1j * a)
            Z = B.at(t)
            exact = c * complex(mpmath.exp(2 / t) * mpmath.e1(2 / t))
            out = max(out, abs(Z[0, 0] / cmath.exp(-1 / t) - 1), abs(Z[1, 0] / Z[0, 0] - exact))
        return out, B

    # default matching radius, from the bisector towards the left
    err, B = worst(choose_matching_radius(trunc.H)[0], [S0.bisector, 2.0, 2.5, 3.0])
    assert err <= 1e-8
    # the least-term estimate bounds the observed error within a factor 10
    assert err <= 10 * B.seed_error
    # towards arg t = 0 the column is recessive; a tighter match keeps it within 1e-8
    err, _ = worst(choose_matching_radius(trunc.H, target=1e-12)[0], [0.0, 0.7, 1.5])
    assert err <= 1e-8


def test_t2_stokes_triangular_system():
    for c in (0.1, 0.2, 0.3):
        sp = stokes_for_family(coupled_family(c))
        assert np.array_equal(sp.C1, np.eye(2))
        # c0 = gamma c with gamma = -2 pi i for the t-coupled triangular family
        assert abs(sp.c0 + 2j * math.pi * c) < 1e-9


def test_t3_stokes_golden_ratio():
    sp = stokes_for_family(coupled_family(0.3, 0.3))
    assert abs(sp.c0 + 1j * GOLDEN) < 1e-8
    assert abs(sp.c1 + 1j * GOLDEN) < 1e-8
    assert sp.C0[0, 1] == 0 and sp.C1[1, 0] == 0
    assert max(sp.residuals[k] for k in ("C0_offtriangle", "C0_diag", "C1_offtriangle", "C1_diag")) <= 1e-6


def test_matching_radius_independence():
    coeffs = coupled_family(0.3, 0.3).unperturbed_coeffs()
    S0, S1 = associated_sectors(coupled_family(0.3, 0.3))
    a = stokes_matrices(coeffs, S0, S1, r_star=0.1)
    b = stokes_matrices(coeffs, S0, S1, r_star=0.08)
    assert np.abs(a.C0 - b.C0).max() <= 1e-6
    assert np.abs(a.C1 - b.C1).max() <= 1e-6


def test_diagonal_rescaling_conjugates():
    coeffs = coupled_family(0.3, 0.2).unperturbed_coeffs()
    S0, S1 = associated_sectors(coupled_family(0.3, 0.2))
    D = np.array([2.0, 0.5j])
    a = stokes_matrices(coeffs, S0, S1)
    b = stokes_matrices(coeffs, S0, S1, scale=D)
    Dm = np.diag(D)
    for x, y in ((a.C0, b.C0), (a.C1, b.C1)):
        assert np.abs(np.linalg.solve(Dm, x @ Dm) - y).max() <= 1e-8


def test_cover_failure():
    coeffs = coupled_family(0.3).unperturbed_coeffs()
    with pytest.raises(CoverFailure):
        stokes_matrices(coeffs, Sector(-0.5, 1.0), Sector(1.5, 3.0))


def test_default_sectors_cover():
    S0, S1 = default_sectors()
    assert S0.contains(0.1j) and S1.contains(-0.1j)


def test_triangularity_order():
    assert triangularity_order((1, -1), -1) == [0, 1]
    assert triangularity_order((1, -1), 1) == [1, 0]
    with pytest.raises(ValueError):
        triangularity_order((1, -1), 1j)
