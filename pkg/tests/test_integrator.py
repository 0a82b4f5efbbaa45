import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from confluence import integrator
from confluence.errors import PathTooCloseToSingularity
from confluence.family import complete_loop
from confluence.integrator import (CoefficientField, Path, PathSegment, ScaledMatrix, trace_integral,
                                   transfer_matrix)

# a field with nonzero trace so the determinant identity is not trivial
FIELD = CoefficientField([[[1.0, 0.2], [0.3, 0.5j]], [[0.1, 0.0], [0.4, -0.2]]], (0.3j, -0.3j))


def test_path_segments_join():
    p = Path.polyline([0, 1, 1 + 1j])
    assert p.basepoint == 0 and p.end == 1 + 1j
    assert math.isclose(p.length, 2.0)
    with pytest.raises(ValueError):
        Path((PathSegment.line(0, 1), PathSegment.line(2, 3)))


def test_circle_is_closed_and_exact_at_quarter_angles():
    c = Path.circle(1j, 0.5, 0.5)
    assert c.loop
    assert c.basepoint == 1.5j
    assert abs(c.end - c.basepoint) < 1e-15
    assert math.isclose(c.length, math.pi, rel_tol=1e-14)


def test_arc_orientation_and_reverse():
    a = PathSegment.arc(0, 1, 0, 0.5)
    assert a.orientation == 1
    r = a.reversed()
    assert r.orientation == -1
    assert abs(r.start - a.end) < 1e-15


def test_distance_to_point():
    assert math.isclose(Path.line(-1, 1).distance_to(0.5j), 0.5)
    assert math.isclose(Path.circle(0, 1).distance_to(0.25), 0.75)


def test_scaled_matrix_roundtrip():
    a = np.array([[3e200, 1.0], [2.0, 5e-3]])
    s = ScaledMatrix.from_array(a)
    assert 0.5 <= np.abs(s.core).max() <= 2
    # exp(log_scale) amplifies the rounding of a log near 460 to ~1e-14
    assert np.allclose(s.to_array(), a, rtol=1e-12)
    assert s.distance(s) == 0


def test_scaled_product_keeps_huge_scales():
    big = ScaledMatrix(np.eye(2, dtype=complex), 900.0)
    p = big @ big
    assert math.isclose(p.log_scale.real, 1800.0)
    assert p.inverse().distance(ScaledMatrix(np.eye(2, dtype=complex), -1800.0)) < 1e-15


def test_constant_field_exponential():
    B = np.array([[0.3, 1.0], [-0.5, 0.1j]])
    F = transfer_matrix(CoefficientField([B], ()), Path.line(0, 1.5), tol=1e-12)
    from scipy.linalg import expm
    assert np.abs(F.to_array() - expm(1.5 * B)).max() < 1e-10


def test_determinant_matches_trace_quadrature():
    # det F = exp(integral of tr B), with the integral by scipy quadrature
    path = Path.polyline([-0.7, -0.1 + 0.6j, 0.6 + 0.2j])
    F = transfer_matrix(FIELD, path, tol=1e-12)
    lhs = cmath.exp(F.log_det())
    rhs = cmath.exp(trace_integral(FIELD, path))
    assert abs(lhs / rhs - 1) < 1e-8


def test_loop_determinant_picks_up_residues():
    # around both poles: exp(2 pi i (sum of residues of tr B))
    F = transfer_matrix(FIELD, Path.circle(0, 1.0), tol=1e-12)
    res = sum(np.trace(FIELD.A(s)) / (s - o) for s, o in ((0.3j, -0.3j), (-0.3j, 0.3j)))
    assert abs(cmath.exp(F.log_det()) / cmath.exp(2j * math.pi * res) - 1) < 1e-8


def test_clearance_error():
    with pytest.raises(PathTooCloseToSingularity):
        transfer_matrix(FIELD, Path.line(-1 + 0.3j, 1 + 0.3j))
    with pytest.raises(PathTooCloseToSingularity):
        transfer_matrix(FIELD, Path.line(-1, 0.3j))


def test_homotopic_paths_agree():
    a = transfer_matrix(FIELD, Path.polyline([-0.8, -0.8 + 1j, 0.8 + 1j, 0.8]), tol=1e-12)
    # upper half circle, clockwise from -0.8 to 0.8: both pass above 0.3i
    b = transfer_matrix(FIELD, Path.arc(0, 0.8, 1.0, 0.0), tol=1e-12)
    assert a.distance(b) < 1e-9


def test_reverse_path_inverts():
    p = Path.polyline([-0.7, 0.5j, 0.7 + 0.1j])
    F = transfer_matrix(FIELD, p, tol=1e-12)
    G = transfer_matrix(FIELD, p.reversed(), tol=1e-12)
    assert (F @ G).distance(ScaledMatrix.identity(2)) < 1e-9


def test_self_check_within_ten_tol():
    F = transfer_matrix(FIELD, complete_loop(-0.8), tol=1e-10, self_check=True)
    assert F.stats["self_check"] <= 1e-9


@pytest.mark.parametrize("path", [Path.circle(0, 0.8), Path.polyline([-1, 1j, 1])])
def test_backends_agree(path):
    if integrator.BACKEND != "cython":
        pytest.skip("compiled kernel not built")
    F = transfer_matrix(FIELD, path, tol=1e-10)
    prev = integrator.set_backend("python")
    try:
        G = transfer_matrix(FIELD, path, tol=1e-10)
    finally:
        integrator.set_backend(prev)
    assert F.distance(G) < 1e-13
    assert F.stats["accepted"] == G.stats["accepted"]


def test_unknown_backend():
    with pytest.raises(ValueError):
        integrator.set_backend("fortran")


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 2.0))
def test_scalar_constant_field(a, b, length):
    lam = complex(a, b)
    F = transfer_matrix(CoefficientField([[[lam]]], ()), Path.line(0, length), tol=1e-12)
    assert abs(F.to_array()[0, 0] / cmath.exp(lam * length) - 1) < 1e-9
