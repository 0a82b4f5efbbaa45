import math
import pickle
import warnings

import mpmath
import numpy as np
import pytest

from confluence.errors import EigenvalueCollision
from confluence.monodromy import (asymptotics_report, commutator, complete_monodromy_check,
                                  conjugated_by_diagonal, eigen_data_from_matrix, eigen_index,
                                  fractional_power, monodromy_operators, mp_scaled,
                                  projective_multiplier, random_lower_unipotent, residue_logs,
                                  sweep, synthetic_commutator, synthetic_family,
                                  synthetic_rate_scale, to_numpy, transition_matrix,
                                  unperturbed_monodromy, working_bits)


def test_residue_logs_euler(euler):
    # residue of diag(1,-1)/((t - i eps)(t + i eps)) at i eps is diag(1,-1)/(2 i eps); times 2 pi i
    logs = residue_logs(euler, 0.25, 0)
    assert np.allclose(logs, [math.pi / 0.25, -math.pi / 0.25])


def test_working_bits_cover_the_spread(t3):
    assert working_bits(t3, 0.05) * math.log10(2) > 2 * math.pi / 0.05 / math.log(10)


def test_euler_transition_is_identity(euler):
    pair = monodromy_operators(euler, 0.25)
    ed0, ed1 = eigen_index(pair, euler)
    C = transition_matrix(ed0, ed1)
    assert np.abs(C.to_numpy() - np.eye(2)).max() < 1e-10
    assert ed0.ordering_ok and ed1.ordering_ok


def test_eigen_index_ordering(euler):
    # eigenvector j tends to the canonical line of lambda_j: for M0, lambda_1 = 1 has modulus e^(pi/eps)
    pair = monodromy_operators(euler, 0.25)
    ed0, ed1 = eigen_index(pair, euler)
    assert ed0.moduli_log()[0] > 0 > ed0.moduli_log()[1]
    assert ed1.moduli_log()[0] < 0 < ed1.moduli_log()[1]
    with mpmath.workprec(pair.prec):
        assert mp_scaled(ed0.reconstruct()).distance(pair.M0) < 1e-12


def test_complete_monodromy_tends_to_unperturbed(t3):
    F = unperturbed_monodromy(t3)
    d = []
    for eps in (0.2, 0.1, 0.05, 0.025):
        pair = monodromy_operators(t3, eps)
        err, _ = complete_monodromy_check(t3, pair)
        assert err < 1e-10
        with mpmath.workprec(pair.prec):
            d.append(mp_scaled(pair.product()).distance(F))
    assert all(b < a for a, b in zip(d, d[1:]))
    assert d[-1] < 0.05


def test_engines_switch_automatically(t3):
    assert monodromy_operators(t3, 0.5).engine == "double"
    assert monodromy_operators(t3, 0.1).engine == "taylor"
    with pytest.raises(ValueError):
        monodromy_operators(t3, 0.5, engine="euler")


def test_pair_pickles_exactly(t3):
    p = monodromy_operators(t3, 0.1)
    q = pickle.loads(pickle.dumps(p))
    with mpmath.workprec(p.prec):
        assert mpmath.mnorm(p.M0_mp - q.M0_mp, 1) == 0
        assert mpmath.mnorm(p.M1_mp - q.M1_mp, 1) == 0


def test_parallel_sweep_is_deterministic(t3):
    grid = [0.3, 0.15]
    a = sweep(t3, grid, workers=1)
    b = sweep(t3, grid, workers=2)
    for x, y in zip(a, b):
        with mpmath.workprec(x.pair.prec):
            assert mpmath.mnorm(x.K.K - y.K.K, 1) == 0


def test_eigen_data_from_matrix():
    D = eigen_data_from_matrix(np.array([[1.0, 5.0], [0.0, 3.0]]))
    assert abs(complex(D.eigenvalues[0]) - 3) < 1e-14  # larger modulus first
    assert abs(complex(D.eigenvalues[1]) - 1) < 1e-14
    with pytest.raises(EigenvalueCollision):
        eigen_data_from_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_projective_multiplier():
    assert abs(complex(projective_multiplier(eigen_data_from_matrix(np.diag([-3.0, 1.5])))) + 0.5) < 1e-14


def test_fractional_powers_compose(rng):
    M = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    ed = eigen_data_from_matrix(M)
    with mpmath.workprec(ed.prec):
        half = fractional_power(ed, 0.5)
        assert np.abs(to_numpy(half * half) - M).max() < 1e-12
        a, b = fractional_power(ed, 0.3), fractional_power(ed, 0.7)
        assert np.abs(to_numpy(a * b) - M).max() < 1e-12
        assert np.abs(to_numpy(fractional_power(ed, 1)) - M).max() < 1e-12


def test_commutator_determinant_and_warning(t3):
    pair = monodromy_operators(t3, 0.1)
    ed0, ed1 = eigen_index(pair, t3)
    K = commutator(pair, ed0, ed1, 0.4, 0.4)
    assert K.det_error < 1e-30
    with pytest.warns(UserWarning):
        commutator(pair, ed0, ed1, 0.7, 0.6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        commutator(pair, ed0, ed1, 0.2, 0.3)


def test_right_commutator_tends_to_c1(t3_sweep, t3_stokes):
    pts, _ = t3_sweep
    Z1 = t3_stokes.bases[1].at(0.5 + 0j)
    d = [pt.K_right.distance(Z1, t3_stokes.C1) for pt in pts]
    assert all(b < a for a, b in zip(d[2:], d[3:]))
    assert d[-1] < 1e-2


def test_asymptotic_ratios_typical(typical):
    grid = [0.2, 0.1, 0.05]
    rows = asymptotics_report(typical, grid)
    r = [abs(complex(x.ratio_lambda) + 1) for x in rows]
    assert r[-1] <= 0.1
    m = [abs(complex(x.ratio_mu) - 1) for x in rows]
    assert m[-1] <= 0.1
    with pytest.raises(ValueError):
        asymptotics_report(typical, [0.1, 0.2])


def test_conjugation_by_diagonal_kills_upper_part(rng):
    # entry (j, k) of Lambda^-1 C Lambda is C_jk lambda_k/lambda_j: decreasing lambda
    # shrinks the upper part by at least nu and leaves the diagonal alone
    C0 = random_lower_unipotent(rng, 3)
    C = C0 + np.triu(rng.standard_normal((3, 3)), 1)
    for nu in (1e-3, 1e-6):
        out = conjugated_by_diagonal(C, np.array([1, nu, nu ** 2]))
        assert np.allclose(np.diag(out), 1)
        assert np.abs(np.triu(out, 1)).max() <= nu * np.abs(np.triu(C, 1)).max()


@pytest.mark.parametrize("n", [2, 3])
def test_synthetic_commutator_rate(n):
    for nu in (1e-2, 1e-3, 1e-4):
        worst = 0.0
        for seed in range(20):
            C0, C, l0, l1 = synthetic_family(np.random.default_rng(seed), n, nu)
            worst = max(worst, np.abs(synthetic_commutator(C, l0, l1) - C0).max())
        assert worst < 10 * nu


def test_synthetic_rate_scale():
    C0, C, l0, l1 = synthetic_family(np.random.default_rng(1), 2, 1e-3)
    s = synthetic_rate_scale(l0, l1, C)
    assert 1e-4 < s < 1e-2
