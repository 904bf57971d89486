import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dispersion_control.dispersion import (
    DispersionError,
    DispersionTarget,
    EigenBasis2,
    Sym2,
    covariance,
    covariance_similar,
    degeneracy_tol,
    dispersion_error,
    eig_sym2,
    eig_sym2_batch,
    projection_coordinates,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def rot(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


# -- covariance ----------------------------------------------------------------


def test_cross_cloud():
    pc, C = covariance([(1, 0), (-1, 0), (0, 1), (0, -1)])
    assert pc.tolist() == [0, 0]
    assert C == Sym2(0.5, 0.0, 0.5)


def test_identical_points_zero_covariance():
    _, C = covariance([(2.5, -1.0)] * 5)
    assert C == Sym2(0.0, 0.0, 0.0)


def test_collinear_points_rank_one():
    pc, C = covariance([(0, 0), (1, 0), (2, 0)])
    assert pc.tolist() == [1, 0]
    assert C.c1 == pytest.approx(2 / 3, abs=1e-15)
    assert C.c2 == 0 and C.c3 == 0
    assert C.det == pytest.approx(0.0)


def test_population_denominator():
    # variance of {0, 2} is 1 with 1/N, would be 2 with 1/(N-1)
    _, C = covariance([(0, 0), (2, 0)])
    assert C.c1 == 1.0


def test_covariance_needs_two_points():
    with pytest.raises(ValueError):
        covariance([(0, 0)])


def test_covariance_matches_numpy():
    rng = np.random.default_rng(0)
    P = rng.normal(size=(30, 2))
    _, C = covariance(P)
    np.testing.assert_allclose(C.as_matrix(), np.cov(P.T, bias=True), atol=1e-14)


def test_covariance_is_psd():
    rng = np.random.default_rng(1)
    for _ in range(200):
        _, C = covariance(rng.normal(size=(int(rng.integers(2, 20)), 2)) * rng.uniform(0.01, 10))
        assert C.c1 >= 0 and C.c3 >= 0 and C.det >= -1e-12


def test_translation_invariance():
    rng = np.random.default_rng(2)
    for _ in range(100):
        P = rng.uniform(-3, 3, (25, 2))
        shift = rng.uniform(-100, 100, 2)
        _, C0 = covariance(P)
        pc1, C1 = covariance(P + shift)
        np.testing.assert_allclose(C1.as_vector(), C0.as_vector(), atol=1e-12, rtol=0)


def test_rotation_preserves_spectrum():
    rng = np.random.default_rng(3)
    for _ in range(100):
        P = rng.uniform(-3, 3, (25, 2))
        R = rot(rng.uniform(0, 2 * np.pi))
        a = eig_sym2(covariance(P)[1])
        b = eig_sym2(covariance(P @ R.T)[1])
        assert abs(a.lambda1 - b.lambda1) <= 1e-10
        assert abs(a.lambda2 - b.lambda2) <= 1e-10


# -- eigen-decomposition ---------------------------------------------------------


def test_identity_default_basis():
    b = eig_sym2(Sym2(1, 0, 1))
    assert (b.lambda1, b.lambda2) == (1, 1)
    assert b.v1 == (1.0, 0.0) and b.v2 == (0.0, 1.0)


def test_diagonal():
    b = eig_sym2(Sym2(4, 0, 1))
    assert (b.lambda1, b.lambda2) == (4, 1)
    assert b.v1 == (1.0, 0.0) and b.v2 == (0.0, 1.0)


def test_diagonal_swapped_order():
    b = eig_sym2(Sym2(1, 0, 4))
    assert (b.lambda1, b.lambda2) == (4, 1)
    assert b.v1 == (0.0, 1.0) and b.v2 == (1.0, 0.0)


def test_pauli_x():
    b = eig_sym2(Sym2(0, 1, 0))
    assert b.lambda1 == pytest.approx(1) and b.lambda2 == pytest.approx(-1)
    r = 1 / math.sqrt(2)
    np.testing.assert_allclose(b.v1, (r, r), atol=1e-15)
    np.testing.assert_allclose(b.v2, (r, -r), atol=1e-15)


def test_degenerate_reuses_previous_basis():
    r = 1 / math.sqrt(2)
    prev = EigenBasis2(3, 1, (r, r), (-r, r))
    b = eig_sym2(Sym2(2, 0, 2), prev)
    assert b.v1 == prev.v1 and b.v2 == prev.v2
    assert b.lambda1 == b.lambda2 == 2


def test_sign_continuity_against_previous():
    prev = EigenBasis2(4, 1, (-1.0, 0.0), (0.0, -1.0))
    b = eig_sym2(Sym2(4, 1e-3, 1), prev)
    assert b.v1[0] < 0 and b.v2[1] < 0


def test_continuity_along_rotation_sequence():
    # slowly rotating matrix: without continuity the canonical sign would flip v1
    prev = None
    for theta in np.linspace(0, 2 * np.pi, 400):
        R = rot(theta)
        C = Sym2.from_matrix(R @ np.diag([3.0, 1.0]) @ R.T)
        b = eig_sym2(C, prev)
        if prev is not None:
            assert np.dot(b.v1, prev.v1) > 0.99
            assert np.dot(b.v2, prev.v2) > 0.99
        prev = b


def _check_basis(C: Sym2, b: EigenBasis2, tol=1e-10):
    v1, v2 = np.array(b.v1), np.array(b.v2)
    assert b.lambda1 >= b.lambda2
    assert abs(v1 @ v1 - 1) <= 1e-12 and abs(v2 @ v2 - 1) <= 1e-12
    assert abs(v1 @ v2) <= 1e-12
    scale = max(1.0, abs(C.c1), abs(C.c2), abs(C.c3))
    np.testing.assert_allclose(b.reconstruct().as_vector(), C.as_vector(), atol=tol * scale, rtol=0)


def test_reconstruction_on_ten_thousand_random_inputs():
    rng = np.random.default_rng(7)
    c = rng.uniform(-10, 10, (10_000, 3))
    lam, v1, v2 = eig_sym2_batch(c)
    rec = (
        lam[:, :1] * np.stack([v1[:, 0] ** 2, v1[:, 0] * v1[:, 1], v1[:, 1] ** 2], 1)
        + lam[:, 1:] * np.stack([v2[:, 0] ** 2, v2[:, 0] * v2[:, 1], v2[:, 1] ** 2], 1)
    )
    assert np.abs(rec - c).max() <= 1e-10 * 10
    assert np.all(lam[:, 0] >= lam[:, 1])
    assert np.abs((v1 * v2).sum(1)).max() <= 1e-12
    assert np.abs(np.hypot(v1[:, 0], v1[:, 1]) - 1).max() <= 1e-12
    # cross-check eigenvalues against LAPACK
    M = np.stack([np.stack([c[:, 0], c[:, 1]], 1), np.stack([c[:, 1], c[:, 2]], 1)], 1)
    ref = np.linalg.eigvalsh(M)[:, ::-1]
    np.testing.assert_allclose(lam, ref, atol=1e-11)


@settings(max_examples=300, deadline=None)
@given(finite, finite, finite)
def test_eig_sym2_invariants(a, b, d):
    C = Sym2(a, b, d)
    gap = 2 * math.hypot(0.5 * (a - d), b)
    if gap <= degeneracy_tol(a + d):
        # inside the degeneracy band the fallback basis is only an eigenbasis up to the gap
        basis = eig_sym2(C)
        assert np.abs(basis.reconstruct().as_vector() - C.as_vector()).max() <= gap + 1e-12 * max(1, abs(a), abs(d))
    else:
        _check_basis(C, eig_sym2(C))


def test_near_degenerate_uses_fallback_basis():
    C = Sym2(60.0, 5.960464477539063e-08, 60.0)
    b = eig_sym2(C)
    assert b.v1 == (1.0, 0.0) and b.v2 == (0.0, 1.0)
    assert np.abs(b.reconstruct().as_vector() - C.as_vector()).max() <= degeneracy_tol(120.0)


# -- spectral error / similarity ---------------------------------------------------


def test_error_zero_at_target():
    e, _ = dispersion_error(Sym2(10, 0, 4), DispersionTarget(10, 4))
    assert (e.e1, e.e2) == (0, 0)


def test_error_subtraction():
    e, _ = dispersion_error(Sym2(1, 0, 1), DispersionTarget(10, 4))
    assert (e.e1, e.e2) == (-9, -3)


def test_error_uniform_cloud_example():
    # blue uniform cloud has eigenvalues 0.06 and 0.26
    e, _ = dispersion_error(Sym2(0.26, 0.0, 0.06), DispersionTarget(0.26, 0.06))
    assert (e.e1, e.e2) == (0.0, 0.0)


def test_error_lower_bound():
    rng = np.random.default_rng(8)
    tgt = DispersionTarget(10, 4)
    for _ in range(100):
        _, C = covariance(rng.normal(size=(10, 2)))
        e, _ = dispersion_error(C, tgt)
        assert e.e1 >= -10 - 1e-12 and e.e2 >= -4 - 1e-12


def test_excluded_set_detection():
    tgt = DispersionTarget(10, 4)
    assert DispersionError(-10, 1).in_excluded_set(tgt)
    assert DispersionError(1, -4).in_excluded_set(tgt)
    assert not DispersionError(-9, -3).in_excluded_set(tgt)


@pytest.mark.parametrize("l1, l2", [(1, 2), (-1, 0), (3, -0.1)])
def test_invalid_target(l1, l2):
    with pytest.raises(ValueError):
        DispersionTarget(l1, l2)


def test_similarity_rotation():
    rng = np.random.default_rng(9)
    for _ in range(20):
        _, C = covariance(rng.normal(size=(10, 2)))
        R = rot(rng.uniform(0, 6.3))
        assert covariance_similar(C, Sym2.from_matrix(R @ C.as_matrix() @ R.T), 1e-10)


def test_similarity_cases():
    assert covariance_similar(Sym2(1, 0, 2), Sym2(2, 0, 1), 1e-12)
    assert not covariance_similar(Sym2(1, 0, 2), Sym2(1, 0, 3), 1e-12)
    with pytest.raises(ValueError):
        covariance_similar(Sym2(1, 0, 2), Sym2(1, 0, 2), 0)


def test_cross_and_uniform_clouds_can_be_similar():
    # a plus-shaped cloud and a square grid, scaled to share a spectrum
    cross = np.array([(x, 0) for x in np.linspace(-1, 1, 11)] + [(0, y) for y in np.linspace(-1, 1, 11)])
    g = np.linspace(-1, 1, 5)
    grid = np.array([(x, y) for x in g for y in g])
    _, Cc = covariance(cross)
    _, Cg = covariance(grid)
    grid = grid * math.sqrt(Cc.c1 / Cg.c1)
    assert covariance_similar(Cc, covariance(grid)[1], 1e-12)


# -- projection identities -----------------------------------------------------------


def test_projection_reconstructs_barycentric_positions():
    rng = np.random.default_rng(10)
    for _ in range(50):
        P = rng.uniform(-3, 3, (20, 2))
        pc, C = covariance(P)
        b = eig_sym2(C)
        H = projection_coordinates(P, b)
        Z = H[:, :1] * np.array(b.v1) + H[:, 1:] * np.array(b.v2)
        np.testing.assert_allclose(Z, P - pc, atol=1e-12, rtol=0)


def test_variance_identities():
    rng = np.random.default_rng(11)
    for _ in range(50):
        P = rng.normal(size=(40, 2)) * rng.uniform(0.1, 5, 2)
        _, C = covariance(P)
        b = eig_sym2(C)
        H = projection_coordinates(P, b)
        n = len(P)
        assert abs((H[:, 0] ** 2).sum() / n - b.lambda1) <= 1e-9
        assert abs((H[:, 1] ** 2).sum() / n - b.lambda2) <= 1e-9
        assert abs((H[:, 0] * H[:, 1]).sum()) <= 1e-9


def test_serialization():
    assert Sym2(1, 2, 3).to_json() == [1, 2, 3]
    b = EigenBasis2(2, 1, (1.0, 0.0), (0.0, 1.0))
    assert b.to_json() == {"l1": 2, "l2": 1, "v1": [1.0, 0.0], "v2": [0.0, 1.0]}
