"""Kernel tests: norms, eigenvalues, stability certificates, Lyapunov fixed points."""

import numpy as np
import pytest

from lqrpg import matkit
from lqrpg.errors import InvalidInputError, SingularMatrixError, UnstablePolicyError


def test_spectral_norm_identity():
    assert matkit.spectral_norm(np.eye(3)) == pytest.approx(1.0, abs=1e-12)


def test_spectral_norm_diagonal():
    assert matkit.spectral_norm(np.diag([2.0, -5.0])) == pytest.approx(5.0, abs=1e-12)


def test_spectral_norm_nilpotent():
    # sigma_max = sqrt of the largest eigenvalue of M^T M = diag(0, 9)
    assert matkit.spectral_norm([[0.0, 3.0], [0.0, 0.0]]) == pytest.approx(3.0, abs=1e-12)


def test_spectral_norm_rejects_nonfinite():
    with pytest.raises(InvalidInputError):
        matkit.spectral_norm([[np.nan, 0.0], [0.0, 1.0]])
    with pytest.raises(InvalidInputError):
        matkit.spectral_norm(np.empty((0, 0)))


def test_symmetric_eig_diagonal():
    np.testing.assert_allclose(matkit.symmetric_eig(np.diag([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0], atol=1e-12)


def test_symmetric_eig_hand_case():
    # characteristic polynomial (2-x)^2 - 1 has roots 1 and 3
    np.testing.assert_allclose(matkit.symmetric_eig([[2.0, 1.0], [1.0, 2.0]]), [1.0, 3.0], atol=1e-12)


def test_symmetric_eig_zero():
    np.testing.assert_allclose(matkit.symmetric_eig(np.zeros((2, 2))), [0.0, 0.0], atol=0.0)


def test_symmetric_eig_rejects_asymmetric():
    with pytest.raises(InvalidInputError):
        matkit.symmetric_eig([[1.0, 0.5], [0.0, 1.0]])


def test_spectral_norm_matches_eig_of_gram():
    rng = np.random.default_rng(7)
    for _ in range(100):
        d = int(rng.integers(1, 8))
        m = rng.standard_normal((d, d)) * rng.uniform(0.1, 10.0)
        top = matkit.symmetric_eig(m.T @ m)[-1]
        assert matkit.spectral_norm(m) == pytest.approx(np.sqrt(max(top, 0.0)), rel=1e-9)


def test_stability_simple_cases():
    assert matkit.is_stable(np.diag([0.5, 0.9]))
    assert not matkit.is_stable(np.diag([0.5, 1.5]))
    cert = matkit.check_stability(np.eye(2))
    assert cert.verdict == "marginal"


def test_stability_nonnormal_transient_growth():
    # early powers have norm far above 1; repeated squaring must still certify
    cert = matkit.check_stability(np.array([[0.9, 100.0], [0.0, 0.9]]))
    assert cert.stable
    assert cert.rho_upper < 1.0


def test_stability_nilpotent_exact_radius_zero():
    m = np.array([[0.0, 0.0, 10.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    cert = matkit.check_stability(m)
    assert cert.stable
    assert cert.rho_upper == 0.0


def test_stability_agrees_with_eigenvalues_and_lyapunov():
    rng = np.random.default_rng(11)
    for i in range(100):
        d = int(rng.integers(2, 6))
        raw = rng.standard_normal((d, d))
        rho = max(abs(np.linalg.eigvals(raw)))
        target = 0.8 if i % 2 == 0 else 1.25
        m = raw * (target / rho)
        cert = matkit.check_stability(m)
        assert cert.stable == (target < 1.0)
        if cert.stable:
            x = matkit.solve_lyapunov_dual(m, np.eye(d), "transpose_outside")
            assert np.all(np.isfinite(x))
        else:
            with pytest.raises(UnstablePolicyError):
                matkit.solve_lyapunov_dual(m, np.eye(d), "transpose_outside")


def test_lyapunov_one_step_system():
    q = np.array([[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_allclose(matkit.solve_lyapunov_dual(np.zeros((2, 2)), q, "transpose_inside"), q, atol=1e-14)


def test_lyapunov_scalar_geometric_series():
    x = matkit.solve_lyapunov_dual(np.array([[0.5]]), np.array([[1.0]]), "transpose_inside")
    assert x[0, 0] == pytest.approx(4.0 / 3.0, rel=1e-12)


def test_lyapunov_decoupled_diagonal():
    x = matkit.solve_lyapunov_dual(np.diag([0.5, 0.0]), np.eye(2), "transpose_outside")
    np.testing.assert_allclose(x, np.diag([4.0 / 3.0, 1.0]), atol=1e-12)


@pytest.mark.parametrize("side", ["transpose_inside", "transpose_outside"])
def test_lyapunov_residual_by_substitution(side):
    rng = np.random.default_rng(23)
    tol = 1e-12
    for _ in range(25):
        d = int(rng.integers(2, 7))
        raw = rng.standard_normal((d, d))
        m = raw * (rng.uniform(0.3, 0.95) / max(abs(np.linalg.eigvals(raw))))
        w = rng.standard_normal((d, d))
        x0 = w @ w.T + 0.1 * np.eye(d)
        x = matkit.solve_lyapunov_dual(m, x0, side, tol=tol)
        applied = m.T @ x @ m if side == "transpose_inside" else m @ x @ m.T
        residual = np.linalg.norm(x - x0 - applied, 2)
        assert residual <= tol * np.linalg.norm(x, 2)


def test_lyapunov_unstable_error_carries_certificate():
    with pytest.raises(UnstablePolicyError) as exc:
        matkit.solve_lyapunov_dual(np.diag([2.0]), np.eye(1), "transpose_inside")
    assert exc.value.certificate is not None
    assert exc.value.certificate.verdict == "unstable"


def test_inverse_diagonal():
    np.testing.assert_allclose(matkit.inverse(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]), atol=1e-14)


def test_inverse_product_near_identity():
    rng = np.random.default_rng(5)
    m = rng.standard_normal((6, 6)) + 3.0 * np.eye(6)
    assert matkit.spectral_norm(m @ matkit.inverse(m) - np.eye(6)) <= 1e-8


def test_inverse_rejects_singular():
    with pytest.raises(SingularMatrixError):
        matkit.inverse(np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_trace_and_frobenius():
    assert matkit.trace(np.diag([1.0, 2.0, 3.0])) == pytest.approx(6.0)
    assert matkit.frobenius_norm([[3.0, 4.0]]) == pytest.approx(5.0)
