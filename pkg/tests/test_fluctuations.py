import numpy as np
import pytest
from hypothesis import given, strategies as st

from cepspin.collective_model import Channel, PresetParams, SpinModelSpec, build_example_model
from cepspin.errors import AtCriticalPoint, NonHurwitzJacobian
from cepspin.exact_dicke import _coherent_amplitudes, dicke_operators
from cepspin.fluctuations import (alignment_angle, covariance_pack, dephasing_coefficients,
                                  dephasing_covariance_closed_form, diffusion, dz_component,
                                  example_covariance, example_dz, gaussian_squeezing,
                                  lyapunov_residual, principal_transverse, scaling_exponents,
                                  solve_lyapunov)
from cepspin.meanfield import example_branch


def coherent_vector(S, M):
    theta = np.arccos(M[2])
    phi = np.arctan2(M[1], M[0])
    d = int(2 * S) + 1
    m = np.arange(d) - S
    return _coherent_amplitudes(S, np.array([theta]))[0] * np.exp(1j * phi * (S - m))


def product_rule_diffusion(spec, M, S):
    """N/2 sum <[L^dag, m_i][m_j, L] + (i<->j)> in a coherent state, with L = sqrt(S) l.m."""
    ops = dicke_operators(S, sparse=False)
    m = [A / S for A in ops.components]
    psi = coherent_vector(S, M)
    N = 2 * S
    D = np.zeros((3, 3))
    for ell in spec.channel_vectors:
        L = np.sqrt(S) * sum(ell[k] * m[k] for k in range(3))
        Ld = L.conj().T
        for i in range(3):
            for j in range(3):
                A = (Ld @ m[i] - m[i] @ Ld) @ (m[j] @ L - L @ m[j])
                B = (Ld @ m[j] - m[j] @ Ld) @ (m[i] @ L - L @ m[i])
                D[i, j] += N / 2 * np.real(psi.conj() @ (A + B) @ psi)
    return D


def test_diffusion_decay_structure():
    M = np.array([0.3, -0.5, 0.6])
    X, Y, Z = M
    spec = SpinModelSpec([0, 0, 0], np.zeros((3, 3)), (Channel([1, -1j, 0]),))
    ref = np.array([[Z * Z, 0, -X * Z], [0, Z * Z, -Y * Z], [-X * Z, -Y * Z, X * X + Y * Y]])
    np.testing.assert_allclose(diffusion(spec, M), 2 * ref, atol=1e-15)


@pytest.mark.parametrize("chan", [[1, -1j, 0], [0, 0, 1], [0.3, 0.2j, -0.7], [1, 0, 0]])
def test_diffusion_matches_product_rule_oracle(chan):
    spec = SpinModelSpec([0, 0, 0], np.zeros((3, 3)), (Channel(chan),))
    M = np.array([0.48, 0.36, -0.8])
    S = 200
    D = diffusion(spec, M)
    Dq = product_rule_diffusion(spec, M, S)
    assert np.abs(D - Dq).max() < 3 / S * max(1, np.abs(D).max())


def test_diffusion_empty():
    spec = SpinModelSpec([1, 0, 0], np.zeros((3, 3)))
    np.testing.assert_array_equal(diffusion(spec, [0.1, 0.2, 0.3]), 0)


def test_rotated_diffusion_example(unit_params):
    pk = example_covariance(unit_params)
    k, Z = unit_params.kappa, example_branch(unit_params).Z
    np.testing.assert_allclose(pk.D_perp, np.diag([2 * k, 2 * k * Z * Z]), atol=1e-12)


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_diffusion_psd(v):
    spec = build_example_model(PresetParams(1.2, 0.7, 1.1, 0.3, 0.4, 0.5))
    w = np.linalg.eigvalsh(diffusion(spec, v))
    assert w.min() >= -1e-12


def test_diffusion_parity(rng):
    spec = SpinModelSpec([1.2, -0.3, 0], np.diag([0.1, 0.2, 0.3]),
                         (Channel([1, -1j, 0]), Channel([0.2, 0.5j, 0]), Channel([0, 0, 0.7])))
    even = [(0, 0), (1, 1), (0, 1), (2, 2)]
    odd = [(0, 2), (1, 2)]
    for M in rng.normal(size=(50, 3)):
        Dp, Dm = diffusion(spec, M), diffusion(spec, M * [1, 1, -1])
        for i, j in even:
            assert Dm[i, j] == pytest.approx(Dp[i, j], abs=1e-12)
        for i, j in odd:
            assert Dm[i, j] == pytest.approx(-Dp[i, j], abs=1e-12)


def test_lyapunov_examples(unit_params):
    Z = example_branch(unit_params).Z
    k = unit_params.kappa
    J = np.array([[k * Z, -1], [Z * Z, k * Z]])
    D = np.diag([2 * k, 2 * k * Z * Z])
    S = solve_lyapunov(J, D)
    np.testing.assert_allclose(S, np.diag([-1 / Z, -Z]), atol=1e-12)
    np.testing.assert_allclose(S, np.diag([1.37695, 0.72624]), atol=2e-5)
    np.testing.assert_allclose(solve_lyapunov(-np.eye(2), 2 * np.eye(2)), np.eye(2))
    with pytest.raises(NonHurwitzJacobian):
        solve_lyapunov(np.diag([0.1, -1.0]), np.eye(2))


@given(st.integers(2, 5), st.integers(0, 2**31))
def test_lyapunov_residual(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    J = A - (np.abs(np.linalg.eigvals(A).real).max() + 0.5) * np.eye(n)
    B = rng.normal(size=(n, n))
    D = B @ B.T
    S = solve_lyapunov(J, D)
    assert lyapunov_residual(J, S, D) <= 1e-10 * (np.linalg.norm(D) + np.linalg.norm(J) * np.linalg.norm(S))
    np.testing.assert_allclose(S, S.T)


def test_pack_invariants(unit_params):
    pk = example_covariance(PresetParams.from_delta(2, 1, 0.3, 0.2, 0.4, 0.6))
    assert pk.residual <= pk.residual_bound()
    assert np.linalg.eigvalsh(pk.D_lab).min() >= -1e-10
    assert np.linalg.eigvalsh(pk.Sigma_perp).min() >= 0
    M = example_branch(PresetParams.from_delta(2, 1, 0.3)).point
    np.testing.assert_allclose(pk.Sigma_full @ M, 0, atol=1e-12)


def test_gaussian_squeezing_examples(unit_params):
    rep = gaussian_squeezing(example_covariance(unit_params))
    assert rep.xi_s_sq == pytest.approx(0.726234040499926, abs=1e-12)
    assert rep.xi_r_sq == rep.xi_s_sq and rep.polarization == 1
    np.testing.assert_allclose(np.abs(rep.axis_max), [1, 0], atol=1e-12)
    assert rep.alignment_angle == pytest.approx(0, abs=1e-12)
    rep = gaussian_squeezing(example_covariance(PresetParams.from_delta(2, 1, 0.1)))
    assert rep.xi_s_sq == pytest.approx(0.28603, abs=1e-5)


def test_isotropic_report():
    rep = principal_transverse(np.eye(2), [1, 0])
    assert rep.isotropic and np.isnan(rep.alignment_angle) and rep.xi_s_sq == 1
    np.testing.assert_array_equal(rep.axis_min, [1, 0])
    np.testing.assert_array_equal(rep.axis_max, [0, 1])


@given(st.floats(0.1, 3), st.floats(0.1, 3), st.floats(-1, 1), st.floats(0.3, 1))
def test_report_invariants(a, b, c, pol):
    c = c * np.sqrt(a * b) * 0.99
    rep = principal_transverse([[a, c], [c, b]], [1, 0], pol)
    assert 0 <= rep.lambda_min <= rep.lambda_max
    assert abs(rep.axis_min @ rep.axis_max) < 1e-12
    assert rep.xi_r_sq >= rep.xi_s_sq


def test_alignment_angle_unoriented():
    assert alignment_angle([1, 0], [-1, 0]) == 0
    assert alignment_angle([0, 1], [1, 0]) == pytest.approx(np.pi / 2)


def test_dephasing_coefficients_values():
    d11, d12, d22 = dephasing_coefficients(PresetParams.from_delta(2, 1, 1, gamma_x=1))
    assert (d11, d12, d22) == pytest.approx((6.34596, 0.32278, 5.58224), abs=2e-5)


def test_closed_form_reduces_without_dephasing():
    for d in (1e-3, 0.1, 2):
        p = PresetParams.from_delta(2, 1, d)
        Z = example_branch(p).Z
        np.testing.assert_allclose(dephasing_covariance_closed_form(p, Z), np.diag([-1 / Z, -Z]),
                                   rtol=1e-12, atol=1e-14)


def test_closed_form_guards():
    p = PresetParams.from_delta(2, 1, 0.5)
    with pytest.raises(AtCriticalPoint):
        dephasing_covariance_closed_form(p, 0.0)
    with pytest.raises(ValueError):
        dephasing_covariance_closed_form(p, 0.3)


@given(st.floats(1.1, 4), st.floats(0.1, 0.9), st.floats(1e-3, 2), st.floats(0, 2),
       st.floats(0, 2), st.floats(0, 2))
def test_closed_form_matches_lyapunov(g, wf, d, gx, gy, gz):
    p = PresetParams.from_delta(g, wf * g, d, gx, gy, gz)
    pk = example_covariance(p)
    cf = dephasing_covariance_closed_form(p, example_branch(p).Z)
    assert np.abs(cf - pk.Sigma_perp).max() <= 1e-9 * np.abs(pk.Sigma_perp).max()


@pytest.mark.parametrize("gam, expected", [((0, 0, 0), 0), ((0, 0, 1), 1), ((1, 1, 0), 0),
                                           ((0.3, 0.7, 2.5), 2.5)])
def test_dz_component(gam, expected):
    p = PresetParams.from_delta(2, 1, 0.4, *gam)
    assert example_dz(p) == pytest.approx(expected, abs=1e-9)
    assert dz_component(build_example_model(p)) == pytest.approx(expected, abs=1e-9)


def test_scaling_exponents_clean():
    fit = scaling_exponents(PresetParams(2, 1, 3), np.logspace(-4, -2, 21))
    assert fit.slope_min == pytest.approx(1, abs=0.02)
    assert fit.slope_max == pytest.approx(-1, abs=0.02)
    assert min(fit.r2_min, fit.r2_max) >= 0.999


def test_scaling_exponents_z_dephasing():
    # asymptotic regime |Z_*|^2 << gamma_z omega^2 / (2 kappa (2 kappa^2 + 2 omega^2))
    fit = scaling_exponents(PresetParams(2, 1, 3, gamma_z=1), np.logspace(-8, -6, 21))
    assert fit.slope_11 == pytest.approx(-3, abs=0.005)
    assert fit.slope_min == pytest.approx(-1, abs=0.005)


def test_z_dephasing_local_slope_approaches_asymptote():
    p = PresetParams(2, 1, 3, gamma_z=1)
    slopes = [scaling_exponents(p, np.logspace(lo, lo + 2, 11)).slope_11 for lo in (-4, -6, -8)]
    assert all(abs(b + 3) < abs(a + 3) for a, b in zip(slopes, slopes[1:]))


def test_scaling_exponents_small_omega():
    w = 1e-6
    fit = scaling_exponents(PresetParams(1.0, w, 2.0), np.logspace(-4, -2, 11) / w * 1e-6)
    assert fit.slope_min == pytest.approx(1, abs=0.02)
    assert fit.slope_max == pytest.approx(-1, abs=0.02)


def test_scaling_grid_validation():
    with pytest.raises(ValueError):
        scaling_exponents(PresetParams(2, 1, 3), [1e-3, 1e-2])
    with pytest.raises(ValueError):
        scaling_exponents(PresetParams(2, 1, 3), np.linspace(0.1, 0.5, 6))


def _angles(gam):
    return [gaussian_squeezing(example_covariance(PresetParams.from_delta(2, 1, d, *gam)))
            .alignment_angle for d in np.logspace(-1, -5, 9)]


def test_axis_locking_without_dephasing_is_exact():
    # Sigma'_perp is diagonal, so the anti-squeezed axis is the coalescing axis at every delta
    assert max(_angles((0, 0, 0))) < 1e-12


def test_axis_locking_with_anisotropic_dephasing():
    angles = _angles((1.0, 0.2, 0))
    assert all(b < a for a, b in zip(angles, angles[1:]))
    assert angles[-1] < 1e-3


def test_heisenberg_product_without_dephasing():
    for d in np.logspace(-4, 0, 7):
        rep = gaussian_squeezing(example_covariance(PresetParams.from_delta(2, 1, d)))
        assert rep.lambda_min * rep.lambda_max == pytest.approx(1, abs=1e-10)


def test_covariance_pack_rejects_unstable_branch():
    p = PresetParams.from_delta(2, 1, 0.5)
    with pytest.raises(NonHurwitzJacobian):
        covariance_pack(build_example_model(p), example_branch(p, sign=+1).point)
