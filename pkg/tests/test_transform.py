import logging

import numpy as np
import pytest

from nullwave.grid import GridField, PeriodicGrid, spatial_derivatives
from nullwave.nullform import MINKOWSKI, QuasiNullForm, is_null, prototype_tensor, symmetrize
from nullwave.transform import (
    DegenerateOperatorError,
    FullyNonlinearIVP,
    QuasilinearIVP,
    WrongCaseError,
    apply_chi_operator,
    chi_rhs,
    inverse_laplacian,
    line_integral,
    reconstruct_v,
    solve_chi,
    transform_case_a,
    transform_case_b,
    transform_prototype,
)

PROTO = QuasiNullForm(np.array([1.0, 0.0, 0.0]), MINKOWSKI)


def gaussian(grid, width=1.0, center=(0.0, 0.0)):
    x1, x2 = grid.coords
    return np.exp(-((x1 - center[0]) ** 2 + (x2 - center[1]) ** 2) / width**2)


def ivp(form, v0, v1):
    return QuasilinearIVP(form, v0, v1)


@pytest.fixture
def torus():
    return PeriodicGrid(32, np.pi)


# --- case a ------------------------------------------------------------------

def test_case_a_inverts_x1_derivative():
    g = PeriodicGrid(128, 12.0)
    bump = gaussian(g, 1.0, (0.5, -1.0))
    v0 = spatial_derivatives(bump, g)[0]
    form = QuasiNullForm(np.array([0.0, 1.0, 0.0]), MINKOWSKI)
    out = transform_case_a(ivp(form, GridField(g, v0), GridField.zeros(g)))
    np.testing.assert_allclose(out.phi.values, bump, atol=1e-10)
    np.testing.assert_array_equal(out.psi.values, 0.0)
    assert out.warnings == ()


def test_case_a_zero_data():
    g = PeriodicGrid(32, 4.0)
    form = QuasiNullForm(np.array([0.0, 2.0, 1.0]), MINKOWSKI)
    out = transform_case_a(ivp(form, GridField.zeros(g), GridField.zeros(g)))
    assert not out.phi.values.any() and not out.psi.values.any()


def test_case_a_matches_fourfold_refinement():
    form = QuasiNullForm(np.array([0.0, 1.0, 1.0]), MINKOWSKI)
    coarse = PeriodicGrid(128, 12.0)
    fine = coarse.refined(4)
    results = []
    for g in (coarse, fine):
        v0 = GridField(g, gaussian(g, 1.0))
        results.append(transform_case_a(ivp(form, v0, GridField.zeros(g))).phi.values)
    sub = results[1][::4, ::4]
    err = np.abs(results[0] - sub).max() / np.abs(sub).max()
    assert err <= 1e-6


def test_line_integral_constant_slope_of_separable_gaussian():
    # f = g'(x1) h(x2 - s x1): integral along x2 = c + s x1 gives g(x1) h(c)
    g = PeriodicGrid(128, 10.0)
    x1, x2 = g.coords
    s = 0.5
    f = -2 * x1 * np.exp(-(x1**2)) * np.exp(-((x2 - s * x1) ** 2) / 4)
    expected = np.exp(-(x1**2)) * np.exp(-((x2 - s * x1) ** 2) / 4)
    np.testing.assert_allclose(line_integral(f, g, s), expected, atol=1e-9)


def test_case_a_warns_when_total_integral_nonzero(caplog):
    g = PeriodicGrid(64, 8.0)
    form = QuasiNullForm(np.array([0.0, 1.0, 0.0]), MINKOWSKI)
    with caplog.at_level(logging.WARNING):
        out = transform_case_a(ivp(form, GridField(g, gaussian(g)), GridField.zeros(g)))
    assert any("line integral" in w for w in out.warnings)


def test_case_a_warns_on_wide_support():
    g = PeriodicGrid(64, 8.0)
    form = QuasiNullForm(np.array([0.0, 1.0, 0.0]), MINKOWSKI)
    v0 = spatial_derivatives(gaussian(g, 3.0), g)[0]
    out = transform_case_a(ivp(form, GridField(g, v0), GridField.zeros(g)))
    assert any("inner half" in w for w in out.warnings)


def test_case_a_rejects_wrong_case_and_vertical_direction(torus):
    z = GridField.zeros(torus)
    with pytest.raises(WrongCaseError):
        transform_case_a(ivp(QuasiNullForm(np.array([1.0, 0, 0]), MINKOWSKI), z, z))
    with pytest.raises(ValueError):
        transform_case_a(ivp(QuasiNullForm(np.array([0.0, 0, 1]), MINKOWSKI), z, z))


# --- case b ------------------------------------------------------------------

def test_case_b_zero_data(torus):
    z = GridField.zeros(torus)
    out = transform_case_b(ivp(QuasiNullForm(np.array([1.0, 0.2, 0.1]), MINKOWSKI), z, z), z)
    assert not out.phi.values.any() and not out.psi.values.any()


def test_case_b_prototype_rhs_reduces_to_poisson_data(torus, rng):
    x1, x2 = torus.coords
    v0 = GridField(torus, np.cos(x1) * np.sin(2 * x2))
    v1 = GridField(torus, 0.3 * np.sin(x1 + x2))
    vt = GridField(torus, 0.7 * np.cos(x2))
    g1, g2 = spatial_derivatives(v0)
    expected = -vt.values + (vt.values**2 - g1**2 - g2**2)
    np.testing.assert_allclose(chi_rhs(ivp(PROTO, v0, v1), vt), expected, atol=1e-14)
    # with vt0 = v1 this is the elliptic equation of the prototype transform
    np.testing.assert_allclose(chi_rhs(ivp(PROTO, v0, v1), v1), -prototype_rhs_oracle(v0, v1), atol=1e-14)


def prototype_rhs_oracle(v0, v1):
    g1, g2 = spatial_derivatives(v0)
    return -(v1.values**2 - g1**2 - g2**2 - v1.values)


def test_case_b_cosine_example(torus):
    x1, _ = torus.coords
    z = GridField.zeros(torus)
    out = transform_case_b(ivp(PROTO, GridField(torus, np.cos(x1)), z), z)
    np.testing.assert_allclose(out.phi.values, np.cos(2 * x1) / 8, atol=1e-14)
    assert out.removed_mean == pytest.approx(-0.5, abs=1e-14)
    assert out.warnings
    # psi = (v0 - A1 d1 chi - A2 d2 chi) / A0 = v0 for the prototype
    np.testing.assert_allclose(out.psi.values, np.cos(x1), atol=1e-14)


def test_case_b_elliptic_residual(rng):
    g = PeriodicGrid(64, 6.0)
    form = QuasiNullForm(np.array([1.0, 0.3, -0.4]), 0.7 * MINKOWSKI)
    v0 = GridField(g, 0.1 * gaussian(g, 1.2))
    v1 = GridField(g, 0.05 * gaussian(g, 0.8, (0.5, 0.0)))
    rhs = chi_rhs(ivp(form, v0, v1), v1)
    chi, mean = solve_chi(rhs, form.a, g)
    residual = apply_chi_operator(chi, form.a, g) - (rhs - mean)
    assert np.abs(residual).max() <= 1e-10 * np.abs(rhs).max()


def test_case_b_psi_formula():
    g = PeriodicGrid(64, 6.0)
    form = QuasiNullForm(np.array([2.0, 0.3, -0.4]), MINKOWSKI)
    v0 = GridField(g, 0.1 * gaussian(g, 1.2))
    v1 = GridField(g, 0.05 * gaussian(g, 0.8))
    out = transform_case_b(ivp(form, v0, v1))
    c1, c2 = spatial_derivatives(out.phi)
    np.testing.assert_allclose(out.psi.values, (v0.values - 0.3 * c1 + 0.4 * c2) / 2.0, atol=1e-15)
    # the reconstructed v = A . (d_t u, grad u) equals v0 at t = 0
    v = reconstruct_v(out.phi, out.psi, form)
    np.testing.assert_allclose(v.values, v0.values, atol=1e-14)


def test_case_b_errors(torus):
    z = GridField.zeros(torus)
    with pytest.raises(WrongCaseError):
        transform_case_b(ivp(QuasiNullForm(np.array([0.0, 1.0, 0.0]), MINKOWSKI), z, z))
    with pytest.raises(DegenerateOperatorError):
        transform_case_b(ivp(QuasiNullForm(np.array([1.0, 0.8, 0.6]), MINKOWSKI), z, z))


# --- prototype ---------------------------------------------------------------

def test_prototype_zero_data(torus):
    z = GridField.zeros(torus)
    out = transform_prototype(z, z)
    assert not out.phi.values.any() and not out.psi.values.any()


def test_prototype_cosine_example(torus):
    x1, _ = torus.coords
    out = transform_prototype(GridField.zeros(torus), GridField(torus, np.cos(x1)))
    np.testing.assert_allclose(out.phi.values, np.cos(2 * x1) / 8 - np.cos(x1), atol=1e-14)
    d11, _, d22 = spatial_derivatives(out.phi, order=2)
    zero_mean_rhs = np.cos(2 * x1) / 2 - np.cos(x1)
    np.testing.assert_allclose(-(d11 + d22), zero_mean_rhs, atol=1e-13)
    assert out.removed_mean == pytest.approx(0.5)


def test_prototype_keeps_v0_and_is_null(torus):
    x1, x2 = torus.coords
    v0 = GridField(torus, np.sin(x1) * np.cos(x2))
    out = transform_prototype(v0, GridField.zeros(torus))
    assert out.psi is v0
    assert out.tensor == symmetrize(prototype_tensor())
    assert is_null(out.tensor)


def test_inverse_laplacian_residual(rng):
    g = PeriodicGrid(64, 3.0)
    rhs = rng.normal(size=g.shape)
    rhs = g.dealias(rhs)
    phi, mean = inverse_laplacian(rhs, g)
    d11, _, d22 = spatial_derivatives(phi, g, order=2)
    assert np.abs(-(d11 + d22) - (rhs - mean)).max() <= 1e-10 * np.abs(rhs).max()
    assert abs(phi.mean()) < 1e-14


def test_fully_nonlinear_ivp_requires_symmetric_tensor(torus):
    z = GridField.zeros(torus)
    with pytest.raises(ValueError):
        FullyNonlinearIVP(prototype_tensor(), z, z)


# --- reconstruction ------------------------------------------------------------

def test_reconstruct_zero(torus):
    z = GridField.zeros(torus)
    assert not reconstruct_v(z, z, PROTO).values.any()


def test_reconstruct_prototype_is_ut(torus, rng):
    ut = GridField(torus, rng.normal(size=torus.shape))
    u = GridField(torus, rng.normal(size=torus.shape))
    np.testing.assert_array_equal(reconstruct_v(u, ut, PROTO).values, ut.values)


def test_reconstruct_x1_direction(torus):
    x1, _ = torus.coords
    form = QuasiNullForm(np.array([0.0, 1.0, 0.0]), MINKOWSKI)
    v = reconstruct_v(GridField(torus, np.sin(x1)), GridField.zeros(torus), form)
    np.testing.assert_allclose(v.values, np.cos(x1), atol=1e-13)
