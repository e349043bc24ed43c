import numpy as np
import pytest

from nullwave.grid import GridField, PeriodicGrid, spatial_derivatives


def band_limited(grid, rng, modes=6):
    x1, x2 = grid.coords
    kk = np.pi / grid.half_width
    f = np.zeros(grid.shape)
    for _ in range(modes):
        a, b = rng.integers(-5, 6, size=2)
        f += rng.normal() * np.cos(kk * (a * x1 + b * x2) + rng.uniform(0, 2 * np.pi))
    return f


@pytest.mark.parametrize("n", [8, 48, 100])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        PeriodicGrid(n, 1.0)


def test_grid_rejects_nonpositive_width():
    with pytest.raises(ValueError):
        PeriodicGrid(32, 0.0)


def test_grid_geometry():
    g = PeriodicGrid(32, np.pi)
    assert g.h == pytest.approx(2 * np.pi / 32)
    assert g.axis[0] == -np.pi
    assert g.axis[-1] == pytest.approx(np.pi - g.h)
    x1, x2 = g.coords
    assert x1[g.center_index] == 0.0 and x2[g.center_index] == 0.0


def test_field_checks_shape_and_finiteness():
    g = PeriodicGrid(16, 1.0)
    with pytest.raises(ValueError):
        GridField(g, np.zeros((16, 8)))
    bad = np.zeros(g.shape)
    bad[3, 3] = np.inf
    with pytest.raises(ValueError):
        GridField(g, bad)
    f = GridField.zeros(g)
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_single_mode_derivative():
    g = PeriodicGrid(64, 5.0)
    x1, _ = g.coords
    k = np.pi / g.half_width
    d1, d2 = spatial_derivatives(GridField(g, np.sin(k * x1)))
    np.testing.assert_allclose(d1, k * np.cos(k * x1), atol=1e-12)
    np.testing.assert_allclose(d2, 0.0, atol=1e-12)


def test_constant_has_zero_derivatives():
    g = PeriodicGrid(32, 2.0)
    for d in spatial_derivatives(np.full(g.shape, 3.7), g, order=2):
        np.testing.assert_allclose(d, 0.0, atol=1e-13)


def test_mixed_derivatives_commute(rng):
    g = PeriodicGrid(64, np.pi)
    f = band_limited(g, rng)
    d1, d2 = spatial_derivatives(f, g)
    d12_a = spatial_derivatives(d1, g)[1]
    d21_b = spatial_derivatives(d2, g)[0]
    d12 = spatial_derivatives(f, g, order=2)[1]
    np.testing.assert_allclose(d12_a, d21_b, atol=1e-13 * np.abs(f).max() * 25)
    np.testing.assert_allclose(d12, d12_a, atol=1e-12)


def test_second_derivatives_of_trig_product():
    g = PeriodicGrid(32, np.pi)
    x1, x2 = g.coords
    f = np.cos(x1) * np.cos(2 * x2)
    d11, d12, d22 = spatial_derivatives(f, g, order=2)
    np.testing.assert_allclose(d11, -f, atol=1e-13)
    np.testing.assert_allclose(d22, -4 * f, atol=1e-12)
    np.testing.assert_allclose(d12, 2 * np.sin(x1) * np.sin(2 * x2), atol=1e-12)


def test_order_must_be_one_or_two():
    g = PeriodicGrid(16, 1.0)
    with pytest.raises(ValueError):
        spatial_derivatives(np.zeros(g.shape), g, order=3)


def test_refine_interpolates_band_limited(rng):
    g = PeriodicGrid(32, np.pi)
    x1, x2 = g.coords
    f = np.sin(3 * x1) * np.cos(x2) + 0.5 * np.cos(5 * x2)
    fine = g.refined(4)
    y1, y2 = fine.coords
    np.testing.assert_allclose(g.refine(f, 4), np.sin(3 * y1) * np.cos(y2) + 0.5 * np.cos(5 * y2), atol=1e-13)
    assert fine.integrate(g.refine(f, 4) ** 2) == pytest.approx(g.integrate(f**2), rel=1e-13)


def test_dealias_keeps_low_modes_and_removes_high():
    g = PeriodicGrid(32, np.pi)
    x1, _ = g.coords
    low, high = np.cos(3 * x1), np.cos(14 * x1)
    np.testing.assert_allclose(g.dealias(low + high), low, atol=1e-13)


def test_integrate_and_norm():
    g = PeriodicGrid(32, np.pi)
    x1, _ = g.coords
    assert g.integrate(np.ones(g.shape)) == pytest.approx(4 * np.pi**2)
    assert g.l2_norm(np.cos(x1)) == pytest.approx(np.pi * np.sqrt(2))
