"""Grid construction, operators, and the exact Green identity."""

import math

import numpy as np
import pytest

from entropy_lab import geometry as geo


def all_grids():
    return [
        ("circle", geo.circle(2 * math.pi, 128)),
        ("torus", geo.flat_torus(2 * math.pi, 2 * math.pi, 32, 48)),
        ("box", geo.euclidean_box((1.0, 2.0), (24, 32))),
        ("disc", geo.euclidean_disc(1.0, 32, 32)),
        ("sphere", geo.round_sphere(64, 16)),
    ]


def test_torus_volume_exact():
    g = geo.flat_torus(2 * math.pi, 2 * math.pi, 64, 64)
    assert abs(g.total_volume / (4 * math.pi**2) - 1.0) < 1e-12


def test_sphere_volume():
    g = geo.round_sphere(256, 16)
    assert abs(g.total_volume / (4 * math.pi) - 1.0) < 1e-6


def test_all_volumes_positive():
    for name, g in all_grids():
        assert np.all(g.node_volumes > 0), name


def test_disc_second_fundamental_form():
    g = geo.euclidean_disc(1.0, 32, 32)
    (seg,) = g.boundary
    assert np.allclose(seg.second_fundamental, 1.0)
    g2 = geo.euclidean_disc(2.0, 32, 32)
    (seg2,) = g2.boundary
    assert np.allclose(seg2.second_fundamental, 0.5)


def test_gauss_curvature_closed_form():
    sphere = geo.round_sphere(64, 16)
    assert np.allclose(sphere.gauss_curvature, 1.0, atol=1e-12)
    disc = geo.euclidean_disc(1.0, 32, 32)
    assert np.allclose(disc.gauss_curvature, 0.0, atol=1e-12)
    torus = geo.flat_torus(n1=32, n2=32)
    assert np.allclose(torus.gauss_curvature, 0.0)


def test_invalid_metric_rejected():
    # valid pole at 0 but phi goes negative past r = 1
    bad = geo.WarpProfile(
        "hump", lambda r: np.asarray(r, float) * (1.0 - np.asarray(r, float)),
        lambda r: 1.0 - 2.0 * np.asarray(r, float),
        lambda r: -2.0 * np.ones_like(np.asarray(r, float)))
    with pytest.raises(geo.InvalidMetric):
        geo.warped_surface(bad, 2.0, 32, 16)


def test_pole_mismatch_rejected():
    # phi'(0) = 2 violates the unit-slope pole condition
    bad = geo.WarpProfile("twice", lambda r: 2 * np.asarray(r, float),
                          lambda r: 2 * np.ones_like(np.asarray(r, float)),
                          lambda r: np.zeros_like(np.asarray(r, float)))
    with pytest.raises(geo.PoleMismatch):
        geo.warped_surface(bad, 1.0, 32, 16)


def test_resolution_floor():
    with pytest.raises(geo.GridError):
        geo.circle(1.0, 4)


def test_green_identity_exact():
    rng = np.random.default_rng(11)
    for name, g in all_grids():
        a = rng.standard_normal(g.num_nodes)
        b = rng.standard_normal(g.num_nodes)
        lhs = geo.integrate(g, geo.laplace_beltrami(g, a) * b)
        rhs = -geo.integrate(g, geo.gradient_inner(g, a, b))
        scale = geo.integrate(g, np.abs(geo.gradient_inner(g, a, b)))
        assert abs(lhs - rhs) <= 1e-10 * scale, name


def test_laplacian_symmetric_negative():
    rng = np.random.default_rng(5)
    g = geo.round_sphere(32, 16)
    a = rng.standard_normal(g.num_nodes)
    b = rng.standard_normal(g.num_nodes)
    lhs = geo.integrate(g, geo.laplace_beltrami(g, a) * b)
    rhs = geo.integrate(g, a * geo.laplace_beltrami(g, b))
    assert abs(lhs - rhs) < 1e-12 * (abs(lhs) + 1)
    quad = geo.integrate(g, a * geo.laplace_beltrami(g, a))
    assert quad <= 1e-12


def test_laplacian_constant_zero():
    for name, g in all_grids():
        lap = geo.laplace_beltrami(g, np.ones(g.num_nodes))
        assert np.max(np.abs(lap)) < 1e-10, name


def test_torus_eigenvalue_rate():
    # discrete eigenvalue of sin(kx) is (2 - 2 cos kh)/h^2 -> k^2 at O(h^2)
    k = 3
    errs = []
    for n in (64, 128):
        g = geo.flat_torus(2 * math.pi, 2 * math.pi, n, 8)
        x = geo.node_coordinates(g)[:, 0]
        f = np.sin(k * x)
        lam = -geo.laplace_beltrami(g, f)
        errs.append(np.max(np.abs(lam - k**2 * f)))
    assert errs[0] / errs[1] > 3.5


def test_sphere_eigenfunction():
    # lap cos r = -2 cos r: degree-1 harmonic, eigenvalue l(l+1) = 2; the
    # flux-form error bound 0.4 h^2 comes from the sin(h)/h expansion
    g = geo.round_sphere(256, 16)
    r = geo.node_coordinates(g)[:, 0]
    lap = geo.laplace_beltrami(g, np.cos(r))
    h = g.spacing[0]
    assert np.max(np.abs(lap + 2 * np.cos(r))) <= 0.4 * h**2


def test_gradient_sq_unit_slope_interior():
    g = geo.euclidean_box((1.0, 1.0), (32, 32))
    x = geo.node_coordinates(g)[:, 0]
    gs = geo.gradient_sq(g, x).reshape(32, 32)
    assert np.allclose(gs[1:-1, :], 1.0, atol=1e-12)
    # boundary rows carry half the one-sided edge weight
    assert np.allclose(gs[0, :], 0.5, atol=1e-12)


def test_gradient_sq_sphere_closed_form():
    g = geo.round_sphere(128, 16)
    r = geo.node_coordinates(g)[:, 0]
    gs = geo.gradient_sq(g, np.cos(r))
    h = g.spacing[0]
    assert np.max(np.abs(gs - np.sin(r) ** 2)) < 2.0 * h**2 + 1e-12


def test_gradient_sq_nonnegative():
    rng = np.random.default_rng(3)
    for name, g in all_grids():
        gs = geo.gradient_sq(g, rng.standard_normal(g.num_nodes))
        assert np.all(gs >= 0), name


def test_hessian_equality_case():
    tau = 0.25
    g = geo.euclidean_box((2.0, 2.0), (32, 32))
    xyz = geo.node_coordinates(g)
    f = ((xyz[:, 0] - 1) ** 2 + (xyz[:, 1] - 1) ** 2) / (4 * tau)
    hq = geo.hessian_quadratic(g, f, tau).reshape(32, 32)
    assert np.max(np.abs(hq[1:-1, 1:-1])) < 1e-20


def test_hessian_identity_shift_constant():
    # |0 - g/(2 tau)|^2 = n / (4 tau^2) = 2 for n = 2, tau = 1/2
    g = geo.flat_torus(n1=16, n2=16)
    hq = geo.hessian_quadratic(g, np.zeros(g.num_nodes), 0.5)
    assert np.allclose(hq, 2.0)


def test_hessian_invalid_tau():
    g = geo.flat_torus(n1=16, n2=16)
    with pytest.raises(geo.InvalidTau):
        geo.hessian_quadratic(g, np.zeros(g.num_nodes), -1.0)


def test_hessian_warped_closed_form():
    # radial f on the sphere: Hess = f'' dr^2 + phi phi' f' dtheta^2
    g = geo.round_sphere(128, 16)
    r = geo.node_coordinates(g)[:, 0]
    f = np.cos(r)
    a00, a01, a11 = geo.hessian_components(g, f)
    h = g.spacing[0]
    assert np.max(np.abs(a00.reshape(-1) + np.cos(r))) < h**2
    assert np.max(np.abs(a01)) < 1e-10
    exact_tt = np.sin(r) * np.cos(r) * (-np.sin(r))
    assert np.max(np.abs(a11.reshape(-1) - exact_tt)) < 4 * h**2


def test_hessian_trace_consistency():
    errs = []
    for n in (64, 128):
        g = geo.round_sphere(n, 16)
        r = geo.node_coordinates(g)[:, 0]
        f = np.cos(2 * r) + 0.3 * np.cos(r)
        tr = geo.hessian_trace(g, f)
        lap = geo.laplace_beltrami(g, f)
        errs.append(np.max(np.abs(tr - lap)))
    assert errs[0] / errs[1] > 3.0


def test_ricci_quadratic():
    g = geo.round_sphere(128, 16)
    r = geo.node_coordinates(g)[:, 0]
    rq = geo.ricci_quadratic(g, np.cos(r))
    h = g.spacing[0]
    assert np.max(np.abs(rq - np.sin(r) ** 2)) < 2 * h**2 + 1e-12
    flat = geo.flat_torus(n1=16, n2=16)
    assert np.all(geo.ricci_quadratic(flat, np.ones(flat.num_nodes)) == 0.0)
    disc = geo.euclidean_disc(1.0, 32, 32)
    assert np.max(np.abs(geo.ricci_quadratic(
        disc, np.cos(geo.node_coordinates(disc)[:, 0])))) < 1e-12


def test_integrate_closed_forms():
    sphere = geo.round_sphere(256, 16)
    assert abs(geo.integrate(sphere, np.ones(sphere.num_nodes))
               - 4 * math.pi) < 1e-10
    r = geo.node_coordinates(sphere)[:, 0]
    # oracle: int cos^2 r sin r dr dtheta = 2 pi * [-cos^3/3] = 4 pi / 3
    assert abs(geo.integrate(sphere, np.cos(r) ** 2)
               - 4 * math.pi / 3) < 1e-4
    torus = geo.flat_torus(n1=64, n2=64)
    x = geo.node_coordinates(torus)[:, 0]
    assert abs(geo.integrate(torus, np.sin(x))) < 1e-12


def test_distance_field_torus():
    g = geo.flat_torus(2 * math.pi, 2 * math.pi, 64, 64)
    d = geo.distance_field(g, 0)
    xyz = geo.node_coordinates(g)
    at = lambda x, y: int(np.argmin((xyz[:, 0] - x) ** 2 + (xyz[:, 1] - y) ** 2))
    assert abs(d[at(math.pi, 0)] - math.pi) < 1e-12
    assert abs(d[at(3 * math.pi / 2, 0)] - math.pi / 2) < 1e-12


def test_distance_field_sphere_pole():
    g = geo.round_sphere(64, 16)
    r = geo.node_coordinates(g)[:, 0]
    assert np.allclose(geo.distance_field(g, "pole"), r)
    assert np.allclose(geo.distance_field(g, "end_pole"), math.pi - r)
    with pytest.raises(geo.UnsupportedBase):
        geo.distance_field(g, 5)


def test_distance_field_disc_chord():
    g = geo.euclidean_disc(1.0, 32, 32)
    d = geo.distance_field(g, 0)
    xyz = geo.node_coordinates(g)
    r0, t0 = xyz[0]
    chord = np.sqrt(xyz[:, 0] ** 2 + r0**2
                    - 2 * xyz[:, 0] * r0 * np.cos(xyz[:, 1] - t0))
    assert np.allclose(d, chord)


def test_build_grid_descriptor():
    g = geo.build_grid({"kind": "flat_torus", "l1": 1.0, "l2": 2.0,
                        "n1": 16, "n2": 32})
    assert g.shape == (16, 32)
    assert abs(g.total_volume - 2.0) < 1e-14
    s = geo.build_grid({"kind": "sphere", "n1": 32, "n2": 16})
    assert s.kind == "warped_surface"


def test_scalar_field_validation():
    g = geo.circle(1.0, 16)
    geo.ScalarField(g, np.zeros(16))
    with pytest.raises(geo.GridError):
        geo.ScalarField(g, np.zeros(15))
    with pytest.raises(geo.GridError):
        geo.ScalarField(g, np.full(16, np.nan))
