"""W-functional identities, dissipation matching, evolution residuals."""

import math

import numpy as np
import pytest

from entropy_lab import entropy, geometry as geo, heat


def box_gaussian(n=128, side=3.0, t=0.02):
    g = geo.euclidean_box((side, side), (n, n))
    return heat.delta_init(g, (n // 2) * n + n // 2, t)


def test_f_of_uniform_torus():
    g = geo.flat_torus(2 * math.pi, 2 * math.pi, 32, 32)
    u = np.full(g.num_nodes, 1.0 / g.total_volume)
    st = heat.HeatState(g, u, t=1.0, tau0=1.0 / (4 * math.pi) - 1.0)
    f = entropy.f_of(st)
    # -log u - log(4 pi tau) with 4 pi tau = 1
    assert np.allclose(f, math.log(4 * math.pi**2))


def test_f_of_round_trip():
    st = box_gaussian(64)
    f = entropy.f_of(st)
    n = st.grid.dim
    back = np.exp(-f) / (4 * math.pi * st.tau) ** (n / 2)
    assert np.max(np.abs(back - st.u) / st.u) < 1e-13


def test_f_of_rejects_nonpositive():
    g = geo.circle(2 * math.pi, 64)
    st = heat.delta_init(g, 0, 0.1)
    bad = heat.HeatState.__new__(heat.HeatState)
    object.__setattr__(bad, "grid", g)
    object.__setattr__(bad, "u", st.u - st.u.min() * 1.5)
    object.__setattr__(bad, "t", 0.1)
    object.__setattr__(bad, "tau0", 0.0)
    with pytest.raises(entropy.LogDomain):
        entropy.f_of(bad)


def test_w_zero_for_euclidean_kernel():
    # Gaussian moment oracle: E|x|^2 = 2 n t gives W identically zero
    st = box_gaussian(256, 3.0, 0.02)
    assert abs(entropy.w_functional(st)) < 5e-3


def test_w_uniform_closed_form():
    g = geo.round_sphere(64, 16)
    u = np.full(g.num_nodes, 1.0 / g.total_volume)
    st = heat.HeatState(g, u, t=0.7)
    expect = math.log(g.total_volume) - math.log(4 * math.pi * 0.7) - 2
    assert abs(entropy.w_functional(st) - expect) < 1e-10


def test_w_algebraic_split():
    st = box_gaussian(96)
    w = entropy.w_functional(st)
    split = entropy.dirichlet_term(st) + entropy.nash_term(st) - st.grid.dim
    assert w == split


def test_pointwise_w_integral_identity():
    # integration by parts is exact for the compatible quadratures
    for st in (box_gaussian(96), heat.delta_init(geo.circle(2 * math.pi, 256), 0, 0.1),
               heat.delta_init(geo.round_sphere(96, 16), "pole", 0.1)):
        pw = entropy.pointwise_w(st)
        lhs = geo.integrate(st.grid, pw * st.u)
        assert abs(lhs - entropy.w_functional(st)) < 1e-8


def test_w_split_form_equivalence():
    st = heat.delta_init(geo.round_sphere(96, 16), "pole", 0.15)
    assert abs(entropy.w_split_form(st) - entropy.w_functional(st)) < 1e-8


def test_pointwise_w_equality_case():
    st = box_gaussian(256, 3.0, 0.02)
    pw = entropy.pointwise_w(st)
    mask = entropy.core_mask(st)
    assert np.max(np.abs(pw[mask])) < 5e-3


def test_pointwise_w_circle_sign():
    st = heat.oracle_state(geo.circle(2 * math.pi, 512), 0, 0.1)
    assert float(entropy.pointwise_w(st).max()) <= 1e-3


def test_mass_constraint_enforced():
    g = geo.circle(2 * math.pi, 64)
    st = heat.delta_init(g, 0, 0.1)
    bad = heat.HeatState.__new__(heat.HeatState)
    object.__setattr__(bad, "grid", g)
    object.__setattr__(bad, "u", st.u * 1.001)
    object.__setattr__(bad, "t", 0.1)
    object.__setattr__(bad, "tau0", 0.0)
    with pytest.raises(entropy.ConstraintViolated):
        entropy.w_functional(bad)


def test_predicted_dissipation_zero_on_box():
    st = box_gaussian(256, 3.0, 0.02)
    assert abs(entropy.predicted_dissipation(st)) < 5e-3


def test_predicted_dissipation_uniform_rate():
    # at equilibrium the only term is |g/(2 tau)|^2: dW/dt = -n/(2 tau)
    g = geo.flat_torus(n1=32, n2=32)
    u = np.full(g.num_nodes, 1.0 / g.total_volume)
    st = heat.HeatState(g, u, t=0.5)
    assert abs(entropy.predicted_dissipation(st) + 2.0 / (2 * 0.5)) < 1e-10


def test_dissipation_report_fields():
    st = heat.delta_init(geo.circle(2 * math.pi, 256), 0, 0.4)
    rep = entropy.dissipation(st, 0.02)
    assert rep.t == pytest.approx(0.42)
    assert rep.W == pytest.approx(rep.dirichlet_term + rep.nash_term - 1)
    assert rep.boundary_term == 0.0
    assert rep.predicted_dWdt <= 0.0
    assert rep.match_relerr < 0.05


def test_dissipation_match_refines():
    errs = []
    for n, dt in ((128, 0.01), (256, 0.005)):
        st = heat.delta_init(geo.round_sphere(n, 16), "pole", 0.2)
        errs.append(entropy.dissipation(st, dt).match_relerr)
    assert errs[0] < 0.05 and errs[0] / errs[1] >= 1.7


def test_torus_ricci_term_zero():
    st = heat.delta_init(geo.flat_torus(n1=48, n2=48), 0, 0.1)
    f = entropy.f_of(st)
    assert np.all(geo.ricci_quadratic(st.grid, f) == 0.0)


def test_boundary_term_zero_on_box_and_closed():
    st = box_gaussian(64)
    assert entropy.boundary_term(st) == 0.0
    st2 = heat.delta_init(geo.flat_torus(n1=32, n2=32), 0, 0.1)
    assert entropy.boundary_term(st2) == 0.0


def test_boundary_term_disc():
    g = geo.euclidean_disc(1.0, 48, 48)
    # radially symmetric state: tangential gradient vanishes identically
    st = heat.delta_init(g, 0, 0.02)
    sym = heat.HeatState(g, np.repeat(st.u.reshape(48, 48)[:, :1], 48, 1)
                         .reshape(-1) / geo.integrate(
                             g, np.repeat(st.u.reshape(48, 48)[:, :1], 48, 1)
                             .reshape(-1)), t=0.02)
    assert entropy.boundary_term(sym) == 0.0
    # an off-center state has angular modes; convex rim forces <= 0
    off = heat.delta_init(g, int(np.ravel_multi_index((16, 0), (48, 48))), 0.02)
    assert entropy.boundary_term(off) <= 0.0


def test_monotonicity_short_run():
    st = heat.delta_init(geo.round_sphere(96, 16), "pole", 0.05)
    w_prev = entropy.w_functional(st)
    for _ in range(25):
        st = heat.step(st, 0.004)
        w = entropy.w_functional(st)
        assert w <= w_prev + 1e-8
        w_prev = w


def test_lemma_residuals_converge():
    for make, base in ((lambda n: geo.circle(2 * math.pi, n), 0),
                       (lambda n: geo.flat_torus(n1=n, n2=n), 0)):
        coarse = entropy.lemma_residuals(
            heat.delta_init(make(64), base, 0.2), 0.02)
        fine = entropy.lemma_residuals(
            heat.delta_init(make(128), base, 0.2), 0.01)
        for rc, rf in zip(coarse, fine):
            assert math.log2(rc / rf) >= 1.0


def test_lemma_residuals_box_small():
    st = box_gaussian(128, 3.0, 0.02)
    r1, r2 = entropy.lemma_residuals(st, 0.005)
    # everything is closed-form quadratic; residuals are pure O(h^2 + dt^2)
    assert r1 < 2.0 and r2 < 0.5


def test_excluded_tail_mass_guard():
    st = box_gaussian(96)
    assert entropy.nash_term(st) == pytest.approx(
        -geo.integrate(st.grid, st.u * np.log(st.u))
        - math.log(4 * math.pi * st.tau), rel=1e-12)
