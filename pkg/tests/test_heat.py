"""Heat stepping, spectral oracles, and conservation properties."""

import math

import numpy as np
import pytest

from entropy_lab import geometry as geo
from entropy_lab import heat


def test_delta_init_matches_oracle():
    g = geo.circle(2 * math.pi, 512)
    st = heat.delta_init(g, 0, 0.01)
    u = heat.kernel(heat.oracle_for(g), g, 0, 0.01)
    assert np.max(np.abs(st.u - u / geo.integrate(g, u))) < 1e-8


def test_delta_init_resolution_floor():
    g = geo.circle(2 * math.pi, 64)
    with pytest.raises(heat.UnderResolved):
        heat.delta_init(g, 0, 0.5 * g.spacing[0] ** 2)


def test_delta_init_box_gaussian():
    g = geo.euclidean_box((3.0, 3.0), (64, 64))
    st = heat.delta_init(g, 32 * 64 + 32, 0.01)
    assert np.all(st.u > 0)
    assert abs(geo.integrate(g, st.u) - 1.0) < 1e-12


def test_uniform_is_equilibrium():
    for g in (geo.flat_torus(n1=32, n2=32),
              geo.euclidean_box((1.0, 1.0), (16, 16))):
        u = np.full(g.num_nodes, 1.0 / g.total_volume)
        st = heat.HeatState(g, u, t=0.1)
        st2 = heat.step(st, 0.01)
        assert np.max(np.abs(st2.u - u)) < 1e-12


def test_step_validation():
    g = geo.circle(2 * math.pi, 64)
    st = heat.delta_init(g, 0, 0.1)
    with pytest.raises(ValueError):
        heat.step(st, -0.1)
    with pytest.raises(ValueError):
        heat.step(st, 10.0)


def test_mass_conserved_along_trajectory():
    for g, base, t0 in ((geo.flat_torus(n1=48, n2=48), 0, 0.1),
                        (geo.euclidean_disc(1.0, 32, 32), 100, 0.05)):
        st = heat.delta_init(g, base, t0)
        for _ in range(10):
            st = heat.step(st, 0.005)
            assert abs(geo.integrate(g, st.u) - 1.0) < 1e-10
            assert st.renorm < 1e-10


def test_maximum_principle():
    g = geo.flat_torus(n1=48, n2=48)
    st = heat.delta_init(g, 0, 0.1)
    lo, hi = st.u.min(), st.u.max()
    for _ in range(20):
        st = heat.step(st, 0.004)
        assert st.u.min() >= lo - 1e-12
        assert st.u.max() <= hi + 1e-12
        lo, hi = st.u.min(), st.u.max()


def test_step_matches_oracle_second_order():
    t0, dt, n_steps = 0.05, 0.005, 10
    errs = []
    for n, scale in ((256, 1), (512, 2)):
        g = geo.circle(2 * math.pi, n)
        st = heat.delta_init(g, 0, t0)
        for _ in range(n_steps * scale):
            st = heat.step(st, dt / scale)
        exact = heat.oracle_state(g, 0, t0 + n_steps * dt).u
        errs.append(np.max(np.abs(st.u - exact)))
    assert errs[0] / errs[1] > 3.0  # joint (h, dt) halving, order ~2


def test_semigroup_property():
    g = geo.circle(2 * math.pi, 256)
    st = heat.delta_init(g, 0, 0.05)
    st = heat.step(heat.step(st, 0.01), 0.01)
    exact = heat.oracle_state(g, 0, 0.07).u
    assert np.max(np.abs(st.u - exact)) < 5e-4


def test_circle_kernel_equilibrium_limit():
    g = geo.circle(2 * math.pi, 64)
    u = heat.kernel(heat.oracle_for(g), g, 0, 50.0)
    assert np.max(np.abs(u - 1.0 / (2 * math.pi))) < 1e-15


def test_torus_kernel_unit_mass():
    g = geo.flat_torus(n1=64, n2=64)
    orc = heat.oracle_for(g)
    for t in (0.05, 0.3, 2.0):
        u = heat.kernel(orc, g, 0, t)
        assert abs(geo.integrate(g, u) - 1.0) < 1e-10


def test_sphere_kernel_self_consistent():
    g = geo.round_sphere(128, 16)
    h1 = heat.kernel(heat.KernelOracle("sphere_legendre", 1e-10), g, "pole", 0.1)
    h2 = heat.kernel(heat.KernelOracle("sphere_legendre", 1e-14), g, "pole", 0.1)
    assert np.max(np.abs(h1 - h2)) < 1e-10


def test_sphere_kernel_positive_small_t():
    g = geo.round_sphere(128, 16)
    u = heat.kernel(heat.oracle_for(g), g, "pole", 0.05)
    assert np.all(u > 0)
    # the antipodal value must sit above the bare Gaussian: conjugate
    # point focusing only enhances the kernel
    r = geo.node_coordinates(g)[:, 0]
    i = int(np.argmax(r))
    bare = math.exp(-r[i] ** 2 / (4 * 0.05)) / (4 * math.pi * 0.05)
    assert u[i] > bare


def test_sphere_kernel_pole_base_required():
    g = geo.round_sphere(64, 16)
    with pytest.raises(geo.UnsupportedBase):
        heat.kernel(heat.oracle_for(g), g, 0, 0.1)


def test_truncation_budget_reported():
    g = geo.circle(2 * math.pi, 64)
    orc = heat.KernelOracle("circle_theta", tol=1e-13, max_terms=3)
    with pytest.raises(heat.TruncationError) as err:
        heat.kernel(orc, g, 0, 40.0)  # spectral branch, needs several terms
    assert err.value.required_terms is None or err.value.required_terms > 3


def test_positivity_retry_by_halving():
    # a coarse step on a sharply peaked state rings negative at the far
    # tail; the solver must recover by internal halving, not fail
    g = geo.flat_torus(n1=128, n2=128)
    st = heat.delta_init(g, 0, 0.05)
    st2 = heat.step(st, 0.004)
    assert np.all(st2.u > 0)
    assert abs(st2.t - 0.054) < 1e-14


def test_heat_state_invariants():
    g = geo.circle(2 * math.pi, 64)
    with pytest.raises(ValueError):
        heat.HeatState(g, np.full(64, -1.0), t=0.1)
    with pytest.raises(ValueError):
        heat.HeatState(g, np.full(64, 1.0), t=0.1)  # mass 2 pi, not 1
    st = heat.delta_init(g, 0, 0.1, tau0=0.25)
    assert abs(st.tau - 0.35) < 1e-15
