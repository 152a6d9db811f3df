"""The W-functional, its pointwise version, dissipation, and residuals.

For a positive unit-mass density u at scale tau, with
f = -log u - (n/2) log(4 pi tau):

    W(u, tau)  = int (tau |grad f|^2 + f - n) u dv
    pw(u, tau) = tau (2 lap f - |grad f|^2) + f - n      (pointwise field)
    dW/dt      = -int 2 tau (|Hess f - g/(2 tau)|^2 + Ric(grad f, grad f)) u dv

Discrete compatibility. The gradient and Laplacian terms are evaluated
through u itself rather than through the f field:

    |grad f|^2        := 4 |grad sqrt(u)|^2 / u     (edge-split form)
    2 lap f - |grad f|^2 := |grad f|^2 - 2 (lap u)/u

Both replacements are second-order discretizations of the same continuum
object, and they make three structural identities exact in floating point
rather than merely O(h^2):

  * int pw * u dv == W            (sum of lap u against volumes is zero)
  * W == its sqrt(u)-split form   4 tau int |grad v|^2 - int u log u - const
  * the Dirichlet term of W equals the log-Sobolev functional evaluated
    at psi = sqrt(u) term by term.

Gaussian tails on boxes can underflow the f field; nodes with
u < 1e-300 are excluded from f-weighted integrands and the excluded mass
is tracked (it must stay below 1e-12).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from . import geometry, heat
from .geometry import (gradient_inner, gradient_sq, hessian_norm_sq,
                       hessian_quadratic, integrate, laplace_beltrami,
                       ricci_quadratic)

UNDERFLOW_FLOOR = 1e-300


class LogDomain(ValueError):
    """f = -log u is undefined: u has a nonpositive node."""


class ConstraintViolated(ValueError):
    """The unit-mass (or unit-L2) constraint is violated beyond tolerance."""


REPORT_COLUMNS = (
    "t", "tau", "W", "nash_term", "dirichlet_term",
    "predicted_dWdt", "measured_dWdt", "boundary_term", "match_relerr",
)


@dataclass(frozen=True)
class EntropyReport:
    t: float
    tau: float
    W: float
    nash_term: float
    dirichlet_term: float
    predicted_dWdt: float
    measured_dWdt: float
    boundary_term: float
    match_relerr: float

    def row(self):
        return [getattr(self, c) for c in REPORT_COLUMNS]


def f_of(state):
    """The log-density f = -log u - (n/2) log(4 pi tau)."""
    if np.any(state.u <= 0):
        raise LogDomain("u must be positive to form f = -log u")
    n = state.grid.dim
    return -np.log(state.u) - (n / 2.0) * math.log(4 * math.pi * state.tau)


def _check_mass(state, tol=1e-8):
    mass = integrate(state.grid, state.u)
    if abs(mass - 1.0) > tol:
        raise ConstraintViolated(f"mass {mass} differs from 1 beyond {tol}")


def grad_f_sq(state):
    """|grad f|^2 evaluated through u: 4 |grad sqrt(u)|^2 / u."""
    return 4.0 * gradient_sq(state.grid, np.sqrt(state.u)) / state.u


def w_field(state):
    """The field w = 2 lap f - |grad f|^2, evaluated through u."""
    return grad_f_sq(state) - 2.0 * laplace_beltrami(state.grid, state.u) / state.u


def core_mask(state, rel=0.4):
    """Nodes where u is within a factor 1/rel of its maximum.

    Pointwise defect fields are only meaningful where the density is
    resolved; far tails vary by more than unity in log u per cell and any
    discrete second derivative there is noise.
    """
    return state.u >= rel * state.u.max()


def dirichlet_term(state):
    """4 tau int |grad sqrt(u)|^2 dv == int tau |grad f|^2 u dv."""
    return 4.0 * state.tau * integrate(
        state.grid, gradient_sq(state.grid, np.sqrt(state.u)))


def nash_term(state):
    """int f u dv, with sub-underflow nodes excluded."""
    n = state.grid.dim
    mask = state.u >= UNDERFLOW_FLOOR
    excluded = integrate(state.grid, np.where(mask, 0.0, state.u))
    if excluded > 1e-12:
        raise ConstraintViolated(
            f"mass {excluded} below the underflow floor is not negligible")
    ulogu = integrate(state.grid, xlogy(state.u, state.u))
    return -ulogu - (n / 2.0) * math.log(4 * math.pi * state.tau)


def w_functional(state):
    """W = dirichlet + nash - n for the unit-mass state."""
    _check_mass(state)
    return dirichlet_term(state) + nash_term(state) - state.grid.dim


def w_split_form(state):
    """W computed as 4 t int |grad v|^2 - int (log v^2) v^2 - n - (n/2)log(4 pi t)
    with v = sqrt(u); equals w_functional identically."""
    n = state.grid.dim
    v = np.sqrt(state.u)
    return (4.0 * state.tau * integrate(state.grid, gradient_sq(state.grid, v))
            - integrate(state.grid, xlogy(state.u, state.u))
            - n - (n / 2.0) * math.log(4 * math.pi * state.tau))


def pointwise_w(state):
    """tau (2 lap f - |grad f|^2) + f - n as a nodal field.

    Its u-weighted integral reproduces w_functional exactly because the
    volume-weighted sum of lap u vanishes identically on closed and
    Neumann grids.
    """
    return state.tau * w_field(state) + f_of(state) - state.grid.dim


def predicted_dissipation(state):
    """-int 2 tau (|Hess f - g/(2 tau)|^2 + Ric(grad f, grad f)) u dv."""
    f = f_of(state)
    integrand = hessian_quadratic(state.grid, f, state.tau) + ricci_quadratic(state.grid, f)
    return -2.0 * state.tau * integrate(state.grid, integrand * state.u)


def boundary_term(state):
    """-2 tau over the boundary of II((grad f)^T, (grad f)^T) dA.

    Exactly zero on closed grids and on flat-faced boxes; on warped rims
    the tangential gradient is the angular derivative on the outermost
    ring. Nonpositive whenever the boundary is convex.
    """
    grid = state.grid
    if grid.closed or not grid.boundary:
        return 0.0
    total = 0.0
    f = f_of(state)
    for seg in grid.boundary:
        if np.all(seg.second_fundamental == 0.0):
            continue
        fn = f.reshape(grid.shape)
        ring = fn[-1, :]  # warped rim is the last radial row
        htheta = grid.axes[1].h
        ftheta = (np.roll(ring, -1) - np.roll(ring, 1)) / (2 * htheta)
        phi_b = float(grid.profile.phi(grid.axes[0].length))
        tangential_sq = (ftheta / phi_b) ** 2
        total += float(np.sum(seg.area_weights * seg.second_fundamental * tangential_sq))
    return -2.0 * state.tau * total


def dissipation(state, dt, opts=heat.DEFAULT_SOLVER):
    """EntropyReport at time t + dt with measured and predicted dW/dt.

    The trajectory takes four half-steps; the measured derivative is the
    Richardson combination of centered differences at spacings dt and
    dt/2, both centered at t + dt, which removes the quotient truncation
    error and leaves the solver and spatial bias.
    """
    s = [state]
    for _ in range(4):
        s.append(heat.step(s[-1], dt / 2.0, opts))
    w0, w1, w2, w3, w4 = (w_functional(si) for si in s)
    d_coarse = (w4 - w0) / (2.0 * dt)
    d_fine = (w3 - w1) / dt
    measured = (4.0 * d_fine - d_coarse) / 3.0
    mid = s[2]
    predicted = predicted_dissipation(mid)
    bnd = boundary_term(mid)
    relerr = abs(measured - predicted) / max(abs(predicted), 1e-300)
    return EntropyReport(
        t=mid.t, tau=mid.tau, W=w2,
        nash_term=nash_term(mid), dirichlet_term=dirichlet_term(mid),
        predicted_dWdt=predicted, measured_dWdt=measured,
        boundary_term=bnd, match_relerr=relerr,
    )


def lemma_residuals(state, dt, opts=heat.DEFAULT_SOLVER, core_rel=None):
    """Max-norm residuals of the two evolution identities.

    Identity 1:  (d/dt - lap) w  = -2 (|Hess f|^2 + Ric(grad f, grad f))
                                   - 2 <grad w, grad f>
    Identity 2:  (d/dt - lap) W  = -2 tau (|Hess f - g/(2 tau)|^2 + Ric)
                                   - 2 <grad W, grad f>
    with w = 2 lap f - |grad f|^2 and W = tau w + f - n.

    Time derivatives are centered over two solver steps; both residuals
    converge at order >= 1 under joint (h, dt) halving.
    """
    grid = state.grid
    n = grid.dim
    s0 = state
    s1 = heat.step(s0, dt, opts)
    s2 = heat.step(s1, dt, opts)
    w0, w1, w2 = w_field(s0), w_field(s1), w_field(s2)
    f1 = f_of(s1)
    hess = hessian_norm_sq(grid, f1)
    ricci = ricci_quadratic(grid, f1)
    res1 = ((w2 - w0) / (2 * dt) - laplace_beltrami(grid, w1)
            + 2.0 * (hess + ricci) + 2.0 * gradient_inner(grid, w1, f1))

    def big_w(s, w):
        return s.tau * w + f_of(s) - n

    W0, W1, W2 = big_w(s0, w0), big_w(s1, w1), big_w(s2, w2)
    hessq = hessian_quadratic(grid, f1, s1.tau)
    res2 = ((W2 - W0) / (2 * dt) - laplace_beltrami(grid, W1)
            + 2.0 * s1.tau * (hessq + ricci) + 2.0 * gradient_inner(grid, W1, f1))
    return float(np.max(np.abs(res1))), float(np.max(np.abs(res2)))
