"""The log-Sobolev invariant mu(tau) by constrained minimization.

The functional, over fields psi >= 0 with int psi^2 dv = 1:

    F_tau(psi) = int [ 4 tau |grad psi|^2 - psi^2 log psi^2
                       - ((n/2) log(4 pi tau) + n) psi^2 ] dv

mu(tau) = inf F_tau. Substituting u = psi^2 recovers the entropy
functional W, so both code paths agree term by term. A critical point
satisfies the Euler-Lagrange equation

    -4 tau lap psi - psi log psi^2 = m psi,
    m = mu + n + (n/2) log(4 pi tau),

and with the edge-exact Laplacian the recovered multiplier equals
F(psi) + n + (n/2) log(4 pi tau) identically, so convergence is judged by
the max-norm EL residual alone.

Minimization is projected gradient descent on the unit sphere of L2(dv):
steepest descent direction, Barzilai-Borwein trial step, Armijo
backtracking (factor 0.5, c = 1e-4), pointwise absolute value and
renormalization after every step (|psi| never increases the functional,
edge by edge). The functional is nonconvex; mu is approximated from above
with multiple starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from . import geometry
from .entropy import ConstraintViolated
from .geometry import gradient_sq, integrate, laplace_beltrami


@dataclass(frozen=True)
class MuOptions:
    el_tol: float = 1e-6
    max_iters: int = 5000
    armijo_c: float = 1e-4
    armijo_factor: float = 0.5
    max_backtracks: int = 40
    step_min: float = 1e-12
    step_max: float = 1e3


DEFAULT_MU = MuOptions()


@dataclass
class MuResult:
    psi: np.ndarray
    mu: float
    tau: float
    el_residual: float
    multiplier: float
    iterations: int
    converged: bool


def _log_const(n, tau):
    return (n / 2.0) * math.log(4 * math.pi * tau) + n


def _check_unit(grid, psi, tol=1e-8):
    norm = integrate(grid, psi**2)
    if abs(norm - 1.0) > tol:
        raise ConstraintViolated(f"int psi^2 = {norm} differs from 1 beyond {tol}")


def normalized(grid, psi):
    psi = np.abs(np.asarray(psi, dtype=float))
    nrm = integrate(grid, psi**2)
    if nrm <= 0:
        raise ConstraintViolated("cannot normalize the zero field")
    return psi / math.sqrt(nrm)


def w_of_psi(grid, psi, tau):
    """F_tau(psi) in the unrescaled form; psi^2 log psi^2 extends by 0."""
    if tau <= 0:
        raise geometry.InvalidTau(f"tau must be positive, got {tau}")
    _check_unit(grid, psi)
    psi2 = psi**2
    return (4.0 * tau * integrate(grid, gradient_sq(grid, psi))
            - integrate(grid, xlogy(psi2, psi2))
            - _log_const(grid.dim, tau))


def w_of_psi_rescaled(grid, psi, tau):
    """F_tau evaluated literally in the metric g/(2 tau).

    Edge coefficients scale by (2 tau)^{-(n-2)/2}, volumes by
    (2 tau)^{-n/2}, the field by (2 tau)^{n/4}; the additive constant is
    (n/2) log(2 pi) + n. Identical to w_of_psi up to roundoff.
    """
    if tau <= 0:
        raise geometry.InvalidTau(f"tau must be positive, got {tau}")
    _check_unit(grid, psi)
    n = grid.dim
    lam = 2.0 * tau
    w_scaled = grid.node_volumes * lam ** (-n / 2.0)
    psi_s = psi * lam ** (n / 4.0)
    dirich = 0.0
    f2 = psi_s.reshape(grid.shape)
    for axis in range(grid.dim):
        c = grid.cplus[axis].reshape(grid.shape) * lam ** (-(n - 2) / 2.0)
        d = np.roll(f2, -1, axis=axis) - f2
        dirich += float(np.sum(2.0 * c * d * d))
    psi2 = psi_s**2
    ent_term = float(np.dot(xlogy(psi2, psi2).reshape(-1), w_scaled))
    mass = float(np.dot(psi2.reshape(-1), w_scaled))
    return dirich - ent_term - ((n / 2.0) * math.log(2 * math.pi) + n) * mass


def functional_gradient(grid, psi, tau):
    """L2(dv) gradient of F_tau; exact for the discrete functional."""
    c = _log_const(grid.dim, tau)
    logterm = np.where(psi > 0, xlogy(psi, psi**2), 0.0)
    return (-8.0 * tau * laplace_beltrami(grid, psi) - 2.0 * logterm
            - 2.0 * (1.0 + c) * psi)


def el_residual_field(grid, psi, tau, multiplier):
    """Residual of -4 tau lap psi - psi log psi^2 = m psi."""
    logterm = np.where(psi > 0, xlogy(psi, psi**2), 0.0)
    return (-4.0 * tau * laplace_beltrami(grid, psi) - logterm
            - multiplier * psi)


def recovered_multiplier(grid, psi, tau):
    """int psi (-4 tau lap psi - psi log psi^2) dv; equals F(psi) + const
    identically through the exact Green pairing."""
    logterm = np.where(psi > 0, xlogy(psi, psi**2), 0.0)
    return integrate(grid, psi * (-4.0 * tau * laplace_beltrami(grid, psi) - logterm))


def scaling_identity_check(grid, phi, lam):
    """Both sides of the homogeneity identity of the integrand F:

        int F(lam phi) / int (lam phi)^2 = int F(phi) / int phi^2 - log lam^2

    Exact algebra; the two returned values agree to roundoff.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    phi = np.asarray(phi, dtype=float)

    def raw(field):
        f2 = field**2
        return (2.0 * integrate(grid, gradient_sq(grid, field))
                - integrate(grid, xlogy(f2, f2))
                - ((grid.dim / 2.0) * math.log(2 * math.pi) + grid.dim)
                * integrate(grid, f2))

    mass = integrate(grid, phi**2)
    lhs = raw(lam * phi) / (lam**2 * mass)
    rhs = raw(phi) / mass - math.log(lam**2)
    return lhs, rhs


def minimize_mu(grid, tau, init, opts=DEFAULT_MU):
    """Projected gradient descent for mu(tau) from one start field."""
    psi = normalized(grid, init)
    fval = w_of_psi(grid, psi, tau)
    c = _log_const(grid.dim, tau)
    alpha_safe = 1.0 / (1.0 + 8.0 * tau / min(grid.spacing) ** 2)
    alpha = alpha_safe
    prev_psi = None
    prev_grad = None
    iterations = 0
    converged = False
    stalled = False
    for iterations in range(1, opts.max_iters + 1):
        grad = functional_gradient(grid, psi, tau)
        gtan = grad - integrate(grid, grad * psi) * psi
        # the EL residual with the recovered multiplier is exactly gtan/2
        res = 0.5 * float(np.max(np.abs(gtan)))
        if res < opts.el_tol:
            converged = True
            break
        if prev_psi is not None:
            s = psi - prev_psi
            y = gtan - prev_grad
            sy = integrate(grid, s * y)
            if sy > 0:
                alpha = min(max(integrate(grid, s * s) / sy, opts.step_min),
                            opts.step_max)
        prev_psi, prev_grad = psi, gtan
        gnorm2 = integrate(grid, gtan * gtan)
        if gnorm2 == 0.0:
            converged = res < opts.el_tol
            break
        accepted = False
        a = alpha
        for _ in range(opts.max_backtracks):
            trial = normalized(grid, psi - a * gtan)
            ftrial = w_of_psi(grid, trial, tau)
            if ftrial <= fval - opts.armijo_c * a * gnorm2:
                psi, fval = trial, ftrial
                accepted = True
                break
            a *= opts.armijo_factor
        if accepted:
            stalled = False
        else:
            if stalled:
                break  # two collapses in a row: report the best iterate
            # drop the BB memory and restart from the conservative step
            stalled = True
            prev_psi = prev_grad = None
            alpha = alpha_safe
    m = fval + c
    res = float(np.max(np.abs(el_residual_field(grid, psi, tau, m))))
    converged = converged or res < opts.el_tol
    return MuResult(psi=psi, mu=fval, tau=tau, el_residual=res,
                    multiplier=recovered_multiplier(grid, psi, tau),
                    iterations=iterations, converged=converged)


def gaussian_start(grid, tau, base=None):
    """exp(-r^2 / (8 tau))-profile start, the scale of the expected
    minimizer, centered at the grid's natural base."""
    if base is None:
        base = default_base(grid)
    r = geometry.distance_field(grid, base)
    return normalized(grid, np.exp(-(r**2) / (8.0 * tau)))


def constant_start(grid):
    return normalized(grid, np.ones(grid.num_nodes))


def default_base(grid):
    if grid.kind == "warped_surface":
        return "pole"
    if grid.kind == "euclidean_box":
        idx = [n // 2 for n in grid.shape]
        return int(np.ravel_multi_index(idx, grid.shape))
    return 0


def _domain_scale(grid):
    if grid.kind == "warped_surface":
        return grid.axes[0].length
    return min(ax.length for ax in grid.axes)


def minimize_mu_multistart(grid, tau, opts=DEFAULT_MU, warm=None):
    """Best of Gaussian, constant, and warm starts; mu is an upper bound.

    The Gaussian start is skipped once its scale sqrt(2 tau) exceeds the
    domain; a wrapped bump is then indistinguishable from the constant
    branch and only slows the descent down.
    """
    starts = [constant_start(grid)]
    if math.sqrt(2.0 * tau) <= 0.25 * _domain_scale(grid):
        starts.insert(0, gaussian_start(grid, tau))
    if warm is not None:
        starts.append(warm)
    best = None
    for s0 in starts:
        res = minimize_mu(grid, tau, s0, opts)
        if best is None or res.mu < best.mu:
            best = res
    return best


def mu_curve(grid, taus, opts=DEFAULT_MU, parallel=False, max_workers=1):
    """mu over an ascending tau list, warm-started along the chain.

    Entries may run in parallel (cold starts) or serially with warm
    starts; results are deterministic either way. Monotonicity holds over
    the converged entries up to the stated slack.
    """
    taus = list(taus)
    if any(t <= 0 for t in taus) or any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("taus must be positive and strictly ascending")
    if parallel and max_workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as ex:
            results = list(ex.map(
                lambda t: minimize_mu_multistart(grid, t, opts), taus))
        return results
    results = []
    warm = None
    for t in taus:
        res = minimize_mu_multistart(grid, t, opts, warm=warm)
        results.append(res)
        warm = res.psi
    return results


def euclidean_lsi_check(grid, f_samples):
    """The sharp Euclidean inequality at scale tau = 1/2 for given f fields.

    Each sample is normalized so that u = e^{-f} / (2 pi)^{n/2} has unit
    mass (an additive shift of f), then the integral

        int ( |grad f|^2 / 2 + f - n ) u dv

    is returned per sample; each is nonnegative up to quadrature tolerance
    and zero exactly for the standard Gaussian.
    """
    n = grid.dim
    rows = []
    for f in f_samples:
        f = np.asarray(f, dtype=float)
        u = np.exp(-f) / (2 * math.pi) ** (n / 2.0)
        mass = integrate(grid, u)
        if not (0 < mass < np.inf):
            raise ConstraintViolated("sample cannot be normalized")
        f = f + math.log(mass)
        u = u / mass
        psi = np.sqrt(u)
        value = (2.0 * integrate(grid, gradient_sq(grid, psi))
                 + integrate(grid, (f - n) * u))
        rows.append(float(value))
    return rows


def gaussian_lsi_value(n, variance):
    """Closed-form value of the scale-1/2 functional at a centered
    Gaussian density of the given variance: (n/2)(1/s - 1 + log s)."""
    s = variance
    return (n / 2.0) * (1.0 / s - 1.0 + math.log(s))
