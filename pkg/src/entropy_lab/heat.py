"""Positive unit-mass heat flow and spectral kernel oracles.

Time stepping is Crank-Nicolson on the divergence-form Laplacian, solved
with Jacobi-preconditioned conjugate gradients to relative residual 1e-12.
Because the weighted Laplacian matrix has exact zero row sums, each step
conserves the discrete mass up to the solver residual; the leftover drift
is renormalized away and recorded on the state.

Kernel oracles:

* circle_theta      H(r,t) = (1/L) [1 + 2 sum_k exp(-(2 pi k/L)^2 t) cos(2 pi k r/L)]
* torus_theta       product of the two circle kernels
* sphere_legendre   H(r,t) = sum_l (2l+1)/(4 pi) exp(-l(l+1) t) P_l(cos r)

Fundamental-solution runs always start from an oracle (or a resolved
metric Gaussian where no oracle exists), never from a discrete delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import eval_legendre

from . import geometry
from .geometry import ManifoldGrid, UnsupportedBase, integrate


class StepFailure(RuntimeError):
    """Positivity could not be recovered after the halving floor."""


class TruncationError(RuntimeError):
    """Requested time is below the oracle's truncation budget."""

    def __init__(self, msg, required_terms=None):
        super().__init__(msg)
        self.required_terms = required_terms


class UnderResolved(ValueError):
    """Initial time too small for the grid spacing (t0 < 10 h^2)."""


@dataclass(frozen=True)
class SolverOptions:
    dt_max: float = 1.0
    cg_rtol: float = 1e-12
    max_halvings: int = 8


DEFAULT_SOLVER = SolverOptions()


@dataclass(frozen=True)
class HeatState:
    """A positive solution u of unit discrete mass at time t.

    tau0 is the entropy offset; the entropy scale is tau = t + tau0.
    States are immutable; step() returns a new one.
    """

    grid: ManifoldGrid
    u: np.ndarray
    t: float
    tau0: float = 0.0
    renorm: float = 0.0   # |mass - 1| removed by the last renormalization

    @property
    def tau(self):
        return self.t + self.tau0

    def __post_init__(self):
        if np.any(self.u <= 0):
            raise ValueError("heat state requires u > 0 at every node")
        mass = integrate(self.grid, self.u)
        if abs(mass - 1.0) > 1e-10:
            raise ValueError(f"heat state mass {mass} violates unit constraint")


def _normalized_state(grid, u, t, tau0, renorm=None):
    mass = integrate(grid, u)
    if renorm is None:
        renorm = abs(mass - 1.0)
    return HeatState(grid, u / mass, t, tau0, renorm)


def _cn_matrices(grid, dt):
    cache = grid.__dict__.setdefault("_cn_cache", {})
    if dt not in cache:
        M = grid._weighted_laplacian
        D = sp.diags(grid.node_volumes)
        A = (D - (dt / 2.0) * M).tocsr()
        B = (D + (dt / 2.0) * M).tocsr()
        precond = spla.LinearOperator(
            A.shape, matvec=lambda x, d=1.0 / A.diagonal(): d * x)
        if len(cache) > 16:
            cache.clear()
        cache[dt] = (A, B, precond)
    return cache[dt]


def step(state, dt, opts=DEFAULT_SOLVER, _depth=0):
    """One Crank-Nicolson step of length dt; mass renormalized to 1.

    If any node would go nonpositive, the step is retried as two steps of
    dt/2, down to ``opts.max_halvings`` levels, then StepFailure.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > opts.dt_max:
        raise ValueError(f"dt={dt} exceeds configured maximum {opts.dt_max}")
    A, B, precond = _cn_matrices(state.grid, dt)
    rhs = B @ state.u
    u_new, info = spla.cg(A, rhs, x0=state.u, rtol=opts.cg_rtol, atol=0.0,
                          M=precond, maxiter=10 * state.grid.num_nodes)
    if info != 0:
        raise StepFailure(f"conjugate gradient did not converge (info={info})")
    if np.any(u_new <= 0):
        if _depth >= opts.max_halvings:
            raise StepFailure(
                f"positivity unrecoverable after {opts.max_halvings} halvings")
        half = step(state, dt / 2.0, opts, _depth + 1)
        return step(half, dt / 2.0, opts, _depth + 1)
    return _normalized_state(state.grid, u_new, state.t + dt, state.tau0)


def run_trajectory(state, dt, n_steps, opts=DEFAULT_SOLVER):
    """n_steps consecutive steps; returns the list of visited states."""
    states = [state]
    for _ in range(n_steps):
        states.append(step(states[-1], dt, opts))
    return states


# -- spectral oracles -------------------------------------------------------

@dataclass(frozen=True)
class KernelOracle:
    """Spectral heat-kernel evaluator for circle, flat torus, or sphere."""

    kind: str                  # circle_theta | torus_theta | sphere_legendre
    tol: float = 1e-13
    max_terms: int = 4096


def oracle_for(grid, tol=1e-13):
    """The natural oracle for a grid, or None when no closed form exists."""
    if grid.kind == "circle":
        return KernelOracle("circle_theta", tol)
    if grid.kind == "flat_torus":
        return KernelOracle("torus_theta", tol)
    if (grid.kind == "warped_surface" and grid.profile.name == "sin"
            and abs(grid.axes[0].length - math.pi) < 1e-12):
        return KernelOracle("sphere_legendre", tol)
    return None


def _theta_1d(r, t, length, tol, max_terms):
    """Periodic Gaussian on a circle of given length, truncated at tol.

    The spectral sum and its Poisson-dual image sum are the same function;
    the image form is used at small t where it converges faster and stays
    strictly positive, the spectral form at large t.
    """
    if t >= length**2 / (4 * math.pi):
        acc = np.ones_like(r)
        k = 1
        while True:
            term = 2.0 * math.exp(-((2 * math.pi * k / length) ** 2) * t)
            if term < tol:
                break
            if k > max_terms:
                need = int(length / (2 * math.pi)
                           * math.sqrt(max(math.log(2 / tol), 1.0) / t)) + 1
                raise TruncationError(
                    f"theta series needs ~{need} terms at t={t}",
                    required_terms=need)
            acc = acc + term * np.cos(2 * math.pi * k * r / length)
            k += 1
        return acc / length
    # image branch: sum of Gaussians at r + m length
    width = math.sqrt(4 * t * max(math.log(1.0 / tol), 1.0))
    m_max = int(math.ceil((width + length) / length))
    if m_max > max_terms:
        raise TruncationError(
            f"image sum needs {m_max} terms at t={t}", required_terms=m_max)
    acc = np.zeros_like(r)
    for m in range(-m_max, m_max + 1):
        acc = acc + np.exp(-((r + m * length) ** 2) / (4.0 * t))
    return acc / math.sqrt(4 * math.pi * t)


def kernel(oracle, grid, base, t):
    """Heat kernel values on the grid nodes at time t from the base point."""
    if t <= 0:
        raise ValueError("kernel requires t > 0")
    xyz = geometry.node_coordinates(grid)
    if oracle.kind == "circle_theta":
        r = geometry.distance_field(grid, base)
        return _theta_1d(r, t, grid.axes[0].length, oracle.tol, oracle.max_terms)
    if oracle.kind == "torus_theta":
        b = xyz[int(base)]
        out = np.ones(grid.num_nodes)
        for i, ax in enumerate(grid.axes):
            d = geometry._axis_distance(xyz[:, i], b[i], ax)
            out = out * _theta_1d(d, t, ax.length, oracle.tol, oracle.max_terms)
        return out
    if oracle.kind == "sphere_legendre":
        if base != "pole":
            raise UnsupportedBase("sphere_legendre requires the pole base")
        r_nodes = grid.axes[0].coords
        per_ring = _sphere_ring_values(r_nodes, t, oracle)
        ntheta = grid.shape[1]
        return np.repeat(per_ring, ntheta)
    raise ValueError(f"unknown oracle kind {oracle.kind!r}")


def _legendre_degree_budget(t, tol, max_terms):
    l, coeff_floor = 1, tol / (4 * math.pi)
    while (2 * l + 1) / (4 * math.pi) * math.exp(-l * (l + 1) * t) >= coeff_floor:
        l += 1
        if l > max_terms:
            need = int(math.sqrt(max(math.log(1 / tol), 1.0) / t)) + 1
            raise TruncationError(
                f"Legendre series needs degree ~{need} at t={t}",
                required_terms=need)
    return l


def _sphere_ring_values(r_nodes, t, oracle):
    """Legendre sum per radial ring, with high-precision rescue rings.

    Near the antipode at small t the partial sums cancel down to values far
    below the double-precision noise floor of the term magnitudes; those
    rings are resummed with mpmath at a working precision sized from the
    a-priori scale exp(-r^2/(4t)).
    """
    lmax = _legendre_degree_budget(t, oracle.tol, oracle.max_terms)
    x = np.cos(r_nodes)
    acc = np.full_like(x, 1.0 / (4 * math.pi))
    absacc = np.abs(acc).copy()
    for l in range(1, lmax + 1):
        coeff = (2 * l + 1) / (4 * math.pi) * math.exp(-l * (l + 1) * t)
        pl = eval_legendre(l, x)
        acc = acc + coeff * pl
        absacc = absacc + np.abs(coeff * pl)
    # roundoff and truncation bounds relative to each ring's value
    noise = 8.0 * np.finfo(float).eps * absacc
    tail = (2 * lmax + 3) / (4 * math.pi) * math.exp(-(lmax + 1) * (lmax + 2) * t) * 4.0
    bad = (acc <= 0) | ((noise + tail) > 1e-9 * np.abs(acc))
    if np.any(bad):
        for i in np.nonzero(bad)[0]:
            acc[i] = _sphere_ring_mp(float(r_nodes[i]), t, oracle.max_terms)
    return acc


def _sphere_ring_mp(r, t, max_terms):
    """One antipodal-region ring summed in high precision.

    Working precision and truncation depth are sized from the a-priori
    scale exp(-r^2/(4t))/(4 pi t), which the cancelling partial sums must
    reach before the tail is negligible relative to the value.
    """
    import mpmath as mp

    scale_digits = (r**2 / (4 * t)) / math.log(10.0)
    dps = min(400, 40 + int(scale_digits))
    log_floor = -(r**2) / (4 * t) + math.log(1e-13 / (4 * math.pi * t))
    with mp.workdps(dps):
        xi = mp.cos(mp.mpf(r))
        p_prev, p_cur = mp.mpf(1), xi
        total = mp.mpf(1) / (4 * mp.pi) + 3 * mp.e**(mp.mpf(-2) * t) / (4 * mp.pi) * xi
        l = 2
        while True:
            log_coeff = math.log(2 * l + 1) - l * (l + 1) * t - math.log(4 * math.pi)
            if log_coeff < log_floor:
                break
            if l > max_terms:
                raise TruncationError(
                    f"antipodal Legendre resummation exceeds {max_terms} terms",
                    required_terms=l)
            p_next = ((2 * l - 1) * xi * p_cur - (l - 1) * p_prev) / l
            total += (2 * l + 1) / (4 * mp.pi) * mp.e**(mp.mpf(-l * (l + 1)) * t) * p_next
            p_prev, p_cur = p_cur, p_next
            l += 1
        return float(total)


def oracle_state(grid, base, t, tau0=0.0, oracle=None):
    """HeatState from the spectral oracle, renormalized to unit grid mass."""
    orc = oracle or oracle_for(grid)
    if orc is None:
        raise ValueError(f"no spectral oracle for grid kind {grid.kind}")
    u = kernel(orc, grid, base, t)
    return _normalized_state(grid, u, t, tau0)


def delta_init(grid, base, t0, tau0=0.0):
    """Resolved fundamental-solution start at t0 > 0.

    Uses the spectral oracle when the grid has one, otherwise a metric
    Gaussian bump exp(-r^2/(4 t0)) / (4 pi t0)^(n/2), renormalized.
    Requires t0 >= 10 h^2 so the profile is resolved on the grid.
    """
    if grid.kind == "warped_surface":
        # the angular spacing is a coordinate scale, not a length scale
        hmax = grid.spacing[0]
    else:
        hmax = max(grid.spacing)
    if t0 < 10.0 * hmax**2:
        raise UnderResolved(f"t0={t0} below resolution floor {10*hmax**2:.3g}")
    orc = oracle_for(grid)
    if orc is not None:
        return oracle_state(grid, base, t0, tau0, orc)
    r = geometry.distance_field(grid, base)
    n = grid.dim
    u = np.exp(-(r**2) / (4.0 * t0)) / (4 * math.pi * t0) ** (n / 2.0)
    return _normalized_state(grid, u, t0, tau0)
