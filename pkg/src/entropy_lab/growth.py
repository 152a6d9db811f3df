"""Entropy versus volume growth: ball volumes, noncollapsing, diameter.

Geodesic-ball volumes come from weighted node counting, areas from shell
differencing of the volume function with a widening stencil (the counting
noise in V is O(h r), so the difference spacing grows like sqrt(h r) to
keep the derivative convergent).

The noncollapsing chain uses the explicit C1 cutoff

    zeta(s) = 1 on [0, 1/2],  1 - 3 sig^2 + 2 sig^3 with sig = 2s - 1 on
    [1/2, 1],  0 beyond,

which makes every constant in the chain a computable number of the
artifact: with h^2 = e^{-B} (4 pi R^2)^{-n/2} zeta^2(r/R) of unit mass,

    -A <= mu(R^2) <= C3(n) + B,
    log(V_x(R)/R^n) + C1(n) <= B <= log(V_x(R)/R^n) + C2(n)

under the volume doubling V_x(R/2) >= eta V_x(R), eta = 3^{-n}, so
V_x(R)/R^n >= kappa = exp(-A - C2(n) - C3(n)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from . import entropy, geometry
from .geometry import distance_field, gradient_sq, integrate


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class VolumeProfile:
    radii: np.ndarray
    volumes: np.ndarray
    areas: np.ndarray
    base: object
    dim: int
    clamped: bool     # some requested radius exceeded the grid extent


def volume_profile(grid, base, radii):
    """Ball volumes and shell areas around a base node."""
    r = distance_field(grid, base)
    rmax = float(r.max())
    radii = np.asarray(radii, dtype=float)
    clamped = bool(np.any(radii > rmax))
    radii = np.minimum(radii, rmax)
    w = grid.node_volumes
    h = max(grid.spacing[0], min(grid.spacing))

    def vol(rr):
        return float(np.sum(w[r <= rr]))

    vols = np.array([vol(rr) for rr in radii])
    areas = []
    for rr in radii:
        dr = max(6.0 * h, math.sqrt(h * max(rr, h)))
        lo, hi = max(rr - dr, 0.0), min(rr + dr, rmax)
        areas.append((vol(hi) - vol(lo)) / (hi - lo) if hi > lo else 0.0)
    return VolumeProfile(radii=radii, volumes=vols, areas=np.array(areas),
                         base=base, dim=grid.dim, clamped=clamped)


@dataclass(frozen=True)
class EntropyGrowthRow:
    t: float
    W: float
    dirichlet: float      # 4 t int |grad sqrt(u)|^2 dv
    log_term: float       # -int u log u dv
    norm_term: float      # n + (n/2) log(4 pi t)


def kernel_entropy_bound(grid, states):
    """W along a fundamental-solution trajectory, split per the
    sqrt-density form; the Dirichlet part never exceeds n (gradient
    estimate), and on maximum-volume-growth grids W stays in a band."""
    rows = []
    n = grid.dim
    for s in states:
        v = np.sqrt(s.u)
        dirich = 4.0 * s.tau * integrate(grid, gradient_sq(grid, v))
        logterm = -integrate(grid, xlogy(s.u, s.u))
        norm = n + (n / 2.0) * math.log(4 * math.pi * s.tau)
        W = dirich + logterm - norm
        if not np.isfinite(W):
            raise DomainError("entropy split term not finite")
        rows.append(EntropyGrowthRow(t=s.t, W=W, dirichlet=dirich,
                                     log_term=logterm, norm_term=norm))
    return rows


def smoothstep_cutoff(s):
    """zeta: 1 on [0, 1/2], C1 descent to 0 at 1, 0 beyond."""
    s = np.asarray(s, dtype=float)
    sig = np.clip(2.0 * s - 1.0, 0.0, 1.0)
    return 1.0 - 3.0 * sig**2 + 2.0 * sig**3


def cutoff_constants(n, quad_points=200001):
    """C1, C2, C3 of the noncollapsing chain for the fixed cutoff.

    C1 = log eta - (n/2) log 4 pi, C2 = -(n/2) log 4 pi, and C3 is the
    cutoff's own Dirichlet and entropy cost evaluated by quadrature of
    the scale-invariant radial integrals.
    """
    eta = (1.0 / 3.0) ** n
    s = np.linspace(0.0, 1.0, quad_points)
    z = smoothstep_cutoff(s)
    sig = np.clip(2.0 * s - 1.0, 0.0, 1.0)
    dz = np.where((s > 0.5) & (s < 1.0), -12.0 * sig * (1.0 - sig), 0.0)
    if n == 2:
        meas = 2.0 * math.pi * s
    else:
        meas = 2.0 * np.ones_like(s)
    ds = s[1] - s[0]
    zm = float(np.sum(z**2 * meas) * ds)            # int zeta^2 over unit ball
    zd = float(np.sum(dz**2 * meas) * ds)           # int zeta'^2
    zl = float(np.sum(-xlogy(z**2, z**2) * meas) * ds)
    c3 = 4.0 * zd / zm + zl / zm
    c1 = math.log(eta) - (n / 2.0) * math.log(4 * math.pi)
    c2 = -(n / 2.0) * math.log(4 * math.pi)
    return c1, c2, c3


@dataclass(frozen=True)
class KappaReport:
    R: float
    A: float
    B: float
    mu_upper: float           # the test-function value bounding mu(R^2)
    c1: float
    c2: float
    c3: float
    kappa: float
    measured_ratio: float     # V_x(R) / R^n
    doubling_ok: bool
    bracket_ok: bool


def mu_lower_to_volume(grid, base, A, R):
    """Noncollapsing constant kappa from an entropy lower bound -A.

    Builds the cutoff test density at scale R, evaluates the variational
    upper bound for mu(R^2), verifies the B bracket under the doubling
    hypothesis, and reports kappa with the measured volume ratio.
    """
    if R <= 0 or A < 0:
        raise DomainError("need R > 0 and A >= 0")
    n = grid.dim
    r = distance_field(grid, base)
    zeta = smoothstep_cutoff(r / R)
    h2_unnorm = zeta**2
    mass = integrate(grid, h2_unnorm)
    if mass <= 0:
        raise DomainError("cutoff support misses the grid")
    # e^{-B} (4 pi R^2)^{-n/2} * mass = 1
    B = math.log(mass) - (n / 2.0) * math.log(4 * math.pi * R**2)
    hfield = zeta / math.sqrt(mass)
    tau = R**2
    dirich = 4.0 * tau * integrate(grid, gradient_sq(grid, hfield))
    h2 = hfield**2
    logh2 = integrate(grid, xlogy(h2, h2))
    mu_upper = dirich - logh2 - (n / 2.0) * math.log(4 * math.pi * tau)

    prof = volume_profile(grid, base, [R / 2.0, R])
    v_half, v_full = float(prof.volumes[0]), float(prof.volumes[1])
    eta = (1.0 / 3.0) ** n
    doubling_ok = v_half >= eta * v_full
    c1, c2, c3 = cutoff_constants(n)
    ratio = v_full / R**n
    bracket_ok = (math.log(ratio) + c1 - 1e-9 <= B <= math.log(ratio) + c2 + 1e-9)
    kappa = math.exp(-A - c2 - c3)
    return KappaReport(R=R, A=A, B=B, mu_upper=mu_upper, c1=c1, c2=c2, c3=c3,
                       kappa=kappa, measured_ratio=ratio,
                       doubling_ok=doubling_ok, bracket_ok=bracket_ok)


@dataclass(frozen=True)
class DoublingReport:
    eta: float
    break_k: int              # first k with V(R/2^k) > eta^k V(R); 0 = never
    persists: bool
    anomalous_exponent: float  # n log2(3), the collapse growth bound
    exponent_flag: bool        # profile decays faster than r^(n log2 3)


def doubling_iteration(profile, eta):
    """Iterated halving V(R/2^k) <= eta^k V(R) until the chain breaks.

    Noncollapsed grids break at k = 1; a profile that sustains the chain
    to the resolution floor is flagged against the r^(n log2 3) bound.
    """
    radii, vols = np.asarray(profile.radii, float), np.asarray(profile.volumes, float)
    order = np.argsort(radii)
    radii, vols = radii[order], vols[order]
    R, VR = float(radii[-1]), float(vols[-1])
    n = profile.dim
    bound = n * math.log2(3.0)
    k, break_k = 1, 0
    while True:
        rk = R / 2**k
        if rk < radii[0]:
            break
        vk = float(np.interp(rk, radii, vols))
        if vk > eta**k * VR:
            break_k = k
            break
        k += 1
    persists = break_k == 0
    flag = False
    if persists and radii[0] > 0 and vols[0] > 0:
        # measured decay exponent across the full dyadic range
        expo = math.log(VR / vols[0]) / math.log(R / radii[0])
        flag = expo > bound
    return DoublingReport(eta=eta, break_k=break_k, persists=persists,
                          anomalous_exponent=bound, exponent_flag=flag)


def synthetic_profile(exponent, R=1.0, n=2, num=64):
    """Power-law volume data V(r) = r^exponent for collapse tests."""
    radii = R * np.geomspace(2.0**-10, 1.0, num)
    vols = radii**exponent
    areas = exponent * radii ** (exponent - 1)
    return VolumeProfile(radii=radii, volumes=vols, areas=areas,
                         base=None, dim=n, clamped=False)


def diameter_bound(v0, kappa):
    """2 (floor(V0 / kappa) + 1), the packing bound on the diameter."""
    if kappa <= 0 or v0 <= 0:
        raise DomainError("need V0 > 0 and kappa > 0")
    return 2.0 * (math.floor(v0 / kappa) + 1.0)
