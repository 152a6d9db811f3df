"""Pointwise differential inequalities for fundamental solutions.

Two defect fields for a positive heat kernel u = e^{-f} / (4 pi t)^{n/2}:

    liyau_defect  =  t (2 lap f) - n                      (gradient estimate)
    sharp_defect  =  t (2 lap f - |grad f|^2) + f - n     (pointwise entropy)

Both are nonpositive in the continuum on nonnegative-Ricci grids; neither
form dominates the other, and a single sphere kernel exhibits both
orderings. Also here: the small-time distance asymptotics
-4 t log H -> r^2 and the Laplacian comparison field lap(r^2) <= 2n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import entropy, geometry, heat
from .geometry import distance_field, hessian_quadratic, integrate, laplace_beltrami


def liyau_defect(state):
    """t (2 lap f) - n, with lap f applied to the f field directly.

    For near-Gaussian kernels f is close to quadratic, which the centered
    operator differentiates exactly; routing through u instead would pick
    up a one-signed |grad f|^4 h^2 error that can cross zero.
    """
    lap_f = laplace_beltrami(state.grid, entropy.f_of(state))
    return 2.0 * state.t * lap_f - state.grid.dim


def sharp_defect(state):
    """Pointwise entropy field with tau = t; equals entropy.pointwise_w."""
    if state.tau0 == 0.0:
        return entropy.pointwise_w(state)
    at_t = heat.HeatState(state.grid, state.u, state.t, 0.0)
    return entropy.pointwise_w(at_t)


def cut_locus_mask(grid, base, band_width=None):
    """Nodes farther than a band (default 4h) from the cut locus.

    Distance-squared fields are not smooth at the cut locus; comparison
    checks exclude a band of width 4h around it where discrete Laplacians
    spike.
    """
    r = distance_field(grid, base)
    band = 4.0 * grid.spacing[0] if band_width is None else band_width
    cut = _cut_distance(grid)
    if cut is None:
        return np.ones(grid.num_nodes, dtype=bool)
    return r <= cut - band


def _cut_distance(grid):
    if grid.kind == "circle":
        return grid.axes[0].length / 2.0
    if grid.kind == "flat_torus":
        return min(ax.length for ax in grid.axes) / 2.0
    if grid.kind == "warped_surface" and grid.axes[0].pole_end:
        return grid.axes[0].length
    return None  # convex flat domains have no cut locus


@dataclass(frozen=True)
class VaradhanRow:
    t: float
    max_error: float
    at_r: float


def varadhan_profile(oracle, grid, base, t_list):
    """-4 t log H against r^2 over a decreasing t list.

    Returns one row per t with the max of |-4 t log H - r^2| over the
    fixed interior region (cut locus band of width 4h excluded); the
    reported max is expected to decrease along the list.
    """
    t_list = list(t_list)
    if any(b >= a for a, b in zip(t_list, t_list[1:])):
        raise ValueError("t_list must be strictly decreasing")
    r = distance_field(grid, base)
    region = cut_locus_mask(grid, base)
    r2 = r[region] ** 2
    rows = []
    for t in t_list:
        hval = heat.kernel(oracle, grid, base, t)[region]
        if np.any(hval <= 0):
            raise heat.TruncationError(f"kernel underflow in region at t={t}")
        err = np.abs(-4.0 * t * np.log(hval) - r2)
        k = int(np.argmax(err))
        rows.append(VaradhanRow(t=t, max_error=float(err[k]), at_r=float(np.sqrt(r2[k]))))
    return rows


def laplacian_comparison(grid, base):
    """The field lap(r^2); at most 2n away from the cut locus when the
    curvature is nonnegative (2n exactly on flat grids)."""
    r = distance_field(grid, base)
    return laplace_beltrami(grid, r**2)


@dataclass(frozen=True)
class RigidityRow:
    t: float
    hessian_sup: float   # sup sqrt(|Hess f - g/(2t)|^2) over the core
    trace_sup: float     # sup |2 t lap f - n| over the core


def rigidity_diagnostic(states, core_rel=0.4):
    """Sup norms of the equality-case tensors along a trajectory.

    Both vanish to O(h^2) only on flat grids; on curved grids the Hessian
    defect has a resolution-independent floor, which makes the pair a
    numerical detector of the Euclidean case.
    """
    rows = []
    for s in states:
        mask = entropy.core_mask(s, core_rel)
        f = entropy.f_of(s)
        hq = hessian_quadratic(s.grid, f, s.t)
        tr = liyau_defect(s)
        rows.append(RigidityRow(
            t=s.t,
            hessian_sup=float(np.sqrt(np.max(hq[mask]))),
            trace_sup=float(np.max(np.abs(tr[mask]))),
        ))
    return rows


def defect_tolerance(grid, t, coeff=2.0):
    """Frozen defect tolerance C (h^2 / t + oracle tail), calibrated once
    on the circle against the theta oracle."""
    h = grid.spacing[0]
    return coeff * (h**2 / t) + 1e-10
