"""Model manifolds with exact metric data on structured grids.

Five grid families, all with closed-form metric, curvature and Christoffel
data so that every discretization error is attributable to derivatives of
fields rather than to the geometry itself:

* ``circle(length)``           periodic interval, n = 1, flat
* ``flat_torus(l1, l2)``       doubly periodic rectangle, n = 2, flat
* ``euclidean_box(sides)``     Neumann rectangle (or interval), flat
* ``euclidean_disc(radius)``   polar disc, Neumann rim, flat
* ``warped_surface(profile)``  metric dr^2 + phi(r)^2 dtheta^2; phi = sin r
                               with r_max = pi is the round 2-sphere

Discrete design. Nodes are cell centers; ``node_volumes`` are exact cell
volumes (for warped grids the cell integral of phi). The Laplacian is the
divergence-form (finite-volume) operator with edge coefficients
c_e = face_area / edge_length, and ``gradient_sq`` splits each edge term
half-and-half onto its endpoint nodes. With these choices the discrete
Green identity

    sum_i w_i (lap f)_i g_i  ==  - sum_e c_e (df)_e (dg)_e

holds to machine precision on every grid (boundary and pole faces carry
zero coefficient), while both operators stay second-order accurate on
smooth fields.

Radial axes with a pole are staggered (first node at h/2) and ghost values
across the pole are the diametrically opposite ring, which enforces the
correct even/odd parity for every angular mode at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad


class GridError(ValueError):
    """Base class for grid construction and usage errors."""


class InvalidMetric(GridError):
    """Warp profile is non-positive somewhere on the open interval."""


class PoleMismatch(GridError):
    """A declared pole violates phi(0) = 0, phi'(0) = 1."""


class UnsupportedBase(GridError):
    """distance_field does not support this base point on this grid."""


class InvalidTau(GridError):
    """A scale parameter tau must be positive."""


@dataclass(frozen=True)
class WarpProfile:
    """Closed-form warp function phi with derivatives and antiderivative."""

    name: str
    phi: Callable
    dphi: Callable
    d2phi: Callable
    phi_antiderivative: Callable | None = None


SPHERE_PROFILE = WarpProfile(
    "sin", np.sin, np.cos, lambda r: -np.sin(r), lambda r: -np.cos(r)
)
FLAT_PROFILE = WarpProfile(
    "identity",
    lambda r: np.asarray(r, dtype=float),
    lambda r: np.ones_like(np.asarray(r, dtype=float)),
    lambda r: np.zeros_like(np.asarray(r, dtype=float)),
    lambda r: np.asarray(r, dtype=float) ** 2 / 2.0,
)

_PROFILES = {"sin": SPHERE_PROFILE, "identity": FLAT_PROFILE}


@dataclass(frozen=True)
class Axis:
    """One grid axis: 'periodic', 'neumann', or 'radial'."""

    kind: str
    n: int
    h: float
    coords: np.ndarray
    length: float
    pole_start: bool = False
    pole_end: bool = False


@dataclass(frozen=True)
class BoundarySegment:
    """Boundary nodes of one face with area weights and curvature II."""

    name: str
    nodes: np.ndarray       # flat node indices of the adjacent cell row
    area_weights: np.ndarray
    second_fundamental: np.ndarray  # II value per boundary node


@dataclass
class ScalarField:
    """A per-node array of finite real values tied to a grid.

    Operations in this package take and return plain numpy arrays of
    shape ``(grid.num_nodes,)``; this container validates one at an API
    boundary (CLI output, state construction).
    """

    grid: "ManifoldGrid"
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.num_nodes,):
            raise GridError(
                f"field has shape {self.values.shape}, grid has "
                f"{self.grid.num_nodes} nodes"
            )
        if not np.all(np.isfinite(self.values)):
            raise GridError("field contains non-finite entries")


class ManifoldGrid:
    """Immutable structured grid with exact metric data.

    Construct through :func:`circle`, :func:`flat_torus`,
    :func:`euclidean_box`, :func:`euclidean_disc`,
    :func:`warped_surface` or :func:`build_grid`. Grids are safe to share
    across threads; all operations are pure functions of (grid, field).
    """

    def __init__(self, kind, axes, profile=None):
        for ax in axes:
            if ax.n < 8:
                raise GridError(f"resolution {ax.n} < 8 on axis of kind {ax.kind}")
        self.kind = kind
        self.axes = tuple(axes)
        self.dim = len(axes)
        self.shape = tuple(ax.n for ax in axes)
        self.num_nodes = int(np.prod(self.shape))
        self.spacing = tuple(ax.h for ax in axes)
        self.profile = profile

        self._build_metric()
        self._build_boundary()
        self._weighted_laplacian = self._assemble_weighted_laplacian()

    # -- construction helpers -------------------------------------------

    def _build_metric(self):
        if self.kind == "warped_surface":
            rax, tax = self.axes
            prof = self.profile
            r = rax.coords
            rc = np.concatenate(([r[0] - rax.h / 2], r + rax.h / 2))  # cell faces
            if prof.phi_antiderivative is not None:
                cell = prof.phi_antiderivative(rc[1:]) - prof.phi_antiderivative(rc[:-1])
            else:
                cell = np.array(
                    [quad(prof.phi, a, b, epsabs=1e-14, epsrel=1e-13)[0]
                     for a, b in zip(rc[:-1], rc[1:])]
                )
            phi_nodes = np.asarray(prof.phi(r), dtype=float)
            if np.any(phi_nodes <= 0) or np.any(cell <= 0):
                raise InvalidMetric("warp profile must be positive on the open interval")
            self.phi_nodes = phi_nodes
            self.dphi_nodes = np.asarray(prof.dphi(r), dtype=float)
            self.d2phi_nodes = np.asarray(prof.d2phi(r), dtype=float)
            w2 = cell[:, None] * tax.h * np.ones((1, tax.n))
            self.node_volumes = w2.reshape(-1)
            kgauss = -self.d2phi_nodes / phi_nodes
            self.gauss_curvature = np.repeat(kgauss, tax.n)

            # edge coefficients: radial faces sit at cell interfaces,
            # angular faces pass through the node radius
            phi_face = np.asarray(prof.phi(r + rax.h / 2), dtype=float)
            cr = phi_face * tax.h / rax.h
            if rax.pole_end:
                cr[-1] = 0.0     # zero-area face at the far pole
            else:
                cr[-1] = 0.0     # Neumann rim: no boundary edge
            cplus_r = np.repeat(cr, tax.n).reshape(self.shape).reshape(-1)
            ct = (rax.h / (phi_nodes * tax.h))[:, None] * np.ones((1, tax.n))
            self.cplus = (cplus_r, ct.reshape(-1))
        else:
            w = 1.0
            for ax in self.axes:
                w *= ax.h
            self.node_volumes = np.full(self.num_nodes, w)
            self.gauss_curvature = np.zeros(self.num_nodes)
            cplus = []
            for i, ax in enumerate(self.axes):
                perp = w / ax.h
                c = np.full(self.shape, perp / ax.h)
                if ax.kind == "neumann":
                    sl = [slice(None)] * self.dim
                    sl[i] = -1
                    c[tuple(sl)] = 0.0
                cplus.append(c.reshape(-1))
            self.cplus = tuple(cplus)

        self.closed = all(
            ax.kind == "periodic" or (ax.kind == "radial" and ax.pole_start and ax.pole_end)
            for ax in self.axes
        )
        self.nonneg_curvature = bool(np.all(self.gauss_curvature >= -1e-13))
        self.total_volume = float(np.sum(self.node_volumes))

    def _build_boundary(self):
        segs = []
        if self.kind == "warped_surface":
            rax, tax = self.axes
            if not rax.pole_end:
                ring = np.arange(tax.n) + (rax.n - 1) * tax.n
                rmax = rax.length
                phi_b = float(self.profile.phi(rmax))
                ii = float(self.profile.dphi(rmax)) / phi_b
                segs.append(BoundarySegment(
                    "rim", ring, np.full(tax.n, phi_b * tax.h), np.full(tax.n, ii)))
        elif self.kind == "euclidean_box":
            idx = np.arange(self.num_nodes).reshape(self.shape)
            for i, ax in enumerate(self.axes):
                perp = self.node_volumes[0] / ax.h
                for side, pos in (("lo", 0), ("hi", -1)):
                    sl = [slice(None)] * self.dim
                    sl[i] = pos
                    nodes = idx[tuple(sl)].reshape(-1)
                    segs.append(BoundarySegment(
                        f"axis{i}_{side}", nodes,
                        np.full(nodes.size, perp),
                        np.zeros(nodes.size)))
        self.boundary = tuple(segs)

    def _assemble_weighted_laplacian(self):
        """Symmetric matrix M with (lap f) = M f / node_volumes."""
        n = self.num_nodes
        idx = np.arange(n).reshape(self.shape)
        rows, cols, vals = [], [], []
        for axis in range(self.dim):
            c = self.cplus[axis]
            nb = np.roll(idx, -1, axis=axis).reshape(-1)
            here = idx.reshape(-1)
            m = c != 0.0
            rows.extend([here[m], nb[m], here[m], nb[m]])
            cols.extend([nb[m], here[m], here[m], nb[m]])
            vals.extend([c[m], c[m], -c[m], -c[m]])
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        return sp.csr_matrix(sp.coo_matrix((vals, (rows, cols)), shape=(n, n)))

    # -- shifting with ghost values --------------------------------------

    def _as_nd(self, values):
        return np.asarray(values).reshape(self.shape)

    def shift(self, values_nd, axis, direction):
        """Neighbor values one node over, ghost-aware.

        direction +1 returns f at the +axis neighbor of each node.
        Periodic axes wrap; Neumann boundaries mirror (ghost = edge value);
        pole ends return the diametrically opposite ring.
        """
        ax = self.axes[axis]
        out = np.roll(values_nd, -direction, axis=axis)
        if ax.kind == "periodic":
            return out
        sl_edge = [slice(None)] * self.dim
        sl_ghost = [slice(None)] * self.dim
        if direction == +1:
            sl_edge[axis] = -1
            sl_ghost[axis] = -1
        else:
            sl_edge[axis] = 0
            sl_ghost[axis] = 0
        edge = tuple(sl_edge)
        pole = (direction == +1 and ax.pole_end) or (direction == -1 and ax.pole_start)
        if ax.kind == "radial" and pole:
            tax_len = self.shape[1]
            ghost = np.roll(values_nd[edge], tax_len // 2, axis=-1)
        else:
            ghost = values_nd[edge]  # Neumann mirror about the cell face
        out[tuple(sl_ghost)] = ghost
        return out

    def __repr__(self):
        return f"ManifoldGrid({self.kind}, shape={self.shape})"


# -- constructors ---------------------------------------------------------

def circle(length=2 * math.pi, n=256):
    h = length / n
    coords = (np.arange(n) + 0.0) * h
    return ManifoldGrid("circle", [Axis("periodic", n, h, coords, length)])


def flat_torus(l1=2 * math.pi, l2=2 * math.pi, n1=64, n2=64):
    h1, h2 = l1 / n1, l2 / n2
    return ManifoldGrid("flat_torus", [
        Axis("periodic", n1, h1, np.arange(n1) * h1, l1),
        Axis("periodic", n2, h2, np.arange(n2) * h2, l2),
    ])


def euclidean_box(sides, ns):
    """Neumann box; cell-centered nodes. sides/ns are per-axis tuples."""
    sides = tuple(float(s) for s in np.atleast_1d(sides))
    ns = tuple(int(n) for n in np.atleast_1d(ns))
    if len(sides) != len(ns):
        raise GridError("sides and ns must have equal length")
    axes = [
        Axis("neumann", n, s / n, (np.arange(n) + 0.5) * (s / n), s)
        for s, n in zip(sides, ns)
    ]
    return ManifoldGrid("euclidean_box", axes)


def warped_surface(profile, r_max, nr=64, ntheta=64, pole_start=True,
                   pole_end=None, kind="warped_surface"):
    if isinstance(profile, str):
        profile = _PROFILES[profile]
    if ntheta % 2 != 0:
        raise GridError("ntheta must be even (diametric pole ghosts)")
    hr = r_max / nr
    htheta = 2 * math.pi / ntheta
    r = (np.arange(nr) + 0.5) * hr
    if pole_end is None:
        pole_end = abs(float(profile.phi(r_max))) < 1e-12
    if pole_start:
        p0 = float(profile.phi(1e-9))
        dp0 = float(profile.dphi(0.0))
        if abs(p0) > 1e-7 or abs(dp0 - 1.0) > 1e-8:
            raise PoleMismatch("pole requires phi(0) = 0 and phi'(0) = 1")
    else:
        raise GridError("warped surfaces without a pole at r = 0 are not modeled")
    rax = Axis("radial", nr, hr, r, r_max, pole_start=pole_start, pole_end=pole_end)
    tax = Axis("periodic", ntheta, htheta, np.arange(ntheta) * htheta, 2 * math.pi)
    return ManifoldGrid(kind, [rax, tax], profile=profile)


def euclidean_disc(radius=1.0, nr=64, ntheta=64):
    return warped_surface(FLAT_PROFILE, radius, nr, ntheta, kind="warped_surface")


def round_sphere(nr=128, ntheta=16):
    """Unit round 2-sphere as a warped surface with phi = sin r."""
    return warped_surface(SPHERE_PROFILE, math.pi, nr, ntheta)


def build_grid(descriptor):
    """Build a grid from a flat descriptor dict (CLI manifold section)."""
    d = dict(descriptor)
    kind = d.pop("kind")
    if kind == "circle":
        return circle(d.pop("length", 2 * math.pi), int(d.pop("n1", 256)))
    if kind == "flat_torus":
        return flat_torus(d.pop("l1", 2 * math.pi), d.pop("l2", 2 * math.pi),
                          int(d.pop("n1", 64)), int(d.pop("n2", 64)))
    if kind == "euclidean_box":
        side = d.pop("length", 1.0)
        sides = (d.pop("l1", side), d.pop("l2", side))
        n = int(d.pop("n1", 64))
        ns = (n, int(d.pop("n2", n)))
        return euclidean_box(sides, ns)
    if kind == "euclidean_disc":
        return euclidean_disc(d.pop("radius", 1.0), int(d.pop("n1", 64)),
                              int(d.pop("n2", 64)))
    if kind == "sphere":
        return round_sphere(int(d.pop("n1", 128)), int(d.pop("n2", 16)))
    if kind == "warped_surface":
        return warped_surface(d.pop("profile", "sin"), d.pop("r_max", math.pi),
                              int(d.pop("n1", 128)), int(d.pop("n2", 16)))
    raise GridError(f"unknown manifold kind {kind!r}")


# -- first-order operators (edge form, exact Green identity) --------------

def laplace_beltrami(grid, field):
    """Divergence-form Laplacian; symmetric and negative-semidefinite in
    the node-volume inner product, and exact partner of gradient_inner."""
    f = grid._as_nd(field)
    acc = np.zeros_like(f)
    for axis in range(grid.dim):
        c = grid.cplus[axis].reshape(grid.shape)
        g = c * (np.roll(f, -1, axis=axis) - f)
        acc += g - np.roll(g, 1, axis=axis)
    return (acc / grid.node_volumes.reshape(grid.shape)).reshape(-1)


def gradient_inner(grid, a, b):
    """Nodal <grad a, grad b>, edge contributions split half per endpoint.

    Integrating this field against node_volumes reproduces the edge sum
    sum_e c_e (da)_e (db)_e exactly, so the Green identity with
    laplace_beltrami is an identity in floating point.
    """
    fa = grid._as_nd(a)
    fb = grid._as_nd(b)
    acc = np.zeros_like(fa)
    for axis in range(grid.dim):
        c = grid.cplus[axis].reshape(grid.shape)
        g = c * (np.roll(fa, -1, axis=axis) - fa) * (np.roll(fb, -1, axis=axis) - fb)
        acc += g + np.roll(g, 1, axis=axis)
    return (0.5 * acc / grid.node_volumes.reshape(grid.shape)).reshape(-1)


def gradient_sq(grid, field):
    """|grad f|^2 as a nodal field; nonnegative by construction.

    Boundary nodes see only their interior edges (half weight), so a unit
    slope reads 1 at interior nodes and 1/2 on the outermost Neumann row.
    """
    return gradient_inner(grid, field, field)


def integrate(grid, field):
    """Node-weighted quadrature; exact for grid-constant fields."""
    return float(np.dot(np.asarray(field, dtype=float), grid.node_volumes))


# -- second-order operators (centered differences with ghosts) ------------

def _derivatives(grid, field):
    """Centered first/second/mixed coordinate derivatives, ghost-aware."""
    f = grid._as_nd(np.asarray(field, dtype=float))
    d = {}
    for axis in range(grid.dim):
        h = grid.spacing[axis]
        fp = grid.shift(f, axis, +1)
        fm = grid.shift(f, axis, -1)
        d[(axis,)] = (fp - fm) / (2 * h)
        d[(axis, axis)] = (fp - 2 * f + fm) / h**2
    if grid.dim == 2:
        h0, h1 = grid.spacing
        fpp = grid.shift(grid.shift(f, 0, +1), 1, +1)
        fpm = grid.shift(grid.shift(f, 0, +1), 1, -1)
        fmp = grid.shift(grid.shift(f, 0, -1), 1, +1)
        fmm = grid.shift(grid.shift(f, 0, -1), 1, -1)
        d[(0, 1)] = (fpp - fpm - fmp + fmm) / (4 * h0 * h1)
    return d


def hessian_components(grid, field):
    """Covariant Hessian components in coordinate frame, as nd arrays.

    Returns (A_rr, A_rt, A_tt) on warped grids (theta index second),
    (A_xx, A_xy, A_yy) on flat 2-d grids, (A_xx,) in 1-d.
    """
    d = _derivatives(grid, field)
    if grid.dim == 1:
        return (d[(0, 0)],)
    a00 = d[(0, 0)]
    a01 = d[(0, 1)]
    a11 = d[(1, 1)]
    if grid.kind == "warped_surface":
        # Christoffels of dr^2 + phi^2 dtheta^2:
        #   G^r_tt = -phi phi',  G^t_rt = phi'/phi
        phi = grid.phi_nodes[:, None]
        dphi = grid.dphi_nodes[:, None]
        a01 = a01 - (dphi / phi) * d[(1,)]
        a11 = a11 + phi * dphi * d[(0,)]
    return (a00, a01, a11)


def hessian_quadratic(grid, field, tau):
    """Pointwise squared tensor norm |Hess f - g/(2 tau)|^2."""
    if tau is not None and tau <= 0:
        raise InvalidTau(f"tau must be positive, got {tau}")
    comps = hessian_components(grid, field)
    shift = 0.0 if tau is None else 1.0 / (2.0 * tau)
    if grid.dim == 1:
        return ((comps[0] - shift) ** 2).reshape(-1)
    a00, a01, a11 = comps
    if grid.kind == "warped_surface":
        phi2 = (grid.phi_nodes**2)[:, None]
        out = (a00 - shift) ** 2 + 2 * a01**2 / phi2 + (a11 - shift * phi2) ** 2 / phi2**2
    else:
        out = (a00 - shift) ** 2 + 2 * a01**2 + (a11 - shift) ** 2
    return out.reshape(-1)


def hessian_norm_sq(grid, field):
    """|Hess f|^2 without the identity shift."""
    return hessian_quadratic(grid, field, None)


def hessian_trace(grid, field):
    """g^{ij} Hess_ij f; agrees with laplace_beltrami to O(h^2)."""
    comps = hessian_components(grid, field)
    if grid.dim == 1:
        return comps[0].reshape(-1)
    a00, _, a11 = comps
    if grid.kind == "warped_surface":
        return (a00 + a11 / (grid.phi_nodes**2)[:, None]).reshape(-1)
    return (a00 + a11).reshape(-1)


def ricci_quadratic(grid, field):
    """Ric(grad f, grad f); K * |grad f|^2 on surfaces, zero when flat."""
    if grid.kind != "warped_surface":
        return np.zeros(grid.num_nodes)
    return grid.gauss_curvature * gradient_sq(grid, field)


# -- distance -------------------------------------------------------------

def node_coordinates(grid):
    """Per-node coordinate columns (1 or 2), shape (num_nodes, dim)."""
    mesh = np.meshgrid(*[ax.coords for ax in grid.axes], indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _axis_distance(coord, base, ax):
    d = np.abs(coord - base)
    if ax.kind == "periodic":
        d = np.minimum(d, ax.length - d)
    return d


def distance_field(grid, base):
    """Geodesic distance from a base node (or 'pole' / 'end_pole').

    Periodic axes take the wraparound minimum; warped surfaces measure
    from a pole by the radial coordinate, and flat warped surfaces
    (the disc) support any base through the planar chord length.
    """
    xyz = node_coordinates(grid)
    if grid.kind == "warped_surface":
        rax = grid.axes[0]
        r = xyz[:, 0]
        th = xyz[:, 1]
        if isinstance(base, str):
            if base == "pole":
                return r.copy()
            if base == "end_pole":
                if not rax.pole_end:
                    raise UnsupportedBase("grid has no pole at r = r_max")
                return rax.length - r
            raise UnsupportedBase(f"unknown symbolic base {base!r}")
        if grid.profile.name == "identity":
            rb, tb = xyz[int(base)]
            return np.sqrt(np.maximum(
                r**2 + rb**2 - 2 * r * rb * np.cos(th - tb), 0.0))
        raise UnsupportedBase(
            "curved warped surfaces support only pole bases")
    base_xyz = xyz[int(base)]
    d2 = np.zeros(grid.num_nodes)
    for i, ax in enumerate(grid.axes):
        d2 += _axis_distance(xyz[:, i], base_xyz[i], ax) ** 2
    return np.sqrt(d2)
