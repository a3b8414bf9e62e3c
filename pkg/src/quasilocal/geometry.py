"""Geometry of spacelike 2-surfaces embedded in an ambient spacetime.

A surface is a radial graph over the unit sphere in slice coordinates,

    y(theta, phi) = center + R(theta, phi) * Q @ nhat(theta, phi),

with R stored as spherical-harmonic coefficients so that first and second
parameter derivatives are available in closed form. The optional rotation Q
reparametrizes the same geometric surface, which the test suite uses to
check parametrization invariance of integrated quantities.

From the ambient metric g and its analytic first derivatives the module
computes the induced metric sigma_ab, the expansions (k, p) of the mean
curvature vector h = -k v + p u along an orthonormal normal frame (u, v),
the norm |H| = sqrt(k^2 - p^2), and the normal-bundle connection one-form

    alpha_a = (k^2 - p^2)^{-1} h^nu (nabla_a j_nu),   j = k u - p v.

Everything except the tangential derivative of j inside alpha is evaluated
pointwise from closed-form data; that one derivative is spectral.

Sign conventions: v is the outward normal (right-handed (theta, phi)
orientation), u is future timelike, and k = -<h, v>, p = -<h, u> so that a
round sphere of radius r in a flat slice has k = 2/r > 0.
"""

from dataclasses import dataclass, replace

import numpy as np

from .calculus import inverse_metric, metric_integrate
from .errors import CausalCharacterError, DegenerateMetricError
from .grid import SphereGrid
from .spacetimes import SpacetimeAdapter

__all__ = [
    "RadialGraphSurface",
    "coordinate_sphere",
    "shaped_sphere",
    "SurfaceGeometry",
    "NormalFrame",
    "induced_data",
    "frame_gauge_invariance_check",
]


def _unit_sphere_jets(grid):
    """nhat and its theta/phi derivatives up to second order, shape (3, nt, np)."""
    st, ct = grid.sin_theta[:, None], grid.cos_theta[:, None]
    cp, sp = np.cos(grid.phi)[None, :], np.sin(grid.phi)[None, :]
    zero = np.zeros(grid.shape)
    n = np.stack([st * cp + zero, st * sp + zero, ct + zero])
    nt = np.stack([ct * cp + zero, ct * sp + zero, -st + zero])
    nph = np.stack([-st * sp + zero, st * cp + zero, zero])
    ntp = np.stack([-ct * sp + zero, ct * cp + zero, zero])
    npp = np.stack([-st * cp + zero, -st * sp + zero, zero])
    return n, nt, nph, -n, ntp, npp


@dataclass(frozen=True)
class RadialGraphSurface:
    """Radial graph y = center + R(theta, phi) Q nhat in slice coordinates."""

    grid: SphereGrid
    coeffs: np.ndarray
    center: np.ndarray
    rotation: np.ndarray

    def chart(self):
        """Return (y, dy, ddy): position, first and packed second derivatives.

        Shapes (3, nt, np), (2, 3, nt, np), (3, 3, nt, np); the leading axis
        of ddy packs (theta theta, theta phi, phi phi).
        """
        g = self.grid
        R = g.synthesize(self.coeffs)
        Rt, Rp = g.synth_grad(self.coeffs)
        Rtt, Rtp, Rpp = g.synth_second(self.coeffs)
        jets = _unit_sphere_jets(g)
        n, nt, nph, ntt, ntp, npp = (
            np.einsum("ij,j...->i...", self.rotation, a) for a in jets
        )
        y = self.center[:, None, None] + R * n
        dy = np.stack([Rt * n + R * nt, Rp * n + R * nph])
        ddy = np.stack(
            [
                Rtt * n + 2.0 * Rt * nt + R * ntt,
                Rtp * n + Rt * nph + Rp * nt + R * ntp,
                Rpp * n + 2.0 * Rp * nph + R * npp,
            ]
        )
        return y, dy, ddy

    def refine(self, grid: SphereGrid) -> "RadialGraphSurface":
        """Same surface represented on a finer grid (coefficients padded)."""
        if grid.lmax < self.grid.lmax:
            raise ValueError("refine target must not reduce the band limit")
        c = np.zeros(grid.ncoef)
        c[: self.grid.ncoef] = self.coeffs
        return replace(self, grid=grid, coeffs=c)


def shaped_sphere(grid, radius, shape_fn=None, center=(0.0, 0.0, 0.0), rotation=None):
    """Surface r = radius * (1 + shape_fn(m)) over directions m = Q nhat."""
    Q = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
    n = _unit_sphere_jets(grid)[0]
    m = np.einsum("ij,j...->i...", Q, n)
    vals = np.full(grid.shape, float(radius))
    if shape_fn is not None:
        vals = radius * (1.0 + shape_fn(m))
    return RadialGraphSurface(grid, grid.analyze(vals), np.asarray(center, float), Q)


def coordinate_sphere(grid, radius, center=(0.0, 0.0, 0.0)):
    return shaped_sphere(grid, radius, None, center)


@dataclass(frozen=True)
class SurfaceGeometry:
    """Surface data: induced metric, mean-curvature norm, normal connection."""

    grid: SphereGrid
    sigma: np.ndarray  # (3, nt, np) packed (tt, tp, pp)
    normH: np.ndarray  # (nt, np), |H| = sqrt(k^2 - p^2)
    alphaH: np.ndarray  # (2, nt, np) one-form components
    k_scalar: np.ndarray
    p_scalar: np.ndarray

    def integrate(self, f) -> float:
        return metric_integrate(self.grid, f, self.sigma)

    @property
    def area(self) -> float:
        return self.integrate(np.ones(self.grid.shape))


@dataclass(frozen=True)
class NormalFrame:
    """Orthonormal normal frame and tangents along the surface."""

    u: np.ndarray  # (4, nt, np) future timelike unit normal
    v: np.ndarray  # (4, nt, np) outward spacelike unit normal
    tangents: np.ndarray  # (2, 4, nt, np) coordinate tangent vectors
    metric: np.ndarray  # (4, 4, nt, np) ambient metric at the nodes


def _inv_square(g):
    gm = np.moveaxis(np.moveaxis(g, 0, -1), 0, -1)
    return np.moveaxis(np.moveaxis(np.linalg.inv(gm), -1, 0), -1, 0)


def ambient_christoffels(g, ginv, dg):
    """Gamma^mu_{nu lam} from the metric and its coordinate derivatives."""
    return 0.5 * (
        np.einsum("mr...,nrl...->mnl...", ginv, dg)
        + np.einsum("mr...,lrn...->mnl...", ginv, dg)
        - np.einsum("mr...,rnl...->mnl...", ginv, dg)
    )


def _dot(g, a, b):
    return np.einsum("mn...,m...,n...->...", g, a, b)


def induced_data(spacetime: SpacetimeAdapter, surface, frame_boost=None):
    """Surface data and normal frame for a parametrized surface.

    ``surface`` provides ``grid`` and ``chart() -> (y, dy, ddy)`` in slice
    coordinates. ``frame_boost`` applies a normal-bundle boost of the given
    rapidity to the frame before the expansions are formed; all reported
    quantities are invariant under it up to round-off, which
    frame_gauge_invariance_check exploits.
    """
    grid = surface.grid
    y, dy, ddy = surface.chart()
    x = spacetime.slice_point(y)
    J = spacetime.slice_jacobian
    dx = np.einsum("mi,ai...->am...", J, dy)
    ddx = np.einsum("mi,pi...->pm...", J, ddy)

    g = spacetime.metric(x)
    dg = spacetime.dmetric(x)
    ginv = _inv_square(g)
    gamma = ambient_christoffels(g, ginv, dg)

    g3 = np.einsum("mi,nj,mn...->ij...", J, J, g)
    tang = np.einsum("ij...,ai...,bj...->ab...", g3, dy, dy)
    sigma = np.stack([tang[0, 0], tang[0, 1], tang[1, 1]])
    det = sigma[0] * sigma[2] - sigma[1] ** 2
    if np.min(det) <= 0.0 or np.min(sigma[0]) <= 0.0:
        raise DegenerateMetricError("degenerate induced metric on the surface")
    siginv = inverse_metric(sigma)

    # future unit normal of the slice: annihilates the pushed-forward tangents
    m_cov = np.linalg.svd(J.T)[2][-1]
    u = -np.einsum("mn...,n->m...", ginv, m_cov)
    norm2 = _dot(g, u, u)
    if not np.all(norm2 < 0.0):
        raise CausalCharacterError("slice normal is not timelike")
    u = u / np.sqrt(-norm2)
    if np.mean(u[0]) < 0.0:
        u = -u

    # outward in-slice normal via the right-handed (theta, phi) orientation
    c_cov = np.cross(dy[0], dy[1], axis=0)
    v3 = np.einsum("ij...,j...->i...", _inv_square(g3), c_cov)
    v = np.einsum("mi,i...->m...", J, v3)
    v = v / np.sqrt(np.einsum("i...,i...->...", c_cov, v3))

    if frame_boost is not None:
        ch, sh = np.cosh(frame_boost), np.sinh(frame_boost)
        u, v = ch * u + sh * v, sh * u + ch * v

    # trace of the second fundamental form, contracted pointwise: the
    # tangential part of sigma^{ab} nabla_a d_b x never enters because it is
    # orthogonal to u and v
    second = ddx + np.einsum("mnl...,pn...,pl...->pm...", gamma, _pair_left(dx), _pair_right(dx))
    A = (
        siginv[0] * second[0]
        + 2.0 * siginv[1] * second[1]
        + siginv[2] * second[2]
    )
    k = -_dot(g, A, v)
    p = -_dot(g, A, u)
    H2 = k * k - p * p
    if np.min(H2) <= 0.0:
        raise CausalCharacterError("mean curvature vector is not spacelike")
    normH = np.sqrt(H2)

    h_vec = -k * v + p * u
    j_vec = k * u - p * v
    j_low = np.einsum("mn...,n...->m...", g, j_vec)
    dj = np.stack([np.stack(grid.gradient_of(j_low[nu])) for nu in range(4)], axis=1)
    cov = dj - np.einsum("rnl...,al...,r...->an...", gamma, dx, j_low)
    alphaH = np.einsum("n...,an...->a...", h_vec, cov) / H2

    geo = SurfaceGeometry(grid, sigma, normH, alphaH, k, p)
    return geo, NormalFrame(u, v, dx, g)


def _pair_left(dx):
    return np.stack([dx[0], dx[0], dx[1]])


def _pair_right(dx):
    return np.stack([dx[0], dx[1], dx[1]])


def frame_gauge_invariance_check(spacetime, surface, rapidity) -> float:
    """Sup-norm change of (|H|, alpha_H) under a normal-frame boost."""
    base, _ = induced_data(spacetime, surface)
    boosted, _ = induced_data(spacetime, surface, frame_boost=rapidity)
    return max(
        float(np.max(np.abs(base.normH - boosted.normH))),
        float(np.max(np.abs(base.alphaH - boosted.alphaH))),
    )
