"""Tests for induced surface data: closed forms, frame properties, oracles.

The Kerr connection one-form is checked against an independent pointwise
oracle that rebuilds the frame with different linear algebra (Gram-Schmidt
instead of a cross product, inverse-metric column instead of a null space)
and differentiates with fourth-order finite differences instead of the
spectral transform.
"""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from quasilocal import geometry as geo
from quasilocal import spacetimes as st
from quasilocal.errors import CausalCharacterError, DegenerateMetricError
from quasilocal.grid import SphereGrid


def quadrupole(m):
    return 0.1 * (m[2] ** 2 - 1.0 / 3.0) + 0.05 * m[0] * m[1]


def frame_quantities(ad, R, th, ph):
    # pointwise frame data for a coordinate sphere, independent of SphereGrid
    ct, stn = np.cos(th), np.sin(th)
    cp, sp = np.cos(ph), np.sin(ph)
    n = np.array([stn * cp, stn * sp, ct])
    nt = np.array([ct * cp, ct * sp, -stn])
    nph = np.array([-stn * sp, stn * cp, 0.0])
    ntp = np.array([-ct * sp, ct * cp, 0.0])
    npp = np.array([-stn * cp, -stn * sp, 0.0])
    y = R * n
    x = ad.slice_point(y[:, None])[:, 0]
    g = ad.metric(x[:, None])[..., 0]
    dg = ad.dmetric(x[:, None])[..., 0]
    ginv = np.linalg.inv(g)
    gamma = 0.5 * (
        np.einsum("mr,nrl->mnl", ginv, dg)
        + np.einsum("mr,lrn->mnl", ginv, dg)
        - np.einsum("mr,rnl->mnl", ginv, dg)
    )
    J = ad.slice_jacobian
    dy = np.stack([R * nt, R * nph])
    ddy = np.stack([R * (-n), R * ntp, R * npp])
    dx = dy @ J.T
    ddx = ddy @ J.T
    sig = np.array([[dx[a] @ g @ dx[b] for b in (0, 1)] for a in (0, 1)])
    siginv = np.linalg.inv(sig)
    u = -ginv[:, 0] / np.sqrt(-ginv[0, 0])
    if u[0] < 0:
        u = -u
    w = J @ n
    t1 = dx[0] / np.sqrt(dx[0] @ g @ dx[0])
    t2 = dx[1] - (dx[1] @ g @ t1) * t1
    t2 = t2 / np.sqrt(t2 @ g @ t2)
    v = w + (w @ g @ u) * u - (w @ g @ t1) * t1 - (w @ g @ t2) * t2
    v = v / np.sqrt(v @ g @ v)
    pairs = [(0, 0), (0, 1), (1, 1)]
    T = [
        ddx[q] + np.einsum("mnl,n,l->m", gamma, dx[a], dx[b])
        for q, (a, b) in enumerate(pairs)
    ]
    A = siginv[0, 0] * T[0] + 2 * siginv[0, 1] * T[1] + siginv[1, 1] * T[2]
    k = -(A @ g @ v)
    p = -(A @ g @ u)
    j = k * u - p * v
    return g @ j, (k, p, u, v, gamma, dx, g)


def alpha_fd(ad, R, th, ph, h=1e-3):
    j0, (k, p, u, v, gamma, dx, _) = frame_quantities(ad, R, th, ph)
    hv = -k * v + p * u
    out = []
    for axis in range(2):

        def f(s):
            return frame_quantities(ad, R, th + s * (axis == 0), ph + s * (axis == 1))[0]

        dj = (8.0 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12.0 * h)
        cov = dj - np.einsum("rnl,l,r->n", gamma, dx[axis], j0)
        out.append(hv @ cov / (k * k - p * p))
    return np.array(out)


# ---------------------------------------------------------------------------
# closed-form examples
# ---------------------------------------------------------------------------


def test_minkowski_round_sphere():
    G, _ = geo.induced_data(
        st.catalog_get("minkowski"), geo.coordinate_sphere(SphereGrid(16), 3.0)
    )
    assert np.max(np.abs(G.normH - 2.0 / 3.0)) < 1e-10
    assert np.max(np.abs(G.p_scalar)) < 1e-10
    assert np.max(np.abs(G.alphaH)) < 1e-10
    assert abs(G.area - 36.0 * np.pi) < 1e-10


def test_schwarzschild_coordinate_sphere():
    ad = st.catalog_get("schwarzschild-standard", mass=1.0)
    for r in (3.0, 10.0):
        G, _ = geo.induced_data(ad, geo.coordinate_sphere(SphereGrid(16), r))
        expected = (2.0 / r) * np.sqrt(1.0 - 2.0 / r)
        assert np.max(np.abs(G.normH - expected)) < 1e-10
        assert np.max(np.abs(G.alphaH)) < 1e-10
        assert np.max(np.abs(G.p_scalar)) < 1e-10


def test_boosted_slice_sphere_is_round():
    # the tilted hyperplane carries flat induced data, so the coordinate
    # sphere is geometrically round with |H| = 2/r and p = 0
    ad = st.catalog_get("minkowski-boosted-slice", rapidity=0.8)
    G, _ = geo.induced_data(ad, geo.coordinate_sphere(SphereGrid(16), 4.0))
    assert np.max(np.abs(G.normH - 0.5)) < 1e-10
    assert np.max(np.abs(G.p_scalar)) < 1e-12
    assert np.max(np.abs(G.alphaH)) < 1e-12


def test_kerr_alpha_against_fd_oracle():
    ad = st.catalog_get("kerr-bl", mass=1.0, spin=0.5)
    g20 = SphereGrid(20)
    G, _ = geo.induced_data(ad, geo.coordinate_sphere(g20, 10.0))
    assert np.max(np.abs(G.alphaH)) > 1e-3, "Kerr connection form should not vanish"
    for i, j in [(3, 5), (10, 0), (14, 29), (19, 17)]:
        oracle = alpha_fd(ad, 10.0, g20.theta[i], g20.phi[j])
        assert np.max(np.abs(G.alphaH[:, i, j] - oracle)) < 1e-6


# ---------------------------------------------------------------------------
# frame and type invariants
# ---------------------------------------------------------------------------


def test_normal_frame_invariants():
    ad = st.catalog_get("kerr-bl", mass=1.0, spin=0.7)
    s = geo.shaped_sphere(SphereGrid(18), 6.0, quadrupole, center=(0.4, -0.2, 0.1))
    G, F = geo.induced_data(ad, s)
    g = F.metric

    def dot(a, b):
        return np.einsum("mn...,m...,n...->...", g, a, b)

    assert np.max(np.abs(dot(F.u, F.u) + 1.0)) < 1e-10
    assert np.max(np.abs(dot(F.v, F.v) - 1.0)) < 1e-10
    assert np.max(np.abs(dot(F.u, F.v))) < 1e-10
    for a in range(2):
        assert np.max(np.abs(dot(F.u, F.tangents[a]))) < 1e-10
        assert np.max(np.abs(dot(F.v, F.tangents[a]))) < 1e-10
    assert np.all(F.u[0] > 0.0), "u must be future-pointing"

    det = G.sigma[0] * G.sigma[2] - G.sigma[1] ** 2
    assert np.all(det > 0.0) and np.all(G.sigma[0] > 0.0)
    assert np.all(G.normH > 0.0)
    h2 = G.k_scalar**2 - G.p_scalar**2
    assert np.max(np.abs(G.normH**2 - h2)) < 1e-10 * np.max(np.abs(h2))


def test_round_sphere_expansion_sign():
    # outward v and the paper decomposition h = -k v + p u give k = +2/r
    G, _ = geo.induced_data(
        st.catalog_get("minkowski"), geo.coordinate_sphere(SphereGrid(12), 2.0)
    )
    assert np.max(np.abs(G.k_scalar - 1.0)) < 1e-11


def test_static_slice_identities():
    # any surface inside a static t=const slice: p = 0 and alpha_H = 0
    ad = st.catalog_get("schwarzschild-translated", mass=1.0, offset=(2.0, 0.0, -1.0))
    s = geo.shaped_sphere(SphereGrid(20), 6.0, quadrupole, center=(2.0, 0.0, -1.0))
    G, _ = geo.induced_data(ad, s)
    assert np.max(np.abs(G.p_scalar)) < 1e-11
    assert np.max(np.abs(G.alphaH)) < 1e-11


# ---------------------------------------------------------------------------
# gauge and parametrization invariance
# ---------------------------------------------------------------------------


def test_frame_gauge_invariance():
    g16 = SphereGrid(16)
    schw = st.catalog_get("schwarzschild-standard", mass=1.0)
    kerr = st.catalog_get("kerr-bl", mass=1.0, spin=0.5)
    mink = st.catalog_get("minkowski")
    dev = geo.frame_gauge_invariance_check(schw, geo.coordinate_sphere(g16, 10.0), 0.3)
    assert dev < 1e-9
    dev = geo.frame_gauge_invariance_check(mink, geo.coordinate_sphere(g16, 3.0), 1.1)
    assert dev < 1e-13
    dev = geo.frame_gauge_invariance_check(kerr, geo.coordinate_sphere(g16, 5.0), 0.2)
    assert dev < 1e-8


def test_reparametrization_invariance():
    # same geometric surface under a rotated parametrization: integrated
    # scalars are unchanged
    ad = st.catalog_get("kerr-bl", mass=1.0, spin=0.5)
    g20 = SphereGrid(20)
    Q = Rotation.from_rotvec([0.7, -0.3, 0.4]).as_matrix()
    G1, _ = geo.induced_data(ad, geo.shaped_sphere(g20, 7.0, quadrupole))
    G2, _ = geo.induced_data(ad, geo.shaped_sphere(g20, 7.0, quadrupole, rotation=Q))
    assert abs(G1.area - G2.area) < 1e-10 * G1.area
    i1, i2 = G1.integrate(G1.normH), G2.integrate(G2.normH)
    assert abs(i1 - i2) < 1e-10 * abs(i1)


def test_refine_preserves_surface():
    ad = st.catalog_get("kerr-bl", mass=1.0, spin=0.5)
    s = geo.shaped_sphere(SphereGrid(12), 7.0, quadrupole)
    G1, _ = geo.induced_data(ad, s)
    G2, _ = geo.induced_data(ad, s.refine(SphereGrid(20)))
    assert abs(G1.area - G2.area) < 1e-12 * G1.area
    with pytest.raises(ValueError):
        s.refine(SphereGrid(8))


# ---------------------------------------------------------------------------
# error paths
# ---------------------------------------------------------------------------


def test_timelike_mean_curvature_rejected():
    # flat metric sheared by g_{t z} = 5 z: the slice bends strongly enough
    # that a small sphere has |p| > k near the equator
    def toy_metric(x):
        out = np.zeros((4, 4) + x.shape[1:], dtype=x.dtype)
        out[0, 0] = -1.0
        for i in range(1, 4):
            out[i, i] = 1.0
        out[0, 3] = out[3, 0] = 5.0 * x[3]
        return out

    def toy_dmetric(x):
        out = np.zeros((4, 4, 4) + x.shape[1:], dtype=x.dtype)
        out[3, 0, 3] = out[3, 3, 0] = 5.0
        return out

    toy = st.SpacetimeAdapter("toy-shear", {}, toy_metric, toy_dmetric)
    with pytest.raises(CausalCharacterError):
        geo.induced_data(toy, geo.coordinate_sphere(SphereGrid(12), 1.0))


def test_degenerate_chart_rejected():
    class BadSurface:
        def __init__(self, grid):
            self.grid = grid

        def chart(self):
            y, dy, ddy = geo.coordinate_sphere(self.grid, 1.0).chart()
            dy = dy.copy()
            dy[1] = 0.0
            return y, dy, ddy

    with pytest.raises(DegenerateMetricError):
        geo.induced_data(st.catalog_get("minkowski"), BadSurface(SphereGrid(8)))
