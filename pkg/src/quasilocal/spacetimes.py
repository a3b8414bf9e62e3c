"""Catalog of analytic spacetimes with exact metric derivatives.

Each adapter evaluates the metric g_{mu nu} and its coordinate derivative
d_lambda g_{mu nu} in closed form on batched points of shape ``(4, ...)``.
Evaluators accept complex coordinates (they are compositions of rational
functions and square roots), so callers can differentiate any derived
quantity to machine precision with a complex step; ``complex_step`` below
packages that.

Spatial slices: every catalog entry designates a preferred spacelike
slice through ``slice_point``, an affine map from slice coordinates
y in R^3 to spacetime points.  For most entries this is t = 0; the
boosted-slice entry tilts the plane instead of changing the metric,
since a boost is an isometry of flat space.

Initial data (3-metric and extrinsic curvature) comes from the
stationary form of the metric in the adapter's own coordinates:
k_ij = (D_i beta_j + D_j beta_i) / (2 N).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CatalogError

__all__ = [
    "SpacetimeAdapter",
    "InitialDataSlice",
    "catalog_get",
    "catalog_names",
    "make_slice",
    "constraint_residual",
    "complex_step",
    "boost_matrix",
]

_CS_STEP = 1e-150  # complex-step size; first-order term is exact to roundoff

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])


def complex_step(fn: Callable, x: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Directional derivative of ``fn`` at ``x`` via a complex step."""
    xc = x.astype(complex).copy()
    xc += 1j * _CS_STEP * np.asarray(direction).reshape((len(x),) + (1,) * (x.ndim - 1))
    return fn(xc).imag / _CS_STEP


def boost_matrix(rapidity: float, axis: int = 0) -> np.ndarray:
    """Lorentz boost mixing t with the given spatial axis (0 = x)."""
    L = np.eye(4)
    c, s = np.cosh(rapidity), np.sinh(rapidity)
    i = 1 + axis
    L[0, 0] = L[i, i] = c
    L[0, i] = L[i, 0] = s
    return L


@dataclass(frozen=True)
class SpacetimeAdapter:
    """Closed-form spacetime: metric, exact first derivatives, slice map."""

    name: str
    params: dict
    metric: Callable[[np.ndarray], np.ndarray]
    dmetric: Callable[[np.ndarray], np.ndarray]
    slice_jacobian: np.ndarray = field(
        default_factory=lambda: np.eye(4, 3, k=-1)
    )  # d slice_point / d y, constant (maps are affine)
    slice_offset: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def slice_point(self, y: np.ndarray) -> np.ndarray:
        """Map slice coordinates (3, ...) to spacetime points (4, ...)."""
        out = np.tensordot(self.slice_jacobian, y, axes=(1, 0))
        return out + self.slice_offset.reshape((4,) + (1,) * (out.ndim - 1))


# ---------------------------------------------------------------------------
# base metrics
# ---------------------------------------------------------------------------


def _minkowski_metric(x):
    return np.broadcast_to(
        ETA.reshape((4, 4) + (1,) * (x.ndim - 1)), (4, 4) + x.shape[1:]
    ).astype(x.dtype)


def _minkowski_dmetric(x):
    return np.zeros((4, 4, 4) + x.shape[1:], dtype=x.dtype)


def _schwarzschild_standard(m):
    def metric(x):
        r2 = x[1] ** 2 + x[2] ** 2 + x[3] ** 2
        r = np.sqrt(r2)
        if np.any(r.real <= 2.0 * m):
            raise ValueError("point at or inside r = 2m")
        B = 2.0 * m / (r2 * (r - 2.0 * m))
        g = np.zeros((4, 4) + x.shape[1:], dtype=x.dtype)
        g[0, 0] = -(1.0 - 2.0 * m / r)
        for i in range(3):
            for j in range(3):
                g[1 + i, 1 + j] = B * x[1 + i] * x[1 + j]
            g[1 + i, 1 + i] += 1.0
        return g

    def dmetric(x):
        r2 = x[1] ** 2 + x[2] ** 2 + x[3] ** 2
        r = np.sqrt(r2)
        if np.any(r.real <= 2.0 * m):
            raise ValueError("point at or inside r = 2m")
        B = 2.0 * m / (r2 * (r - 2.0 * m))
        dB_dr = -2.0 * m * (3.0 * r - 4.0 * m) / (r2 * r * (r - 2.0 * m) ** 2)
        dg = np.zeros((4, 4, 4) + x.shape[1:], dtype=x.dtype)
        for k in range(3):
            nk = x[1 + k] / r
            dg[1 + k, 0, 0] = -2.0 * m * nk / r2
            for i in range(3):
                for j in range(3):
                    dg[1 + k, 1 + i, 1 + j] = dB_dr * nk * x[1 + i] * x[1 + j]
            for i in range(3):
                dg[1 + k, 1 + i, 1 + k] += B * x[1 + i]
                dg[1 + k, 1 + k, 1 + i] += B * x[1 + i]
        return dg

    return metric, dmetric


def _schwarzschild_isotropic(m):
    def pieces(x):
        rho = np.sqrt(x[1] ** 2 + x[2] ** 2 + x[3] ** 2)
        if np.any(rho.real <= 0.5 * m):
            raise ValueError("point at or inside rho = m/2")
        psi = 1.0 + 0.5 * m / rho
        q = (1.0 - 0.5 * m / rho) / psi
        return rho, psi, q

    def metric(x):
        _, psi, q = pieces(x)
        g = np.zeros((4, 4) + x.shape[1:], dtype=x.dtype)
        g[0, 0] = -(q**2)
        for i in range(3):
            g[1 + i, 1 + i] = psi**4
        return g

    def dmetric(x):
        rho, psi, q = pieces(x)
        dg = np.zeros((4, 4, 4) + x.shape[1:], dtype=x.dtype)
        for k in range(3):
            dpsi = -0.5 * m * x[1 + k] / rho**3
            dq = m * x[1 + k] / (rho**3 * psi**2)
            dg[1 + k, 0, 0] = -2.0 * q * dq
            for i in range(3):
                dg[1 + k, 1 + i, 1 + i] = 4.0 * psi**3 * dpsi
        return dg

    return metric, dmetric


def _kerr_cartesianized(m, a):
    """Kerr in Boyer-Lindquist r, theta, phi read as spherical coordinates.

    Writing x = r n(theta, phi) turns the usual line element into a form
    regular on the rotation axis, with w = (-y, x, 0):

        g_tt = -(1 - 2 m r / P),          P = r^2 + a^2 z^2 / r^2
        g_ti = -(2 m a / (P r)) w_i
        g_ij = (P/r^2) delta_ij + (P/D - P/r^2) x_i x_j / r^2
               + a^2 (1 + 2 m r / P) w_i w_j / r^4,   D = r^2 - 2 m r + a^2
    """
    W = np.zeros((3, 3))  # dw_i / dx_k
    W[0, 1] = -1.0
    W[1, 0] = 1.0

    def pieces(x):
        r2 = x[1] ** 2 + x[2] ** 2 + x[3] ** 2
        r = np.sqrt(r2)
        D = r2 - 2.0 * m * r + a * a
        if np.any(D.real <= 0.0) or np.any(r.real <= 0.0):
            raise ValueError("point at or inside the outer horizon")
        z = x[3]
        P = r2 + a * a * z * z / r2
        w = np.stack([-x[2], x[1], np.zeros_like(x[3])])
        return r, r2, z, D, P, w

    def metric(x):
        r, r2, z, D, P, w = pieces(x)
        g = np.zeros((4, 4) + x.shape[1:], dtype=x.dtype)
        g[0, 0] = -(1.0 - 2.0 * m * r / P)
        s1 = 2.0 * m * a / (P * r)
        u1 = P / r2
        c12 = (P / D - u1) / r2
        u3 = a * a * (1.0 + 2.0 * m * r / P) / r2**2
        for i in range(3):
            g[0, 1 + i] = g[1 + i, 0] = -s1 * w[i]
            for j in range(3):
                g[1 + i, 1 + j] = c12 * x[1 + i] * x[1 + j] + u3 * w[i] * w[j]
            g[1 + i, 1 + i] += u1
        return g

    def dmetric(x):
        r, r2, z, D, P, w = pieces(x)
        dg = np.zeros((4, 4, 4) + x.shape[1:], dtype=x.dtype)
        u1 = P / r2
        c12 = (P / D - u1) / r2
        u3 = a * a * (1.0 + 2.0 * m * r / P) / r2**2
        s1 = 2.0 * m * a / (P * r)
        for k in range(3):
            xk = x[1 + k]
            dr = xk / r
            dP = 2.0 * xk - 2.0 * a * a * z * z * xk / r2**2
            if k == 2:
                dP = dP + 2.0 * a * a * z / r2
            dD = 2.0 * (r - m) * dr
            # d(r/P) and derived coefficient derivatives
            d_r_over_P = (dr * P - r * dP) / P**2
            dg[1 + k, 0, 0] = 2.0 * m * d_r_over_P
            du1 = dP / r2 - 2.0 * P * xk / r2**2
            du2 = (dP * D - P * dD) / D**2  # d(P/D)
            dc12 = (du2 - du1) / r2 - 2.0 * (P / D - u1) * xk / r2**2
            du3 = (
                2.0 * m * a * a * d_r_over_P / r2**2
                - 4.0 * u3 * xk / r2
            )
            ds1 = -s1 * (dP / P + dr / r)
            for i in range(3):
                dg[1 + k, 0, 1 + i] = -ds1 * w[i] - s1 * W[i, k]
                dg[1 + k, 1 + i, 0] = dg[1 + k, 0, 1 + i]
                for j in range(3):
                    dg[1 + k, 1 + i, 1 + j] = (
                        dc12 * x[1 + i] * x[1 + j]
                        + du3 * w[i] * w[j]
                        + u3 * (W[i, k] * w[j] + w[i] * W[j, k])
                    )
            for i in range(3):
                dg[1 + k, 1 + i, 1 + k] += c12 * x[1 + i]
                dg[1 + k, 1 + k, 1 + i] += c12 * x[1 + i]
                dg[1 + k, 1 + i, 1 + i] += du1
        return dg

    return metric, dmetric


# ---------------------------------------------------------------------------
# composition wrappers
# ---------------------------------------------------------------------------


def _translate(metric, dmetric, d):
    """Metric of the same geometry with its center moved to ``d``."""
    shift = np.concatenate([[0.0], d])

    def metric_t(x):
        return metric(x - shift.reshape((4,) + (1,) * (x.ndim - 1)))

    def dmetric_t(x):
        return dmetric(x - shift.reshape((4,) + (1,) * (x.ndim - 1)))

    return metric_t, dmetric_t


def _boost(metric, dmetric, L):
    """Pullback under the coordinate boost x_old = L x_new."""

    def metric_b(x):
        xo = np.tensordot(L, x, axes=(1, 0))
        g = metric(xo)
        return np.einsum("ma,nb,mn...->ab...", L, L, g)

    def dmetric_b(x):
        xo = np.tensordot(L, x, axes=(1, 0))
        dg = dmetric(xo)
        return np.einsum("kl,ma,nb,kmn...->lab...", L, L, L, dg)

    return metric_b, dmetric_b


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


def catalog_names():
    return [
        "minkowski",
        "minkowski-boosted-slice",
        "schwarzschild-standard",
        "schwarzschild-isotropic",
        "schwarzschild-translated",
        "kerr-bl",
    ]


def _require_mass(params):
    m = float(params.get("mass", 1.0))
    if not np.isfinite(m) or m <= 0.0:
        raise CatalogError(f"mass must be positive and finite, got {m}")
    return m


def catalog_get(name: str, **params) -> SpacetimeAdapter:
    """Build a catalog spacetime by name.

    Parameters by entry: mass (all but minkowski), spin (kerr-bl),
    rapidity and axis (minkowski-boosted-slice), offset (translated).
    """
    if name == "minkowski":
        return SpacetimeAdapter(name, {}, _minkowski_metric, _minkowski_dmetric)

    if name == "minkowski-boosted-slice":
        w = float(params.get("rapidity", 0.0))
        axis = int(params.get("axis", 0))
        if not np.isfinite(w):
            raise CatalogError(f"rapidity must be finite, got {w}")
        if axis not in (0, 1, 2):
            raise CatalogError(f"axis must be 0, 1, or 2, got {axis}")
        L = boost_matrix(w, axis)
        return SpacetimeAdapter(
            name,
            {"rapidity": w, "axis": axis},
            _minkowski_metric,
            _minkowski_dmetric,
            slice_jacobian=L @ np.eye(4, 3, k=-1),
        )

    if name == "schwarzschild-standard":
        m = _require_mass(params)
        metric, dmetric = _schwarzschild_standard(m)
        return SpacetimeAdapter(name, {"mass": m}, metric, dmetric)

    if name == "schwarzschild-isotropic":
        m = _require_mass(params)
        metric, dmetric = _schwarzschild_isotropic(m)
        return SpacetimeAdapter(name, {"mass": m}, metric, dmetric)

    if name == "schwarzschild-translated":
        m = _require_mass(params)
        d = np.asarray(params.get("offset", (0.0, 0.0, 0.0)), dtype=float)
        if d.shape != (3,) or not np.all(np.isfinite(d)):
            raise CatalogError("offset must be a finite 3-vector")
        metric, dmetric = _translate(*_schwarzschild_standard(m), d)
        return SpacetimeAdapter(name, {"mass": m, "offset": tuple(d)}, metric, dmetric)

    if name == "kerr-bl":
        m = _require_mass(params)
        a = float(params.get("spin", 0.0))
        if not np.isfinite(a) or abs(a) >= m:
            raise CatalogError(f"kerr-bl requires |spin| < mass, got a={a}, m={m}")
        metric, dmetric = _kerr_cartesianized(m, a)
        return SpacetimeAdapter(name, {"mass": m, "spin": a}, metric, dmetric)

    raise CatalogError(f"unknown spacetime {name!r}; known: {catalog_names()}")


# ---------------------------------------------------------------------------
# initial data on the preferred slice
# ---------------------------------------------------------------------------


def _spatial_inverse(g3):
    """Pointwise inverse of a 3x3 metric block with leading indices."""
    gmat = np.moveaxis(np.moveaxis(g3, 0, -1), 0, -1)  # (..., 3, 3)
    inv = np.linalg.inv(gmat)
    return np.moveaxis(np.moveaxis(inv, -1, 0), -1, 0)


@dataclass(frozen=True)
class InitialDataSlice:
    """Closed-form (g_ij, k_ij) evaluators on R^3 minus a ball.

    All evaluators take points of shape (3, ...) and must accept complex
    input; ``dmetric3_fn`` supplies exact first derivatives so curvature
    quantities need only one level of complex-step differentiation.
    """

    metric3_fn: Callable[[np.ndarray], np.ndarray]
    dmetric3_fn: Callable[[np.ndarray], np.ndarray]  # [k, i, j] = d_k g_ij
    extrinsic_fn: Callable[[np.ndarray], np.ndarray]
    excluded_radius: float = 0.0

    def _check_domain(self, y):
        r = np.sqrt(np.sum(np.real(y) ** 2, axis=0))
        if np.any(r <= self.excluded_radius):
            raise ValueError(
                f"point inside excluded ball r <= {self.excluded_radius:.3g}"
            )

    def metric3(self, y: np.ndarray) -> np.ndarray:
        self._check_domain(y)
        return self.metric3_fn(y)

    def extrinsic(self, y: np.ndarray) -> np.ndarray:
        self._check_domain(y)
        return self.extrinsic_fn(y)

    def christoffel3(self, y: np.ndarray) -> np.ndarray:
        """Christoffels of the 3-metric, shape (3, 3, 3, ...) = [up, lo, lo]."""
        self._check_domain(y)
        dg = self.dmetric3_fn(y)
        ginv = _spatial_inverse(self.metric3_fn(y))
        low = 0.5 * (
            np.moveaxis(dg, (0, 1, 2), (1, 0, 2))
            + np.moveaxis(dg, (0, 1, 2), (2, 0, 1))
            - dg
        )  # [d, a, b] = (d_a g_db + d_b g_da - d_d g_ab)/2
        return np.einsum("cd...,dab...->cab...", ginv, low)


def make_slice(adapter: SpacetimeAdapter) -> InitialDataSlice:
    """Initial data induced on the adapter's preferred slice.

    The slice map extends to coordinates (t, y) by x = J y + t e_t with
    e_t the adapter's coordinate time axis; the metric is stationary in t,
    so k_ij = (D_i beta_j + D_j beta_i) / (2N).
    """
    J = adapter.slice_jacobian
    e_t = np.zeros(4)
    e_t[0] = 1.0

    def metric3(y):
        g = adapter.metric(adapter.slice_point(y))
        return np.einsum("ma,nb,mn...->ab...", J, J, g)

    def dmetric3(y):
        dg4 = adapter.dmetric(adapter.slice_point(y))
        return np.einsum("kc,ma,nb,kmn...->cab...", J, J, J, dg4)

    def extrinsic(y):
        x = adapter.slice_point(y)
        g = adapter.metric(x)
        dg4 = adapter.dmetric(x)
        g3 = np.einsum("ma,nb,mn...->ab...", J, J, g)
        beta = np.einsum("m,nb,mn...->b...", e_t, J, g)
        gtt = np.einsum("m,n,mn...->...", e_t, e_t, g)
        ginv = _spatial_inverse(g3)
        beta_up = np.einsum("ab...,b...->a...", ginv, beta)
        N = np.sqrt(np.einsum("a...,a...->...", beta_up, beta) - gtt)
        dg = np.einsum("kc,ma,nb,kmn...->cab...", J, J, J, dg4)
        low = 0.5 * (
            np.moveaxis(dg, (0, 1, 2), (1, 0, 2))
            + np.moveaxis(dg, (0, 1, 2), (2, 0, 1))
            - dg
        )
        gam = np.einsum("cd...,dab...->cab...", ginv, low)
        dg3t = np.einsum("kc,m,nb,kmn...->cb...", J, e_t, J, dg4)
        Dbeta = dg3t - np.einsum("cab...,c...->ab...", gam, beta)
        return (Dbeta + np.moveaxis(Dbeta, 0, 1)) / (2.0 * N)

    m = adapter.params.get("mass", 0.0)
    a = adapter.params.get("spin", 0.0)
    if adapter.name == "schwarzschild-standard":
        excluded = 2.0 * m
    elif adapter.name == "schwarzschild-isotropic":
        excluded = 0.5 * m
    elif adapter.name == "schwarzschild-translated":
        excluded = 2.0 * m + float(np.linalg.norm(adapter.params["offset"]))
    elif adapter.name == "kerr-bl":
        excluded = m + np.sqrt(m * m - a * a)
    else:
        excluded = 0.0
    return InitialDataSlice(metric3, dmetric3, extrinsic, excluded)


# ---------------------------------------------------------------------------
# vacuum constraint validation
# ---------------------------------------------------------------------------


def constraint_residual(data: InitialDataSlice, point: np.ndarray):
    """Hamiltonian and momentum constraint residuals at one point.

    Returns ``(R + (tr k)^2 - |k|^2, D^i (k_ij - tr k g_ij))`` with all
    derivatives taken by complex step on the closed-form evaluators.
    """
    y = np.asarray(point, dtype=float).reshape(3)
    g3 = data.metric3(y[:, None])[..., 0]
    ginv = np.linalg.inv(g3)
    gam = data.christoffel3(y[:, None])[..., 0]
    k = data.extrinsic(y[:, None])[..., 0]

    dgam = np.stack(
        [
            complex_step(lambda q: data.christoffel3(q), y[:, None], e)[..., 0]
            for e in np.eye(3)
        ]
    )  # [l, c, a, b] = d_l Gamma^c_ab
    dk = np.stack(
        [
            complex_step(lambda q: data.extrinsic(q), y[:, None], e)[..., 0]
            for e in np.eye(3)
        ]
    )  # [l, i, j]

    # R_ab = d_c Gam^c_ab - d_a Gam^c_cb + Gam^c_cd Gam^d_ab - Gam^c_ad Gam^d_cb
    ric = (
        np.einsum("ccab->ab", dgam)
        - np.einsum("accb->ab", dgam)
        + np.einsum("ccd,dab->ab", gam, gam)
        - np.einsum("cad,dcb->ab", gam, gam)
    )
    R = np.einsum("ab,ab->", ginv, ric)

    trk = np.einsum("ab,ab->", ginv, k)
    k_up = ginv @ k @ ginv
    k2 = np.einsum("ab,ab->", k_up, k)
    hamiltonian = R + trk**2 - k2

    # momentum: D^i (k_ij - trk g_ij) = g^{il} [d_l k_ij - Gam k - Gam k] - d_j trk
    Dk = dk - np.einsum("cli,cj->lij", gam, k) - np.einsum("clj,ic->lij", gam, k)
    div_k = np.einsum("il,lij->j", ginv, Dk)
    dtrk = np.einsum("ab,lab->l", ginv, Dk)  # D_l (g^{ab} k_ab) via metric comp.
    momentum = div_k - dtrk
    return float(hamiltonian), np.asarray(momentum, dtype=float)
