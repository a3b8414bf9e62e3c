"""Covariant differential operators on the sphere.

Shape conventions, used throughout the package:

* scalar field          -- ``(ntheta, nphi)``
* one-form              -- ``(2, ntheta, nphi)``, components ``(theta, phi)``
* symmetric 2-tensor    -- ``(3, ntheta, nphi)``, components
  ``(theta-theta, theta-phi, phi-phi)``

Derivatives of tensor components are taken by re-expressing them against
the Cartesian frame of the round unit sphere: a tangential one-form or
2-tensor becomes a triple (or sextet) of smooth scalars, whose spectral
partial derivatives recover the round covariant derivative exactly
because the frame's own derivative is purely normal.  Operators for a
general metric reduce to round-metric operators through pointwise
algebra, so everything inherits spectral accuracy.

Frame components carry one unit of harmonic degree, so a product with
them shifts band limits by one: results are exact (to roundoff) for
fields whose coefficients vanish at ``l = lmax``, and carry a small
truncation error otherwise.  Analytic fields resolved with a shell or
two of headroom are unaffected.

Quantities involving the inverse metric are rational in the metric
components, so they are never differentiated directly: connection terms
are split into a polynomial part (adjugate contractions) and an overall
``1/det`` handled by the quotient rule.  Every operator is therefore
pointwise exact for band-limited inputs with enough headroom, rather
than merely convergent.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import DegenerateMetricError, SolvabilityError, SolverConvergenceError
from .grid import SphereGrid

__all__ = [
    "round_metric",
    "inverse_metric",
    "sqrt_det",
    "area_ratio",
    "metric_integrate",
    "raise_index",
    "oneform_norm2",
    "gradient",
    "divergence",
    "laplacian",
    "hessian",
    "rot_divergence",
    "apply_operator",
    "christoffels",
    "difference_tensor",
    "gauss_curvature",
    "solve_poisson",
]

# symmetric-pair storage order (theta-theta, theta-phi, phi-phi)
_PAIR = {(0, 0): 0, (0, 1): 1, (1, 0): 1, (1, 1): 2}


# -- frame tables ----------------------------------------------------------


def _frame(grid: SphereGrid):
    """Cached embedding data of the round sphere: n, e_a = d_a n, raised e."""
    cached = getattr(grid, "_cart_frame", None)
    if cached is not None:
        return cached
    st, ct = grid.sin_theta[:, None], grid.cos_theta[:, None]
    cp, sp = np.cos(grid.phi)[None, :], np.sin(grid.phi)[None, :]
    shape = grid.shape
    n = np.stack([st * cp, st * sp, np.broadcast_to(ct, shape).copy()])
    e_down = np.stack(
        [
            np.stack([ct * cp, ct * sp, np.broadcast_to(-st, shape).copy()]),
            np.stack([-st * sp, st * cp, np.zeros(shape)]),
        ]
    )
    inv_s2 = 1.0 / (grid.sin_theta**2)[:, None]
    e_up = np.stack([e_down[0], e_down[1] * inv_s2])
    grid._cart_frame = (n, e_down, e_up)
    return grid._cart_frame


def round_metric(grid: SphereGrid) -> np.ndarray:
    s2 = np.broadcast_to((grid.sin_theta**2)[:, None], grid.shape)
    return np.stack([np.ones(grid.shape), np.zeros(grid.shape), s2.copy()])


# -- pointwise metric algebra ----------------------------------------------


def _det(metric: np.ndarray) -> np.ndarray:
    return metric[0] * metric[2] - metric[1] ** 2


def inverse_metric(metric: np.ndarray) -> np.ndarray:
    det = _det(metric)
    if np.any(metric[0] <= 0.0) or np.any(det <= 0.0):
        raise DegenerateMetricError("2-metric is not positive definite")
    return np.stack([metric[2] / det, -metric[1] / det, metric[0] / det])


def sqrt_det(metric: np.ndarray) -> np.ndarray:
    det = _det(metric)
    if np.any(det <= 0.0):
        raise DegenerateMetricError("2-metric has non-positive determinant")
    return np.sqrt(det)


def area_ratio(grid: SphereGrid, metric: np.ndarray) -> np.ndarray:
    """sqrt(det sigma) / sqrt(det round): the density tying dA to dOmega."""
    return sqrt_det(metric) / grid.sin_theta[:, None]


def metric_integrate(grid: SphereGrid, f: np.ndarray, metric: np.ndarray) -> float:
    """Integral of a scalar against the area element of ``metric``."""
    return grid.integrate(f * area_ratio(grid, metric))


def raise_index(omega: np.ndarray, inv: np.ndarray) -> np.ndarray:
    """One-form -> vector, components against the same coordinate basis."""
    return np.stack(
        [
            inv[0] * omega[0] + inv[1] * omega[1],
            inv[1] * omega[0] + inv[2] * omega[1],
        ]
    )


def oneform_norm2(omega: np.ndarray, inv: np.ndarray) -> np.ndarray:
    v = raise_index(omega, inv)
    return v[0] * omega[0] + v[1] * omega[1]


# -- conversions to Cartesian-frame scalars ---------------------------------


def _cart_of_oneform(grid, omega):
    _, e_down, e_up = _frame(grid)
    return omega[0] * e_up[0] + omega[1] * e_up[1]


def _div_of_cart(grid, cart):
    """Round divergence given tangential Cartesian components."""
    _, _, e_up = _frame(grid)
    out = grid.zeros()
    for i in range(3):
        ft, fp = grid.gradient_of(cart[i])
        out += ft * e_up[0, i] + fp * e_up[1, i]
    return out


def _curl_of_cart(grid, cart):
    """Round rotational divergence given tangential Cartesian components."""
    _, e_down, _ = _frame(grid)
    acc = grid.zeros()
    for i in range(3):
        ft, fp = grid.gradient_of(cart[i])
        acc += fp * e_down[0, i] - ft * e_down[1, i]
    return acc / grid.sin_theta[:, None]


def _oneform_round_derivative(grid, cart):
    """``nabla~_a omega_b`` from Cartesian components, shape (2, 2, ...)."""
    _, e_down, _ = _frame(grid)
    D = np.zeros((2, 2) + grid.shape)
    for i in range(3):
        ft, fp = grid.gradient_of(cart[i])
        D[0] += np.stack([ft * e_down[0, i], ft * e_down[1, i]])
        D[1] += np.stack([fp * e_down[0, i], fp * e_down[1, i]])
    return D


# -- first-order operators ---------------------------------------------------


def gradient(grid: SphereGrid, f: np.ndarray) -> np.ndarray:
    """Covariant gradient of a scalar (metric independent)."""
    ft, fp = grid.gradient_of(f)
    return np.stack([ft, fp])


def divergence(
    grid: SphereGrid,
    omega: np.ndarray,
    metric: np.ndarray | None = None,
    diff_tensor: np.ndarray | None = None,
):
    """``sigma^{ab} nabla_a omega_b`` for a one-form.

    ``diff_tensor`` may carry a precomputed ``difference_tensor(grid, metric)``
    when the metric is reused across many calls.
    """
    cart = _cart_of_oneform(grid, omega)
    if metric is None:
        return _div_of_cart(grid, cart)
    D = _oneform_round_derivative(grid, cart)
    inv = inverse_metric(metric)
    C = difference_tensor(grid, metric) if diff_tensor is None else diff_tensor
    out = inv[0] * D[0, 0] + inv[1] * (D[0, 1] + D[1, 0]) + inv[2] * D[1, 1]
    for c in range(2):
        trC = inv[0] * C[c, 0] + 2.0 * inv[1] * C[c, 1] + inv[2] * C[c, 2]
        out -= trC * omega[c]
    return out


def laplacian(grid: SphereGrid, f: np.ndarray, metric: np.ndarray | None = None):
    if metric is None:
        c = grid.analyze(f)
        eig = -grid.l_of_index * (grid.l_of_index + 1.0)
        return grid.synthesize(c * eig)
    # trace of the covariant Hessian: independent of the divergence route,
    # so composition checks divergence(gradient(f)) == laplacian(f) are real
    hess = hessian(grid, f, metric)
    inv = inverse_metric(metric)
    return inv[0] * hess[0] + 2.0 * inv[1] * hess[1] + inv[2] * hess[2]


def rot_divergence(grid: SphereGrid, omega: np.ndarray, metric: np.ndarray | None = None):
    """``epsilon^{ab} nabla_b omega_a`` with the metric's area 2-form."""
    curl = _curl_of_cart(grid, _cart_of_oneform(grid, omega))
    if metric is None:
        return curl
    return curl / area_ratio(grid, metric)


# -- covariant derivatives of tensors ---------------------------------------


def _round_christoffels(grid):
    st, ct = grid.sin_theta[:, None], grid.cos_theta[:, None]
    shape = grid.shape
    zero = np.zeros(shape)
    # Gamma[c][k], c in {theta, phi}, k in {tt, tp, pp}
    g_theta = np.stack([zero, zero, np.broadcast_to(-st * ct, shape).copy()])
    cot = np.broadcast_to(ct / st, shape).copy()
    g_phi = np.stack([zero, cot, zero])
    return np.stack([g_theta, g_phi])


def tensor_round_derivative(grid: SphereGrid, metric: np.ndarray) -> np.ndarray:
    """``nabla~_c sigma_ab``, shape (2, 3, ntheta, nphi) indexed [c, ab]."""
    _, e_down, e_up = _frame(grid)
    full = np.stack([np.stack([metric[0], metric[1]]), np.stack([metric[1], metric[2]])])
    cart = np.einsum("ab...,ai...,bj...->ij...", full, e_up, e_up)
    grad_cart = np.empty((2, 3, 3) + grid.shape)
    for i in range(3):
        for j in range(i, 3):
            ft, fp = grid.gradient_of(cart[i, j])
            grad_cart[0, i, j] = grad_cart[0, j, i] = ft
            grad_cart[1, i, j] = grad_cart[1, j, i] = fp
    out = np.empty((2, 3) + grid.shape)
    for k, (a, b) in enumerate([(0, 0), (0, 1), (1, 1)]):
        out[:, k] = np.einsum("cij...,i...,j...->c...", grad_cart, e_down[a], e_down[b])
    return out


def _connection_parts(grid: SphereGrid, metric: np.ndarray):
    """Polynomial numerator G and determinant of the difference tensor.

    ``C^c_{ab} = G^c_{ab} / det`` with ``G`` built from the adjugate, so G is
    polynomial in the metric and its first round derivatives and safe to
    differentiate spectrally.
    """
    dsig = tensor_round_derivative(grid, metric)

    def ds(c, a, b):
        return dsig[c, _PAIR[(a, b)]]

    adj = [[metric[2], -metric[1]], [-metric[1], metric[0]]]
    G = np.empty((2, 3) + grid.shape)
    for c in range(2):
        for k, (a, b) in enumerate([(0, 0), (0, 1), (1, 1)]):
            acc = grid.zeros()
            for d in range(2):
                acc += 0.5 * adj[c][d] * (ds(a, d, b) + ds(b, d, a) - ds(d, a, b))
            G[c, k] = acc
    return G, _det(metric)


def difference_tensor(grid: SphereGrid, metric: np.ndarray) -> np.ndarray:
    """``C^c_{ab} = Gamma(metric) - Gamma(round)``, shape (2, 3) = [c, pair]."""
    G, det = _connection_parts(grid, metric)
    return G / det


def christoffels(grid: SphereGrid, metric: np.ndarray) -> np.ndarray:
    """Christoffel symbols of ``metric``, shape (2, 3) = [upper, lower pair]."""
    return _round_christoffels(grid) + difference_tensor(grid, metric)


def hessian(
    grid: SphereGrid,
    f: np.ndarray,
    metric: np.ndarray | None = None,
    gamma: np.ndarray | None = None,
):
    """Covariant Hessian ``nabla_a nabla_b f``, symmetric storage.

    ``gamma`` may carry precomputed ``christoffels(grid, metric)``.
    """
    c = grid.analyze(f)
    ft, fp = grid.synth_grad(c)
    ftt, ftp, fpp = grid.synth_second(c)
    if gamma is None:
        gamma = _round_christoffels(grid) if metric is None else christoffels(grid, metric)
    second = np.stack([ftt, ftp, fpp])
    return second - gamma[0] * ft - gamma[1] * fp


def apply_operator(grid: SphereGrid, kind: str, field: np.ndarray, metric=None):
    """Dispatch by operator name; ``metric=None`` means the round metric."""
    table = {
        "gradient": gradient,
        "divergence": divergence,
        "laplacian": laplacian,
        "covariant-hessian": hessian,
        "rotational-divergence": rot_divergence,
    }
    if kind not in table:
        raise ValueError(f"unknown operator kind: {kind!r}")
    if kind == "gradient":
        return gradient(grid, field)
    return table[kind](grid, field, metric)


# -- intrinsic curvature -----------------------------------------------------


def _mixed12_round_derivative(grid: SphereGrid, T: np.ndarray) -> np.ndarray:
    """``nabla~_e T^c_{ab}`` for a symmetric (1,2) tensor in [c, pair] storage.

    Returns shape (2, 2, 3, ...) indexed [e, c, pair].  Works through the
    Cartesian scalarization, contracting the upper slot with the lowered
    frame and the lower slots with the raised frame.
    """
    _, e_down, e_up = _frame(grid)
    comps = [(0, 0), (0, 1), (1, 1)]

    def tt(c, a, b):
        return T[c, _PAIR[(a, b)]]

    cart = np.empty((3, 3, 3) + grid.shape)
    for i in range(3):
        for j in range(3):
            for k in range(3):
                acc = grid.zeros()
                for c in range(2):
                    for a in range(2):
                        for b in range(2):
                            acc += tt(c, a, b) * e_down[c, i] * e_up[a, j] * e_up[b, k]
                cart[i, j, k] = acc

    grads = np.empty((2, 3, 3, 3) + grid.shape)
    for i in range(3):
        for j in range(3):
            for k in range(3):
                ft, fp = grid.gradient_of(cart[i, j, k])
                grads[0, i, j, k] = ft
                grads[1, i, j, k] = fp

    out = np.empty((2, 2, 3) + grid.shape)
    for e in range(2):
        for c in range(2):
            for kk, (a, b) in enumerate(comps):
                acc = grid.zeros()
                for i in range(3):
                    for j in range(3):
                        for k in range(3):
                            acc += (
                                grads[e, i, j, k]
                                * e_up[c, i]
                                * e_down[a, j]
                                * e_down[b, k]
                            )
                out[e, c, kk] = acc
    return out


def gauss_curvature(grid: SphereGrid, metric: np.ndarray) -> np.ndarray:
    """Gauss curvature of a general metric, fully spectrally.

    Uses the difference tensor ``C = Gamma(sigma) - Gamma(round)`` in the
    curvature comparison formula.  The derivative of C goes through the
    quotient rule on its polynomial numerator, so no rational quantity is
    ever differentiated.
    """
    G, det = _connection_parts(grid, metric)
    C = G / det
    DG = _mixed12_round_derivative(grid, G)
    ddet = np.stack(grid.gradient_of(det))
    # nabla~_e C^c_{ab} = (nabla~_e G^c_{ab} - C^c_{ab} nabla~_e det) / det
    DC = (DG - C[None, :, :] * ddet[:, None, None]) / det

    def cc(c, a, b):
        return C[c, _PAIR[(a, b)]]

    def dc(e, c, a, b):
        return DC[e, c, _PAIR[(a, b)]]

    ric = np.empty((3,) + grid.shape)
    for k, (a, b) in enumerate([(0, 0), (0, 1), (1, 1)]):
        div_term = dc(0, 0, a, b) + dc(1, 1, a, b)
        # nabla~_a C^c_{cb}, symmetrized over (a, b)
        trace_term = 0.5 * (
            dc(a, 0, 0, b) + dc(a, 1, 1, b) + dc(b, 0, 0, a) + dc(b, 1, 1, a)
        )
        quad1 = grid.zeros()
        quad2 = grid.zeros()
        for c in range(2):
            tr = cc(0, 0, c) + cc(1, 1, c)
            quad1 += tr * cc(c, a, b)
            for d in range(2):
                quad2 += cc(c, a, d) * cc(d, c, b)
        ric[k] = div_term - trace_term + quad1 - quad2
    ric += round_metric(grid)  # Ricci of the round unit sphere
    inv = inverse_metric(metric)
    scal = inv[0] * ric[0] + 2.0 * inv[1] * ric[1] + inv[2] * ric[2]
    return 0.5 * scal


# -- Poisson solver -----------------------------------------------------------


def solve_poisson(
    grid: SphereGrid,
    source: np.ndarray,
    metric: np.ndarray | None = None,
    tol: float = 1e-12,
    maxiter: int = 400,
) -> np.ndarray:
    """Solve ``laplacian(u) = source`` for zero-mean ``u``.

    The source must have zero mean against the metric's area element; the
    returned field is normalized to zero mean the same way.  For a general
    metric the system is solved by GMRES preconditioned with the inverse
    round Laplacian, to relative residual ``tol``.
    """
    source = grid.check_field(source)
    sigma = round_metric(grid) if metric is None else metric
    mu = area_ratio(grid, sigma)
    area = grid.integrate(mu)
    # guard against genuinely unsolvable inputs; analytic sources carry a
    # truncation-level mean, so the threshold is loose
    scale = np.max(np.abs(source)) + np.finfo(float).tiny
    mean = grid.integrate(source * mu) / area
    if abs(mean) > 1e-6 * scale:
        raise SolvabilityError(
            f"source has nonzero mean {mean:.3e} (scale {scale:.3e}); "
            "the Poisson problem on a closed surface is unsolvable"
        )

    eig = -grid.l_of_index * (grid.l_of_index + 1.0)
    if metric is None:
        c = grid.analyze(source)
        c[0] = 0.0
        c[1:] = c[1:] / eig[1:]
        u = grid.synthesize(c)
        return u - grid.integrate(u * mu) / area

    mask = grid.l_of_index >= 1
    nfree = int(mask.sum())
    Cdiff = difference_tensor(grid, sigma)

    def matvec(cfree):
        c = np.zeros(grid.ncoef)
        c[mask] = cfree
        grad = gradient(grid, grid.synthesize(c))
        lap = divergence(grid, grad, sigma, diff_tensor=Cdiff)
        return grid.analyze(lap)[mask]

    def precond(rfree):
        return rfree / eig[mask]

    rhs = grid.analyze(source)[mask]
    op = LinearOperator((nfree, nfree), matvec=matvec)
    pre = LinearOperator((nfree, nfree), matvec=precond)
    cfree, info = gmres(op, rhs, rtol=tol, atol=0.0, maxiter=maxiter, M=pre)
    if info != 0:
        raise SolverConvergenceError(f"Poisson GMRES failed to converge (info={info})")
    c = np.zeros(grid.ncoef)
    c[mask] = cfree
    u = grid.synthesize(c)
    return u - grid.integrate(u * mu) / area
