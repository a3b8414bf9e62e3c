"""Isometric embedding of convex 2-sphere metrics and reference surface data.

embed_weyl solves the classical convex-embedding problem: given a metric
sigma_hat on S^2 with positive Gauss curvature, find X: S^2 -> R^3 whose
induced metric matches sigma_hat node-wise. The unknowns are the packed
spherical-harmonic coefficients of the three Cartesian components and the
iteration is Gauss-Newton on the weighted metric mismatch with a backtracking
line search.

Gauge handling: translations are removed by locking the l=0 coefficient of
every component to zero (zero mean); rotations span the null space of the
Gauss-Newton normal matrix, and since the right-hand side is orthogonal to
that null space the Tikhonov-regularized step carries no rotation component,
so the converged surface is a deterministic function of the initial guess.

The normal matrix changes slowly between nearby metrics, so WeylSolver keeps
its Cholesky factor and reuses it across re-solves (frozen-Jacobian
iteration); callers that perturb sigma_hat repeatedly, such as the optimal
embedding loop, get near-linear cost per re-solve.

reference_data computes the flat-spacetime surface data (|H_0|, alpha_H0) of
the graph X = (tau, Xhat) in R^{3,1}; all curvature contractions are taken
against the two unit normals, so surface Christoffel symbols never enter.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .calculus import gauss_curvature, inverse_metric
from .errors import (
    CausalCharacterError,
    DegenerateMetricError,
    NonConvexMetricError,
    SolverConvergenceError,
)
from .grid import SphereGrid

__all__ = [
    "WeylSolver",
    "embed_weyl",
    "EmbeddingState",
    "ReferenceData",
    "embedding_state",
    "reference_data",
    "induced_metric_of",
]

ETA4 = np.diag([-1.0, 1.0, 1.0, 1.0])

_TABLE_CACHE = {}


def _basis_tables(grid: SphereGrid):
    """(Yt, Yp): theta/phi derivatives of every basis harmonic, (ncoef, nnode)."""
    key = (grid.lmax, grid.nphi)
    if key not in _TABLE_CACHE:
        nt = grid.ncoef
        Yt = np.empty((nt, grid.theta.size * grid.phi.size))
        Yp = np.empty_like(Yt)
        c = np.zeros(nt)
        for p in range(nt):
            c[p] = 1.0
            ft, fp = grid.synth_grad(c)
            Yt[p] = ft.ravel()
            Yp[p] = fp.ravel()
            c[p] = 0.0
        _TABLE_CACHE[key] = (Yt, Yp)
    return _TABLE_CACHE[key]


def induced_metric_of(grid: SphereGrid, coeffs: np.ndarray):
    """Packed induced metric (tt, tp, pp) of the map with given coefficients."""
    dt, dp = [], []
    for i in range(coeffs.shape[0]):
        ft, fp = grid.synth_grad(coeffs[i])
        dt.append(ft)
        dp.append(fp)
    dt, dp = np.stack(dt), np.stack(dp)
    return np.stack(
        [
            np.einsum("i...,i...->...", dt, dt),
            np.einsum("i...,i...->...", dt, dp),
            np.einsum("i...,i...->...", dp, dp),
        ]
    ), (dt, dp)


class WeylSolver:
    """Gauss-Newton embedding solver with a reusable normal-matrix factor."""

    def __init__(self, grid: SphereGrid, tol: float = 1e-10, maxiter: int = 50):
        self.grid = grid
        self.tol = tol
        self.maxiter = maxiter
        self.coeffs = None
        self._factor = None
        # least-squares node weights: quadrature times pair multiplicity
        w = np.broadcast_to(grid.weights[:, None], grid.shape).ravel()
        self._w = np.concatenate([w, 2.0 * w, w])

    def _initial_guess(self, sigma_hat):
        det = sigma_hat[0] * sigma_hat[2] - sigma_hat[1] ** 2
        R = (det / np.maximum(self.grid.sin_theta[:, None] ** 2, 1e-300)) ** 0.25
        st, ct = self.grid.sin_theta[:, None], self.grid.cos_theta[:, None]
        cp, sp = np.cos(self.grid.phi)[None, :], np.sin(self.grid.phi)[None, :]
        xhat = np.stack([R * st * cp, R * st * sp, R * ct + 0.0 * cp])
        c = np.stack([self.grid.analyze(x) for x in xhat])
        c[:, 0] = 0.0
        return c

    def _jacobian(self, dt, dp):
        Yt, Yp = _basis_tables(self.grid)
        n = Yt.shape[1]
        ncomp = dt.shape[0]
        J = np.empty((3 * n, ncomp * self.grid.ncoef))
        for i in range(ncomp):
            sl = slice(i * self.grid.ncoef, (i + 1) * self.grid.ncoef)
            xt, xp = dt[i].ravel(), dp[i].ravel()
            J[:n, sl] = (2.0 * Yt * xt).T
            J[n : 2 * n, sl] = (Yt * xp + Yp * xt).T
            J[2 * n :, sl] = (2.0 * Yp * xp).T
        return J

    def _refactor(self, dt, dp):
        J = self._jacobian(dt, dp)
        A = (J.T * self._w) @ J
        lam = 1e-11 * np.mean(np.diag(A))
        A[np.diag_indices_from(A)] += lam
        self._factor = (cho_factor(A, lower=False), J)

    def solve(self, sigma_hat, x0=None, refresh=True):
        """Return coefficients (3, ncoef) embedding sigma_hat isometrically.

        ``x0`` warm-starts the iteration; ``refresh=False`` keeps the current
        normal-matrix factorization (frozen-Jacobian mode, cheap re-solves).
        """
        grid = self.grid
        K = gauss_curvature(grid, sigma_hat)
        if np.min(K) <= 0.0:
            raise NonConvexMetricError(
                f"Gauss curvature not positive (min {np.min(K):.3e})"
            )
        if x0 is not None:
            c = np.array(x0, dtype=float, copy=True)
        elif self.coeffs is not None:
            c = self.coeffs.copy()
        else:
            c = self._initial_guess(sigma_hat)
        scale = np.max(np.abs(sigma_hat))
        target = sigma_hat.reshape(3, -1)

        s, (dt, dp) = induced_metric_of(grid, c)
        res = np.max(np.abs(s.reshape(3, -1) - target)) / scale
        stale = not refresh and self._factor is not None
        if refresh or self._factor is None:
            self._refactor(dt, dp)
            stale = False

        for _ in range(self.maxiter):
            if res < self.tol:
                self.coeffs = c
                return c
            r = (s.reshape(3, -1) - target).ravel()
            factor, J = self._factor
            step = -cho_solve(factor, J.T @ (self._w * r))
            step = step.reshape(c.shape)
            step[:, 0] = 0.0

            accepted = False
            t = 1.0
            for _ in range(10):
                c_try = c + t * step
                s_try, (dt_try, dp_try) = induced_metric_of(grid, c_try)
                res_try = np.max(np.abs(s_try.reshape(3, -1) - target)) / scale
                if res_try < res:
                    c, s, dt, dp, res = c_try, s_try, dt_try, dp_try, res_try
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                if stale:
                    self._refactor(dt, dp)
                    stale = False
                    continue
                raise SolverConvergenceError(
                    f"embedding stagnated at residual {res:.3e}"
                )
            if not stale and res > self.tol:
                self._refactor(dt, dp)
        if res < self.tol:
            self.coeffs = c
            return c
        raise SolverConvergenceError(
            f"embedding not converged after {self.maxiter} iterations "
            f"(residual {res:.3e})"
        )


def embed_weyl(grid: SphereGrid, sigma_hat, tol=1e-10, maxiter=50, x0=None):
    """Embed a convex metric into R^3; returns the three component fields."""
    solver = WeylSolver(grid, tol=tol, maxiter=maxiter)
    c = solver.solve(sigma_hat, x0=x0)
    return np.stack([grid.synthesize(ci) for ci in c])


@dataclass(frozen=True)
class EmbeddingState:
    """Reference embedding X = (X^0, Xhat) with its observer t0."""

    grid: SphereGrid
    X: np.ndarray  # (4, nt, np)
    tau: np.ndarray  # (nt, np), tau = -t0 . X
    t0: np.ndarray  # (4,)
    gauge: str = "zero-mean components, rotation-free Newton steps"


def embedding_state(grid, xhat, tau, t0=None) -> EmbeddingState:
    if t0 is None:
        t0 = np.array([1.0, 0.0, 0.0, 0.0])
    t0 = np.asarray(t0, dtype=float)
    norm = t0 @ ETA4 @ t0
    if abs(norm + 1.0) > 1e-12 or t0[0] <= 0.0:
        raise ValueError("t0 must be a future unit timelike vector")
    X = np.concatenate([tau[None], np.asarray(xhat)])
    if t0[0] != 1.0 or np.any(t0[1:] != 0.0):
        # general observer: X^0 is fixed by tau = -t0 . X only up to the
        # boost; callers build boosted states through lorentz action instead
        raise ValueError("direct construction supports t0 = (1,0,0,0) only")
    return EmbeddingState(grid, X, np.array(tau, copy=True), t0)


@dataclass(frozen=True)
class ReferenceData:
    """Flat-space data of the image surface."""

    normH0: np.ndarray
    alphaH0: np.ndarray
    hatK: np.ndarray  # Gauss curvature of sigma + dtau x dtau


def reference_data(grid: SphereGrid, xhat, tau) -> ReferenceData:
    """Surface data |H_0|, alpha_H0 of the graph (tau, xhat) in R^{3,1}."""
    cx = np.stack([grid.analyze(x) for x in xhat])
    ct = grid.analyze(tau)
    c4 = np.concatenate([ct[None], cx])

    dX = np.empty((2, 4) + grid.shape)
    ddX = np.empty((3, 4) + grid.shape)
    for mu in range(4):
        dX[0, mu], dX[1, mu] = grid.synth_grad(c4[mu])
        ddX[0, mu], ddX[1, mu], ddX[2, mu] = grid.synth_second(c4[mu])

    def dot(a, b):
        return np.einsum("m...,mn,n...->...", a, ETA4, b)

    sigma = np.stack([dot(dX[0], dX[0]), dot(dX[0], dX[1]), dot(dX[1], dX[1])])
    if np.min(sigma[0] * sigma[2] - sigma[1] ** 2) <= 0.0 or np.min(sigma[0]) <= 0.0:
        raise DegenerateMetricError(
            "image surface is not spacelike (projection tangent to t0)"
        )
    siginv = inverse_metric(sigma)

    # hatK from the 3d part alone: induced metric of xhat is sigma + dtau dtau
    sig_hat = np.stack(
        [
            np.einsum("i...,i...->...", dX[0, 1:], dX[0, 1:]),
            np.einsum("i...,i...->...", dX[0, 1:], dX[1, 1:]),
            np.einsum("i...,i...->...", dX[1, 1:], dX[1, 1:]),
        ]
    )
    hatK = gauss_curvature(grid, sig_hat)

    t0 = np.array([1.0, 0.0, 0.0, 0.0])
    # u0: unit normal projection of t0 (the canonical-gauge observer frame)
    grad_tau = np.einsum("ab...,b...->a...", siginv, dX[:, 0])
    u0 = t0[:, None, None] + np.einsum("a...,am...->m...", grad_tau, dX)
    nu = dot(u0, u0)
    if not np.all(nu < 0.0):
        raise CausalCharacterError("reference observer direction not timelike")
    u0 = u0 / np.sqrt(-nu)

    # v0: outward spacelike normal orthogonal to u0 and the tangents
    centroid = np.array([grid.integrate(x) for x in xhat]) / (4.0 * np.pi)
    w = np.zeros_like(u0)
    w[1:] = xhat - centroid[:, None, None]
    wt = np.einsum("ab...,b...->a...", siginv, np.stack([dot(w, dX[0]), dot(w, dX[1])]))
    v0 = w - np.einsum("a...,am...->m...", wt, dX)
    v0 = v0 + dot(v0, u0) * u0
    nv = dot(v0, v0)
    if not np.all(nv > 0.0):
        raise DegenerateMetricError("outward normal construction degenerate")
    v0 = v0 / np.sqrt(nv)

    A0 = siginv[0] * ddX[0] + 2.0 * siginv[1] * ddX[1] + siginv[2] * ddX[2]
    k0 = -dot(A0, v0)
    p0 = -dot(A0, u0)
    H2 = k0 * k0 - p0 * p0
    if np.min(H2) <= 0.0:
        raise CausalCharacterError("image mean curvature vector is not spacelike")

    h0 = -k0 * v0 + p0 * u0
    j0 = k0 * u0 - p0 * v0
    j0_low = np.einsum("mn,n...->m...", ETA4, j0)
    dj = np.stack([np.stack(grid.gradient_of(j0_low[nu_])) for nu_ in range(4)], axis=1)
    alphaH0 = np.einsum("n...,an...->a...", h0, dj) / H2
    return ReferenceData(np.sqrt(H2), alphaH0, hatK)
