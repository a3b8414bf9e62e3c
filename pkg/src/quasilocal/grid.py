"""Spectral grid on the unit sphere.

Scalar fields are sampled on a tensor-product grid with Gauss-Legendre
nodes in colatitude and equispaced nodes in longitude.  With ``lmax + 1``
Gauss nodes the quadrature integrates products of normalized associated
Legendre functions exactly up to combined degree ``2 * lmax + 1``, so the
discrete analysis/synthesis pair below is an exact inverse pair on fields
band-limited at ``lmax``.

Coefficients are stored packed: index ``l * l + l + m`` holds the real
harmonic of degree ``l`` and order ``m``, where positive orders are the
``cos(m phi)`` harmonics and negative orders the ``sin(|m| phi)`` ones.
The basis is orthonormal with respect to the round area element, so a
constant field ``1`` has the single coefficient ``sqrt(4 pi)``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import roots_legendre

__all__ = ["SphereGrid", "pack_index"]


def pack_index(l: int, m: int) -> int:
    """Position of the (l, m) real harmonic in a packed coefficient vector."""
    if abs(m) > l:
        raise ValueError(f"invalid harmonic order: l={l}, m={m}")
    return l * l + l + m


def _legendre_tables(lmax: int, x: np.ndarray):
    """Normalized associated Legendre functions and their theta derivatives.

    Returns arrays of shape (lmax+1, lmax+1, len(x)) indexed [m, l, node];
    entries with l < m are zero.  Normalization is chosen so that
    ``integral(P[m, l] ** 2 dx) = 1 / (2 pi)`` and no Condon-Shortley phase
    is applied.
    """
    nth = len(x)
    sin_t = np.sqrt(1.0 - x * x)
    plm = np.zeros((lmax + 1, lmax + 1, nth))
    dplm = np.zeros_like(plm)

    plm[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, lmax + 1):
        plm[m, m] = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * sin_t * plm[m - 1, m - 1]
    for m in range(lmax + 1):
        if m + 1 <= lmax:
            plm[m, m + 1] = np.sqrt(2.0 * m + 3.0) * x * plm[m, m]
        for l in range(m + 2, lmax + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            plm[m, l] = a * (x * plm[m, l - 1] - b * plm[m, l - 2])

    # d/dtheta from the degree-lowering relation; sin(theta) never vanishes
    # on a Gauss grid so the division is safe.
    for m in range(lmax + 1):
        for l in range(m, lmax + 1):
            if l == 0:
                continue
            e = 0.0
            if l - 1 >= m:
                e = np.sqrt((2.0 * l + 1.0) / (2.0 * l - 1.0) * (l * l - m * m))
            dplm[m, l] = (l * x * plm[m, l] - e * plm[m, l - 1]) / sin_t
    return plm, dplm


class SphereGrid:
    """Gauss-Legendre x equispaced-longitude sampling of the unit sphere.

    Parameters
    ----------
    lmax:
        Band limit of the representable harmonic content.
    nphi:
        Number of longitude samples; defaults to ``2 * lmax + 2`` which
        satisfies the exactness requirement ``nphi >= 2 * lmax + 1``.
    """

    def __init__(self, lmax: int, nphi: int | None = None):
        if lmax < 1:
            raise ValueError("band limit must be at least 1")
        self.lmax = int(lmax)
        self.ntheta = self.lmax + 1
        self.nphi = int(nphi) if nphi is not None else 2 * self.lmax + 2
        if self.nphi < 2 * self.lmax + 1:
            raise ValueError(
                f"nphi={self.nphi} under-resolves band limit {self.lmax}; "
                f"need at least {2 * self.lmax + 1}"
            )

        x, w = roots_legendre(self.ntheta)
        order = np.argsort(-x)  # colatitude increasing from the north pole
        self.cos_theta = x[order]
        self.gauss_weights = w[order]
        self.theta = np.arccos(self.cos_theta)
        self.sin_theta = np.sqrt(1.0 - self.cos_theta**2)
        self.phi = 2.0 * np.pi * np.arange(self.nphi) / self.nphi

        self.ncoef = (self.lmax + 1) ** 2
        ls = np.concatenate([np.full(2 * l + 1, l) for l in range(self.lmax + 1)])
        ms = np.concatenate([np.arange(-l, l + 1) for l in range(self.lmax + 1)])
        self.l_of_index = ls
        self.m_of_index = ms

        self._plm, self._dplm = _legendre_tables(self.lmax, self.cos_theta)
        # second theta derivative from the Legendre equation
        l_arr = np.arange(self.lmax + 1)
        cot = self.cos_theta / self.sin_theta
        eig = (l_arr * (l_arr + 1.0))[None, :, None]
        m2 = (np.arange(self.lmax + 1.0) ** 2)[:, None, None]
        self._d2plm = -cot[None, None, :] * self._dplm - (
            eig - m2 / (self.sin_theta**2)[None, None, :]
        ) * self._plm

        mphi = np.arange(self.lmax + 1)[:, None] * self.phi[None, :]
        self._cos_table = np.cos(mphi)
        self._sin_table = np.sin(mphi)
        scale = np.full(self.lmax + 1, np.sqrt(2.0))
        scale[0] = 1.0
        self._m_scale = scale

        # weights of the discrete round-sphere measure, shape (ntheta, nphi)
        self.weights = np.broadcast_to(
            self.gauss_weights[:, None] * (2.0 * np.pi / self.nphi),
            (self.ntheta, self.nphi),
        ).copy()

    # -- basic bookkeeping -------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ntheta, self.nphi)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def check_field(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise ValueError(f"field shape {f.shape} does not match grid {self.shape}")
        return f

    def integrate(self, f: np.ndarray) -> float:
        """Integral of a scalar against the round area element."""
        return float(np.sum(self.check_field(f) * self.weights))

    # -- transforms --------------------------------------------------------

    def _fourier_profiles(self, f: np.ndarray):
        spec = np.fft.rfft(f, axis=1)
        ncol = self.lmax + 1
        a = 2.0 * spec.real[:, :ncol] / self.nphi
        a[:, 0] *= 0.5
        b = -2.0 * spec.imag[:, :ncol] / self.nphi
        return a, b

    def analyze(self, f: np.ndarray) -> np.ndarray:
        """Project a field onto the packed orthonormal harmonic basis."""
        f = self.check_field(f)
        a, b = self._fourier_profiles(f)
        wa = a * self.gauss_weights[:, None]
        wb = b * self.gauss_weights[:, None]
        # ccos[l, m] = sum_i plm[m, l, i] * wa[i, m], and likewise for sin
        ccos = np.einsum("mli,im->lm", self._plm, wa)
        csin = np.einsum("mli,im->lm", self._plm, wb)
        fac = 2.0 * np.pi / self._m_scale
        ccos *= fac[None, :]
        csin *= fac[None, :]

        out = np.zeros(self.ncoef)
        pos = self.m_of_index >= 0
        out[pos] = ccos[self.l_of_index[pos], self.m_of_index[pos]]
        neg = ~pos
        out[neg] = csin[self.l_of_index[neg], -self.m_of_index[neg]]
        return out

    def _coef_matrices(self, c: np.ndarray):
        c = np.asarray(c, dtype=float)
        if c.shape != (self.ncoef,):
            raise ValueError(f"coefficient shape {c.shape}, expected ({self.ncoef},)")
        ccos = np.zeros((self.lmax + 1, self.lmax + 1))
        csin = np.zeros_like(ccos)
        pos = self.m_of_index >= 0
        ccos[self.l_of_index[pos], self.m_of_index[pos]] = c[pos]
        neg = ~pos
        csin[self.l_of_index[neg], -self.m_of_index[neg]] = c[neg]
        return ccos, csin

    def _assemble(self, table, ccos, csin, phi_deriv: bool):
        gc = np.einsum("mli,lm->im", table, ccos) * self._m_scale[None, :]
        gs = np.einsum("mli,lm->im", table, csin) * self._m_scale[None, :]
        if not phi_deriv:
            return gc @ self._cos_table + gs @ self._sin_table
        m = np.arange(self.lmax + 1)[None, :]
        return (gs * m) @ self._cos_table - (gc * m) @ self._sin_table

    def synthesize(self, c: np.ndarray) -> np.ndarray:
        ccos, csin = self._coef_matrices(c)
        return self._assemble(self._plm, ccos, csin, phi_deriv=False)

    def synth_grad(self, c: np.ndarray):
        """Partial derivatives (d/dtheta, d/dphi) of the synthesized field."""
        ccos, csin = self._coef_matrices(c)
        ft = self._assemble(self._dplm, ccos, csin, phi_deriv=False)
        fp = self._assemble(self._plm, ccos, csin, phi_deriv=True)
        return ft, fp

    def synth_second(self, c: np.ndarray):
        """Second partials (d_tt, d_tp, d_pp) of the synthesized field."""
        ccos, csin = self._coef_matrices(c)
        ftt = self._assemble(self._d2plm, ccos, csin, phi_deriv=False)
        ftp = self._assemble(self._dplm, ccos, csin, phi_deriv=True)
        m2cos = ccos * (np.arange(self.lmax + 1) ** 2)[None, :]
        m2sin = csin * (np.arange(self.lmax + 1) ** 2)[None, :]
        fpp = -self._assemble(self._plm, m2cos, m2sin, phi_deriv=False)
        return ftt, ftp, fpp

    def gradient_of(self, f: np.ndarray):
        """Spectral (d_theta, d_phi) of a sampled scalar field."""
        return self.synth_grad(self.analyze(f))

    def real_harmonic(self, l: int, m: int) -> np.ndarray:
        """Samples of the packed-basis harmonic (l, m) on the grid."""
        idx = pack_index(l, m)
        c = np.zeros(self.ncoef)
        c[idx] = 1.0
        return self.synthesize(c)

    def low_pass(self, f: np.ndarray, lcut: int) -> np.ndarray:
        """Remove harmonic content above degree ``lcut``."""
        c = self.analyze(f)
        c[self.l_of_index > lcut] = 0.0
        return self.synthesize(c)

    def __repr__(self) -> str:  # pragma: no cover
        return f"SphereGrid(lmax={self.lmax}, nphi={self.nphi})"
