"""Spherical harmonics and quadrature on the round S^3.

Everything lives in the ambient R^4 representation: grid points are unit
vectors W, scalar functions are arrays over the grid, and covector fields
are identified with tangential vector fields (rows orthogonal to W) -- on
the unit sphere the round metric is the restriction of the Euclidean one,
so raising and lowering is the identity in this picture.

Degree-l harmonics are spanned by zonals U_l(W . a) (Chebyshev-U kernels)
about random axes; per-degree bases are orthonormalised against the
quadrature inner product.  Laplacian convention: Delta Y_l = +l(l+2) Y_l.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError

SPHERE_VOLUME = 2 * np.pi**2  # vol(S^3)


def chebyshev_u(lmax: int, x: np.ndarray) -> np.ndarray:
    """U_0..U_lmax at x, stacked along axis 0 (recurrence, vectorised)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((lmax + 1,) + x.shape)
    out[0] = 1.0
    if lmax >= 1:
        out[1] = 2.0 * x
    for l in range(2, lmax + 1):
        out[l] = 2.0 * x * out[l - 1] - out[l - 2]
    return out


def chebyshev_u_prime(lmax: int, x: np.ndarray) -> np.ndarray:
    """Derivatives U_l' via the coupled recurrence."""
    x = np.asarray(x, dtype=float)
    u = chebyshev_u(lmax, x)
    out = np.empty_like(u)
    out[0] = 0.0
    if lmax >= 1:
        out[1] = 2.0
    for l in range(2, lmax + 1):
        out[l] = 2.0 * u[l - 1] + 2.0 * x * out[l - 1] - out[l - 2]
    return out


@dataclass
class SphereGrid:
    """Product quadrature grid on S^3 in hyperspherical coordinates."""

    W: np.ndarray        # (N, 4) unit vectors
    weights: np.ndarray  # (N,) integrates the round volume element

    @staticmethod
    def build(n_chi=28, n_theta=18, n_phi=36) -> "SphereGrid":
        x_chi, w_chi = np.polynomial.legendre.leggauss(n_chi)
        chi = 0.5 * np.pi * (x_chi + 1.0)
        w_chi = 0.5 * np.pi * w_chi * np.sin(chi) ** 2
        x_th, w_th = np.polynomial.legendre.leggauss(n_theta)
        theta = np.arccos(x_th)
        phi = 2 * np.pi * np.arange(n_phi) / n_phi
        w_phi = np.full(n_phi, 2 * np.pi / n_phi)
        CH, TH, PH = np.meshgrid(chi, theta, phi, indexing="ij")
        WCH, WTH, WPH = np.meshgrid(w_chi, w_th, w_phi, indexing="ij")
        W = np.stack(
            [
                np.cos(CH),
                np.sin(CH) * np.cos(TH),
                np.sin(CH) * np.sin(TH) * np.cos(PH),
                np.sin(CH) * np.sin(TH) * np.sin(PH),
            ],
            axis=-1,
        ).reshape(-1, 4)
        weights = (WCH * WTH * WPH).reshape(-1)
        return SphereGrid(W=W, weights=weights)

    @property
    def n(self):
        return len(self.weights)

    def integrate(self, vals) -> float:
        return float(self.weights @ vals)

    def pair_scalar(self, f, g) -> float:
        return float(self.weights @ (f * g))

    def pair_tangent(self, a, b) -> float:
        return float(self.weights @ np.sum(a * b, axis=1))

    def tangential(self, vecs) -> np.ndarray:
        radial = np.sum(vecs * self.W, axis=1, keepdims=True)
        return vecs - radial * self.W


def zonal_values(grid: SphereGrid, axis, l: int) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return chebyshev_u(l, grid.W @ axis)[l]


def zonal_gradient(grid: SphereGrid, axis, l: int) -> np.ndarray:
    """Tangential gradient of U_l(W . a) as an (N, 4) array."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    c = grid.W @ axis
    up = chebyshev_u_prime(l, c)[l]
    grad = up[:, None] * axis[None, :]
    return grid.tangential(grad)


class HarmonicBasis:
    """Per-degree orthonormal harmonic bases with values and gradients.

    Built from random-axis zonals; the QR step orthonormalises against the
    quadrature measure, so orthonormality holds by construction and the
    only analytic input is the zonal kernel.
    """

    def __init__(self, grid: SphereGrid, lmax: int, seed=1234):
        self.grid = grid
        self.lmax = lmax
        rng = np.random.default_rng(seed)
        self.values = {}     # l -> (dim_l, N)
        self.gradients = {}  # l -> (dim_l, N, 4)
        sqrt_w = np.sqrt(grid.weights)
        for l in range(lmax + 1):
            dim = (l + 1) ** 2
            axes = rng.normal(size=(dim, 4))
            axes[0] = np.array([1.0, 0.3, -0.2, 0.5])  # deterministic anchor
            raw = np.stack([zonal_values(grid, a, l) for a in axes])
            raw_grad = np.stack([zonal_gradient(grid, a, l) for a in axes])
            q, r = np.linalg.qr((raw * sqrt_w[None, :]).T)
            if np.min(np.abs(np.diag(r))) < 1e-10:
                raise ArgumentError(f"zonal axes degenerate at degree {l}; reseed")
            coeff = np.linalg.inv(r).T  # rows: combination of raw zonals
            self.values[l] = coeff @ raw
            self.gradients[l] = np.tensordot(coeff, raw_grad, axes=(1, 0))

    def project(self, vals, l) -> np.ndarray:
        """Coefficients of the degree-l component."""
        return self.values[l] @ (self.grid.weights * vals)

    def synthesize(self, coeffs_by_l) -> np.ndarray:
        out = np.zeros(self.grid.n)
        for l, c in coeffs_by_l.items():
            out += c @ self.values[l]
        return out

    def synthesize_gradient(self, coeffs_by_l) -> np.ndarray:
        out = np.zeros((self.grid.n, 4))
        for l, c in coeffs_by_l.items():
            out += np.tensordot(c, self.gradients[l], axes=(0, 0))
        return out

    def analyse(self, vals) -> dict:
        return {l: self.project(vals, l) for l in range(self.lmax + 1)}

    def bandlimit_residual(self, vals) -> float:
        """Mass of vals outside degrees <= lmax (quadrature norm)."""
        recon = self.synthesize(self.analyse(vals))
        return float(np.sqrt(max(self.grid.pair_scalar(vals - recon, vals - recon), 0.0)))


# -- zonal-only 1-D machinery (for high-degree DtN tables) ----------------------

class ZonalGrid:
    """Gauss grid in the polar angle for zonal functions on S^3."""

    def __init__(self, lmax: int, n_nodes=None):
        self.lmax = lmax
        n_nodes = n_nodes or max(4 * lmax + 24, 64)
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        self.chi = 0.5 * np.pi * (x + 1.0)
        # 4 pi from the S^2 factor, sin^2 from the S^3 volume element
        self.weights = 0.5 * np.pi * w * np.sin(self.chi) ** 2 * 4 * np.pi
        self.cos_chi = np.cos(self.chi)
        self.U = chebyshev_u(lmax, self.cos_chi)  # (lmax+1, n_nodes)
        self.norms = np.array([self.weights @ (self.U[l] ** 2) for l in range(lmax + 1)])

    def project(self, fvals) -> np.ndarray:
        """Zonal harmonic coefficients of f(chi) through quadrature."""
        return (self.U @ (self.weights * fvals)) / self.norms

    def synthesize(self, coeffs) -> np.ndarray:
        return coeffs @ self.U[: len(coeffs)]

    def pair(self, f, g) -> float:
        return float(self.weights @ (f * g))
