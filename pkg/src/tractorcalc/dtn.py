"""Dirichlet-to-Neumann machinery on the model hyperbolic interior.

In geodesic polar coordinates the interior Laplacian separates over
spherical harmonics of the boundary: on the degree-l mode the equation
``(Delta - s(n-s)) u = 0`` becomes the radial ODE

    R'' + n coth(t) R' - [ l(l+n-1)/sinh(t)^2 - s(n-s) ] R = 0,

whose solution regular at the pole behaves near the boundary like

    R ~ F x^{n-s} + G x^s,        x = 2 exp(-t).

The map F -> G per mode is the conformal Dirichlet-to-Neumann eigenvalue
Lambda_l (boundary data normalised so F_l = 1).  Coefficients are extracted
by a two-term least-squares fit on a boundary window [x0, 2*x0], with the
window halved until Lambda stabilises.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ArgumentError, GridError, ResonanceError

# series for t*coth(t) and (t/sinh t)^2 about t=0 (even orders 0..6)
_TCOTH = (1.0, 1.0 / 3.0, -1.0 / 45.0, 2.0 / 945.0)
_T2_SINH2 = (1.0, -1.0 / 3.0, 2.0 / 15.0 - 1.0 / 15.0, 0.0)  # placeholder, fixed below


def _t2_over_sinh2_series():
    # (t / sinh t)^2 = 1 - t^2/3 + t^4 * 2/45 + ... ; compute by squaring the
    # series of t/sinh t = 1 - t^2/6 + 7 t^4/360 - 31 t^6/15120.
    a = np.zeros(4)
    b = np.array([1.0, -1.0 / 6.0, 7.0 / 360.0, -31.0 / 15120.0])
    for i in range(4):
        for j in range(4 - i):
            a[i + j] += b[i] * b[j]
    return tuple(a)


_T2_SINH2 = _t2_over_sinh2_series()


def resonance_guard(s, n):
    """Refuse spectral parameters with colliding or log-resonant exponents."""
    s = float(s)
    if abs(2 * s - n) < 1e-12:
        raise ResonanceError(f"s = n/2 = {s}: indicial roots collide")
    gap = 2 * s - n
    if abs(gap - round(gap)) < 1e-12 and round(gap) % 2 == 0:
        raise ResonanceError(
            f"2s - n = {gap:.0f} is an even integer: possible log terms; s excluded"
        )


def _frobenius_start(s, l, n, t0):
    """Series R = t^l (1 + a2 t^2 + a4 t^4 + a6 t^6) and its derivative at t0."""
    L = l * (l + n - 1)
    ssn = float(s) * (n - float(s))
    coeffs = {0: 1.0}
    for j in (2, 4, 6):
        acc = 0.0
        for m in (1, 2, 3):
            if j - 2 * m < 0:
                continue
            prev = coeffs.get(j - 2 * m, 0.0)
            acc += (n * _TCOTH[m] * (l + j - 2 * m) - L * _T2_SINH2[m]) * prev
        acc += ssn * coeffs.get(j - 2, 0.0)
        denom = j * (2 * l + j + n - 1)
        coeffs[j] = -acc / denom
    val = sum(c * t0 ** (l + j) for j, c in coeffs.items())
    der = sum(c * (l + j) * t0 ** (l + j - 1) for j, c in coeffs.items())
    return val, der


@dataclass
class RadialSolution:
    s: float
    l: int
    n: int
    F: float
    G: float
    Lambda: float
    fit_residual: float
    ode_residual: float
    fit_window: tuple
    t_max: float
    dense: object = field(repr=False, default=None)

    def __call__(self, t):
        return self.dense(np.asarray(t))[0]

    def derivative(self, t):
        return self.dense(np.asarray(t))[1]


def radial_solve(s, l, n, t_max=9.0, x0=0.08, rtol=1e-12, atol=1e-14, window_floor=1e-3) -> RadialSolution:
    """Integrate the regular branch outward and fit boundary coefficients.

    The fit window [x0, 2 x0] is halved until Lambda is stable to 1e-5
    relative; failing that is a GridError.  The regular branch is started
    from a sixth-order interior series.
    """
    if l < 0 or n < 2:
        raise ArgumentError("need l >= 0 and boundary dimension n >= 2")
    resonance_guard(s, n)
    s = float(s)
    L = l * (l + n - 1)
    ssn = s * (n - s)

    def rhs(t, y):
        r, rp = y
        coth = 1.0 / np.tanh(t)
        pot = L / np.sinh(t) ** 2 - ssn
        return [rp, -n * coth * rp + pot * r]

    t0 = 0.01 if l <= 12 else 0.05
    y0 = _frobenius_start(s, l, n, t0)
    scale = max(abs(y0[0]), abs(y0[1]), 1e-280)
    y0 = (y0[0] / scale, y0[1] / scale)
    sol = solve_ivp(rhs, (t0, t_max), y0, method="DOP853", rtol=rtol, atol=atol, dense_output=True)
    if not sol.success:
        raise GridError(f"radial integration failed: {sol.message}")

    # interior-grid ODE residual (finite differences only inside this oracle)
    t_check = np.linspace(0.3, t_max - 0.3, 60)
    h = 1e-5
    rr = sol.sol(t_check)
    rpp = (sol.sol(t_check + h)[1] - sol.sol(t_check - h)[1]) / (2 * h)
    coth = 1.0 / np.tanh(t_check)
    pot = L / np.sinh(t_check) ** 2 - ssn
    res = rpp + n * coth * rr[1] - pot * rr[0]
    ode_residual = float(np.max(np.abs(res)) / max(np.max(np.abs(rr[0])), 1e-30))

    # two-term data (F, G) extracted with the even-order correction terms
    # x^{n-s+2j}, x^{s+2j} included, otherwise the fit converges only
    # linearly in the window position
    exponents = [n - s + 2 * j for j in range(3)] + [s + 2 * j for j in range(3)]
    lam_prev = None
    window = None
    fit = None
    xw = x0
    while xw >= window_floor:
        if 2 * xw >= 2 * math.exp(-t0):
            xw /= 2
            continue
        xs = np.linspace(xw, 2 * xw, 36)
        ts = np.log(2.0 / xs)
        if np.max(ts) > t_max:
            raise GridError("fit window extends beyond the integrated range; raise t_max")
        vals = sol.sol(ts)[0]
        A = np.stack([xs**e for e in exponents], axis=1)
        col_scale = np.max(np.abs(A), axis=0)
        coef, *_ = np.linalg.lstsq(A / col_scale, vals, rcond=None)
        coef = coef / col_scale
        fit_res = float(np.max(np.abs(A @ coef - vals)) / max(np.max(np.abs(vals)), 1e-30))
        F, G = coef[0], coef[3]
        if abs(F) < 1e-200:
            raise GridError("leading coefficient vanished; cannot normalise F = 1")
        lam = G / F
        if lam_prev is not None and abs(lam - lam_prev) <= 1e-5 * max(1.0, abs(lam)):
            window = (xw, 2 * xw)
            fit = (F, G, lam, fit_res)
            break
        lam_prev = lam
        xw /= 2
    if fit is None:
        raise GridError("Lambda did not stabilise under window halving")
    F, G, lam, fit_res = fit
    return RadialSolution(
        s=s, l=l, n=n, F=1.0, G=lam, Lambda=lam,
        fit_residual=fit_res, ode_residual=ode_residual,
        fit_window=window, t_max=t_max,
        dense=lambda t: sol.sol(t) / F,
    )


@dataclass
class DtNTable:
    """Per-mode multipliers of the boundary-data map for one (n, s)."""

    n: int
    s: float
    lambdas: dict
    metadata: dict

    def __getitem__(self, l):
        return self.lambdas[l]


_TABLE_CACHE = {}


def dtn_table(n, s, lmax, t_max=9.0, x0=0.08) -> DtNTable:
    key = (n, float(s), lmax, t_max, x0)
    hit = _TABLE_CACHE.get(key)
    if hit is not None:
        return hit
    lambdas = {}
    residuals = {}
    for l in range(lmax + 1):
        sol = radial_solve(s, l, n, t_max=t_max, x0=x0)
        lambdas[l] = sol.Lambda
        residuals[l] = sol.fit_residual
    table = DtNTable(
        n=n,
        s=float(s),
        lambdas=lambdas,
        metadata={"t_max": t_max, "x0": x0, "fit_residuals": residuals},
    )
    _TABLE_CACHE[key] = table
    return table


def dtn_apply_modes(table: DtNTable, coeffs_by_l: dict) -> dict:
    """Mode-diagonal action on harmonic coefficients (any per-degree shape)."""
    out = {}
    for l, c in coeffs_by_l.items():
        if l not in table.lambdas:
            raise ArgumentError(f"degree {l} beyond the tabulated range")
        out[l] = table.lambdas[l] * np.asarray(c)
    return out


def dtn_map_k2(f_coeffs: dict, n=3, lmax=None, table: DtNTable | None = None) -> dict:
    """The k = 2 conformal Dirichlet-to-Neumann map, s = (n+1)/2.

    Input and output are harmonic coefficient dictionaries; the map is
    diagonal per degree with the tabulated multipliers.
    """
    s = (n + 1) / 2
    if table is None:
        lmax = lmax if lmax is not None else (max(f_coeffs) if f_coeffs else 0)
        table = dtn_table(n, s, lmax)
    return dtn_apply_modes(table, f_coeffs)


def gjms_dtn_probe(k, m_j, f_coeffs: dict, n=3, lmax=None):
    """Experimental higher-order probe built from the mode decomposition.

    For k = 4 this is the per-branch scattering solve at s_j = (k+n-1-2m_j)/2;
    the general matching of boundary data across branches is open, so the
    result is flagged experimental.
    """
    if k not in (2, 4):
        raise ArgumentError("gjms_dtn_probe supports k in {2, 4}")
    if m_j not in range(k // 2):
        raise ArgumentError("m_j must lie in the generalised Dirichlet list 0..k/2-1")
    s_j = (k + n - 1 - 2 * m_j) / 2
    lmax = lmax if lmax is not None else (max(f_coeffs) if f_coeffs else 0)
    table = dtn_table(n, s_j, lmax)
    out = dtn_apply_modes(table, f_coeffs)
    return out, {"s": s_j, "experimental": k > 2}


def radial_mode_laplacian(tgrid, vals, l, n):
    """Delta^{g_+} on a radial degree-l profile via 4th-order stencils.

    Test oracle for the null-space decomposition; the engine itself never
    differentiates numerically.
    """
    t = np.asarray(tgrid)
    h = t[1] - t[0]
    if np.max(np.abs(np.diff(t) - h)) > 1e-12:
        raise ArgumentError("uniform grid required")
    v = np.asarray(vals)
    d1 = np.gradient(v, h, edge_order=2)
    d2 = np.zeros_like(v)
    d2[2:-2] = (-v[4:] + 16 * v[3:-1] - 30 * v[2:-2] + 16 * v[1:-3] - v[:-4]) / (12 * h**2)
    d2[:2] = d2[2]
    d2[-2:] = d2[-3]
    d1_acc = np.zeros_like(v)
    d1_acc[2:-2] = (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * h)
    d1_acc[:2] = d1[:2]
    d1_acc[-2:] = d1[-2:]
    coth = 1.0 / np.tanh(t)
    return -d2 - n * coth * d1_acc + l * (l + n - 1) / np.sinh(t) ** 2 * v


def load_golden_table(name: str) -> dict:
    with resources.files("tractorcalc.goldens").joinpath(name).open() as fh:
        return json.load(fh)
