"""Almost Einstein structures and Poincare-Einstein verification.

A weight-1 density sigma is almost Einstein when the trace-free part of
``nabla nabla sigma + P sigma`` vanishes; the prolonged variable is the
standard tractor ``I = (1/d) D sigma = (sigma, nabla sigma, (Delta sigma -
J sigma)/d)``, parallel exactly when the equation holds.  The sign of the
constant ``|I|^2`` classifies the structure: negative gives an everywhere
Einstein metric of positive scalar curvature, zero the Ricci-flat branch
with at most isolated scale singularities, positive the negative-scalar
branch whose singularity set is a totally umbilic hypersurface.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from .charts import MetricModel
from .curvature import curvature_pack, geometry_at
from .errors import DegenerateStructureError, DomainError, NotAlmostEinsteinError
from .fields import DensityField, ScalarField, radius_squared_field
from .hypersurface import Hypersurface, unit_sphere
from .jetobjects import JetTT
from .sampling import chart_points
from .tractor import (
    TractorField,
    TractorValue,
    jtrace_field,
    laplacian_field,
    tractor_connection,
    tractor_metric,
)

AE_RESIDUAL_TOL = 1e-9  # separates exact models from >= 1e-6 perturbations


def ae_residual(sigma: DensityField, metric: MetricModel, point):
    """Trace-free part of (nabla nabla sigma + P sigma) and the trace slot rho.

    Zero residual at a point means the almost Einstein equation holds there;
    rho is the weight -1 density determined by the trace.
    """
    point = metric.chart.check(point)
    d = metric.dim
    geom = geometry_at(metric, point, 0)
    jet = JetTT.scalar(geom, sigma.field.eval_jet(point, 2), sigma.weight, 2)
    hess = jet.grad().grad().values()  # nabla_a nabla_b sigma (covector slots)
    hess = 0.5 * (hess + hess.T)
    g = metric.component_matrix(point)
    ginv = np.linalg.inv(g)
    P = np.empty((d, d))
    for a in range(d):
        for b in range(d):
            P[a, b] = geom.schouten(0)[a, b].value
    sig = sigma.value(point)
    full = hess + P * sig
    trace = float(np.sum(ginv * full))
    rho = -trace / d
    tf = full + g * rho
    return tf, rho


@dataclass
class AEStructure:
    """A metric model with an almost Einstein scale and its parallel tractor."""

    metric: MetricModel
    sigma: DensityField
    tractor: TractorField
    norm_squared: float
    residual_max: float
    is_exact: bool
    rho_field: ScalarField = dc_field(repr=False, default=None)

    @property
    def I(self) -> TractorField:
        return self.tractor


def build_I(sigma: DensityField, metric: MetricModel, check_points=None, seed=11) -> AEStructure:
    """Prolong sigma to the tractor I = (1/d) D sigma and package the structure.

    Warns (without failing) when the almost Einstein residual exceeds the
    acceptance tolerance at the sampled points; a vanishing sigma is refused.
    """
    d = metric.dim
    if check_points is None:
        check_points = chart_points(metric, 20, seed)
    sig_vals = [abs(sigma.value(p)) for p in check_points]
    if max(sig_vals) < 1e-14:
        raise DegenerateStructureError("sigma vanishes identically on the sampled set")

    lap = laplacian_field(sigma, metric)
    jt = jtrace_field(metric)
    rho = (lap - jt * sigma.field) * (1.0 / d)
    comps = np.empty(d + 2, dtype=object)
    comps[0] = sigma.field
    for a in range(d):
        comps[1 + a] = sigma.field.partial(a)
    comps[d + 1] = rho
    tractor = TractorField(comps, Fraction(0), metric)

    res_max = 0.0
    for p in check_points:
        tf, _ = ae_residual(sigma, metric, p)
        res_max = max(res_max, float(np.max(np.abs(tf))))
    exact = res_max <= AE_RESIDUAL_TOL
    if not exact:
        warnings.warn(
            f"sigma is not almost Einstein to tolerance ({res_max:.2e}); "
            "structure built for diagnostics only",
            stacklevel=2,
        )

    norms = []
    for p in check_points:
        iv = tractor.value(p)
        norms.append(tractor_metric(iv, iv).value)
        # Theorem round trip: the X-pairing of I is sigma itself.
        if abs(iv.sigma - sigma.value(p)) > 1e-12 * max(1.0, abs(iv.sigma)):
            raise NotAlmostEinsteinError("h(I, X) failed to reproduce sigma")
    return AEStructure(
        metric=metric,
        sigma=sigma,
        tractor=tractor,
        norm_squared=float(np.mean(norms)),
        residual_max=res_max,
        is_exact=exact,
        rho_field=rho,
    )


def parallel_defect(ae: AEStructure, point) -> float:
    vals, _ = tractor_connection(ae.tractor, ae.metric, point)
    return float(np.max(np.abs(vals)))


def norm_squared_spread(ae: AEStructure, points) -> float:
    vals = [tractor_metric(ae.tractor.value(p), ae.tractor.value(p)).value for p in points]
    return float(np.max(vals) - np.min(vals))


def classify(ae: AEStructure, points=None, seed=23, tol=1e-10):
    """Sign classification of |I|^2 with the matching branch description."""
    if points is None:
        points = chart_points(ae.metric, 40, seed)
    spread = norm_squared_spread(ae, points)
    if spread > 100 * tol:
        raise NotAlmostEinsteinError(f"|I|^2 is not constant (spread {spread:.2e})")
    n2 = ae.norm_squared
    if n2 < -tol:
        sign, branch = "-", "Einstein of positive scalar curvature; empty scale singularity set"
    elif n2 > tol:
        sign, branch = "+", (
            "Einstein of negative scalar curvature off a totally umbilic "
            "scale-singularity hypersurface"
        )
    else:
        sign, branch = "0", "Ricci-flat off isolated scale singularities"
    zeros = _zero_locus_probe(ae, seed)
    return {"sign": sign, "norm_squared": n2, "branch": branch, "zero_locus_samples": zeros}


def _zero_locus_probe(ae: AEStructure, seed, rays=40):
    """Roots of sigma along random rays through the chart origin."""
    rng = np.random.default_rng(seed)
    d = ae.metric.dim
    found = []
    for _ in range(rays):
        v = rng.normal(size=d)
        v /= np.linalg.norm(v)
        f = lambda t: ae.sigma.value(t * v)
        lo, hi = 0.0, 0.94
        if ae.metric.family == "flat":
            hi = 3.0
        vals = [(t, f(t)) for t in np.linspace(1e-3, hi, 60)]
        for (t0, f0), (t1, f1) in zip(vals, vals[1:]):
            if f0 == 0.0:
                found.append(t0 * v)
                break
            if f0 * f1 < 0:
                a, b = t0, t1
                for _ in range(80):
                    m = 0.5 * (a + b)
                    if f(a) * f(m) <= 0:
                        b = m
                    else:
                        a = m
                found.append(0.5 * (a + b) * v)
                break
    return found


def pe_check(ae: AEStructure, boundary: Hypersurface, seed=5, interior_points=40, boundary_points=40):
    """Poincare-Einstein verification on a manifold-with-boundary chart.

    Checks |I|^2 = 1, the Einstein equation Ric(g_+) + n g_+ = 0 for
    g_+ = sigma^{-2} times the conformal metric at interior samples, and
    |dx| = 1 along the boundary for x = sigma in the working scale.
    """
    metric = ae.metric
    d = metric.dim
    n = d - 1
    # interior samples: radial scalings of boundary points (charts are
    # star-shaped about the origin for every built-in model)
    rng = np.random.default_rng(seed)
    _, shell = boundary.sample_points(interior_points, seed + 2)
    interior = np.array([t * p for t, p in zip(rng.uniform(0.1, 0.9, len(shell)), shell)])
    sig_vals = np.array([ae.sigma.value(p) for p in interior])
    if np.any(sig_vals < 0):
        raise DomainError("sigma changes sign in the interior: not a defining density")

    norm_dev = abs(ae.norm_squared - 1.0)
    hint = None
    if norm_dev > 1e-6:
        hint = (
            f"|I|^2 = {ae.norm_squared:.6g}; rescale sigma by |I|^(-1) to normalise"
        )

    gplus = metric.conformal_rescale(-(ae.sigma.field.log()), name="einstein_interior")
    einstein_residual = 0.0
    for p in interior:
        if ae.sigma.value(p) < 0.15:
            continue
        pack = curvature_pack(gplus, p)
        gmat = gplus.component_matrix(p)
        einstein_residual = max(einstein_residual, float(np.max(np.abs(pack.Ric + n * gmat))))

    _, bpoints = boundary.sample_points(boundary_points, seed + 1)
    defining_dev = 0.0
    for p in bpoints:
        grad = ae.sigma.field.gradient(p)
        ginv = np.linalg.inv(metric.component_matrix(p))
        defining_dev = max(defining_dev, abs(float(grad @ ginv @ grad) - 1.0))

    is_pe = norm_dev <= 1e-8 and einstein_residual <= 1e-8 and defining_dev <= 1e-8
    return {
        "is_PE": bool(is_pe),
        "norm_squared_deviation": norm_dev,
        "einstein_residual": einstein_residual,
        "special_defining_check": defining_dev,
        "normalisation_hint": hint,
    }


def boundary_normal_match(ae: AEStructure, surface: Hypersurface, point):
    """Componentwise |I - N| at a boundary point, plus the H = -(Delta sigma)/d check.

    Diagnostic only: large values are reported, not raised.
    """
    point = surface.check_on_surface(point)
    iv = ae.tractor.value(point)
    nv = surface.normal_tractor(point)
    discrepancy = float(np.max(np.abs(iv.components - nv.components)))
    d = ae.metric.dim
    geom = geometry_at(ae.metric, point, 0)
    jet = JetTT.scalar(geom, ae.sigma.field.eval_jet(point, 2), ae.sigma.weight, 2)
    lap = jet.laplacian().comps[()].value
    h_from_sigma = -lap / d
    h_direct = surface.mean_curvature(point).value
    return {
        "discrepancy": discrepancy,
        "mean_curvature_residual": abs(h_from_sigma - h_direct),
    }


def ball_model(d=4):
    """The Poincare ball as an almost Einstein structure on flat R^d.

    sigma = (1 - |y|^2)/2 in the flat scale; the scale singularity set is the
    unit sphere and g_+ = sigma^{-2} g is the hyperbolic ball family.
    """
    from .charts import flat_metric

    flat = flat_metric(d)
    sigma = DensityField(1, 0.5 * (1.0 - radius_squared_field(d)), flat)
    ae = build_I(sigma, flat)
    boundary = unit_sphere(flat)
    return ae, boundary
