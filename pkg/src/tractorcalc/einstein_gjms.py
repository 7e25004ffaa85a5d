"""GJMS operators on Einstein scales in their three equivalent forms.

On an Einstein interior (Ric = -n g_+, so the hyperbolic normalisation
Sc = -d(d-1)) the conformal Laplacian powers factor into commuting shifted
Laplacians:

    product form      prod_{l=1}^{k/2} (Delta + lambda_l),
                      lambda_l = Sc (d+2l-2)(d-2l) / (4 d (d-1)),
    scattering form   (Delta - s_{k/2}(n-s_{k/2})) o ... o (Delta - s_1(n-s_1)),
                      s_i = (k+n+1-2i)/2,
    tractor form      sigma^{1-k/2} I...I Box D...D u,

with the exact rational identity lambda_{k/2+1-i} = -s_i(n-s_i).  The
density u lives in E[(k-d)/2]; the sigma dictionary (density of weight w
<-> function sigma^{-w} u in the g_+ trivialisation) is centralised here and
every cross-form comparison routes through it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .almost_einstein import AEStructure
from .charts import MetricModel
from .curvature import curvature_pack, geometry_at
from .errors import ArgumentError, DomainError, WeightError
from .fields import DensityField, ScalarField
from .jetobjects import JetTT
from .tractor import WeightedValue

HYPERBOLIC_SC = lambda d: Fraction(-d * (d - 1))


def lambda_list(k: int, d: int, scalar_curvature) -> list[Fraction]:
    """Eigen-shifts of the product form, exact rationals."""
    if k % 2 or k < 2:
        raise ArgumentError("k must be even and >= 2")
    sc = Fraction(scalar_curvature)
    return [
        sc * (d + 2 * ell - 2) * (d - 2 * ell) / (4 * d * (d - 1))
        for ell in range(1, k // 2 + 1)
    ]


def s_list(k: int, n: int) -> list[Fraction]:
    """Spectral parameters of the scattering composition, s_i = (k+n+1-2i)/2."""
    if k % 2 or k < 2:
        raise ArgumentError("k must be even and >= 2")
    return [Fraction(k + n + 1 - 2 * i, 2) for i in range(1, k // 2 + 1)]


def lambda_s_identity_residual(k: int, n: int) -> Fraction:
    """Exact residual of lambda_{k/2+1-i} = -s_i (n - s_i) on the hyperbolic scale."""
    d = n + 1
    lams = lambda_list(k, d, HYPERBOLIC_SC(d))
    ss = s_list(k, n)
    worst = Fraction(0)
    for i, s in enumerate(ss, start=1):
        lhs = lams[k // 2 - i]
        rhs = -s * (n - s)
        worst = max(worst, abs(lhs - rhs))
    return worst


@dataclass
class GJMSSpec:
    """Factor data of P_k on one Einstein scale."""

    k: int
    d: int
    lambdas: list
    s_values: list

    @staticmethod
    def hyperbolic(k: int, d: int) -> "GJMSSpec":
        n = d - 1
        lams = lambda_list(k, d, HYPERBOLIC_SC(d))
        ss = s_list(k, n)
        if len(set(ss)) != len(ss) or len({s * (n - s) for s in ss}) != len(ss):
            raise ArgumentError("spectral parameters collide; factorisation degenerates")
        for i, s in enumerate(ss, start=1):
            if lams[k // 2 - i] != -s * (n - s):
                raise ArgumentError("lambda/s identity failed; inconsistent spec")
        return GJMSSpec(k, d, lams, ss)


# -- sigma dictionary ----------------------------------------------------------

class SigmaDictionary:
    """Conversions between densities and their g_+ trivialisations.

    A density u of weight w corresponds to the function sigma^{-w} u; the
    dictionary also rewrites operator outputs back into density land.  All
    representatives are taken in the working scale of the structure.
    """

    def __init__(self, ae: AEStructure):
        self.ae = ae

    def to_function(self, u: DensityField) -> ScalarField:
        return self.ae.sigma.field ** (-float(u.weight)) * u.field

    def function_value_of(self, value: float, weight, point) -> float:
        sig = self.ae.sigma.value(point)
        if sig <= 0:
            raise DomainError("sigma <= 0: the g_+ trivialisation degenerates here")
        return float(value) * sig ** (-float(weight))

    def gplus_metric(self) -> MetricModel:
        key = "_gplus_cache"
        cached = getattr(self.ae, key, None)
        if cached is None:
            cached = self.ae.metric.conformal_rescale(
                -(self.ae.sigma.field.log()), name="gplus"
            )
            setattr(self.ae, key, cached)
        return cached


def assert_einstein_interior(gplus: MetricModel, points, n: int, tol=1e-8):
    worst = 0.0
    for p in points:
        pack = curvature_pack(gplus, p)
        worst = max(worst, float(np.max(np.abs(pack.Ric + n * gplus.component_matrix(p)))))
    if worst > tol:
        raise ArgumentError(f"interior metric is not Einstein to {tol:g} (got {worst:.2e})")
    return worst


# -- the three forms ------------------------------------------------------------

def scattering_laplacian(s, u_fn: ScalarField, gplus: MetricModel, point) -> float:
    """(Delta^{g_+} - s(n-s)) u for a function u in the g_+ trivialisation."""
    point = gplus.chart.check(point)
    n = gplus.dim - 1
    geom = geometry_at(gplus, point, 0)
    jet = JetTT.scalar(geom, u_fn.eval_jet(point, 2), 0, 2)
    lap = jet.laplacian().comps[()].value
    return lap - float(s) * (n - float(s)) * u_fn(point)


def scattering_laplacian_weighted(s, u: DensityField, ae: AEStructure, point) -> float:
    """The weighted form sigma (Delta + (2J/d) s(n-s)) u with J computed from
    the interior metric rather than assumed equal to -d/2.

    Evaluated in the sigma trivialisation and mapped back to the working
    scale; equals I^A D_A u for weight w = s - n on the Einstein interior.
    """
    metric = ae.metric
    point = metric.chart.check(point)
    d = metric.dim
    n = d - 1
    dic = SigmaDictionary(ae)
    gplus = dic.gplus_metric()
    f = dic.to_function(u)
    geom = geometry_at(gplus, point, 0)
    jet = JetTT.scalar(geom, f.eval_jet(point, 2), 0, 2)
    lap = jet.laplacian().comps[()].value
    jval = geom.jtrace(0).value
    fn_value = lap + (2.0 * jval / d) * float(s) * (n - float(s)) * f(point)
    sig = ae.sigma.value(point)
    return fn_value * sig ** (float(u.weight) - 1)


def i_d_contraction(u: DensityField, ae: AEStructure, point) -> WeightedValue:
    """I^A D_A u at a point (weight drops by one)."""
    metric = ae.metric
    point = metric.chart.check(point)
    geom = geometry_at(metric, point, 2)
    jet = JetTT.scalar(geom, u.field.eval_jet(point, 2), u.weight, 2)
    ivec = JetTT.from_fields(geom, ae.tractor.components, 0, 1, Fraction(0), 0)
    out = jet.thomas_D().contract_with(ivec, 0)
    return WeightedValue(out.comps[()].value, out.weight, metric)


def gjms_product_form(k: int, u_fn: ScalarField, gplus: MetricModel, point, spec: GJMSSpec | None = None) -> float:
    """P_k as the product of shifted g_+ Laplacians applied to a function."""
    point = gplus.chart.check(point)
    d = gplus.dim
    spec = spec or GJMSSpec.hyperbolic(k, d)
    geom = geometry_at(gplus, point, 0)
    jet = JetTT.scalar(geom, u_fn.eval_jet(point, k), 0, k)
    for lam in spec.lambdas:
        lap = jet.laplacian()
        jet = lap + jet.truncated(lap.order).scaled(float(lam))
    return jet.comps[()].value


def gjms_scattering_form(k: int, u_fn: ScalarField, gplus: MetricModel, point, spec: GJMSSpec | None = None) -> float:
    """P_k as the composition of scattering Laplacians (s_1 factor first)."""
    point = gplus.chart.check(point)
    d = gplus.dim
    n = d - 1
    spec = spec or GJMSSpec.hyperbolic(k, d)
    geom = geometry_at(gplus, point, 0)
    jet = JetTT.scalar(geom, u_fn.eval_jet(point, k), 0, k)
    for s in reversed(spec.s_values):  # s_1 is the last entry
        lap = jet.laplacian()
        shift = -float(s) * (n - float(s))
        jet = lap + jet.truncated(lap.order).scaled(shift)
    return jet.comps[()].value


def gjms_tractor_form(k: int, u: DensityField, ae: AEStructure, point) -> WeightedValue:
    """P_k by the parallel-tractor contraction sigma^{1-k/2} I..I Box D..D u."""
    metric = ae.metric
    point = metric.chart.check(point)
    d = metric.dim
    if abs(ae.norm_squared - 1.0) > 1e-9:
        raise ArgumentError("tractor form requires the normalised structure |I|^2 = 1")
    expected = Fraction(k - d, 2)
    if u.weight != expected:
        raise WeightError(f"P_{k} acts on weight {expected}, got {u.weight}")
    sig = ae.sigma.value(point)
    if sig <= 0:
        raise DomainError("interior points only: sigma must be positive")
    steps = (k - 2) // 2
    geom = geometry_at(metric, point, 2 * k - 2)
    jet = JetTT.scalar(geom, u.field.eval_jet(point, 2 * k - 2), u.weight, 2 * k - 2)
    ivec = JetTT.from_fields(geom, ae.tractor.components, 0, 1, Fraction(0), 2 * k - 2)
    for _ in range(steps):
        jet = jet.thomas_D()
    jet = jet.yamabe_box()
    for _ in range(steps):
        jet = jet.contract_with(ivec, 0)
    out_weight = jet.weight + (1 - Fraction(k, 2))
    value = sig ** (1 - k / 2) * jet.comps[()].value
    if out_weight != Fraction(-(k + d), 2):
        raise WeightError("weight bookkeeping failed in the tractor form")
    return WeightedValue(value, out_weight, metric)


def gjms_iterated_form(k: int, u: DensityField, ae: AEStructure, point) -> WeightedValue:
    """P_k as sigma^{-k/2} (I^A D_A)^{k/2} u (parallel-frame rewriting)."""
    metric = ae.metric
    point = metric.chart.check(point)
    d = metric.dim
    expected = Fraction(k - d, 2)
    if u.weight != expected:
        raise WeightError(f"P_{k} acts on weight {expected}, got {u.weight}")
    sig = ae.sigma.value(point)
    if sig <= 0:
        raise DomainError("interior points only: sigma must be positive")
    geom = geometry_at(metric, point, 2 * k)
    jet = JetTT.scalar(geom, u.field.eval_jet(point, k), u.weight, k)
    ivec = JetTT.from_fields(geom, ae.tractor.components, 0, 1, Fraction(0), k)
    for _ in range(k // 2):
        jet = jet.thomas_D().contract_with(ivec, 0)
    out_weight = jet.weight - Fraction(k, 2)
    value = sig ** (-k / 2) * jet.comps[()].value
    if out_weight != Fraction(-(k + d), 2):
        raise WeightError("weight bookkeeping failed in the iterated form")
    return WeightedValue(value, out_weight, metric)


def triple_agreement(k: int, u: DensityField, ae: AEStructure, points, spec=None):
    """Evaluate all forms at the probes and report pairwise relative errors.

    Every value is mapped into the g_+ trivialisation through the sigma
    dictionary before comparison.
    """
    dic = SigmaDictionary(ae)
    gplus = dic.gplus_metric()
    u_fn = dic.to_function(u)
    w_out = Fraction(-(k + ae.metric.dim), 2)
    rows = []
    for p in points:
        tractor = dic.function_value_of(gjms_tractor_form(k, u, ae, p).value, w_out, p)
        iterated = dic.function_value_of(gjms_iterated_form(k, u, ae, p).value, w_out, p)
        product = gjms_product_form(k, u_fn, gplus, p, spec)
        scatter = gjms_scattering_form(k, u_fn, gplus, p, spec)
        scale = max(abs(product), abs(scatter), abs(tractor), 1e-10)
        rows.append(
            {
                "point": [float(x) for x in p],
                "tractor": tractor,
                "iterated": iterated,
                "product": product,
                "scattering": scatter,
                "max_rel_err": max(
                    abs(tractor - product), abs(tractor - scatter),
                    abs(product - scatter), abs(iterated - product),
                )
                / scale,
            }
        )
    return rows
