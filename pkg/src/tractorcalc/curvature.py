"""Riemannian curvature quantities as exact jets at a point.

Conventions (fixed across the engine):

* ``[nabla_a, nabla_b] V^c = R_ab^c_d V^d`` defines the Riemann tensor,
  so ``R_ab^c_d = d_a Gamma^c_bd - d_b Gamma^c_ad + Gamma^c_ae Gamma^e_bd
  - Gamma^c_be Gamma^e_ad``.
* ``Ric_ab = R_ca^c_b`` (unit round sphere: Ric = (d-1) g).
* ``Delta = -g^{ab} nabla_a nabla_b`` (flat space: minus the Hessian trace).
* All-down Riemann ``R_abcd = g_ce R_ab^e_d`` decomposes as
  ``R_abcd = W_abcd + g_ca P_bd - g_cb P_ad + g_db P_ac - g_da P_bc``
  with the Schouten tensor ``P = (Ric - J g)/(d-2)``, ``J = Sc/(2(d-1))``.

Densities are handled in the trivialisation fixed by the working metric:
the coupled connection differentiates the representative and adds nothing,
so only genuine tensor indices receive Christoffel corrections.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .charts import MetricModel
from .errors import ArgumentError, CapabilityError
from .fields import DensityField, ScalarField
from .jets import Jet, jet_matrix_inverse


def _point_key(point):
    return np.asarray(point, dtype=float).tobytes()


def geometry_at(metric: MetricModel, point, order: int) -> "PointGeometry":
    """Cached per-point geometry jets for a metric model."""
    key = _point_key(point)
    geom = metric._geometry_cache.get(key)
    if geom is None:
        geom = PointGeometry(metric, point)
        metric._geometry_cache[key] = geom
    return geom


class PointGeometry:
    """Lazily computed jets of g, g^-1, Gamma, curvature at one point."""

    def __init__(self, metric: MetricModel, point):
        self.metric = metric
        self.point = metric.chart.check(point)
        self.dim = metric.dim
        self._store = {}

    def _memo(self, name, order, builder):
        hit = self._store.get(name)
        if hit is not None and hit[0] >= order:
            cached_order, arr = hit
            if cached_order == order:
                return arr
            out = np.empty(arr.shape, dtype=object)
            for idx in np.ndindex(arr.shape):
                out[idx] = arr[idx].truncate(order)
            return out
        arr = builder(order)
        self._store[name] = (order, arr)
        return arr

    # -- metric ------------------------------------------------------------
    def g(self, order):
        def build(m):
            d = self.dim
            out = np.empty((d, d), dtype=object)
            for i in range(d):
                for j in range(d):
                    out[i, j] = self.metric.components[i][j].eval_jet(self.point, m)
            return out

        return self._memo("g", order, build)

    def ginv(self, order):
        return self._memo("ginv", order, lambda m: jet_matrix_inverse(self.g(m)))

    def gamma(self, order):
        """Christoffel symbols Gamma^c_ab, indexed [c, a, b]."""

        def build(m):
            d = self.dim
            g = self.g(m + 1)
            ginv = self.ginv(m)
            dg = np.empty((d, d, d), dtype=object)  # dg[a,b,c] = d_a g_bc
            for a in range(d):
                for b in range(d):
                    for c in range(d):
                        dg[a, b, c] = g[b, c].derivative(a)
            out = np.empty((d, d, d), dtype=object)
            for c in range(d):
                for a in range(d):
                    for b in range(d):
                        acc = None
                        for e in range(d):
                            term = ginv[c, e] * (dg[a, b, e] + dg[b, a, e] - dg[e, a, b])
                            acc = term if acc is None else acc + term
                        out[c, a, b] = acc * 0.5
            return out

        return self._memo("gamma", order, build)

    def riemann_mixed(self, order):
        """R_ab^c_d indexed [a, b, c, d]."""

        def build(m):
            d = self.dim
            gam = self.gamma(m + 1)
            gam_low = self.gamma(m)
            dgam = np.empty((d, d, d, d), dtype=object)  # dgam[a,c,b,e] = d_a Gamma^c_be
            for a in range(d):
                for c in range(d):
                    for b in range(d):
                        for e in range(d):
                            dgam[a, c, b, e] = gam[c, b, e].derivative(a)
            out = np.empty((d, d, d, d), dtype=object)
            for a in range(d):
                for b in range(d):
                    for c in range(d):
                        for dd in range(d):
                            acc = dgam[a, c, b, dd] - dgam[b, c, a, dd]
                            for e in range(d):
                                acc = acc + gam_low[c, a, e] * gam_low[e, b, dd]
                                acc = acc - gam_low[c, b, e] * gam_low[e, a, dd]
                            out[a, b, c, dd] = acc
            return out

        return self._memo("riemann_mixed", order, build)

    def riemann_down(self, order):
        """R_abcd = g_ce R_ab^e_d."""

        def build(m):
            d = self.dim
            g = self.g(m)
            rm = self.riemann_mixed(m)
            out = np.empty((d, d, d, d), dtype=object)
            for a in range(d):
                for b in range(d):
                    for c in range(d):
                        for dd in range(d):
                            acc = None
                            for e in range(d):
                                term = g[c, e] * rm[a, b, e, dd]
                                acc = term if acc is None else acc + term
                            out[a, b, c, dd] = acc
            return out

        return self._memo("riemann_down", order, build)

    def ricci(self, order):
        def build(m):
            d = self.dim
            rm = self.riemann_mixed(m)
            out = np.empty((d, d), dtype=object)
            for a in range(d):
                for b in range(d):
                    acc = None
                    for c in range(d):
                        term = rm[c, a, c, b]
                        acc = term if acc is None else acc + term
                    out[a, b] = acc
            return out

        return self._memo("ricci", order, build)

    def scalar_curvature(self, order):
        def build(m):
            d = self.dim
            ginv = self.ginv(m)
            ric = self.ricci(m)
            acc = None
            for a in range(d):
                for b in range(d):
                    term = ginv[a, b] * ric[a, b]
                    acc = term if acc is None else acc + term
            out = np.empty((), dtype=object)
            out[()] = acc
            return out

        return self._memo("scal", order, build)[()]

    def jtrace(self, order):
        """J = Sc / (2(d-1)), the conformal-metric trace of Schouten."""
        return self.scalar_curvature(order) * (1.0 / (2 * (self.dim - 1)))

    def schouten(self, order):
        def build(m):
            d = self.dim
            ric = self.ricci(m)
            g = self.g(m)
            j = self.jtrace(m)
            out = np.empty((d, d), dtype=object)
            for a in range(d):
                for b in range(d):
                    out[a, b] = (ric[a, b] - j * g[a, b]) * (1.0 / (d - 2))
            return out

        return self._memo("schouten", order, build)

    def schouten_mixed(self, order):
        """P_a^b = g^{bc} P_ac."""

        def build(m):
            d = self.dim
            p = self.schouten(m)
            ginv = self.ginv(m)
            out = np.empty((d, d), dtype=object)
            for a in range(d):
                for b in range(d):
                    acc = None
                    for c in range(d):
                        term = ginv[b, c] * p[a, c]
                        acc = term if acc is None else acc + term
                    out[a, b] = acc
            return out

        return self._memo("schouten_mixed", order, build)

    def weyl_down(self, order):
        def build(m):
            d = self.dim
            r = self.riemann_down(m)
            p = self.schouten(m)
            g = self.g(m)
            out = np.empty((d, d, d, d), dtype=object)
            for a in range(d):
                for b in range(d):
                    for c in range(d):
                        for dd in range(d):
                            out[a, b, c, dd] = r[a, b, c, dd] - (
                                g[c, a] * p[b, dd]
                                - g[c, b] * p[a, dd]
                                + g[dd, b] * p[a, c]
                                - g[dd, a] * p[b, c]
                            )
            return out

        return self._memo("weyl", order, build)

    def tractor_pairing(self, order):
        """Slot pairing of rank-1 tractor components (sigma, mu_a, rho):
        antidiagonal on the (Y, X) pair plus g^{ab} on the middle block."""

        def build(m):
            d = self.dim
            ginv = self.ginv(m)
            space = ginv[0, 0].space
            zero = Jet.constant(space, 0.0)
            one = Jet.constant(space, 1.0)
            out = np.empty((d + 2, d + 2), dtype=object)
            out[...] = zero
            out[0, d + 1] = one
            out[d + 1, 0] = one
            for a in range(d):
                for b in range(d):
                    out[1 + a, 1 + b] = ginv[a, b]
            return out

        return self._memo("tractor_pairing", order, build)


def _values(arr):
    out = np.empty(arr.shape, dtype=float)
    for idx in np.ndindex(arr.shape):
        out[idx] = arr[idx].value
    return out


@dataclass
class CurvaturePack:
    """Pointwise curvature report in the working scale."""

    point: np.ndarray
    Gamma: np.ndarray   # Gamma^c_ab, [c, a, b]
    R: np.ndarray       # R_abcd, all indices down
    Ric: np.ndarray
    Sc: float
    W: np.ndarray       # Weyl, all indices down
    P: np.ndarray       # Schouten
    J: float

    def decomposition_residual(self, g: np.ndarray) -> float:
        """Max-abs defect of reassembling R from W, P and g."""
        d = g.shape[0]
        rebuilt = self.W.copy()
        for a in range(d):
            for b in range(d):
                for c in range(d):
                    for e in range(d):
                        rebuilt[a, b, c, e] += (
                            g[c, a] * self.P[b, e]
                            - g[c, b] * self.P[a, e]
                            + g[e, b] * self.P[a, c]
                            - g[e, a] * self.P[b, c]
                        )
        return float(np.max(np.abs(rebuilt - self.R)))


def curvature_pack(metric: MetricModel, point) -> CurvaturePack:
    """All curvature pieces of the metric at one point.

    Raises DomainError off the chart and CapabilityError if the metric
    components cannot supply two derivatives.
    """
    geom = geometry_at(metric, point, 0)
    try:
        gamma = geom.gamma(0)
        riem = geom.riemann_down(0)
    except CapabilityError:
        raise CapabilityError("metric jets of order >= 2 required for curvature") from None
    return CurvaturePack(
        point=np.asarray(point, dtype=float),
        Gamma=_values(gamma),
        R=_values(riem),
        Ric=_values(geom.ricci(0)),
        Sc=geom.scalar_curvature(0).value,
        W=_values(geom.weyl_down(0)),
        P=_values(geom.schouten(0)),
        J=geom.jtrace(0).value,
    )


@dataclass
class TensorValue:
    """Tensor (possibly density-weighted) components at a point, one scale."""

    components: np.ndarray
    variance: tuple  # 'd' (down) or 'u' (up) per slot
    weight: Fraction
    point: np.ndarray
    scale: MetricModel

    def raise_index(self, slot: int) -> "TensorValue":
        if self.variance[slot] != "d":
            raise ArgumentError("slot is already an upper index")
        ginv = _values(geometry_at(self.scale, self.point, 0).ginv(0))
        comps = np.tensordot(ginv, np.moveaxis(self.components, slot, 0), axes=(1, 0))
        comps = np.moveaxis(comps, 0, slot)
        variance = tuple("u" if k == slot else v for k, v in enumerate(self.variance))
        return TensorValue(comps, variance, self.weight - 2, self.point, self.scale)

    def lower_index(self, slot: int) -> "TensorValue":
        if self.variance[slot] != "u":
            raise ArgumentError("slot is already a lower index")
        g = self.scale.component_matrix(self.point)
        comps = np.tensordot(g, np.moveaxis(self.components, slot, 0), axes=(1, 0))
        comps = np.moveaxis(comps, 0, slot)
        variance = tuple("d" if k == slot else v for k, v in enumerate(self.variance))
        return TensorValue(comps, variance, self.weight + 2, self.point, self.scale)


class TensorField:
    """Tensor-valued field: an array of scalar component fields plus variance."""

    def __init__(self, components, variance, weight, scale):
        self.components = np.asarray(components, dtype=object)
        self.variance = tuple(variance)
        self.weight = weight if isinstance(weight, Fraction) else Fraction(weight)
        self.scale = scale
        if self.components.ndim != len(self.variance):
            raise ArgumentError("variance list does not match component rank")

    def value(self, point) -> TensorValue:
        comps = np.empty(self.components.shape, dtype=float)
        for idx in np.ndindex(self.components.shape):
            comps[idx] = self.components[idx](point)
        return TensorValue(comps, self.variance, self.weight, np.asarray(point, float), self.scale)

    def jets(self, point, order):
        out = np.empty(self.components.shape, dtype=object)
        for idx in np.ndindex(self.components.shape):
            out[idx] = self.components[idx].eval_jet(point, order)
        return out


def _as_tensorish(fieldlike, metric):
    """Normalise DensityField / ScalarField / TensorField to (jets fn, variance, weight)."""
    if isinstance(fieldlike, DensityField):
        return fieldlike.field, (), fieldlike.weight
    if isinstance(fieldlike, ScalarField):
        return fieldlike, (), Fraction(0)
    if isinstance(fieldlike, TensorField):
        return fieldlike, fieldlike.variance, fieldlike.weight
    raise ArgumentError(f"cannot differentiate object of type {type(fieldlike).__name__}")


def levi_civita_apply(fieldlike, metric: MetricModel, point) -> TensorValue:
    """Coupled Levi-Civita derivative at a point; adds one down index in slot 0.

    Densities contribute no connection term in their own trivialisation;
    tensor slots receive the usual Christoffel corrections.
    """
    src, variance, weight = _as_tensorish(fieldlike, metric)
    point = metric.chart.check(point)
    d = metric.dim
    geom = geometry_at(metric, point, 0)
    gamma = _values(geom.gamma(0))

    if isinstance(src, ScalarField):
        jet = src.eval_jet(point, 1)
        comps = np.array([jet.derivative(a).value for a in range(d)])
        return TensorValue(comps, ("d",), weight, point, metric)

    jets = src.jets(point, 1)
    shape = jets.shape
    out = np.empty((d,) + shape, dtype=float)
    for a in range(d):
        for idx in np.ndindex(shape):
            val = jets[idx].derivative(a).value
            for slot, var in enumerate(variance):
                for c in range(d):
                    jdx = list(idx)
                    jdx[slot] = c
                    if var == "d":
                        val -= gamma[c, a, idx[slot]] * jets[tuple(jdx)].value
                    else:
                        val += gamma[idx[slot], a, c] * jets[tuple(jdx)].value
            out[(a,) + idx] = val
    return TensorValue(out, ("d",) + variance, weight, point, metric)


def laplacian(fieldlike, metric: MetricModel, point) -> float:
    """Delta = -g^{ab} nabla_a nabla_b on a scalar (density) field."""
    src, variance, _ = _as_tensorish(fieldlike, metric)
    if variance != ():
        raise ArgumentError("laplacian() here is for scalar/density fields")
    point = metric.chart.check(point)
    d = metric.dim
    geom = geometry_at(metric, point, 0)
    ginv = _values(geom.ginv(0))
    gamma = _values(geom.gamma(0))
    jet = src.eval_jet(point, 2)
    hess = np.empty((d, d))
    grad = np.empty(d)
    for a in range(d):
        da = jet.derivative(a)
        grad[a] = da.value
        for b in range(d):
            hess[a, b] = da.derivative(b).value
    cov_hess = hess - np.tensordot(gamma, grad, axes=(0, 0))
    return float(-np.sum(ginv * cov_hess))
