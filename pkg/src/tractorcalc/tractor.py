"""Standard tractor bundle in a scale.

Rank-1 tractors are stored as the slot triple (sigma, mu_a, rho) of an
identified direct sum E[w+1] + E_a[w+1] + E[w-1]; the tractor metric is
``h(U, V) = sigma_U rho_V + rho_U sigma_V + g^{ab} mu_a mu_b`` (signature
(d+1, 1)).  The component transformation under ``g -> exp(2 omega) g`` with
``Upsilon = d omega`` is the unique triangular law preserving h and
compatible with the parallel-tractor slot formula; both properties are
asserted in the tests rather than assumed:

    sigma -> sigma
    mu_a  -> mu_a + Upsilon_a sigma
    rho   -> rho - Upsilon^a mu_a - (1/2) Upsilon^a Upsilon_a sigma

followed by re-expressing each slot representative in the new scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .charts import MetricModel
from .curvature import geometry_at
from .errors import ArgumentError, ScaleError, WeightError
from .fields import DensityField, ScalarField, omega_between
from .jetobjects import JetTT


def _as_weight(w):
    return w if isinstance(w, Fraction) else Fraction(w)


@dataclass
class WeightedValue:
    """A conformal-density value: number plus weight plus scale tag."""

    value: float
    weight: Fraction
    scale: MetricModel


@dataclass
class TractorValue:
    """Rank-r tractor components at a point, in a fixed scale."""

    components: np.ndarray  # shape (d+2,) * rank
    weight: Fraction
    scale: MetricModel
    point: np.ndarray

    @property
    def rank(self):
        return self.components.ndim

    @property
    def sigma(self):
        if self.rank != 1:
            raise ArgumentError("slot projection defined for rank 1")
        return float(self.components[0])

    @property
    def mu(self):
        d = self.scale.dim
        return np.asarray(self.components[1 : d + 1], dtype=float)

    @property
    def rho(self):
        return float(self.components[-1])


class TractorField:
    """Tractor-valued field: slot components as scalar fields, jets included."""

    def __init__(self, components, weight, scale: MetricModel):
        self.components = np.asarray(components, dtype=object)
        self.weight = _as_weight(weight)
        self.scale = scale
        self.rank = self.components.ndim
        d = scale.dim
        if self.components.shape != (d + 2,) * self.rank:
            raise ArgumentError("tractor component array has wrong shape")

    @staticmethod
    def from_slots(sigma: ScalarField, mu, rho: ScalarField, weight, scale) -> "TractorField":
        comps = np.empty(scale.dim + 2, dtype=object)
        comps[0] = sigma
        for a in range(scale.dim):
            comps[1 + a] = mu[a]
        comps[-1] = rho
        return TractorField(comps, weight, scale)

    def value(self, point) -> TractorValue:
        point = self.scale.chart.check(point)
        vals = np.empty(self.components.shape, dtype=float)
        for idx in np.ndindex(self.components.shape):
            vals[idx] = self.components[idx](point)
        return TractorValue(vals, self.weight, self.scale, point)

    def jet(self, point, order) -> JetTT:
        geom = geometry_at(self.scale, point, order)
        return JetTT.from_fields(geom, self.components, 0, self.rank, self.weight, order)


def _check_compatible(u: TractorValue, v: TractorValue):
    if u.scale is not v.scale:
        raise ScaleError("tractor pairing requires a common scale; rescale explicitly")
    if not np.array_equal(u.point, v.point):
        raise ArgumentError("tractor pairing requires a common base point")


def tractor_metric(u: TractorValue, v: TractorValue) -> WeightedValue:
    """h(U, V) = sigma_U rho_V + rho_U sigma_V + g^{ab} mu_Ua mu_Vb."""
    _check_compatible(u, v)
    if u.rank != 1 or v.rank != 1:
        raise ArgumentError("tractor_metric is the rank-1 pairing")
    d = u.scale.dim
    ginv = np.linalg.inv(u.scale.component_matrix(u.point))
    val = u.sigma * v.rho + u.rho * v.sigma + float(u.mu @ ginv @ v.mu)
    return WeightedValue(val, u.weight + v.weight, u.scale)


def slot_pairing_matrix(scale: MetricModel, point) -> np.ndarray:
    """Numeric (d+2)x(d+2) pairing of slot components at a point."""
    d = scale.dim
    ginv = np.linalg.inv(scale.component_matrix(point))
    h = np.zeros((d + 2, d + 2))
    h[0, d + 1] = h[d + 1, 0] = 1.0
    h[1 : d + 1, 1 : d + 1] = ginv
    return h


def rescale_tractor(u, target: MetricModel):
    """Re-express a tractor (value or field) in a conformally related scale.

    Higher rank transforms by the slotwise tensor action of the rank-1 law.
    """
    if isinstance(u, TractorField):
        return _rescale_field(u, target)
    return _rescale_value(u, target)


def _transformation_entries(scale, target, point=None):
    """Slot mixing data: Upsilon_a (down), Upsilon^a, |Upsilon|^2, omega."""
    omega = omega_between(scale, target)
    if omega is None:
        return None
    if point is None:
        return omega

    def at(p):
        ups = omega.gradient(p)
        ginv = np.linalg.inv(scale.component_matrix(p))
        ups_up = ginv @ ups
        return ups, ups_up, float(ups @ ups_up), omega(p)

    return at(point)


def _mixing_matrix(d, ups, ups_up, ups2):
    m = np.eye(d + 2)
    m[1 : d + 1, 0] = ups
    m[d + 1, 1 : d + 1] = -ups_up
    m[d + 1, 0] = -0.5 * ups2
    return m


def _slot_shift_factors(d, weight, omega_val):
    shifts = np.full(d + 2, 1.0)
    shifts[d + 1] = -1.0
    return np.exp((float(weight) + shifts) * omega_val), shifts


def _rescale_value(u: TractorValue, target) -> TractorValue:
    data = _transformation_entries(u.scale, target, u.point)
    if data is None:
        return TractorValue(u.components.copy(), u.weight, target, u.point)
    ups, ups_up, ups2, omega_val = data
    d = u.scale.dim
    m = _mixing_matrix(d, ups, ups_up, ups2)
    comps = u.components
    for axis in range(u.rank):
        comps = np.moveaxis(np.tensordot(m, np.moveaxis(comps, axis, 0), axes=(1, 0)), 0, axis)
    # representative factor exp((w + sum of slot shifts) * omega)
    shifts = np.full(d + 2, 1.0)
    shifts[d + 1] = -1.0
    total = np.zeros(comps.shape)
    for idx in np.ndindex(comps.shape):
        total[idx] = sum(shifts[s] for s in idx)
    comps = comps * np.exp((float(u.weight) + total) * omega_val)
    return TractorValue(comps, u.weight, target, u.point)


def _rescale_field(u: TractorField, target) -> TractorField:
    omega = omega_between(u.scale, target)
    if omega is None:
        return TractorField(u.components.copy(), u.weight, target)
    d = u.scale.dim
    ups = [omega.partial(a) for a in range(d)]
    ginv_fields = _metric_inverse_fields(u.scale)
    ups_up = [sum(ginv_fields[a][b] * ups[b] for b in range(d)) for a in range(d)]
    ups2 = sum(ups[a] * ups_up[a] for a in range(d))
    shifts = np.full(d + 2, 1.0)
    shifts[d + 1] = -1.0

    out = np.empty(u.components.shape, dtype=object)
    for idx in np.ndindex(u.components.shape):
        acc = None
        # slotwise action of the mixing matrix on every tractor axis
        for src in _mixing_sources(idx, d, ups, ups_up, ups2):
            coeff, jdx = src
            term = u.components[jdx] if coeff is None else coeff * u.components[jdx]
            acc = term if acc is None else acc + term
        factor = ((float(u.weight) + sum(shifts[s] for s in idx)) * omega).exp()
        out[idx] = acc * factor
    return TractorField(out, u.weight, target)


def _mixing_sources(idx, d, ups, ups_up, ups2):
    """Expand the tensor action of the mixing matrix into (coeff, index) terms."""
    terms = [(None, ())]
    for s in idx:
        new_terms = []
        for coeff, prefix in terms:
            if s == 0:
                new_terms.append((coeff, prefix + (0,)))
            elif s <= d:
                new_terms.append((coeff, prefix + (s,)))
                c = ups[s - 1] if coeff is None else coeff * ups[s - 1]
                new_terms.append((c, prefix + (0,)))
            else:
                new_terms.append((coeff, prefix + (d + 1,)))
                for b in range(d):
                    c = -ups_up[b] if coeff is None else coeff * (-1.0) * ups_up[b]
                    new_terms.append((c, prefix + (1 + b,)))
                c = -0.5 * ups2 if coeff is None else coeff * (-0.5) * ups2
                new_terms.append((c, prefix + (0,)))
        terms = new_terms
    return [(c, jdx) for c, jdx in terms]


_METRIC_INV_CACHE = {}


def _metric_inverse_fields(metric: MetricModel):
    """Inverse-metric entries as scalar fields (shared per metric)."""
    cached = _METRIC_INV_CACHE.get(id(metric))
    if cached is not None:
        return cached
    d = metric.dim

    def entry(i, j):
        def fn(p, m):
            geom = geometry_at(metric, p, m)
            return geom.ginv(m)[i, j]

        return ScalarField(d, fn, max_order=None)

    fields = [[entry(i, j) for j in range(d)] for i in range(d)]
    _METRIC_INV_CACHE[id(metric)] = fields
    return fields


# -- field-level invariant operators -----------------------------------------

def _tractor_source(field):
    """(components array, rank, weight, scale) for density or tractor input."""
    if isinstance(field, DensityField):
        comps = np.empty((), dtype=object)
        comps[()] = field.field
        return comps, 0, field.weight, field.scale
    if isinstance(field, TractorField):
        return field.components, field.rank, field.weight, field.scale
    raise ArgumentError("expected a DensityField or TractorField")


def _jet_of(field, metric, point, order) -> JetTT:
    comps, rank, weight, scale = _tractor_source(field)
    if scale is not metric:
        raise ScaleError("field is expressed in a different scale than the metric")
    geom = geometry_at(metric, point, order)
    return JetTT.from_fields(geom, comps, 0, rank, weight, order)


def _derived_component_fields(src_field, metric, consumed, jet_op, out_shape, out_weight):
    """Build a tractor/density field whose components extract one jet op."""
    cache = {}
    dim = metric.dim

    def component(idx):
        def fn(p, m):
            key = (p.tobytes(), m)
            hit = cache.get(key)
            if hit is None:
                hit = jet_op(_jet_of(src_field, metric, p, m + consumed))
                cache[key] = hit
            return hit.comps[idx]

        comps, _, _, _ = _tractor_source(src_field)
        budgets = [f.max_order for f in comps.flat if f.max_order is not None]
        cap = min(budgets) - consumed if budgets else None
        return ScalarField(dim, fn, max_order=cap)

    out = np.empty(out_shape, dtype=object)
    for idx in np.ndindex(out_shape):
        out[idx] = component(idx)
    return out


def tractor_connection(ufield: TractorField, metric: MetricModel, point):
    """Coupled tractor derivative of a rank-1 field at a point.

    Returns (components, weight): components shaped (d, d+2), first axis the
    new covector slot, exactly (nabla sigma - mu, nabla mu + g rho + P sigma,
    nabla rho - P mu) in the working scale.
    """
    jet = _jet_of(ufield, metric, point, 1)
    out = jet.grad()
    return out.values(), out.weight


def connection_defect(ufield: TractorField, metric: MetricModel, point) -> float:
    vals, _ = tractor_connection(ufield, metric, point)
    return float(np.max(np.abs(vals)))


def thomas_D(field, metric: MetricModel | None = None) -> TractorField:
    """Thomas tractor-D as a field: rank r -> r+1, weight w -> w-1."""
    comps, rank, weight, scale = _tractor_source(field)
    metric = metric or scale
    d = metric.dim
    out_shape = (d + 2,) * (rank + 1)
    out = _derived_component_fields(field, metric, 2, lambda j: j.thomas_D(), out_shape, weight - 1)
    return TractorField(out, weight - 1, metric)


def thomas_D_value(field, metric: MetricModel, point, order=0) -> JetTT:
    return _jet_of(field, metric, point, order + 2).thomas_D()


def yamabe_box(field, metric: MetricModel, point) -> JetTT:
    """Tractor-twisted Yamabe operator at weight 1 - d/2 (strong invariance)."""
    return _jet_of(field, metric, point, 2).yamabe_box()


def box_k(k: int, ufield: DensityField, metric: MetricModel, point) -> WeightedValue:
    """Conformal Laplacian power built from D ... D Box D ... D.

    Acts on densities of weight (k-d)/2; no normalisation is divided out, so
    the leading term is a nonzero constant times Delta^{k/2}.
    """
    if k % 2 != 0 or k < 2:
        raise ArgumentError("box_k needs even k >= 2")
    d = metric.dim
    expected = Fraction(k - d, 2)
    if _as_weight(ufield.weight) != expected:
        raise WeightError(f"box_{k} acts on weight {expected}, got {ufield.weight}")
    if d % 2 == 0 and k >= d:
        import warnings

        warnings.warn(
            f"k={k} >= d={d} even: leading-term normal form is not guaranteed", stacklevel=2
        )
    steps = (k - 2) // 2
    jet = _jet_of(ufield, metric, point, 2 * k - 2)
    for _ in range(steps):
        jet = jet.thomas_D()
    jet = jet.yamabe_box()
    for _ in range(steps):
        jet = jet.thomas_D()
        jet = jet.contract_tractor(0, 1)
    if jet.weight != Fraction(-(k + d), 2):
        raise WeightError("internal weight bookkeeping failed in box_k")
    return WeightedValue(jet.comps[()].value, jet.weight, metric)


def laplacian_field(field, metric: MetricModel) -> ScalarField:
    """Delta of a scalar density as a field (used to assemble tractors)."""
    comps, rank, weight, _ = _tractor_source(field)
    if rank != 0:
        raise ArgumentError("laplacian_field expects a scalar density")
    src = comps[()]

    def fn(p, m):
        geom = geometry_at(metric, p, m)
        jet = JetTT.scalar(geom, src.eval_jet(p, m + 2), weight, m + 2)
        return jet.laplacian().comps[()]

    cap = None if src.max_order is None else src.max_order - 2
    return ScalarField(metric.dim, fn, max_order=cap)


def jtrace_field(metric: MetricModel) -> ScalarField:
    def fn(p, m):
        return geometry_at(metric, p, m).jtrace(m)

    return ScalarField(metric.dim, fn, max_order=None)
