"""Scalar and density fields with exact jet evaluation.

A :class:`ScalarField` is a rule ``point -> Jet``: evaluating at order m
returns the value together with all partial derivatives up to order m.
Fields are closed under arithmetic, analytic composition, differentiation
and pullback along smooth maps, so everything the engine builds out of the
closed-form model ingredients stays exactly differentiable.

A :class:`DensityField` is a conformal density of weight w: a scalar
representative in a tagged scale that picks up ``exp(w * omega)`` when the
scale changes by ``g -> exp(2 omega) g``.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import ArgumentError, CapabilityError, ScaleError
from .jets import Jet, jet_space

DEFAULT_JET_ORDER = 6


def _as_weight(w) -> Fraction:
    return w if isinstance(w, Fraction) else Fraction(w)


class ScalarField:
    """Smooth scalar function on a chart, evaluable as a jet at any point."""

    def __init__(self, dim: int, fn: Callable[[np.ndarray, int], Jet], max_order: int | None = DEFAULT_JET_ORDER):
        self.dim = dim
        self._fn = fn
        self.max_order = max_order
        self._memo = {}

    def eval_jet(self, point, order: int) -> Jet:
        if self.max_order is not None and order > self.max_order:
            raise CapabilityError(
                f"jet order {order} exceeds this field's budget {self.max_order}"
            )
        point = np.asarray(point, dtype=float)
        key = (point.tobytes(), order)
        hit = self._memo.get(key)
        if hit is None:
            hit = self._fn(point, order)
            if len(self._memo) > 256:
                self._memo.clear()
            self._memo[key] = hit
        return hit

    def __call__(self, point) -> float:
        return self.eval_jet(point, 0).value

    def gradient(self, point) -> np.ndarray:
        return self.eval_jet(point, 1).gradient()

    # -- arithmetic -------------------------------------------------------
    @staticmethod
    def _lift(other, dim):
        if isinstance(other, ScalarField):
            return other
        value = float(other)
        return ScalarField(dim, lambda p, m: Jet.constant(jet_space(dim, m), value), max_order=None)

    def _combine(self, other, op):
        other = ScalarField._lift(other, self.dim)
        if other.dim != self.dim:
            raise ArgumentError("field dimension mismatch")
        budgets = [b for b in (self.max_order, other.max_order) if b is not None]
        cap = min(budgets) if budgets else None
        return ScalarField(self.dim, lambda p, m: op(self.eval_jet(p, m), other.eval_jet(p, m)), max_order=cap)

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._combine(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._combine(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._combine(other, lambda a, b: a / b)

    def __rtruediv__(self, other):
        return self._combine(other, lambda a, b: b / a)

    def __neg__(self):
        return ScalarField(self.dim, lambda p, m: -self.eval_jet(p, m), max_order=self.max_order)

    def __pow__(self, expo):
        return ScalarField(self.dim, lambda p, m: self.eval_jet(p, m) ** expo, max_order=self.max_order)

    # -- analytic composition ----------------------------------------------
    def _unary(self, name):
        return ScalarField(
            self.dim, lambda p, m: getattr(self.eval_jet(p, m), name)(), max_order=self.max_order
        )

    def exp(self):
        return self._unary("exp")

    def log(self):
        return self._unary("log")

    def sqrt(self):
        return self._unary("sqrt")

    def sin(self):
        return self._unary("sin")

    def cos(self):
        return self._unary("cos")

    # -- calculus -------------------------------------------------------------
    def partial(self, axis: int) -> "ScalarField":
        cap = None if self.max_order is None else self.max_order - 1
        return ScalarField(
            self.dim, lambda p, m: self.eval_jet(p, m + 1).derivative(axis), max_order=cap
        )

    def pullback(self, maps: Sequence["ScalarField"]) -> "ScalarField":
        """The composite field ``u -> self(maps(u))`` on the maps' chart."""
        if len(maps) != self.dim:
            raise ArgumentError("pullback needs one map component per ambient coordinate")
        udim = maps[0].dim

        def fn(u, m):
            arg_jets = [f.eval_jet(u, m) for f in maps]
            base_point = np.array([j.value for j in arg_jets])
            return self.eval_jet(base_point, m).substitute(arg_jets)

        budgets = [b for b in [self.max_order] + [f.max_order for f in maps] if b is not None]
        return ScalarField(udim, fn, max_order=min(budgets) if budgets else None)


def constant_field(dim: int, value: float) -> ScalarField:
    v = float(value)
    return ScalarField(dim, lambda p, m: Jet.constant(jet_space(dim, m), v), max_order=None)


def coordinate_field(dim: int, axis: int) -> ScalarField:
    if not 0 <= axis < dim:
        raise ArgumentError("coordinate axis out of range")
    return ScalarField(dim, lambda p, m: Jet.variable(jet_space(dim, m), p, axis), max_order=None)


def coordinate_fields(dim: int) -> list[ScalarField]:
    return [coordinate_field(dim, a) for a in range(dim)]


def radius_squared_field(dim: int) -> ScalarField:
    terms = {}
    for i in range(dim):
        alpha = tuple(2 if k == i else 0 for k in range(dim))
        terms[alpha] = 1.0
    return polynomial_field(dim, terms)


def polynomial_field(dim: int, terms: dict) -> ScalarField:
    """Polynomial from ``{multi-index tuple: coefficient}``.

    The jet at a point is the Taylor shift of the coefficient list, done with
    precomputed index/binomial tables, so polynomial fields (the workhorse of
    every model metric) evaluate in vectorised numpy time.
    """
    import itertools as _it
    import math as _math

    items = [(tuple(a), float(c)) for a, c in terms.items() if float(c) != 0.0]
    degree = max((sum(a) for a, _ in items), default=0)
    space = jet_space(dim, degree)

    # tables: out position, flat power-exponent rows, binomial * coefficient
    out_pos, exponents, binco = [], [], []
    for beta, coef in items:
        ranges = [range(b + 1) for b in beta]
        for alpha in _it.product(*ranges):
            out_pos.append(space.position[alpha])
            exponents.append([b - a for b, a in zip(beta, alpha)])
            binco.append(coef * _math.prod(_math.comb(b, a) for b, a in zip(beta, alpha)))
    out_pos = np.asarray(out_pos, dtype=np.intp)
    exponents = np.asarray(exponents, dtype=float)
    binco = np.asarray(binco, dtype=float)

    def fn(p, m):
        vals = binco * np.prod(p[None, :] ** exponents, axis=1) if len(binco) else np.zeros(0)
        c = np.bincount(out_pos, weights=vals, minlength=space.n) if len(binco) else np.zeros(space.n)
        jet = Jet(space, c)
        return jet.extend(m) if m >= degree else jet.truncate(m)

    return ScalarField(dim, fn, max_order=None)


def random_polynomial_field(dim: int, rng, degree: int = 3, scale: float = 1.0) -> ScalarField:
    """Random dense polynomial; used for probe sections and test bumps."""
    space = jet_space(dim, degree)
    terms = {}
    for alpha in space.alphas:
        terms[alpha] = scale * rng.uniform(-1.0, 1.0)
    return polynomial_field(dim, terms)


class DensityField:
    """Conformal density of weight w, held as a representative in one scale."""

    def __init__(self, weight, field: ScalarField, scale):
        self.weight = _as_weight(weight)
        self.field = field
        self.scale = scale  # a MetricModel fixing the trivialisation

    @property
    def dim(self):
        return self.field.dim

    def value(self, point) -> float:
        return self.field(point)

    def eval_jet(self, point, order: int) -> Jet:
        return self.field.eval_jet(point, order)

    def in_scale(self, target) -> "DensityField":
        """Re-express the representative in another scale of the same class."""
        omega = omega_between(self.scale, target)
        if omega is None:
            return DensityField(self.weight, self.field, target)
        factor = (float(self.weight) * omega).exp()
        return DensityField(self.weight, self.field * factor, target)

    def __add__(self, other):
        if isinstance(other, DensityField):
            if other.weight != self.weight:
                raise ArgumentError("cannot add densities of different weights")
            other = other.in_scale(self.scale).field
        return DensityField(self.weight, self.field + other, self.scale)

    def __mul__(self, other):
        if isinstance(other, DensityField):
            if other.scale is not self.scale:
                other = other.in_scale(self.scale)
            return DensityField(self.weight + other.weight, self.field * other.field, self.scale)
        return DensityField(self.weight, self.field * other, self.scale)

    __rmul__ = __mul__


def omega_between(scale_a, scale_b):
    """ScalarField omega with g_b = exp(2 omega) g_a, or None if identical.

    Scales are related only through recorded conformal rescalings; anything
    else is an error the caller must handle explicitly.
    """
    if scale_a is scale_b:
        return None
    ancestors_a = {id(m): om for m, om in _scale_chain(scale_a)}
    for m_b, om_b in _scale_chain(scale_b):
        om_a = ancestors_a.get(id(m_b))
        if om_a is not None:
            return om_b - om_a
    raise ScaleError("scales are not conformally related through recorded rescalings")


def _scale_chain(scale):
    """[(ancestor metric, omega from ancestor to scale)] walking down to the root."""
    chain = []
    omega_total = constant_field(scale.chart.dim, 0.0)
    current = scale
    chain.append((current, omega_total))
    while getattr(current, "base", None) is not None:
        omega_total = omega_total + current.omega
        current = current.base
        chain.append((current, omega_total))
    return chain
