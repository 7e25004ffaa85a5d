"""Coordinate charts and closed-form metric models.

Built-in families:

* ``flat``            -- Euclidean metric on R^d.
* ``sphere(r)``       -- round sphere of radius r in the stereographic chart,
                         components ``4 r^4 / (r^2 + |y|^2)^2 delta``.
* ``hyperbolic_ball`` -- Poincare ball, ``4 (1 - |y|^2)^-2 delta`` on |y| < 1,
                         so Ric = -(d-1) g.
* ``conformal_rescale(omega, base)`` -- ``exp(2 omega)`` times a base model,
                         evaluated exactly through field arithmetic.
* ``cap_pullback``    -- metrics descended from the null-cone model
                         (constructed in :mod:`tractorcalc.model_cone`).

A MetricModel doubles as the tag for the conformal scale (trivialisation of
the density bundles) that it induces.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ArgumentError, DomainError
from .fields import (
    ScalarField,
    constant_field,
    coordinate_fields,
    radius_squared_field,
)

BOUNDARY_MARGIN = 0.05  # random samples stay this far inside chart boundaries


@dataclass(frozen=True)
class Chart:
    """An open coordinate domain with a validity predicate."""

    dim: int
    names: tuple
    is_valid: Callable[[np.ndarray], bool]
    description: str = ""

    def __post_init__(self):
        if self.dim < 3:
            raise ArgumentError("charts require dimension >= 3")

    def check(self, point):
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            raise DomainError(f"point has shape {point.shape}, chart dimension is {self.dim}")
        if not self.is_valid(point):
            raise DomainError(f"point {point} outside chart '{self.description}'")
        return point


def _coordinate_names(dim):
    return tuple(f"y{i}" for i in range(dim))


def euclidean_chart(dim, bound=1e6, description="euclidean"):
    return Chart(dim, _coordinate_names(dim), lambda p: float(np.dot(p, p)) < bound**2, description)


def ball_chart(dim, description="open unit ball"):
    return Chart(dim, _coordinate_names(dim), lambda p: float(np.dot(p, p)) < 1.0, description)


class MetricModel:
    """A metric from a closed-form family, with exact component jets."""

    _counter = itertools.count()

    def __init__(self, chart: Chart, components, family: str, params=None, base=None, omega=None, name=None):
        self.chart = chart
        self.components = components  # (d, d) object array of ScalarField
        self.family = family
        self.params = dict(params or {})
        self.base = base        # metric this one conformally rescales, if any
        self.omega = omega      # ScalarField with g = exp(2 omega) base
        self.scale_id = name or f"{family}#{next(MetricModel._counter)}"
        self._geometry_cache = {}
        d = chart.dim
        if d >= 4:
            self.small_dimension_warning = None
        else:
            self.small_dimension_warning = (
                "dimension 3: statements assuming ambient dimension >= 4 may not apply"
            )

    @property
    def dim(self):
        return self.chart.dim

    def component_matrix(self, point) -> np.ndarray:
        point = self.chart.check(point)
        d = self.dim
        return np.array([[self.components[i][j](point) for j in range(d)] for i in range(d)])

    def check_positive_definite(self, point):
        g = self.component_matrix(point)
        if not np.allclose(g, g.T, atol=1e-12):
            raise ArgumentError("metric components are not symmetric")
        if np.min(np.linalg.eigvalsh(g)) <= 0:
            raise ArgumentError("metric is not positive definite at this point")
        return g

    def conformal_rescale(self, omega: ScalarField, name=None) -> "MetricModel":
        """The metric ``exp(2 omega) g``, exactly."""
        d = self.dim
        factor = (2.0 * omega).exp()
        comps = [[factor * self.components[i][j] for j in range(d)] for i in range(d)]
        return MetricModel(
            self.chart,
            comps,
            "conformal_rescale",
            params={"base_family": self.family},
            base=self,
            omega=omega,
            name=name,
        )

    def __repr__(self):
        return f"MetricModel({self.scale_id}, d={self.dim})"


def _diagonal_components(dim, factor: ScalarField):
    zero = constant_field(dim, 0.0)
    return [[factor if i == j else zero for j in range(dim)] for i in range(dim)]


def flat_metric(dim) -> MetricModel:
    comps = _diagonal_components(dim, constant_field(dim, 1.0))
    return MetricModel(euclidean_chart(dim), comps, "flat")


def sphere_metric(dim, radius=1.0) -> MetricModel:
    """Round S^d of radius r, stereographic chart (misses one point).

    A second chart for the antipode is the same formula composed with the
    inversion ``y -> r^2 y / |y|^2``; overlap consistency is exercised in the
    model-cone tests.
    """
    r2 = float(radius) ** 2
    conf = (4.0 * r2 * r2) / ((radius_squared_field(dim) + r2) ** 2)
    chart = euclidean_chart(dim, bound=1e3, description=f"stereographic S^{dim}(r={radius})")
    return MetricModel(chart, _diagonal_components(dim, conf), "sphere", params={"radius": float(radius)})


def sphere_antipodal_map(dim, radius=1.0):
    """Chart transition of the two stereographic charts, y -> r^2 y/|y|^2."""
    ys = coordinate_fields(dim)
    r2 = radius_squared_field(dim)
    return [float(radius) ** 2 * y / r2 for y in ys]


def hyperbolic_ball_metric(dim) -> MetricModel:
    conf = 4.0 / ((1.0 - radius_squared_field(dim)) ** 2)
    chart = ball_chart(dim, description=f"Poincare ball H^{dim}")
    return MetricModel(chart, _diagonal_components(dim, conf), "hyperbolic_ball")


_FAMILY_BUILDERS = {
    "flat": lambda dim, params: flat_metric(dim),
    "sphere": lambda dim, params: sphere_metric(dim, params.get("radius", 1.0)),
    "hyperbolic": lambda dim, params: hyperbolic_ball_metric(dim),
    "hyperbolic_ball": lambda dim, params: hyperbolic_ball_metric(dim),
}


def metric_by_name(name: str, dim: int, **params) -> MetricModel:
    """CLI-facing factory: family name plus parameters."""
    try:
        builder = _FAMILY_BUILDERS[name]
    except KeyError:
        raise ArgumentError(
            f"unknown metric family '{name}' (choose from {sorted(_FAMILY_BUILDERS)})"
        ) from None
    if dim < 4:
        warnings.warn("dimension 3 requested; ambient identities assume d >= 4", stacklevel=2)
    return builder(dim, params)
