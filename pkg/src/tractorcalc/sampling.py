"""Deterministic seeded point sampling for charts and tests.

Samples stay a fixed margin (0.05) inside chart boundaries so curvature and
metric jets remain well conditioned at every drawn point.
"""

from __future__ import annotations

import numpy as np

from .charts import BOUNDARY_MARGIN, MetricModel


def rng_for(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def ball_points(dim, count, seed, radius=1.0, margin=BOUNDARY_MARGIN, center=None):
    """Points in the ball of given radius, margin-shrunk, uniform in radius."""
    rng = rng_for(seed)
    out = np.empty((count, dim))
    rmax = radius * (1.0 - margin)
    for k in range(count):
        v = rng.normal(size=dim)
        v /= np.linalg.norm(v)
        out[k] = v * rmax * rng.uniform(0.05, 1.0)
    if center is not None:
        out += np.asarray(center)
    return out


def chart_points(metric: MetricModel, count, seed):
    """Valid sample points for a built-in metric family."""
    d = metric.dim
    family = metric.family
    base = metric
    while family == "conformal_rescale":
        base = base.base
        family = base.family
    if family in ("hyperbolic_ball", "cap_pullback"):
        pts = ball_points(d, count, seed, radius=1.0)
    elif family == "sphere":
        pts = ball_points(d, count, seed, radius=2.0)
    else:
        pts = ball_points(d, count, seed, radius=1.5)
    for p in pts:
        metric.chart.check(p)
    return pts
