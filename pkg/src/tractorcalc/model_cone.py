"""The homogeneous null-cone model.

Ambient R^{d+2} carries the signature (d+1, 1) form H whose matrix is the
antidiagonal pairing of the first and last coordinates plus the identity on
the middle block -- the same frame as the tractor slot pairing.  Rays of the
forward null cone are parametrised by the stereographic chart of S^d; the
unit section (the round sphere of radius one inside the spatial slice)
induces the round metric, and any other section rescales it conformally.

A constant ambient covector I with H-norm-squared one cuts the cone along
the hyperplane I.X = 1 in a section over an open cap; the induced metric is
the hyperbolic (Poincare ball) metric in chart coordinates, and the zero set
of sigma = I.X is the equator sphere.  Norm -1 gives the round sphere metric
itself and null I gives a flat metric away from one point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .charts import Chart, MetricModel, sphere_metric
from .errors import ArgumentError, BranchError, DegenerateStructureError, DomainError
from .fields import DensityField, ScalarField, constant_field, coordinate_fields, radius_squared_field
from .hypersurface import Hypersurface, _stereographic_sphere_param
from .tractor import TractorField

_SQRT2 = math.sqrt(2.0)


@dataclass
class AmbientForm:
    """The bilinear form of R^{d+2} in the tractor-frame basis."""

    d: int

    @property
    def matrix(self) -> np.ndarray:
        n = self.d + 2
        h = np.zeros((n, n))
        h[0, n - 1] = h[n - 1, 0] = 1.0
        h[1 : n - 1, 1 : n - 1] = np.eye(self.d)
        return h

    def signature_check(self):
        eig = np.linalg.eigvalsh(self.matrix)
        pos = int(np.sum(eig > 0))
        neg = int(np.sum(eig < 0))
        if (pos, neg) != (self.d + 1, 1):
            raise ArgumentError(f"form has signature ({pos},{neg}), expected ({self.d + 1},1)")
        return pos, neg

    def pair(self, x, y) -> float:
        return float(np.asarray(x) @ self.matrix @ np.asarray(y))

    def raise_covector(self, covector) -> np.ndarray:
        return np.linalg.solve(self.matrix, np.asarray(covector, dtype=float))

    def norm_squared_covector(self, covector) -> float:
        v = self.raise_covector(covector)
        return self.pair(v, v)


class ConeChart:
    """Stereographic parametrisation of the forward null cone over S^d.

    Ambient components are organised so that the 'time' direction is
    (e_0 - e_{d+1})/sqrt(2) and the sphere sits in the spatial slice spanned
    by s = (e_0 + e_{d+1})/sqrt(2) and the middle block; the forward cone is
    t > 0.  Functions homogeneous of degree w on the cone are identified with
    weight-w densities by reading them along sections.
    """

    def __init__(self, d: int):
        self.d = d
        self.form = AmbientForm(d)
        self.form.signature_check()
        self.round_metric = sphere_metric(d)
        self.chart = self.round_metric.chart
        # sphere embedding U(y): first component the pole axis, rest 2y/(1+|y|^2)
        sphere = _stereographic_sphere_param(d + 1)
        self._u_fields = [sphere[d]] + sphere[:d]  # reorder: pole axis first
        self.section_fields = self._assemble_section(scale=1.0, reflect=False)
        self.yvec_fields = self._assemble_section(scale=0.5, reflect=True)

    # ambient components from (t, s, z) data: X^0=(s+t)/sqrt2, X^{d+1}=(s-t)/sqrt2
    def _assemble_section(self, scale, reflect):
        d = self.d
        t_val = -scale if reflect else scale
        u0 = self._u_fields[0] * scale
        comps = [None] * (d + 2)
        comps[0] = (u0 + t_val) * (1.0 / _SQRT2)
        for i in range(d):
            comps[1 + i] = self._u_fields[1 + i] * scale
        comps[d + 1] = (u0 - t_val) * (1.0 / _SQRT2)
        return comps

    def section_point(self, y) -> np.ndarray:
        return np.array([f(y) for f in self.section_fields])

    def chart_point(self, ambient) -> np.ndarray:
        """Chart coordinates of the ray through a forward cone point."""
        ambient = np.asarray(ambient, dtype=float)
        d = self.d
        t = (ambient[0] - ambient[d + 1]) / _SQRT2
        if t <= 0:
            raise DomainError("not a forward cone point (t <= 0)")
        u = np.empty(d + 1)
        u[0] = (ambient[0] + ambient[d + 1]) / (_SQRT2 * t)
        u[1:] = ambient[1 : d + 1] / t
        if u[0] <= -1 + 1e-12:
            raise DomainError("ray passes through the stereographic pole")
        return u[1:] / (1.0 + u[0])

    # -- covectors of the three branches --------------------------------------
    def standard_covector(self, norm: int) -> np.ndarray:
        """Canonical covector with H-norm-squared +1, -1 or 0.

        +1: the hyperbolic cap over the unit chart ball (equator |y| = 1);
        -1: sigma = 1, the round sphere branch;
         0: sigma vanishing exactly at the chart origin.
        """
        d = self.d
        h = self.form.matrix
        e_s = np.zeros(d + 2)
        e_s[0] = e_s[d + 1] = 1.0 / _SQRT2
        e_t = np.zeros(d + 2)
        e_t[0], e_t[d + 1] = 1.0 / _SQRT2, -1.0 / _SQRT2
        if norm == 1:
            vec = e_s
        elif norm == -1:
            vec = -e_t
        elif norm == 0:
            vec = -0.5 * (e_s + e_t)
        else:
            raise ArgumentError("norm must be +1, -1 or 0")
        return h @ vec

    def sigma_field(self, covector) -> ScalarField:
        """sigma = I.X read along the unit section (a weight-1 density rep)."""
        covector = np.asarray(covector, dtype=float)
        acc = None
        for a in range(self.d + 2):
            if covector[a] == 0.0:
                continue
            term = float(covector[a]) * self.section_fields[a]
            acc = term if acc is None else acc + term
        if acc is None:
            raise DegenerateStructureError("zero covector")
        return acc

def cap_metric(cone: ConeChart, covector, name=None) -> MetricModel:
    """Metric of the section over {I.X = 1}: sigma^{-2} times the round metric.

    Valid on the open cap where sigma > 0; Einstein by construction, with
    Ric = -(d-1) g for the norm +1 branch.
    """
    sig = cone.sigma_field(covector)
    d = cone.d
    base = cone.round_metric

    def valid(p):
        return base.chart.is_valid(p) and sig(p) > 1e-12

    chart = Chart(d, base.chart.names, valid, description="cone cap")
    factor = sig ** (-2)
    comps = [[factor * base.components[i][j] for j in range(d)] for i in range(d)]
    model = MetricModel(
        chart,
        comps,
        "cap_pullback",
        params={"covector": [float(c) for c in np.asarray(covector)]},
        base=base,
        omega=-(sig.log()),
        name=name,
    )
    return model


def descend_tractor(cone: ConeChart, covector):
    """Parallel tractor field (round-scale slots) of a constant covector.

    Slots at a chart point: sigma = I.X on the unit section, mu_i = I paired
    with the section tangents, rho = I paired with the null partner of the
    section; pairings of descended tractors reproduce H exactly.
    """
    covector = np.asarray(covector, dtype=float)
    if not covector.any():
        raise DegenerateStructureError("zero covector descends to the zero tractor")
    d = cone.d
    sig = cone.sigma_field(covector)

    def pair_with(fields):
        acc = None
        for a in range(d + 2):
            if covector[a] == 0.0:
                continue
            term = float(covector[a]) * fields[a]
            acc = term if acc is None else acc + term
        return acc if acc is not None else constant_field(d, 0.0)

    comps = np.empty(d + 2, dtype=object)
    comps[0] = sig
    for i in range(d):
        tangent = [f.partial(i) for f in cone.section_fields]
        comps[1 + i] = pair_with(tangent)
    comps[d + 1] = pair_with(cone.yvec_fields)
    tractor = TractorField(comps, 0, cone.round_metric)
    sigma_density = DensityField(1, sig, cone.round_metric)
    return tractor, sigma_density


def equator_boundary(cone: ConeChart, covector) -> Hypersurface:
    """The zero set of sigma as a hypersurface in the round sphere.

    Requires the norm +1 branch; the parametrisation is implemented for the
    standard cap covector, whose equator is the unit chart sphere.
    """
    n2 = cone.form.norm_squared_covector(covector)
    if abs(n2 - 1.0) > 1e-10:
        raise BranchError(f"equator exists for |I|^2 = 1 branches, got {n2:.6g}")
    sig = cone.sigma_field(covector)
    d = cone.d
    deviation = 0.0
    rng = np.random.default_rng(2)
    for _ in range(12):
        v = rng.normal(size=d)
        v /= np.linalg.norm(v)
        deviation = max(deviation, abs(sig(v)))
    if deviation > 1e-10:
        raise ArgumentError(
            "equator parametrisation is implemented for the standard cap covector"
        )
    sigma_density = DensityField(1, sig, cone.round_metric)
    return Hypersurface(
        sigma_density, cone.round_metric, _stereographic_sphere_param(d), name="cone equator"
    )


def hyperbolic_distance(cone: ConeChart, covector, y1, y2) -> float:
    """Distance on the cap through the section points: cosh d = 1 - H(P1, P2)."""
    p1 = cone.section_point(y1)
    p2 = cone.section_point(y2)
    s1 = float(np.asarray(covector) @ p1)
    s2 = float(np.asarray(covector) @ p2)
    if s1 <= 0 or s2 <= 0:
        raise DomainError("points outside the open cap")
    val = 1.0 - cone.form.pair(p1 / s1, p2 / s2)
    return float(np.arccosh(max(val, 1.0)))


# -- isotropy spot checks ------------------------------------------------------

def h_antisymmetric_generator(cone: ConeChart, rng, fix_covector=None) -> np.ndarray:
    """Random generator A with A^T H + H A = 0, optionally annihilating I."""
    d2 = cone.d + 2
    S = rng.normal(size=(d2, d2))
    S = S - S.T
    if fix_covector is not None:
        i_vec = np.asarray(fix_covector, dtype=float)
        i_unit = i_vec / np.linalg.norm(i_vec)
        # remove every component of S touching the covector direction
        P = np.eye(d2) - np.outer(i_unit, i_unit)
        S = P @ S @ P
    return S @ cone.form.matrix


def isotropy_spotcheck(cone: ConeChart, covector, n_maps=4, seed=17, pairs=6):
    """Finite spot check: maps preserving H and fixing I act by cap isometries.

    Each sampled map must preserve H to 1e-12 (precondition); maps fixing the
    covector must preserve sigma and sampled cap distances, and a map moving
    the covector is reported as non-isotropy.
    """
    rng = np.random.default_rng(seed)
    covector = np.asarray(covector, dtype=float)
    h = cone.form.matrix
    report = {"isotropy": [], "non_isotropy": []}
    sample_rng = np.random.default_rng(seed + 1)

    def sample_cap_pairs():
        out = []
        while len(out) < pairs:
            y1 = sample_rng.uniform(-0.6, 0.6, cone.d)
            y2 = sample_rng.uniform(-0.6, 0.6, cone.d)
            if cone.sigma_field(covector)(y1) > 0.1 and cone.sigma_field(covector)(y2) > 0.1:
                out.append((y1, y2))
        return out

    cap_pairs = sample_cap_pairs()
    for k in range(n_maps):
        gen = h_antisymmetric_generator(cone, rng, fix_covector=covector)
        M = scipy.linalg.expm(0.35 * gen)
        h_defect = float(np.max(np.abs(M.T @ h @ M - h)))
        if h_defect > 1e-12:
            raise ArgumentError(f"sampled map fails H-preservation ({h_defect:.2e})")
        fix_defect = float(np.max(np.abs(covector @ M - covector)))
        dist_defect = 0.0
        sigma_defect = 0.0
        sig = cone.sigma_field(covector)
        for y1, y2 in cap_pairs:
            d_before = hyperbolic_distance(cone, covector, y1, y2)
            z1 = cone.chart_point(M @ cone.section_point(y1))
            z2 = cone.chart_point(M @ cone.section_point(y2))
            d_after = hyperbolic_distance(cone, covector, z1, z2)
            dist_defect = max(dist_defect, abs(d_after - d_before))
            # sigma as a homogeneous function is preserved along mapped rays
            for y, z in ((y1, z1), (y2, z2)):
                t_ratio = _ray_scale(cone, M @ cone.section_point(y), z)
                sigma_defect = max(sigma_defect, abs(sig(z) * t_ratio - sig(y)))
        report["isotropy"].append(
            {"h_defect": h_defect, "fix_defect": fix_defect,
             "distance_defect": dist_defect, "sigma_defect": sigma_defect}
        )

    # one boost that moves I: flagged, not an isometry of the cap data
    gen = h_antisymmetric_generator(cone, rng, fix_covector=None)
    M = scipy.linalg.expm(0.3 * gen)
    moved = float(np.max(np.abs(covector @ M - covector)))
    sig = cone.sigma_field(covector)
    y = np.array([0.2] + [0.1] * (cone.d - 1))
    mapped = M @ cone.section_point(y)
    sigma_moved = abs(float(covector @ mapped) - sig(y))
    report["non_isotropy"].append({"covector_moved": moved, "sigma_moved": sigma_moved})
    return report


def _ray_scale(cone: ConeChart, ambient, chart_pt) -> float:
    """Factor lambda with ambient = lambda * section(chart_pt)."""
    ref = cone.section_point(chart_pt)
    k = int(np.argmax(np.abs(ref)))
    return float(ambient[k] / ref[k])
