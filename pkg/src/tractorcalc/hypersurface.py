"""Hypersurface conformal calculus.

A hypersurface is the zero set of a weight-1 defining density sigma with
non-vanishing differential.  The unit conormal is the normalised gradient
(n_a in E_a[1], |n| = 1 along Sigma); by the sign convention used here sigma
is positive on the interior, so for boundaries the conormal points inward.

Intrinsic tractors of Sigma are identified with the N-orthogonal subbundle
of the ambient tractors.  In a scale where the ambient mean curvature is H,
the slot dictionary between intrinsic triples and ambient triples is

    (sigma, mu_i, rho)  <->  (sigma, mu_a + H sigma n_a, rho - H^2 sigma / 2)

with mu_a the tangential extension of mu_i; it preserves the tractor metrics
and sends the intrinsic X to the ambient X.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .charts import Chart, MetricModel
from .curvature import geometry_at
from .errors import ArgumentError, DomainError
from .fields import DensityField, ScalarField, constant_field, random_polynomial_field
from .jetobjects import JetTT
from .jets import Jet, jet_linear_solve
from .sampling import ball_points, rng_for
from .tractor import TractorField, TractorValue, WeightedValue, slot_pairing_matrix

_ON_SURFACE_TOL = 1e-9


class Hypersurface:
    """Zero set of a defining density, with a parametrised chart on it."""

    def __init__(self, defining: DensityField, host: MetricModel, param_fields, name=""):
        if defining.weight != 1:
            raise ArgumentError("defining density must have weight 1")
        self.defining = defining
        self.host = host
        self.param_fields = list(param_fields)  # chart map u -> ambient point
        self.name = name or "hypersurface"
        d = host.dim
        self.ambient_dim = d
        self.intrinsic_dim = d - 1
        if len(self.param_fields) != d:
            raise ArgumentError("parametrisation needs one component per ambient coordinate")
        self.intrinsic_chart = Chart(
            d - 1,
            tuple(f"u{i}" for i in range(d - 1)),
            lambda u: float(np.dot(u, u)) < 9.0,
            description=f"chart on {self.name}",
        )
        self._build_fields()
        self._intrinsic_metric = None

    # -- ambient fields -----------------------------------------------------
    def _build_fields(self):
        d = self.ambient_dim
        host = self.host
        sigma = self.defining.field
        grad = [sigma.partial(a) for a in range(d)]
        ginv = _inverse_metric_fields(host)
        norm2 = None
        for a in range(d):
            for b in range(d):
                term = ginv[a][b] * grad[a] * grad[b]
                norm2 = term if norm2 is None else norm2 + term
        inv_norm = norm2 ** (-0.5)
        self.conormal_fields = [grad[a] * inv_norm for a in range(d)]
        self._ginv_fields = ginv
        self.mean_curvature_field = self._make_mean_curvature_field()

    def _make_mean_curvature_field(self):
        surf = self
        d = self.ambient_dim

        def fn(p, m):
            geom = geometry_at(surf.host, p, m)
            n = JetTT.from_fields(geom, np.array(surf.conormal_fields, dtype=object), 1, 0, Fraction(1), m + 1)
            dn = n.grad()  # dn[a, b] = nabla_a n_b
            ginv = geom.ginv(m)
            div = None
            for a in range(d):
                for b in range(d):
                    term = ginv[a, b] * dn.comps[a, b]
                    div = term if div is None else div + term
            nup = [None] * d
            for a in range(d):
                acc = None
                for b in range(d):
                    term = ginv[a, b] * n.comps[(b,)]
                    acc = term if acc is None else acc + term
                nup[a] = acc
            nn = None
            for a in range(d):
                for b in range(d):
                    term = nup[a] * nup[b] * dn.comps[a, b]
                    nn = term if nn is None else nn + term
            return (div - nn) * (1.0 / (d - 1))

        return ScalarField(d, fn, max_order=None)

    # -- point bookkeeping -----------------------------------------------------
    def check_on_surface(self, point):
        point = self.host.chart.check(point)
        if abs(self.defining.value(point)) > _ON_SURFACE_TOL:
            raise DomainError(f"point {point} is not on {self.name} (sigma != 0)")
        grad = np.array([f(point) for f in self.conormal_fields])
        if not np.all(np.isfinite(grad)):
            raise DomainError("conormal is singular here (d sigma vanishes?)")
        return point

    def embed(self, u_point):
        u_point = self.intrinsic_chart.check(u_point)
        return np.array([f(u_point) for f in self.param_fields])

    def sample_points(self, count, seed, radius=1.5):
        """Seeded intrinsic-chart samples mapped onto the surface."""
        upts = ball_points(self.intrinsic_dim, count, seed, radius=radius, margin=0.0)
        return upts, np.array([self.embed(u) for u in upts])

    # -- first/second fundamental quantities ---------------------------------
    def conormal(self, point) -> np.ndarray:
        point = self.check_on_surface(point)
        return np.array([f(point) for f in self.conormal_fields])

    def mean_curvature(self, point) -> WeightedValue:
        point = self.check_on_surface(point)
        return WeightedValue(self.mean_curvature_field(point), Fraction(-1), self.host)

    def normal_tractor(self, point) -> TractorValue:
        point = self.check_on_surface(point)
        d = self.ambient_dim
        comps = np.zeros(d + 2)
        comps[1 : d + 1] = self.conormal(point)
        comps[d + 1] = -self.mean_curvature(point).value
        return TractorValue(comps, Fraction(0), self.host, point)

    def normal_tractor_field(self) -> TractorField:
        d = self.ambient_dim
        comps = np.empty(d + 2, dtype=object)
        comps[0] = constant_field(d, 0.0)
        for a in range(d):
            comps[1 + a] = self.conormal_fields[a]
        comps[d + 1] = -self.mean_curvature_field
        return TractorField(comps, Fraction(0), self.host)

    def second_fundamental_form(self, point) -> np.ndarray:
        """II_ab = Pi^c_a Pi^d_b nabla_c n_d at a surface point (ambient indices)."""
        point = self.check_on_surface(point)
        d = self.ambient_dim
        geom = geometry_at(self.host, point, 0)
        n = JetTT.from_fields(geom, np.array(self.conormal_fields, dtype=object), 1, 0, Fraction(1), 1)
        dn = n.grad().values()
        nvals = n.values()
        ginv = np.linalg.inv(self.host.component_matrix(point))
        nup = ginv @ nvals
        proj = np.eye(d) - np.outer(nup, nvals)  # Pi^c_a, [c, a]
        return proj.T @ dn @ proj

    def umbilicity_defect(self, point):
        """(norm of trace-free II, tangential max-abs of nabla N)."""
        point = self.check_on_surface(point)
        d = self.ambient_dim
        g = self.host.component_matrix(point)
        ginv = np.linalg.inv(g)
        two_ff = self.second_fundamental_form(point)
        nvals = self.conormal(point)
        h_first = g - np.outer(nvals, nvals)
        trace = float(np.sum(ginv * two_ff))
        tf = two_ff - (trace / (d - 1)) * h_first
        tf_norm = float(np.sqrt(max(np.einsum("ab,cd,ac,bd->", tf, tf, ginv, ginv), 0.0)))

        geom = geometry_at(self.host, point, 0)
        nfield = self.normal_tractor_field()
        dn = JetTT.from_fields(geom, nfield.components, 0, 1, Fraction(0), 1).grad().values()
        nup = ginv @ nvals
        proj = np.eye(d) - np.outer(nup, nvals)
        tangential = np.tensordot(proj.T, dn, axes=(1, 0))
        return tf_norm, float(np.max(np.abs(tangential)))

    # -- tractor projection and slot dictionary ---------------------------------
    def project_sigma(self, t: TractorValue) -> TractorValue:
        """Orthogonal projection v -> v - N h(N, v) on every tractor slot."""
        point = self.check_on_surface(t.point)
        n = self.normal_tractor(point)
        h = slot_pairing_matrix(self.host, point)
        pmat = np.eye(self.ambient_dim + 2) - np.outer(n.components, h @ n.components)
        comps = t.components
        for axis in range(t.rank):
            comps = np.moveaxis(np.tensordot(pmat, np.moveaxis(comps, axis, 0), axes=(1, 0)), 0, axis)
        return TractorValue(comps, t.weight, t.scale, point)

    def intrinsic_metric(self) -> MetricModel:
        """Pullback of the host metric to the intrinsic chart."""
        if self._intrinsic_metric is None:
            d, n = self.ambient_dim, self.intrinsic_dim
            jac = [[self.param_fields[a].partial(i) for i in range(n)] for a in range(d)]
            pulled = [[self.host.components[a][b].pullback(self.param_fields) for b in range(d)] for a in range(d)]
            comps = [[None] * n for _ in range(n)]
            for i in range(n):
                for j in range(n):
                    acc = None
                    for a in range(d):
                        for b in range(d):
                            term = pulled[a][b] * jac[a][i] * jac[b][j]
                            acc = term if acc is None else acc + term
                    comps[i][j] = acc
            self._intrinsic_metric = MetricModel(
                self.intrinsic_chart, comps, "induced", params={"host": self.host.family},
                name=f"induced({self.name})",
            )
        return self._intrinsic_metric

    def pullback_field(self, ambient_field: ScalarField) -> ScalarField:
        return ambient_field.pullback(self.param_fields)

    def intrinsic_slots_from_ambient(self, comp_fields):
        """Intrinsic (sigma, mu_i, rho) fields from projected ambient slot fields.

        ``comp_fields`` are the d+2 ambient slot components as fields on the
        intrinsic chart (already pulled back); the input must be N-orthogonal.
        """
        d, n = self.ambient_dim, self.intrinsic_dim
        H = self.pullback_field(self.mean_curvature_field)
        nconf = [self.pullback_field(f) for f in self.conormal_fields]
        jac = [[self.param_fields[a].partial(i) for i in range(n)] for a in range(d)]
        sigma = comp_fields[0]
        mu = []
        for i in range(n):
            acc = None
            for a in range(d):
                term = comp_fields[1 + a] * jac[a][i]
                acc = term if acc is None else acc + term
            mu.append(acc)
        rho = comp_fields[d + 1] + 0.5 * H * H * sigma
        out = np.empty(n + 2, dtype=object)
        out[0] = sigma
        for i in range(n):
            out[1 + i] = mu[i]
        out[n + 1] = rho
        return out

    def ambient_slots_from_intrinsic(self, tri_fields):
        """Inverse slot dictionary: intrinsic (sigma, mu_i, rho) to ambient fields.

        The tangential extension of mu is solved pointwise from the chart
        jacobian and the conormal; everything stays exactly differentiable.
        """
        d, n = self.ambient_dim, self.intrinsic_dim
        surf = self
        sigma, mu_i, rho = tri_fields[0], [tri_fields[1 + i] for i in range(n)], tri_fields[n + 1]
        H = self.pullback_field(self.mean_curvature_field)
        nconf = [self.pullback_field(f) for f in self.conormal_fields]

        def mu_ambient(a):
            def fn(u, m):
                jac = np.empty((d, n), dtype=object)
                for aa in range(d):
                    for i in range(n):
                        jac[aa, i] = surf.param_fields[aa].partial(i).eval_jet(u, m)
                point = surf.embed(u)
                geom = geometry_at(surf.host, point, m)
                ginv = geom.ginv(m)
                nj = [f.eval_jet(u, m) for f in nconf]
                nup = []
                for aa in range(d):
                    acc = None
                    for b in range(d):
                        gj = _pullback_jet(ginv[aa, b], surf, u, m)
                        term = gj * nj[b]
                        acc = term if acc is None else acc + term
                    nup.append(acc)
                # rows: tangent vectors then the raised conormal
                mat = np.empty((d, d), dtype=object)
                for i in range(n):
                    for aa in range(d):
                        mat[i, aa] = jac[aa, i]
                for aa in range(d):
                    mat[n, aa] = nup[aa]
                zero = Jet.constant(nj[0].space, 0.0)
                rhs = [f.eval_jet(u, m) for f in mu_i] + [zero]
                sol = jet_linear_solve(mat, rhs)
                return sol[a]

            return ScalarField(n, fn, max_order=None)

        out = np.empty(d + 2, dtype=object)
        out[0] = sigma
        for a in range(d):
            out[1 + a] = mu_ambient(a) + H * sigma * nconf[a]
        out[d + 1] = rho - 0.5 * H * H * sigma
        return out


def _pullback_jet(jet: Jet, surf: Hypersurface, u, order):
    args = [f.eval_jet(u, order) for f in surf.param_fields]
    return jet.substitute(args)


_INV_FIELD_CACHE = {}


def _inverse_metric_fields(metric: MetricModel):
    cached = _INV_FIELD_CACHE.get(id(metric))
    if cached is not None:
        return cached
    d = metric.dim

    def entry(i, j):
        def fn(p, m):
            return geometry_at(metric, p, m).ginv(m)[i, j]

        return ScalarField(d, fn, max_order=None)

    fields = [[entry(i, j) for j in range(d)] for i in range(d)]
    _INV_FIELD_CACHE[id(metric)] = fields
    return fields


# -- built-in surfaces ---------------------------------------------------------

def _stereographic_sphere_param(ambient_dim):
    """u in R^{d-1} -> unit sphere point in R^d (misses the -e_d pole)."""
    from .fields import coordinate_fields, radius_squared_field

    n = ambient_dim - 1
    us = coordinate_fields(n)
    u2 = radius_squared_field(n)
    denom = (1.0 + u2) ** (-1)
    comps = [2.0 * us[i] * denom for i in range(n)]
    comps.append((1.0 - u2) * denom)
    return comps


def hyperplane(host: MetricModel, axis=None) -> Hypersurface:
    from .fields import coordinate_field, coordinate_fields

    d = host.dim
    axis = d - 1 if axis is None else axis
    sigma = DensityField(1, -coordinate_field(d, axis), host)
    us = coordinate_fields(d - 1)
    params = []
    k = 0
    for a in range(d):
        if a == axis:
            params.append(constant_field(d - 1, 0.0))
        else:
            params.append(us[k])
            k += 1
    return Hypersurface(sigma, host, params, name=f"hyperplane y{axis}=0")


def unit_sphere(host: MetricModel) -> Hypersurface:
    """|y| = 1 with sigma = (1 - |y|^2)/2 > 0 inside (conormal points inward)."""
    from .fields import radius_squared_field

    d = host.dim
    sigma = DensityField(1, 0.5 * (1.0 - radius_squared_field(d)), host)
    return Hypersurface(sigma, host, _stereographic_sphere_param(d), name="unit sphere")


def ellipsoid(host: MetricModel, semiaxes) -> Hypersurface:
    from .fields import coordinate_fields

    d = host.dim
    semiaxes = [float(a) for a in semiaxes]
    if len(semiaxes) != d:
        raise ArgumentError("need one semiaxis per coordinate")
    ys = coordinate_fields(d)
    quad = None
    for a in range(d):
        term = (ys[a] / semiaxes[a]) * (ys[a] / semiaxes[a])
        quad = term if quad is None else quad + term
    sigma = DensityField(1, 0.5 * (1.0 - quad), host)
    sphere = _stereographic_sphere_param(d)
    params = [semiaxes[a] * sphere[a] for a in range(d)]
    return Hypersurface(sigma, host, params, name="ellipsoid")


# -- boundary operators ---------------------------------------------------------

def robin_delta(field, surface: Hypersurface, point):
    """Conformal Robin operator delta = n^a nabla_a - w H at a surface point.

    Strongly invariant: tractor-valued inputs use the coupled connection.
    Returns a WeightedValue for densities, a TractorValue otherwise.
    """
    from .tractor import _jet_of

    point = surface.check_on_surface(point)
    host = surface.host
    geom = geometry_at(host, point, 1)
    jet = _jet_of(field, host, point, 1)
    n_jets = [f.eval_jet(point, 0) for f in surface.conormal_fields]
    h_jet = surface.mean_curvature_field.eval_jet(point, 0)
    out = jet.robin(n_jets, h_jet)
    if out.nr == 0:
        return WeightedValue(out.comps[()].value, out.weight, host)
    return TractorValue(out.values(), out.weight, host, point)


def delta_ell(ell: int, field, surface: Hypersurface, point, u_point=None):
    """The conformal boundary-operator family along Sigma.

    delta_0 is restriction, delta_1 the Robin operator; for ell = 2, 3 the
    tractor-D compositions D_Sigma P_Sigma (D ...) are evaluated with the
    intrinsic tractor-D of the induced metric.  Output weight is w - ell.
    """
    from .tractor import TractorField as TF
    from .tractor import _tractor_source, thomas_D

    if ell < 0 or ell > 3:
        raise ArgumentError("delta_ell supports 0 <= ell <= 3 in this engine")
    point = surface.check_on_surface(point)
    comps, rank, weight, _ = _tractor_source(field)
    if rank != 0:
        raise ArgumentError("delta_ell here acts on scalar densities")

    if ell == 0:
        return WeightedValue(comps[()](point), weight, surface.host)
    if ell == 1:
        return robin_delta(field, surface, point)

    if u_point is None:
        u_point = _invert_parametrisation(surface, point)
    inner = thomas_D(field, surface.host)  # ambient rank-1, weight w-1
    if ell == 3:
        inner = _robin_of_tractor_field(inner, surface)
    projected = _project_field_to_intrinsic(inner, surface)
    intrinsic = surface.intrinsic_metric()
    tri = TF(projected, inner.weight, intrinsic)
    jet = tri.jet(u_point, 2)
    out = jet.thomas_D().contract_tractor(0, 1)
    value = out.comps[()].value
    expected = weight - ell
    if out.weight != expected:
        raise ArgumentError("weight bookkeeping failed in delta_ell")
    return WeightedValue(value, expected, intrinsic)


def _robin_of_tractor_field(tfield, surface: Hypersurface):
    """delta applied slotwise to an ambient tractor field, as a field."""
    from .tractor import TractorField as TF

    host = surface.host
    d = host.dim
    cache = {}

    def component(idx):
        def fn(p, m):
            key = (p.tobytes(), m)
            hit = cache.get(key)
            if hit is None:
                geom = geometry_at(host, p, m)
                jet = JetTT.from_fields(geom, tfield.components, 0, 1, tfield.weight, m + 1)
                n_jets = [f.eval_jet(p, m) for f in surface.conormal_fields]
                h_jet = surface.mean_curvature_field.eval_jet(p, m)
                hit = jet.robin(n_jets, h_jet)
                cache[key] = hit
            return hit.comps[idx]

        return ScalarField(d, fn, max_order=None)

    out = np.empty(d + 2, dtype=object)
    for a in range(d + 2):
        out[a] = component((a,))
    return TF(out, tfield.weight - 1, host)


def _project_field_to_intrinsic(tfield, surface: Hypersurface):
    """Pull an ambient rank-1 tractor field back to Sigma, project off N,
    and re-slot intrinsically.  Returns intrinsic component fields."""
    d = surface.ambient_dim
    host = surface.host
    pulled = [tfield.components[(a,)].pullback(surface.param_fields) for a in range(d + 2)]
    nfield = surface.normal_tractor_field()
    n_pulled = [nfield.components[(a,)].pullback(surface.param_fields) for a in range(d + 2)]
    ginv = _inverse_metric_fields(host)
    ginv_pulled = [[ginv[a][b].pullback(surface.param_fields) for b in range(d)] for a in range(d)]
    # h(N, T) on the intrinsic chart
    pair = n_pulled[0] * pulled[d + 1] + n_pulled[d + 1] * pulled[0]
    for a in range(d):
        for b in range(d):
            pair = pair + ginv_pulled[a][b] * n_pulled[1 + a] * pulled[1 + b]
    projected = [pulled[a] - pair * n_pulled[a] for a in range(d + 2)]
    return surface.intrinsic_slots_from_ambient(projected)


def _invert_parametrisation(surface: Hypersurface, point, seeds=None):
    """Find u with embed(u) = point by Gauss-Newton on the chart map."""
    n = surface.intrinsic_dim
    best = None
    trials = [np.zeros(n)] if seeds is None else list(seeds)
    rng = rng_for(20190531)
    trials += [rng.uniform(-1.2, 1.2, size=n) for _ in range(12)]
    for u0 in trials:
        u = np.array(u0, dtype=float)
        for _ in range(60):
            fx = surface.embed(u) - point
            jac = np.array(
                [[surface.param_fields[a].partial(i)(u) for i in range(n)] for a in range(surface.ambient_dim)]
            )
            step, *_ = np.linalg.lstsq(jac, -fx, rcond=None)
            u = u + step
            if np.linalg.norm(step) < 1e-13:
                break
        err = np.linalg.norm(surface.embed(u) - point)
        if best is None or err < best[1]:
            best = (u, err)
        if err < 1e-11:
            break
    if best[1] > 1e-9:
        raise DomainError(f"could not invert the chart map near {point} (residual {best[1]:.2e})")
    return best[0]


def normal_order_probe(apply_operator, weight, surface: Hypersurface, point, r: int, seed=0, probes=10):
    """Empirical normal order of a boundary operator at a surface point.

    Probes B(x^r phi)(p) over random polynomial sections phi: reports whether
    all order-(r+1) inputs are annihilated while some order-r input is not.
    """
    point = surface.check_on_surface(point)
    rng = rng_for(seed)
    host = surface.host

    def batch(power):
        vals = []
        for _ in range(probes):
            phi = random_polynomial_field(host.dim, rng, degree=2)
            rep = surface.defining.field ** power * phi
            u = DensityField(weight, rep, host)
            out = apply_operator(u, surface, point)
            vals.append(out.value if hasattr(out, "value") else float(out))
        return np.array(vals, dtype=float)

    at_r = batch(r)
    above = batch(r + 1)
    witness = float(np.max(np.abs(at_r)))
    vanishes = bool(np.max(np.abs(above)) < 1e-8 * max(1.0, witness))
    return {
        "vanishes_at_order_r_plus_1": vanishes,
        "witness_value": witness,
        "lower_bound_only": witness < 1e-10,
    }


def dd_constant_measure(d: int, weight, surface: Hypersurface, point, field) -> float:
    """Measure c in delta = c N^A D_A at one probe (frozen goldens live in
    goldens/dd_constants.json; the measured value must be scale-independent)."""
    from .tractor import thomas_D_value, tractor_metric

    point = surface.check_on_surface(point)
    dj = thomas_D_value(field, surface.host, point)
    dvals = TractorValue(dj.values(), dj.weight, surface.host, point)
    n = surface.normal_tractor(point)
    nd = tractor_metric(n, dvals).value
    delta = robin_delta(field, surface, point).value
    if abs(nd) < 1e-14:
        raise ArgumentError("N^A D_A vanished at the probe; pick another point")
    return delta / nd
