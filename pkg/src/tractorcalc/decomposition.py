"""Identity decompositions and null-space projectors for commuting factors.

For a polynomial factorisation ``P[E] = (E - mu_1) ... (E - mu_p)`` with
mutually distinct shifts, partial fractions give scalars

    Q_i = prod_{j != i} 1 / (mu_i - mu_j)

with ``sum_i Q_i prod_{j != i} (E - mu_j) = id`` as a polynomial identity,
and ``Proj_i = Q_i prod_{j != i} (E - mu_j)`` projecting the null space of P
onto the null space of ``E - mu_i``.

Two backends share the code path: exact rational matrices (Fraction entries)
and numerical operators given by a matrix or a callable; near-degenerate
float shift lists are refused because the Q_i grow like the inverse gap.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

from .errors import ArgumentError, ConditioningError, DegenerateStructureError

MIN_FLOAT_GAP = 1e-8


def _is_exact(values) -> bool:
    return all(isinstance(v, Rational) for v in values)


def q_coefficients(mus):
    """Partial-fraction coefficients Q_i; exact when the shifts are rational."""
    mus = list(mus)
    if len(mus) == 0:
        raise ArgumentError("empty shift list")
    exact = _is_exact(mus)
    if exact:
        mus = [Fraction(m) for m in mus]
        if len(set(mus)) != len(mus):
            raise DegenerateStructureError("repeated shifts: factorisation hypothesis fails")
    else:
        mus = [float(m) for m in mus]
        for i in range(len(mus)):
            for j in range(i + 1, len(mus)):
                if abs(mus[i] - mus[j]) < MIN_FLOAT_GAP:
                    raise ConditioningError(
                        f"shift gap |mu_{i} - mu_{j}| = {abs(mus[i]-mus[j]):.2e} < {MIN_FLOAT_GAP:g}"
                    )
    out = []
    for i, mi in enumerate(mus):
        q = Fraction(1) if exact else 1.0
        for j, mj in enumerate(mus):
            if j != i:
                q = q / (mi - mj)
        out.append(q)
    return out


def partial_fraction_residual(mus, samples=None):
    """Residual of sum_i Q_i prod_{j != i}(t - mu_j) = 1 at p+1 sample points."""
    qs = q_coefficients(mus)
    mus = list(mus)
    exact = _is_exact(mus)
    if samples is None:
        if exact:
            samples = [Fraction(k) + Fraction(1, 7) for k in range(len(mus) + 1)]
        else:
            samples = [0.37 * (k + 1) for k in range(len(mus) + 1)]
    worst = Fraction(0) if exact else 0.0
    for t in samples:
        acc = Fraction(0) if exact else 0.0
        for i, q in enumerate(qs):
            prod = q
            for j, m in enumerate(mus):
                if j != i:
                    prod = prod * (t - m)
            acc = acc + prod
        worst = max(worst, abs(acc - 1))
    return worst


class FactorSystem:
    """A linear action E with a distinct shift list mu_1..mu_p.

    ``operator`` is a square matrix (float or Fraction entries) or a callable
    ``v -> E v`` acting on vectors shaped like the probes.
    """

    def __init__(self, operator, mus):
        self.mus = list(mus)
        self.qs = q_coefficients(self.mus)
        self.exact = _is_exact(self.mus)
        if callable(operator) and not isinstance(operator, np.ndarray):
            self._apply = operator
            self.matrix = None
        else:
            mat = np.asarray(operator)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ArgumentError("operator matrix must be square")
            if mat.shape[0] > 64:
                raise ArgumentError("matrices above 64 x 64 are out of scope here")
            self.matrix = mat
            self._apply = lambda v: mat @ v

    # -- elementary actions ---------------------------------------------------
    def apply(self, v):
        return self._apply(v)

    def apply_shifted(self, v, mu):
        return self._apply(v) - mu * v

    def apply_complement(self, v, i):
        """prod_{j != i} (E - mu_j) v."""
        out = v
        for j, mu in enumerate(self.mus):
            if j != i:
                out = self.apply_shifted(out, mu)
        return out

    def apply_full(self, v):
        out = v
        for mu in self.mus:
            out = self.apply_shifted(out, mu)
        return out

    def project(self, v, i):
        """Proj_i v = Q_i prod_{j != i} (E - mu_j) v."""
        return self.qs[i] * self.apply_complement(v, i)


def _norm(v):
    arr = np.asarray(v)
    if arr.dtype == object:
        return max((abs(x) for x in arr.flat), default=Fraction(0))
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def identity_decomposition_check(system: FactorSystem, v):
    """Residual of v = sum_i Q_i prod_{j != i}(E - mu_j) v (diagnostic)."""
    acc = None
    for i in range(len(system.mus)):
        term = system.project(v, i)
        acc = term if acc is None else acc + term
    return _norm(acc - v)


@dataclass
class ProjectionReport:
    components: list
    input_null_residual: object
    component_residuals: list
    sum_residual: object
    flagged: bool


def project_component(system: FactorSystem, v, tolerance=1e-8) -> ProjectionReport:
    """Split v (approximately) in the null space of P into eigen-shift parts.

    Components always come back; when the full product applied to v is not
    small the report is flagged rather than raised.
    """
    full = system.apply_full(v)
    in_res = _norm(full)
    flagged = bool(in_res > tolerance) if not system.exact else bool(in_res != 0)
    comps = [system.project(v, i) for i in range(len(system.mus))]
    comp_res = [_norm(system.apply_shifted(c, mu)) for c, mu in zip(comps, system.mus)]
    total = comps[0]
    for c in comps[1:]:
        total = total + c
    return ProjectionReport(
        components=comps,
        input_null_residual=in_res,
        component_residuals=comp_res,
        sum_residual=_norm(total - v),
        flagged=flagged,
    )


def exact_fraction_matrix(int_matrix) -> np.ndarray:
    """Lift an integer matrix to Fraction entries (object dtype)."""
    arr = np.asarray(int_matrix)
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(arr.shape):
        out[idx] = Fraction(int(arr[idx]))
    return out


def projector_matrix(system: FactorSystem, i) -> np.ndarray:
    """Dense Proj_i for matrix-backed systems (any entry type)."""
    if system.matrix is None:
        raise ArgumentError("projector_matrix needs a matrix-backed system")
    n = system.matrix.shape[0]
    eye = np.empty((n, n), dtype=system.matrix.dtype)
    if system.matrix.dtype == object:
        for r in range(n):
            for c in range(n):
                eye[r, c] = Fraction(1) if r == c else Fraction(0)
    else:
        eye = np.eye(n)
    cols = [system.project(eye[:, k], i) for k in range(n)]
    return np.stack(cols, axis=1)
