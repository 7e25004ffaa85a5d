"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` stores the Taylor coefficients ``c[alpha] = d^alpha f(p) / alpha!``
of a smooth function at a point, for all multi-indices ``|alpha| <= order``.
Sums, products and analytic compositions of jets are again jets, so every
derivative the engine ever consumes is exact (up to roundoff); no finite
differences occur outside test oracles.

Coefficient layout is graded: all multi-indices of total degree 0, then 1,
and so on, lexicographic within a degree.  With this layout the coefficient
array of a lower-order space is a prefix of the higher-order one, which makes
truncation a slice.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np

from .errors import ArgumentError

_SPACE_CACHE: dict[tuple[int, int], "JetSpace"] = {}


def jet_space(dim: int, order: int) -> "JetSpace":
    """Return the (cached) jet space for ``dim`` variables at ``order``."""
    key = (dim, order)
    space = _SPACE_CACHE.get(key)
    if space is None:
        space = JetSpace(dim, order)
        _SPACE_CACHE[key] = space
    return space


def _graded_multi_indices(dim, order):
    out = []
    for deg in range(order + 1):
        block = [a for a in itertools.product(range(deg + 1), repeat=dim) if sum(a) == deg]
        block.sort()
        out.extend(block)
    return out


class JetSpace:
    """Precomputed index tables for one (dim, order) pair."""

    def __init__(self, dim: int, order: int):
        if dim < 1 or order < 0:
            raise ArgumentError(f"bad jet space ({dim}, {order})")
        self.dim = dim
        self.order = order
        self.alphas = _graded_multi_indices(dim, order)
        self.n = len(self.alphas)
        self.position = {a: i for i, a in enumerate(self.alphas)}
        self._mul_table = None
        self._deriv_tables = None
        self._factorials = np.array(
            [math.prod(math.factorial(k) for k in a) for a in self.alphas], dtype=float
        )

    # -- tables ---------------------------------------------------------
    @property
    def mul_table(self):
        if self._mul_table is None:
            I, J, K = [], [], []
            for i, a in enumerate(self.alphas):
                ra = self.order - sum(a)
                for j, b in enumerate(self.alphas):
                    if sum(b) > ra:
                        continue
                    I.append(i)
                    J.append(j)
                    K.append(self.position[tuple(x + y for x, y in zip(a, b))])
            self._mul_table = (
                np.asarray(I, dtype=np.intp),
                np.asarray(J, dtype=np.intp),
                np.asarray(K, dtype=np.intp),
            )
        return self._mul_table

    def deriv_table(self, axis):
        if self._deriv_tables is None:
            self._deriv_tables = {}
        tab = self._deriv_tables.get(axis)
        if tab is None:
            lower = jet_space(self.dim, self.order - 1)
            src = np.empty(lower.n, dtype=np.intp)
            fac = np.empty(lower.n, dtype=float)
            for i, a in enumerate(lower.alphas):
                shifted = list(a)
                shifted[axis] += 1
                src[i] = self.position[tuple(shifted)]
                fac[i] = shifted[axis]
            tab = (lower, src, fac)
            self._deriv_tables[axis] = tab
        return tab


class Jet:
    """Taylor polynomial of a function at a point, truncated at space.order."""

    __slots__ = ("space", "c")

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        self.c = coeffs

    # -- constructors ---------------------------------------------------
    @staticmethod
    def constant(space: JetSpace, value: float) -> "Jet":
        c = np.zeros(space.n)
        c[0] = value
        return Jet(space, c)

    @staticmethod
    def variable(space: JetSpace, point: Sequence[float], axis: int) -> "Jet":
        """The coordinate function y[axis] expanded at ``point``."""
        c = np.zeros(space.n)
        c[0] = point[axis]
        if space.order >= 1:
            unit = tuple(1 if k == axis else 0 for k in range(space.dim))
            c[space.position[unit]] = 1.0
        return Jet(space, c)

    # -- inspection ------------------------------------------------------
    @property
    def value(self) -> float:
        return float(self.c[0])

    def partial(self, alpha) -> float:
        """Exact partial derivative d^alpha f at the base point."""
        alpha = tuple(alpha)
        pos = self.space.position.get(alpha)
        if pos is None:
            raise ArgumentError(f"multi-index {alpha} outside jet order {self.space.order}")
        return float(self.c[pos] * self.space._factorials[pos])

    def gradient(self) -> np.ndarray:
        d = self.space.dim
        return np.array([self.partial(tuple(1 if k == a else 0 for k in range(d))) for a in range(d)])

    # -- algebra ----------------------------------------------------------
    def truncate(self, order: int) -> "Jet":
        if order == self.space.order:
            return self
        if order > self.space.order:
            raise ArgumentError("cannot extend a jet to higher order")
        lower = jet_space(self.space.dim, order)
        return Jet(lower, self.c[: lower.n].copy())

    def extend(self, order: int) -> "Jet":
        """Zero-pad to a higher order (valid only when the function is a
        polynomial fully captured by the current order)."""
        if order <= self.space.order:
            return self.truncate(order)
        higher = jet_space(self.space.dim, order)
        c = np.zeros(higher.n)
        c[: self.space.n] = self.c
        return Jet(higher, c)

    def _align(self, other):
        if not isinstance(other, Jet):
            return self, Jet.constant(self.space, float(other))
        if other.space is self.space:
            return self, other
        if other.space.dim != self.space.dim:
            raise ArgumentError("jet dimension mismatch")
        m = min(self.space.order, other.space.order)
        return self.truncate(m), other.truncate(m)

    def __add__(self, other):
        a, b = self._align(other)
        if not b.c.any():
            return a
        if not a.c.any():
            return b
        return Jet(a.space, a.c + b.c)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._align(other)
        if not b.c.any():
            return a
        return Jet(a.space, a.c - b.c)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return Jet(self.space, -self.c)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.space, self.c * float(other))
        a, b = self._align(other)
        if not a.c.any() or not b.c.any():
            return Jet(a.space, np.zeros(a.space.n))
        I, J, K = a.space.mul_table
        prod = a.c[I] * b.c[J]
        return Jet(a.space, np.bincount(K, weights=prod, minlength=a.space.n))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.space, self.c / float(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, expo):
        if isinstance(expo, int) and expo >= 0:
            out = Jet.constant(self.space, 1.0)
            base = self
            k = expo
            while k:
                if k & 1:
                    out = out * base
                k >>= 1
                if k:
                    base = base * base
            return out
        return self.analytic(_pow_coeffs(float(expo)))

    # -- analytic composition ---------------------------------------------
    def analytic(self, coeff_fn) -> "Jet":
        """Compose with a scalar analytic function.

        ``coeff_fn(x0, m)`` must return the Taylor coefficients
        ``f^(k)(x0)/k!`` for ``k = 0..m``.
        """
        m = self.space.order
        a = coeff_fn(self.value, m)
        delta = Jet(self.space, self.c.copy())
        delta.c[0] = 0.0
        out = Jet.constant(self.space, a[m])
        for k in range(m - 1, -1, -1):
            out = out * delta
            out.c[0] += a[k]
        return out

    def exp(self):
        return self.analytic(_exp_coeffs)

    def log(self):
        return self.analytic(_log_coeffs)

    def sqrt(self):
        return self.analytic(_pow_coeffs(0.5))

    def reciprocal(self):
        return self.analytic(_pow_coeffs(-1.0))

    def sin(self):
        return self.analytic(_sin_coeffs)

    def cos(self):
        return self.analytic(_cos_coeffs)

    # -- substitution -------------------------------------------------------
    def substitute(self, args: Sequence["Jet"]) -> "Jet":
        """Jet of ``f(g_1(u), ..., g_dim(u))`` given jets of the ``g_i``.

        ``self`` is the jet of f at the point ``(g_1(u0), ..., g_dim(u0))``;
        the constant terms of ``args`` must equal that base point.
        """
        if len(args) != self.space.dim:
            raise ArgumentError("substitution arity mismatch")
        tspace = args[0].space
        m = min(self.space.order, tspace.order)
        deltas = []
        for g in args:
            gt = g.truncate(m) if g.space.order != m else g
            dg = Jet(gt.space, gt.c.copy())
            dg.c[0] = 0.0
            deltas.append(dg)
        out_space = deltas[0].space
        powers = [[Jet.constant(out_space, 1.0)] for _ in range(self.space.dim)]
        for i in range(self.space.dim):
            for _ in range(m):
                powers[i].append(powers[i][-1] * deltas[i])
        acc = Jet.constant(out_space, 0.0)
        for pos, alpha in enumerate(self.space.alphas):
            if sum(alpha) > m:
                break
            coef = self.c[pos]
            if coef == 0.0:
                continue
            term = Jet.constant(out_space, coef)
            for i, k in enumerate(alpha):
                if k:
                    term = term * powers[i][k]
            acc = acc + term
        return acc

    # -- calculus -----------------------------------------------------------
    def derivative(self, axis: int) -> "Jet":
        """Jet of the partial derivative along ``axis`` (one order lower)."""
        lower, src, fac = self.space.deriv_table(axis)
        return Jet(lower, self.c[src] * fac)

    def __repr__(self):
        return f"Jet(dim={self.space.dim}, order={self.space.order}, value={self.value!r})"


# -- coefficient generators -------------------------------------------------

def _exp_coeffs(x0, m):
    e = math.exp(x0)
    out = np.empty(m + 1)
    f = 1.0
    for k in range(m + 1):
        out[k] = e / f
        f *= k + 1
    return out


def _log_coeffs(x0, m):
    if x0 <= 0:
        raise ArgumentError("log of non-positive jet value")
    out = np.empty(m + 1)
    out[0] = math.log(x0)
    for k in range(1, m + 1):
        out[k] = ((-1.0) ** (k - 1)) / (k * x0**k)
    return out


def _pow_coeffs(r):
    def gen(x0, m):
        out = np.empty(m + 1)
        coef = 1.0
        for k in range(m + 1):
            out[k] = coef * x0 ** (r - k)
            coef *= (r - k) / (k + 1)
        return out

    return gen


def _sin_coeffs(x0, m):
    s, c = math.sin(x0), math.cos(x0)
    cycle = [s, c, -s, -c]
    f = 1.0
    out = np.empty(m + 1)
    for k in range(m + 1):
        out[k] = cycle[k % 4] / f
        f *= k + 1
    return out


def _cos_coeffs(x0, m):
    s, c = math.sin(x0), math.cos(x0)
    cycle = [c, -s, -c, s]
    f = 1.0
    out = np.empty(m + 1)
    for k in range(m + 1):
        out[k] = cycle[k % 4] / f
        f *= k + 1
    return out


# -- matrix helpers ----------------------------------------------------------

def jet_linear_solve(A, rhs):
    """Solve ``A x = rhs`` for jets with partial pivoting on leading values.

    ``A`` is an (n, n) object array of jets, ``rhs`` a length-n list; works
    for any invertible leading-value matrix (used for frame solves).
    """
    n = A.shape[0]
    M = np.empty((n, n + 1), dtype=object)
    for i in range(n):
        for j in range(n):
            M[i, j] = A[i, j]
        M[i, n] = rhs[i]
    perm = list(range(n))
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(M[r, col].value))
        if abs(M[piv, col].value) < 1e-200:
            raise ArgumentError("singular jet system")
        if piv != col:
            M[[col, piv]] = M[[piv, col]]
        inv_piv = M[col, col].reciprocal()
        for j in range(col, n + 1):
            M[col, j] = M[col, j] * inv_piv
        for row in range(n):
            if row == col:
                continue
            factor = M[row, col]
            if np.all(factor.c == 0.0):
                continue
            for j in range(col, n + 1):
                M[row, j] = M[row, j] - factor * M[col, j]
    return [M[i, n] for i in range(n)]


def jet_matrix_inverse(G):
    """Invert a square matrix of jets by Gauss-Jordan elimination.

    Pivots are taken along the diagonal; callers only pass symmetric
    positive-definite matrices (metrics), for which that is safe.
    """
    n = G.shape[0]
    space = G[0, 0].space
    A = np.empty((n, 2 * n), dtype=object)
    for i in range(n):
        for j in range(n):
            A[i, j] = G[i, j]
            A[i, n + j] = Jet.constant(space, 1.0 if i == j else 0.0)
    for col in range(n):
        piv = A[col, col]
        if abs(piv.value) < 1e-300:
            raise ArgumentError("singular jet matrix")
        inv_piv = piv.reciprocal()
        for j in range(2 * n):
            A[col, j] = A[col, j] * inv_piv
        for row in range(n):
            if row == col:
                continue
            factor = A[row, col]
            if isinstance(factor, Jet) and np.all(factor.c == 0.0):
                continue
            for j in range(2 * n):
                A[row, j] = A[row, j] - factor * A[col, j]
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i, j] = A[i, n + j]
    return out
