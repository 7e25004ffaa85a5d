"""Tensor/tractor-valued jets at a point and the operators acting on them.

A :class:`JetTT` holds the components of a (tensor x tractor)-valued quantity
as jets at one point, in one scale: ``nt`` covector (down) tensor axes first,
then ``nr`` tractor axes of dimension d+2.  Rank-1 tractor components are the
slot triple (sigma, mu_a, rho): position 0 is the Y-component, positions
1..d the covector block, position d+1 the X-component.

The coupled Levi-Civita/tractor connection, the tractor-D operator, the
Yamabe Box and the conformal Robin operator are all implemented here as maps
of jets; each derivative consumes jet order, and exhausting the order budget
surfaces as a CapabilityError from the field layer.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .curvature import PointGeometry
from .errors import ArgumentError, WeightError
from .jets import Jet


def _replaced(idx, axis, value):
    out = list(idx)
    out[axis] = value
    return tuple(out)


class JetTT:
    """Tensor-tractor components as jets at a point (one conformal scale)."""

    def __init__(self, geom: PointGeometry, comps: np.ndarray, nt: int, nr: int, weight, order: int):
        self.geom = geom
        self.comps = comps
        self.nt = nt
        self.nr = nr
        self.weight = weight if isinstance(weight, Fraction) else Fraction(weight)
        self.order = order
        d = geom.dim
        expect = (d,) * nt + (d + 2,) * nr
        if comps.shape != expect:
            raise ArgumentError(f"component shape {comps.shape} does not match {expect}")

    # -- constructors --------------------------------------------------------
    @staticmethod
    def scalar(geom, jet: Jet, weight, order) -> "JetTT":
        arr = np.empty((), dtype=object)
        arr[()] = jet.truncate(min(order, jet.space.order))
        return JetTT(geom, arr, 0, 0, weight, min(order, jet.space.order))

    @staticmethod
    def from_fields(geom, fields, nt, nr, weight, order) -> "JetTT":
        fields = np.asarray(fields, dtype=object)
        comps = np.empty(fields.shape, dtype=object)
        for idx in np.ndindex(fields.shape):
            comps[idx] = fields[idx].eval_jet(geom.point, order)
        return JetTT(geom, comps, nt, nr, weight, order)

    def values(self) -> np.ndarray:
        out = np.empty(self.comps.shape, dtype=float)
        for idx in np.ndindex(self.comps.shape):
            out[idx] = self.comps[idx].value
        return out

    def truncated(self, order) -> "JetTT":
        if order == self.order:
            return self
        out = np.empty(self.comps.shape, dtype=object)
        for idx in np.ndindex(self.comps.shape):
            out[idx] = self.comps[idx].truncate(order)
        return JetTT(self.geom, out, self.nt, self.nr, self.weight, order)

    # -- algebra ---------------------------------------------------------------
    def __add__(self, other: "JetTT") -> "JetTT":
        if other.comps.shape != self.comps.shape:
            raise ArgumentError("shape mismatch in JetTT addition")
        order = min(self.order, other.order)
        out = np.empty(self.comps.shape, dtype=object)
        for idx in np.ndindex(self.comps.shape):
            out[idx] = self.comps[idx].truncate(order) + other.comps[idx].truncate(order)
        return JetTT(self.geom, out, self.nt, self.nr, self.weight, order)

    def __sub__(self, other: "JetTT") -> "JetTT":
        return self + other.scaled(-1.0)

    def scaled(self, factor) -> "JetTT":
        out = np.empty(self.comps.shape, dtype=object)
        for idx in np.ndindex(self.comps.shape):
            out[idx] = self.comps[idx] * factor
        return JetTT(self.geom, out, self.nt, self.nr, self.weight, self.order)

    def times_jet(self, jet: Jet, weight_shift=0) -> "JetTT":
        order = min(self.order, jet.space.order)
        out = np.empty(self.comps.shape, dtype=object)
        for idx in np.ndindex(self.comps.shape):
            out[idx] = self.comps[idx] * jet
        return JetTT(self.geom, out, self.nt, self.nr, self.weight + weight_shift, order)

    # -- coupled connection -------------------------------------------------
    def grad(self) -> "JetTT":
        """Coupled Levi-Civita/tractor derivative; prepends one down index.

        Densities are differentiated as representatives (no extra term);
        each tensor axis gets a Christoffel correction; each tractor axis
        gets the standard-tractor connection action on its slot triple.
        """
        geom = self.geom
        d = geom.dim
        q = self.order
        gamma = geom.gamma(q - 1)
        P = geom.schouten(q - 1)
        Pmix = geom.schouten_mixed(q - 1)
        g = geom.g(q - 1)
        shape = self.comps.shape
        out = np.empty((d,) + shape, dtype=object)
        for a in range(d):
            for idx in np.ndindex(shape):
                acc = self.comps[idx].derivative(a)
                for slot in range(self.nt):
                    i = idx[slot]
                    for c in range(d):
                        acc = acc - gamma[c, a, i] * self.comps[_replaced(idx, slot, c)]
                for k in range(self.nr):
                    axis = self.nt + k
                    s = idx[axis]
                    if s == 0:
                        acc = acc - self.comps[_replaced(idx, axis, 1 + a)]
                    elif s <= d:
                        b = s - 1
                        for c in range(d):
                            acc = acc - gamma[c, a, b] * self.comps[_replaced(idx, axis, 1 + c)]
                        acc = acc + g[a, b] * self.comps[_replaced(idx, axis, d + 1)]
                        acc = acc + P[a, b] * self.comps[_replaced(idx, axis, 0)]
                    else:
                        for c in range(d):
                            acc = acc - Pmix[a, c] * self.comps[_replaced(idx, axis, 1 + c)]
                out[(a,) + idx] = acc
        return JetTT(geom, out, self.nt + 1, self.nr, self.weight, q - 1)

    def laplacian(self) -> "JetTT":
        """Delta = -g^{ab} nabla_a nabla_b (coupled connection)."""
        return self.grad().grad().contract_tensor(0, 1).scaled(-1.0)

    # -- contractions -----------------------------------------------------------
    def contract_tensor(self, ax1, ax2) -> "JetTT":
        if ax1 >= self.nt or ax2 >= self.nt or ax1 == ax2:
            raise ArgumentError("contract_tensor needs two distinct tensor axes")
        d = self.geom.dim
        ginv = self.geom.ginv(self.order)
        shape = self.comps.shape
        keep = [k for k in range(len(shape)) if k not in (ax1, ax2)]
        out_shape = tuple(shape[k] for k in keep)
        out = np.empty(out_shape, dtype=object)
        for odx in np.ndindex(out_shape):
            acc = None
            base = [0] * len(shape)
            for k, pos in enumerate(keep):
                base[pos] = odx[k]
            for a in range(d):
                for b in range(d):
                    base[ax1], base[ax2] = a, b
                    term = ginv[a, b] * self.comps[tuple(base)]
                    acc = term if acc is None else acc + term
            out[odx] = acc
        return JetTT(self.geom, out, self.nt - 2, self.nr, self.weight - 2, self.order)

    def _pairing_pairs(self, order):
        """Nonzero slot-pairing entries [(A, B, jet)] at the given order."""
        d = self.geom.dim
        ginv = self.geom.ginv(order)
        one = Jet.constant(ginv[0, 0].space, 1.0)
        pairs = [(0, d + 1, one), (d + 1, 0, one)]
        for a in range(d):
            for b in range(d):
                pairs.append((1 + a, 1 + b, ginv[a, b]))
        return pairs

    def contract_tractor(self, ax1, ax2) -> "JetTT":
        nt, nr = self.nt, self.nr
        if not (nt <= ax1 < nt + nr and nt <= ax2 < nt + nr and ax1 != ax2):
            raise ArgumentError("contract_tractor needs two distinct tractor axes")
        pairs = self._pairing_pairs(self.order)
        shape = self.comps.shape
        keep = [k for k in range(len(shape)) if k not in (ax1, ax2)]
        out_shape = tuple(shape[k] for k in keep)
        out = np.empty(out_shape, dtype=object)
        for odx in np.ndindex(out_shape):
            acc = None
            base = [0] * len(shape)
            for k, pos in enumerate(keep):
                base[pos] = odx[k]
            for A, B, h in pairs:
                base[ax1], base[ax2] = A, B
                term = h * self.comps[tuple(base)]
                acc = term if acc is None else acc + term
            out[odx] = acc
        return JetTT(self.geom, out, nt, nr - 2, self.weight, self.order)

    def contract_with(self, vec: "JetTT", axis) -> "JetTT":
        """Contract one tractor axis against a rank-1 tractor (slot pairing)."""
        if vec.nr != 1 or vec.nt != 0:
            raise ArgumentError("contract_with expects a rank-1 tractor")
        order = min(self.order, vec.order)
        pairs = self._pairing_pairs(order)
        shape = self.comps.shape
        keep = [k for k in range(len(shape)) if k != axis]
        out_shape = tuple(shape[k] for k in keep)
        out = np.empty(out_shape, dtype=object)
        for odx in np.ndindex(out_shape):
            acc = None
            base = [0] * len(shape)
            for k, pos in enumerate(keep):
                base[pos] = odx[k]
            for A, B, h in pairs:
                base[axis] = B
                term = h * vec.comps[(A,)] * self.comps[tuple(base)]
                acc = term if acc is None else acc + term
            out[odx] = acc
        return JetTT(self.geom, out, self.nt, self.nr - 1, self.weight + vec.weight, order)

    # -- invariant operators -------------------------------------------------
    def thomas_D(self) -> "JetTT":
        """Tractor-D: slots ((d+2w-2) w V, (d+2w-2) nabla V, (Delta - w J) V).

        Defined on weighted tractors (no free tensor indices); prepends the
        new tractor axis in front of the existing ones and lowers the weight
        by one.  Consumes two jet orders.
        """
        if self.nt != 0:
            raise ArgumentError("tractor-D acts on weighted tractors, not tensor-valued ones")
        geom = self.geom
        d = geom.dim
        w = self.weight
        c_top = float((d + 2 * w - 2) * w)
        c_mid = float(d + 2 * w - 2)
        q = self.order
        grad = self.grad()
        lap = grad.grad().contract_tensor(0, 1).scaled(-1.0)
        J = geom.jtrace(q - 2)
        shape = self.comps.shape
        out = np.empty((d + 2,) + shape, dtype=object)
        for idx in np.ndindex(shape):
            base = self.comps[idx].truncate(q - 2)
            out[(0,) + idx] = base * c_top
            for a in range(d):
                out[(1 + a,) + idx] = grad.comps[(a,) + idx].truncate(q - 2) * c_mid
            out[(d + 1,) + idx] = lap.comps[idx] - J * base * float(w)
        return JetTT(geom, out, 0, self.nr + 1, w - 1, q - 2)

    def yamabe_box(self) -> "JetTT":
        """Box = Delta - w J at w = 1 - d/2 (weight checked)."""
        d = self.geom.dim
        if self.weight != Fraction(2 - d, 2):
            raise WeightError(
                f"Box acts at weight {Fraction(2 - d, 2)}, got {self.weight}"
            )
        return self.box_any_weight()

    def box_any_weight(self) -> "JetTT":
        w = self.weight
        lap = self.laplacian()
        J = self.geom.jtrace(lap.order)
        out = np.empty(self.comps.shape, dtype=object)
        for idx in np.ndindex(self.comps.shape):
            out[idx] = lap.comps[idx] - J * self.comps[idx].truncate(lap.order) * float(w)
        return JetTT(self.geom, out, self.nt, self.nr, w - 2, lap.order)

    def robin(self, conormal_jets, mean_curv_jet) -> "JetTT":
        """delta = n^a nabla_a - w H (conormal given as down components)."""
        d = self.geom.dim
        grad = self.grad()
        ginv = self.geom.ginv(grad.order)
        w = float(self.weight)
        shape = self.comps.shape
        out = np.empty(shape, dtype=object)
        for idx in np.ndindex(shape):
            acc = None
            for a in range(d):
                for b in range(d):
                    term = ginv[a, b] * conormal_jets[b] * grad.comps[(a,) + idx]
                    acc = term if acc is None else acc + term
            out[idx] = acc - mean_curv_jet * self.comps[idx].truncate(grad.order) * w
        return JetTT(self.geom, out, self.nt, self.nr, self.weight - 1, grad.order)
