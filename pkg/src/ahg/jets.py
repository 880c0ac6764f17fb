"""Truncated multivariate Taylor (jet) arithmetic.

A jet stores the Taylor coefficients of a smooth scalar field at a point,
up to a fixed total degree (order <= 3 everywhere in this package).  All
operations -- ring arithmetic, composition with elementary functions,
partial derivatives -- are exact on the truncated algebra, so second and
third derivatives of metric components come out to machine precision
instead of finite-difference precision.

Coefficients are stored in the *Taylor normalization* c_beta = (d^beta f)/beta!
in a flat array whose last axis enumerates multi-indices in graded
lexicographic order.  Any leading axes are broadcast batch axes, so a whole
sample of points (or a matrix of components) is one array operation.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

__all__ = ["JetSpace", "Jet", "space", "variable", "constant",
           "sin", "cos", "tan", "exp", "log", "sqrt", "atan",
           "matmul", "matinv", "transpose"]

MAX_ORDER = 3


def _multi_indices(dim, order):
    """Multi-indices of total degree <= order, graded-lex sorted.

    The graded ordering makes the degree-<=q prefix of the (dim, q+1)
    enumeration identical to the (dim, q) enumeration, so truncation is a
    slice.
    """
    out = []
    for deg in range(order + 1):
        block = set()
        for combo in combinations_with_replacement(range(dim), deg):
            m = [0] * dim
            for i in combo:
                m[i] += 1
            block.add(tuple(m))
        out.extend(sorted(block))
    return out


class JetSpace:
    """Index tables for (dim, order) jets; built once and cached."""

    def __init__(self, dim: int, order: int):
        if not (0 <= order <= MAX_ORDER):
            raise ValueError(f"jet order {order} outside supported range 0..{MAX_ORDER}")
        self.dim = dim
        self.order = order
        self.multis = _multi_indices(dim, order)
        self.ncoef = len(self.multis)
        self.index = {m: k for k, m in enumerate(self.multis)}
        self._build_mul_table()
        self._build_diff_tables()

    def _build_mul_table(self):
        # all (i, j, k) with multi_i + multi_j = multi_k, grouped contiguously by k
        pairs = []
        for k, mk in enumerate(self.multis):
            for i, mi in enumerate(self.multis):
                mj = tuple(a - b for a, b in zip(mk, mi))
                if min(mj) < 0:
                    continue
                pairs.append((k, i, self.index[mj]))
        pairs.sort()
        ks = np.array([p[0] for p in pairs])
        self._mul_i = np.array([p[1] for p in pairs])
        self._mul_j = np.array([p[2] for p in pairs])
        # segment starts for reduceat: first occurrence of each k (every k occurs)
        self._mul_starts = np.searchsorted(ks, np.arange(self.ncoef))

    def _build_diff_tables(self):
        # d/dx_i maps coefficient at beta+e_i (weight beta_i+1) to beta
        if self.order == 0:
            self._diff_idx = [np.zeros(0, dtype=int)] * self.dim
            self._diff_mul = [np.zeros(0)] * self.dim
            self._ncoef_down = 0
            return
        down = _multi_indices(self.dim, self.order - 1)
        self._ncoef_down = len(down)
        self._diff_idx, self._diff_mul = [], []
        for i in range(self.dim):
            idx, mul = [], []
            for m in down:
                up = list(m)
                up[i] += 1
                idx.append(self.index[tuple(up)])
                mul.append(up[i])
            self._diff_idx.append(np.array(idx))
            self._diff_mul.append(np.array(mul, dtype=float))

    def mul_coef(self, a, b):
        a, b = np.broadcast_arrays(a, b)
        prod = a[..., self._mul_i] * b[..., self._mul_j]
        return np.add.reduceat(prod, self._mul_starts, axis=-1)


@lru_cache(maxsize=None)
def space(dim: int, order: int) -> JetSpace:
    return JetSpace(dim, order)


@lru_cache(maxsize=None)
def _lift_map(src_dim, dst_dim, order, var_map):
    """Positions in the dst space of each src multi-index under var_map."""
    src = space(src_dim, order)
    dst = space(dst_dim, order)
    out = []
    for m in src.multis:
        mm = [0] * dst_dim
        for i, e in enumerate(m):
            mm[var_map[i]] += e
        out.append(dst.index[tuple(mm)])
    return np.array(out)


class Jet:
    """A batch of truncated Taylor expansions; last axis = coefficients."""

    __slots__ = ("dim", "order", "coef")
    __array_priority__ = 100  # win against ndarray in mixed dunder ops

    def __init__(self, dim, order, coef):
        self.dim = dim
        self.order = order
        self.coef = np.asarray(coef)

    @property
    def space(self) -> JetSpace:
        return space(self.dim, self.order)

    @property
    def value(self):
        return self.coef[..., 0]

    def truncate(self, order):
        if order > self.order:
            raise ValueError("cannot raise jet order by truncation")
        if order == self.order:
            return self
        return Jet(self.dim, order, self.coef[..., : space(self.dim, order).ncoef])

    def _coerce(self, other):
        """Return (self', other') as Jets on a common (dim, order)."""
        if isinstance(other, Jet):
            if other.dim != self.dim:
                raise ValueError("jet dimension mismatch")
            q = min(self.order, other.order)
            return self.truncate(q), other.truncate(q)
        return self, constant(self.dim, self.order, other)

    # ---- ring operations -------------------------------------------------

    def __add__(self, other):
        a, b = self._coerce(other)
        return Jet(a.dim, a.order, a.coef + b.coef)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.dim, self.order, -self.coef)

    def __sub__(self, other):
        a, b = self._coerce(other)
        return Jet(a.dim, a.order, a.coef - b.coef)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.dim, self.order, self.coef * np.asarray(other)[..., None])
        a, b = self._coerce(other)
        return Jet(a.dim, a.order, a.space.mul_coef(a.coef, b.coef))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other))
        a, b = self._coerce(other)
        return a * b._reciprocal()

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def _reciprocal(self):
        v = self.value
        return _compose(self, [1.0 / v, -v ** -2.0, 2.0 * v ** -3.0, -6.0 * v ** -4.0])

    def __pow__(self, expo):
        if isinstance(expo, float) and expo.is_integer():
            expo = int(expo)
        if isinstance(expo, Fraction) and expo.denominator == 1:
            expo = int(expo)
        if isinstance(expo, int):
            if expo < 0:
                return self._reciprocal() ** (-expo)
            out = constant(self.dim, self.order, 1.0)
            base = self
            e = expo
            while e:
                if e & 1:
                    out = out * base
                base = base * base
                e >>= 1
            return out
        r = float(Fraction(expo))
        v = self.value
        if np.any(v <= 0.0):
            raise ValueError("fractional power of non-positive jet value")
        derivs = [v ** r]
        c = 1.0
        for k in range(3):
            c *= r - k
            derivs.append(c * v ** (r - k - 1))
        return _compose(self, derivs)

    # ---- calculus --------------------------------------------------------

    def partial(self, i: int) -> "Jet":
        """d/dx_i as a jet of one lower order."""
        sp = self.space
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        c = self.coef[..., sp._diff_idx[i]] * sp._diff_mul[i]
        return Jet(self.dim, self.order - 1, c)

    def grad(self):
        """First derivatives, shape (..., dim)."""
        sp = self.space
        cols = [self.coef[..., sp.index[tuple(1 if j == i else 0 for j in range(self.dim))]]
                for i in range(self.dim)]
        return np.stack(cols, axis=-1)

    def hess(self):
        """Second derivatives, shape (..., dim, dim), symmetric by construction."""
        sp = self.space
        d = self.dim
        out = np.empty(self.coef.shape[:-1] + (d, d))
        for i in range(d):
            for j in range(i, d):
                m = [0] * d
                m[i] += 1
                m[j] += 1
                c = self.coef[..., sp.index[tuple(m)]]
                if i == j:
                    c = 2.0 * c
                out[..., i, j] = c
                out[..., j, i] = c
        return out

    def derivative(self, multi):
        """d^multi f as plain array (includes the beta! factor)."""
        fac = 1.0
        for e in multi:
            fac *= math.factorial(e)
        return self.coef[..., self.space.index[tuple(multi)]] * fac

    def lift(self, dst_dim: int, var_map: tuple) -> "Jet":
        """Reinterpret in a larger variable space; var_map[i] = new index of x_i."""
        idx = _lift_map(self.dim, dst_dim, self.order, tuple(var_map))
        out = np.zeros(self.coef.shape[:-1] + (space(dst_dim, self.order).ncoef,))
        out[..., idx] = self.coef
        return Jet(dst_dim, self.order, out)


def constant(dim, order, value) -> Jet:
    value = np.asarray(value, dtype=float)
    coef = np.zeros(value.shape + (space(dim, order).ncoef,))
    coef[..., 0] = value
    return Jet(dim, order, coef)


def variable(dim, order, i, value) -> Jet:
    """The coordinate function x_i seeded at the given value(s)."""
    out = constant(dim, order, value)
    if order >= 1:
        out.coef[..., space(dim, order).index[tuple(1 if j == i else 0 for j in range(dim))]] = 1.0
    return out


def _compose(u: Jet, derivs) -> Jet:
    """Composite f(u) given f^{(k)}(u.value) for k = 0..3 (truncated Horner)."""
    h = Jet(u.dim, u.order, u.coef.copy())
    h.coef[..., 0] = 0.0
    q = u.order
    acc = constant(u.dim, q, derivs[min(3, q)] / math.factorial(min(3, q)))
    for k in range(min(3, q) - 1, -1, -1):
        acc = acc * h + constant(u.dim, q, derivs[k] / math.factorial(k))
    return acc


def sin(u):
    if not isinstance(u, Jet):
        return np.sin(u)
    s, c = np.sin(u.value), np.cos(u.value)
    return _compose(u, [s, c, -s, -c])


def cos(u):
    if not isinstance(u, Jet):
        return np.cos(u)
    s, c = np.sin(u.value), np.cos(u.value)
    return _compose(u, [c, -s, -c, s])


def tan(u):
    if not isinstance(u, Jet):
        return np.tan(u)
    t = np.tan(u.value)
    d1 = 1.0 + t * t
    return _compose(u, [t, d1, 2.0 * t * d1, d1 * (2.0 + 6.0 * t * t)])


def exp(u):
    if not isinstance(u, Jet):
        return np.exp(u)
    e = np.exp(u.value)
    return _compose(u, [e, e, e, e])


def log(u):
    if not isinstance(u, Jet):
        return np.log(u)
    v = u.value
    if np.any(v <= 0.0):
        raise ValueError("log of non-positive jet value")
    return _compose(u, [np.log(v), 1.0 / v, -v ** -2.0, 2.0 * v ** -3.0])


def sqrt(u):
    if not isinstance(u, Jet):
        return np.sqrt(u)
    return u ** Fraction(1, 2)


def atan(u):
    if not isinstance(u, Jet):
        return np.arctan(u)
    v = u.value
    d = 1.0 + v * v
    return _compose(u, [np.arctan(v), 1.0 / d, -2.0 * v / d ** 2, (6.0 * v * v - 2.0) / d ** 3])


def einsum(spec: str, A, B) -> "Jet":
    """Tensor contraction of two jet-valued (or plain-array) operands.

    `spec` is a two-operand einsum string such as ``"kl,ijl->kij"``.  Labels
    address the axes *between* the leading batch axes and the trailing
    coefficient axis.  Plain ndarrays are treated as constants.
    """
    ins, out = spec.split("->")
    la, lb = ins.split(",")
    if isinstance(A, np.ndarray) and isinstance(B, Jet):
        coef = np.einsum(f"...{la},...{lb}Z->...{out}Z", A, B.coef)
        return Jet(B.dim, B.order, coef)
    if isinstance(B, np.ndarray) and isinstance(A, Jet):
        coef = np.einsum(f"...{la}Z,...{lb}->...{out}Z", A.coef, B)
        return Jet(A.dim, A.order, coef)

    a, b = A._coerce(B)
    contracted = [c for c in la if c in lb and c not in out]
    order_all = list(out) + contracted

    def arrange(coef, labels):
        nb = coef.ndim - 1 - len(labels)
        perm = list(range(nb)) + [nb + labels.index(l) for l in order_all if l in labels]
        perm.append(coef.ndim - 1)
        c = np.transpose(coef, perm)
        # insert singleton axes for labels this operand lacks
        k = nb
        for l in order_all:
            if l not in labels:
                c = np.expand_dims(c, k)
            k += 1
        return c

    prod = a.space.mul_coef(arrange(a.coef, la), arrange(b.coef, lb))
    if contracted:
        axes = tuple(range(-1 - len(contracted), -1))
        prod = prod.sum(axis=axes)
    return Jet(a.dim, a.order, prod)


# ---- matrices of jets ------------------------------------------------------
# A matrix is a Jet whose last two batch axes (just before the coefficient
# axis) are the matrix axes.

def transpose(A: Jet) -> Jet:
    return Jet(A.dim, A.order, np.swapaxes(A.coef, -3, -2))


def matmul(A: Jet, B: Jet) -> Jet:
    a, b = A._coerce(B)
    prod = Jet(a.dim, a.order, a.coef[..., :, :, None, :]) * \
        Jet(b.dim, b.order, b.coef[..., None, :, :, :])
    return Jet(a.dim, a.order, prod.coef.sum(axis=-3))


def matinv(A: Jet) -> Jet:
    """Inverse of a square jet matrix.

    Writes A = A0 + H with H the derivative part; H is nilpotent in the
    truncated algebra, so the Neumann series sum_k (-A0^{-1} H)^k A0^{-1}
    terminates after `order` terms and the result is exact.
    """
    a0 = A.value
    x = constant(A.dim, A.order, np.linalg.inv(a0))
    h = A - constant(A.dim, A.order, a0)
    m = -matmul(x, h)
    out, p = x, m
    for _ in range(A.order):
        out = out + matmul(p, x)
        p = matmul(p, m)
    return out
