"""Coordinate-chart tensor calculus.

A chart carries jet-evaluable component fields for a Riemannian metric g and
(optionally) an almost complex structure J on a box domain.  Everything
downstream -- Christoffel symbols, curvature in an adapted orthonormal frame,
exterior derivative, codifferential, covariant derivatives -- is computed
from exact jets of those fields at batches of points.

Conventions (fixed package-wide):

* curvature: R(X,Y,Z,W) = <grad_Z grad_W Y - grad_W grad_Z Y - grad_[Z,W] Y, X>,
  so the first slot is the inner-product slot and R(e1,e2,e1,e2) > 0 on a
  round sphere;
* codifferential on an l-form: (delta a)_{j...} = -g^{pq} (grad_p a)_{q j...},
  the negative divergence on the leading index;
* Hodge Laplacian on functions is the positive operator delta d.

Arrays are batched over points: `points` has shape (B, dim) and component
tensors carry the batch axis first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import exprs, jets

__all__ = ["Box", "ChartSpec", "ChartError", "SingularMetricError",
           "ExprMatrixField", "CallableMatrixField", "Geometry",
           "TensorValue", "FrameAtPoint",
           "christoffel", "riemann", "adapted_frame", "ext_d", "codiff",
           "covder_form", "hodge_laplacian_fn", "frame_curvature"]


class ChartError(ValueError):
    pass


class SingularMetricError(ChartError):
    pass


@dataclass(frozen=True)
class Box:
    """Open coordinate box with optional per-axis periodicity."""
    lo: tuple
    hi: tuple
    periodic: tuple = None

    def __post_init__(self):
        if self.periodic is None:
            object.__setattr__(self, "periodic", (False,) * len(self.lo))

    @property
    def dim(self):
        return len(self.lo)

    def sample(self, count, seed, margin=0.05):
        """Seeded uniform interior points, shape (count, dim)."""
        rng = np.random.default_rng(seed)
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        pad = margin * (hi - lo)
        return rng.uniform(lo + pad, hi - pad, size=(count, self.dim))


class ExprMatrixField:
    """Matrix of scalar fields given as expression ASTs (or source strings)."""

    def __init__(self, entries, dim):
        self.dim = dim
        self.entries = [[exprs.parse_expression(e, dim) if isinstance(e, str) else e
                         for e in row] for row in entries]
        self.shape = (len(self.entries), len(self.entries[0]))

    def jets(self, points, order):
        points = np.asarray(points, dtype=float)
        rows = []
        for row in self.entries:
            rows.append([exprs.eval_jet(e, points, order, dim=self.dim).coef for e in row])
        coef = np.stack([np.stack(r, axis=-2) for r in rows], axis=-3)
        return jets.Jet(self.dim, order, coef)


class CallableMatrixField:
    """Matrix field backed by a callable(points, order) -> Jet."""

    def __init__(self, fn, dim, max_order=jets.MAX_ORDER):
        self.fn = fn
        self.dim = dim
        self.max_order = max_order

    def jets(self, points, order):
        if order > self.max_order:
            raise ChartError(f"field supports jets only to order {self.max_order}")
        return self.fn(np.asarray(points, dtype=float), order)


@dataclass
class ChartSpec:
    """A coordinate chart of real dimension 2n with metric and optional J."""
    name: str
    n: int
    domain: Box
    g: object
    J: object = None
    max_jet_order: int = jets.MAX_ORDER
    meta: dict = field(default_factory=dict)

    @property
    def dim(self):
        return 2 * self.n

    def g_jets(self, points, order):
        return self.g.jets(points, min(order, self.max_jet_order))

    def J_jets(self, points, order):
        if self.J is None:
            raise ChartError(f"chart {self.name!r} carries no almost complex structure")
        return self.J.jets(points, min(order, self.max_jet_order))

    def geometry(self, points, order=2, frame_seed=None):
        return Geometry(self, points, order=order, frame_seed=frame_seed)


@dataclass
class TensorValue:
    """Components of a tensor at a batch of points.

    `variance` is a string over {'u','l'} per index; `frame` is one of
    'coordinate', 'orthonormal', 'unitary'.
    """
    components: np.ndarray
    variance: str
    frame: str
    points: np.ndarray
    jet: object = None


@dataclass
class FrameAtPoint:
    """J-adapted g-orthonormal frame e_A (columns) with jets, plus u_i data."""
    points: np.ndarray
    E: np.ndarray          # (B, dim, dim); E[:, mu, A] is e_A
    E_jet: jets.Jet
    coframe: np.ndarray    # (B, dim, dim); coframe[:, A, mu] = theta^A(d_mu)
    n: int

    @property
    def U(self):
        """Complex matrix with column i = components of u_i in the frame basis."""
        n = self.n
        u = np.zeros((2 * n, n), dtype=complex)
        for i in range(n):
            u[i, i] = 1.0 / np.sqrt(2.0)
            u[n + i, i] = -1j / np.sqrt(2.0)
        return u


def _frame_ip(g, u, v):
    w = jets.einsum("ij,j->i", g, v)
    return jets.einsum("i,i->", u, w)


def _gram_schmidt(gj, Jj, n, tol=1e-10):
    """J-adapted (or plain, if Jj is None) Gram-Schmidt in jet arithmetic.

    Seeds each step with the lowest-index coordinate basis vector whose
    residual against the span built so far stays above `tol` across the whole
    batch, then orthonormalizes; with J present the partner J e_k is appended
    so that e_{n+k} = J e_k exactly.
    """
    d = 2 * n
    built = []        # jets (B, d, C), in construction order
    eye = np.eye(d)

    def residual(mu):
        v = jets.constant(gj.dim, gj.order, np.broadcast_to(eye[mu], gj.coef.shape[:-3] + (d,)))
        for e in built:
            v = v - jets.einsum(",i->i", _frame_ip(gj, e, v), e)
        return v

    def next_vector():
        for mu in range(d):
            v = residual(mu)
            if np.min(_frame_ip(gj, v, v).value) > tol:
                return v
        raise ChartError("degenerate metric: Gram-Schmidt ran out of directions")

    if Jj is None:
        for _ in range(d):
            v = next_vector()
            built.append(jets.einsum("i,->i", v, _frame_ip(gj, v, v) ** -0.5))
        cols = built
    else:
        heads = []
        for _ in range(n):
            v = next_vector()
            e = jets.einsum("i,->i", v, _frame_ip(gj, v, v) ** -0.5)
            je = jets.einsum("ij,j->i", Jj, e)
            built.extend([e, je])
            heads.append(e)
        cols = heads + [built[2 * k + 1] for k in range(n)]
    return jets.Jet(gj.dim, gj.order, np.stack([c.coef for c in cols], axis=-2))


class Geometry:
    """Lazy per-batch cache of chart-level geometric data.

    Heavy quantities (jets of the metric, the adapted frame, frame-level
    connection coefficients and curvature) are computed once per (chart,
    points, order) and reused by every operation that needs them.
    """

    def __init__(self, chart, points, order=2, frame_seed=None):
        self.chart = chart
        self.points = np.asarray(points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[None, :]
        self.order = min(order, chart.max_jet_order)
        self.frame_seed = frame_seed
        self.dim = chart.dim
        self.n = chart.n

    # ---- fields ----------------------------------------------------------

    @cached_property
    def gj(self) -> jets.Jet:
        return self.chart.g_jets(self.points, self.order)

    @cached_property
    def Jj(self):
        return None if self.chart.J is None else self.chart.J_jets(self.points, self.order)

    @cached_property
    def g(self):
        gv = self.gj.value
        eig = np.linalg.eigvalsh(gv)
        if np.min(eig) < 1e-12:
            k = int(np.argmin(eig.min(axis=-1)))
            raise SingularMetricError(
                f"metric eigenvalue {eig.min():.3e} below 1e-12 at point {self.points[k]}")
        return gv

    @cached_property
    def ginv_j(self) -> jets.Jet:
        self.g  # singularity gate
        return jets.matinv(self.gj)

    @cached_property
    def ginv(self):
        return self.ginv_j.value

    @cached_property
    def Jv(self):
        return self.Jj.value

    # ---- Levi-Civita connection ------------------------------------------

    @cached_property
    def dg(self) -> jets.Jet:
        """Jets of d_p g_ij, axes (B, p, i, j)."""
        c = np.stack([self.gj.partial(p).coef for p in range(self.dim)], axis=-4)
        return jets.Jet(self.gj.dim, self.gj.order - 1, c)

    @cached_property
    def gamma_j(self) -> jets.Jet:
        """Christoffel jets Gamma^k_ij, axes (B, k, i, j)."""
        c = self.dg.coef
        # sym[i,j,l] = d_i g_jl + d_j g_il - d_l g_ij, from c[p,a,b] = d_p g_ab
        sym = c + np.swapaxes(c, -4, -3) - np.moveaxis(c, -4, -2)
        sym = jets.Jet(self.dg.dim, self.dg.order, sym)
        return jets.einsum("kl,ijl->kij", self.ginv_j.truncate(self.dg.order), sym) * 0.5

    @cached_property
    def gamma(self):
        return self.gamma_j.value

    # ---- adapted frame -----------------------------------------------------

    @cached_property
    def frame_j(self) -> jets.Jet:
        if self.frame_seed is None:
            return _gram_schmidt(self.gj, self.Jj if self.chart.J is not None else None, self.n)
        return _seeded_frame(self, self.frame_seed)

    @cached_property
    def frame(self) -> FrameAtPoint:
        E = self.frame_j.value
        return FrameAtPoint(points=self.points, E=E, E_jet=self.frame_j,
                            coframe=np.linalg.inv(E), n=self.n)

    # ---- frame-level connection and curvature ------------------------------

    @cached_property
    def lc_gamma_frame_j(self) -> jets.Jet:
        """gamma[a,b,c] = <grad_{e_a} e_b, e_c> as jets."""
        E = self.frame_j
        q = self.order - 1
        dE = jets.Jet(E.dim, q, np.stack([E.partial(p).coef for p in range(self.dim)], axis=-4))
        # X^k_{ab} = e_a^i d_i E^k_b + Gamma^k_{ij} E^i_a E^j_b
        x = jets.einsum("ia,ikb->kab", E.truncate(q), dE)
        x = x + jets.einsum("kij,iajb->kab",
                            self.gamma_j,
                            jets.einsum("ia,jb->iajb", E.truncate(q), E.truncate(q)))
        return jets.einsum("kab,kc->abc",
                           x, jets.einsum("kl,lc->kc", self.gj.truncate(q), E.truncate(q)))

    @cached_property
    def structure_constants(self):
        """c[m,a,b] = <[e_a, e_b], e_m> (values)."""
        E = self.frame_j.value
        dE = self.frame_j.grad()           # (B, mu, A, nu) = d_nu E^mu_A
        lie = np.einsum("...va,...ubv->...uab", E, dE)
        lie = lie - np.swapaxes(lie, -1, -2)
        return np.einsum("...mu,...uab->...mab", self.frame.coframe, lie)

    @cached_property
    def R_frame(self):
        """Levi-Civita curvature R[A,B,C,D] in the adapted orthonormal frame."""
        return frame_curvature(self.lc_gamma_frame_j, self.frame.E, self.structure_constants)

    # ---- scalar shortcuts ---------------------------------------------------

    @cached_property
    def sqrt_det_g(self):
        return np.sqrt(np.linalg.det(self.g))


def _seeded_frame(geo, seed):
    """Adapted frame grown from a seeded random starting basis (for
    frame-independence checks)."""
    rng = np.random.default_rng(seed)
    basis = rng.standard_normal((geo.dim, geo.dim)) + np.eye(geo.dim) * 0.1
    gj, Jj, n = geo.gj, (geo.Jj if geo.chart.J is not None else None), geo.n

    built, heads = [], []

    def ortho(vec):
        v = jets.constant(gj.dim, gj.order, np.broadcast_to(vec, gj.coef.shape[:-3] + (geo.dim,)))
        for e in built:
            v = v - jets.einsum(",i->i", _frame_ip(gj, e, v), e)
        return v

    cols_needed = geo.dim if Jj is None else n
    k = 0
    for mu in range(geo.dim):
        if k == cols_needed:
            break
        v = ortho(basis[mu])
        if np.min(_frame_ip(gj, v, v).value) <= 1e-10:
            continue
        e = jets.einsum("i,->i", v, _frame_ip(gj, v, v) ** -0.5)
        if Jj is None:
            built.append(e)
        else:
            built.extend([e, jets.einsum("ij,j->i", Jj, e)])
            heads.append(e)
        k += 1
    if k < cols_needed:
        raise ChartError("seeded frame construction failed to span the tangent space")
    cols = built if Jj is None else heads + [built[2 * i + 1] for i in range(n)]
    return jets.Jet(gj.dim, gj.order, np.stack([c.coef for c in cols], axis=-2))


def frame_curvature(gamma_frame_j, E, struct_c):
    """Curvature from frame-level connection coefficients.

    R[A,B,C,D] = e_C(gam[D,B,A]) - e_D(gam[C,B,A])
                 + gam[D,B,M] gam[C,M,A] - gam[C,B,M] gam[D,M,A]
                 - c[M,C,D] gam[M,B,A]

    works for any metric connection expressed in an orthonormal frame; it is
    shared by the Levi-Civita and Chern pipelines.
    """
    gv = gamma_frame_j.value                     # (B,a,b,c)
    dgv = gamma_frame_j.grad()                   # (B,a,b,c,mu)
    eg = np.einsum("...um,...abcu->...mabc", E, dgv)
    quad = np.einsum("...dbm,...cma->...abcd", gv, gv)
    r = np.einsum("...cdba->...abcd", eg) - np.einsum("...dcba->...abcd", eg)
    r += quad - np.swapaxes(quad, -1, -2)
    r -= np.einsum("...mcd,...mba->...abcd", struct_c, gv)
    return r


# ---- public chart operations -------------------------------------------------


def christoffel(chart, points, order=2) -> TensorValue:
    """Christoffel symbols Gamma^k_ij in the coordinate frame, with jets."""
    geo = chart.geometry(points, order=order) if not isinstance(chart, Geometry) else chart
    return TensorValue(geo.gamma, "ull", "coordinate", geo.points, jet=geo.gamma_j)


def adapted_frame(chart, points, order=2, seed=None) -> FrameAtPoint:
    geo = chart.geometry(points, order=order, frame_seed=seed) \
        if not isinstance(chart, Geometry) else chart
    return geo.frame


def riemann(chart, points, order=2) -> TensorValue:
    """Riemann tensor R[A,B,C,D] in the adapted orthonormal frame."""
    geo = chart.geometry(points, order=order) if not isinstance(chart, Geometry) else chart
    return TensorValue(geo.R_frame, "llll", "orthonormal", geo.points)


def ext_d(form_jet: jets.Jet, degree: int) -> jets.Jet:
    """Exterior derivative of a coordinate-component form (jets in, jets out)."""
    if form_jet.order < 1:
        raise ChartError("exterior derivative needs at least 1-jets of the form")
    d = form_jet.dim
    D = np.stack([form_jet.partial(p).coef for p in range(d)], axis=-(degree + 2))
    out = D.copy()
    for m in range(1, degree + 1):
        out += ((-1) ** m) * np.moveaxis(D, -(degree + 2), -(degree + 2) + m)
    return jets.Jet(form_jet.dim, form_jet.order - 1, out)


def covder_form(form_jet: jets.Jet, degree: int, geo: Geometry):
    """Levi-Civita covariant derivative of a covariant tensor.

    Returns values with the derivative slot first: (B, p, i1..il).
    """
    vals = np.moveaxis(form_jet.grad(), -1, -(degree + 1))
    if degree == 0:
        return vals
    phi = form_jet.value
    labels = "abcd"[:degree]
    for m in range(degree):
        src = labels[:m] + "q" + labels[m + 1:]
        vals = vals - np.einsum(f"...qp{labels[m]},...{src}->...p{labels}", geo.gamma, phi)
    return vals


def codiff(form_jet: jets.Jet, degree: int, geo: Geometry):
    """Codifferential: minus the g-trace of the covariant derivative on the
    leading index.  Returns values of a (degree-1)-form, (B, i2..il)."""
    if degree < 1:
        raise ChartError("codifferential needs a form of degree >= 1")
    nab = covder_form(form_jet, degree, geo)
    return -np.einsum("...pq,...pq" + "abcd"[:degree - 1] + "->..." + "abcd"[:degree - 1],
                      geo.ginv, nab)


def covder_form_jet(form_jet: jets.Jet, degree: int, geo: Geometry) -> jets.Jet:
    """Covariant derivative as jets (one order lower), axes (B, p, i1..il)."""
    q = form_jet.order - 1
    out = jets.Jet(form_jet.dim, q,
                   np.stack([form_jet.partial(p).coef for p in range(geo.dim)],
                            axis=-(degree + 2)))
    if degree == 0:
        return out
    phi = form_jet.truncate(q)
    labels = "abcd"[:degree]
    for m in range(degree):
        src = labels[:m] + "q" + labels[m + 1:]
        out = out - jets.einsum(f"qp{labels[m]},{src}->p{labels}",
                                geo.gamma_j.truncate(q), phi)
    return out


def codiff_jet(form_jet: jets.Jet, degree: int, geo: Geometry) -> jets.Jet:
    """Codifferential as jets (one order lower than the input form)."""
    nab = covder_form_jet(form_jet, degree, geo)
    rest = "abcd"[:degree - 1]
    return -jets.einsum(f"pq,pq{rest}->{rest}", geo.ginv_j.truncate(nab.order), nab)


def hodge_laplacian_fn(chart, f, points, order=2):
    """Positive Hodge Laplacian (delta d) of a scalar field.

    `f` may be an expression AST/string or a Jet already evaluated on the
    batch.
    """
    geo = chart.geometry(points, order=order) if not isinstance(chart, Geometry) else chart
    fj = _as_scalar_jet(f, geo, order=max(2, geo.order))
    hess = fj.hess()
    corr = np.einsum("...kab,...k->...ab", geo.gamma, fj.grad())
    return -np.einsum("...ab,...ab->...", geo.ginv, hess - corr)


def _as_scalar_jet(f, geo, order=2):
    if isinstance(f, jets.Jet):
        return f
    if isinstance(f, str):
        f = exprs.parse_expression(f, geo.dim)
    return exprs.eval_jet(f, geo.points, min(order, geo.chart.max_jet_order), dim=geo.dim)


def to_frame(values, nindices, E):
    """Contract the trailing `nindices` coordinate indices with frame columns.

    values: (B, i1..ik) covariant components; E: (B, dim, dim) frame matrix.
    """
    lo = "abcd"[:nindices]
    hi = "ABCD"[:nindices]
    spec = "..." + lo + "," + ",".join(f"...{l}{u}" for l, u in zip(lo, hi)) + "->..." + hi
    return np.einsum(spec, values, *([E] * nindices))
