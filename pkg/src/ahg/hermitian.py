"""Almost Hermitian invariants and the Gray-Hervella classification.

Norm conventions (fixed package-wide, and guarded by the identity suite):
an l-form is summed over strictly increasing orthonormal index tuples,
i.e. |phi|^2 = (1/l!) sum over all tuples; a TM-valued l-form additionally
sums over the free slot, so for the 3-index objects nabla F and N the weight
is 1/2 (one antisymmetric pair).  The action of J on a 1-form is
(J a)(X) = -a(JX), which is the convention under which the Lee form
transforms as alpha + 2(n-1) df and the Chern Laplacian identities balance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .charts import (ChartError, Geometry, codiff_jet, covder_form, covder_form_jet,
                     ext_d, to_frame)

__all__ = ["HermitianBudget", "GrayHervellaFlags", "budget", "fundamental_form",
           "lee_form", "nijenhuis", "df_components", "nabla_F_budget",
           "classify_gray_hervella", "unitary_basis", "type_project", "standard_J0",
           "form_norm_sq", "tm_form_norm_sq", "pfaffian"]


def standard_J0(n):
    """J in the adapted frame (e_i, e_{n+i} = J e_i): constant block matrix."""
    J0 = np.zeros((2 * n, 2 * n))
    for i in range(n):
        J0[n + i, i] = 1.0
        J0[i, n + i] = -1.0
    return J0


def unitary_basis(n):
    """Columns: components of u_1..u_n, ubar_1..ubar_n in the adapted frame."""
    W = np.zeros((2 * n, 2 * n), dtype=complex)
    for i in range(n):
        W[i, i] = 1.0 / math.sqrt(2.0)
        W[n + i, i] = -1j / math.sqrt(2.0)
    W[:, n:] = W[:, :n].conj()
    return W


def form_norm_sq(T, degree):
    """|.|^2 of an l-form in orthonormal components (increasing-tuple sum)."""
    axes = tuple(range(-degree, 0))
    return (T ** 2).sum(axis=axes) / math.factorial(degree)


def tm_form_norm_sq(T, form_degree):
    """|.|^2 of a TM-valued form: full sum on the free slot, 1/l! on the rest."""
    axes = tuple(range(-form_degree - 1, 0))
    return (T ** 2).sum(axis=axes) / math.factorial(form_degree)


def type_project(T, n, keep, degree=3):
    """Project orthonormal-frame components of an l-form onto the listed
    (p, q) types.  `keep` is a set of (unbarred, barred) pairs."""
    W = unitary_basis(n)
    # count of barred indices per complex index value
    bars = np.array([0] * n + [1] * n)
    lo = "abcd"[:degree]
    hi = "ABCD"[:degree]
    spec = "..." + lo + "," + ",".join(f"{l}{u}" for l, u in zip(lo, hi)) + "->..." + hi
    Tc = np.einsum(spec, T.astype(complex), *([W] * degree))
    grids = np.meshgrid(*([bars] * degree), indexing="ij")
    nbars = sum(grids)
    mask = np.zeros_like(nbars, dtype=bool)
    for (p, q) in keep:
        mask |= nbars == q
    Tc = Tc * mask
    Winv = W.conj().T  # unitary
    spec_back = "..." + hi + "," + ",".join(f"{u}{l}" for l, u in zip(lo, hi)) + "->..." + lo
    back = np.einsum(spec_back, Tc, *([Winv] * degree))
    if np.abs(back.imag).max(initial=0.0) > 1e-9 * max(1.0, np.abs(back.real).max(initial=0.0)):
        raise ChartError("type projection produced a non-real form; conjugate types "
                         "must be kept in pairs")
    return back.real


def pfaffian(A):
    """Pfaffian of an antisymmetric matrix batch (small even dims)."""
    d = A.shape[-1]
    if d == 0:
        return np.ones(A.shape[:-2])
    out = np.zeros(A.shape[:-2])
    rest = list(range(1, d))
    for k, j in enumerate(rest):
        sub = [i for i in rest if i != j]
        minor = A[..., sub, :][..., :, sub]
        out += ((-1) ** k) * A[..., 0, j] * pfaffian(minor)
    return out


@dataclass
class HermitianBudget:
    """Pointwise Gray-Hervella budget in the adapted orthonormal frame."""
    points: np.ndarray
    n: int
    F: np.ndarray
    dF: np.ndarray
    dF_minus: np.ndarray
    dF_plus: np.ndarray
    dF_plus0: np.ndarray
    alpha: np.ndarray
    N: np.ndarray
    bN: np.ndarray
    N0: np.ndarray
    nablaF: np.ndarray
    delta_alpha: np.ndarray
    norms: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)


def budget(geo: Geometry) -> HermitianBudget:
    """Compute (and cache on the geometry) the full pointwise budget."""
    if getattr(geo, "_hermitian_budget", None) is not None:
        return geo._hermitian_budget
    if geo.chart.J is None:
        raise ChartError(f"chart {geo.chart.name!r} has no J; Hermitian budget undefined")
    if geo.n < 2:
        raise ChartError("Hermitian budget needs complex dimension n >= 2")
    n, d = geo.n, geo.dim
    E = geo.frame.E
    J0 = standard_J0(n)

    Fj = jets.einsum("ki,kj->ij", geo.Jj, geo.gj)
    F = to_frame(Fj.value, 2, E)
    dFj = ext_d(Fj, 2)
    dF = to_frame(dFj.value, 3, E)

    # Lee form alpha = J delta F, with (J a)(X) = -a(JX)
    deltaF_j = codiff_jet(Fj, 2, geo)
    alpha_j = -jets.einsum("mi,m->i", geo.Jj.truncate(deltaF_j.order), deltaF_j)
    alpha = to_frame(alpha_j.value, 1, E)
    nab_alpha = covder_form(alpha_j, 1, geo)
    delta_alpha = -np.einsum("...pq,...pq->...", geo.ginv, nab_alpha)

    nablaF = to_frame(covder_form(Fj, 2, geo), 3, E)

    # Nijenhuis tensor and its parts
    dJ = np.stack([geo.Jj.partial(p).value for p in range(d)], axis=-3)  # (B,p,k,j)
    Jv = geo.Jv
    Nv = (-np.einsum("...km,...jmi->...kij", Jv, dJ)
          + np.einsum("...km,...imj->...kij", Jv, dJ)
          - np.einsum("...mi,...mkj->...kij", Jv, dJ)
          + np.einsum("...mj,...mki->...kij", Jv, dJ))
    N3 = np.einsum("...xk,...kyz->...xyz", geo.g, Nv)
    N = to_frame(N3, 3, E)
    bN = (N + np.einsum("...yzx->...xyz", N) + np.einsum("...zxy->...xyz", N)) / 3.0
    N0 = N - bN

    dF_minus = type_project(dF, n, {(3, 0), (0, 3)}, degree=3)
    dF_plus = dF - dF_minus
    wedge = (np.einsum("...a,...bc->...abc", alpha, F)
             - np.einsum("...b,...ac->...abc", alpha, F)
             + np.einsum("...c,...ab->...abc", alpha, F))
    dF_plus0 = dF_plus - wedge / (n - 1)

    norms = {
        "alpha_sq": (alpha ** 2).sum(axis=-1),
        "N0_sq": tm_form_norm_sq(N0, 2),
        "N_sq": tm_form_norm_sq(N, 2),
        "dF_minus_sq": form_norm_sq(dF_minus, 3),
        "dF_plus0_sq": form_norm_sq(dF_plus0, 3),
        "dF_sq": form_norm_sq(dF, 3),
        "nablaF_sq": tm_form_norm_sq(nablaF, 2),
        "delta_alpha": delta_alpha,
    }

    # identity residuals carried by the budget itself
    lefschetz = 0.5 * np.einsum("...abc,ab->...c", dF, standard_F0(n))
    r_lee = np.abs(lefschetz - alpha).max(axis=-1)
    r_bN0 = np.abs((N0 + np.einsum("...yzx->...xyz", N0)
                    + np.einsum("...zxy->...xyz", N0)) / 3.0).max(axis=(-1, -2, -3))
    recon = (dF_minus / 3.0
             - 0.5 * np.einsum("...Ma,...Mbc->...abc", _j0_like(J0, N0), N0)
             + 0.5 * dF_plus
             - 0.5 * np.einsum("...Mb,...Nc,...aMN->...abc",
                               _j0_like(J0, dF_plus), _j0_like(J0, dF_plus), dF_plus))
    r_23 = np.abs(nablaF - recon).max(axis=(-1, -2, -3))
    rhs24 = (norms["alpha_sq"] / (n - 1) + norms["dF_plus0_sq"]
             + 0.25 * norms["N0_sq"] + norms["dF_minus_sq"] / 3.0)
    r_24 = _rel(norms["nablaF_sq"], rhs24)
    r_22 = 0.5 * np.abs(np.einsum("...abc,ab->...c", dF_plus0, standard_F0(n))).max(axis=-1)

    out = HermitianBudget(points=geo.points, n=n, F=F, dF=dF, dF_minus=dF_minus,
                          dF_plus=dF_plus, dF_plus0=dF_plus0, alpha=alpha, N=N,
                          bN=bN, N0=N0, nablaF=nablaF, delta_alpha=delta_alpha,
                          norms=norms,
                          residuals={"lee_trace": r_lee, "primitive_22": r_22,
                                     "decomp_23": r_23, "norm_budget_24": r_24,
                                     "bN0": r_bN0})
    geo._hermitian_budget = out
    return out


def _j0_like(J0, T):
    return np.broadcast_to(J0, T.shape[:-3] + J0.shape)


def standard_F0(n):
    """Fundamental form in the adapted frame: F = sum theta^i ^ theta^{n+i}."""
    F0 = np.zeros((2 * n, 2 * n))
    for i in range(n):
        F0[i, n + i] = 1.0
        F0[n + i, i] = -1.0
    return F0


def _rel(lhs, rhs):
    return np.abs(lhs - rhs) / np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))


# ---- spec-level operation wrappers -------------------------------------------


def _geo(chart, points, order=2):
    return chart if isinstance(chart, Geometry) else chart.geometry(points, order=order)


def fundamental_form(chart, points=None):
    """F(X,Y) = g(JX, Y); returns frame components plus the volume residual
    | |Pf(F_coord)| - sqrt(det g) | as a consistency datum."""
    geo = _geo(chart, points)
    Fj = jets.einsum("ki,kj->ij", geo.Jj, geo.gj)
    vol_residual = np.abs(np.abs(pfaffian(Fj.value)) - geo.sqrt_det_g)
    return to_frame(Fj.value, 2, geo.frame.E), Fj, vol_residual


def lee_form(chart, points=None):
    """Lee form in frame components plus the trace-reconstruction residual."""
    b = budget(_geo(chart, points))
    return b.alpha, b.residuals["lee_trace"]


def nijenhuis(chart, points=None):
    b = budget(_geo(chart, points))
    return b.N, b.bN, b.N0


def df_components(chart, points=None) -> HermitianBudget:
    return budget(_geo(chart, points))


def nabla_F_budget(chart, points=None) -> HermitianBudget:
    return budget(_geo(chart, points))


@dataclass
class GrayHervellaFlags:
    sup_norms: dict
    vanishing: dict
    label: str
    tol: float
    sample_count: int
    seed: int


_GENERATORS = [("W1", "dF_minus_sq"), ("W2", "N0_sq"),
               ("W3", "dF_plus0_sq"), ("W4", "alpha_sq")]


def classify_gray_hervella(chart, sample_count=50, seed=42, tol=1e-8) -> GrayHervellaFlags:
    """Sup-norm classification over seeded sample points.

    The four generator norms are ||(dF)-||, ||N^0||, ||(dF)0+||, ||alpha||;
    the label is the minimal class consistent with which of them vanish.
    """
    pts = chart.domain.sample(sample_count, seed)
    b = budget(chart.geometry(pts, order=2))
    sup = {name: float(np.sqrt(np.maximum(b.norms[key], 0.0)).max())
           for name, key in _GENERATORS}
    vanishing = {name: sup[name] <= tol for name, _ in _GENERATORS}
    active = [name for name, _ in _GENERATORS if not vanishing[name]]
    label = "Kahler" if not active else "+".join(active)
    return GrayHervellaFlags(sup_norms=sup, vanishing=vanishing, label=label,
                             tol=tol, sample_count=sample_count, seed=seed)
