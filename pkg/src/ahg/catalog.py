"""Built-in chart catalog: the test corpus for every other module.

Each entry builds a :class:`~ahg.charts.ChartSpec` together with its declared
Gray-Hervella class, integrability flag and any independently known scalar
values.  Provenance of the expected values is recorded in each builder's
docstring.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import exprs, jets
from .charts import Box, CallableMatrixField, ChartError, ChartSpec, ExprMatrixField

__all__ = ["CatalogEntry", "load", "names", "parse_custom_file", "cross_product_table"]

TWO_PI = 2.0 * np.pi


@dataclass
class CatalogEntry:
    name: str
    chart: ChartSpec
    expected_class: str = None
    integrable: bool = None
    expected_scalars: dict = field(default_factory=dict)
    compact: dict = None          # quadrature descriptor, see ahg.conformal.integrate
    hermitian: bool = False       # declared membership in W3+W4 (N == 0 and (dF)- == 0)
    witness_point: tuple = None   # where non-integrability is certified
    provenance: str = ""


def _diag(expr, d):
    return [[expr if i == j else "0" for j in range(d)] for i in range(d)]


def _standard_J(d):
    """Constant J of the complex coordinates z_k = x_{2k-1} + i x_{2k}."""
    rows = [["0"] * d for _ in range(d)]
    for k in range(d // 2):
        rows[2 * k + 1][2 * k] = "1"
        rows[2 * k][2 * k + 1] = "-1"
    return rows


def _t4_kahler():
    """Flat Kaehler torus: delta metric, constant J; every curvature scalar is 0."""
    chart = ChartSpec("t4_kahler", 2, Box((0,) * 4, (TWO_PI,) * 4, (True,) * 4),
                      g=ExprMatrixField(_diag("1", 4), 4),
                      J=ExprMatrixField(_standard_J(4), 4),
                      meta={"conformal_flat_exponent": "0",
                            "gauduchon": True})
    return CatalogEntry(
        "t4_kahler", chart, expected_class="Kahler", integrable=True, hermitian=True,
        expected_scalars={"s": 0.0, "s_J": 0.0, "S1": 0.0, "S2": 0.0,
                          "alpha_sq": 0.0, "nablaF_sq": 0.0},
        compact={"kind": "torus"},
        provenance="flat metric, parallel J: all invariants vanish identically")


def _t4_perturbed():
    """Conformally flat torus e^{2 eps sin x1} delta with eps = 0.05.

    Conformal image of a Kaehler structure, hence locally conformally Kaehler
    (class W4) with Lee form 2(n-1) d(eps sin x1).
    """
    eps = 0.05
    f = f"{eps}*sin(x1)"
    chart = ChartSpec("t4_perturbed", 2, Box((0,) * 4, (TWO_PI,) * 4, (True,) * 4),
                      g=ExprMatrixField(_diag(f"exp(2*({f}))", 4), 4),
                      J=ExprMatrixField(_standard_J(4), 4),
                      meta={"conformal_flat_exponent": f, "gauduchon": False})
    return CatalogEntry(
        "t4_perturbed", chart, expected_class="W4", integrable=True, hermitian=True,
        compact={"kind": "torus"},
        provenance="e^{2f} x flat Kaehler: W4 with alpha = 2(n-1) df")


def _kodaira_thurston():
    """Nilmanifold chart with left-invariant coframe (dx, dy, dz - x dy, dw).

    J maps the dual frame pairwise e1 -> e3, e2 -> e4, which makes the
    fundamental form F = e1^e3 + e2^e4 = dx^dz + dy^dw - x dx^dy closed while
    J stays non-integrable: the almost Kaehler class W2.
    """
    g = [["1", "0", "0", "0"],
         ["0", "1 + x1^2", "-x1", "0"],
         ["0", "-x1", "1", "0"],
         ["0", "0", "0", "1"]]
    # J dx-frame: d1 -> d3, d2 -> x d1 + d4, d3 -> -d1, d4 -> -d2 - x d3
    J = [["0", "x1", "-1", "0"],
         ["0", "0", "0", "-1"],
         ["1", "0", "0", "-x1"],
         ["0", "1", "0", "0"]]
    chart = ChartSpec("kodaira_thurston", 2, Box((-1,) * 4, (1,) * 4),
                      g=ExprMatrixField(g, 4), J=ExprMatrixField(J, 4))
    return CatalogEntry(
        "kodaira_thurston", chart, expected_class="W2", integrable=False,
        witness_point=(0.3, 0.1, -0.2, 0.4),
        provenance="Heisenberg x R nilmanifold; dF = 0 by the structure equation "
                   "d(dz - x dy) = -dx^dy, N != 0 since J is x-dependent")


def _iwasawa():
    """Complex-parallelizable nilmanifold with (1,0)-coframe
    (dz1, dz2, dz3 - z1 dz2); balanced non-Kaehler, class W3."""
    # real coframe rows: dx1,dx2,dx3,dx4, dx5 - x1 dx3 + x2 dx4, dx6 - x2 dx3 - x1 dx4
    g = [["1", "0", "0", "0", "0", "0"],
         ["0", "1", "0", "0", "0", "0"],
         ["0", "0", "1 + x1^2 + x2^2", "0", "-x1", "-x2"],
         ["0", "0", "0", "1 + x1^2 + x2^2", "x2", "-x1"],
         ["0", "0", "-x1", "x2", "1", "0"],
         ["0", "0", "-x2", "-x1", "0", "1"]]
    chart = ChartSpec("iwasawa", 3, Box((-1,) * 6, (1,) * 6),
                      g=ExprMatrixField(g, 6), J=ExprMatrixField(_standard_J(6), 6))
    return CatalogEntry(
        "iwasawa", chart, expected_class="W3", integrable=True, hermitian=True,
        provenance="Iwasawa manifold, metric sum |phi^k|^2 of the left-invariant "
                   "(1,0)-coframe; holomorphically parallelizable hence balanced")


def _hopf_surface():
    """Standard Hopf surface metric delta/|z|^2 on the annulus 1 < |z| < 2.

    Closed-form reference values (conformal-scalar algebra for
    g = e^{2u} delta with u = -log|z|, checked against S^1 x S^3):
    s = 6, s_J = 2, S1 = 4, S2 = 2, |alpha|^2 = 4, |dF|^2 = 4,
    |nabla F|^2 = |alpha|^2/(n-1) = 4, delta(alpha) = 0.
    """
    r2 = "(x1^2 + x2^2 + x3^2 + x4^2)"
    chart = ChartSpec("hopf_surface", 2, Box((0.55,) * 4, (0.95,) * 4),
                      g=ExprMatrixField(_diag(f"1/{r2}", 4), 4),
                      J=ExprMatrixField(_standard_J(4), 4),
                      meta={"gauduchon": True})
    return CatalogEntry(
        "hopf_surface", chart, expected_class="W4", integrable=True, hermitian=True,
        expected_scalars={"s": 6.0, "s_J": 2.0, "S1": 4.0, "S2": 2.0,
                          "alpha_sq": 4.0, "dF_sq": 4.0, "nablaF_sq": 4.0,
                          "delta_alpha": 0.0},
        compact={"kind": "hopf_annulus", "r0": 1.0, "r1": 2.0},
        provenance="LCK Hopf metric; scalars from the conformal change u = -log|z| "
                   "of the flat metric (s matches the S^1 x S^3 product value 6)")


# ---- nearly Kaehler S^6 ------------------------------------------------------

def cross_product_table():
    """Structure constants eps[i,j,k] of the 7-dimensional cross product
    (imaginary octonions, Fano triples (123)(145)(176)(246)(257)(347)(365))."""
    eps = np.zeros((7, 7, 7))
    for (i, j, k) in [(1, 2, 3), (1, 4, 5), (1, 7, 6), (2, 4, 6),
                      (2, 5, 7), (3, 4, 7), (3, 6, 5)]:
        for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)]:
            eps[a - 1, b - 1, c - 1] = 1.0
            eps[b - 1, a - 1, c - 1] = -1.0
    return eps


def _s6_J_field(points, order):
    """J of the nearly Kaehler S^6 on the stereographic chart.

    The chart embeds as p = (2x, 1 - |x|^2)/(1 + |x|^2) in Im O = R^7 and
    J_p X = p x X (7-dimensional cross product).  Pulled back with the
    conformal pseudo-inverse of dp the components are rational in x, assembled
    here in jet arithmetic from closed-form p and dp.
    """
    eps = cross_product_table()
    d = 6
    x = [jets.variable(d, order, i, points[..., i]) for i in range(d)]
    r2 = x[0] * x[0]
    for i in range(1, d):
        r2 = r2 + x[i] * x[i]
    lam = 1.0 + r2
    p = [2.0 * x[k] / lam for k in range(d)] + [(1.0 - r2) / lam]
    # dp[k][i] = d p_k / d x_i in closed form
    lam2 = lam * lam
    dp = [[(2.0 * (1.0 if i == k else 0.0)) / lam - 4.0 * x[k] * x[i] / lam2
           for i in range(d)] for k in range(d)]
    dp.append([-4.0 * x[i] / lam2 for i in range(d)])
    pc = jets.Jet(d, order, np.stack([q.coef for q in p], axis=-2))
    dpc = jets.Jet(d, order, np.stack([np.stack([e.coef for e in row], axis=-2)
                                       for row in dp], axis=-3))
    cross = jets.einsum("l,klm->km", pc, eps)        # (p x .)_km
    jmat = jets.einsum("ki,km->im", dpc, jets.einsum("km,mj->kj", cross, dpc))
    # pseudo-inverse of dp is (lambda^2/4) dp^T since dp^T dp = (4/lambda^2) Id
    return jets.einsum("ij,->ij", jmat, lam2 * 0.25)


def _s6_nearly_kahler():
    """Round S^6 with the cross-product almost complex structure: class W1.

    Expected |nabla F|^2 / |(dF)-|^2 = 1/3 is the module-level oracle; the
    metric is the round one, s = 30.
    """
    r2 = " + ".join(f"x{i}^2" for i in range(1, 7))
    chart = ChartSpec("s6_nearly_kahler", 3, Box((-0.8,) * 6, (0.8,) * 6),
                      g=ExprMatrixField(_diag(f"4/(1 + {r2})^2", 6), 6),
                      J=CallableMatrixField(_s6_J_field, 6))
    return CatalogEntry(
        "s6_nearly_kahler", chart, expected_class="W1", integrable=False,
        expected_scalars={"s": 30.0},
        witness_point=(0.2, -0.1, 0.3, 0.1, -0.2, 0.15),
        provenance="octonion cross product J on the round sphere; "
                   "strictly nearly Kaehler")


def _twistor_base(name, expr, box, s_N, provenance):
    chart = ChartSpec(name, 2, box, g=ExprMatrixField(_diag(expr, 4), 4),
                      meta={"einstein": True, "asd": True, "s_N": s_N})
    return CatalogEntry(name, chart, expected_scalars={"s": s_N},
                        compact={"kind": "torus"} if name == "t4_flat_base" else None,
                        provenance=provenance)


def _s4_round():
    r2 = "(x1^2 + x2^2 + x3^2 + x4^2)"
    return _twistor_base("s4_round", f"4/(1 + {r2})^2", Box((-1.2,) * 4, (1.2,) * 4), 12.0,
                         "round 4-sphere, stereographic chart; s = 12, Einstein, "
                         "conformally flat hence anti-self-dual")


def _h4_hyperbolic():
    r2 = "(x1^2 + x2^2 + x3^2 + x4^2)"
    return _twistor_base("h4_hyperbolic", f"4/(1 - {r2})^2", Box((-0.45,) * 4, (0.45,) * 4),
                         -12.0, "Poincare ball chart; s = -12, Einstein, conformally flat")


def _t4_flat_base():
    e = _twistor_base("t4_flat_base", "1", Box((0,) * 4, (TWO_PI,) * 4, (True,) * 4), 0.0,
                      "flat 4-torus as a twistor base")
    return e


_BUILDERS = {
    "t4_kahler": _t4_kahler,
    "t4_perturbed": _t4_perturbed,
    "kodaira_thurston": _kodaira_thurston,
    "iwasawa": _iwasawa,
    "hopf_surface": _hopf_surface,
    "s6_nearly_kahler": _s6_nearly_kahler,
    "s4_round": _s4_round,
    "h4_hyperbolic": _h4_hyperbolic,
    "t4_flat_base": _t4_flat_base,
}


def names():
    return sorted(_BUILDERS)


def load(name: str) -> CatalogEntry:
    """Load a catalog entry, or a custom chart via ``file:<path>``."""
    if name.startswith("file:"):
        return parse_custom_file(name[5:])
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise ChartError(f"unknown catalog entry {name!r}; known: {', '.join(names())}") \
            from None


def parse_custom_file(path: str) -> CatalogEntry:
    """Parse the custom chart file format.

    Sections: [meta] with ``n = <int>`` and ``name = <str>``; [domain] one
    line per axis ``lo hi [periodic]``; [metric] and [J] each 2n lines of 2n
    comma-separated expressions in the package grammar.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh]
    sections = {}
    current = None
    for ln in lines:
        if not ln or ln.startswith("#"):
            continue
        if ln.startswith("[") and ln.endswith("]"):
            current = ln[1:-1].lower()
            sections[current] = []
            continue
        if current is None:
            raise ChartError(f"{path}: content before first section header")
        sections[current].append(ln)

    meta = {}
    for ln in sections.get("meta", []):
        key, _, val = ln.partition("=")
        meta[key.strip()] = val.strip()
    if "n" not in meta:
        raise ChartError(f"{path}: [meta] must declare n")
    n = int(meta["n"])
    d = 2 * n
    name = meta.get("name", path)

    dom = sections.get("domain", [])
    if len(dom) != d:
        raise ChartError(f"{path}: [domain] needs {d} axis lines")
    lo, hi, per = [], [], []
    for ln in dom:
        parts = ln.split()
        lo.append(float(parts[0]))
        hi.append(float(parts[1]))
        per.append(len(parts) > 2 and parts[2].lower() in ("periodic", "true", "1"))

    def matrix(section):
        rows = sections.get(section, [])
        if len(rows) != d:
            raise ChartError(f"{path}: [{section}] needs {d} rows")
        out = []
        for ln in rows:
            cells = [c.strip() for c in ln.split(",")]
            if len(cells) != d:
                raise ChartError(f"{path}: [{section}] row needs {d} entries")
            out.append([exprs.parse_expression(c, d) for c in cells])
        return ExprMatrixField(out, d)

    chart = ChartSpec(name, n, Box(tuple(lo), tuple(hi), tuple(per)),
                      g=matrix("metric"),
                      J=matrix("j") if "j" in sections else None)
    return CatalogEntry(name, chart, provenance=f"custom chart from {path}")
