"""Generalized Riemann, Ricci, and scalar curvature over a point.

Index placement: ``riemann`` returns the fully covariant GRm_{mnrs} in the
slot order (w, z, x, y) of the defining quadratic form, so the symmetries
read GRm = GRm_{[mn]rs} = GRm_{mn[rs]} = GRm_{srnm}.  Matrix-valued curvature
ops return endomorphisms (one index up, one down); lower with eta when a
bilinear form is needed.

Ricci and scalar computed by independent routes (tensor contraction, bracket
trace, closed form) must agree; the dual-route ops assert this internally.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .algebra import QuadraticLieAlgebra, Tensor
from .connection import (
    Connection,
    Divergence,
    as_divergence,
    cov_d,
    levi_civita,
    mixed_christoffel,
    torsion,
)
from .errors import ForbiddenRank
from .metric import _as_matrix, eigen_ranks, lie_derivative_metric, mixed_norm_sq, projectors

ROUTE_TOL = 1e-10


def riemann(a: QuadraticLieAlgebra, D: Connection) -> Tensor:
    """Generalized Riemann tensor of a torsion-free connection (all down).

    GRm(w,z,x,y) = 1/2 w^d y^b (x^a [D_a,D_b] z_d + z^a [D_a,D_d] x_b
    - (D_a x_b)(D^a z_d)), evaluated on frame vectors.
    """
    tor = torsion(a, D)
    scale = max(1.0, float(np.max(np.abs(D.gamma))), float(np.max(np.abs(a.c))))
    if np.max(np.abs(tor)) > 1e-8 * scale:
        warnings.warn("riemann called with a connection of non-negligible torsion", stacklevel=2)
    m = mixed_christoffel(a, D)
    # Commutator kernel on constant vectors: ([D_a, D_b] e_n)^g.
    comm = np.einsum("age,ben->abgn", m, m)
    comm = comm - comm.transpose(1, 0, 2, 3)
    delta = m - m.transpose(2, 1, 0)  # M(a)^e_b - M(b)^e_a in slots (a, e, b)
    corr = np.einsum("aeb,egn->abgn", delta, m)
    k_down = np.einsum("dg,abgn->abdn", a.eta, comm - corr)  # ([D_a,D_b] e_n)_d

    term1 = k_down.transpose(2, 3, 0, 1)  # (m,n,r,s) <- k_down[r,s,m,n]
    term2 = k_down.transpose(1, 0, 3, 2)  # (m,n,r,s) <- k_down[n,m,s,r]
    term3 = -np.einsum("ab,asr,bmn->mnrs", a.eta_inv, D.gamma, D.gamma)
    return Tensor(0.5 * (term1 + term2 + term3), ("d", "d", "d", "d"))


def full_ricci(a: QuadraticLieAlgebra, D: Connection) -> np.ndarray:
    """Full Ricci endomorphism fGRc^g_b = GRm^{ag}{}_{ab} (eta-symmetric)."""
    grm = riemann(a, D).data
    down = np.einsum("mr,mnrs->ns", a.eta_inv, grm)
    return a.eta_inv @ down


def _ricci_from_full(G: np.ndarray, fgrc: np.ndarray) -> np.ndarray:
    return fgrc - G @ fgrc @ G


def ricci_bracket_route(a: QuadraticLieAlgebra, G, d=None) -> np.ndarray:
    """Ricci via the bracket-trace formula (independent of any connection).

    <v_-, GRc u_+> = <d, G [v_-, u_+]> - 2 Tr_{V+} [[., v_-]_-, u_+]_+,
    valid over a point for any linear divergence.  Returns an endomorphism.
    """
    g = _as_matrix(G)
    dvec = as_divergence(d, a.n).d
    p_plus, p_minus = projectors(g)
    adm = a.c_mixed.transpose(0, 2, 1)  # adm[u] @ y = [e_u, y]
    b1 = np.einsum("s,st,mtn->mn", dvec, g, adm)
    b2 = -2.0 * np.einsum("ij,njk,kl,mli->mn", p_plus, adm, p_minus, adm)
    b = b1 + b2
    s = p_minus.T @ b @ p_plus
    down = s + s.T
    return a.eta_inv @ down


def ricci(a: QuadraticLieAlgebra, G, d=None, D: Connection | None = None) -> np.ndarray:
    """Ricci endomorphism GRc = fGRc - G fGRc G for D in LC(G, div).

    Cross-checks the contraction route against the bracket-trace formula and
    raises if they disagree beyond 1e-10 (1 + |GRc|).
    """
    g = _as_matrix(G)
    if D is None:
        D = levi_civita(a, g, d)
    fgrc = full_ricci(a, D)
    grc = _ricci_from_full(g, fgrc)
    grc_br = ricci_bracket_route(a, g, d)
    gap = float(np.max(np.abs(grc - grc_br)))
    if gap > ROUTE_TOL * (1.0 + float(np.max(np.abs(grc)))):
        raise AssertionError(f"Ricci routes disagree: max gap {gap:.3e}")
    return grc


def ricci_closed_form(a: QuadraticLieAlgebra, G) -> np.ndarray:
    """Point-base closed form of the Ricci endomorphism (divergence zero).

    GRc^a_b = 1/4 (c^{agd} c_{bgd} - G^a_g G^d_b c^{gez} c_{dez}
    - G^g_d G^e_z c^{adz} c_{bge} + G^a_g G^d_b G^h_e G^t_z c^{gez} c_{dhtz...}),
    all contractions through eta.
    """
    g = _as_matrix(G)
    c_up = a.c_up
    s = a._gram_cc  # c^{agd} c_{bgd}
    c1 = np.einsum("gd,bge->bde", g, a.c)
    c2 = np.einsum("ez,bde->bdz", g, c1)
    term3 = np.einsum("adz,bdz->ab", c_up, c2)
    i1 = np.einsum("gez,he->ghz", c_up, g)
    i2 = np.einsum("tz,ghz->ght", g, i1)
    inner = np.einsum("ght,dht->gd", i2, a.c)
    return 0.25 * (s - g @ s @ g - term3 + g @ inner @ g)


def scalar_closed_form(a: QuadraticLieAlgebra, G, d=None) -> float:
    """Scalar curvature from the admissible-frame formula.

    GR = -<G e, e> + 1/4 G^a_d c_{abg} c^{dbg}
    - 1/12 G^a_d G^b_e G^g_z c_{abg} c^{dez}  (anchor terms vanish over a point),
    with e the vector of the divergence.
    """
    g = _as_matrix(G)
    dvec = as_divergence(d, a.n).d
    e = a.eta_inv @ dvec
    val = -float(dvec @ g @ e)
    val += 0.25 * float(np.sum(g * a._gram_cc.T))
    c1 = np.einsum("ad,abg->dbg", g, a.c)
    c2 = np.einsum("be,dbg->deg", g, c1)
    val -= float(np.einsum("gz,deg,dez->", g, c2, a.c_up)) / 12.0
    return val


def scalar(a: QuadraticLieAlgebra, G, d=None, D: Connection | None = None) -> float:
    """Scalar curvature GR = Tr(G fGRc) via the Riemann trace route.

    Asserts agreement with the closed form to 1e-10 (1 + |GR|).
    """
    g = _as_matrix(G)
    n_plus, n_minus = eigen_ranks(g)
    if n_plus == 1 or n_minus == 1:
        raise ForbiddenRank(f"scalar curvature needs ranks != 1, got ({n_plus},{n_minus})")
    if D is None:
        D = levi_civita(a, g, d)
    fgrc = full_ricci(a, D)
    val = float(np.trace(g @ fgrc))
    ref = scalar_closed_form(a, g, d)
    if abs(val - ref) > ROUTE_TOL * (1.0 + abs(val)):
        raise AssertionError(f"scalar routes disagree: trace {val!r} vs closed form {ref!r}")
    return val


def dirac_square(a: QuadraticLieAlgebra) -> float:
    """Constant by which the generating Dirac operator squares: -GR(Id, 0)/8."""
    return -scalar_closed_form(a, np.eye(a.n), None) / 8.0


def ricci_divergence_shift_check(a: QuadraticLieAlgebra, G, e=None, seed: int = 0) -> float:
    """Residual of GRc(G, <e,.>) - GRc(G, 0) + 1/2 L_{Ge} G (max-abs).

    ``e`` is a vector; drawn deterministically from ``seed`` when omitted.
    """
    g = _as_matrix(G)
    if e is None:
        e = np.random.default_rng(seed).standard_normal(a.n)
    e = np.asarray(e, dtype=float)
    d = divergence_from_vector(a, e)
    shifted = ricci(a, g, d)
    base = ricci(a, g, None)
    lie = lie_derivative_metric(a, g, g @ e).chi
    return float(np.max(np.abs(shifted - base + 0.5 * lie)))


def divergence_from_vector(a: QuadraticLieAlgebra, e: np.ndarray) -> Divergence:
    """Divergence <e, .> determined by a vector: d_b = eta_{ba} e^a."""
    return Divergence(a.eta @ np.asarray(e, dtype=float))


def scalar_divergence_shift(a: QuadraticLieAlgebra, G, e) -> tuple[float, float]:
    """(GR(G, <e,.>) - GR(G, 0), -|e|^2_G) which must agree over a point."""
    g = _as_matrix(G)
    e = np.asarray(e, dtype=float)
    d = divergence_from_vector(a, e)
    lhs = scalar_closed_form(a, g, d) - scalar_closed_form(a, g, None)
    rhs = -float(e @ a.eta @ g @ e)
    return lhs, rhs


def bianchi_residual(a: QuadraticLieAlgebra, G) -> float:
    """max_g |G^a_b D_a GRc^b_g| for D in LC(G, 0); the right side 1/2 D_g GR
    vanishes over a point.  Normalized by (1 + |GRc|)."""
    g = _as_matrix(G)
    D = levi_civita(a, g, None)
    grc = ricci(a, g, None, D=D)
    m = mixed_christoffel(a, D)
    cov = cov_d(m, grc, ("u", "d"))
    res = np.einsum("ab,abg->g", g, cov)
    return float(np.max(np.abs(res))) / (1.0 + float(np.max(np.abs(grc))))


def bianchi_divergence_residual(a: QuadraticLieAlgebra, G) -> float:
    """Point-base simplification D_a GRc^{ab} = 0 for any LC connection."""
    g = _as_matrix(G)
    D = levi_civita(a, g, None)
    grc = ricci(a, g, None, D=D)
    grc_uu = grc @ a.eta_inv  # GRc^{ab}
    m = mixed_christoffel(a, D)
    cov = cov_d(m, grc_uu, ("u", "u"))
    res = np.einsum("aab->b", cov)
    return float(np.max(np.abs(res))) / (1.0 + float(np.max(np.abs(grc))))


@dataclass
class CurvatureReport:
    """Bundle of curvature data plus internal-consistency residuals."""

    riemann: Tensor
    full_ricci: np.ndarray
    ricci: np.ndarray
    scalar: float
    norm_ricci_sq: float
    symmetry_residual: float
    mixed_trace_residual: float
    route_residual_ricci: float
    route_residual_scalar: float

    def as_dict(self) -> dict:
        return {
            "riemann": self.riemann.data.tolist(),
            "full_ricci": self.full_ricci.tolist(),
            "ricci": self.ricci.tolist(),
            "scalar": self.scalar,
            "norm_ricci_sq": self.norm_ricci_sq,
            "residuals": {
                "riemann_symmetry": self.symmetry_residual,
                "mixed_trace": self.mixed_trace_residual,
                "ricci_routes": self.route_residual_ricci,
                "scalar_routes": self.route_residual_scalar,
            },
        }


def riemann_symmetry_residual(a: QuadraticLieAlgebra, grm: np.ndarray) -> float:
    scale = 1.0 + float(np.max(np.abs(grm)))
    r1 = np.max(np.abs(grm + grm.transpose(1, 0, 2, 3)))
    r2 = np.max(np.abs(grm + grm.transpose(0, 1, 3, 2)))
    r3 = np.max(np.abs(grm - grm.transpose(3, 2, 1, 0)))
    return float(max(r1, r2, r3)) / scale


def mixed_trace_residual(a: QuadraticLieAlgebra, G, grm: np.ndarray) -> float:
    """GRm^{a ahat}{}_{a ahat} = 0: mixed eigenspace trace of the Riemann tensor."""
    g = _as_matrix(G)
    p_plus, p_minus = projectors(g)
    up = np.einsum("ma,nb,mngd->abgd", a.eta_inv, a.eta_inv, grm)
    val = np.einsum("abgd,ga,db->", up, p_plus, p_minus)
    return float(abs(val)) / (1.0 + float(np.max(np.abs(grm))))


def curvature_report(a: QuadraticLieAlgebra, G, d=None) -> CurvatureReport:
    g = _as_matrix(G)
    D = levi_civita(a, g, d)
    grm = riemann(a, D)
    fgrc = full_ricci(a, D)
    grc = _ricci_from_full(g, fgrc)
    grc_br = ricci_bracket_route(a, g, d)
    gr = float(np.trace(g @ fgrc))
    gr_ref = scalar_closed_form(a, g, d)
    grc_down = a.eta @ grc
    return CurvatureReport(
        riemann=grm,
        full_ricci=fgrc,
        ricci=grc,
        scalar=gr,
        norm_ricci_sq=mixed_norm_sq(a, grc_down),
        symmetry_residual=riemann_symmetry_residual(a, grm.data),
        mixed_trace_residual=mixed_trace_residual(a, g, grm.data),
        route_residual_ricci=float(np.max(np.abs(grc - grc_br))) / (1.0 + float(np.max(np.abs(grc)))),
        route_residual_scalar=abs(gr - gr_ref) / (1.0 + abs(gr)),
    )
