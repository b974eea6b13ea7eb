"""Generalized Ricci flow on flat tori: fields (g, B, phi) with flux H = H0 + dB.

Explicit exact-case equations:

    dt g_ij  = -2 Rc_ij + 1/2 H_ikl H_j^kl - 4 grad_i grad_j phi
    dt B_ij  = div^k H_kij - 2 (grad^k phi) H_kij
    dt phi   = Lap_g phi - 2 |grad phi|^2 + 1/12 |H|^2

and the scalar-curvature field R - 1/12 |H|^2_g - 4 e^phi Lap_g e^-phi.

Discretization: 4th-order central differences on a uniform periodic grid.
The Laplace-Beltrami operator is kept in divergence form, which makes it
exactly self-adjoint for the discrete dV-weighted inner product (central
difference matrices are antisymmetric circulants); the lambda solver and the
quadrature identity for the Einstein-Hilbert density rely on this.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh as dense_eigh

from .errors import DegenerateMetric, EigensolverStalled, StepUnderflow, ValidationError

SPD_FLOOR = 1e-8


@dataclass(frozen=True)
class TorusGeometry:
    d: int
    N: int
    L: float = 2.0 * np.pi

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValidationError(f"torus dimension must be 2 or 3, got {self.d}")
        if self.N < 8 or self.N % 2:
            raise ValidationError(f"grid size must be even and >= 8, got {self.N}")
        if self.L <= 0:
            raise ValidationError("period must be positive")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    def axes(self) -> np.ndarray:
        """Coordinates along one axis (cell centers at j*h)."""
        return np.arange(self.N) * self.h

    def grids(self) -> list[np.ndarray]:
        x = self.axes()
        return list(np.meshgrid(*([x] * self.d), indexing="ij"))


def deriv(geom: TorusGeometry, f: np.ndarray, axis: int) -> np.ndarray:
    """4th-order central first derivative along a grid axis (periodic)."""
    return (
        -np.roll(f, -2, axis=axis)
        + 8.0 * np.roll(f, -1, axis=axis)
        - 8.0 * np.roll(f, 1, axis=axis)
        + np.roll(f, 2, axis=axis)
    ) / (12.0 * geom.h)


def grad(geom: TorusGeometry, f: np.ndarray) -> np.ndarray:
    """Stack of partial derivatives, shape grid + (d,)."""
    return np.stack([deriv(geom, f, i) for i in range(geom.d)], axis=-1)


def exterior_derivative(geom: TorusGeometry, omega: np.ndarray, degree: int) -> np.ndarray:
    """Discrete exterior derivative of a p-form given by full component arrays."""
    d = geom.d
    if degree == 0:
        return grad(geom, omega)
    if degree == 1:
        da = np.stack([deriv(geom, omega, i) for i in range(d)], axis=-2)  # (.., i, j) = d_i A_j
        return da - np.swapaxes(da, -1, -2)
    if degree == 2:
        db = np.stack([deriv(geom, omega, i) for i in range(d)], axis=-3)  # d_i B_jk
        return db + np.moveaxis(db, (-3, -2, -1), (-2, -1, -3)) + np.moveaxis(db, (-3, -2, -1), (-1, -3, -2))
    if degree == 3:
        dh = np.stack([deriv(geom, omega, i) for i in range(d)], axis=-4)  # d_a H_bcd
        out = dh.copy()
        out -= np.swapaxes(dh, -4, -3)
        out += np.moveaxis(dh, -4, -2)
        out -= np.moveaxis(dh, -4, -1)
        return out
    raise ValidationError(f"unsupported form degree {degree}")


def volume_coefficients(d: int, k: float) -> np.ndarray:
    """Constant totally antisymmetric 3-index coefficients k * eps (zero for d = 2)."""
    h0 = np.zeros((d, d, d))
    if d == 3 and k != 0.0:
        from .algebra import epsilon3

        h0 = k * epsilon3()
    return h0


@dataclass
class TorusFieldState:
    geom: TorusGeometry
    g: np.ndarray
    B: np.ndarray
    phi: np.ndarray
    H0: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        d, shape = self.geom.d, self.geom.shape
        self.g = np.asarray(self.g, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        self.H0 = np.asarray(self.H0, dtype=float)
        if self.g.shape != shape + (d, d) or self.B.shape != shape + (d, d) or self.phi.shape != shape:
            raise ValidationError("field arrays do not match the grid")
        if self.H0.shape != (d, d, d):
            raise ValidationError("H0 must be a constant d x d x d array")
        if d == 2 and np.any(self.H0):
            raise ValidationError("three-forms vanish on T^2: H0 must be zero for d = 2")
        if np.max(np.abs(self.g - np.swapaxes(self.g, -1, -2))) > 1e-12 * max(1.0, float(np.max(np.abs(self.g)))):
            raise ValidationError("g must be symmetric at every node")
        if np.max(np.abs(self.B + np.swapaxes(self.B, -1, -2))) > 1e-12 * max(1.0, float(np.max(np.abs(self.B))), 1e-30):
            raise ValidationError("B must be antisymmetric at every node")
        r1 = float(np.max(np.abs(self.H0 + self.H0.transpose(1, 0, 2)), initial=0.0))
        r2 = float(np.max(np.abs(self.H0 + self.H0.transpose(0, 2, 1)), initial=0.0))
        if max(r1, r2) > 1e-14 * max(1.0, float(np.max(np.abs(self.H0), initial=0.0))):
            raise ValidationError("H0 must be totally antisymmetric")

    def spd_margin(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.g)))

    def copy(self) -> "TorusFieldState":
        return TorusFieldState(self.geom, self.g.copy(), self.B.copy(), self.phi.copy(), self.H0.copy(), self.t)


def flat_state(geom: TorusGeometry, k: float = 0.0) -> TorusFieldState:
    """g = Id, B = 0, phi = 0, constant flux of strength k (volume form)."""
    eye = np.broadcast_to(np.eye(geom.d), geom.shape + (geom.d, geom.d)).copy()
    return TorusFieldState(
        geom, eye, np.zeros(geom.shape + (geom.d, geom.d)), np.zeros(geom.shape), volume_coefficients(geom.d, k)
    )


def perturbed_state(geom: TorusGeometry, seed: int, amplitude: float = 0.05, k: float = 0.0,
                    kmax: int = 2) -> TorusFieldState:
    """Flat state plus smooth trigonometric perturbations with modes up to kmax."""
    rng = np.random.default_rng(seed)
    st = flat_state(geom, k)
    xs = geom.grids()
    two_pi = 2.0 * np.pi / geom.L

    def mode():
        wave = np.zeros(geom.shape)
        for _ in range(2):
            kvec = rng.integers(-kmax, kmax + 1, size=geom.d)
            phase = rng.uniform(0, 2 * np.pi)
            arg = sum(two_pi * kvec[i] * xs[i] for i in range(geom.d))
            wave += rng.uniform(0.3, 1.0) * np.sin(arg + phase)
        return wave

    d = geom.d
    for i in range(d):
        for j in range(i, d):
            w = amplitude * mode()
            st.g[..., i, j] += w
            if i != j:
                st.g[..., j, i] += w
    for i in range(d):
        for j in range(i + 1, d):
            w = amplitude * mode()
            st.B[..., i, j] += w
            st.B[..., j, i] -= w
    st.phi += amplitude * mode()
    if st.spd_margin() <= SPD_FLOOR:
        raise DegenerateMetric("perturbation amplitude too large: g not positive definite")
    return st


# -- differential operators on the metric -------------------------------------


def flux_H(state: TorusFieldState) -> np.ndarray:
    """H = H0 + dB, totally antisymmetric per node."""
    db = exterior_derivative(state.geom, state.B, 2)
    return db + state.H0


def christoffel(state: TorusFieldState, ginv: np.ndarray) -> np.ndarray:
    """Gamma^k_{ij} per node, shape grid + (d, d, d) with k first."""
    geom = state.geom
    dg = np.stack([deriv(geom, state.g, l) for l in range(geom.d)], axis=-3)  # (l, i, j) = d_l g_ij
    term_i = np.moveaxis(dg, -1, -3)  # [l, i, j] <- d_i g_{jl}
    term_j = np.swapaxes(term_i, -1, -2)  # [l, i, j] <- d_j g_{il}
    rhs = term_i + term_j - dg
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, rhs)


def ricci_tensor(state: TorusFieldState, gamma: np.ndarray) -> np.ndarray:
    """Classical Ricci tensor with the mixed-derivative term symmetrized.

    Rc_ij = d_k Gamma^k_ij - d_(i Gamma^k_{k j)} + Gamma^k_{kl} Gamma^l_{ij}
    - Gamma^k_{il} Gamma^l_{kj}; the discrete symmetrization keeps the update
    exactly symmetric (the two writings agree analytically).
    """
    geom = state.geom
    div_gamma = sum(deriv(geom, gamma[..., k, :, :], k) for k in range(geom.d))
    v = np.einsum("...kkj->...j", gamma)
    dv = np.stack([deriv(geom, v, i) for i in range(geom.d)], axis=-2)  # (i, j)
    dv_sym = 0.5 * (dv + np.swapaxes(dv, -1, -2))
    quad1 = np.einsum("...l,...lij->...ij", v, gamma)
    quad2 = np.einsum("...kil,...lkj->...ij", gamma, gamma)
    return div_gamma - dv_sym + quad1 - quad2


def laplace_beltrami(geom: TorusGeometry, w: np.ndarray, ginv: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Divergence-form Laplace-Beltrami: (1/w) d_i (w g^{ij} d_j f), w = sqrt(det g)."""
    df = grad(geom, f)
    flux = w[..., None] * np.einsum("...ij,...j->...i", ginv, df)
    out = sum(deriv(geom, flux[..., i], i) for i in range(geom.d))
    return out / w


def hessian(geom: TorusGeometry, gamma: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Covariant Hessian grad_i grad_j f, symmetrized to round-off."""
    df = grad(geom, f)
    ddf = np.stack([deriv(geom, df, i) for i in range(geom.d)], axis=-2)  # (i, j)
    ddf = 0.5 * (ddf + np.swapaxes(ddf, -1, -2))
    return ddf - np.einsum("...kij,...k->...ij", gamma, df)


def _geometry_pack(state: TorusFieldState):
    g = state.g
    ginv = np.linalg.inv(g)
    ginv = 0.5 * (ginv + np.swapaxes(ginv, -1, -2))
    w = np.sqrt(np.linalg.det(g))
    return ginv, w


def degenerate_nodes(state: TorusFieldState) -> float:
    margin = state.spd_margin()
    if margin < SPD_FLOOR:
        raise DegenerateMetric(f"metric lost positivity: min eigenvalue {margin:.3e}")
    return margin


def torus_rhs(state: TorusFieldState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(dt g, dt B, dt phi) of the exact-case flow, evaluated as printed."""
    geom = state.geom
    degenerate_nodes(state)
    ginv, w = _geometry_pack(state)
    gamma = christoffel(state, ginv)
    rc = ricci_tensor(state, gamma)
    dphi = grad(geom, state.phi)
    hess = hessian(geom, gamma, state.phi)

    H = flux_H(state)
    h_mixed = np.einsum("...ikl,...km,...ln->...imn", H, ginv, ginv)  # H_i^{kl}
    h2 = np.einsum("...ikl,...jkl->...ij", h_mixed, H)
    h_norm_sq = np.einsum("...ikl,...im->...mkl", h_mixed, ginv)
    h_norm_sq = np.einsum("...mkl,...mkl->...", h_norm_sq, H)

    dg = -2.0 * rc + 0.5 * h2 - 4.0 * hess

    dH = np.stack([deriv(geom, H, l) for l in range(geom.d)], axis=-4)  # (l, k, i, j)
    covH = (
        dH
        - np.einsum("...mlk,...mij->...lkij", gamma, H)
        - np.einsum("...mli,...kmj->...lkij", gamma, H)
        - np.einsum("...mlj,...kim->...lkij", gamma, H)
    )
    div_h = np.einsum("...kl,...lkij->...ij", ginv, covH)
    grad_phi_up = np.einsum("...kl,...l->...k", ginv, dphi)
    db = div_h - 2.0 * np.einsum("...k,...kij->...ij", grad_phi_up, H)

    lap_phi = laplace_beltrami(geom, w, ginv, state.phi)
    dphi_rhs = lap_phi - 2.0 * np.einsum("...i,...i->...", grad_phi_up, dphi) + h_norm_sq / 12.0
    return dg, db, dphi_rhs


def ricci_dilaton_rhs(state: TorusFieldState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dedicated H-free path: Ricci flow coupled to the dilaton only."""
    geom = state.geom
    degenerate_nodes(state)
    ginv, w = _geometry_pack(state)
    gamma = christoffel(state, ginv)
    rc = ricci_tensor(state, gamma)
    dphi = grad(geom, state.phi)
    hess = hessian(geom, gamma, state.phi)
    dg = -2.0 * rc - 4.0 * hess
    lap_phi = laplace_beltrami(geom, w, ginv, state.phi)
    grad_phi_up = np.einsum("...kl,...l->...k", ginv, dphi)
    dphi_rhs = lap_phi - 2.0 * np.einsum("...i,...i->...", grad_phi_up, dphi)
    return dg, np.zeros_like(state.B), dphi_rhs


def generalized_scalar_field(state: TorusFieldState) -> np.ndarray:
    """Nodewise R - 1/12 |H|^2_g - 4 e^phi Lap_g e^-phi."""
    geom = state.geom
    degenerate_nodes(state)
    ginv, w = _geometry_pack(state)
    gamma = christoffel(state, ginv)
    rc = ricci_tensor(state, gamma)
    r = np.einsum("...ij,...ij->...", ginv, rc)
    H = flux_H(state)
    h_mixed = np.einsum("...ikl,...km,...ln->...imn", H, ginv, ginv)
    h_up = np.einsum("...mkl,...im->...ikl", h_mixed, ginv)
    h_norm_sq = np.einsum("...ikl,...ikl->...", h_up, H)
    u = np.exp(-state.phi)
    return r - h_norm_sq / 12.0 - 4.0 * np.exp(state.phi) * laplace_beltrami(geom, w, ginv, u)


# -- lambda functional ---------------------------------------------------------


def _dirichlet_operator(state: TorusFieldState):
    """Returns (apply_L, weights) for L u = -4 Lap_g u + (R - |H|^2/12) u."""
    geom = state.geom
    ginv, w = _geometry_pack(state)
    gamma = christoffel(state, ginv)
    rc = ricci_tensor(state, gamma)
    r = np.einsum("...ij,...ij->...", ginv, rc)
    H = flux_H(state)
    h_mixed = np.einsum("...ikl,...km,...ln->...imn", H, ginv, ginv)
    h_up = np.einsum("...mkl,...im->...ikl", h_mixed, ginv)
    pot = r - np.einsum("...ikl,...ikl->...", h_up, H) / 12.0
    weights = w * geom.h**geom.d  # dV per node

    def apply_l(u):
        return -4.0 * laplace_beltrami(geom, w, ginv, u) + pot * u

    return apply_l, weights


def lambda_torus(state: TorusFieldState, u0: np.ndarray | None = None, per_iter_tol: float = 1e-10,
                 max_iter: int = 50_000, return_vector: bool = False):
    """Minimum of int(4 |grad u|^2_g + (R - |H|^2/12) u^2) dV over unit-mass u.

    Rayleigh-quotient descent with exact line search in span{u, residual} and
    mass renormalization each iterate; stops when the quotient moves less
    than ``per_iter_tol`` per iterate.  Matrix-free; reuses grid operators.
    """
    geom = state.geom
    apply_l, wts = _dirichlet_operator(state)
    u = np.ones(geom.shape) if u0 is None else np.asarray(u0, dtype=float).copy()
    u /= np.sqrt(np.sum(wts * u * u))
    lu = apply_l(u)
    q = float(np.sum(wts * u * lu))
    for _ in range(max_iter):
        r = lu - q * u
        rnorm = np.sqrt(np.sum(wts * r * r))
        if rnorm < 1e-14 * (1.0 + abs(q)):
            break
        r /= rnorm
        lr = apply_l(r)
        a11, a12, a22 = q, float(np.sum(wts * u * lr)), float(np.sum(wts * r * lr))
        m12 = float(np.sum(wts * u * r))
        amat = np.array([[a11, a12], [a12, a22]])
        mmat = np.array([[1.0, m12], [m12, 1.0]])
        vals, vecs = dense_eigh(amat, mmat)
        coef = vecs[:, 0]
        u_new = coef[0] * u + coef[1] * r
        u_new /= np.sqrt(np.sum(wts * u_new * u_new))
        lu = apply_l(u_new)
        q_new = float(np.sum(wts * u_new * lu))
        moved = abs(q_new - q)
        u, q = u_new, q_new
        if moved <= per_iter_tol * (1.0 + abs(q)):
            break
    else:
        raise EigensolverStalled(f"lambda solver did not settle in {max_iter} iterations")
    if float(np.sum(wts * u)) < 0:
        u = -u
    return (q, u) if return_vector else q


def eh_density_identity_residual(state: TorusFieldState) -> float:
    """|int GR u^2 dV - (int (R - |H|^2/12) u^2 + 4 |grad u|^2_g dV)| with u = e^-phi.

    Exact to round-off because the Laplacian is discretized in divergence
    form; run on random states before trusting the lambda solver's energy.
    """
    geom = state.geom
    ginv, w = _geometry_pack(state)
    wts = w * geom.h**geom.d
    u = np.exp(-state.phi)
    gr = generalized_scalar_field(state)
    lhs = float(np.sum(wts * gr * u * u))
    apply_l, wts2 = _dirichlet_operator(state)
    rhs = float(np.sum(wts2 * u * apply_l(u)))
    return abs(lhs - rhs) / (1.0 + abs(lhs))


# -- time stepping ---------------------------------------------------------------


@dataclass
class TorusParams:
    T: float = 1.0
    cfl: float = 0.2
    max_steps: int = 1_000_000
    compute_lambda: bool = True
    lambda_every: int = 1

    def __post_init__(self):
        if self.T <= 0 or self.cfl <= 0:
            raise ValidationError("T and cfl must be positive")


@dataclass
class TorusTrace:
    t: list[float] = field(default_factory=list)
    minR: list[float] = field(default_factory=list)
    meanR: list[float] = field(default_factory=list)
    lam: list[float] = field(default_factory=list)
    spd_margin: list[float] = field(default_factory=list)
    g_norm: list[float] = field(default_factory=list)
    B_norm: list[float] = field(default_factory=list)
    phi_norm: list[float] = field(default_factory=list)
    aborted: str | None = None
    final_state: TorusFieldState | None = None

    COLUMNS = ("t", "minR", "meanR", "lambda", "spd_margin", "g_norm", "B_norm", "phi_norm")

    def rows(self):
        for i in range(len(self.t)):
            yield (
                self.t[i], self.minR[i], self.meanR[i], self.lam[i],
                self.spd_margin[i], self.g_norm[i], self.B_norm[i], self.phi_norm[i],
            )


def _stability_dt(state: TorusFieldState, cfl: float) -> float:
    # max diffusion coefficient = largest eigenvalue of g^{-1} over the grid
    margin = degenerate_nodes(state)
    return cfl * state.geom.h**2 * margin  # 1/lambda_max(g^{-1}) = lambda_min(g)


def _rk4_torus(state: TorusFieldState, dt: float, rhs) -> TorusFieldState:
    def shifted(fac, k):
        s = state.copy()
        s.g = state.g + fac * k[0]
        s.B = state.B + fac * k[1]
        s.phi = state.phi + fac * k[2]
        s.t = state.t + fac
        return s

    k1 = rhs(state)
    k2 = rhs(shifted(dt / 2, k1))
    k3 = rhs(shifted(dt / 2, k2))
    k4 = rhs(shifted(dt, k3))
    out = state.copy()
    out.g = state.g + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    out.B = state.B + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    out.phi = state.phi + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    out.t = state.t + dt
    return out


def run_torus_flow(state: TorusFieldState, params: TorusParams, rhs=torus_rhs) -> TorusTrace:
    """RK4 run with diffusion-limited steps; aborts cleanly on degeneracy.

    The step is dt = cfl h^2 / max_node ||g^{-1}|| recomputed per step, cut to
    land exactly on T.  Symmetry of g and antisymmetry of B are asserted each
    step (the right sides preserve them by construction).
    """
    trace = TorusTrace()
    st = state.copy()
    lam_vec = None

    def record(s: TorusFieldState):
        nonlocal lam_vec
        gr = generalized_scalar_field(s)
        trace.t.append(s.t)
        trace.minR.append(float(np.min(gr)))
        trace.meanR.append(float(np.mean(gr)))
        if params.compute_lambda and (len(trace.t) - 1) % params.lambda_every == 0:
            lam, lam_vec = lambda_torus(s, u0=lam_vec, return_vector=True)
            trace.lam.append(lam)
        else:
            trace.lam.append(trace.lam[-1] if trace.lam else float("nan"))
        trace.spd_margin.append(s.spd_margin())
        trace.g_norm.append(float(np.max(np.abs(s.g))))
        trace.B_norm.append(float(np.max(np.abs(s.B))))
        trace.phi_norm.append(float(np.max(np.abs(s.phi))))

    try:
        record(st)
        steps = 0
        while st.t < params.T - 1e-12 and steps < params.max_steps:
            dt = min(_stability_dt(st, params.cfl), params.T - st.t)
            if dt < 1e-14:
                raise StepUnderflow(f"torus step underflow at t = {st.t}")
            st = _rk4_torus(st, dt, rhs)
            gsym = float(np.max(np.abs(st.g - np.swapaxes(st.g, -1, -2))))
            banti = float(np.max(np.abs(st.B + np.swapaxes(st.B, -1, -2))))
            scale = max(1.0, float(np.max(np.abs(st.g))))
            if gsym > 1e-12 * scale or banti > 1e-12 * scale:
                raise DegenerateMetric(f"symmetry drift: g {gsym:.2e}, B {banti:.2e}")
            record(st)
            steps += 1
    except (DegenerateMetric, StepUnderflow) as exc:
        trace.aborted = str(exc)
        trace.final_state = st
        exc.trace = trace
        raise
    trace.final_state = st
    return trace


# -- binary field dumps ----------------------------------------------------------

DUMP_MAGIC = b"GRFD"
DUMP_VERSION = 1


def write_field_dump(state: TorusFieldState, path) -> None:
    """Flat binary dump: header (magic 'GRFD', uint32 version, d, N, field
    count) then row-major float64 payloads g, B, phi."""
    with open(path, "wb") as fh:
        fh.write(DUMP_MAGIC)
        np.array([DUMP_VERSION, state.geom.d, state.geom.N, 3], dtype="<u4").tofile(fh)
        state.g.astype("<f8").tofile(fh)
        state.B.astype("<f8").tofile(fh)
        state.phi.astype("<f8").tofile(fh)


def read_field_dump(path) -> dict:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != DUMP_MAGIC:
            raise ValidationError(f"bad magic {magic!r}")
        version, d, n, nfields = np.fromfile(fh, dtype="<u4", count=4)
        if version != DUMP_VERSION or nfields != 3:
            raise ValidationError("unsupported dump layout")
        shape = (int(n),) * int(d)
        g = np.fromfile(fh, dtype="<f8", count=int(np.prod(shape)) * d * d).reshape(shape + (d, d))
        b = np.fromfile(fh, dtype="<f8", count=int(np.prod(shape)) * d * d).reshape(shape + (d, d))
        phi = np.fromfile(fh, dtype="<f8", count=int(np.prod(shape))).reshape(shape)
    return {"d": int(d), "N": int(n), "g": g, "B": b, "phi": phi}
