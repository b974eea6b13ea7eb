"""Generalized Ricci flow ODE on a quadratic Lie algebra.

dG/dt = -2 GRc(G, 0) and d(log sigma)/dt = -GR(G, 0)/2: over a point every
half-density induces the zero divergence, so the sigma equation decouples
and only feeds the diagnostics.  Time stepping is RK4 (or embedded RKF45)
followed by a Newton-Schulz retraction onto the involution manifold, which
is a polynomial in G and therefore preserves eta-symmetry exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import QuadraticLieAlgebra
from .curvature import ricci, ricci_closed_form, scalar, scalar_closed_form
from .errors import DegenerateSubspace, RetractionDiverged, StepUnderflow
from .metric import (
    GeneralizedPseudometric,
    _as_matrix,
    adapted_frame,
    involution_residual,
    mixed_norm_sq,
    validate_metric,
)

RHS_CROSS_CHECK_TOL = 1e-10


@dataclass
class FlowState:
    t: float
    G: np.ndarray
    log_sigma: float = 0.0

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=float)

    @classmethod
    def from_metric(cls, gm: GeneralizedPseudometric, t: float = 0.0, log_sigma: float = 0.0) -> "FlowState":
        return cls(t, gm.G.copy(), log_sigma)


@dataclass
class FlowParams:
    dt: float = 1e-3
    T: float = 10.0
    integrator: str = "rk4"  # rk4 | rkf45
    tol: float = 1e-8  # local error tolerance for rkf45
    retract_tol: float = 1e-10
    max_steps: int = 10_000_000
    debug_rhs: bool = False  # cross-check closed forms against dual routes

    def __post_init__(self):
        if self.dt <= 0 or self.T <= 0:
            raise ValueError("dt and T must be positive")
        if self.integrator not in ("rk4", "rkf45"):
            raise ValueError(f"unknown integrator '{self.integrator}'")


@dataclass
class FlowTrace:
    """Per-accepted-step diagnostic series of a flow run."""

    t: list[float] = field(default_factory=list)
    GR: list[float] = field(default_factory=list)
    normRc2: list[float] = field(default_factory=list)
    log_sigma: list[float] = field(default_factory=list)
    S: list[float] = field(default_factory=list)
    lam: list[float] = field(default_factory=list)
    involution_residual: list[float] = field(default_factory=list)
    soliton_residual: list[float] = field(default_factory=list)
    monotonicity_defect: list[float] = field(default_factory=list)
    step_dt: list[float] = field(default_factory=list)
    aborted: str | None = None
    final_G: np.ndarray | None = None

    COLUMNS = ("t", "GR", "normRc2", "log_sigma", "S", "lambda", "involution_residual", "soliton_residual")

    def rows(self):
        for i in range(len(self.t)):
            yield (
                self.t[i],
                self.GR[i],
                self.normRc2[i],
                self.log_sigma[i],
                self.S[i],
                self.lam[i],
                self.involution_residual[i],
                self.soliton_residual[i],
            )


def flow_rhs(a: QuadraticLieAlgebra, state: FlowState, debug: bool = False) -> tuple[np.ndarray, float]:
    """(dG, dlog_sigma) = (-2 GRc(G, 0), -GR(G, 0)/2).

    Uses the point-base closed forms; with ``debug`` the Ricci is
    cross-checked against the contraction + bracket-trace routes and the
    scalar against the Riemann trace route.
    """
    g = state.G
    grc = ricci_closed_form(a, g)
    if debug:
        ref = ricci(a, g, None)
        gap = float(np.max(np.abs(grc - ref)))
        if gap > RHS_CROSS_CHECK_TOL * (1.0 + float(np.max(np.abs(grc)))):
            raise AssertionError(f"closed-form Ricci disagrees with dual routes: {gap:.3e}")
        gr = scalar(a, g, None)
    else:
        gr = scalar_closed_form(a, g, None)
    return -2.0 * grc, -0.5 * gr


def involution_retract(G: np.ndarray, retract_tol: float = 1e-10, max_iter: int = 20) -> np.ndarray:
    """Newton-Schulz iteration G <- (3G - G^3)/2 onto the involution manifold.

    Quadratically convergent for ||G^2 - Id|| < 1; the guard at 0.5 keeps a
    safety margin.  Being a polynomial in G it preserves eta-symmetry exactly
    and cannot change the eigenbundle ranks.
    """
    g = np.asarray(G, dtype=float)
    res = involution_residual(g)
    if not res < 0.5:  # also catches inf/nan
        raise RetractionDiverged(f"involution residual {res:.3e} outside the contraction basin")
    for _ in range(max_iter):
        if res <= retract_tol:
            return g
        g = 0.5 * (3.0 * g - g @ g @ g)
        new_res = involution_residual(g)
        if not np.isfinite(new_res) or new_res > 0.5 * res:
            raise RetractionDiverged(f"retraction stalled at residual {new_res:.3e}")
        res = new_res
    if res <= retract_tol:
        return g
    raise RetractionDiverged(f"residual {res:.3e} after {max_iter} iterations")


_RKF45_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8, 3680 / 513, -845 / 4104),
    (-8 / 27, 2, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_RKF45_B5 = (16 / 135, 0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55)
_RKF45_B4 = (25 / 216, 0, 1408 / 2565, 2197 / 4104, -1 / 5, 0)


def _rk4_increment(a, state, dt, debug):
    k1 = flow_rhs(a, state, debug)
    k2 = flow_rhs(a, FlowState(state.t + dt / 2, state.G + dt / 2 * k1[0], state.log_sigma + dt / 2 * k1[1]), debug)
    k3 = flow_rhs(a, FlowState(state.t + dt / 2, state.G + dt / 2 * k2[0], state.log_sigma + dt / 2 * k2[1]), debug)
    k4 = flow_rhs(a, FlowState(state.t + dt, state.G + dt * k3[0], state.log_sigma + dt * k3[1]), debug)
    dg = dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    ds = dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return dg, ds, 0.0


def _rkf45_increment(a, state, dt, debug):
    ks = []
    for row in _RKF45_A:
        gg = state.G.copy()
        ls = state.log_sigma
        for coeff, k in zip(row, ks):
            gg = gg + dt * coeff * k[0]
            ls = ls + dt * coeff * k[1]
        ks.append(flow_rhs(a, FlowState(state.t, gg, ls), debug))
    dg5 = sum(b * k[0] for b, k in zip(_RKF45_B5, ks)) * dt
    ds5 = sum(b * k[1] for b, k in zip(_RKF45_B5, ks)) * dt
    dg4 = sum(b * k[0] for b, k in zip(_RKF45_B4, ks)) * dt
    ds4 = sum(b * k[1] for b, k in zip(_RKF45_B4, ks)) * dt
    err = max(float(np.max(np.abs(dg5 - dg4))), abs(ds5 - ds4))
    return dg5, ds5, err


def flow_step(a: QuadraticLieAlgebra, state: FlowState, params: FlowParams, dt: float | None = None) -> FlowState:
    """One accepted step: integrator increment, then involution retraction.

    The step is rejected and halved whenever the retraction fails or, for
    rkf45, the embedded error estimate exceeds the tolerance.
    """
    dt = params.dt if dt is None else dt
    increment = _rk4_increment if params.integrator == "rk4" else _rkf45_increment
    while True:
        if dt < 1e-14:
            raise StepUnderflow(f"time step underflow at t = {state.t}")
        with np.errstate(over="ignore", invalid="ignore"):
            dg, ds, err = increment(a, state, dt, params.debug_rhs)
        if not (np.all(np.isfinite(dg)) and np.isfinite(ds)):
            dt /= 2
            continue
        if params.integrator == "rkf45" and err > params.tol:
            dt /= 2
            continue
        try:
            g_new = involution_retract(state.G + dg, params.retract_tol)
        except RetractionDiverged:
            dt /= 2
            continue
        return FlowState(state.t + dt, g_new, state.log_sigma + ds)


def soliton_residual(a: QuadraticLieAlgebra, G) -> float:
    """Frobenius norm of GRc(G, 0) in an adapted frame.

    Zero exactly at solitons: over a point the lambda-minimizing half-density
    is the normalized constant, so the condition is GRc(G, 0) = 0.
    """
    g = _as_matrix(G)
    grc_dd = a.eta @ ricci_closed_form(a, g)
    fr = adapted_frame(a, g)
    grc_ad = fr.Q.T @ grc_dd @ fr.Q
    return float(np.linalg.norm(grc_ad))


def run_flow(a: QuadraticLieAlgebra, init: FlowState, params: FlowParams) -> FlowTrace:
    """Integrate to params.T recording diagnostics at every accepted step.

    Strict positivity of the initial metric is monitored: if it fails at a
    later step the run stops and the trace carries the abort reason (the
    theory guarantees preservation only through smooth existence).
    """
    rep = validate_metric(a, init.G)
    if not rep.pseudometric:
        raise RetractionDiverged(
            f"initial G violates the pseudometric constraints "
            f"(involution {rep.involution_residual:.2e}, symmetry {rep.eta_symmetry_residual:.2e})"
        )
    if rep.n_plus == 1 or rep.n_minus == 1:
        from .errors import ForbiddenRank

        raise ForbiddenRank(f"eigenbundle ranks ({rep.n_plus},{rep.n_minus}) include 1")
    watch_positivity = rep.strictly_positive

    trace = FlowTrace()
    state = FlowState(init.t, init.G.copy(), init.log_sigma)

    def soliton_value(g, rc2):
        if watch_positivity:
            # in an adapted frame of a strictly positive metric the Frobenius
            # norm of GRc equals sqrt(|GRc|^2_G)
            return float(np.sqrt(max(rc2, 0.0)))
        try:
            return soliton_residual(a, g)
        except DegenerateSubspace:
            return float("nan")

    def record(st: FlowState, gr: float, rc2: float, defect: float):
        sigma_sq = float(np.exp(2 * st.log_sigma))
        trace.t.append(st.t)
        trace.GR.append(gr)
        trace.normRc2.append(rc2)
        trace.log_sigma.append(st.log_sigma)
        trace.S.append(gr * sigma_sq)
        trace.lam.append(gr)  # over a point the unit-mass infimum is GR itself
        trace.involution_residual.append(involution_residual(st.G))
        trace.soliton_residual.append(soliton_value(st.G, rc2))
        trace.monotonicity_defect.append(defect)

    def diagnostics(g):
        gr = scalar_closed_form(a, g, None)
        rc2 = mixed_norm_sq(a, a.eta @ ricci_closed_form(a, g))
        return gr, rc2

    gr_cur, rc2_cur = diagnostics(state.G)
    record(state, gr_cur, rc2_cur, 0.0)
    trace.step_dt.append(0.0)
    steps = 0
    while state.t < params.T - 1e-12 and steps < params.max_steps:
        dt = min(params.dt, params.T - state.t)
        try:
            new_state = flow_step(a, state, params, dt)
        except StepUnderflow as exc:
            trace.aborted = f"step underflow at t = {state.t}"
            trace.final_G = state.G
            exc.trace = trace
            raise
        if watch_positivity:
            pairing = a.eta @ new_state.G
            if np.min(np.linalg.eigvalsh((pairing + pairing.T) / 2)) <= 0:
                trace.aborted = f"strict positivity lost at t = {new_state.t}"
                break
        actual_dt = new_state.t - state.t
        gr_new, rc2_new = diagnostics(new_state.G)
        dgr = (gr_new - gr_cur) / actual_dt
        defect = abs(dgr - 0.5 * (rc2_cur + rc2_new))
        record(new_state, gr_new, rc2_new, defect)
        trace.step_dt.append(actual_dt)
        state, gr_cur, rc2_cur = new_state, gr_new, rc2_new
        steps += 1
    trace.final_G = state.G
    return trace


def euler_reference(a: QuadraticLieAlgebra, G0: np.ndarray, T: float, dt: float, retract_tol: float = 1e-10) -> np.ndarray:
    """Explicit-Euler integration of the metric equation (oracle for RK4)."""
    g = np.asarray(G0, dtype=float).copy()
    t = 0.0
    while t < T - 1e-12:
        step = min(dt, T - t)
        g = involution_retract(g - 2.0 * step * ricci_closed_form(a, g), retract_tol)
        t += step
    return g
