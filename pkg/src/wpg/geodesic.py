"""Geodesic boundary-value solver in the discrete WP path metric.

A path between particle configurations q0 and qT1 is parameterized by the
velocity grid V; particle positions follow from the symmetric reconstruction
Q = (q0 + qT1)/2 + V Z. The energy E = sum_t h^t (v^t)^T L_F^t v^t is driven
down by a natural-gradient descent: the unconstrained gradient is solved
against the path-space metric

    Ltilde = Y^T blockdiag(h^t L_F^t) Y,     Y = I - W Ztilde,

and projected onto the nullspace of the endpoint constraint A V = V h, so
every iterate stays on the manifold of paths connecting q0 to qT1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .circle import validate_config
from .temporal import (
    OrderingViolated,
    QuadratureScheme,
    build_quadrature,
    endpoint_residual,
    particles_from_velocities,
)
from .wp_metric import Basis, LiftResult, SliceFactor, minimal_lift, wp_inner

logger = logging.getLogger("wpg.geodesic")


class DegenerateJacobian(RuntimeError):
    """Discrete q' estimate fell below 1e-8: particles collapsed."""


class SingularProjection(RuntimeError):
    """Constraint normal equations are numerically rank-deficient."""


class ZeroVelocity(ValueError):
    """vertex_angle called with a velocity of WP norm below 1e-12."""


@dataclass
class PathState:
    """Velocity grid V with everything derived from it: particle trajectory
    Q, per-slice lift factorizations and lifts, and the path energy."""

    q0: np.ndarray
    qT1: np.ndarray
    V: np.ndarray
    Q: np.ndarray
    scheme: QuadratureScheme
    factors: list
    lifts: list
    energy: float


def make_path_state(q0, qT1, V, scheme: QuadratureScheme, basis_factory=None,
                    warn: bool = True) -> PathState:
    """Build a consistent PathState from a velocity grid."""
    q0 = validate_config(q0)
    qT1 = np.asarray(qT1, dtype=float)
    V = np.asarray(V, dtype=float)
    Q = particles_from_velocities(q0, qT1, V, scheme)
    factors, lifts = [], []
    for t in range(scheme.T):
        basis = None if basis_factory is None else basis_factory(Q[:, t])
        fac = SliceFactor(Q[:, t], basis, warn=warn)
        factors.append(fac)
        lifts.append(fac.lift(V[:, t]))
    energy = float(scheme.h @ np.array([lf.norm_sq for lf in lifts]))
    return PathState(q0=q0, qT1=qT1, V=V, Q=Q, scheme=scheme,
                     factors=factors, lifts=lifts, energy=energy)


def path_energy(state: PathState) -> float:
    """E = sum_t h^t ||v^t||^2_WP(Q^t), from the stored per-slice lifts."""
    return float(state.scheme.h @ np.array([lf.norm_sq for lf in state.lifts]))


def energy_gradient(state: PathState) -> np.ndarray:
    """Exact dE/dV by the chain rule through Q = (q0+qT1)/2 + V Z.

    (1/2) dE/dv^t = h^t p^t - sum_r Z_{t,r} g_q^r with the weighted momenta
    p^r = h^r L_F^r v^r and g_q^r = p^r o vtilde'(q^r) the time-r particle
    gradient; the node derivative comes from the same lift factorization.
    """
    h = state.scheme.h
    p_w = np.stack([h[t] * state.lifts[t].p for t in range(state.scheme.T)], axis=1)
    g_q = np.stack(
        [p_w[:, t] * state.factors[t].node_derivative(state.lifts[t])
         for t in range(state.scheme.T)],
        axis=1,
    )
    return 2.0 * (p_w - g_q @ state.scheme.Z.T)


@dataclass
class ConstraintMap:
    """A V = V h, one endpoint-displacement constraint per particle."""

    h: np.ndarray

    def __post_init__(self):
        self.norm_sq = float(self.h @ self.h)
        if not np.isfinite(self.norm_sq) or self.norm_sq < 1e-30:
            raise SingularProjection("constraint normal equations are singular")

    def apply(self, V) -> np.ndarray:
        return V @ self.h

    def project(self, U) -> np.ndarray:
        """Orthogonal projection onto null(A): U - A^T (A A^T)^{-1} A U."""
        return U - np.outer(U @ self.h, self.h) / self.norm_sq


class PathMetric:
    """Matrix-free realization of Ltilde = Y^T blockdiag(h^t L^t) Y.

    Y acts per particle: row m of Y U is u_m (I - Z diag(W_m)), so Y is block
    diagonal in the particle index with T x T blocks; the constrained solves
    invert those blocks and the regularized slice momenta matrices exactly.
    """

    def __init__(self, state: PathState):
        self.scheme = state.scheme
        self.shape_mt = state.V.shape
        h = state.scheme.h

        qprime = _flow_jacobian(state.q0, state.Q)
        if qprime.min() < 1e-8:
            raise DegenerateJacobian(
                f"discrete q' estimate {qprime.min():.3e} below 1e-8"
            )
        # W_jj = vtilde'(x_j) (q^{-1})'(q_j): the label derivative of the lift
        # times the inverse-flow Jacobian collapses to the theta derivative of
        # the lift at the node, vtilde_theta(q_j) -- the q' estimates cancel
        # exactly, leaving them only as the degeneracy guard above. This makes
        # Y U the sampled Eulerian field variation delta_u = delta_v -
        # vtilde_theta(q) delta_q, and the energy gradient exactly orthogonal
        # to the metric kernel (the Moebius isometry directions).
        self.W = np.stack(
            [state.factors[t].node_derivative(state.lifts[t])
             for t in range(state.scheme.T)],
            axis=1,
        )
        self.D = np.stack(
            [h[t] * state.factors[t].momenta_matrix() for t in range(state.scheme.T)]
        )
        self.trace_d = float(np.trace(self.D, axis1=1, axis2=2).sum())
        self._dinv = None
        self._inv_y_blocks = None
        self._mu = None

    def apply_y(self, U) -> np.ndarray:
        return U - self.W * (U @ self.scheme.Z)

    def apply_yt(self, S) -> np.ndarray:
        return S - (self.W * S) @ self.scheme.Z.T

    def matvec(self, U) -> np.ndarray:
        yu = self.apply_y(U)
        du = np.einsum("tij,jt->it", self.D, yu)
        return self.apply_yt(du)

    def dense(self) -> np.ndarray:
        """Materialized (MT x MT) matrix, column-major in (particle, time)."""
        m, t = self.shape_mt
        cols = [self.matvec(e.reshape(m, t, order="F")).ravel(order="F")
                for e in np.eye(m * t)]
        return np.stack(cols, axis=1)

    def _build_precond(self, mu: float):
        if self._mu == mu:
            return
        m, t = self.shape_mt
        eye_m = np.eye(m)
        jitter = np.maximum(mu, 1e-14 * (np.trace(self.D, axis1=1, axis2=2) / m + 1.0))
        while True:
            try:
                dinv = np.linalg.inv(self.D + jitter[:, None, None] * eye_m)
                break
            except np.linalg.LinAlgError:
                jitter = jitter * 100.0
        self._dinv = 0.5 * (dinv + np.transpose(dinv, (0, 2, 1)))
        # per-particle blocks (Y_m)^T = I - Z diag(W_m), inverted once
        blocks = np.eye(t)[None, :, :] - self.scheme.Z[None, :, :] * self.W[:, None, :]
        self._inv_y_blocks = np.linalg.inv(blocks)
        self._mu = mu

    def solve_regularized(self, S, mu: float) -> np.ndarray:
        """Apply (Y^T (D + mu) Y)^{-1} = Y^{-1} (D + mu)^{-1} Y^{-T} to S."""
        self._build_precond(mu)
        x = np.einsum("mt,mrt->mr", S, self._inv_y_blocks)  # Y^{-T} S
        x = np.einsum("tmn,nt->mt", self._dinv, x)
        return np.einsum("mr,mrt->mt", x, self._inv_y_blocks)  # Y^{-1} x


def _flow_jacobian(labels, Q) -> np.ndarray:
    """Centered periodic finite differences of q^t against the label grid."""
    dq = np.roll(Q, -1, axis=0) - np.roll(Q, 1, axis=0)
    dq[0] += 2.0 * np.pi
    dq[-1] += 2.0 * np.pi
    dx = np.roll(labels, -1) - np.roll(labels, 1)
    dx[0] += 2.0 * np.pi
    dx[-1] += 2.0 * np.pi
    return dq / dx[:, None]


def build_path_metric(state: PathState) -> PathMetric:
    """Path-space metric operator for the current state (SPD up to kernel)."""
    return PathMetric(state)


def project_natural_gradient(grad, metric: PathMetric,
                             A: ConstraintMap | None = None,
                             damping: float = 1e-10) -> np.ndarray:
    """Constrained natural-gradient direction d.

    Direct KKT solve of min_{A d = 0} <d - g, K (d - g)> with the regularized
    metric K = Y^T (D + mu) Y, mu = damping * mean slice eigenvalue:
    d = K^{-1}(grad - A* lam) where the Schur complement A K^{-1} A* reduces,
    per the block structure, to sum_t diag(y_t) (D_t + mu)^{-1} diag(y_t)
    with y_m = Y_m^{-T} h. Guarantees A d = 0 and <grad, d> >= 0, so
    V <- V - eps d descends; large damping turns d into a scaled projected
    gradient, small damping recovers the undamped natural direction.
    """
    if A is None:
        A = ConstraintMap(metric.scheme.h)
    m, t = metric.shape_mt
    mu = damping * metric.trace_d / (m * t)

    g = np.asarray(grad, dtype=float)
    if not np.any(g):
        return np.zeros_like(g)
    kg = metric.solve_regularized(g, mu)
    metric._build_precond(mu)
    y = np.einsum("mrt,t->mr", metric._inv_y_blocks, A.h)
    schur = np.einsum("tmn,mt,nt->mn", metric._dinv, y, y)
    schur = 0.5 * (schur + schur.T)
    try:
        lam = cho_solve(cho_factor(schur), kg @ A.h)
    except np.linalg.LinAlgError as exc:
        raise SingularProjection(
            "endpoint-constraint Schur complement is singular"
        ) from exc
    d = kg - metric.solve_regularized(np.outer(lam, A.h), mu)
    # the exact solution lies in null(A); sweep out the O(solver roundoff)
    # residual so accepted steps keep the endpoint displacement to precision
    return A.project(d)


@dataclass
class GeodesicConfig:
    scheme: str = "piecewise_linear"
    T: int = 150
    max_iter: int = 500
    tol_obj: float = 1e-8
    tol_grad: float = 1e-6
    armijo: float = 1e-4
    log_every: int = 10
    basis_factory: object = None


@dataclass
class GeodesicResult:
    state: PathState
    energy_history: list
    iterations: int
    diagnostics: dict
    converged: bool
    max_iter_reached: bool = False


def _as_config(config, overrides) -> GeodesicConfig:
    if config is None:
        cfg = GeodesicConfig()
    elif isinstance(config, GeodesicConfig):
        cfg = config
    else:
        cfg = GeodesicConfig(**dict(config))
    for key, val in overrides.items():
        if not hasattr(cfg, key):
            raise TypeError(f"unknown geodesic option {key!r}")
        setattr(cfg, key, val)
    return cfg


def _rebalance_time(state: PathState, scheme, q0, qT1, basis_factory):
    """Resample the path at constant speed.

    Length² ≤ energy with equality exactly at constant speed, so an uneven
    speed profile carries removable energy; plain descent drains it through
    a long sequence of small steps, while this move removes it at once
    without changing the geometric image of the path. Returns the resampled
    state, or None when the path is numerically zero or the resampling
    breaks particle ordering; callers accept it only when energy decreases.
    """
    norms = np.array([lf.norm_sq for lf in state.lifts])
    if norms.max() < 1e-12:
        return None
    sig = np.sqrt(norms)
    h, s = scheme.h, scheme.s
    edges = np.concatenate([[0.0], np.cumsum(h)])
    arc = np.concatenate([[0.0], np.cumsum(sig * h)])
    # old time tau at which the arclength fraction equals the new node time,
    # then v_new(s) = v(tau(s)) * tau'(s) with tau'(s) = total / sigma(tau)
    tau = np.interp(s * arc[-1], arc, edges)
    v_tau = np.empty_like(state.V)
    for m in range(state.V.shape[0]):
        v_tau[m] = np.interp(tau, s, state.V[m])
    v_new = v_tau * (arc[-1] / np.interp(tau, s, sig))
    v_new += np.outer(qT1 - q0 - v_new @ h, h) / float(h @ h)
    try:
        return make_path_state(q0, qT1, v_new, scheme, basis_factory,
                               warn=False)
    except OrderingViolated:
        return None


def transfer_velocity(x_old, V_old, x_new) -> np.ndarray:
    """Resample a velocity grid onto new particle labels.

    Periodic linear interpolation in the label coordinate; used to warm-start
    a solve from the solution of a neighboring problem (e.g. the previous
    case of a parameter sweep), whose labels generally differ.
    """
    x_old = np.asarray(x_old, dtype=float)
    V_old = np.asarray(V_old, dtype=float)
    base = x_old[0]
    xs = np.concatenate([x_old - base, [2.0 * np.pi]])
    rows = np.vstack([V_old, V_old[:1]])
    xq = np.mod(np.asarray(x_new, dtype=float) - base, 2.0 * np.pi)
    out = np.empty((xq.size, V_old.shape[1]))
    for t in range(V_old.shape[1]):
        out[:, t] = np.interp(xq, xs, rows[:, t])
    return out


def minimize(q0, qT1, config=None, V0=None, **overrides) -> GeodesicResult:
    """Gradient descent for the geodesic between endpoint configurations.

    Each iteration: lift -> gradient -> projected natural gradient ->
    backtracking line search on E(V - eps d) -> update. Stops when the
    relative objective decrease drops below tol_obj and the normalized
    projected gradient norm below tol_grad.

    V0 optionally warm-starts the velocity grid (it is projected back onto
    the endpoint constraint first); the default start is the constant
    displacement field.
    """
    cfg = _as_config(config, overrides)
    q0 = validate_config(q0)
    qT1 = np.asarray(qT1, dtype=float)
    if qT1.shape != q0.shape:
        raise ValueError("endpoint configurations differ in size")
    # shift qT1 by a multiple of 2 pi so the mean displacement takes the
    # shorter arc; both endpoints keep their internal ordering
    qT1 = qT1 - 2.0 * np.pi * np.round(np.mean(qT1 - q0) / (2.0 * np.pi))
    validate_config(qT1)

    scheme = build_quadrature(cfg.scheme, cfg.T)
    A = ConstraintMap(scheme.h)
    m = q0.size
    norm_fac = np.sqrt(m * scheme.T)

    state = None
    if V0 is not None:
        V = np.asarray(V0, dtype=float)
        if V.shape != (m, scheme.T):
            raise ValueError("V0 shape does not match (M, T)")
        V = V + np.outer(qT1 - q0 - V @ scheme.h, scheme.h) / A.norm_sq
        try:
            state = make_path_state(q0, qT1, V, scheme, cfg.basis_factory,
                                    warn=False)
        except OrderingViolated:
            logger.info("warm start breaks particle ordering; falling back "
                        "to the constant displacement start")
            state = None
    if state is None:
        V = np.tile((qT1 - q0)[:, None], (1, scheme.T))
        state = make_path_state(q0, qT1, V, scheme, cfg.basis_factory)
    energy_history = [state.energy]
    # objective decreases are measured relative to the initial energy; a
    # per-step ratio against the current energy would never fall below
    # tol_obj on zero-distance pairs whose energy drains geometrically
    e_scale = max(state.energy, 1e-300)
    # Levenberg-Marquardt damping on the natural-gradient solve, relative to
    # the mean slice eigenvalue: large values give short projected-gradient
    # steps (robust far from the optimum, where the undamped direction rides
    # low-metric modes into ordering violations), small values recover the
    # full natural direction and its fast local convergence.
    lm = 1e-8
    rel_dec = 0.0
    gnorm = np.inf
    converged = False
    iterations = 0
    warned_cond = False
    exhausted = True

    for it in range(1, cfg.max_iter + 1):
        e_before = state.energy
        if _norm_constancy(state) > 1e-3:
            reb = _rebalance_time(state, scheme, q0, qT1, cfg.basis_factory)
            if reb is not None and reb.energy < state.energy:
                state = reb
        grad = energy_gradient(state)
        metric = build_path_metric(state)
        # optimality is measured on the projected gradient itself: it vanishes
        # exactly at constrained critical points, whereas the natural
        # direction d carries a 1/mu noise floor along the metric kernel
        gnorm = np.linalg.norm(A.project(grad)) / norm_fac

        if rel_dec < cfg.tol_obj and gnorm < cfg.tol_grad:
            converged = True
            exhausted = False
            break

        accepted = None
        eps_used = 1.0
        any_ordering = False
        any_evaluated = False
        for _ in range(24):
            d = project_natural_gradient(grad, metric, A, damping=lm)
            slope = float(np.sum(grad * d))
            if slope <= 0.0:
                lm = min(lm * 10.0, 1e10)
                continue
            # backtracking with quadratic interpolation per damping level;
            # persistent shrinkage is delegated to raising the damping, which
            # also bends the direction toward the projected gradient
            eps = 1.0
            for _ in range(6):
                try:
                    cand = make_path_state(q0, qT1, state.V - eps * d, scheme,
                                           cfg.basis_factory, warn=False)
                    any_evaluated = True
                except OrderingViolated:
                    any_ordering = True
                    eps *= 0.25
                    continue
                if cand.energy < state.energy - cfg.armijo * eps * slope:
                    accepted = cand
                    eps_used = eps
                    break
                # minimize the quadratic through E(0), E'(0), E(eps)
                denom = cand.energy - state.energy + eps * slope
                enew = 0.5 * eps * eps * slope / denom if denom > 0 else 0.0
                eps = min(max(enew, 0.1 * eps), 0.5 * eps)
            if accepted is not None:
                break
            lm = min(lm * 10.0, 1e10)
        if accepted is None:
            if any_ordering and not any_evaluated:
                raise OrderingViolated(
                    "no step length preserves particle ordering"
                )
            if (e_before - state.energy) / e_scale >= cfg.tol_obj:
                # the reparameterization move alone made progress; keep going
                rel_dec = (e_before - state.energy) / e_scale
                energy_history.append(state.energy)
                iterations = it
                continue
            converged = rel_dec < cfg.tol_obj and gnorm < cfg.tol_grad
            exhausted = False
            if not converged:
                logger.warning("line search stalled at iteration %d (E=%.6e)",
                               it, state.energy)
            break

        rel_dec = (e_before - accepted.energy) / e_scale
        state = accepted
        energy_history.append(state.energy)
        iterations = it
        # trust-region flavored damping update: full steps relax it, heavily
        # backtracked ones tighten it so later directions lean on the gradient
        if eps_used >= 0.99:
            lm = max(lm / 3.0, 1e-12)
        elif eps_used <= 0.25:
            lm = min(lm * 2.0, 1e10)
        if not warned_cond:
            worst = max(f.cond for f in state.factors)
            if worst > 1e13:
                logger.warning("lift factorization condition reached %.2e", worst)
                warned_cond = True
        if cfg.log_every and it % cfg.log_every == 0:
            logger.info(
                "iter=%d E=%.12e step=%.3e damping=%.1e gnorm=%.3e constancy=%.3e",
                it, state.energy, eps_used, lm, gnorm, _norm_constancy(state),
            )

    max_iter_reached = exhausted and not converged
    diag = {
        "norm_constancy": _norm_constancy(state),
        "projected_gradient_norm": float(gnorm),
        "endpoint_residual": float(
            np.max(np.abs(endpoint_residual(q0, qT1, state.V, scheme)))
        ),
    }
    logger.info(
        "done iters=%d E=%.12e converged=%s constancy=%.3e resid=%.3e",
        iterations, state.energy, converged, diag["norm_constancy"],
        diag["endpoint_residual"],
    )
    return GeodesicResult(
        state=state,
        energy_history=energy_history,
        iterations=iterations,
        diagnostics=diag,
        converged=converged,
        max_iter_reached=max_iter_reached,
    )


minimize_path = minimize


def _norm_constancy(state: PathState) -> float:
    norms = np.array([lf.norm_sq for lf in state.lifts])
    if norms.max() < 1e-10:
        # numerically zero path: the speed is constantly zero and the
        # max/min ratio would only compare roundoff residues
        return 0.0
    return float(norms.max() / norms.min() - 1.0)


def vertex_angle(config, v1, v2, basis: Basis | None = None) -> float:
    """Angle between two geodesic initial velocities at a common point."""
    n1 = np.sqrt(minimal_lift(config, v1, basis).norm_sq)
    n2 = np.sqrt(minimal_lift(config, v2, basis).norm_sq)
    if n1 < 1e-12 or n2 < 1e-12:
        raise ZeroVelocity("velocity has WP norm below 1e-12")
    cosang = wp_inner(config, v1, v2, basis) / (n1 * n2)
    return float(np.arccos(np.clip(cosang, -1.0, 1.0)))
