"""Discrete Weil-Petersson metric: minimal-norm horizontal lifts and momenta.

Velocity data v given at particles q extends to the vector field of minimal
WP norm interpolating it,

    vtilde = sum_n c_n f_n + sum_j w_j b_j,        b = (1, cos, sin),

the kernel span carrying no norm. The coefficients solve the equality
constrained least-squares problem

    minimize ||R x||_2   subject to   [lambda_F  B] x = v,

with R a matrix square root of blockdiag(G_F, 0), G_F the WP Gram matrix of
the basis. We factor G_F = R^T R (Cholesky, eigenvalue square root as a
fallback), substitute y = R c, and read everything off a QR factorization of
(lambda_F R^{-1})^T: the kernel coefficients w come from a 3-variable least
squares, c from a triangular solve, the momenta p = L_F v from the transposed
pseudoinverse, and norm_sq = y.y = v.p.

Under the one-sided Fourier norm sum_{n>=2} (n^3 - n)|a_n|^2 the reproducing
kernel is k(theta) = 2 G(theta); the default basis is the set of kernel
translates k(. - q_n), for which lambda_F and G_F coincide and momenta equal
basis coefficients.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, qr, solve_triangular
from scipy.linalg import lapack as _lapack

from .circle import (
    green_function,
    green_function_derivative,
    kernel_basis,
    kernel_basis_derivative,
    validate_config,
)


class DuplicateParticles(ValueError):
    """Two particles closer than 1e-12 on the circle; Gram would be singular."""


class RankDeficient(ValueError):
    """The stacked system [lambda_F B] x = v admits no solution."""


class IllConditionedWarning(UserWarning):
    """Condition estimate of the lift factorization exceeds 1e13."""


_COND_LIMIT = 1e13
_EIG_FLOOR = 1e-14


@dataclass
class LiftResult:
    """Minimal-lift output: momenta p, kernel coefficients w, basis
    coefficients c, and the squared WP norm (== v.p)."""

    p: np.ndarray
    w: np.ndarray
    c: np.ndarray
    norm_sq: float


def build_gram(config) -> np.ndarray:
    """Gram matrix G_ij = G(q_i - q_j); symmetric, constant diagonal G(0) = 1/2."""
    q = validate_config(config)
    gaps = np.diff(q)
    wrap = 2.0 * np.pi - (q[-1] - q[0])
    if np.min(gaps) < 1e-12 or wrap < 1e-12:
        raise DuplicateParticles("particles closer than 1e-12 on the circle")
    return green_function(q[:, None] - q[None, :])


class Basis:
    """Interface shared by the lift bases.

    A basis provides the interpolation matrix lambda_F (and its theta
    derivative) on a particle configuration, its WP Gram matrix, and pointwise
    evaluation of the basis functions for reconstructing lifts.
    """

    kind: str
    size: int

    def lambda_matrix(self, config) -> np.ndarray:
        raise NotImplementedError

    def lambda_prime_matrix(self, config) -> np.ndarray:
        raise NotImplementedError

    def gram(self) -> np.ndarray:
        raise NotImplementedError

    def eval_functions(self, theta) -> np.ndarray:
        raise NotImplementedError

    def eval_functions_derivative(self, theta) -> np.ndarray:
        raise NotImplementedError


class GreensBasis(Basis):
    """Translates of the reproducing kernel k(theta) = 2 G(theta) centered at
    the particles. lambda_F and G_F are the same matrix, so momenta and basis
    coefficients coincide and the lift factorization is purely triangular."""

    kind = "greens"

    def __init__(self, config):
        self.centers = validate_config(config)
        self.size = self.centers.size

    def lambda_matrix(self, config):
        q = np.asarray(config, dtype=float)
        return 2.0 * green_function(q[:, None] - self.centers[None, :])

    def lambda_prime_matrix(self, config):
        q = np.asarray(config, dtype=float)
        return 2.0 * green_function_derivative(q[:, None] - self.centers[None, :])

    def gram(self):
        # reproducing property: <k(.-q_i), k(.-q_j)> = k(q_i - q_j)
        return 2.0 * build_gram(self.centers)

    def eval_functions(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return 2.0 * green_function(theta[:, None] - self.centers[None, :])

    def eval_functions_derivative(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return 2.0 * green_function_derivative(theta[:, None] - self.centers[None, :])


class FourierBasis(Basis):
    """Real Fourier pairs cos(n theta), sin(n theta) for n = 2..N/2.

    Retained for cross-validation: at full rank its minimal-lift norms must
    agree with the greens basis. The WP Gram is diagonal with entries
    (n^3 - n)/4 for each of the two functions of frequency n.
    """

    kind = "fourier"

    def __init__(self, n_modes: int):
        if n_modes < 4:
            raise ValueError("need n_modes >= 4 so at least frequency 2 is present")
        self.freqs = np.arange(2, n_modes // 2 + 1)
        self.size = 2 * self.freqs.size

    def _trig(self, theta, fn_cos, fn_sin):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        arg = theta[:, None] * self.freqs[None, :]
        out = np.empty((theta.size, self.size))
        out[:, 0::2] = fn_cos(arg)
        out[:, 1::2] = fn_sin(arg)
        return out

    def lambda_matrix(self, config):
        return self._trig(np.asarray(config, dtype=float), np.cos, np.sin)

    def lambda_prime_matrix(self, config):
        theta = np.atleast_1d(np.asarray(config, dtype=float))
        arg = theta[:, None] * self.freqs[None, :]
        out = np.empty((theta.size, self.size))
        out[:, 0::2] = -self.freqs * np.sin(arg)
        out[:, 1::2] = self.freqs * np.cos(arg)
        return out

    def gram(self):
        w = (self.freqs.astype(float) ** 3 - self.freqs) / 4.0
        return np.diag(np.repeat(w, 2))

    def eval_functions(self, theta):
        return self._trig(theta, np.cos, np.sin)

    def eval_functions_derivative(self, theta):
        return self.lambda_prime_matrix(theta)


def _gram_root(g_f):
    """Upper-triangular Cholesky factor of G_F, or an eigenvalue square root
    with floored spectrum when Cholesky fails. Returns (R, triangular)."""
    try:
        return cholesky(g_f, lower=False), True
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(g_f)
    floor = _EIG_FLOOR * np.linalg.norm(g_f, 2)
    vals = np.maximum(vals, floor)
    return np.sqrt(vals)[:, None] * vecs.T, False


def _tri_cond(r):
    """1-norm condition estimate of a triangular factor via LAPACK trcon."""
    rcond, info = _lapack.dtrcon(r, norm="1", uplo="U", diag="N")
    if info != 0 or rcond == 0.0:
        return np.inf
    return 1.0 / rcond


class SliceFactor:
    """Lift factorization bound to one configuration and basis.

    Amortizes the Gram build, its triangular root and the QR step across the
    many solves a geodesic iteration performs at a fixed time slice: lifts of
    several velocity fields, the dense momenta matrix for the path metric, and
    the node derivatives vtilde'(q) for gradients.
    """

    def __init__(self, config, basis: Basis | None = None, warn: bool = True):
        self.q = validate_config(config)
        self.basis = GreensBasis(self.q) if basis is None else basis
        self.b_mat = kernel_basis(self.q)
        g_f = self.basis.gram()
        self.r_f, self.triangular = _gram_root(g_f)

        if self.basis.kind == "greens" and self.triangular:
            # lambda_F = G_F = R^T R, so K = lambda_F R^{-1} = R^T and K^T = R
            # is already the QR factor with Q = I.
            self.q_k, self.r_k = None, self.r_f
        else:
            lam = self.basis.lambda_matrix(self.q)
            if self.triangular:
                k_t = solve_triangular(self.r_f.T, lam.T, lower=True)
            else:
                # R^{-T} = R G_F^{-1} for the symmetric eigenvalue root
                k_t = self.r_f @ np.linalg.pinv(g_f) @ lam.T
            self.q_k, self.r_k = qr(k_t, mode="economic")

        if self.r_k.shape[0] < self.q.size:
            # fewer basis functions than particles: generic data cannot be
            # interpolated; lifts go through the rank-deficient solver, which
            # checks solvability and raises RankDeficient when the stacked
            # system has no solution
            self.cond = np.inf
            self.full_rank = False
        else:
            self.cond = _tri_cond(self.r_k)
            if warn and self.cond > _COND_LIMIT:
                warnings.warn(
                    f"lift factorization condition estimate {self.cond:.2e} "
                    f"exceeds {_COND_LIMIT:.0e}",
                    IllConditionedWarning,
                    stacklevel=3,
                )
            diag = np.abs(np.diag(self.r_k))
            self.full_rank = diag.min() > diag.max() * self.q.size * np.finfo(float).eps
        self._jb = self._apply_j(self.b_mat) if self.full_rank else None

    def _apply_j(self, x):
        # J = K^+ = Q_k R_k^{-T}
        y = solve_triangular(self.r_k, x, lower=False, trans="T")
        return y if self.q_k is None else self.q_k @ y

    def _finish(self, y, w):
        if self.triangular:
            c = solve_triangular(self.r_f, y, lower=False)
        else:
            c = np.linalg.lstsq(self.r_f, y, rcond=None)[0]
        # p = J^T y recovers the momenta L_F v
        p = solve_triangular(
            self.r_k, (y if self.q_k is None else self.q_k.T @ y), lower=False
        )
        return p, c

    def lift(self, v) -> LiftResult:
        v = np.asarray(v, dtype=float)
        if v.shape != self.q.shape:
            raise ValueError("velocity data and configuration sizes differ")
        if not self.full_rank:
            return _lift_rank_deficient(
                self.q, v, self.b_mat, self.r_f, self.triangular, self.basis
            )
        jv = self._apply_j(v)
        w, *_ = np.linalg.lstsq(self._jb, jv, rcond=None)
        y = jv - self._jb @ w
        p, c = self._finish(y, w)
        return LiftResult(p=p, w=w, c=c, norm_sq=float(y @ y))

    def momenta_matrix(self) -> np.ndarray:
        """Dense symmetric PSD matrix of v -> p = L_F v (rank <= M - 3)."""
        ji = self._apply_j(np.eye(self.q.size))
        w_all, *_ = np.linalg.lstsq(self._jb, ji, rcond=None)
        y_all = ji - self._jb @ w_all
        p_all, _ = self._finish(y_all, w_all)
        return 0.5 * (p_all + p_all.T)

    def node_derivative(self, lift: LiftResult) -> np.ndarray:
        """vtilde'(q) at the particles for a lift from this factorization."""
        return self.basis.lambda_prime_matrix(self.q) @ lift.c + kernel_basis_derivative(
            self.q
        ) @ lift.w


def minimal_lift(config, v, basis: Basis | None = None) -> LiftResult:
    """Minimum-WP-norm interpolant of data v at the particles of config.

    Solves min ||R x|| s.t. [lambda_F B] x = v and returns momenta p = L_F v,
    kernel coefficients w, basis coefficients c and norm_sq = v.p >= 0.
    """
    return SliceFactor(config, basis).lift(v)


def _lift_rank_deficient(q, v, b_mat, r_f, triangular, basis):
    """SVD path for rank-deficient K: checks solvability of the stacked
    system and minimizes over the remaining kernel-coefficient freedom."""
    lam = basis.lambda_matrix(q)
    if triangular:
        k = solve_triangular(r_f.T, lam.T, lower=True).T
    else:
        k = (r_f @ np.linalg.pinv(basis.gram()) @ lam.T).T
    u, s, vt = np.linalg.svd(k, full_matrices=True)
    tol = max(k.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    m = q.size

    v_hat = u.T @ v
    b_hat = u.T @ b_mat
    scale = np.linalg.norm(v) + 1.0
    if rank < m:
        b2, v2 = b_hat[rank:], v_hat[rank:]
        w0, *_ = np.linalg.lstsq(b2, v2, rcond=None)
        if np.linalg.norm(b2 @ w0 - v2) > 1e-8 * scale:
            raise RankDeficient("basis is not total for this configuration")
        # remaining freedom: w = w0 + N z with B2 N = 0
        _, sb, vbt = np.linalg.svd(b2, full_matrices=True)
        rb = int(np.sum(sb > max(b2.shape) * np.finfo(float).eps * (sb[0] if sb.size else 0.0)))
        null = vbt[rb:].T
    else:
        w0 = np.zeros(3)
        null = np.eye(3)

    s_inv = 1.0 / s[:rank]
    a1 = s_inv[:, None] * (b_hat[:rank] @ null)
    rhs = s_inv * (v_hat[:rank] - b_hat[:rank] @ w0)
    if null.shape[1]:
        z, *_ = np.linalg.lstsq(a1, rhs, rcond=None)
        w = w0 + null @ z
    else:
        w = w0
    y_hat = s_inv * (v_hat[:rank] - b_hat[:rank] @ w)
    y = vt[:rank].T @ y_hat
    if triangular:
        c = solve_triangular(r_f, y, lower=False)
    else:
        c = np.linalg.lstsq(r_f, y, rcond=None)[0]
    p = u[:, :rank] @ (s_inv * y_hat)
    return LiftResult(p=p, w=w, c=c, norm_sq=float(y @ y))


def lift_eval(lift: LiftResult, basis: Basis, theta):
    """Evaluate the lifted field vtilde(theta) = sum c_n f_n + sum w_j b_j."""
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
    vals = basis.eval_functions(theta_arr) @ lift.c + kernel_basis(theta_arr) @ lift.w
    return vals if np.ndim(theta) else float(vals[0])


def lift_eval_derivative(lift: LiftResult, basis: Basis, theta):
    """Evaluate vtilde'(theta) using the basis and kernel derivative triples."""
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
    vals = basis.eval_functions_derivative(theta_arr) @ lift.c + kernel_basis_derivative(theta_arr) @ lift.w
    return vals if np.ndim(theta) else float(vals[0])


def wp_inner(config, v1, v2, basis: Basis | None = None) -> float:
    """WP(Q) inner product v1^T L_F v2 by polarization of minimal-lift norms."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if basis is None:
        basis = GreensBasis(config)
    plus = minimal_lift(config, v1 + v2, basis).norm_sq
    minus = minimal_lift(config, v1 - v2, basis).norm_sq
    return 0.25 * (plus - minus)


def norm_particle_gradient(config, lift: LiftResult, basis: Basis | None = None) -> np.ndarray:
    """Gradient of norm_sq in the particle positions: -2 [p o vtilde'(q)].

    The general-basis bracket lambda(F') G_F^{-1} lambda_F^T p + B' w equals
    lambda(F') c + B' w, the derivative of the lift at the nodes, because
    G_F^{-1} lambda_F^T p = c for the minimal lift.
    """
    q = validate_config(config)
    if basis is None:
        basis = GreensBasis(q)
    vprime = basis.lambda_prime_matrix(q) @ lift.c + kernel_basis_derivative(q) @ lift.w
    return -2.0 * lift.p * vprime


def metric_matrix(config, basis: Basis | None = None) -> np.ndarray:
    """Dense M x M matrix of v -> p = L_F v (symmetric PSD, rank <= M - 3).

    Used by the geodesic path metric; same factorization as minimal_lift,
    applied to the identity.
    """
    return SliceFactor(config, basis).momenta_matrix()
