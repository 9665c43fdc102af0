"""Time discretization: quadrature nodes/weights on (0, 1), the T x T
integration matrix Z, and the symmetric velocity-to-particle map

    Q = (Q^0 + Q^{T+1})/2 + V Z,

the average of forward and backward integrations of the velocity grid from
the two endpoints. Endpoints are indexed 0 and T+1 and carry no velocity
columns.

Two node families are provided. ``piecewise_linear`` uses cell midpoints
s_t = (2t - 1)/(2T) with uniform weights 1/T, the unique choice under which
Z from the sign pattern c_{r,t} integrates a constant-velocity flow to
q^t = q0 + s^t (qT1 - q0) exactly. ``gauss_lobatto`` uses the interior
Legendre-Gauss-Lobatto nodes (roots of P'_{T+1}) with interpolatory weights,
and Z built by integrating the Lagrange cardinal polynomials symmetrically:
Z_{r,t} = (int_0^{s_t} l_r - int_{s_t}^1 l_r)/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import roots_jacobi


class InvalidT(ValueError):
    """Fewer than 2 interior time nodes requested."""


class OrderingViolated(RuntimeError):
    """A reconstructed particle column lost strict cyclic ordering."""


@dataclass
class QuadratureScheme:
    kind: str
    T: int
    s: np.ndarray
    h: np.ndarray
    Z: np.ndarray


def _piecewise_linear(T: int) -> QuadratureScheme:
    s = (2.0 * np.arange(1, T + 1) - 1.0) / (2.0 * T)
    h = np.full(T, 1.0 / T)
    r = np.arange(T)
    c = np.sign(r[None, :] - r[:, None])  # +1 for r < t, -1 for r > t, 0 diag
    z = 0.5 * c * h[:, None]
    return QuadratureScheme(kind="piecewise_linear", T=T, s=s, h=h, Z=z)


def _gauss_lobatto(T: int) -> QuadratureScheme:
    # interior LGL nodes: roots of P'_{T+1}, i.e. of the Jacobi poly P_T^(1,1)
    x, _ = roots_jacobi(T, 1.0, 1.0)
    s = 0.5 * (x + 1.0)

    # interpolatory weights for int_0^1: solve sum_t P_k(x_t) h_t = delta_k0
    vand = npleg.legvander(x, T - 1).T
    h = np.linalg.solve(vand, np.eye(T)[:, 0])

    # cardinal polynomials in the Legendre basis: vand^T coeffs = I, so
    # column r of coeffs holds the Legendre coefficients of l_r
    coeffs = np.linalg.solve(vand.T, np.eye(T))

    # partial integrals F_k(x) = int_{-1}^x P_k = (P_{k+1} - P_{k-1})/(2k+1)
    partial = np.empty((T, T))
    partial[0] = x + 1.0
    pk = npleg.legvander(x, T).T  # rows: P_0..P_T at the nodes
    for k in range(1, T):
        partial[k] = (pk[k + 1] - pk[k - 1]) / (2.0 * k + 1.0)
    # int_0^{s_t} l_r ds = (1/2) sum_k coeffs[k,r] F_k(x_t); then symmetrize
    left = 0.5 * coeffs.T @ partial
    z = left - 0.5 * h[:, None]
    return QuadratureScheme(kind="gauss_lobatto", T=T, s=s, h=h, Z=z)


def build_quadrature(kind: str, T: int) -> QuadratureScheme:
    """Quadrature nodes s in (0,1), weights h summing to 1, and matrix Z."""
    if T < 2:
        raise InvalidT(f"need at least 2 interior time nodes, got {T}")
    if kind in ("piecewise_linear", "pl"):
        return _piecewise_linear(T)
    if kind in ("gauss_lobatto", "gl"):
        return _gauss_lobatto(T)
    raise ValueError(f"unknown quadrature kind {kind!r}")


def particles_from_velocities(q0, qT1, V, scheme: QuadratureScheme) -> np.ndarray:
    """Q = (q0 + qT1)/2 + V Z, with strict cyclic ordering checked per column."""
    q0 = np.asarray(q0, dtype=float)
    qT1 = np.asarray(qT1, dtype=float)
    V = np.asarray(V, dtype=float)
    if V.shape != (q0.size, scheme.T):
        raise ValueError("velocity grid shape inconsistent with endpoints/scheme")
    Q = 0.5 * (q0 + qT1)[:, None] + V @ scheme.Z
    if Q.shape[0] > 1:
        gaps = np.diff(Q, axis=0)
        widths = Q[-1] - Q[0]
        if np.any(gaps <= 0.0) or np.any(widths >= 2.0 * np.pi):
            t_bad = int(np.argmax(np.any(gaps <= 0.0, axis=0) | (widths >= 2.0 * np.pi)))
            raise OrderingViolated(f"particles crossed at time node {t_bad}")
    return Q


def endpoint_residual(q0, qT1, V, scheme: QuadratureScheme) -> np.ndarray:
    """Constraint residual qT1 - q0 - sum_t h^t v^t (zero on the manifold)."""
    q0 = np.asarray(q0, dtype=float)
    qT1 = np.asarray(qT1, dtype=float)
    V = np.asarray(V, dtype=float)
    return qT1 - q0 - V @ scheme.h
