"""Time quadrature schemes and the symmetric velocity-to-particle map."""

import numpy as np
import pytest

from wpg.temporal import (
    InvalidT,
    OrderingViolated,
    build_quadrature,
    endpoint_residual,
    particles_from_velocities,
)


def test_invalid_t_rejected():
    with pytest.raises(InvalidT):
        build_quadrature("pl", 1)
    with pytest.raises(ValueError):
        build_quadrature("simpson", 8)


@pytest.mark.parametrize("kind", ["pl", "gl"])
def test_scheme_structure(kind):
    sch = build_quadrature(kind, 9)
    assert sch.T == 9
    assert np.all((sch.s > 0) & (sch.s < 1))
    assert np.all(np.diff(sch.s) > 0)
    assert np.sum(sch.h) == pytest.approx(1.0, abs=1e-14)
    assert np.all(sch.h > 0)
    # both node families are symmetric about 1/2
    assert np.allclose(sch.s + sch.s[::-1], 1.0, atol=1e-13)
    assert np.allclose(sch.h, sch.h[::-1], atol=1e-13)
    assert sch.Z.shape == (9, 9)


def test_piecewise_linear_nodes_and_antisymmetry():
    sch = build_quadrature("piecewise_linear", 5)
    assert np.allclose(sch.s, (2 * np.arange(1, 6) - 1) / 10.0)
    assert np.allclose(sch.h, 0.2)
    assert np.allclose(sch.Z + sch.Z.T, 0.0)


def test_constant_velocity_reconstructs_linear_path():
    sch = build_quadrature("pl", 16)
    q0 = np.array([0.0, 1.0, 2.5, 4.0])
    qT1 = q0 + 0.7
    V = np.full((4, 16), 0.7)
    Q = particles_from_velocities(q0, qT1, V, sch)
    expected = q0[:, None] + sch.s[None, :] * 0.7
    assert np.allclose(Q, expected, atol=1e-13)
    assert np.allclose(endpoint_residual(q0, qT1, V, sch), 0.0, atol=1e-13)


def test_gauss_lobatto_weight_exactness():
    # interpolatory weights on the interior Lobatto nodes: exact through
    # degree T - 1 (and not beyond; the missing endpoint nodes cost the
    # Gauss-type order of the full rule)
    sch = build_quadrature("gauss_lobatto", 6)
    for k in range(6):
        quad = float(sch.h @ sch.s**k)
        assert quad == pytest.approx(1.0 / (k + 1), abs=1e-13), f"degree {k}"
    assert float(sch.h @ sch.s**6) != pytest.approx(1.0 / 7.0, abs=1e-6)


def test_gauss_lobatto_integrates_polynomial_flows():
    # velocity a polynomial of degree T - 1: interpolation is exact, so the
    # symmetric reconstruction must hit the primitive at every node
    T = 7
    sch = build_quadrature("gl", T)
    coeffs = np.array([0.3, -1.2, 0.5, 2.0, -0.7, 0.1, 0.45])
    prim = np.polynomial.polynomial.polyint(coeffs)

    def q_of_s(s):
        return np.polynomial.polynomial.polyval(s, prim)

    v = np.polynomial.polynomial.polyval(sch.s, coeffs)
    q0 = np.array([q_of_s(0.0), q_of_s(0.0) + 4.0])
    qT1 = np.array([q_of_s(1.0), q_of_s(1.0) + 4.0])
    V = np.vstack([v, v])
    Q = particles_from_velocities(q0, qT1, V, sch)
    assert np.allclose(Q[0], q_of_s(sch.s), atol=1e-12)
    assert np.allclose(Q[1], q_of_s(sch.s) + 4.0, atol=1e-12)


def test_ordering_violation_detected():
    sch = build_quadrature("pl", 8)
    q0 = np.array([0.0, 0.1, 2.0, 4.0])
    qT1 = q0.copy()
    V = np.zeros((4, 8))
    V[0, :4] = 3.0  # particle 0 overtakes particle 1 mid-path
    V[0, 4:] = -3.0
    with pytest.raises(OrderingViolated):
        particles_from_velocities(q0, qT1, V, sch)


def test_shape_mismatch_rejected():
    sch = build_quadrature("pl", 8)
    q0 = np.array([0.0, 1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        particles_from_velocities(q0, q0, np.zeros((4, 7)), sch)
