"""Conformal welding: zipper forward/backward, shape generators, Moebius action."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import cdist

from wpg.welding import (
    BadParameter,
    Crowded,
    SelfIntersecting,
    Shape,
    WeldingMap,
    compute_weld,
    interpolate_weld,
    invert_weld,
    make_shape,
    moebius_boundary,
    particle_labels,
    reparameterize_weld,
    weld_particles,
)


def wrap_dist(a, b):
    """Sup distance of two angle arrays modulo a common rotation."""
    d = a - b
    d = d - np.mean(d)
    return float(np.max(np.abs(np.angle(np.exp(1j * d)))))


# -- Shape validation ---------------------------------------------------------


def test_shape_rejects_self_intersection():
    # 61 samples: the lobes cross between samples (transversal crossing)
    t = np.linspace(0, 2 * np.pi, 61, endpoint=False)
    with pytest.raises(SelfIntersecting):
        Shape(boundary=np.sin(2 * t) + 1j * np.sin(t))
    # 64 samples: the crossing falls exactly on a shared sample point
    t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    with pytest.raises(SelfIntersecting):
        Shape(boundary=np.sin(2 * t) + 1j * np.sin(t))


def test_shape_accepts_collinear_edges():
    # long straight stretches produce parallel segment pairs whose crossing
    # test denominators are pure roundoff; they must not count as crossings
    sq = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j])
    dense = np.concatenate(
        [a + (b - a) * np.linspace(0, 1, 40, endpoint=False)
         for a, b in zip(sq, np.roll(sq, -1))]
    )
    shape = Shape(boundary=dense)
    assert shape.boundary.size == 160


def test_shape_normalizes_orientation_and_closure():
    t = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    circle = np.exp(-1j * t)  # negatively oriented
    s = Shape(boundary=circle)
    x, y = s.boundary.real, s.boundary.imag
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    assert area > 0
    closed = np.append(np.exp(1j * t), 1.0 + 0j)  # explicit closing point
    assert Shape(boundary=closed).boundary.size == 32
    with pytest.raises(BadParameter):
        Shape(boundary=np.exp(1j * t[:5]))


def test_make_shape_parameter_validation(tmp_path):
    with pytest.raises(BadParameter):
        make_shape("ellipse", n=32, r=2.0)
    with pytest.raises(BadParameter):
        make_shape("ellipse", r=0.5)
    with pytest.raises(BadParameter):
        make_shape("rounded_triangle", alpha=0.8)
    with pytest.raises(BadParameter):
        make_shape("from_file")
    f = tmp_path / "blob.csv"
    t = np.linspace(0, 2 * np.pi, 128, endpoint=False)
    b = (1 + 0.1 * np.cos(3 * t)) * np.exp(1j * t)
    f.write_text("x,y\n" + "\n".join(f"{z.real},{z.imag}" for z in b))
    shape = make_shape(str(f))
    assert shape.boundary.size == 128
    bad = tmp_path / "bad.csv"
    bad.write_text("u,v\n0,0\n1,1\n")
    with pytest.raises(BadParameter):
        make_shape(str(bad))


def test_rounded_triangle_family():
    sharp = make_shape("rounded_triangle", n=512, alpha=1.0).boundary
    round3 = make_shape("rounded_triangle", n=512, alpha=3.0).boundary

    def turn_clusters(z, thresh=0.3):
        d = np.diff(np.concatenate([z, z[:2]]))
        turns = np.abs(np.angle(d[1:] / d[:-1]))
        hot = np.where(turns > thresh)[0]
        if hot.size == 0:
            return 0, turns.max()
        clusters = int(np.sum(np.diff(hot) > 3)) + 1
        if hot[0] + z.size - hot[-1] <= 3:  # wrap-around cluster
            clusters -= 1
        return max(clusters, 1), turns.max()

    # alpha = 1 keeps exactly three sharp vertices, alpha = 3 none
    n_sharp, t_sharp = turn_clusters(sharp)
    n_round, t_round = turn_clusters(round3)
    assert n_sharp == 3 and t_sharp > 1.5
    assert n_round == 0 and t_round < 0.2
    # three-fold symmetry, as sample sets
    rot = sharp * np.exp(2j * np.pi / 3)
    pts = np.c_[rot.real, rot.imag]
    ref = np.c_[sharp.real, sharp.imag]
    assert cdist(pts, ref).min(axis=1).max() < 0.05


# -- WeldingMap construction and evaluation -----------------------------------


def test_welding_map_validates_monotonicity():
    th = np.array([0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        WeldingMap(theta=th, phi=np.array([0.0, 2.0, 1.5]))
    with pytest.raises(ValueError):
        WeldingMap(theta=np.array([0.0, 2.0, 1.0]), phi=th)


def test_welding_map_degree_one_and_inverse():
    weld = compute_weld(make_shape("ellipse", n=256, r=1.5))
    grid = np.linspace(0, 2 * np.pi, 97, endpoint=False)
    phi = weld(grid)
    assert np.all(np.diff(phi) > 0)
    assert np.allclose(weld(grid + 2 * np.pi), phi + 2 * np.pi, atol=1e-10)
    assert np.allclose(weld.inverse(weld.phi), weld.theta, atol=1e-10)
    assert np.max(np.abs(weld.inverse(phi) - grid)) < 1e-5
    assert np.allclose(interpolate_weld(weld, grid), phi)
    with pytest.raises(ValueError):
        interpolate_weld(weld, grid[::-1])


def test_circle_welds_to_identity():
    weld = compute_weld(make_shape("ellipse", n=512, r=1.0))
    grid = np.linspace(0, 2 * np.pi, 1024, endpoint=False)
    assert wrap_dist(weld(grid), grid) < 1e-2


def test_weld_roundtrip_recovers_the_weld():
    # weld -> shape -> weld: the recovered weld agrees with the original up
    # to the rigid rotation ambiguity of the reconstruction
    w1 = compute_weld(make_shape("ellipse", n=256, r=1.5))
    recon = invert_weld(w1, n=256)
    w2 = compute_weld(recon)
    grid = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    assert wrap_dist(w2(grid), w1(grid)) < 5e-2


def test_crowding_warning_on_thin_ellipse():
    with pytest.warns(Crowded):
        weld = compute_weld(make_shape("ellipse", n=128, r=8.0))
    assert weld.derivative_ratio() > 1e12


def test_extreme_crowding_fails_loudly():
    # beyond the representable range the samples collapse below double
    # precision and the weld is rejected rather than silently degraded
    with pytest.raises(ValueError):
        compute_weld(make_shape("ellipse", n=128, r=12.0))


# -- Moebius boundary action ---------------------------------------------------


def test_moebius_boundary_rotation_case():
    t = np.linspace(0, 2 * np.pi, 50, endpoint=False)
    out = moebius_boundary(t, 0.0, 0.9)
    assert np.allclose(out, t + 0.9, atol=1e-12)


def test_moebius_boundary_inverse_composition():
    rng = np.random.default_rng(0)
    t = np.sort(rng.uniform(0, 2 * np.pi, 40))
    a, rot = 0.35 - 0.2j, 1.1
    fwd = moebius_boundary(t, a, rot)
    back = moebius_boundary(fwd - rot, -a, 0.0)
    assert wrap_dist(back, t) < 1e-10


@given(
    st.floats(0.0, 0.9),
    st.floats(0.0, 2 * np.pi),
    st.floats(0.0, 2 * np.pi),
    st.integers(0, 2**31 - 1),
)
@settings(max_examples=60, deadline=None)
def test_moebius_boundary_is_monotone(rho, arg, rot, seed):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0, 2 * np.pi, 25))
    if np.min(np.diff(t)) < 1e-9:
        return
    out = moebius_boundary(t, rho * np.exp(1j * arg), rot)
    assert np.all(np.diff(out) > 0)
    assert out[-1] - out[0] < 2 * np.pi


def test_reparameterize_matches_boundary_action():
    weld = compute_weld(make_shape("ellipse", n=256, r=1.5))
    a, rot = 0.25 + 0.1j, 0.8
    rep = reparameterize_weld(weld, a, rot)
    grid = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    expected = moebius_boundary(weld(grid), a, rot)
    assert wrap_dist(rep(grid), expected) < 1e-6
    with pytest.raises(BadParameter):
        reparameterize_weld(weld, 1.2 + 0j)


# -- particle placement --------------------------------------------------------


def test_particle_labels_properties():
    weld = compute_weld(make_shape("ellipse", n=256, r=2.0))
    x = particle_labels([weld, None], per_set=25)
    assert np.all(np.diff(x) > 0)
    assert x[-1] - x[0] < 2 * np.pi
    gaps = np.diff(np.append(x, x[0] + 2 * np.pi))
    assert gaps.min() > 0.01 * (2 * np.pi / x.size) * 0.99
    assert 25 <= x.size <= 75
    # identity-only families reduce to the uniform grid
    assert np.allclose(particle_labels([None], per_set=16),
                       2 * np.pi * np.arange(16) / 16)


def test_weld_particles_endpoint_values():
    weld = compute_weld(make_shape("ellipse", n=256, r=2.0))
    x, q0, qT1 = weld_particles(weld, None, per_set=12)
    assert np.allclose(q0, weld(x))
    assert np.allclose(qT1, x)
    assert np.all(np.diff(q0) > 0)
