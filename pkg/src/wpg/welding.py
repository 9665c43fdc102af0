"""Conformal welding via the geodesic variant of the zipper algorithm.

compute_weld maps a Jordan curve through samples z_0..z_{n-1} to its welding
map: the algorithm zips the curve onto the real axis one sample at a time
using elementary slit maps (a real Moebius transform composed with a
branch-corrected square root), closes the remaining arc with a final fold,
and reads the two boundary preimages of every sample off the two sides of
the axis. The interior side is normalized by sending the shape centroid to 0
with positive derivative, the exterior side fixes infinity with real
derivative. invert_weld runs the construction backwards (zip-up), gluing the
two half-planes along the prescribed boundary correspondence to recover a
curve in the same translation/scale class.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator


class SelfIntersecting(ValueError):
    """Boundary polyline crosses itself."""


class BadParameter(ValueError):
    """Shape parameter outside its documented range."""


class Crowded(UserWarning):
    """Welding-map derivative ratio exceeds 1e12; downstream accuracy suffers."""


_CROWDING_LIMIT = 1e12


@dataclass
class Shape:
    """Positively oriented simple closed polyline sampling a Jordan curve."""

    boundary: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.boundary)
        if z.ndim == 2 and z.shape[1] == 2:
            z = z[:, 0] + 1j * z[:, 1]
        z = z.astype(complex)
        if z.size >= 2 and abs(z[0] - z[-1]) < 1e-12 * (np.abs(z).max() + 1.0):
            z = z[:-1]  # drop an explicitly repeated closing point
        if z.size < 8:
            raise BadParameter("boundary needs at least 8 points")
        if _signed_area(z) < 0:
            z = z[::-1]
        if _has_duplicate_points(z):
            raise SelfIntersecting("boundary revisits a sample point")
        if _self_intersects(z):
            raise SelfIntersecting("boundary polyline crosses itself")
        self.boundary = z

    @property
    def centroid(self) -> complex:
        return complex(np.mean(self.boundary))

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.boundary - self.centroid)))


def _signed_area(z) -> float:
    x, y = z.real, z.imag
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _has_duplicate_points(z) -> bool:
    """Exactly repeated samples (e.g. a curve through the same point twice)
    defeat the segment-crossing test, whose strict interior check excludes
    intersections that fall on a shared vertex."""
    scale = np.abs(z).max() + 1.0
    d = np.abs(z[:, None] - z[None, :])
    np.fill_diagonal(d, np.inf)
    return bool(np.any(d < 1e-12 * scale))


def _self_intersects(z) -> bool:
    """Pairwise segment-crossing test over the closed polyline (vectorized)."""
    n = z.size
    a = z
    b = np.roll(z, -1)
    d = b - a
    # cross(p, q) for complex: Im(conj(p) q)
    i_idx, j_idx = np.triu_indices(n, k=2)
    keep = ~((i_idx == 0) & (j_idx == n - 1))  # first and last segments touch
    i_idx, j_idx = i_idx[keep], j_idx[keep]
    ai, di = a[i_idx], d[i_idx]
    aj, dj = a[j_idx], d[j_idx]
    denom = np.imag(np.conj(di) * dj)
    rel = aj - ai
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.imag(np.conj(rel) * dj) / denom
        s = np.imag(np.conj(rel) * di) / denom
    # relative threshold: |denom| = |di||dj| sin(angle); parallel segments
    # (collinear samples on a straight stretch) give roundoff-level denom
    hit = (np.abs(denom) > 1e-9 * np.abs(di) * np.abs(dj)) & \
        (t > 0) & (t < 1) & (s > 0) & (s < 1)
    return bool(np.any(hit))


@dataclass
class WeldingMap:
    """Sampled circle homeomorphism phi(theta): strictly increasing pairs with
    phi(theta + 2pi) = phi(theta) + 2pi."""

    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        if self.theta.shape != self.phi.shape or self.theta.ndim != 1:
            raise ValueError("theta/phi must be 1-d arrays of equal length")
        if np.any(np.diff(self.theta) <= 0) or self.theta[-1] - self.theta[0] >= 2 * np.pi:
            raise ValueError("theta samples must be strictly increasing within one period")
        if np.any(np.diff(self.phi) <= 0) or self.phi[-1] - self.phi[0] >= 2 * np.pi:
            raise ValueError("phi samples must be strictly increasing within one period")
        self._interp = _periodic_pchip(self.theta, self.phi)
        self._inverse = _periodic_pchip(self.phi, self.theta)

    def __call__(self, theta):
        return self._interp(theta)

    def inverse(self, phi):
        return self._inverse(phi)

    def derivative_ratio(self) -> float:
        """max/min of the discrete derivative: the crowding diagnostic."""
        dphi = np.diff(np.append(self.phi, self.phi[0] + 2 * np.pi))
        dth = np.diff(np.append(self.theta, self.theta[0] + 2 * np.pi))
        slopes = dphi / dth
        return float(slopes.max() / slopes.min())


def _periodic_pchip(x, y):
    """Monotone periodic interpolant of degree-one circle-map samples."""
    pad = x.size // 2 if x.size >= 4 else x.size
    x_ext = np.concatenate([x[-pad:] - 2 * np.pi, x, x[:pad] + 2 * np.pi])
    y_ext = np.concatenate([y[-pad:] - 2 * np.pi, y, y[:pad] + 2 * np.pi])
    base = PchipInterpolator(x_ext, y_ext, extrapolate=True)
    x0, y0 = x[0], y[0]

    def evaluate(t):
        t = np.asarray(t, dtype=float)
        k = np.floor((t - x0) / (2 * np.pi))
        out = base(t - 2 * np.pi * k) + 2 * np.pi * k
        return out if out.ndim else float(out)

    return evaluate


def interpolate_weld(weld: WeldingMap, theta_grid):
    """phi values on an arbitrary strictly ordered grid (monotone cubic)."""
    grid = np.asarray(theta_grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("theta_grid must be strictly increasing")
    return weld(grid)


# ---------------------------------------------------------------------------
# forward zipper


def _sqrt_upper(w):
    """Square root with nonnegative imaginary part (interior branch)."""
    r = np.sqrt(w.astype(complex))
    return np.where(r.imag >= 0, r, -r)


def _slit_boundary(x, k, h):
    """Elementary map on already-zipped boundary values (real, signed)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(np.isinf(x), -np.inf if k == 0 else -1.0 / k, x / (1.0 - k * x))
    u = np.where(np.isinf(x) & (k == 0), x, u)
    return np.sign(u) * np.sqrt(u * u + h * h)


def _slit_interior(z, k, h):
    """Elementary map on interior points (upper-branch square root)."""
    w = z / (1.0 - k * z)
    return _sqrt_upper(w * w + h * h)


def compute_weld(shape: Shape, _return_aux: bool = False) -> WeldingMap:
    """Welding map of a shape by the geodesic zipper.

    Returns the circle map theta -> phi sending the exterior-side boundary
    preimage of each boundary sample to its interior-side preimage under the
    normalized Riemann maps of the two complementary domains. The exterior
    chart is pinned (infinity fixed, real derivative), so the residual disk
    normalization of the interior chart acts on the phi values.
    """
    if not isinstance(shape, Shape):
        shape = Shape(np.asarray(shape))
    # normalize away translation and scale up front: welds are invariant, and
    # working in a canonical frame makes the output reproducible to roundoff
    z = (shape.boundary - shape.centroid) / shape.scale
    n = z.size

    # initial map: i sqrt((z - z1)/(z - z0)) opens the arc z0 -> z1; z0 -> inf.
    # principal branch: the cut falls on the segment image (negative reals)
    pending = 1j * np.sqrt((z[2:] - z[1]) / (z[2:] - z[0]))
    # probes: the centroid (origin after normalization) for the interior
    # normalization, and the sphere infinity for the exterior one. Their
    # chart derivatives are propagated analytically alongside (the infinity
    # derivative lives in the 1/z coordinate).
    r0 = z[1] / z[0]
    probes = np.array([1j * np.sqrt(r0), 1j])
    derivs = np.array(
        [1j * (z[1] - z[0]) / (2.0 * z[0] ** 2 * np.sqrt(r0)), 1j * (z[0] - z[1]) / 2.0]
    )
    tip_owner = 1  # sample index currently sitting at the origin
    v0 = np.inf  # image of z0 (single tracked value, starts at the sphere infinity)
    done_vals = []  # per split sample: (index, value_a, value_b)
    done_arr = np.empty((0, 2))

    for j in range(2, n):
        zeta = pending[0]
        pending = pending[1:]
        if not (np.isfinite(zeta) and zeta.imag > 0):
            raise SelfIntersecting(
                f"sample {j} left the computational half-plane; the discrete "
                "curve crosses its own zipped image (refine the sampling)"
            )
        k = zeta.real / abs(zeta) ** 2
        h = abs(zeta) ** 2 / zeta.imag
        # previous tip splits onto the two sides of the new slit base
        done_vals.append(tip_owner)
        done_arr = np.vstack([done_arr, [-h, h]])
        if done_arr.size > 2:
            done_arr[:-1] = _slit_boundary(done_arr[:-1], k, h)
        v0 = float(_slit_boundary(np.array([v0]), k, h)[0])
        if pending.size:
            pending = _slit_interior(pending, k, h)
        w_mid = probes / (1.0 - k * probes)
        new_probes = _sqrt_upper(w_mid * w_mid + h * h)
        derivs = derivs * w_mid / ((1.0 - k * probes) ** 2 * new_probes)
        probes = new_probes
        tip_owner = j

    # closing: fold the remaining arc tip(0) -> z0(v0) and square
    p = v0
    with np.errstate(divide="ignore", invalid="ignore"):
        u_done = done_arr / (1.0 - done_arr / p)
    u_probes = probes / (1.0 - probes / p)
    derivs = derivs / (1.0 - probes / p) ** 2
    fin_probes = u_probes**2
    derivs = derivs * 2.0 * u_probes
    xi_c, xi_inf = fin_probes
    d_c, d_inf = derivs
    # the closing fold splits the half-plane along the positive imaginary
    # axis; the interior probe tells us which of the two quadrants (hence
    # which sign of the real boundary coordinate) is the curve interior
    side_sign = 1.0 if u_probes[0].real > 0 else -1.0
    if u_probes[1].real * side_sign >= 0:
        raise SelfIntersecting(
            "interior and exterior probes landed on the same side of the "
            "closing fold; the discrete curve is too coarse or crosses itself"
        )
    side_pos = side_sign * u_done > 0
    if not np.all(side_pos.sum(axis=1) == 1):
        raise SelfIntersecting(
            "zipped boundary copies do not separate into interior/exterior "
            "sides; the discrete curve is too coarse or crosses itself"
        )
    interior_vals = np.where(side_pos[:, 0], u_done[:, 0], u_done[:, 1]) ** 2
    exterior_vals = np.where(side_pos[:, 0], u_done[:, 1], u_done[:, 0]) ** 2

    # interior normalization: centroid -> 0, positive derivative there
    def cayley_in(vals):
        return (vals - xi_c) / (vals - np.conj(xi_c))

    rot_in = np.conj(_phase(d_c / (xi_c - np.conj(xi_c))))
    theta_split = np.angle(rot_in * cayley_in(interior_vals))
    theta_0 = float(np.angle(rot_in))  # z0 sits at the final infinity
    theta_tip = float(np.angle(rot_in * cayley_in(0.0)))  # z_{n-1} at the origin

    # exterior normalization: infinity fixed with real derivative. The
    # composite boundary map behaves like z/c near infinity with
    # 1/c = (xi_inf - conj(xi_inf))/d_inf (d_inf is the 1/z-chart derivative).
    def cayley_ex(vals):
        return (vals - np.conj(xi_inf)) / (vals - xi_inf)

    rot_ex = np.conj(_phase((xi_inf - np.conj(xi_inf)) / d_inf))
    phi_split = np.angle(rot_ex * cayley_ex(exterior_vals))
    phi_0 = float(np.angle(rot_ex))
    phi_tip = float(np.angle(rot_ex * cayley_ex(0.0)))

    order = np.argsort(np.array(done_vals))
    idx = np.concatenate([[0], np.array(done_vals)[order], [n - 1]])
    if not np.array_equal(idx, np.arange(n)):
        raise SelfIntersecting("zipper lost track of the sample order")
    int_ang = np.concatenate([[theta_0], theta_split[order], [theta_tip]])
    ext_ang = np.concatenate([[phi_0], phi_split[order], [phi_tip]])

    int_ang = _monotone_cyclic(int_ang, "interior angles")
    ext_ang = _monotone_cyclic(ext_ang, "exterior angles")
    if ext_ang[-1] - ext_ang[0] < 0:  # exterior chart reverses orientation
        ext_ang = -ext_ang
        ext_ang = _monotone_cyclic(ext_ang, "exterior angles")

    weld = _normalize_weld(ext_ang, int_ang)
    ratio = weld.derivative_ratio()
    if ratio > _CROWDING_LIMIT:
        warnings.warn(
            f"welding map is crowded: derivative ratio {ratio:.3e}", Crowded,
            stacklevel=2,
        )
    return weld


def _phase(w):
    a = abs(w)
    if a == 0.0 or not np.isfinite(a):
        raise ValueError("degenerate normalization probe")
    return w / a


def _monotone_cyclic(angles, label):
    """Rebuild a strictly increasing angle sequence from wrapped samples.

    Roundoff can wrap a crowded gap of +0 to just under 2pi; such gaps are
    clipped back to zero and separated again by a graded 1e-13 nudge so the
    result stays strictly monotone.
    """

    def clean(g):
        return np.where(g > 2.0 * np.pi - 1e-6, 0.0, g)

    gaps = clean(np.mod(np.diff(angles), 2.0 * np.pi))
    if float(np.sum(gaps)) > 2.0 * np.pi + 1e-9:
        # sequence runs the other way around the circle
        gaps = clean(np.mod(-np.diff(angles), 2.0 * np.pi))
        if np.sum(gaps) > 2.0 * np.pi + 1e-9:
            raise SelfIntersecting(f"{label} are not cyclically monotone")
        gaps = -gaps
    out = angles[0] + np.concatenate([[0.0], np.cumsum(gaps)])
    flat = np.abs(np.diff(out)) < 1e-300
    if np.any(flat):
        sign = 1.0 if out[-1] >= out[0] else -1.0
        out = out + sign * 1e-13 * np.arange(out.size)
    return out


def _normalize_weld(theta, phi) -> WeldingMap:
    """Rotate sample start into [0, 2pi) and orient both sequences upward."""
    if theta[-1] < theta[0]:
        theta, phi = theta[::-1], phi[::-1]
    if phi[-1] < phi[0]:
        raise SelfIntersecting("weld samples are orientation-inconsistent")
    shift = 2.0 * np.pi * np.floor(theta[0] / (2.0 * np.pi))
    theta = theta - shift
    shift = 2.0 * np.pi * np.floor(phi[0] / (2.0 * np.pi))
    phi = phi - shift
    return WeldingMap(theta=theta, phi=phi)


# ---------------------------------------------------------------------------
# inverse welding (zip-up)


def invert_weld(weld: WeldingMap, n: int = 512) -> Shape:
    """Recover a Jordan curve whose welding map reproduces the input.

    Glues the upper (interior) and lower (exterior) half-planes along the
    sampled correspondence theta_j ~ phi_j by reversing the zipper: an
    initial square-root glue, one Moebius-plus-fold step per sample, and a
    terminal squaring that closes the curve.
    """
    if n < 8:
        raise BadParameter("need at least 8 output samples")
    # sample uniformly on the interior-chart (range) side and pull the
    # exterior angles back through the weld
    igrid = weld.phi[0] + 2.0 * np.pi * np.arange(n) / n
    ext = weld.inverse(igrid)

    # half-plane coordinates, sample 0 at infinity on both sides
    a = -1.0 / np.tan((igrid[1:] - igrid[0]) / 2.0)
    b = -1.0 / np.tan((ext[1:] - ext[0]) / 2.0)

    # initial glue: interior -> first quadrant, exterior -> second quadrant,
    # seam along the positive imaginary axis; pair 1 becomes the tip at 0
    s_in = a[1] - a[0]
    s_ex = b[1] - b[0]
    u = np.sign(a - a[0]) * np.sqrt(np.abs(a - a[0]) / s_in)
    w = -np.sign(b - b[0]) * np.sqrt(np.abs(b - b[0]) / s_ex)
    if np.any(u[1:] <= 0) or np.any(w[1:] >= 0):
        raise ValueError("weld samples are not cyclically monotone")
    probe_in = np.sqrt((1j - a[0]) / s_in)  # first quadrant
    probe_ex = -np.sqrt((-1j - b[0]) / s_ex)  # second quadrant

    seam = np.array([0j])  # glued pairs, pair 1 first
    for j in range(1, n - 1):
        uj, wj = u[j], w[j]
        k = (uj + wj) / (2.0 * uj * wj)
        c = uj / (1.0 - k * uj)
        if not np.isfinite(c) or c <= 0:
            raise ValueError(f"zip-up step {j + 1} degenerated (crowded weld?)")
        seam = _fold_interior(seam / (1.0 - k * seam), c)
        probe_in = _fold_interior(probe_in / (1.0 - k * probe_in), c)
        probe_ex = _fold_interior(probe_ex / (1.0 - k * probe_ex), c)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = _fold_boundary(u / (1.0 - k * u), c)
            w = _fold_boundary(w / (1.0 - k * w), c)
        seam = np.append(seam, 0j)

    # terminal closure: square glues the leftover tails x ~ -x
    curve = seam.astype(complex) ** 2
    e_in, e_ex = probe_in**2, probe_ex**2
    curve = np.concatenate([curve, [np.inf]])  # pair 0 sits at infinity

    # bound the curve by sending an exterior point to infinity
    with np.errstate(divide="ignore", invalid="ignore"):
        curve = 1.0 / (curve - e_ex)
    curve[~np.isfinite(curve)] = 0.0
    e_in = 1.0 / (e_in - e_ex)

    # normalize: centroid to 0, mean radius 1, positive orientation, and
    # restore the sample order 1..n-1, 0 -> 0..n-1
    curve = np.roll(curve, 1)
    ctr = np.mean(curve)
    curve = curve - ctr
    curve = curve / np.mean(np.abs(curve))
    if _signed_area(curve) < 0:
        curve = np.conj(curve)
    shape = Shape(boundary=curve)

    # rotate into the pose whose canonical weld matches the input: the
    # forward normalization is rotation-covariant (theta, phi both shift by
    # the pose angle), so one forward weld pins the mismatch
    check = compute_weld(shape)
    beta = np.angle(np.mean(np.exp(1j * (check.phi - igrid))))
    return Shape(boundary=shape.boundary * np.exp(-1j * beta))


def _fold_interior(z, c):
    return _sqrt_upper(z * z - c * c)


def _fold_boundary(x, c):
    val = x * x - c * c
    out = np.sign(x) * np.sqrt(np.maximum(val, 0.0))
    bad = val < 0
    if np.any(bad):
        # a boundary point slid inside the fold window; treat as glued
        out[bad] = 0.0
    return out


# ---------------------------------------------------------------------------
# shapes


def make_shape(kind: str, n: int = 512, r: float = None, alpha: float = None) -> Shape:
    """Parametric boundary samples: ellipse(r), rounded_triangle(alpha), or
    a CSV file path with header x,y."""
    if n < 64:
        raise BadParameter("need n >= 64 boundary samples")
    if kind == "ellipse":
        if r is None or r < 1.0:
            raise BadParameter("ellipse aspect ratio must satisfy r >= 1")
        t = 2.0 * np.pi * np.arange(n) / n
        return Shape(boundary=r * np.cos(t) + 1j * np.sin(t))
    if kind == "rounded_triangle":
        if alpha is None or alpha < 1.0:
            raise BadParameter("corner exponent must satisfy alpha >= 1")
        return Shape(boundary=_rounded_triangle(alpha, n))
    if kind == "from_file":
        raise BadParameter("from_file requires a path: pass kind=<path>")
    # treat any other kind as a file path
    data = np.genfromtxt(kind, delimiter=",", names=True)
    try:
        return Shape(boundary=np.asarray(data["x"]) + 1j * np.asarray(data["y"]))
    except (KeyError, ValueError) as exc:
        raise BadParameter(f"cannot read shape file {kind!r}: {exc}") from None


def _rounded_triangle(alpha: float, n: int) -> np.ndarray:
    """Equilateral triangle whose corners follow the power curve
    y = y0 + c |x|^alpha in corner-local coordinates; alpha = 1 is the sharp
    corner, larger alpha is rounder. c and y0 are chosen so the curve meets
    the straight edges with matching slope (C1 blend): the sweep then probes
    only the corner smoothness, not spurious kinks at the blend points."""
    side = 2.0
    verts = side / np.sqrt(3.0) * np.exp(1j * (np.pi / 2 + 2.0 * np.pi * np.arange(3) / 3))
    blend = 0.35 * side  # distance from each corner to the blend points

    # corner-local frame: corner at origin, interior bisector along +y;
    # edges leave at +-30 degrees from the bisector, i.e. along y = sqrt(3)|x|
    xb = blend / 2.0
    coef = np.sqrt(3.0) / (alpha * xb ** (alpha - 1.0))
    y0 = np.sqrt(3.0) * xb * (1.0 - 1.0 / alpha)
    m = max(64, n)
    xs = xb * np.linspace(-1.0, 1.0, m)
    corner_local = xs + 1j * (y0 + coef * np.abs(xs) ** alpha)

    pieces = []
    for i in range(3):
        v = verts[i]
        nxt = verts[(i + 1) % 3]
        prv = verts[(i - 1) % 3]
        bis = -v / abs(v)  # unit vector from corner toward the centroid
        frame = 1j * bis  # local +y axis = inward bisector
        # local x axis oriented so the curve runs from the prv-edge to nxt-edge
        xaxis = (nxt - v) / abs(nxt - v)
        xaxis = xaxis - bis * (xaxis.real * bis.real + xaxis.imag * bis.imag)
        # rebuild from orthogonality: local x = rotate bisector by -90 deg
        xaxis = -1j * bis
        if np.real(np.conj(xaxis) * (nxt - v)) < 0:
            xaxis = -xaxis
        corner_pts = v + corner_local.real * xaxis + corner_local.imag * bis
        edge_start = v + (nxt - v) / abs(nxt - v) * blend
        edge_end = nxt + (v - nxt) / abs(v - nxt) * blend
        edge = edge_start + (edge_end - edge_start) * np.linspace(0.0, 1.0, m)[1:-1]
        pieces.extend([corner_pts, edge])
    dense = np.concatenate(pieces)
    return _resample_arclength(dense, n)


def _resample_arclength(z, n):
    """Uniform-arclength resampling of a closed polyline."""
    closed = np.append(z, z[0])
    seg = np.abs(np.diff(closed))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    targets = total * np.arange(n) / n
    idx = np.searchsorted(s, targets, side="right") - 1
    idx = np.clip(idx, 0, len(seg) - 1)
    frac = (targets - s[idx]) / np.maximum(seg[idx], 1e-300)
    return closed[idx] + frac * (closed[idx + 1] - closed[idx])


# ---------------------------------------------------------------------------
# helpers used by the experiments and particle placement


def moebius_boundary(theta, a: complex, rot: float = 0.0):
    """Boundary action of the disk automorphism z -> e^{i rot}(z-a)/(1-conj(a)z)."""
    theta = np.asarray(theta, dtype=float)
    z = np.exp(1j * theta)
    w = (z - a) / (1.0 - np.conj(a) * z)
    ang = np.angle(w) + rot
    # continuous degree-one representative anchored at the first sample
    gaps = np.mod(np.diff(ang), 2.0 * np.pi)
    return ang.flat[0] + np.concatenate([[0.0], np.cumsum(gaps)]).reshape(theta.shape)


def reparameterize_weld(weld: WeldingMap, a: complex, rot: float = 0.0) -> WeldingMap:
    """Change the interior-chart Moebius normalization of a weld: the range
    angles pass through the boundary action of the disk automorphism
    z -> e^{i rot}(z - a)/(1 - conj(a) z), |a| < 1. The result represents
    the same curve, so its distance to the original vanishes."""
    if abs(a) >= 1.0:
        raise BadParameter("interior Moebius parameter must satisfy |a| < 1")
    m = weld.theta.size
    grid = 2.0 * np.pi * np.arange(m) / m
    phi = moebius_boundary(weld(grid), a, rot)
    shift = 2.0 * np.pi * np.floor(phi[0] / (2.0 * np.pi))
    return WeldingMap(theta=grid, phi=phi - shift)


def particle_labels(welds, per_set: int = 50) -> np.ndarray:
    """Particle labels for a geodesic family: uniform samples of each weld's
    range pulled back to the domain circle, plus uniform domain samples, union.
    `None` entries stand for the identity map.
    """
    grid = 2.0 * np.pi * np.arange(per_set) / per_set
    sets = [grid if w is None else w.inverse(grid) for w in welds]
    sets.append(grid)
    x = np.unique(np.concatenate([np.mod(s, 2.0 * np.pi) for s in sets]))
    # Merge labels closer than ~1% of the mean spacing: the kernel cannot
    # resolve them and they poison the slice factorizations (for nearly
    # identical welds the pulled-back range collapses onto the domain grid).
    tol = 0.01 * (2.0 * np.pi / x.size)
    keep = np.concatenate([[True], np.diff(x) > tol])
    x = x[keep]
    if 2.0 * np.pi - (x[-1] - x[0]) < tol:
        x = x[:-1]
    return x


def weld_particles(weld_a: WeldingMap, weld_b: WeldingMap | None = None,
                   per_set: int = 50):
    """Particle labels for a geodesic between two welds plus endpoint values.

    Returns (labels x, q0 = weld_a(x), qT1 = weld_b(x) or x).
    """
    x = particle_labels([weld_a, weld_b], per_set=per_set)
    q0 = weld_a(x)
    qT1 = weld_b(x) if weld_b is not None else x.copy()
    return x, q0, qT1
