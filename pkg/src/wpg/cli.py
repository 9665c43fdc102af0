"""Command line surface: weld/unweld shapes, solve geodesics, run experiments.

Outputs are plot-ready CSV tables plus a JSON manifest per geodesic run.
Numeric CSVs are deterministic: identical invocations produce byte-identical
files (fixed iteration order, values printed with repr precision).
"""

from __future__ import annotations

import json
import logging
import os
import sys
import time
import warnings

import click
import numpy as np

from . import __version__
from .geodesic import minimize, transfer_velocity
from .welding import (
    BadParameter,
    Crowded,
    SelfIntersecting,
    Shape,
    WeldingMap,
    compute_weld,
    invert_weld,
    make_shape,
    moebius_boundary,
    particle_labels,
    reparameterize_weld,
    weld_particles,
)

logger = logging.getLogger("wpg.cli")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 3


def _setup_logging():
    level = os.environ.get("WPG_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(name)s %(levelname)s %(message)s",
    )


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path, header, rows):
    """Atomic CSV write: rows are sequences formatted with full precision."""
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, (int, float, np.floating))
                              else str(v) for v in row) + "\n")
    os.replace(tmp, path)


def _write_manifest(path, payload):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    os.replace(tmp, path)


def _read_shape(path) -> Shape:
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.dtype.names is None or not {"x", "y"} <= set(data.dtype.names):
        raise BadParameter(f"{path}: expected CSV with header x,y")
    return Shape(boundary=np.asarray(data["x"]) + 1j * np.asarray(data["y"]))


def _write_shape(path, shape: Shape):
    b = shape.boundary
    _write_csv(path, ["x", "y"], zip(b.real, b.imag))


def _read_weld(path) -> WeldingMap:
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.dtype.names is None or not {"theta", "phi"} <= set(data.dtype.names):
        raise BadParameter(f"{path}: expected CSV with header theta,phi")
    return WeldingMap(theta=np.asarray(data["theta"]), phi=np.asarray(data["phi"]))


def _write_weld(path, weld: WeldingMap):
    _write_csv(path, ["theta", "phi"], zip(weld.theta, weld.phi))


@click.group()
@click.version_option(__version__)
def main():
    """Weil-Petersson geodesics between conformal weldings of planar shapes."""
    _setup_logging()


@main.command("weld")
@click.argument("shape_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_weld_file", type=click.Path(dir_okay=False))
def cmd_weld(shape_file, out_weld_file):
    """Compute the welding map of a shape boundary CSV (header x,y)."""
    try:
        shape = _read_shape(shape_file)
        with warnings.catch_warnings(record=True) as rec:
            warnings.simplefilter("always", Crowded)
            weld = compute_weld(shape)
        _write_weld(out_weld_file, weld)
        click.echo(f"crowding ratio: {weld.derivative_ratio():.6e}")
        crowded = [w for w in rec if issubclass(w.category, Crowded)]
        if crowded:
            click.echo(f"error: {crowded[0].message}", err=True)
            sys.exit(EXIT_INPUT)
    except (SelfIntersecting, BadParameter, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)


@main.command("unweld")
@click.argument("weld_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_shape_file", type=click.Path(dir_okay=False))
@click.option("--n", default=512, show_default=True, help="boundary samples")
def cmd_unweld(weld_file, out_shape_file, n):
    """Recover a curve from a welding map CSV (header theta,phi)."""
    try:
        weld = _read_weld(weld_file)
        shape = invert_weld(weld, n=n)
        _write_shape(out_shape_file, shape)
    except (SelfIntersecting, BadParameter, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)


def _solver_options(fn):
    fn = click.option("--particles", "-M", default=150, show_default=True,
                      help="target particle count (union of per-map samples)")(fn)
    fn = click.option("--time-steps", "-T", default=150, show_default=True)(fn)
    fn = click.option("--scheme", type=click.Choice(["pl", "gl"]), default="pl",
                      show_default=True, help="time quadrature")(fn)
    fn = click.option("--tol-obj", default=1e-8, show_default=True)(fn)
    fn = click.option("--tol-grad", default=1e-6, show_default=True)(fn)
    fn = click.option("--max-iter", default=500, show_default=True)(fn)
    fn = click.option("--out", default=".", show_default=True,
                      type=click.Path(file_okay=False))(fn)
    return fn


def _run_geodesic(weld_a, weld_b, particles, time_steps, scheme, tol_obj,
                  tol_grad, max_iter, V0=None):
    per_set = max(particles // 3, 4)
    labels, q0, qT1 = weld_particles(weld_a, weld_b, per_set=per_set)
    t0 = time.perf_counter()
    res = minimize(
        q0, qT1, scheme=scheme, T=time_steps, tol_obj=tol_obj,
        tol_grad=tol_grad, max_iter=max_iter, V0=V0,
    )
    wall = time.perf_counter() - t0
    return labels, q0, qT1, res, wall


def _emit_run(outdir, labels, q0, qT1, res, wall, command, params):
    os.makedirs(outdir, exist_ok=True)
    state = res.state
    scheme = state.scheme
    tcols = [f"t{k + 1}" for k in range(scheme.T)]
    _write_csv(
        os.path.join(outdir, "particles.csv"),
        ["label", "q0"] + tcols + ["qT1"],
        (   # lifted-flow particle trajectories: the evolution snapshots
            [labels[m], q0[m], *state.Q[m, :], qT1[m]]
            for m in range(labels.size)
        ),
    )
    _write_csv(
        os.path.join(outdir, "velocity.csv"),
        ["label"] + tcols,
        ([labels[m], *state.V[m, :]] for m in range(labels.size)),
    )
    norms = [lf.norm_sq for lf in state.lifts]
    _write_csv(
        os.path.join(outdir, "energy.csv"),
        ["slice", "s", "h", "norm_sq"],
        ((k + 1, scheme.s[k], scheme.h[k], norms[k]) for k in range(scheme.T)),
    )
    manifest = {
        "command": command,
        "parameters": params,
        "M": int(labels.size),
        "T": int(scheme.T),
        "scheme": scheme.kind,
        "tolerances": {"tol_obj": params["tol_obj"], "tol_grad": params["tol_grad"]},
        "iterations": res.iterations,
        "final_energy": state.energy,
        "length": float(np.sqrt(max(state.energy, 0.0))),
        "converged": res.converged,
        "max_iter_reached": res.max_iter_reached,
        "diagnostics": res.diagnostics,
        "energy_history": res.energy_history,
        "wall_time_s": wall,
        "version": __version__,
    }
    _write_manifest(os.path.join(outdir, "manifest.json"), manifest)
    return manifest


@main.command("geodesic")
@click.argument("weld0_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("weld1_file", type=click.Path(exists=True, dir_okay=False),
                required=False)
@click.option("--identity", is_flag=True, help="use the identity as endpoint")
@_solver_options
def cmd_geodesic(weld0_file, weld1_file, identity, particles, time_steps,
                 scheme, tol_obj, tol_grad, max_iter, out):
    """Solve the geodesic boundary value problem between two welds."""
    if (weld1_file is None) == (not identity):
        click.echo("error: provide either WELD1_FILE or --identity", err=True)
        sys.exit(EXIT_INPUT)
    try:
        weld_a = _read_weld(weld0_file)
        weld_b = None if identity else _read_weld(weld1_file)
        labels, q0, qT1, res, wall = _run_geodesic(
            weld_a, weld_b, particles, time_steps, scheme, tol_obj, tol_grad,
            max_iter,
        )
    except (SelfIntersecting, BadParameter, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    params = {
        "weld0": weld0_file,
        "weld1": weld1_file if weld1_file else "identity",
        "particles": particles,
        "time_steps": time_steps,
        "scheme": scheme,
        "tol_obj": tol_obj,
        "tol_grad": tol_grad,
        "max_iter": max_iter,
    }
    manifest = _emit_run(out, labels, q0, qT1, res, wall, "geodesic", params)
    click.echo(
        f"energy={manifest['final_energy']:.12e} length={manifest['length']:.9f} "
        f"iterations={manifest['iterations']} converged={manifest['converged']}"
    )
    if not res.converged:
        click.echo("error: solver did not converge (outputs written)", err=True)
        sys.exit(EXIT_NOT_CONVERGED)


def _case_geodesic(outdir, tag, weld_a, weld_b, particles, time_steps, scheme,
                   tol_obj, tol_grad, max_iter, extra_params, endpoints=None,
                   V0=None):
    """One experiment case: solve, emit artifacts into a subdirectory."""
    if endpoints is None:
        labels, q0, qT1, res, wall = _run_geodesic(
            weld_a, weld_b, particles, time_steps, scheme, tol_obj, tol_grad,
            max_iter, V0=V0,
        )
    else:
        labels, q0, qT1 = endpoints
        t0 = time.perf_counter()
        res = minimize(
            q0, qT1, scheme=scheme, T=time_steps, tol_obj=tol_obj,
            tol_grad=tol_grad, max_iter=max_iter, V0=V0,
        )
        wall = time.perf_counter() - t0
    params = {
        "case": tag,
        "particles": particles,
        "time_steps": time_steps,
        "scheme": scheme,
        "tol_obj": tol_obj,
        "tol_grad": tol_grad,
        "max_iter": max_iter,
        **extra_params,
    }
    manifest = _emit_run(
        os.path.join(outdir, tag), labels, q0, qT1, res, wall, "experiment",
        params,
    )
    return res, manifest


@main.command("experiment")
@click.argument("name", type=click.Choice(
    ["zero_distance", "ellipse_sweep", "angle_sum", "corner_sweep", "mpeg7"]))
@click.option("--seed", default=0, show_default=True,
              help="RNG seed for randomized configurations")
@click.option("--boundary-samples", default=512, show_default=True,
              help="shape boundary resolution for welding")
@click.option("--contour-dir", type=click.Path(file_okay=False, exists=False),
              default=None, help="directory of x,y contour CSVs (mpeg7)")
@_solver_options
def cmd_experiment(name, seed, boundary_samples, contour_dir, particles,
                   time_steps, scheme, tol_obj, tol_grad, max_iter, out):
    """Run one of the paper-style experiment suites."""
    os.makedirs(out, exist_ok=True)
    kw = dict(particles=particles, time_steps=time_steps, scheme=scheme,
              tol_obj=tol_obj, tol_grad=tol_grad, max_iter=max_iter)
    runner = {
        "zero_distance": _exp_zero_distance,
        "ellipse_sweep": _exp_ellipse_sweep,
        "angle_sum": _exp_angle_sum,
        "corner_sweep": _exp_corner_sweep,
        "mpeg7": _exp_mpeg7,
    }[name]
    try:
        rows, header = runner(out, seed=seed, n=boundary_samples,
                              contour_dir=contour_dir, **kw)
    except (SelfIntersecting, BadParameter, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    report = os.path.join(out, f"{name}.csv")
    _write_csv(report, header, rows)
    click.echo(f"report: {report}")


def _exp_zero_distance(out, seed, n, contour_dir, **kw):
    """Pairwise energies between Moebius-equivalent welds of one triangle."""
    base = compute_weld(make_shape("rounded_triangle", n=n, alpha=2.0))
    rng = np.random.default_rng(seed)
    normalizations = [(0.0j, 0.0)]
    for _ in range(3):
        a = 0.4 * rng.uniform(0.3, 1.0) * np.exp(2j * np.pi * rng.uniform())
        normalizations.append((a, rng.uniform(0, 2 * np.pi)))
    welds = [base] + [reparameterize_weld(base, a, rot)
                      for a, rot in normalizations[1:]]
    per_set = max(kw["particles"] // 3, 4)

    def act(u, a, rot):
        return u.copy() if a == 0 else moebius_boundary(u, a, rot)

    rows = []
    for i in range(4):
        for j in range(i + 1, 4):
            tag = f"pair_{i}{j}"
            labels = particle_labels([welds[i], welds[j]], per_set=per_set)
            # the endpoint values go through the exact boundary action of the
            # two normalizing automorphisms on one shared base evaluation, so
            # the pair differs by a Moebius map to roundoff; evaluating each
            # weld's own interpolant instead would bury the zero distance
            # under interpolation error amplified by the stiff metric
            u = base(labels)
            endpoints = (labels, act(u, *normalizations[i]),
                         act(u, *normalizations[j]))
            res, man = _case_geodesic(out, tag, None, None,
                                      extra_params={"i": i, "j": j},
                                      endpoints=endpoints, **kw)
            rows.append((tag, man["final_energy"], man["length"],
                         man["iterations"], man["converged"],
                         man["diagnostics"]["norm_constancy"]))
            click.echo(f"{tag}: E={man['final_energy']:.3e} "
                       f"converged={man['converged']}")
    return rows, ["case", "energy", "length", "iterations", "converged",
                  "norm_constancy"]


def _exp_ellipse_sweep(out, seed, n, contour_dir, **kw):
    """Path length to the identity versus ellipse aspect ratio."""
    rows = []
    per_set = max(kw["particles"] // 3, 4)
    prev = None  # (labels, V) of the previous aspect: warm-start the next one
    for r in (1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0):
        weld = compute_weld(make_shape("ellipse", n=n, r=r))
        tag = f"aspect_{r:g}"
        labels = particle_labels([weld, None], per_set=per_set)
        endpoints = (labels, weld(labels), labels.copy())
        V0 = None if prev is None else transfer_velocity(*prev, labels)
        res, man = _case_geodesic(
            out, tag, None, None,
            extra_params={"aspect": r, "warm_started": prev is not None},
            endpoints=endpoints, V0=V0, **kw)
        prev = (labels, res.state.V)
        rows.append((r, man["final_energy"], man["length"], man["iterations"],
                     man["converged"], man["diagnostics"]["norm_constancy"]))
        click.echo(f"{tag}: L={man['length']:.6f} converged={man['converged']}")
    return rows, ["aspect", "energy", "length", "iterations", "converged",
                  "norm_constancy"]


def _exp_angle_sum(out, seed, n, contour_dir, **kw):
    """Vertex-angle sums of rotated-ellipse geodesic triangles."""
    from .geodesic import vertex_angle

    rows = []
    for aspect in (1.2, 1.5, 2.0, 3.0):
        base = make_shape("ellipse", n=n, r=aspect)
        shapes = [Shape(boundary=base.boundary * np.exp(1j * beta))
                  for beta in (0.0, 2.0 * np.pi / 3.0, -2.0 * np.pi / 3.0)]
        welds = [compute_weld(s) for s in shapes]
        per_set = max(kw["particles"] // 3, 4)
        labels = particle_labels(welds, per_set=per_set)
        ends = [w(labels) for w in welds]
        vel = {}
        ok = True
        for (i, j) in ((0, 1), (0, 2), (1, 2)):
            res = minimize(ends[i], ends[j], scheme=kw["scheme"],
                           T=kw["time_steps"], tol_obj=kw["tol_obj"],
                           tol_grad=kw["tol_grad"], max_iter=kw["max_iter"])
            ok = ok and res.converged
            vel[(i, j)] = res.state.V[:, 0]
            vel[(j, i)] = -res.state.V[:, -1]
        angles = []
        for i in range(3):
            j, k = [v for v in range(3) if v != i]
            angles.append(vertex_angle(ends[i], vel[(i, j)], vel[(i, k)]))
        total = float(np.sum(angles))
        rows.append((aspect, *angles, total, ok))
        click.echo(f"aspect {aspect:g}: angle sum = {total:.6f} (pi = {np.pi:.6f})")
    return rows, ["aspect", "alpha1", "alpha2", "alpha3", "angle_sum",
                  "converged"]


def _exp_corner_sweep(out, seed, n, contour_dir, **kw):
    """Path length to the identity versus corner-rounding exponent."""
    alphas = (1.01, 1.05, 1.2, 1.5, 2.0, 3.0)
    per_set = max(kw["particles"] // 3, 4)
    # solve from the roundest corner down: each sharper case warm-starts from
    # its rounder neighbor, which the near-corner regime needs to make progress
    results = {}
    prev = None
    for alpha in sorted(alphas, reverse=True):
        weld = compute_weld(make_shape("rounded_triangle", n=n, alpha=alpha))
        tag = f"alpha_{alpha:g}"
        labels = particle_labels([weld, None], per_set=per_set)
        endpoints = (labels, weld(labels), labels.copy())
        V0 = None if prev is None else transfer_velocity(*prev, labels)
        res, man = _case_geodesic(
            out, tag, None, None,
            extra_params={"alpha": alpha, "warm_started": prev is not None},
            endpoints=endpoints, V0=V0, **kw)
        prev = (labels, res.state.V)
        results[alpha] = man
        click.echo(f"{tag}: L={man['length']:.6f} converged={man['converged']}")
    rows = [
        (alpha, man["final_energy"], man["length"], man["iterations"],
         man["converged"], man["diagnostics"]["norm_constancy"])
        for alpha, man in ((a, results[a]) for a in alphas)
    ]
    return rows, ["alpha", "energy", "length", "iterations", "converged",
                  "norm_constancy"]


def _exp_mpeg7(out, seed, n, contour_dir, **kw):
    """Geodesic length to the identity for user-supplied contours."""
    if not contour_dir or not os.path.isdir(contour_dir):
        raise BadParameter("mpeg7 requires --contour-dir with x,y CSV files")
    rows = []
    for fname in sorted(os.listdir(contour_dir)):
        if not fname.endswith(".csv"):
            continue
        tag = os.path.splitext(fname)[0]
        try:
            shape = _read_shape(os.path.join(contour_dir, fname))
            with warnings.catch_warnings():
                warnings.simplefilter("error", Crowded)
                weld = compute_weld(shape)
            res, man = _case_geodesic(out, tag, weld, None,
                                      extra_params={"contour": fname}, **kw)
            rows.append((tag, man["final_energy"], man["length"],
                         man["iterations"], man["converged"],
                         man["diagnostics"]["norm_constancy"]))
            click.echo(f"{tag}: L={man['length']:.6f} "
                       f"converged={man['converged']}")
        except (SelfIntersecting, BadParameter, Crowded, ValueError) as exc:
            rows.append((tag, "", "", "", f"failed: {exc}", ""))
            click.echo(f"{tag}: failed ({exc})", err=True)
    return rows, ["case", "energy", "length", "iterations", "converged",
                  "norm_constancy"]


if __name__ == "__main__":
    main()
