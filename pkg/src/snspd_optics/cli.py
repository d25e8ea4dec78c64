"""``snspd`` command-line entry point."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import analysis, metrology
from .materials import available_materials, get_material
from .rcwa import rcwa_response
from .stack import Excitation, GratingLayer, Stack, UniformLayer, load_stack
from .tmm import spectral_sweep, tmm_response, wavelength_grid

DIGITS = 9


def fmt(value):
    """Round to 9 significant digits; ints and strings pass through."""
    if isinstance(value, (bool, str)) or value is None:
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    v = float(value)
    if not math.isfinite(v):
        return v
    return float(f"{v:.{DIGITS}g}")


def _cell(value):
    if isinstance(value, float):
        return f"{value:.{DIGITS}g}"
    return str(value)


# --- output ----------------------------------------------------------------------


def write_atomic(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def table_text(columns, rows, fmt_name: str) -> str:
    rows = [[fmt(v) for v in row] for row in rows]
    if fmt_name == "json":
        return json.dumps([dict(zip(columns, row)) for row in rows], indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _round_tree(obj):
    if isinstance(obj, dict):
        return {k: _round_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tree(v) for v in obj]
    return fmt(obj)


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def document_text(doc, fmt_name: str) -> str:
    """Nested result document; CSV flattens it to key,value rows."""
    doc = _round_tree(doc)
    if fmt_name == "json":
        return json.dumps(doc, indent=1) + "\n"
    return table_text(["key", "value"], list(_flatten(doc)), "csv")


def emit(args, text: str):
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        write_atomic(args.out, text)


# --- computations shared by several subcommands ----------------------------------


def _solve(stack: Stack, wl: float, pol: str, orders: int):
    ex = Excitation(wl, pol)
    if stack.has_grating:
        return rcwa_response(stack, ex, orders)
    return tmm_response(stack.planarized(), ex)


def _pols(pol: str):
    return ("TE", "TM") if pol == "both" else (pol,)


def spectrum_rows(stack, wls, pols, orders, jobs=1):
    cells = [(stack, float(wl), p, orders) for wl in wls for p in pols]
    responses = analysis.parallel_map(_spectrum_cell, cells, jobs)
    rows = [[wl, p, r.R, r.T, r.A, *r.absorbance_per_layer] for (_, wl, p, _), r in zip(cells, responses)]
    cols = ["wavelength_nm", "polarization", "R", "T", "A_total"]
    cols += [f"A_layer_{i}" for i in range(len(stack.layers))]
    return cols, rows


def _spectrum_cell(args):
    stack, wl, pol, orders = args
    return _solve(stack, wl, pol, orders)


def _eta(args):
    stack, wl, pol, orders = args
    return analysis.absorbance(_solve(stack, wl, pol, orders), stack.absorber_indices())


def _eta_and_total(args):
    stack, wl, pol, orders = args
    r = _solve(stack, wl, pol, orders)
    return analysis.absorbance(r, stack.absorber_indices()), r.A


def eta_curve(stack, wls, pol, orders, jobs=1):
    return analysis.parallel_map(_eta, [(stack, float(w), pol, orders) for w in wls], jobs)


def _map_rows(m):
    return [
        [wl, ff, m.values[i, j]]
        for i, wl in enumerate(m.wavelengths)
        for j, ff in enumerate(m.fill_factors)
    ]


def ff_grid(args):
    return np.round(wavelength_grid(args.ff_from, args.ff_to, args.ff_step), 12)


def strip_arc(stack: Stack) -> Stack:
    """Drop the uniform layers above the first grating layer."""
    first = next(i for i, l in enumerate(stack.layers) if isinstance(l, GratingLayer))
    return Stack(stack.superstrate, stack.layers[first:], stack.substrate, name=stack.name)


def default_arc_layers(stack: Stack):
    idx = []
    for i, layer in enumerate(stack.layers):
        if isinstance(layer, GratingLayer):
            break
        if isinstance(layer, UniformLayer):
            idx.append(i)
    return idx


# --- subcommands -----------------------------------------------------------------


def cmd_spectrum(args):
    stack = load_stack(args.stack)
    wls = wavelength_grid(args.wl_from, args.wl_to, args.step)
    cols, rows = spectrum_rows(stack, wls, _pols(args.pol), args.orders, args.jobs)
    emit(args, table_text(cols, rows, args.format))


def cmd_ffmap(args):
    stack = load_stack(args.stack)
    wls = wavelength_grid(args.wl_from, args.wl_to, args.step)
    m = analysis.fill_factor_map(stack, ff_grid(args), wls, args.pol, args.orders, args.jobs)
    emit(args, table_text(["wavelength_nm", "fill_factor", "value"], _map_rows(m), args.format))


def cmd_polcontrast(args):
    stack = load_stack(args.stack)
    wls = wavelength_grid(args.wl_from, args.wl_to, args.step)
    m = analysis.pol_contrast_map(stack, ff_grid(args), wls, args.orders, args.jobs)
    emit(args, table_text(["wavelength_nm", "fill_factor", "value"], _map_rows(m), args.format))


def cmd_sde_sim(args):
    stack = load_stack(args.stack)
    wls = wavelength_grid(args.wl_from, args.wl_to, args.step)
    rows = []
    for p in _pols(args.pol):
        cells = [(stack, float(w), p, args.orders) for w in wls]
        for wl, (eta, total) in zip(wls, analysis.parallel_map(_eta_and_total, cells, args.jobs)):
            # eta counts only the absorber layers; A_total shows what the rest absorbs
            sde = analysis.predicted_sde(min(max(eta, 0.0), 1.0), args.loss)
            rows.append([float(wl), p, total, eta, sde])
    cols = ["wavelength_nm", "polarization", "A_total", "eta_abs", "sde"]
    emit(args, table_text(cols, rows, args.format))


def _parse_layer_bounds(spec: str, stack: Stack):
    bounds = {}
    for item in spec.split(","):
        try:
            i, lo, hi = item.split(":")
            bounds[int(i)] = (float(lo), float(hi))
        except ValueError:
            raise analysis.DomainError(f"bad layer bound {item!r}; expected index:lo:hi") from None
    return bounds


def cmd_optimize_arc(args):
    stack = load_stack(args.stack)
    if args.layers:
        bounds = _parse_layer_bounds(args.layers, stack)
    else:
        idx = default_arc_layers(stack)
        if not idx:
            raise analysis.DomainError("stack has no uniform layers above its absorber; pass --layers")
        bounds = {i: (0.8 * stack.layers[i].thickness, 1.2 * stack.layers[i].thickness) for i in idx}
    objective = analysis.DesignObjective(
        band=(args.wl_from, args.wl_to), variable_layers=bounds, metric=args.metric, band_step=args.step
    )
    res = analysis.optimize_arc(
        stack, objective, args.orders, budget=args.budget, restarts=args.restarts, seed=args.seed
    )
    if args.format == "csv":
        cols = ["evaluation", "objective"] + [f"t_layer_{i}_nm" for i in sorted(bounds)]
        rows = [
            [k, t["objective"] if t["objective"] is not None else "nan", *t["thicknesses_nm"]]
            for k, t in enumerate(res.trace)
        ]
        emit(args, table_text(cols, rows, "csv"))
        return
    doc = {
        "thicknesses_nm": {str(k): v for k, v in res.thicknesses.items()},
        "objective": res.objective,
        "start_objective": res.start_objective,
        "evaluations": res.evaluations,
        "trace": res.trace,
    }
    emit(args, document_text(doc, "json"))


def cmd_sde_calc(args):
    record = metrology.load_record(args.input)
    value, unc = metrology.sde(record)
    b = metrology.budget(record)
    doc = {
        "wavelength_nm": record.wavelength,
        "sde": value,
        "sde_uncertainty": unc,
        "photon_flux_hz": metrology.input_flux(record).value,
        "attenuation_db": [
            10 * math.log10(metrology.attenuation_factor(a, metrology.corrected_power(record.unattenuated)).value)
            for a in record.attenuators
        ],
        **b.as_dict(),
    }
    emit(args, document_text(doc, args.format))


def cmd_stokes(args):
    try:
        values = [float(v) for v in args.counts.split(",")]
    except ValueError:
        raise metrology.DegenerateInput(f"counts must be numbers, got {args.counts!r}") from None
    if len(values) != 6:
        raise metrology.DegenerateInput("expected six counts: H,V,D,A,RHC,LHC")
    s = metrology.stokes_from_counts(metrology.StokesCounts(*values))
    sol = metrology.optimal_polarization(*s)
    doc = {
        "S0": s[0],
        "S1": s[1],
        "S2": s[2],
        "S3": s[3],
        "p": sol.p,
        "psi_rad": sol.psi,
        "chi_rad": sol.chi,
        "psi_deg": math.degrees(sol.psi),
        "chi_deg": math.degrees(sol.chi),
        "clamped": sol.clamped,
    }
    emit(args, document_text(doc, args.format))


def cmd_synthesize(args):
    record = metrology.synthesize_measurement(
        args.sde, args.flux, args.dark, noise=args.noise, seed=args.seed, wavelength=args.wavelength
    )
    doc = metrology.record_to_dict(record)
    if args.format == "json":
        # full precision so sde-calc reproduces the record exactly
        emit(args, json.dumps(doc, indent=1) + "\n")
    else:
        emit(args, document_text(doc, "csv"))


FIG_GRIDS = {
    "fig5": (1400.0, 1700.0, 10.0),
    "figS1": (1400.0, 1700.0, 10.0),
    "maps": (1400.0, 1700.0, 25.0),
    "ff": (0.5, 1.0, 0.05),
}


def report_figures(device: str, output_dir, orders=15, jobs=1, loss=analysis.DEFAULT_LOSS):
    """Write fig1, fig5, figS1, figS2 and figS3 CSVs for one device; returns the paths."""
    name = {"single": "single-device", "bilayer": "bilayer-device"}.get(device)
    if name is None:
        raise analysis.DomainError(f"device must be 'single' or 'bilayer', got {device!r}")
    out = Path(output_dir)
    stack = load_stack(name)
    written = []

    def put(fname, cols, rows):
        path = out / fname
        write_atomic(path, table_text(cols, rows, "csv"))
        written.append(path)

    mirror = load_stack("mirror13")
    fig1 = [[wl, r.R] for wl, r in spectral_sweep(mirror, 1350.0, 1800.0, 5.0)]
    put("fig1.csv", ["wavelength_nm", "R"], fig1)

    wls = wavelength_grid(*FIG_GRIDS["fig5"])
    te = eta_curve(stack, wls, "TE", orders, jobs)
    tm = eta_curve(stack, wls, "TM", orders, jobs)
    scale = 1.0 - loss
    put(
        f"fig5_{device}.csv",
        ["wavelength_nm", "eta_TE", "sde_TE", "eta_TM", "sde_TM"],
        [[w, a, scale * a, b, scale * b] for w, a, b in zip(wls, te, tm)],
    )

    wls = wavelength_grid(*FIG_GRIDS["figS1"])
    bare = strip_arc(stack)
    variants = {"planar": bare.planarized(), "patterned": bare, "arc": stack}
    cols, series = ["wavelength_nm"], []
    for label, s in variants.items():
        for p in ("TE", "TM"):
            cols.append(f"{label}_{p}")
            series.append(eta_curve(s, wls, p, orders, jobs))
    put(f"figS1_{device}.csv", cols, [[w, *vals] for w, *vals in zip(wls, *series)])

    wls = wavelength_grid(*FIG_GRIDS["maps"])
    ffs = np.round(wavelength_grid(*FIG_GRIDS["ff"]), 12)
    m = analysis.fill_factor_map(stack, ffs, wls, "TE", orders, jobs)
    put(f"figS2_{device}.csv", ["wavelength_nm", "fill_factor", "value"], _map_rows(m))
    c = analysis.pol_contrast_map(stack, ffs, wls, orders, jobs)
    put(f"figS3_{device}.csv", ["wavelength_nm", "fill_factor", "value"], _map_rows(c))
    return written


def cmd_figures(args):
    out = args.out if args.out not in (None, "-") else "figures"
    for path in report_figures(args.device, out, args.orders, args.jobs, args.loss):
        print(path)


def cmd_materials(args):
    rows = []
    for name in available_materials():
        lo, hi = get_material(name).wavelength_range
        rows.append([name, lo, hi])
    emit(args, table_text(["name", "wavelength_min_nm", "wavelength_max_nm"], rows, args.format))


# --- parser ----------------------------------------------------------------------


def _add_common(p, fmt_default="csv"):
    p.add_argument("--out", help="output file (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"), default=fmt_default)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes")
    p.add_argument("--seed", type=int, default=0)


def _add_optics(p, wl_from=1400.0, wl_to=1700.0, step=10.0):
    p.add_argument("--stack", default="bilayer-device", help="preset name or stack JSON path")
    p.add_argument("--orders", type=int, default=15, help="harmonic truncation order N")
    p.add_argument("--from", dest="wl_from", type=float, default=wl_from, help="start wavelength (nm)")
    p.add_argument("--to", dest="wl_to", type=float, default=wl_to, help="stop wavelength (nm)")
    p.add_argument("--step", type=float, default=step, help="wavelength step (nm)")
    p.add_argument("--loss", type=float, default=analysis.DEFAULT_LOSS, help="loss fraction")


def _add_pol(p):
    p.add_argument("--pol", type=str.upper, choices=("TE", "TM", "BOTH"), default="TE")


def _add_ff(p):
    p.add_argument("--ff-from", type=float, default=0.5)
    p.add_argument("--ff-to", type=float, default=1.0)
    p.add_argument("--ff-step", type=float, default=0.05)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snspd", description="Optical and metrology models for WSi SNSPD stacks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="R, T and per-layer absorbance sweep")
    _add_common(p), _add_optics(p), _add_pol(p)
    p.set_defaults(func=cmd_spectrum)
    p = sub.add_parser("ffmap", help="absorbance over wavelength and fill factor")
    _add_common(p), _add_optics(p), _add_pol(p), _add_ff(p)
    p.set_defaults(func=cmd_ffmap)
    p = sub.add_parser("polcontrast", help="TE/TM contrast map")
    _add_common(p), _add_optics(p), _add_ff(p)
    p.set_defaults(func=cmd_polcontrast)
    p = sub.add_parser("sde-sim", help="predicted SDE with a loss factor")
    _add_common(p), _add_optics(p), _add_pol(p)
    p.set_defaults(func=cmd_sde_sim)

    p = sub.add_parser("optimize-arc", help="optimise ARC thicknesses")
    _add_common(p, "json"), _add_optics(p, 1500.0, 1600.0, 10.0)
    p.add_argument("--layers", help="index:lo:hi[,index:lo:hi...] (default: ARC layers, +-20%%)")
    p.add_argument("--metric", choices=("te", "mean"), default="te")
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--restarts", type=int, default=2)
    p.set_defaults(func=cmd_optimize_arc)

    p = sub.add_parser("sde-calc", help="SDE and uncertainty budget of a record")
    _add_common(p, "json")
    p.add_argument("--in", dest="input", required=True, help="measurement record JSON")
    p.set_defaults(func=cmd_sde_calc)

    p = sub.add_parser("stokes", help="Stokes parameters and optimal state")
    _add_common(p, "json")
    p.add_argument("--counts", required=True, help="H,V,D,A,RHC,LHC")
    p.set_defaults(func=cmd_stokes)

    p = sub.add_parser("synthesize", help="synthetic measurement record")
    _add_common(p, "json")
    p.add_argument("--sde", type=float, default=0.925)
    p.add_argument("--flux", type=float, default=1e5, help="photons/s")
    p.add_argument("--dark", type=float, default=300.0, help="dark counts/s")
    p.add_argument("--noise", choices=("none", "poisson"), default="none")
    p.add_argument("--wavelength", type=float, default=1550.0)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("figures", help="plot-ready CSVs for one device")
    _add_common(p)
    p.add_argument("--device", choices=("single", "bilayer"), required=True)
    p.add_argument("--orders", type=int, default=15)
    p.add_argument("--loss", type=float, default=analysis.DEFAULT_LOSS)
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("materials", help="list reference materials")
    _add_common(p)
    p.set_defaults(func=cmd_materials)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if hasattr(args, "pol"):
        args.pol = "both" if args.pol == "BOTH" else args.pol
    try:
        args.func(args)
    except Exception as exc:  # report one machine-readable line
        category = getattr(exc, "category", None)
        if category is None:
            category = "io-error" if isinstance(exc, OSError) else "invalid-input"
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {category}: {msg}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
