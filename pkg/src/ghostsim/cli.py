"""Command line front end: ``ghostsim <command> ...``.

Exit codes: 0 success, 2 invalid input, 3 file I/O or format error,
4 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import calib, io
from .errors import ConvergenceError, FormatError, GhostSimError, ValidationError
from .estimators import (measure_nrf, measure_snr, reconstruct, tiled_reconstruct)
from .experiments import SWEEP_EXTRA_COLUMNS, sweep
from .scene import TransmissionMap, make_binary_scene, scene_stats, uniform_scene
from .simulator import SourceParams, simulate_pair

SCENE_HELP = """\
scene specs:
  binary:WxH:eps=E:tplus=A:tminus=B[:layout=left|right|rectangle]
  mask:PATH.pgm:tplus=A:tminus=B     (non-zero mask pixels take t_minus)
  uniform:WxH[:t=T]
"""


def parse_scene_spec(spec: str) -> TransmissionMap:
    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    if kind in ("binary", "uniform"):
        if not parts:
            raise ValidationError(f"scene spec {spec!r} lacks a WxH size")
        try:
            w, h = (int(v) for v in parts[0].lower().split("x"))
        except ValueError:
            raise ValidationError(f"bad scene size {parts[0]!r}") from None
        opts = _options(parts[1:], spec)
        if kind == "uniform":
            return uniform_scene(w, h, float(opts.get("t", 1.0)))
        return make_binary_scene(w, h, float(opts.get("eps", 0.0)), float(opts.get("tplus", 1.0)),
                                 float(opts.get("tminus", 0.0)), opts.get("layout", "left"))
    if kind == "mask":
        if not parts:
            raise ValidationError(f"scene spec {spec!r} lacks a mask path")
        opts = _options(parts[1:], spec)
        mask = io.read_mask(parts[0])
        return make_binary_scene(mask.shape[1], mask.shape[0], 0.0, float(opts.get("tplus", 1.0)),
                                 float(opts.get("tminus", 0.0)), "mask", mask=mask)
    raise ValidationError(f"unknown scene kind {kind!r}")


def _options(items, spec):
    opts = {}
    for item in items:
        key, eq, value = item.partition("=")
        if not eq:
            raise ValidationError(f"bad option {item!r} in scene spec {spec!r}")
        opts[key.strip().lower()] = value.strip()
    return opts


def parse_range(text: str) -> np.ndarray:
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise ValidationError(f"range must be a:b:n, got {text!r}") from None
    if n < 1:
        raise ValidationError("range needs n >= 1")
    return np.linspace(a, b, n)


def parse_tiles(text: str):
    try:
        r, c = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ValidationError(f"tiles must be RxC, got {text!r}") from None
    return r, c


def _params(args) -> SourceParams:
    return SourceParams(args.kind, args.n2, args.modes, args.eta, args.delta_el)


def _sidecar(path):
    return os.fspath(path) + ".json"


def _params_dict(p: SourceParams):
    return {"kind": p.kind, "n2": p.n2, "M": p.M, "eta": p.eta, "delta_el": p.delta_el}


def _load_sidecar(path):
    try:
        return io.read_json(_sidecar(path))
    except FileNotFoundError:
        return {}


def _add_source_flags(p, required=True):
    p.add_argument("--kind", choices=("twin", "thermal"), default="twin")
    p.add_argument("--n2", type=float, required=required, help="mean detected photons per pixel per frame")
    p.add_argument("--modes", type=float, required=required, help="modes per pixel per frame (M)")
    p.add_argument("--eta", type=float, required=required, help="channel efficiency in (0, 1]")
    p.add_argument("--delta-el", type=float, default=0.0 if required else None,
                   help="read noise rms (electrons)")


def cmd_simulate(args):
    params = _params(args)
    scene = parse_scene_spec(args.scene)
    if args.frames < 1:
        raise ValidationError("--frames must be >= 1")
    probe, ref = simulate_pair(params, scene, args.frames, args.seed, workers=args.workers)
    st = scene_stats(scene)
    meta = {"params": _params_dict(params), "scene": args.scene, "t_bar": st.t_bar,
            "t2_bar": st.t2_bar, "epsilon": st.epsilon, "t_plus": st.t_plus,
            "t_minus": st.t_minus, "H": args.frames, "seed": args.seed,
            "width": scene.width, "height": scene.height}
    for path, stack, channel in ((args.out_probe, probe, "probe"), (args.out_ref, ref, "reference")):
        io.write_stack(path, stack)
        io.write_json(_sidecar(path), dict(meta, channel=channel))
    eps = "n/a" if st.epsilon is None else f"{st.epsilon:.6g}"
    print(f"scene {scene.width}x{scene.height}: t_bar={st.t_bar:.6g} t2_bar={st.t2_bar:.6g} epsilon={eps}")
    print(f"wrote {args.out_probe} and {args.out_ref} ({args.frames} frames)")
    return 0


def cmd_reconstruct(args):
    probe = io.read_stack(args.probe)
    ref = io.read_stack(args.ref)
    meta = _load_sidecar(args.probe)
    params = None
    if args.k_source == "analytic":
        if args.n2 is not None:
            params = SourceParams(args.kind, args.n2, args.modes, args.eta, args.delta_el or 0.0)
        elif "params" in meta:
            params = SourceParams(**meta["params"])
        else:
            raise ValidationError("analytic k needs --n2/--modes/--eta or a probe sidecar")
    if args.protocol == "sk" and args.k is None:
        raise ValidationError("protocol sk requires --k")
    if args.tiles:
        rec = tiled_reconstruct(probe, ref, args.protocol, parse_tiles(args.tiles), k=args.k,
                                k_source=args.k_source, params=params)
    else:
        rec = reconstruct(probe, ref, args.protocol, k=args.k, k_source=args.k_source,
                          params=params, t_bar=meta.get("t_bar"))
    io.export_image(rec, args.out)
    side = {"protocol": rec.protocol, "k_used": rec.k_used, "H_used": rec.H_used,
            "k_source": args.k_source if rec.protocol == "odgi" else None,
            "tiles": args.tiles, "source": meta}
    if rec.tile_k is not None:
        side["tile_k"] = rec.tile_k
    io.write_json(_sidecar(args.out), side)
    print(f"{rec.protocol}: k_used={rec.k_used:.6g} H_used={rec.H_used} -> {args.out}")
    if rec.tile_k is not None:
        print("per-tile k:\n" + np.array2string(rec.tile_k, precision=5))
    return 0


def _row_from_meta(protocol, meta, value, err, n_pixels):
    src = meta.get("source", meta)
    p = src.get("params", {})
    nan = float("nan")
    return io.ResultRow(protocol, float(p.get("eta", nan)), float(p.get("n2", nan)),
                        float(p.get("M", nan)), float(p.get("delta_el", nan)), int(n_pixels),
                        int(meta.get("H_used", src.get("H", 0)) or 0),
                        float(src.get("epsilon") if src.get("epsilon") is not None else nan),
                        float(src.get("t_plus") if src.get("t_plus") is not None else nan),
                        float(src.get("t_minus") if src.get("t_minus") is not None else nan),
                        float(value), float(err))


def cmd_snr(args):
    image = io.read_image(args.recon)
    if args.scene:
        mask_plus, mask_minus = parse_scene_spec(args.scene).level_masks()
    else:
        if not (args.mask_plus and args.mask_minus):
            raise ValidationError("give --mask-plus and --mask-minus, or --scene")
        mask_plus, mask_minus = io.read_mask(args.mask_plus), io.read_mask(args.mask_minus)
    rep = measure_snr(image, mask_plus, mask_minus)
    flag = " (degenerate: zero pooled variance)" if rep.degenerate else ""
    print(f"snr={rep.snr:.6g}{flag}")
    print(f"mean+={rep.mean_plus:.6g} var+={rep.var_plus:.6g} n+={rep.n_plus}")
    print(f"mean-={rep.mean_minus:.6g} var-={rep.var_minus:.6g} n-={rep.n_minus}")
    if args.table:
        meta = _load_sidecar(args.recon)
        row = _row_from_meta(meta.get("protocol", "unknown"), meta, rep.snr, float("nan"), image.size)
        io.results_table([row], args.table, append=True)
    return 0


def cmd_nrf(args):
    probe = io.read_stack(args.probe)
    ref = io.read_stack(args.ref)
    region = io.read_mask(args.region) if args.region else None
    rep = measure_nrf(probe, ref, region)
    verdict = "non-classical" if rep.nonclassical else "no non-classicality witnessed"
    print(f"nrf={rep.nrf:.6g} +- {rep.std_error:.3g} ({verdict})")
    if args.table:
        meta = _load_sidecar(args.probe)
        n = int(region.sum()) if region is not None else probe.height * probe.width
        io.results_table([_row_from_meta("nrf", meta, rep.nrf, rep.std_error, n)], args.table,
                         append=True)
    return 0


def cmd_sweep(args):
    params = _params(args)
    protocols = tuple(p.strip().lower() for p in args.protocols.split(",") if p.strip())
    values = parse_range(args.range)
    if args.vary == "epsilon" and (values.min() <= 0 or values.max() >= 1):
        raise ValidationError("epsilon grid must lie strictly inside (0, 1)")
    rows = sweep(params, args.vary, values, width=args.width, height=args.height, H=args.frames,
                 epsilon=args.epsilon, t_plus=args.tplus, t_minus=args.tminus, layout=args.layout,
                 protocols=protocols, n_seeds=args.seeds, master_seed=args.seed,
                 k_source=args.k_source, workers=args.workers)
    io.results_table(rows, args.out, extra_columns=SWEEP_EXTRA_COLUMNS)
    for r in rows:
        print(f"{args.vary}={r.extra['x']:.4g} {r.protocol:5s} snr={r.snr:.4f} +- {r.snr_err:.4f}"
              f"  predicted={r.extra['snr_pred']:.4f}")
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


FIX_FIELDS = {"n2": "n2", "m": "M", "delta_el": "delta_el", "n": "N_pixels", "h": "H",
              "tplus": "t_plus", "tminus": "t_minus", "epsilon": "epsilon"}


def cmd_fit(args):
    rows = [r for r in io.read_results_table(args.data) if r.protocol == args.protocol]
    curve = args.curve.replace("-", "_")
    if curve not in calib.CURVE_KINDS:
        raise ValidationError(f"unknown curve {args.curve!r}")
    if len(rows) < 3:
        raise ValidationError(f"need at least 3 rows for protocol {args.protocol}, found {len(rows)}")
    fixed = {}
    items = [s.strip() for s in args.fix.split(",") if s.strip()]
    names = set()
    for item in items:
        key, eq, value = item.partition("=")
        key = key.strip().lower()
        if key not in FIX_FIELDS:
            raise ValidationError(f"cannot fix {key!r}; choose from {sorted(FIX_FIELDS)}")
        names.add(key)
        col = FIX_FIELDS[key]
        if eq:
            fixed[col] = float(value)
        else:
            vals = {getattr(r, col) for r in rows}
            if len(vals) != 1:
                raise ValidationError(f"column {col} is not constant across rows; give {key}=value")
            fixed[col] = float(vals.pop())
    for need in ("n2", "m", "delta_el", "n", "h"):
        if need not in names:
            raise ValidationError(f"--fix must include {need}")
    first = rows[0]
    spec = calib.FitFixed(n2=fixed["n2"], M=fixed["M"], delta_el=fixed["delta_el"],
                          n_pixels=int(fixed["N_pixels"]), H=fixed["H"], protocol=args.protocol,
                          kind=args.kind, t_plus=fixed.get("t_plus", first.t_plus),
                          t_minus=fixed.get("t_minus", first.t_minus),
                          epsilon=fixed.get("epsilon", first.epsilon))
    xcol = "epsilon" if curve == "snr_vs_eps" else "t_minus"
    points = [(getattr(r, xcol), r.snr, r.snr_err) for r in rows]
    res = calib.fit_eta(points, curve, spec)
    flag = " (pinned at boundary)" if res.at_boundary else ""
    print(f"eta_hat={res.eta_hat:.5f} +- {res.std_error:.5f}{flag}")
    print(f"chi2={res.residual_sum:.4g} over {len(points)} points, {res.iterations} iterations")
    print(f"band: {res.band_method}")
    if args.band_out:
        def write(fh):
            fh.write("x,fitted,lower,upper\n")
            for row in zip(res.abscissa, res.fitted, res.band_lower, res.band_upper):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        io._atomic_write(args.band_out, write, mode="w")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghostsim", description="Quantum differential ghost imaging toolkit",
                                     formatter_class=argparse.RawDescriptionHelpFormatter,
                                     epilog=SCENE_HELP)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate probe/reference frame stacks",
                       formatter_class=argparse.RawDescriptionHelpFormatter, epilog=SCENE_HELP)
    _add_source_flags(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-probe", required=True)
    p.add_argument("--out-ref", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct a ghost image")
    p.add_argument("--protocol", choices=("gi", "dgi", "sk", "odgi"), required=True)
    p.add_argument("--k", type=float)
    p.add_argument("--k-source", choices=("empirical", "analytic"), default="empirical")
    p.add_argument("--tiles", help="RxC tiling, e.g. 3x3")
    p.add_argument("--probe", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out", required=True, help="output image (.csv or .pgm)")
    _add_source_flags(p, required=False)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("snr", help="SNR of a reconstruction between two regions",
                       formatter_class=argparse.RawDescriptionHelpFormatter, epilog=SCENE_HELP)
    p.add_argument("--recon", required=True)
    p.add_argument("--mask-plus")
    p.add_argument("--mask-minus")
    p.add_argument("--scene", help="derive both masks from a two-level scene spec")
    p.add_argument("--table", help="append a row to this results CSV")
    p.set_defaults(func=cmd_snr)

    p = sub.add_parser("nrf", help="noise reduction factor of correlated pixel pairs")
    p.add_argument("--probe", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--region", help="PGM mask of a unit-transmission region")
    p.add_argument("--table", help="append a row to this results CSV")
    p.set_defaults(func=cmd_nrf)

    p = sub.add_parser("sweep", help="SNR of several protocols over a parameter grid")
    _add_source_flags(p)
    p.add_argument("--vary", choices=("epsilon", "tminus", "eta"), required=True)
    p.add_argument("--range", required=True, help="a:b:n")
    p.add_argument("--protocols", default="gi,dgi,odgi")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--width", type=int, default=34)
    p.add_argument("--height", type=int, default=28)
    p.add_argument("--frames", type=int, default=30000)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--tplus", type=float, default=1.0)
    p.add_argument("--tminus", type=float, default=0.0)
    p.add_argument("--layout", default="left")
    p.add_argument("--k-source", choices=("empirical", "analytic"), default="empirical")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="fit the channel efficiency to SNR data")
    p.add_argument("--data", required=True)
    p.add_argument("--curve", choices=("snr-vs-eps", "snr-vs-tminus"), required=True)
    p.add_argument("--protocol", required=True)
    p.add_argument("--fix", required=True, help="e.g. n2,M,delta_el,N,H (values from the data) or n2=1000,...")
    p.add_argument("--kind", choices=("twin", "thermal"), default="twin")
    p.add_argument("--band-out", help="write the fitted curve and 1-sigma band as CSV")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except GhostSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
