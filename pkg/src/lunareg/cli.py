"""Command-line interface: register, upscale, bench, metrics, synth, geo."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

from .errors import DegenerateGeometry, ImageFormatError, TooFewMatches
from .geo import (
    GeoGrid,
    GeoPoint,
    LUNAR_RADIUS_KM,
    estimate_affine,
    footprint_bbox,
    haversine_distance,
    nearest_grid_pixel,
)
from .imgcore import Image, InterpMethod, load_image, save_image, upscale
from .metrics import Scale, SsimMode
from .pipeline import Method, PipelineConfig, Status, metrics_only, register
from .registration import Homography
from .synthbench import (
    SceneConfig,
    generate_crater_scene,
    make_scene_pairs,
    rows_to_csv,
    run_benchmark,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_TOO_FEW_FEATURES = 2
EXIT_NO_CONSENSUS = 3
EXIT_USAGE = 64
EXIT_DATA = 65

_STATUS_EXIT = {
    Status.OK.value: EXIT_OK,
    Status.TOO_FEW_FEATURES.value: EXIT_TOO_FEW_FEATURES,
    Status.NO_CONSENSUS.value: EXIT_NO_CONSENSUS,
    Status.DEGENERATE.value: EXIT_IO,
}

DEFAULT_SEED = 42


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage failures exit 64 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _BadCsv(Exception):
    pass


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _print_json(payload: dict):
    text = json.dumps(payload, indent=2, sort_keys=True)
    sys.stdout.write(text + "\n")


def _json_float(value):
    if value is None:
        return None
    if math.isinf(value):
        return "inf"
    return value


def _parse_latlon(text: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected LAT,LON but got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _parse_pair(text: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected X,Y but got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _read_csv(path: str, columns: tuple):
    """Rows as float tuples in the given column order; _BadCsv on misuse."""
    try:
        with open(path, newline="") as handle:
            reader = csv.DictReader(handle)
            header = reader.fieldnames
            if header is None or any(c not in header for c in columns):
                raise _BadCsv(f"{path}: expected header with columns {','.join(columns)}")
            rows = []
            for record in reader:
                try:
                    rows.append(tuple(float(record[c]) for c in columns))
                except (TypeError, ValueError):
                    raise _BadCsv(f"{path}: non-numeric row {record}") from None
    except OSError as exc:
        raise ImageFormatError(str(exc)) from None
    if not rows:
        raise _BadCsv(f"{path}: no data rows")
    return rows


def _load(path: str) -> Image:
    return load_image(path)


def cmd_register(args) -> int:
    try:
        img1 = _load(args.image1)
        img2 = _load(args.image2)
    except ImageFormatError as exc:
        return _fail(str(exc), EXIT_IO)
    cfg = PipelineConfig().with_seed(args.seed)
    registered, report = register(img1, img2, Method[args.method.upper()], cfg)
    outdir = Path(args.out)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "report.json").write_text(report.to_json(include_timings=args.timings))
        if registered is not None:
            save_image(registered, str(outdir / "registered.png"))
    except OSError as exc:
        return _fail(str(exc), EXIT_IO)
    return _STATUS_EXIT[report.status]


def cmd_upscale(args) -> int:
    if args.factor <= 0:
        return _fail(f"factor must be positive, got {args.factor}", EXIT_USAGE)
    try:
        img = _load(args.image)
    except ImageFormatError as exc:
        return _fail(str(exc), EXIT_IO)
    out = args.out
    if out is None:
        src = Path(args.image)
        out = str(src.with_name(src.stem + "_upscaled" + src.suffix))
    result = upscale(img, args.factor, InterpMethod[args.interp.upper()])
    try:
        save_image(result, out)
    except (ImageFormatError, OSError) as exc:
        return _fail(str(exc), EXIT_IO)
    return EXIT_OK


def _discover_pairs(directory: str):
    """(low, high, optional H) triples from NAME_low/NAME_high images.

    An optional NAME_gt.json sidecar holds {"homography": [9 values]}
    mapping the upscaled low frame onto the high frame.
    """
    root = Path(directory)
    if not root.is_dir():
        raise ImageFormatError(f"not a directory: {directory}")
    pairs = []
    for low_path in sorted(root.glob("*_low.*")):
        if low_path.suffix.lower() not in (".png", ".pgm"):
            continue
        stem = low_path.name[: -len("_low" + low_path.suffix)]
        high_candidates = [
            root / f"{stem}_high{suffix}" for suffix in (low_path.suffix, ".png", ".pgm")
        ]
        high_path = next((p for p in high_candidates if p.exists()), None)
        if high_path is None:
            raise ImageFormatError(f"missing high-resolution member for {low_path.name}")
        truth = None
        gt_path = root / f"{stem}_gt.json"
        if gt_path.exists():
            try:
                payload = json.loads(gt_path.read_text())
                truth = Homography.from_flat_list(payload["homography"])
            except (OSError, ValueError, KeyError, TypeError) as exc:
                raise _BadCsv(f"{gt_path}: bad ground-truth sidecar ({exc})") from None
        pairs.append((load_image(str(low_path)), load_image(str(high_path)), truth))
    return pairs


def cmd_bench(args) -> int:
    try:
        if args.synth:
            if args.pairs < 1:
                return _fail("need at least one synthetic pair", EXIT_IO)
            pairs = make_scene_pairs(args.pairs, seed=args.seed, size=args.size)
        else:
            pairs = _discover_pairs(args.dir)
            if not pairs:
                return _fail(f"no *_low/*_high pairs found in {args.dir}", EXIT_IO)
    except _BadCsv as exc:
        return _fail(str(exc), EXIT_DATA)
    except ImageFormatError as exc:
        return _fail(str(exc), EXIT_IO)
    except ValueError as exc:
        return _fail(str(exc), EXIT_USAGE)

    rows = run_benchmark(pairs, cfg=PipelineConfig().with_seed(args.seed))
    outdir = Path(args.out)
    summary = {
        "schema": 1,
        "pairs": len(pairs),
        "seed": args.seed,
        "rows": [
            {
                "method": row.method,
                "interp": row.interp,
                "ssim": _json_float(row.ssim),
                "psnr_db": _json_float(row.psnr_db),
                "reproj_px": _json_float(row.reprojection_error_px),
                "status": row.status,
            }
            for row in rows
        ],
    }
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "bench.csv").write_text(rows_to_csv(rows))
        (outdir / "bench.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        return _fail(str(exc), EXIT_IO)
    return EXIT_OK


def cmd_metrics(args) -> int:
    try:
        img1 = _load(args.image1)
        img2 = _load(args.image2)
    except ImageFormatError as exc:
        return _fail(str(exc), EXIT_IO)
    scale = Scale.EIGHTBIT if args.scale == "eightbit" else Scale.UNIT
    mode = SsimMode.WINDOWED if args.mode == "windowed" else SsimMode.GLOBAL
    try:
        ssim_val, psnr_val, mse_val = metrics_only(img1, img2, scale, mode)
    except ValueError as exc:
        return _fail(str(exc), EXIT_IO)
    _print_json(
        {"schema": 1, "ssim": ssim_val, "psnr_db": _json_float(psnr_val), "mse": mse_val}
    )
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        cfg = SceneConfig(
            size=args.size,
            n_craters=args.craters,
            sun_elevation_deg=args.elevation,
            sun_azimuth_deg=args.azimuth,
            noise_sigma=args.noise,
            seed=args.seed,
        )
    except ValueError as exc:
        return _fail(str(exc), EXIT_USAGE)
    scene = generate_crater_scene(cfg)
    out = Path(args.out)
    sidecar = {"schema": 1, "scene": asdict(cfg)}
    try:
        if out.parent != Path(""):
            out.parent.mkdir(parents=True, exist_ok=True)
        save_image(scene, str(out))
        out.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    except (ImageFormatError, OSError) as exc:
        return _fail(str(exc), EXIT_IO)
    return EXIT_OK


def cmd_geo(args) -> int:
    try:
        if args.geo_command == "haversine":
            p1 = GeoPoint(*args.src)
            p2 = GeoPoint(*args.dst)
            km = haversine_distance(p1, p2, args.radius)
            _print_json({"schema": 1, "distance_km": km})
        elif args.geo_command == "bbox":
            rows = _read_csv(args.corners, ("x", "y"))
            if len(rows) != 4:
                raise _BadCsv(f"{args.corners}: expected exactly 4 corners, got {len(rows)}")
            box = footprint_bbox(rows, bounds=args.bounds)
            _print_json(
                {"schema": 1, "x0": box[0], "y0": box[1], "x1": box[2], "y1": box[3]}
            )
        elif args.geo_command == "affine":
            rows = _read_csv(args.pairs, ("src_x", "src_y", "dst_x", "dst_y"))
            try:
                fit = estimate_affine([((r[0], r[1]), (r[2], r[3])) for r in rows])
            except (TooFewMatches, DegenerateGeometry) as exc:
                raise _BadCsv(f"{args.pairs}: {exc}") from None
            _print_json({"schema": 1, "matrix": [list(map(float, r)) for r in fit.matrix]})
        else:
            rows = _read_csv(args.grid, ("lat_deg", "lon_deg"))
            if len(rows) % args.cols:
                raise _BadCsv(f"{args.grid}: {len(rows)} rows do not fill {args.cols} columns")
            points = [
                [GeoPoint(*rows[r * args.cols + c]) for c in range(args.cols)]
                for r in range(len(rows) // args.cols)
            ]
            grid = GeoGrid(tuple(tuple(r) for r in points), step=args.step, origin=args.origin)
            pixel, km = nearest_grid_pixel(grid, GeoPoint(*args.target))
            _print_json(
                {"schema": 1, "pixel": [pixel[0], pixel[1]], "distance_km": km}
            )
    except _BadCsv as exc:
        return _fail(str(exc), EXIT_DATA)
    except ImageFormatError as exc:
        return _fail(str(exc), EXIT_IO)
    except ValueError as exc:
        return _fail(str(exc), EXIT_DATA)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="lunareg", description="Lunar image registration toolkit.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("register", help="register image1 onto image2")
    p.add_argument("image1")
    p.add_argument("image2")
    p.add_argument("--method", choices=("sift", "orb", "intfeat"), default="sift")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--timings", action="store_true", help="include stage timings in the report")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("upscale", help="resample an image by a scale factor")
    p.add_argument("image")
    p.add_argument("--factor", type=float, required=True)
    p.add_argument("--interp", choices=("bilinear", "bicubic"), default="bicubic")
    p.add_argument("--out", default=None, help="output path (default: <stem>_upscaled<ext>)")
    p.set_defaults(func=cmd_upscale)

    p = sub.add_parser("bench", help="run the method x interpolation benchmark")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--synth", action="store_true", help="generate synthetic pairs")
    source.add_argument("--dir", help="directory of *_low/*_high image pairs")
    p.add_argument("--pairs", type=int, default=5, help="synthetic pair count")
    p.add_argument("--size", type=int, default=512, help="synthetic scene size")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default=".", help="output directory for bench.csv/bench.json")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("metrics", help="print similarity metrics for two images")
    p.add_argument("image1")
    p.add_argument("image2")
    p.add_argument("--scale", choices=("unit", "eightbit"), default="eightbit")
    p.add_argument("--mode", choices=("global", "windowed"), default="windowed")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synth", help="render a synthetic crater scene")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--elevation", type=float, default=70.0, help="sun elevation in degrees")
    p.add_argument("--azimuth", type=float, default=30.0, help="sun azimuth in degrees")
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--craters", type=int, default=200)
    p.add_argument("--noise", type=float, default=0.005)
    p.add_argument("--out", default="scene.png")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("geo", help="geodetic helpers")
    geo_sub = p.add_subparsers(dest="geo_command", parser_class=_Parser)
    geo_sub.required = True

    g = geo_sub.add_parser("haversine", help="great-circle distance between two points")
    g.add_argument("--from", dest="src", type=_parse_latlon, required=True, metavar="LAT,LON")
    g.add_argument("--to", dest="dst", type=_parse_latlon, required=True, metavar="LAT,LON")
    g.add_argument("--radius", type=float, default=LUNAR_RADIUS_KM)
    g.set_defaults(func=cmd_geo)

    g = geo_sub.add_parser("bbox", help="bounding box of four footprint corners")
    g.add_argument("--corners", required=True, help="CSV with header name,x,y")
    g.add_argument("--bounds", type=_parse_pair, default=None, metavar="W,H")
    g.set_defaults(func=cmd_geo)

    g = geo_sub.add_parser("affine", help="least-squares affine fit from point pairs")
    g.add_argument("--pairs", required=True, help="CSV with header src_x,src_y,dst_x,dst_y")
    g.set_defaults(func=cmd_geo)

    g = geo_sub.add_parser("nearest", help="closest grid node to a target point")
    g.add_argument("--grid", required=True, help="row-major CSV with header name,lat_deg,lon_deg")
    g.add_argument("--cols", type=int, required=True)
    g.add_argument("--target", type=_parse_latlon, required=True, metavar="LAT,LON")
    g.add_argument("--step", type=float, default=100.0)
    g.add_argument("--origin", type=_parse_pair, default=(0.0, 0.0), metavar="X,Y")
    g.set_defaults(func=cmd_geo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
