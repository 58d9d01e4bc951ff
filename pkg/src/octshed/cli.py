"""Command-line frontend: ``octshed segment|baseline|compare|synth|ascan``.

Exit codes: 0 success, 1 usage error (bad flag, missing input), 2 processing error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import imgcore
from .contour import ChanVeseParams
from .octsim import reconstruct_ascan, synth_interferogram, synth_phantom
from .pipeline import PipelineConfig, metrics, run_baseline, run_modified

IMAGE_SUFFIXES = (".pgm", ".png")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --------------------------------------------------------------------------- argument types


def _ranged(kind, lo=None, hi=None, lo_open=False):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} value {text!r}") from None
        if lo is not None and (value < lo or (lo_open and value == lo)):
            raise argparse.ArgumentTypeError(f"{value} is out of range (must be {'>' if lo_open else '>='} {lo})")
        if hi is not None and value > hi:
            raise argparse.ArgumentTypeError(f"{value} is out of range (must be <= {hi})")
        return value
    return parse


def _size(text):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from None
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError(f"size must be positive, got {text!r}")
    return w, h


def _reflector(text):
    try:
        f, a = text.split(":")
        return int(f), float(a)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected DEPTH_BIN:AMPLITUDE, got {text!r}") from None


def _block(text):
    if text == "full":
        return "full"
    return _ranged(int, 2)(text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="octshed", description="Marker-controlled watershed segmentation of OCT B-scans.")
    sub = parser.add_subparsers(dest="command", metavar="{segment,baseline,compare,synth,ascan}", parser_class=_Parser)
    sub.required = True

    def add_seg_flags(p, modified=True):
        p.add_argument("-i", "--input", type=Path, help="B-scan image (PGM or PNG)")
        p.add_argument("--volume", type=Path, help="directory of B-scans, each segmented independently")
        p.add_argument("-o", "--outdir", type=Path, required=True)
        p.add_argument("--truth", type=Path, help="ground-truth label PGM; adds overseg_ratio and boundary_f1")
        p.add_argument("--jobs", type=_ranged(int, 1), default=1, help="parallel slices in --volume mode")
        p.add_argument("--conn", choices=["four", "eight"], default="four")
        p.add_argument("--flood-on", choices=["gradient", "raw"], default="gradient")
        p.add_argument("--dump-intermediates", action="store_true")
        if modified:
            p.add_argument("--threshold", type=_ranged(float, 0, 255), default=245.0)
            p.add_argument("--objects", choices=["dark", "bright"], default="dark")
            p.add_argument("--hann-taper", action="store_true")
            p.add_argument("--hann-block", type=_block, default="full")
            p.add_argument("--fg-se-radius", type=_ranged(int, 1), default=None)
            p.add_argument("--cv-mu", type=_ranged(float, 0), default=ChanVeseParams.mu)
            p.add_argument("--cv-iters", type=_ranged(int, 1), default=ChanVeseParams.max_iters)
            p.add_argument("--cv-tol", type=_ranged(float, 0, lo_open=True), default=ChanVeseParams.tol)

    add_seg_flags(sub.add_parser("segment", help="modified watershed pipeline"))
    add_seg_flags(sub.add_parser("baseline", help="plain immersion watershed"), modified=False)
    add_seg_flags(sub.add_parser("compare", help="run both and report the timing ratio"))

    p = sub.add_parser("synth", help="write a synthetic sac phantom and its ground truth")
    p.add_argument("-o", "--outdir", type=Path, required=True)
    p.add_argument("--sacs", type=_ranged(int, 1), default=12)
    p.add_argument("--seed", type=_ranged(int, 0), default=0)
    p.add_argument("--size", type=_size, default=(512, 512), help="WIDTHxHEIGHT")
    p.add_argument("--speckle", type=_ranged(float, 0), default=0.25)
    p.add_argument("--wall", type=_ranged(float, 0, 255), default=220.0)
    p.add_argument("--sac", type=_ranged(float, 0, 255), default=40.0)

    p = sub.add_parser("ascan", help="reconstruct a depth profile from a synthetic interferogram")
    p.add_argument("-o", "--outdir", type=Path, required=True)
    p.add_argument("--n", type=_ranged(int, 2), default=1024)
    p.add_argument("--reflector", type=_reflector, action="append", default=[], help="DEPTH_BIN:AMPLITUDE, repeatable")
    p.add_argument("--window", choices=["none", "hann"], default="hann")
    p.add_argument("--noise", type=_ranged(float, 0), default=0.0)
    p.add_argument("--seed", type=_ranged(int, 0), default=0)
    p.add_argument("--keep-dc", action="store_true", help="do not subtract the sample mean before the transform")
    return parser


def parse_args(argv) -> argparse.Namespace:
    args = build_parser().parse_args(argv)
    if args.command in ("segment", "baseline", "compare"):
        if (args.input is None) == (args.volume is None):
            raise UsageError("exactly one of -i/--input or --volume is required")
        if args.input is not None and not args.input.is_file():
            raise UsageError(f"argument -i/--input: no such file {str(args.input)!r}")
        if args.volume is not None and not args.volume.is_dir():
            raise UsageError(f"argument --volume: no such directory {str(args.volume)!r}")
        if args.truth is not None and not args.truth.is_file():
            raise UsageError(f"argument --truth: no such file {str(args.truth)!r}")
    return args


def config_from_args(args) -> PipelineConfig:
    if args.command == "baseline":
        return PipelineConfig(conn=args.conn, flood_on=args.flood_on)
    cv = ChanVeseParams(mu=args.cv_mu, max_iters=args.cv_iters, tol=args.cv_tol)
    return PipelineConfig(threshold=args.threshold, fg_se_radius=args.fg_se_radius, conn=args.conn,
                          hann_taper=args.hann_taper, hann_block=args.hann_block, chan_vese=cv,
                          flood_on=args.flood_on, objects=args.objects)


# --------------------------------------------------------------------------- outputs


def write_stats(report, path) -> None:
    lines = ["label,area_px,cx,cy,x0,y0,x1,y1"]
    for s in report.region_stats:
        lines.append(f"{s.label},{s.area_px},{s.cx:.3f},{s.cy:.3f},{s.x0},{s.y0},{s.x1},{s.y1}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_report(report, img, outdir: Path, dump: bool) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    imgcore.write_label_pgm(report.labels, outdir / "labels.pgm")
    imgcore.write_label_png(report.labels, outdir / "labels.png")
    write_stats(report, outdir / "stats.csv")
    if not dump:
        return
    inter = report.intermediates
    if "binary" in inter:
        imgcore.write_gray_png(inter["binary"] * 255.0, outdir / "binary.png")
    grad = inter["gradient"]
    top = grad.max()
    imgcore.write_gray_png(grad * (255.0 / top) if top > 0 else grad, outdir / "gradient.png")
    imgcore.write_gray_png(np.where(inter["watershed_lines"], 255.0, 0.5 * img), outdir / "lines.png")


def _segment_one(path, outdir, mode, cfg, truth_path, dump):
    img = imgcore.read_gray(path)
    truth = imgcore.read_label_pgm(truth_path) if truth_path is not None else None
    runners = {"segment": [("modified", run_modified)], "baseline": [("baseline", run_baseline)],
               "compare": [("modified", run_modified), ("baseline", run_baseline)]}[mode]
    records = []
    for name, run in runners:
        report = run(img, cfg)
        write_report(report, img, outdir / name if mode == "compare" else outdir, dump)
        records.append({"run": name, **metrics(report, truth)})
    return records


def _emit(record, slice_name=None):
    if slice_name is not None:
        record = {"slice": slice_name, **record}
    print(json.dumps(record), flush=True)


def cmd_segment(args) -> int:
    cfg = config_from_args(args)
    if args.input is not None:
        jobs = [(args.input, args.outdir, None)]
    else:
        files = sorted(p for p in args.volume.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise UsageError(f"argument --volume: no .pgm/.png images in {str(args.volume)!r}")
        jobs = [(p, args.outdir / p.stem, p.stem) for p in files]
    calls = [(path, out, args.command, cfg, args.truth, args.dump_intermediates) for path, out, _ in jobs]
    if args.jobs > 1 and len(calls) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_segment_one, *zip(*calls)))
    else:
        results = [_segment_one(*c) for c in calls]
    for (_, _, name), records in zip(jobs, results):
        for rec in records:
            _emit(rec, name)
        if args.command == "compare":
            mod, base = records
            ratio = mod["elapsed_ms"] / base["elapsed_ms"] if base["elapsed_ms"] > 0 else float("inf")
            _emit({"timing_ratio": round(ratio, 3)}, name)
    return 0


def cmd_synth(args) -> int:
    w, h = args.size
    ph = synth_phantom(w, h, args.sacs, wall_intensity=args.wall, sac_intensity=args.sac,
                       speckle_sigma=args.speckle, seed=args.seed)
    args.outdir.mkdir(parents=True, exist_ok=True)
    imgcore.write_gray_pgm(ph.image, args.outdir / "phantom.pgm")
    imgcore.write_label_pgm(ph.truth, args.outdir / "truth.pgm")
    imgcore.write_label_png(ph.truth, args.outdir / "truth.png")
    _emit({"width": w, "height": h, "n_sacs": ph.n_sacs, "seed": ph.seed})
    return 0


def cmd_ascan(args) -> int:
    scan = synth_interferogram(args.reflector, args.n, args.noise, args.seed)
    profile = reconstruct_ascan(scan, args.window, remove_dc=not args.keep_dc)
    args.outdir.mkdir(parents=True, exist_ok=True)
    rows = ["bin,magnitude"] + [f"{k},{v:.9g}" for k, v in enumerate(profile)]
    (args.outdir / "profile.csv").write_text("\n".join(rows) + "\n")
    peak = int(np.argmax(profile[1:]) + 1) if profile.size > 1 else 0
    _emit({"n": args.n, "window": args.window, "peak_bin": peak})
    return 0


COMMANDS = {"segment": cmd_segment, "baseline": cmd_segment, "compare": cmd_segment,
            "synth": cmd_synth, "ascan": cmd_ascan}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"octshed: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"octshed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
