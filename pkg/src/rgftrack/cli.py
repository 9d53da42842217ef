"""Command-line entry points: simulate, track, eval, bench."""

import argparse
import math
import os
import sys

from . import bench as benchmod
from . import metrics
from .dataio import load_config, read_records, write_dataset
from .simulate import scene_from_config, simulate_frames
from .tracking import FILTER_NAMES, FilterConfig, track_to_csv


def _cmd_simulate(args):
    cfg = load_config(args.scene) if args.scene else {}
    scene = scene_from_config(cfg, args.seed)
    write_dataset(args.out, scene.camera, scene.mesh, scene.poses_r, scene.poses_q,
                  simulate_frames(scene, args.seed),
                  extra_meta={"fps": scene.fps, "seed": args.seed})
    print(f"wrote {len(scene.poses_r)} frames to {args.out}")


def _cmd_track(args):
    cfg = FilterConfig.from_mapping(load_config(args.config)) if args.config else FilterConfig()
    name = "gf0" if args.filter == "gf_w0" else args.filter
    rows = track_to_csv(args.data, name, cfg, args.out,
                        reset_every=args.reset_every, seed=args.seed,
                        config_path=args.config or "-")
    summary = metrics.summarize(rows)
    print(f"{name}: {summary['frames']} frames, "
          f"median err {1000.0 * summary['trans'].median:.2f} mm / "
          f"{math.degrees(summary['ang'].median):.2f} deg, "
          f"median update {summary['update_ms_median']:.2f} ms -> {args.out}")


def _cmd_eval(args):
    os.makedirs(args.out, exist_ok=True)
    items = []
    for path in args.records:
        header, rows = read_records(path)
        name = os.path.splitext(os.path.basename(path))[0]
        items.append((name, metrics.summarize(rows)))
        trans, ang = metrics.errors_from_rows(rows)
        comment = " ".join(f"{k}={v}" for k, v in header.items())
        for label, err in (("trans", trans), ("ang", ang)):
            edges, counts = metrics.histogram(err)
            metrics.write_histogram(os.path.join(args.out, f"{name}_{label}_hist.csv"),
                                    edges, counts, comment)
    comment = "records=" + ",".join(args.records)
    metrics.write_summary_table(os.path.join(args.out, "stats.csv"), items, comment)
    print(f"wrote stats for {len(items)} run(s) to {args.out}")


def _cmd_bench(args):
    pixels = [int(tok) for tok in args.pixels.split(",") if tok]
    rows, fits, check = benchmod.run_bench(pixels, args.reps)
    benchmod.write_bench_csv(args.out, rows, fits, check, pixels, args.reps)
    for row in rows:
        print(f"M={row['m']:>6} {row['backend']:>8}: update {row['update_ms']:.2f} ms, "
              f"sequential {row['sequential_ms']:.1f} ms")
    print(f"dense(M=100) vs factorized rel err {check:.3g} -> {args.out}")


def build_parser():
    parser = argparse.ArgumentParser(prog="rgftrack",
                                     description="6-DoF depth tracking toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a synthetic depth dataset")
    p.add_argument("--scene", default=None, help="scene config file (key=value)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("track", help="run a filter over a dataset")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--filter", default="rgf", choices=(*FILTER_NAMES, "gf_w0"))
    p.add_argument("--config", default=None, help="filter config file (key=value)")
    p.add_argument("--out", required=True, help="output record CSV")
    p.add_argument("--reset-every", type=int, default=0,
                   help="re-initialize at ground truth every k frames (0 = never)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("eval", help="summarize record CSVs")
    p.add_argument("--records", nargs="+", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="time the update at several pixel counts")
    p.add_argument("--pixels", default="768,1536,3072,6144")
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args) or 0


if __name__ == "__main__":
    sys.exit(main())
