"""Command-line interface: genmap, explore, bench, summarize."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import bench as bench_mod
from .explore import ENGINES, ExplorationConfig, explore
from .grid import write_pgm
from .mapgen import generate_structured_map, generate_unstructured_map, load_map
from .pose import Pose


def _add_genmap(sub):
    p = sub.add_parser("genmap", help="generate a synthetic ground-truth map as PGM")
    p.add_argument("--kind", choices=["structured", "unstructured"], required=True)
    p.add_argument("--width", type=float, default=24.0, help="map width in meters")
    p.add_argument("--height", type=float, default=14.0, help="map height in meters")
    p.add_argument("--res", type=float, default=0.2, help="cell resolution in meters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output PGM path")
    p.add_argument("--ascii", action="store_true", help="write P2 instead of P5")


def _add_explore(sub):
    p = sub.add_parser("explore", help="run one exploration trial, write a per-step CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--map", help="ground-truth PGM path")
    src.add_argument("--gen", choices=["structured", "unstructured"],
                     help="generate the map instead of loading one")
    p.add_argument("--width", type=float, default=24.0)
    p.add_argument("--height", type=float, default=14.0)
    p.add_argument("--res", type=float, default=0.2)
    p.add_argument("--map-seed", type=int, default=0)
    p.add_argument("--engine", choices=ENGINES, default="bki_bo")
    p.add_argument("--n", type=int, default=30, help="explicitly evaluated samples per step")
    p.add_argument("--nq", type=int, default=None, help="query samples per step (default 8N)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--ith", type=float, default=0.05,
                   help="information threshold in bits per FOV cell")
    p.add_argument("--nloop", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", default="1.2,1.2,0.0", help="start pose x,y[,heading]")
    p.add_argument("--out-dir", default=".")


def _add_bench(sub):
    p = sub.add_parser("bench", help="run a Monte Carlo experiment grid from a spec file")
    p.add_argument("--spec", required=True, help="flat key=value spec file")
    p.add_argument("--trials", type=int, default=None, help="override trial count")
    p.add_argument("--out-dir", default=None, help="override output directory")


def _add_summarize(sub):
    p = sub.add_parser("summarize", help="rebuild a summary CSV from per-run CSVs")
    p.add_argument("--in-dir", required=True)
    p.add_argument("--out", required=True)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bki-explore")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_genmap(sub)
    _add_explore(sub)
    _add_bench(sub)
    _add_summarize(sub)
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "genmap":
        gen = generate_structured_map if args.kind == "structured" else generate_unstructured_map
        truth = gen(args.width, args.height, args.res, args.seed)
        write_pgm(truth, args.out, binary=not args.ascii)
        print(f"wrote {args.out} ({truth.width_cells}x{truth.height_cells} cells, "
              f"free fraction {truth.free_fraction():.3f})")
        return 0

    if args.command == "explore":
        if args.map:
            truth = load_map(args.map, args.res)
        else:
            gen = generate_structured_map if args.gen == "structured" else generate_unstructured_map
            truth = gen(args.width, args.height, args.res, args.map_seed)
        cfg = ExplorationConfig(engine=args.engine, n_train=args.n, n_query=args.nq,
                                epochs=args.epochs, alpha=args.alpha,
                                info_threshold=args.ith, loop_limit=args.nloop,
                                seed=args.seed)
        parts = [float(s) for s in args.start.split(",")]
        start = Pose(*(parts + [0.0] * (3 - len(parts))))
        log = explore(cfg, truth, start)
        out = Path(args.out_dir) / f"{args.engine}_N{args.n}_seed{args.seed}.csv"
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        log.write_csv(out)
        last = log.records[-1] if log.records else None
        tail = (f", final entropy {last.entropy_bits:.1f} bits, coverage {last.coverage:.3f}"
                if last else "")
        print(f"wrote {out} ({len(log.records)} steps{tail})")
        return 0

    if args.command == "bench":
        spec = bench_mod.parse_spec_file(args.spec)
        if args.trials is not None:
            spec = replace(spec, trials=args.trials)
        if args.out_dir is not None:
            spec = replace(spec, out_dir=args.out_dir)
        written = bench_mod.run_experiment(spec)
        print(f"wrote {len(written)} run CSVs and summary.csv under {spec.out_dir}")
        failures = Path(spec.out_dir) / "failures.log"
        if failures.exists():
            print(f"some runs failed, see {failures}", file=sys.stderr)
            return 1
        return 0

    if args.command == "summarize":
        n = bench_mod.summarize_dir(args.in_dir, args.out)
        print(f"summarized {n} runs into {args.out}")
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
