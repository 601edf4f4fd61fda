"""Monte Carlo experiment orchestration, CSV persistence, and summaries."""

from __future__ import annotations

import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .explore import ENGINES, ExplorationConfig, ExplorationLog, explore
from .grid import GroundTruthGrid
from .mapgen import generate_structured_map, generate_unstructured_map, load_map
from .pose import Pose

WORKERS_ENV = "BKIEXPLORE_WORKERS"

SUMMARY_HEADER = ("method,N,trial,seed,steps,mean_total_s,std_total_s,"
                  "inference_share_pct,final_entropy_bits,final_coverage")


@dataclass
class ExperimentSpec:
    """One benchmark grid: a map source crossed with engines, N values, trials."""

    map_kind: str = "structured"          # structured | unstructured | pgm
    map_path: str | None = None
    width_m: float = 24.0
    height_m: float = 14.0
    resolution_m: float = 0.2
    map_seed: int = 0
    engines: tuple = ENGINES
    n_values: tuple = (30, 60)
    trials: int = 20
    seed_base: int = 0
    out_dir: str = "runs"
    start: tuple = (1.2, 1.2, 0.0)
    loop_limit: int = 50
    config: ExplorationConfig = field(default_factory=ExplorationConfig)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.engines:
            raise ValueError("engines must be non-empty")
        unknown = set(self.engines) - set(ENGINES)
        if unknown:
            raise ValueError(f"unknown engines: {sorted(unknown)}")
        if self.map_kind not in ("structured", "unstructured", "pgm"):
            raise ValueError("map_kind must be structured, unstructured, or pgm")
        if self.map_kind == "pgm" and not self.map_path:
            raise ValueError("map_kind 'pgm' requires map_path")

    def build_map(self) -> GroundTruthGrid:
        keep_clear = ((self.start[0], self.start[1]),)
        if self.map_kind == "structured":
            return generate_structured_map(self.width_m, self.height_m, self.resolution_m,
                                           self.map_seed, keep_clear)
        if self.map_kind == "unstructured":
            return generate_unstructured_map(self.width_m, self.height_m, self.resolution_m,
                                             self.map_seed, keep_clear)
        return load_map(self.map_path, self.resolution_m)


def parse_spec_file(path) -> ExperimentSpec:
    """Read a flat key=value spec file ('#' starts a comment)."""
    values: dict[str, str] = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            values[k] = v

    spec = ExperimentSpec()
    cfg_kwargs = {}
    for k, v in values.items():
        if k == "engines":
            spec = replace(spec, engines=tuple(s.strip() for s in v.split(",") if s.strip()))
        elif k == "n_values":
            spec = replace(spec, n_values=tuple(int(s) for s in v.split(",")))
        elif k == "start":
            parts = [float(s) for s in v.split(",")]
            spec = replace(spec, start=tuple(parts + [0.0] * (3 - len(parts))))
        elif k in ("map_kind", "map_path", "out_dir"):
            spec = replace(spec, **{k: v})
        elif k in ("width_m", "height_m", "resolution_m"):
            spec = replace(spec, **{k: float(v)})
        elif k in ("map_seed", "trials", "seed_base", "loop_limit"):
            spec = replace(spec, **{k: int(v)})
        elif k in ("alpha", "info_threshold", "length_scale", "zeta", "sigma2", "mu0",
                   "heading_weight", "occupied_threshold", "free_threshold",
                   "unknown_cost_factor"):
            cfg_kwargs[k] = float(v)
        elif k in ("n_query", "epochs", "scan_stride_cells"):
            cfg_kwargs[k] = int(v)
        elif k == "uncertainty":
            cfg_kwargs[k] = v
        else:
            raise ValueError(f"{path}: unknown spec key {k!r}")
    if cfg_kwargs:
        spec = replace(spec, config=replace(spec.config, **cfg_kwargs))
    return spec


def run_single(spec: ExperimentSpec, engine: str, n_train: int, trial: int) -> ExplorationLog:
    truth = spec.build_map()
    seed = spec.seed_base + trial
    cfg = replace(spec.config, engine=engine, n_train=n_train, epochs=None,
                  n_query=None, seed=seed, loop_limit=spec.loop_limit)
    log = explore(cfg, truth, Pose(*spec.start))
    log.trial = trial
    return log


def _run_job(args):
    spec, engine, n, trial = args
    log = run_single(spec, engine, n, trial)
    out = Path(spec.out_dir) / f"{engine}_N{n}_trial{trial}.csv"
    log.write_csv(out)
    return str(out)


def run_experiment(spec: ExperimentSpec) -> list[str]:
    """Run every (engine, N, trial) combination and write per-run CSVs.

    Individual run failures are recorded in failures.log and do not stop
    the experiment. Trials may run in a bounded worker pool (env var
    BKIEXPLORE_WORKERS); each trial is itself strictly sequential.
    """
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(spec, engine, n, trial)
            for engine in spec.engines for n in spec.n_values
            for trial in range(spec.trials)]
    workers = int(os.environ.get(WORKERS_ENV, "1"))
    written: list[str] = []
    failures: list[str] = []

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for job, result in zip(jobs, pool.map(_run_job_safe, jobs)):
                _collect(job, result, written, failures)
    else:
        for job in jobs:
            _collect(job, _run_job_safe(job), written, failures)

    if failures:
        with open(out_dir / "failures.log", "w") as f:
            f.write("\n".join(failures) + "\n")
    summarize_runs(written, out_dir / "summary.csv")
    return written


def _run_job_safe(args):
    try:
        return _run_job(args)
    except Exception as exc:  # recorded, experiment continues
        return exc


def _collect(job, result, written, failures):
    _, engine, n, trial = job
    if isinstance(result, Exception):
        failures.append(f"{engine} N={n} trial={trial}: {result!r}")
    else:
        written.append(result)


def read_run_csv(path) -> dict:
    """Parse one per-run CSV back into plain columns."""
    with open(path) as f:
        header = f.readline().strip().split(",")
        rows = [line.rstrip("\n").split(",") for line in f if line.strip()]
    cols = {name: [row[i] for row in rows] for i, name in enumerate(header)}
    return cols


def summarize_run(path) -> str:
    cols = read_run_csv(path)
    totals = [float(v) for v in cols["total_s"]]
    inf = [float(v) for v in cols["inference_s"]]
    share = 100.0 * sum(inf) / sum(totals) if sum(totals) > 0 else 0.0
    std = statistics.pstdev(totals) if len(totals) > 1 else 0.0
    return (f"{cols['method'][0]},{cols['N'][0]},{cols['trial'][0]},{cols['seed'][0]},"
            f"{len(totals)},{statistics.fmean(totals):.9g},{std:.9g},{share:.9g},"
            f"{cols['entropy_bits'][-1]},{cols['coverage'][-1]}")


def summarize_runs(paths, out_csv) -> None:
    with open(out_csv, "w") as f:
        f.write(SUMMARY_HEADER + "\n")
        for p in sorted(paths):
            f.write(summarize_run(p) + "\n")


def summarize_dir(in_dir, out_csv) -> int:
    """Rebuild a summary CSV from every per-run CSV in a directory."""
    paths = [p for p in Path(in_dir).glob("*.csv")
             if p.name not in ("summary.csv",) and _is_run_csv(p)]
    summarize_runs([str(p) for p in paths], out_csv)
    return len(paths)


def _is_run_csv(path) -> bool:
    with open(path) as f:
        return f.readline().strip() == ExplorationLog.CSV_HEADER
