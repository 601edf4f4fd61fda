"""Exploration loop: action sampling, surrogate optimization, A*, backtracking.

One exploration step samples candidate actions around the robot,
explicitly evaluates a training subset, predicts MI over a larger query
pool with the configured surrogate engine, commits the best action when
it clears the information threshold (otherwise backtracks along the
committed-action stack), plans a local A* path, and integrates simulated
scans along the way.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import GroundTruthGrid, OccupancyGrid, InverseSensorModel
from .mi import action_mi
from .pose import Pose, poses_to_array, wrap_angle
from .sensor import InvalidPoseError, SensorSpec, integrate_scan, simulate_scan
from .surrogates import BKIRegressor, GPRegressor, TrainingSet

ENGINES = ("nbo", "batch_gp", "gp_bo", "batch_bki", "bki_bo")


class ExplorationStuckError(RuntimeError):
    """No feasible candidate action could be sampled around the pose."""


class PlanningError(RuntimeError):
    """A* found no traversable path between the requested cells."""


@dataclass
class ExplorationConfig:
    engine: str = "bki_bo"
    n_train: int = 30
    n_query: int | None = None        # defaults to 8 * n_train
    epochs: int | None = None         # 1 for batch engines, n_train // 2 for BO
    alpha: float = 0.5
    info_threshold: float = 0.05      # bits per FOV cell; see mi_cell_budget
    loop_limit: int = 50
    seed: int = 0
    sensor: SensorSpec = field(default_factory=lambda: SensorSpec(
        fov_rad=1.5, max_range_m=6.0, beam_step_rad=0.05))
    length_scale: float = 1.0
    zeta: float = 1e-3
    sigma2: float = 1e-4
    mu0: float = 0.0
    heading_weight: float = 0.0
    uncertainty: str = "variance"     # or "std"
    occupied_threshold: float = 0.65  # belief above this is impassable
    free_threshold: float = 0.35      # belief below this counts as free
    unknown_cost_factor: float = 2.0
    scan_stride_cells: int = 1
    sensor_model: InverseSensorModel = field(default_factory=InverseSensorModel)

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        if self.n_train < 1 or self.loop_limit < 1:
            raise ValueError("n_train and loop_limit must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.info_threshold < 0:
            raise ValueError("info_threshold must be >= 0")
        if self.uncertainty not in ("variance", "std"):
            raise ValueError("uncertainty must be 'variance' or 'std'")

    @property
    def effective_n_query(self) -> int:
        return self.n_query if self.n_query is not None else 8 * self.n_train

    @property
    def effective_epochs(self) -> int:
        if self.epochs is not None:
            return self.epochs
        return 1 if self.engine in ("batch_gp", "batch_bki", "nbo") else max(1, self.n_train // 2)


@dataclass
class StepRecord:
    step: int
    entropy_bits: float
    coverage: float
    explicit_eval_s: float
    inference_s: float
    total_s: float
    action: Pose | None
    event: str  # commit / backtrack / terminate


@dataclass
class ExplorationLog:
    method: str
    n_train: int
    trial: int
    seed: int
    records: list[StepRecord] = field(default_factory=list)
    early_stop: bool = False

    CSV_HEADER = ("method,N,trial,seed,step,entropy_bits,coverage,"
                  "explicit_eval_s,inference_s,total_s,"
                  "action_x,action_y,action_heading,event")

    def to_rows(self) -> list[str]:
        rows = []
        for r in self.records:
            ax, ay, ah = ("", "", "")
            if r.action is not None:
                ax, ay, ah = (f"{r.action.x_m:.12g}", f"{r.action.y_m:.12g}",
                              f"{r.action.heading_rad:.12g}")
            rows.append(f"{self.method},{self.n_train},{self.trial},{self.seed},{r.step},"
                        f"{r.entropy_bits:.12g},{r.coverage:.12g},"
                        f"{r.explicit_eval_s:.6g},{r.inference_s:.6g},{r.total_s:.6g},"
                        f"{ax},{ay},{ah},{r.event}")
        return rows

    def write_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.CSV_HEADER + "\n")
            for row in self.to_rows():
                f.write(row + "\n")


def sample_actions(grid: OccupancyGrid, pose: Pose, count: int, spec: SensorSpec,
                   rng: np.random.Generator,
                   occupied_threshold: float = 0.65) -> np.ndarray:
    """Sample candidate actions uniformly in the sensor's annular FOV sector.

    Positions with a believed-occupied or out-of-bounds cell are rejected;
    after 100 * count failed attempts the sector widens to a full disc.
    Each action's heading is its bearing of travel from the pose. Returns
    an (count, 3) array; raises ExplorationStuckError if nothing feasible
    remains even after the fallback.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    probs = grid.probabilities()
    out = np.empty((count, 3))
    got = 0
    attempts = 0
    full_disc = False
    while got < count:
        attempts += 1
        if not full_disc and attempts > 100 * count:
            full_disc = True
            attempts = 0
        elif full_disc and attempts > 100 * count:
            raise ExplorationStuckError("no feasible candidate actions around the pose")
        if full_disc:
            bearing = rng.uniform(-math.pi, math.pi)
        else:
            bearing = pose.heading_rad + rng.uniform(-spec.fov_rad, spec.fov_rad)
        r = rng.uniform(0.0, spec.max_range_m)
        if r == 0.0:
            continue
        x = pose.x_m + r * math.cos(bearing)
        y = pose.y_m + r * math.sin(bearing)
        if not grid.world_in_bounds(x, y):
            continue
        col, row = grid.world_to_cell(x, y)
        if probs[row, col] > occupied_threshold:
            continue
        out[got] = (x, y, wrap_angle(bearing))
        got += 1
    return out


def mi_cell_budget(spec: SensorSpec, resolution_m: float) -> int:
    """Nominal cell count of a full-range scan (beams x cells per beam).

    Raw action MI is a sum over every traversed cell of every beam, so its
    magnitude scales with the sensor geometry. Dividing by this budget puts
    it on the per-cell [0, 1]-bit scale that the information threshold uses:
    a fully known region averages ~0.03 bit/cell (saturated log odds keep a
    little residual entropy) while untouched space averages ~0.07, so a
    threshold of 0.05 separates the two. The normalization is a positive
    constant per configuration and never changes which action is best.
    """
    return spec.n_beams * max(1, int(math.floor(spec.max_range_m / resolution_m)))


def information_objective(mean, uncertainty, alpha: float):
    """Exploration-exploitation score: alpha * MI + (1 - alpha) * uncertainty."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return alpha * np.asarray(mean) + (1.0 - alpha) * np.asarray(uncertainty)


def astar(grid: OccupancyGrid, start_cell: tuple[int, int], goal_cell: tuple[int, int],
          occupied_threshold: float = 0.65, free_threshold: float = 0.35,
          unknown_cost_factor: float = 2.0) -> list[tuple[int, int]]:
    """8-connected A* over the belief grid.

    Cells believed occupied are impassable; unknown cells cost
    ``unknown_cost_factor`` times their Euclidean step length. The
    heuristic is the (admissible) Euclidean cell distance.
    """
    p = grid.probabilities()
    passable = p <= occupied_threshold
    unknown = passable & (p >= free_threshold)
    sc, sr = start_cell
    gc_, gr = goal_cell
    grid._check_cell(sc, sr)
    grid._check_cell(gc_, gr)
    if not passable[sr, sc] or not passable[gr, gc_]:
        raise PlanningError("start or goal cell is believed occupied")
    if start_cell == goal_cell:
        return [start_cell]

    w, h = grid.width_cells, grid.height_cells
    moves = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    g_cost = np.full((h, w), np.inf)
    g_cost[sr, sc] = 0.0
    parent = {}
    heap = [(math.hypot(gc_ - sc, gr - sr), 0.0, start_cell)]
    while heap:
        f, g, (c, r) = heapq.heappop(heap)
        if (c, r) == goal_cell:
            path = [goal_cell]
            while path[-1] != start_cell:
                path.append(parent[path[-1]])
            return path[::-1]
        if g > g_cost[r, c]:
            continue
        for dc, dr in moves:
            nc, nr = c + dc, r + dr
            if not (0 <= nc < w and 0 <= nr < h) or not passable[nr, nc]:
                continue
            step = math.hypot(dc, dr)
            if unknown[nr, nc]:
                step *= unknown_cost_factor
            ng = g + step
            if ng < g_cost[nr, nc]:
                g_cost[nr, nc] = ng
                parent[(nc, nr)] = (c, r)
                heapq.heappush(heap, (ng + math.hypot(gc_ - nc, gr - nr), ng, (nc, nr)))
    raise PlanningError("no traversable path between start and goal")


def _make_surrogate(cfg: ExplorationConfig, gp: bool):
    if gp:
        return GPRegressor(length_scale=cfg.length_scale, sigma2=cfg.sigma2,
                           heading_weight=cfg.heading_weight)
    return BKIRegressor(length_scale=cfg.length_scale, zeta=cfg.zeta, sigma2=cfg.sigma2,
                        mu0=cfg.mu0, heading_weight=cfg.heading_weight)


def surrogate_optimize(train: TrainingSet, queries: np.ndarray, cfg: ExplorationConfig,
                       mi_oracle, use_gp: bool):
    """Iterative surrogate optimization over a fixed query pool.

    Per epoch: fit/predict the surrogate, take the argmax of the
    information objective (ties to the lowest index); a query already in
    the training set contributes its known value, otherwise it is
    explicitly evaluated and added to both the incumbent lists and the
    training set. Returns (best_actions, best_values, explicit_s,
    inference_s).
    """
    queries = poses_to_array(queries)
    if len(queries) == 0:
        raise ValueError("queries must be non-empty")
    best_actions: list[np.ndarray] = []
    best_values: list[float] = []
    explicit_s = 0.0
    inference_s = 0.0
    for _ in range(cfg.effective_epochs):
        X, y = train.X, train.y
        t0 = time.perf_counter()
        model = _make_surrogate(cfg, use_gp)
        model.fit(X, y)
        mean, var = model.predict(queries, return_var=True)
        unc = np.sqrt(var) if cfg.uncertainty == "std" else var
        score = information_objective(mean, unc, cfg.alpha)
        s = int(np.argmax(score))
        inference_s += time.perf_counter() - t0
        xs = queries[s]
        match = np.flatnonzero((X == xs).all(axis=1)) if len(X) else np.empty(0, dtype=int)
        if len(match):
            best_actions.append(xs)
            best_values.append(float(y[match[0]]))
        else:
            t1 = time.perf_counter()
            ys = float(mi_oracle(Pose.from_array(xs)))
            explicit_s += time.perf_counter() - t1
            best_actions.append(xs)
            best_values.append(ys)
            train.add_sample(xs, ys)
    return best_actions, best_values, explicit_s, inference_s


def bki_optimize(train: TrainingSet, queries, cfg: ExplorationConfig, mi_oracle):
    """BKI-engine specialization of :func:`surrogate_optimize`."""
    return surrogate_optimize(train, queries, cfg, mi_oracle, use_gp=False)


def _traverse(grid: OccupancyGrid, truth: GroundTruthGrid, path, target: Pose,
              cfg: ExplorationConfig) -> Pose:
    """Move along a planned cell path, scanning as we go.

    One scan per traversed cell (subject to ``scan_stride_cells``), facing
    the direction of travel; the final scan happens at the target pose
    itself. If the next cell is occupied in ground truth the robot stops
    short and the reached pose becomes the new pose.
    """
    pose = None
    for i in range(1, len(path)):
        c, r = path[i]
        if truth.is_occupied(c, r):
            # belief was wrong; stop in front of the obstacle and scan
            # facing it so the blocking cell enters the belief map
            pc, pr = path[i - 1]
            x, y = grid.cell_center(pc, pr)
            pose = Pose(x, y, math.atan2(r - pr, c - pc))
            integrate_scan(grid, simulate_scan(truth, pose, cfg.sensor))
            break
        pc, pr = path[i - 1]
        heading = math.atan2(r - pr, c - pc)
        x, y = grid.cell_center(c, r)
        pose = Pose(x, y, heading)
        last = i == len(path) - 1
        if last or (i % cfg.scan_stride_cells == 0):
            integrate_scan(grid, simulate_scan(truth, pose, cfg.sensor))
    else:
        # full path traversed: settle at the exact target pose
        tc, tr = grid.world_to_cell(target.x_m, target.y_m)
        if not truth.is_occupied(tc, tr):
            pose = target
            integrate_scan(grid, simulate_scan(truth, pose, cfg.sensor))
    return pose


def explore(cfg: ExplorationConfig, truth: GroundTruthGrid, start: Pose) -> ExplorationLog:
    """Run one full exploration trial; see the module docstring for a step."""
    grid = truth.matching_belief_grid(cfg.sensor_model)
    sc, sr = truth.world_to_cell(start.x_m, start.y_m)
    if truth.is_occupied(sc, sr):
        raise InvalidPoseError("start pose lies on an occupied ground-truth cell")
    rng = np.random.default_rng(cfg.seed)
    log = ExplorationLog(method=cfg.engine, n_train=cfg.n_train, trial=0, seed=cfg.seed)

    integrate_scan(grid, simulate_scan(truth, start, cfg.sensor))
    pose = start
    stack: list[Pose] = [start]
    # raw-bits equivalent of the per-cell information threshold
    gate_bits = cfg.info_threshold * mi_cell_budget(cfg.sensor, grid.resolution_m)

    for step in range(cfg.loop_limit):
        t_step = time.perf_counter()
        probs_snapshot = grid.probabilities()  # belief is frozen while deciding

        def mi_oracle(action: Pose) -> float:
            return action_mi(grid, action, cfg.sensor, probs_snapshot).mi_bits

        explicit_s = 0.0
        inference_s = 0.0
        best_action: Pose | None = None
        best_value = -math.inf
        stuck = False
        try:
            X = sample_actions(grid, pose, cfg.n_train, cfg.sensor, rng,
                               cfg.occupied_threshold)
            t0 = time.perf_counter()
            y = np.array([mi_oracle(Pose.from_array(a)) for a in X])
            explicit_s += time.perf_counter() - t0
            queries = sample_actions(grid, pose, cfg.effective_n_query, cfg.sensor, rng,
                                     cfg.occupied_threshold)
            if cfg.engine == "nbo":
                # greedy baseline: explicitly evaluate the whole pool
                t0 = time.perf_counter()
                yq = np.array([mi_oracle(Pose.from_array(a)) for a in queries])
                explicit_s += time.perf_counter() - t0
                t0 = time.perf_counter()
                all_X = np.concatenate([X, queries])
                all_y = np.concatenate([y, yq])
                s = int(np.argmax(all_y))
                best_action = Pose.from_array(all_X[s])
                best_value = float(all_y[s])
                inference_s += time.perf_counter() - t0
            else:
                train = TrainingSet(list(X), list(y))
                acts, vals, ev_s, inf_s = surrogate_optimize(
                    train, queries, cfg, mi_oracle, use_gp=cfg.engine in ("batch_gp", "gp_bo"))
                explicit_s += ev_s
                inference_s += inf_s
                s = int(np.argmax(vals))
                best_action = Pose.from_array(acts[s])
                best_value = float(vals[s])
        except ExplorationStuckError:
            stuck = True

        event = "commit"
        target: Pose | None = None
        if not stuck and best_value > gate_bits:
            try:
                path = astar(grid, grid.world_to_cell(pose.x_m, pose.y_m),
                             grid.world_to_cell(best_action.x_m, best_action.y_m),
                             cfg.occupied_threshold, cfg.free_threshold,
                             cfg.unknown_cost_factor)
                target = best_action
            except PlanningError:
                event = "backtrack"
        else:
            event = "backtrack"

        if event == "backtrack":
            stack.pop()
            path = None
            while stack:
                try:
                    path = astar(grid, grid.world_to_cell(pose.x_m, pose.y_m),
                                 grid.world_to_cell(stack[-1].x_m, stack[-1].y_m),
                                 cfg.occupied_threshold, cfg.free_threshold,
                                 cfg.unknown_cost_factor)
                    target = stack[-1]
                    break
                except PlanningError:
                    stack.pop()
            if not stack:
                log.records.append(StepRecord(step, grid.map_entropy(),
                                              grid.coverage(truth), explicit_s,
                                              inference_s,
                                              time.perf_counter() - t_step,
                                              None, "terminate"))
                log.early_stop = True
                break

        reached = _traverse(grid, truth, path, target, cfg)
        if reached is not None:
            pose = reached
        if event == "commit":
            stack.append(pose)
        log.records.append(StepRecord(step, grid.map_entropy(), grid.coverage(truth),
                                      explicit_s, inference_s,
                                      time.perf_counter() - t_step, target, event))
    return log


def config_for_engine(engine: str, n_train: int, **overrides) -> ExplorationConfig:
    """Convenience constructor applying the benchmark defaults per engine."""
    return replace(ExplorationConfig(engine=engine, n_train=n_train), **overrides)
