"""Monte-Carlo harness: grid experiments, phase sweep, non-robust control.

A grid names one generator preset and value lists for its parameters; cells
are the cartesian product (or an explicit cell list), and every cell runs R
repetitions of generate -> detect -> score for each requested method:

    arc       detector fed the cell's true contamination level
    aarc      level selected per repetition by the training tournament
    baseline  plain window means, threshold 3 * sigma * sqrt(log(n) / h)

Randomness is hierarchical: master seed -> cell index -> repetition ->
(0 = generator, 1 + method index = that method's detector). Rows therefore
never depend on execution order or thread count, and run_grid output is
byte-reproducible from the master seed.

Scoring is always against the clean segment truth. Infinite Hausdorff values
(empty versus nonempty estimate) are excluded from location-error aggregates
and counted in excluded_inf.
"""

from __future__ import annotations

import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    ArcCpdError,
    ChangePointSet,
    DetectionConfig,
    RunReport,
    SeriesTooShort,
    TimeSeries,
    mad_sigma,
    substream,
)
from .detector import (
    DEFAULT_C_LAMBDA,
    SimulationDefaultLambda,
    TheoreticalLambda,
    _local_max_mask,
    detect,
)
from .metrics import hausdorff
from .rume import auto_delta
from .simgen import AttackSpec, LabeledSeries, Sine, build_preset, generate
from .tune import TournamentConfig, select_epsilon

__all__ = [
    "BENCH_CSV_HEADER",
    "SIM_DELTA",
    "ExperimentGrid",
    "GridCell",
    "BenchRow",
    "run_grid",
    "rows_to_csv",
    "rows_to_json",
    "baseline_scan",
    "phase_sweep",
    "preset_table_d1",
    "preset_table_sensitivity",
    "resolve_threads",
]

_METHODS = ("arc", "aarc", "baseline")

# Failure level used for detection inside simulation cells. The fixed
# simulation thresholds presuppose the low-trimming regime log(1/d)/h << 1,
# which the 1/n detection default does not reach at these window sizes; at
# 0.05 the kept span sits within a few order statistics of its large-h
# limit while the per-window failure budget stays meaningful. Pushing
# delta higher is counterproductive: the kept interval widens until it
# starts absorbing point-mass contamination.
SIM_DELTA = 0.05


def _sim_delta(n: int, h: int, epsilon: float) -> float:
    # at small h the feasibility fallback needs an even milder level
    return max(SIM_DELTA, auto_delta(n, h, epsilon))

BENCH_CSV_HEADER = ("preset,n,epsilon,delta_blocks,kappa,sigma,window,method,"
                    "mean_count_error,sd_count_error,median_scaled_dh,"
                    "sd_scaled_dh,hist_k_eq_K,hist_k_eq_2D1,excluded_inf")


@dataclass(frozen=True)
class GridCell:
    """One resolved parameter combination inside a grid."""

    index: int
    epsilon: float
    blocks: Optional[int]
    kappa: Optional[float]
    sigma: Optional[float]
    window: int


@dataclass(frozen=True, eq=False)
class ExperimentGrid:
    """Preset name, parameter value lists, repetition count, and methods.

    windows holds nominal full widths (2h); odd values are floored when
    halved. explicit_cells, when given, replaces the cartesian product:
    a tuple of (epsilon, blocks, kappa, sigma, window) tuples.
    """

    preset: str
    n: int
    epsilons: Tuple[Optional[float], ...] = (None,)
    blocks: Tuple[Optional[int], ...] = (None,)
    kappas: Tuple[Optional[float], ...] = (None,)
    sigmas: Tuple[Optional[float], ...] = (None,)
    windows: Tuple[int, ...] = (340,)
    reps: int = 100
    methods: Tuple[str, ...] = ("arc",)
    master_seed: int = 0
    lambda_policy: str = "sim"
    c_lambda: float = DEFAULT_C_LAMBDA
    training_points: int = 300
    explicit_cells: Optional[Tuple[Tuple, ...]] = None

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.methods:
            raise ValueError("methods must be nonempty")
        for m in self.methods:
            if m not in _METHODS:
                raise ValueError(
                    f"unknown method {m!r}; choose from {', '.join(_METHODS)}")
        if self.lambda_policy not in ("sim", "theoretical"):
            raise ValueError("lambda_policy must be 'sim' or 'theoretical'")
        if self.explicit_cells is None:
            for name in ("epsilons", "blocks", "kappas", "sigmas", "windows"):
                if not getattr(self, name):
                    raise ValueError(f"{name} must be nonempty")
        elif not self.explicit_cells:
            raise ValueError("explicit_cells must be nonempty when given")

    def cells(self) -> List[GridCell]:
        """Cells in canonical order; indices seed the per-cell streams."""
        if self.explicit_cells is not None:
            combos = self.explicit_cells
        else:
            combos = tuple(product(self.epsilons, self.blocks, self.kappas,
                                   self.sigmas, self.windows))
        return [GridCell(i, e, b, k, s, w)
                for i, (e, b, k, s, w) in enumerate(combos)]


@dataclass(frozen=True, eq=False)
class BenchRow:
    """Aggregated results of one (cell, method) pair over R repetitions."""

    preset: str
    n: int
    epsilon: Optional[float]
    delta_blocks: Optional[int]
    kappa: Optional[float]
    sigma: Optional[float]
    window: int
    method: str
    reps: int
    mean_count_error: float
    sd_count_error: float
    median_scaled_dh: float
    sd_scaled_dh: float
    mean_scaled_dh: float
    mean_signed_k_error: float
    hist_k_eq_K: int
    hist_k_eq_2D1: int
    khat_histogram: Dict[int, int]
    excluded_inf: int
    skipped: Optional[str] = None


def resolve_threads(threads: Optional[int] = None) -> int:
    """Explicit value, else the ARC_CPD_THREADS variable, else 1."""
    if threads is not None:
        if threads < 1:
            raise ValueError("threads must be >= 1")
        return threads
    raw = os.environ.get("ARC_CPD_THREADS", "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"ARC_CPD_THREADS is not an integer: {raw!r}")
        if value < 1:
            raise ValueError("ARC_CPD_THREADS must be >= 1")
        return value
    return 1


def baseline_scan(series: TimeSeries, config: DetectionConfig) -> RunReport:
    """Non-robust control: plain window means, fixed classical threshold.

    Uses config's h, maximizer radius, sigma and seed bookkeeping; the
    contamination level, delta, and lambda policy are ignored by design.
    """
    x = series.values
    n = x.size
    h = config.h
    if n < 4 * h:
        raise SeriesTooShort(f"need n >= 4h = {4 * h}, got n = {n}")
    sigma = config.sigma if config.sigma is not None else mad_sigma(series)
    lam = 3.0 * sigma * math.sqrt(math.log(n) / h)

    sums = np.concatenate(([0.0], np.cumsum(x)))
    js = np.arange(2 * h, n - 2 * h + 1)
    left = (sums[js] - sums[js - 2 * h]) / (2 * h)
    right = (sums[js + 2 * h] - sums[js]) / (2 * h)
    curve = np.abs(right - left)

    radius = config.maximizer_radius or 4 * h
    mask = _local_max_mask(curve, radius)
    detected = js[0] + np.flatnonzero(mask & (curve > lam))
    return RunReport(
        scan_curve={int(j): float(v) for j, v in zip(js, curve)},
        estimated=ChangePointSet(tuple(int(j) for j in detected), n),
        degenerate_windows=0,
        lambda_used=lam,
        epsilon_effective=0.0,
        seed_used=config.seed,
    )


def _cell_sigma(cell: GridCell) -> float:
    # hiding's clean noise scale is pinned to 1 by construction
    return cell.sigma if cell.sigma is not None else 1.0


def _cell_spec(grid: ExperimentGrid, cell: GridCell, seed: int) -> AttackSpec:
    return build_preset(grid.preset, n=grid.n, epsilon=cell.epsilon,
                        delta_blocks=cell.blocks, kappa=cell.kappa,
                        sigma=cell.sigma, seed=seed)


def _arc_policy(grid: ExperimentGrid):
    if grid.lambda_policy == "sim":
        return SimulationDefaultLambda()
    return TheoreticalLambda(grid.c_lambda)


def _run_method(method: str, ls: LabeledSeries, grid: ExperimentGrid,
                cell: GridCell, method_seed: int) -> ChangePointSet:
    h = cell.window // 2
    n = grid.n
    sigma = _cell_sigma(cell)
    detect_seed = substream(method_seed, 1).child_seed()

    if method == "baseline":
        config = DetectionConfig(h=h, epsilon=0.0,
                                 lambda_policy=_arc_policy(grid),
                                 sigma=sigma, seed=detect_seed)
        return baseline_scan(ls.series, config).estimated

    if method == "aarc":
        # the tournament reuses the detection failure level
        tc = TournamentConfig(training_range=(0, grid.training_points),
                              sigma=sigma)
        eps = select_epsilon(ls.series, tc, detection_h=h,
                             delta=_sim_delta(n, h, 0.0),
                             rng=substream(method_seed, 0))
    else:
        eps = cell.epsilon if cell.epsilon is not None else 0.0

    config = DetectionConfig(h=h, epsilon=eps,
                             lambda_policy=_arc_policy(grid),
                             delta=_sim_delta(n, h, eps),
                             sigma=sigma, seed=detect_seed)
    return detect(ls.series, config).estimated


def _aggregate(grid: ExperimentGrid, cell: GridCell, method: str,
               k_hats: List[int], abs_errs: List[int],
               signed_errs: List[int], scaled: List[float],
               truth_k: int, adv_k: int,
               skipped: Optional[str] = None) -> BenchRow:
    reps = grid.reps
    if skipped is not None:
        nan = math.nan
        return BenchRow(grid.preset, grid.n, cell.epsilon, cell.blocks,
                        cell.kappa, cell.sigma, cell.window, method, reps,
                        nan, nan, nan, nan, nan, nan, 0, 0, {}, 0,
                        skipped=skipped)
    abs_arr = np.asarray(abs_errs, dtype=np.float64)
    signed_arr = np.asarray(signed_errs, dtype=np.float64)
    scaled_arr = np.asarray(scaled, dtype=np.float64)
    finite = scaled_arr[np.isfinite(scaled_arr)]
    excluded = int(scaled_arr.size - finite.size)
    if finite.size == 0:
        med = math.inf
        sd_dh = math.nan
        mean_dh = math.inf
    else:
        med = float(np.median(finite))
        sd_dh = float(np.std(finite, ddof=1)) if finite.size > 1 else 0.0
        mean_dh = float(np.mean(finite))
    hist: Dict[int, int] = {}
    for k in k_hats:
        hist[k] = hist.get(k, 0) + 1
    return BenchRow(
        preset=grid.preset, n=grid.n, epsilon=cell.epsilon,
        delta_blocks=cell.blocks, kappa=cell.kappa, sigma=cell.sigma,
        window=cell.window, method=method, reps=reps,
        mean_count_error=float(abs_arr.mean()),
        sd_count_error=(float(abs_arr.std(ddof=1)) if reps > 1 else 0.0),
        median_scaled_dh=med,
        sd_scaled_dh=sd_dh,
        mean_scaled_dh=mean_dh,
        mean_signed_k_error=float(signed_arr.mean()),
        hist_k_eq_K=sum(1 for k in k_hats if k == truth_k),
        hist_k_eq_2D1=sum(1 for k in k_hats if k == adv_k),
        khat_histogram=dict(sorted(hist.items())),
        excluded_inf=excluded,
    )


def _run_cell(grid: ExperimentGrid, cell: GridCell) -> List[BenchRow]:
    cell_seed = substream(grid.master_seed, cell.index).child_seed()
    acc = {m: {"k": [], "abs": [], "signed": [], "scaled": []}
           for m in grid.methods}
    dead: Dict[str, str] = {}
    truth_k = adv_k = 0

    for r in range(1, grid.reps + 1):
        rep_seed = substream(cell_seed, r).child_seed()
        gen_seed = substream(rep_seed, 0).child_seed()
        ls = generate(_cell_spec(grid, cell, gen_seed))
        truth = ls.truth_f
        truth_k = truth.k
        adv_k = (2 * cell.blocks - 1) if cell.blocks else ls.truth_ey.k
        for mi, method in enumerate(grid.methods):
            if method in dead:
                continue
            m_seed = substream(rep_seed, 1 + mi).child_seed()
            try:
                est = _run_method(method, ls, grid, cell, m_seed)
            except ArcCpdError as err:
                dead[method] = str(err)
                continue
            a = acc[method]
            a["k"].append(est.k)
            a["abs"].append(abs(est.k - truth.k))
            a["signed"].append(est.k - truth.k)
            a["scaled"].append(hausdorff(est, truth) / grid.n)

    rows = []
    for method in grid.methods:
        a = acc[method]
        rows.append(_aggregate(grid, cell, method, a["k"], a["abs"],
                               a["signed"], a["scaled"], truth_k, adv_k,
                               skipped=dead.get(method)))
    return rows


def run_grid(grid: ExperimentGrid,
             threads: Optional[int] = None) -> List[BenchRow]:
    """All rows of a grid in canonical cell order, one per (cell, method)."""
    workers = resolve_threads(threads)
    cells = grid.cells()
    if workers <= 1 or len(cells) <= 1:
        nested = [_run_cell(grid, c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            nested = list(pool.map(lambda c: _run_cell(grid, c), cells))
    return [row for rows in nested for row in rows]


def _csv_num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".6g")
    return str(x)


def rows_to_csv(rows: Sequence[BenchRow]) -> str:
    out = io.StringIO()
    out.write(BENCH_CSV_HEADER + "\n")
    for r in rows:
        fields = [r.preset, r.n, r.epsilon, r.delta_blocks, r.kappa, r.sigma,
                  r.window, r.method, r.mean_count_error, r.sd_count_error,
                  r.median_scaled_dh, r.sd_scaled_dh, r.hist_k_eq_K,
                  r.hist_k_eq_2D1, r.excluded_inf]
        out.write(",".join(_csv_num(f) for f in fields) + "\n")
    return out.getvalue()


def _json_safe(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    return x


def rows_to_json(rows: Sequence[BenchRow]) -> str:
    payload = []
    for r in rows:
        d = {k: _json_safe(v) for k, v in r.__dict__.items()}
        payload.append(d)
    return json.dumps(payload, indent=2, sort_keys=True)


def phase_sweep(n: int, L: int, epsilon: float,
                kappa_grid: Sequence[float], reps: int,
                sigma: float = 1.0, h: Optional[int] = None,
                c_lambda: float = 3.0,
                master_seed: int = 0,
                threads: Optional[int] = None) -> List[Tuple[float, float]]:
    """Empirical success probability of exact recovery per jump size.

    Truth places a change every L points with segment means alternating
    0 / kappa; contamination replaces an index's draw with pure noise
    N(0, sigma^2) at rate epsilon. A repetition succeeds when the detector
    finds exactly the true number of changes, all within 2h. Detection uses
    the theoretical threshold c_lambda * sigma * sqrt(eps_eff); c_lambda
    defaults to a strong null-suppressing value so failures below the
    boundary are misses, not false alarms.

    Returns [(kappa / sigma, success rate)] in kappa_grid order.
    """
    if n % L != 0 or n // L < 2:
        raise ValueError("L must divide n into at least 2 segments")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if h is None:
        h = L // 8 - (1 if L % 8 == 0 else 0)  # keep h < L / 8 strict
    truth = tuple(range(L, n, L))

    def one_kappa(ki: int) -> Tuple[float, float]:
        kappa = float(kappa_grid[ki])
        cell_seed = substream(master_seed, ki).child_seed()
        wins = 0
        for r in range(1, reps + 1):
            rep_seed = substream(cell_seed, r).child_seed()
            gen_seed = substream(rep_seed, 0).child_seed()
            spec = AttackSpec(
                Sine(epsilon=epsilon, amplitude=0.0, frequency=1.0,
                     kappa=kappa, sigma=sigma, truth=truth), n, gen_seed)
            ls = generate(spec)
            det_seed = substream(substream(rep_seed, 1).child_seed(),
                                 1).child_seed()
            config = DetectionConfig(h=h, epsilon=epsilon,
                                     lambda_policy=TheoreticalLambda(c_lambda),
                                     delta=_sim_delta(n, h, epsilon),
                                     sigma=sigma, seed=det_seed)
            est = detect(ls.series, config).estimated
            if est.k == ls.truth_f.k and \
                    hausdorff(est, ls.truth_f) <= 2 * h:
                wins += 1
        return (kappa / sigma, wins / reps)

    workers = resolve_threads(threads)
    idx = range(len(kappa_grid))
    if workers <= 1 or len(kappa_grid) <= 1:
        return [one_kappa(i) for i in idx]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one_kappa, idx))


# Spurious-attack table: (epsilon, blocks, sigma) rows at n = 5000, 2h = 340
_TABLE_D1_CELLS = (
    (0.0, 1, 1.0),
    (0.05, 1, 1.0), (0.05, 1, 5.0), (0.05, 1, 20.0),
    (0.05, 5, 1.0), (0.05, 5, 5.0), (0.05, 5, 20.0),
    (0.1, 1, 1.0), (0.1, 1, 5.0), (0.1, 1, 20.0),
    (0.1, 2, 1.0),
    (0.1, 5, 1.0), (0.1, 5, 5.0), (0.1, 5, 20.0),
    (0.2, 1, 1.0), (0.2, 1, 5.0), (0.2, 1, 20.0),
    (0.2, 2, 1.0),
    (0.2, 5, 1.0), (0.2, 5, 5.0), (0.2, 5, 20.0),
)


def preset_table_d1(reps: int = 100, master_seed: int = 0,
                   methods: Tuple[str, ...] = ("arc", "aarc")) -> ExperimentGrid:
    """Spurious-attack table: 21 cells over (epsilon, blocks, sigma)."""
    cells = tuple((e, b, None, s, 340) for (e, b, s) in _TABLE_D1_CELLS)
    return ExperimentGrid(preset="spurious", n=5000, reps=reps,
                          methods=methods, master_seed=master_seed,
                          explicit_cells=cells)


_SENS_WINDOWS = (85, 170, 255, 340, 511)


def preset_table_sensitivity(reps: int = 100, master_seed: int = 0,
                            methods: Tuple[str, ...] = ("arc", "aarc"),
                            ) -> Tuple[ExperimentGrid, ...]:
    """Window-width sweeps: two hiding scenarios and one spurious scenario."""
    base = dict(n=5000, reps=reps, methods=methods, windows=_SENS_WINDOWS)
    return (
        ExperimentGrid(preset="hiding", epsilons=(0.1,), blocks=(2,),
                       kappas=(1.0,), master_seed=master_seed, **base),
        ExperimentGrid(preset="hiding", epsilons=(0.1,), blocks=(3,),
                       kappas=(1.0,), master_seed=master_seed + 1, **base),
        ExperimentGrid(preset="spurious", epsilons=(0.1,), blocks=(5,),
                       sigmas=(1.0,), master_seed=master_seed + 2, **base),
    )
