"""The scan detector: robust two-window statistic, local maximizers, threshold.

For every scan index j in {2h, ..., n-2h} the statistic is

    D(j) = | robust_mean(Y[j+1 .. j+2h]) - robust_mean(Y[j-2h+1 .. j]) |

with both window means computed by the contamination-robust estimator in
:mod:`arc_cpd.rume`. Estimated change points are the scan indices that are
local maximizers of D within a +-radius neighborhood (default radius 4h) and
whose value strictly exceeds the threshold lambda.

Each window owns a named substream (left window of j uses stream id 2j, the
right one 2j+1), so the scan can be evaluated in any order, in parallel or
in batches, and still reproduce bit-identical results.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import maximum_filter1d

from .core import (
    ChangePointSet,
    DegenerateScale,
    DetectionConfig,
    InfeasibleWindow,
    LambdaResolutionFailure,
    RunReport,
    SeriesTooShort,
    TimeSeries,
    mad_sigma,
    substream,
)
from .rume import effective_epsilon, trimming_span

__all__ = [
    "ManualLambda",
    "TheoreticalLambda",
    "SimulationDefaultLambda",
    "RealDataLambda",
    "RealDataHeavyTailLambda",
    "LambdaPolicy",
    "DEFAULT_C_LAMBDA",
    "resolve_lambda",
    "RunSummary",
    "AggregateReport",
    "scan_statistic",
    "local_maximizers",
    "detect",
    "detect_repeated",
    "recommend_h",
]

# Default constant for the theoretical threshold; callers tune it upward
# when stronger null suppression is needed.
DEFAULT_C_LAMBDA = 1.2


@dataclass(frozen=True)
class ManualLambda:
    """Fixed threshold supplied by the caller."""

    value: float

    def __post_init__(self):
        if self.value <= 0:
            raise ValueError("lambda must be positive")


@dataclass(frozen=True)
class TheoreticalLambda:
    """lambda = c * sigma * sqrt(eps_eff)."""

    c_lambda: float = DEFAULT_C_LAMBDA

    def __post_init__(self):
        if self.c_lambda <= 0:
            raise ValueError("c_lambda must be positive")


@dataclass(frozen=True)
class SimulationDefaultLambda:
    """lambda = max(0.6 * sigma, 8 * sigma * epsilon)."""


@dataclass(frozen=True)
class RealDataLambda:
    """lambda = max(1.2 * sigma * sqrt(5 * log(n) / h), 8 * sigma * epsilon)."""


@dataclass(frozen=True)
class RealDataHeavyTailLambda:
    """lambda = max(1.2 * sigma * sqrt(5 * log(n) / h), 8 * sigma * sqrt(epsilon))."""


LambdaPolicy = Union[ManualLambda, TheoreticalLambda, SimulationDefaultLambda,
                     RealDataLambda, RealDataHeavyTailLambda]


def resolve_lambda(policy: LambdaPolicy, *, sigma: float, epsilon: float,
                   epsilon_eff: float, h: int, n: int) -> float:
    """Concrete threshold value for a policy in a given run context."""
    if isinstance(policy, ManualLambda):
        return policy.value
    if isinstance(policy, TheoreticalLambda):
        return policy.c_lambda * sigma * math.sqrt(epsilon_eff)
    if isinstance(policy, SimulationDefaultLambda):
        return max(0.6 * sigma, 8.0 * sigma * epsilon)
    base = 1.2 * sigma * math.sqrt(5.0 * math.log(n) / h)
    if isinstance(policy, RealDataLambda):
        return max(base, 8.0 * sigma * epsilon)
    if isinstance(policy, RealDataHeavyTailLambda):
        return max(base, 8.0 * sigma * math.sqrt(epsilon))
    raise TypeError(f"unknown lambda policy: {policy!r}")


@dataclass(frozen=True)
class RunSummary:
    """Per-run digest kept by repeated detection (no scan curve)."""

    k_hat: int
    locations: tuple
    lambda_used: float
    epsilon_effective: float
    degenerate_windows: int
    seed_used: int


@dataclass(frozen=True)
class AggregateReport:
    """Aggregation of repeated randomized runs on one series.

    modal_k maximizes the histogram (smallest value on ties); the consensus
    locations are coordinatewise medians over the runs that produced the
    modal count.
    """

    runs: int
    khat_histogram: dict
    modal_k: int
    consensus_locations: ChangePointSet
    per_run: tuple


# batch size for the vectorized window pipeline; bounds peak memory at
# roughly chunk * 2h * 8 bytes per intermediate array
_CHUNK = 1024


def _rume_batch(windows: np.ndarray, stream_ids: np.ndarray, seed: int,
                span: int) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized estimator over many windows of equal width 2h.

    Bit-compatible with scalar :func:`arc_cpd.rume.rume`: same sorted-window
    canonical order, same per-window substreams, same summation order.
    Returns (estimates, degenerate flags).
    """
    m, width = windows.shape
    h = width // 2
    estimates = np.empty(m, dtype=np.float64)
    degenerate = np.zeros(m, dtype=bool)

    for start in range(0, m, _CHUNK):
        stop = min(start + _CHUNK, m)
        ws = np.sort(windows[start:stop], axis=1)
        c = stop - start
        perms = np.empty((c, width), dtype=np.int64)
        for i in range(c):
            g = substream(seed, int(stream_ids[start + i])).generator()
            perms[i] = g.permutation(width)
        z = np.take_along_axis(ws, np.sort(perms[:, :h], axis=1), axis=1)
        z_held = np.take_along_axis(ws, np.sort(perms[:, h:], axis=1), axis=1)

        widths = z[:, span:] - z[:, :h - span]
        j0 = widths.argmin(axis=1)
        rows = np.arange(c)
        low = z[rows, j0]
        high = z[rows, j0 + span]

        inside = (z_held >= low[:, None]) & (z_held <= high[:, None])
        kept = inside.sum(axis=1)
        sums = np.where(inside, z_held, 0.0).sum(axis=1)
        bad = kept == 0
        est = np.where(bad, 0.5 * (ws[:, h - 1] + ws[:, h]),
                       sums / np.maximum(kept, 1))
        estimates[start:stop] = est
        degenerate[start:stop] = bad
    return estimates, degenerate


def _resolve_delta(config: DetectionConfig, n: int) -> float:
    return config.delta if config.delta is not None else 1.0 / n


def _scan_arrays(series: TimeSeries, config: DetectionConfig,
                 mirror_ids: bool = False):
    """Scan curve as (start index, values, degenerate count).

    mirror_ids swaps the left/right stream id roles and reverses the id
    axis; it exists for the reversed-series reflection property.
    """
    x = series.values
    n = x.size
    h = config.h
    if n < 4 * h:
        raise SeriesTooShort(f"need n >= 4h = {4 * h}, got n = {n}")
    delta = _resolve_delta(config, n)
    try:
        span = trimming_span(h, config.epsilon, delta)
    except InfeasibleWindow as err:
        raise InfeasibleWindow(h, config.epsilon, delta, err.epsilon_eff,
                               err.condition_value, err.span,
                               scan_index=2 * h) from None

    js = np.arange(2 * h, n - 2 * h + 1, dtype=np.int64)
    view = sliding_window_view(x, 2 * h)
    left_ids = 2 * js
    right_ids = 2 * js + 1
    if mirror_ids:
        left_ids, right_ids = (2 * (n - js) + 1), (2 * (n - js))

    left_est, left_bad = _rume_batch(view[js - 2 * h], left_ids,
                                     config.seed, span)
    right_est, right_bad = _rume_batch(view[js], right_ids,
                                       config.seed, span)
    curve = np.abs(right_est - left_est)
    return int(js[0]), curve, int(left_bad.sum() + right_bad.sum())


def scan_statistic(series: TimeSeries, config: DetectionConfig) -> Dict[int, float]:
    """Map each scan index j in {2h, ..., n-2h} to the statistic value."""
    j0, curve, _ = _scan_arrays(series, config)
    return {j0 + i: float(v) for i, v in enumerate(curve)}


def _local_max_mask(values: np.ndarray, radius: int) -> np.ndarray:
    """Boolean mask of local maximizers with leftmost-of-tied-run rule.

    A maximizer dominates (weakly) every index at distance < radius. Within
    a maximal run of consecutive equal-valued maximizers only the first
    index survives.
    """
    # window of size 2*radius-1 centered at each index covers exactly the
    # open neighborhood; edge replication never exceeds in-domain values
    filt = maximum_filter1d(values, size=2 * radius - 1, mode="nearest")
    mask = values >= filt
    if values.size > 1:
        tied_prev = mask[1:] & mask[:-1] & (values[1:] == values[:-1])
        mask[1:] &= ~tied_prev
    return mask


def local_maximizers(curve, radius: int) -> List[int]:
    """All indices dominating their open +-radius neighborhood.

    Accepts a mapping from contiguous integer indices to values, or a plain
    sequence (then positions 0..len-1 are the indices).
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if isinstance(curve, Mapping):
        keys = sorted(curve)
        if keys and keys[-1] - keys[0] + 1 != len(keys):
            raise ValueError("curve indices must be contiguous")
        values = np.asarray([curve[k] for k in keys], dtype=np.float64)
        offset = keys[0] if keys else 0
    else:
        values = np.asarray(curve, dtype=np.float64)
        offset = 0
    if values.size == 0:
        return []
    mask = _local_max_mask(values, radius)
    return [int(i) + offset for i in np.flatnonzero(mask)]


def _resolve_sigma(series: TimeSeries, config: DetectionConfig) -> float:
    if config.sigma is not None:
        return config.sigma
    try:
        return mad_sigma(series)
    except DegenerateScale as err:
        raise LambdaResolutionFailure(
            f"automatic scale estimate failed: {err}") from err


def detect(series: TimeSeries, config: DetectionConfig,
           _mirror_ids: bool = False) -> RunReport:
    """One full detection run: scan, find maximizers, threshold strictly."""
    n = series.n
    delta = _resolve_delta(config, n)
    eps_eff = effective_epsilon(config.epsilon, delta, config.h)
    sigma = _resolve_sigma(series, config)
    lam = resolve_lambda(config.lambda_policy, sigma=sigma,
                         epsilon=config.epsilon, epsilon_eff=eps_eff,
                         h=config.h, n=n)
    if lam <= 0:
        raise LambdaResolutionFailure(f"resolved lambda {lam} is not positive")

    j0, curve, degenerate = _scan_arrays(series, config, mirror_ids=_mirror_ids)
    radius = config.maximizer_radius or 4 * config.h
    mask = _local_max_mask(curve, radius)
    detected = j0 + np.flatnonzero(mask & (curve > lam))
    return RunReport(
        scan_curve={j0 + i: float(v) for i, v in enumerate(curve)},
        estimated=ChangePointSet(tuple(int(j) for j in detected), n),
        degenerate_windows=degenerate,
        lambda_used=lam,
        epsilon_effective=eps_eff,
        seed_used=config.seed,
    )


def _summary(report: RunReport) -> RunSummary:
    return RunSummary(
        k_hat=report.estimated.k,
        locations=report.estimated.locations,
        lambda_used=report.lambda_used,
        epsilon_effective=report.epsilon_effective,
        degenerate_windows=report.degenerate_windows,
        seed_used=report.seed_used,
    )


def _lower_median(column: np.ndarray) -> int:
    ordered = np.sort(column)
    return int(ordered[(ordered.size - 1) // 2])


def detect_repeated(series: TimeSeries, config: DetectionConfig,
                    runs: int) -> AggregateReport:
    """Aggregate R randomized runs; run r uses a seed derived from (seed, r).

    The modal count breaks ties toward the smaller value. Consensus
    locations are coordinatewise lower medians over the modal-count runs,
    which keeps them integers and strictly increasing.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    summaries = []
    for r in range(1, runs + 1):
        seed_r = substream(config.seed, r).child_seed()
        summaries.append(_summary(detect(series, replace(config, seed=seed_r))))

    histogram = Counter(s.k_hat for s in summaries)
    top = max(histogram.values())
    modal_k = min(k for k, c in histogram.items() if c == top)
    modal_runs = [s for s in summaries if s.k_hat == modal_k]
    if modal_k == 0:
        consensus = ChangePointSet((), series.n)
    else:
        stacked = np.asarray([s.locations for s in modal_runs], dtype=np.int64)
        consensus = ChangePointSet(
            tuple(_lower_median(stacked[:, c]) for c in range(modal_k)),
            series.n)
    return AggregateReport(
        runs=runs,
        khat_histogram=dict(sorted(histogram.items())),
        modal_k=modal_k,
        consensus_locations=consensus,
        per_run=tuple(summaries),
    )


def _w_lower(theta: float) -> float:
    """Window growth factor 1 / (1/2 - sqrt(2*theta*(1-2*theta)))."""
    return 1.0 / (0.5 - math.sqrt(2.0 * theta * (1.0 - 2.0 * theta)))


def recommend_h(n: int, epsilon: float, kappa_over_sigma: float,
                C_prime: float = 1.0,
                C_lambda: float = DEFAULT_C_LAMBDA) -> Optional[Tuple[int, int]]:
    """Feasible window half-widths for a given problem regime.

    Returns an inclusive integer interval (both strict bounds already
    applied), intersected with [2, n // 4], or None when the regime admits
    no consistent window choice.
    """
    if not (0.0 <= epsilon < 0.5):
        raise ValueError("epsilon must lie in [0, 0.5)")
    if n < 2:
        raise ValueError("n must be >= 2")
    log_n = math.log(n)
    r = kappa_over_sigma
    if epsilon <= 0.1:
        if r <= 0:
            return None
        lower = max(10.0, 4.0 * C_lambda ** 2 / r ** 2) * C_prime * log_n
        upper = C_prime * log_n / epsilon if epsilon > 0 else math.inf
    elif r > 0 and epsilon < 0.25 * min(1.0, r ** 2 / C_lambda ** 2):
        lower = _w_lower(epsilon) * C_prime * log_n
        upper = math.inf
    else:
        return None
    lo = max(math.floor(lower) + 1, 2)
    hi = n // 4 if math.isinf(upper) else min(math.ceil(upper) - 1, n // 4)
    if lo > hi:
        return None
    return (lo, hi)
