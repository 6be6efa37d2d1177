"""Simulated series with controlled contamination, plus real-data corruption.

Every generator draws a contamination mask i.i.d. Bernoulli(eps) per index,
fills clean values from piecewise Gaussian segments, and overwrites masked
positions with the variant's contamination values. The draw order inside one
generation is fixed (mask, clean, contamination) so that results are
bit-reproducible from (spec, seed).

Block variants split the series into `blocks` equal spans of float width
M = n / blocks; span j covers positions (floor((j-1) M), floor(j M)] and its
halves meet at floor((j - 1/2) M). Exact division is expected; other lengths
work but emit a warning.

Ground truth is recorded twice: change points of the clean segment means
(truth_f) and change points of the observation expectation (truth_ey). The
two differ exactly in the adversarial variants, which is their point.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .core import (
    ChangePointSet,
    SpecInvalid,
    TimeSeries,
    mad_sigma,
    substream,
)

__all__ = [
    "Spurious",
    "Hiding",
    "Sine",
    "CauchyContam",
    "CleanSteps",
    "CorruptionRule",
    "CorruptReal",
    "AttackVariant",
    "AttackSpec",
    "LabeledSeries",
    "generate",
    "expected_value_profile",
    "atom_profile",
    "empirical_mean_profile",
    "PRESET_NAMES",
    "build_preset",
]


@dataclass(frozen=True)
class Spurious:
    """No clean changes; contamination atoms alternate -3 / +3 per half span.

    The clean law is N(0, sigma^2) everywhere, so the true segmentation is
    empty, yet the observation mean steps by 6 * epsilon at every half-span
    boundary.
    """

    epsilon: float
    blocks: int = 1
    sigma: float = 1.0


@dataclass(frozen=True)
class Hiding:
    """Clean mean alternates 0 / kappa; atoms cancel every step in expectation.

    First half of each span: clean N(0, 1) with atom at kappa / (2 eps).
    Second half: clean N(kappa, 1) with atom at kappa (1 - 1 / (2 eps)).
    Both mixtures have expectation kappa / 2, so the observation mean is
    constant even though the clean segmentation has 2 * blocks - 1 changes.
    """

    epsilon: float
    blocks: int = 2
    kappa: float = 1.0


@dataclass(frozen=True)
class Sine:
    """Step means contaminated by Gaussians whose mean drifts sinusoidally.

    Contamination at position t (1-based) is N(amplitude * sin(frequency *
    pi * t / n), sigma^2). Clean means form the alternating 0 / kappa ladder
    over the segments delimited by `truth`.
    """

    epsilon: float = 0.2
    amplitude: float = 2.0
    frequency: float = 10.0
    kappa: float = 1.2
    sigma: float = 1.0
    truth: Tuple[int, ...] = ()


@dataclass(frozen=True)
class CauchyContam:
    """Step means contaminated by heavy-tailed Cauchy(0, scale) draws."""

    epsilon: float = 0.2
    scale: float = 10.0
    kappa: float = 1.2
    sigma: float = 1.0
    truth: Tuple[int, ...] = ()


@dataclass(frozen=True)
class CleanSteps:
    """Uncontaminated piecewise Gaussian with explicit segment means."""

    means: Tuple[float, ...]
    sigma: float = 1.0
    truth: Tuple[int, ...] = ()


@dataclass(frozen=True)
class CorruptionRule:
    """Replace `count` uniform positions inside `region` by value_in_scales
    times the robust scale of the base series.

    region is 1-based inclusive (start, stop); stop None means series end.
    """

    region: Tuple[int, Optional[int]]
    count: int
    value_in_scales: float


@dataclass(frozen=True, eq=False)
class CorruptReal:
    """Deterministic corruption of a real series under positional rules."""

    base: Tuple[float, ...]
    rules: Tuple[CorruptionRule, ...]


AttackVariant = Union[Spurious, Hiding, Sine, CauchyContam, CleanSteps,
                      CorruptReal]

_BLOCK_VARIANTS = (Spurious, Hiding)


def _check_eps(eps: float) -> None:
    if not (0.0 <= eps < 0.5):
        raise SpecInvalid(f"epsilon must lie in [0, 0.5), got {eps}")


@dataclass(frozen=True, eq=False)
class AttackSpec:
    """A fully specified generation task: variant parameters, length, seed."""

    variant: AttackVariant
    n: int
    seed: int

    def __post_init__(self):
        if int(self.n) < 2:
            raise SpecInvalid("n must be an integer >= 2")
        object.__setattr__(self, "n", int(self.n))
        if not (0 <= int(self.seed) < 2 ** 64):
            raise SpecInvalid("seed must fit in uint64")
        object.__setattr__(self, "seed", int(self.seed))
        v = self.variant
        if isinstance(v, _BLOCK_VARIANTS):
            _check_eps(v.epsilon)
            if v.blocks < 1:
                raise SpecInvalid("blocks must be >= 1")
            if self.n < 2 * v.blocks:
                raise SpecInvalid("each half span needs at least one point")
            if self.n % v.blocks != 0:
                warnings.warn(
                    f"blocks = {v.blocks} does not divide n = {self.n}; "
                    "span boundaries are floored", stacklevel=3)
            if isinstance(v, Hiding):
                if v.epsilon <= 0.0:
                    raise SpecInvalid(
                        "hiding variant needs epsilon > 0: its atom value "
                        "kappa / (2 epsilon) is undefined at 0")
            if isinstance(v, Spurious) and v.sigma <= 0:
                raise SpecInvalid("sigma must be positive")
        elif isinstance(v, (Sine, CauchyContam)):
            _check_eps(v.epsilon)
            if v.sigma <= 0:
                raise SpecInvalid("sigma must be positive")
            if isinstance(v, Sine) and v.frequency <= 0:
                raise SpecInvalid("frequency must be positive")
            if isinstance(v, CauchyContam) and v.scale <= 0:
                raise SpecInvalid("scale must be positive")
            self._check_truth(v.truth)
        elif isinstance(v, CleanSteps):
            if v.sigma <= 0:
                raise SpecInvalid("sigma must be positive")
            self._check_truth(v.truth)
            if len(v.means) != len(v.truth) + 1:
                raise SpecInvalid(
                    f"{len(v.truth)} change points need "
                    f"{len(v.truth) + 1} segment means, got {len(v.means)}")
        elif isinstance(v, CorruptReal):
            if len(v.base) != self.n:
                raise SpecInvalid(
                    f"base series length {len(v.base)} != n = {self.n}")
            for rule in v.rules:
                lo, hi = rule.region
                hi = self.n if hi is None else hi
                if not (1 <= lo <= hi <= self.n):
                    raise SpecInvalid(f"rule region {rule.region} out of range")
                if rule.count < 0 or rule.count > hi - lo + 1:
                    raise SpecInvalid(
                        f"rule count {rule.count} exceeds region size")
        else:
            raise SpecInvalid(f"unknown variant {type(v).__name__}")

    def _check_truth(self, truth: Sequence[int]) -> None:
        # ChangePointSet enforces ordering and range; build it to validate
        ChangePointSet(tuple(truth), self.n)


@dataclass(frozen=True, eq=False)
class LabeledSeries:
    """Generated data plus both ground truths and the realized mask."""

    series: TimeSeries
    truth_f: ChangePointSet
    truth_ey: ChangePointSet
    contaminated_mask: np.ndarray
    spec: AttackSpec

    def __post_init__(self):
        mask = np.asarray(self.contaminated_mask, dtype=bool)
        if mask.shape != (self.series.n,):
            raise SpecInvalid("mask length must equal series length")
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "contaminated_mask", mask)


def _span_bounds(n: int, blocks: int) -> Tuple[np.ndarray, np.ndarray]:
    """(half boundaries, full boundaries) as 1-based end positions."""
    m = n / blocks
    j = np.arange(1, blocks + 1)
    half = np.floor((j - 0.5) * m).astype(np.int64)
    full = np.floor(j * m).astype(np.int64)
    return half, full


def _first_half_mask(n: int, blocks: int) -> np.ndarray:
    half, full = _span_bounds(n, blocks)
    starts = np.concatenate(([0], full[:-1]))
    out = np.zeros(n, dtype=bool)
    for s, hb in zip(starts, half):
        out[s:hb] = True
    return out


def _segment_means(n: int, cps: Sequence[int],
                   means: Sequence[float]) -> np.ndarray:
    bounds = [0, *cps, n]
    lengths = np.diff(bounds)
    return np.repeat(np.asarray(means, dtype=np.float64), lengths)


def _ladder(k: int, kappa: float) -> Tuple[float, ...]:
    return tuple(0.0 if i % 2 == 0 else kappa for i in range(k + 1))


def _alternating_truth(n: int, blocks: int) -> Tuple[int, ...]:
    half, full = _span_bounds(n, blocks)
    return tuple(int(b) for b in np.sort(np.concatenate((half, full[:-1]))))


def expected_value_profile(spec: AttackSpec) -> np.ndarray:
    """Analytic E[Y_t] per position, without sampling.

    Raises SpecInvalid for variants whose observation mean does not exist
    (Cauchy contamination) or is not a distributional quantity (real-data
    corruption).
    """
    v, n = spec.variant, spec.n
    if isinstance(v, Spurious):
        atom = np.where(_first_half_mask(n, v.blocks), -3.0, 3.0)
        return v.epsilon * atom
    if isinstance(v, Hiding):
        first = _first_half_mask(n, v.blocks)
        clean = np.where(first, 0.0, v.kappa)
        atom = np.where(first, v.kappa / (2.0 * v.epsilon),
                        v.kappa * (1.0 - 1.0 / (2.0 * v.epsilon)))
        return (1.0 - v.epsilon) * clean + v.epsilon * atom
    if isinstance(v, Sine):
        clean = _segment_means(n, v.truth, _ladder(len(v.truth), v.kappa))
        t = np.arange(1, n + 1, dtype=np.float64)
        drift = v.amplitude * np.sin(v.frequency * math.pi * t / n)
        return (1.0 - v.epsilon) * clean + v.epsilon * drift
    if isinstance(v, CleanSteps):
        return _segment_means(n, v.truth, v.means)
    raise SpecInvalid(
        f"{type(v).__name__} has no finite observation mean profile")


def atom_profile(spec: AttackSpec) -> np.ndarray:
    """Deterministic contamination value per position (atom variants only)."""
    v, n = spec.variant, spec.n
    if isinstance(v, Spurious):
        return np.where(_first_half_mask(n, v.blocks), -3.0, 3.0)
    if isinstance(v, Hiding):
        return np.where(_first_half_mask(n, v.blocks),
                        v.kappa / (2.0 * v.epsilon),
                        v.kappa * (1.0 - 1.0 / (2.0 * v.epsilon)))
    raise SpecInvalid(
        f"{type(v).__name__} contamination is not a deterministic atom")


def _clean_profile(spec: AttackSpec) -> Tuple[np.ndarray, float]:
    """(clean mean per position, clean sigma)."""
    v, n = spec.variant, spec.n
    if isinstance(v, Spurious):
        return np.zeros(n), v.sigma
    if isinstance(v, Hiding):
        return np.where(_first_half_mask(n, v.blocks), 0.0, v.kappa), 1.0
    if isinstance(v, (Sine, CauchyContam)):
        return _segment_means(n, v.truth, _ladder(len(v.truth), v.kappa)), v.sigma
    if isinstance(v, CleanSteps):
        return _segment_means(n, v.truth, v.means), v.sigma
    raise SpecInvalid(f"{type(v).__name__} has no clean profile")


def _truths(spec: AttackSpec) -> Tuple[ChangePointSet, ChangePointSet]:
    v, n = spec.variant, spec.n
    if isinstance(v, Spurious):
        # at level zero the atoms never fire and the observation mean is flat
        ey = _alternating_truth(n, v.blocks) if v.epsilon > 0 else ()
        return ChangePointSet((), n), ChangePointSet(ey, n)
    if isinstance(v, Hiding):
        return (ChangePointSet(_alternating_truth(n, v.blocks), n),
                ChangePointSet((), n))
    if isinstance(v, (Sine, CauchyContam)):
        # observation mean either drifts continuously or does not exist;
        # only the clean steps are representable as change points
        t = ChangePointSet(tuple(v.truth), n)
        return t, t
    if isinstance(v, CleanSteps):
        t = ChangePointSet(tuple(v.truth), n)
        return t, t
    return ChangePointSet((), n), ChangePointSet((), n)


def _variant_name(v: AttackVariant) -> str:
    return {
        Spurious: "spurious", Hiding: "hiding", Sine: "sine",
        CauchyContam: "cauchy", CleanSteps: "clean", CorruptReal: "corrupt",
    }[type(v)]


def generate(spec: AttackSpec) -> LabeledSeries:
    """Materialize one series from a spec; bit-reproducible from (spec, seed)."""
    v, n = spec.variant, spec.n
    g = substream(spec.seed, 0).generator()
    name = _variant_name(v)

    if isinstance(v, CorruptReal):
        values = np.asarray(v.base, dtype=np.float64).copy()
        scale = mad_sigma(values)
        mask = np.zeros(n, dtype=bool)
        for rule in v.rules:
            lo, hi = rule.region
            hi = n if hi is None else hi
            idx = g.choice(np.arange(lo - 1, hi), size=rule.count,
                           replace=False)
            values[idx] = rule.value_in_scales * scale
            mask[idx] = True
        truth_f = truth_ey = ChangePointSet((), n)
        return LabeledSeries(TimeSeries(values, name=name), truth_f,
                             truth_ey, mask, spec)

    clean_mean, sigma = _clean_profile(spec)
    eps = getattr(v, "epsilon", 0.0)
    mask = (g.random(n) < eps) if eps > 0 else np.zeros(n, dtype=bool)
    values = clean_mean + sigma * g.standard_normal(n)

    if isinstance(v, (Spurious, Hiding)):
        contam = atom_profile(spec)
    elif isinstance(v, Sine):
        t = np.arange(1, n + 1, dtype=np.float64)
        drift = v.amplitude * np.sin(v.frequency * math.pi * t / n)
        contam = drift + v.sigma * g.standard_normal(n)
    elif isinstance(v, CauchyContam):
        contam = v.scale * g.standard_cauchy(n)
    else:
        contam = values
    values = np.where(mask, contam, values)

    truth_f, truth_ey = _truths(spec)
    return LabeledSeries(TimeSeries(values, name=name), truth_f, truth_ey,
                         mask, spec)


def empirical_mean_profile(ls: LabeledSeries, reps: int) -> np.ndarray:
    """Pointwise average of `reps` fresh regenerations of ls.spec.

    Replicate r draws its seed from substream(spec.seed, r), so profiles
    are reproducible and replicates independent.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    total = np.zeros(ls.spec.n, dtype=np.float64)
    for r in range(1, reps + 1):
        seed_r = substream(ls.spec.seed, r).child_seed()
        total += generate(replace(ls.spec, seed=seed_r)).series.values
    return total / reps


PRESET_NAMES = ("spurious", "hiding", "sine", "cauchy", "clean",
                "corrupt-beijing")


def _quarter_truth(n: int) -> Tuple[int, int, int]:
    return (n // 4, n // 2, 3 * n // 4)


def build_preset(name: str, *, n: Optional[int] = None,
                 epsilon: Optional[float] = None,
                 delta_blocks: Optional[int] = None,
                 kappa: Optional[float] = None,
                 sigma: Optional[float] = None,
                 seed: int = 0,
                 base: Optional[Sequence[float]] = None) -> AttackSpec:
    """Named generator configurations with standard defaults.

    Unspecified parameters take the preset's defaults; `base` is required
    by (and only by) corrupt-beijing.
    """
    if name not in PRESET_NAMES:
        raise SpecInvalid(
            f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    if name == "corrupt-beijing":
        if base is None:
            raise SpecInvalid("corrupt-beijing needs a base series")
        nn = len(base)
        rules = (CorruptionRule((1, min(1000, nn)), 100, 3.0),
                 CorruptionRule((min(1000, nn) + 1, None), 50, 0.5))
        return AttackSpec(CorruptReal(tuple(float(x) for x in base), rules),
                          nn, seed)
    if base is not None:
        raise SpecInvalid(f"preset {name!r} does not take a base series")

    if name == "spurious":
        nn = 5000 if n is None else n
        v = Spurious(epsilon=0.1 if epsilon is None else epsilon,
                     blocks=1 if delta_blocks is None else delta_blocks,
                     sigma=1.0 if sigma is None else sigma)
    elif name == "hiding":
        nn = 5000 if n is None else n
        v = Hiding(epsilon=0.1 if epsilon is None else epsilon,
                   blocks=2 if delta_blocks is None else delta_blocks,
                   kappa=1.0 if kappa is None else kappa)
    elif name == "sine":
        nn = 3000 if n is None else n
        v = Sine(epsilon=0.2 if epsilon is None else epsilon,
                 kappa=1.2 if kappa is None else kappa,
                 sigma=1.0 if sigma is None else sigma,
                 truth=_quarter_truth(nn))
    elif name == "cauchy":
        nn = 3000 if n is None else n
        v = CauchyContam(epsilon=0.2 if epsilon is None else epsilon,
                         kappa=1.2 if kappa is None else kappa,
                         sigma=1.0 if sigma is None else sigma,
                         truth=_quarter_truth(nn))
    else:
        nn = 3000 if n is None else n
        k = 5.0 if kappa is None else kappa
        truth = _quarter_truth(nn)
        v = CleanSteps(means=_ladder(len(truth), k),
                       sigma=1.0 if sigma is None else sigma,
                       truth=truth)
    return AttackSpec(v, nn, seed)
