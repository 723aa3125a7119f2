"""Binomial estimates, likelihood intervals, round conversion and the shot schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from surfmem.errors import InvalidParameterError, NoDataError

LIKELIHOOD_RATIO = 1000.0
DEFAULT_BUDGET = 10**8
DEFAULT_MIN_ERRORS = 20


@dataclass(frozen=True)
class ShotStats:
    shots: int
    errors: int
    seconds: float = 0.0

    def __post_init__(self):
        if self.shots < 0 or not 0 <= self.errors <= self.shots:
            raise InvalidParameterError(f"need 0 <= errors <= shots, got errors={self.errors}, shots={self.shots}")

    def __add__(self, other: "ShotStats") -> "ShotStats":
        return ShotStats(self.shots + other.shots, self.errors + other.errors, self.seconds + other.seconds)


@dataclass(frozen=True)
class Estimate:
    p_hat: float
    interval_low: float
    interval_high: float
    rmse: float

    def __post_init__(self):
        if not self.interval_low <= self.p_hat <= self.interval_high:
            raise InvalidParameterError("interval must contain the point estimate")


def log_likelihood(p: float, k: int, n: int) -> float:
    """Binomial log-likelihood up to the constant binomial coefficient."""
    if p <= 0.0:
        return 0.0 if k == 0 else -math.inf
    if p >= 1.0:
        return 0.0 if k == n else -math.inf
    return k * math.log(p) + (n - k) * math.log1p(-p)


def _bisect(f, lo: float, hi: float, iters: int = 200) -> float:
    """Root of ``f`` on [lo, hi] where f(lo) and f(hi) differ in sign."""
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm >= 0) == (flo >= 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(hi, 1e-300):
            break
    return 0.5 * (lo + hi)


def likelihood_interval(k: int, n: int, ratio: float = LIKELIHOOD_RATIO) -> tuple[float, float]:
    """Set of p whose binomial likelihood is within ``ratio`` of the maximum."""
    if n <= 0:
        raise NoDataError("no shots")
    p_hat = k / n
    cut = log_likelihood(p_hat, k, n) - math.log(ratio)

    def f(p: float) -> float:
        return log_likelihood(p, k, n) - cut

    low = 0.0 if k == 0 else _bisect(f, 0.0, p_hat)
    high = 1.0 if k == n else _bisect(f, p_hat, 1.0)
    return low, high


def mle(stats: ShotStats, ratio: float = LIKELIHOOD_RATIO) -> Estimate:
    if stats.shots <= 0:
        raise NoDataError("cannot estimate from zero shots")
    p = stats.errors / stats.shots
    low, high = likelihood_interval(stats.errors, stats.shots, ratio)
    return Estimate(p, min(low, p), max(high, p), math.sqrt(p * (1 - p) / stats.shots))


def xor_probability(p: float, times: float) -> float:
    """Flip probability of the XOR of ``times`` independent Bernoulli(p) variables."""
    if p >= 0.5:
        return 0.5
    return -0.5 * math.expm1(times * math.log1p(-2.0 * p))


def per_d_rounds(p_3d: float, blocks: float = 3.0) -> float:
    """Invert ``p_3d = xor of `blocks` independent copies of p``; 3 blocks by default."""
    if not 0.0 <= p_3d <= 0.5:
        raise InvalidParameterError(f"probability must lie in [0, 0.5], got {p_3d}")
    if p_3d == 0.5:
        return 0.5
    return -0.5 * math.expm1(math.log1p(-2.0 * p_3d) / blocks)


def per_d_rounds_derivative(p_3d: float, blocks: float = 3.0) -> float:
    return (1.0 - 2.0 * p_3d) ** (1.0 / blocks - 1.0) / blocks


def estimate_per_d_rounds(est: Estimate, blocks: float = 3.0) -> Estimate:
    """Map an estimate over ``blocks * d`` rounds onto d rounds (monotone, so intervals map directly)."""
    clip = lambda x: min(max(x, 0.0), 0.5)  # noqa: E731
    p = per_d_rounds(clip(est.p_hat), blocks)
    return Estimate(
        p,
        per_d_rounds(clip(est.interval_low), blocks),
        per_d_rounds(clip(est.interval_high), blocks),
        est.rmse * per_d_rounds_derivative(clip(est.p_hat), blocks) if est.p_hat < 0.5 else math.inf,
    )


@dataclass(frozen=True)
class ScheduleStep:
    max_shots: int
    max_errors: int


@dataclass(frozen=True)
class Done:
    zero_errors: bool = False
    budget_exhausted: bool = False


def default_ladder(max_shots: int = DEFAULT_BUDGET, min_errors: int = DEFAULT_MIN_ERRORS,
                   start: ScheduleStep = ScheduleStep(10**6, 10**5)) -> list[ScheduleStep]:
    """Shot ceilings growing tenfold from ``start`` to ``max_shots`` while error ceilings taper to ``min_errors``."""
    shots = [min(start.max_shots, max_shots)]
    while shots[-1] < max_shots:
        shots.append(min(shots[-1] * 10, max_shots))
    if len(shots) == 1:
        return [ScheduleStep(shots[0], max(min_errors, start.max_errors))]
    ratio = (min_errors / start.max_errors) ** (1.0 / (len(shots) - 1))
    steps = []
    for i, s in enumerate(shots):
        e = start.max_errors * ratio**i
        steps.append(ScheduleStep(int(s), max(min_errors, int(round(e)))))
    steps[-1] = ScheduleStep(steps[-1].max_shots, min_errors)
    return steps


def next_schedule_step(history: Sequence[ShotStats], ladder: Optional[Sequence[ScheduleStep]] = None,
                       budget: int = DEFAULT_BUDGET, min_errors: int = DEFAULT_MIN_ERRORS):
    """Next step for a point, or :class:`Done`.

    ``history`` holds the cumulative totals at the end of each completed step.
    """
    ladder = list(ladder) if ladder is not None else default_ladder(budget, min_errors)
    if not history:
        return ladder[0]
    last = history[-1]
    i = min(len(history) - 1, len(ladder) - 1)
    step = ladder[i]
    if last.shots >= budget:
        return Done(zero_errors=last.errors == 0, budget_exhausted=True)
    ceiling_hit = last.shots >= step.max_shots or last.errors >= step.max_errors
    if ceiling_hit and last.errors >= min_errors:
        return Done()
    if len(history) >= len(ladder):
        return Done(zero_errors=last.errors == 0)
    return ladder[len(history)]
