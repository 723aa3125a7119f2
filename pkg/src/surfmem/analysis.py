"""Scaling fits, thresholds, footprints and qubit-count projections.

The scaling model is ``p_L = alpha * (p / beta) ** (gamma * d - delta)`` for the
logical error rate per d rounds.  Lines are fit in log10 space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from surfmem.errors import AboveThresholdError, FitDomainError, InvalidParameterError, NoCrossingError
from surfmem.geometry import CodeFamily, distance_for_qubits, total_qubits
from surfmem.stats import Estimate

LN10 = math.log(10.0)
TERAQUOP = 1e-12
ROUND_SECONDS = 1e-6


@dataclass(frozen=True)
class CurvePoint:
    family: CodeFamily
    distance: int
    p: float
    estimate: Estimate  # per d rounds
    basis: str = "Z"
    order: str = ""
    shots: int = 0
    errors: int = 0

    def __post_init__(self):
        if self.p <= 0:
            raise InvalidParameterError("physical error rate must be positive")

    @property
    def usable(self) -> bool:
        return self.estimate.p_hat > 0 and self.estimate.rmse > 0

    @property
    def log10_sigma(self) -> float:
        return self.estimate.rmse / (self.estimate.p_hat * LN10)


@dataclass(frozen=True)
class LineFit:
    """``y = intercept + slope * x`` with parameter covariance."""

    slope: float
    intercept: float
    cov: tuple[tuple[float, float], tuple[float, float]]  # (slope, intercept) order
    n: int

    @property
    def slope_se(self) -> float:
        return math.sqrt(self.cov[0][0])

    @property
    def intercept_se(self) -> float:
        return math.sqrt(self.cov[1][1])

    def __call__(self, x: float) -> float:
        return self.intercept + self.slope * x

    def variance_at(self, x: float) -> float:
        return self.cov[0][0] * x * x + 2 * self.cov[0][1] * x + self.cov[1][1]


def weighted_line_fit(x: Sequence[float], y: Sequence[float], sigma: Optional[Sequence[float]] = None) -> LineFit:
    """Weighted least squares with known per-point standard deviations (unscaled covariance)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise FitDomainError("a line fit needs at least two points")
    w = np.ones_like(x) if sigma is None else 1.0 / np.asarray(sigma, dtype=float) ** 2
    A = np.stack([x, np.ones_like(x)], axis=1)
    AtWA = A.T @ (A * w[:, None])
    cov = np.linalg.inv(AtWA)
    slope, intercept = cov @ (A.T @ (w * y))
    if sigma is None:
        dof = max(x.size - 2, 1)
        resid = y - (intercept + slope * x)
        cov = cov * float(resid @ resid) / dof
    return LineFit(float(slope), float(intercept), ((cov[0, 0], cov[0, 1]), (cov[1, 0], cov[1, 1])), int(x.size))


@dataclass(frozen=True)
class FitParams:
    alpha: float
    beta: float
    gamma: float
    delta: float
    alpha_se: float = 0.0
    beta_se: float = 0.0
    gamma_se: float = 0.0
    delta_se: float = 0.0
    d_min: int = 0
    p_max: float = 1.0
    parity: str = "combined"
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def error_dimension(self, d: float) -> float:
        return self.gamma * d - self.delta

    def p_l(self, p: float, d: float) -> float:
        return self.alpha * (p / self.beta) ** self.error_dimension(d)

    def line_at(self, p: float) -> tuple[float, float]:
        """(slope, intercept) of log10 p_L against d at fixed p."""
        lr = math.log10(p / self.beta)
        return self.gamma * lr, math.log10(self.alpha) - self.delta * lr


# parameters published for the combined odd+even fits
PUBLISHED_COMBINED = {
    CodeFamily.ROTATED: FitParams(0.078, 0.00529, 0.578, 0.27, 0.004, 0.00005, 0.006, 0.08),
    CodeFamily.UNROTATED: FitParams(0.080, 0.00539, 0.700, 0.65, 0.002, 0.00004, 0.006, 0.06),
}


def _select(points: Iterable[CurvePoint], d_min: int, p_max: float, parity: str) -> dict[int, list[CurvePoint]]:
    keep: dict[int, list[CurvePoint]] = {}
    for pt in points:
        if pt.distance < d_min or pt.p > p_max or not pt.usable:
            continue
        if parity == "odd" and pt.distance % 2 == 0 or parity == "even" and pt.distance % 2 == 1:
            continue
        keep.setdefault(pt.distance, []).append(pt)
    return keep


def default_d_min(family: CodeFamily) -> int:
    return 8 if family is CodeFamily.ROTATED else 6


def fit_scaling(points: Iterable[CurvePoint], d_min: Optional[int] = None, p_max: float = 0.004,
                parity: str = "combined") -> FitParams:
    """Fit the scaling model distance by distance, then combine the per-distance lines."""
    points = list(points)
    if parity not in ("odd", "even", "combined"):
        raise InvalidParameterError(f"parity must be odd, even or combined, got {parity!r}")
    if d_min is None:
        fams = {pt.family for pt in points}
        d_min = min((default_d_min(f) for f in fams), default=0)
    groups = _select(points, d_min, p_max, parity)
    groups = {d: pts for d, pts in groups.items() if len({pt.p for pt in pts}) >= 3}
    if len(groups) < 3:
        raise FitDomainError(
            f"need at least 3 distances with 3 or more p values in the fit domain (d >= {d_min}, p <= {p_max})")

    lines: dict[int, LineFit] = {}
    for d, pts in sorted(groups.items()):
        lines[d] = weighted_line_fit(
            [math.log10(pt.p) for pt in pts],
            [math.log10(pt.estimate.p_hat) for pt in pts],
            [pt.log10_sigma for pt in pts],
        )

    # beta: least-squares closest point (X, Y) to every line y = m x + c
    M = np.zeros((2, 2))
    v = np.zeros(2)
    for ln in lines.values():
        n = np.array([ln.slope, -1.0]) / math.hypot(ln.slope, 1.0)
        M += np.outer(n, n)
        v -= n * ln.intercept / math.hypot(ln.slope, 1.0)
    X, Y = np.linalg.solve(M, v)
    perp = [abs(ln.slope * X - Y + ln.intercept) / math.hypot(ln.slope, 1.0) for ln in lines.values()]
    beta = float(10.0**X)
    beta_se = float(beta * LN10 * max(perp))

    # alpha: weighted average of each line's value at p = beta
    vals = np.array([ln(X) for ln in lines.values()])
    var = np.array([max(ln.variance_at(X), 1e-300) for ln in lines.values()])
    wts = 1.0 / var
    log_alpha = float(np.sum(wts * vals) / np.sum(wts))
    alpha = 10.0**log_alpha
    alpha_se = alpha * LN10 * math.sqrt(1.0 / np.sum(wts))

    # gamma, delta: slopes against distance, m = gamma d - delta
    ds = np.array(sorted(lines), dtype=float)
    ms = np.array([lines[int(d)].slope for d in ds])
    mvar = np.array([lines[int(d)].cov[0][0] for d in ds])
    A = np.stack([ds, -np.ones_like(ds)], axis=1)
    sol, *_ = np.linalg.lstsq(A, ms, rcond=None)
    gamma, delta = float(sol[0]), float(sol[1])
    resid = ms - A @ sol
    dof = max(ds.size - 2, 1)
    inv = np.linalg.inv(A.T @ A)
    scale = float(resid @ resid) / dof + float(np.mean(mvar))
    gamma_se = math.sqrt(scale * inv[0, 0])
    delta_se = math.sqrt(scale * inv[1, 1])
    return FitParams(alpha, beta, gamma, delta, alpha_se, beta_se, gamma_se, delta_se, d_min, p_max, parity, lines)


@dataclass(frozen=True)
class ThresholdEstimate:
    p_th: float
    low: float
    high: float
    crossings: tuple[tuple[int, int, float, float], ...]  # (d1, d2, p, sigma)


def _curve(points: Sequence[CurvePoint]):
    pts = sorted((pt for pt in points if pt.usable), key=lambda pt: pt.p)
    x = np.array([math.log10(pt.p) for pt in pts])
    y = np.array([math.log10(pt.estimate.p_hat) for pt in pts])
    s = np.array([pt.log10_sigma for pt in pts])
    return x, y, s


def _crossing(xa, ya, sa, xb, yb, sb):
    """Crossings of the log-log interpolants, with delta-method uncertainty in p."""
    grid = np.union1d(xa, xb)
    grid = grid[(grid >= max(xa[0], xb[0])) & (grid <= min(xa[-1], xb[-1]))]
    if grid.size < 2:
        return []

    def diff(ya_, yb_):
        return np.interp(grid, xb, yb_) - np.interp(grid, xa, ya_)

    base = diff(ya, yb)
    out = []
    for i in range(grid.size - 1):
        if base[i] < 0 <= base[i + 1] or base[i] > 0 >= base[i + 1] and base[i] != base[i + 1]:
            if base[i] == base[i + 1]:
                continue

            def root(ya_, yb_, i=i):
                dd = diff(ya_, yb_)
                t = dd[i] / (dd[i] - dd[i + 1])
                return grid[i] + t * (grid[i + 1] - grid[i])

            x0 = root(ya, yb)
            var = 0.0
            for arr, sig, which in ((ya, sa, 0), (yb, sb, 1)):
                for j in range(arr.size):
                    if sig[j] == 0:
                        continue
                    bumped = arr.copy()
                    h = sig[j] * 1e-3
                    bumped[j] += h
                    x1 = root(bumped, yb) if which == 0 else root(ya, bumped)
                    var += ((x1 - x0) / h * sig[j]) ** 2
            p0 = 10.0**x0
            out.append((p0, p0 * LN10 * math.sqrt(var), base[i] < 0))
    return out


def estimate_threshold(points: Iterable[CurvePoint]) -> ThresholdEstimate:
    """Weighted mean of the crossings of consecutive-distance curves."""
    by_d: dict[int, list[CurvePoint]] = {}
    for pt in points:
        by_d.setdefault(pt.distance, []).append(pt)
    ds = sorted(by_d)
    if len(ds) < 2:
        raise NoCrossingError("need at least two distances")
    crossings = []
    for d1, d2 in zip(ds, ds[1:]):
        xa, ya, sa = _curve(by_d[d1])
        xb, yb, sb = _curve(by_d[d2])
        if xa.size < 2 or xb.size < 2:
            continue
        found = _crossing(xa, ya, sa, xb, yb, sb)
        rising = [c for c in found if c[2]]
        pick = rising[0] if rising else (found[0] if found else None)
        if pick is not None:
            crossings.append((d1, d2, pick[0], pick[1]))
    if not crossings:
        raise NoCrossingError("no pair of consecutive distances straddles a crossing")
    ps = np.array([c[2] for c in crossings])
    sig = np.array([c[3] for c in crossings])
    if np.all(sig > 0):
        w = 1.0 / sig**2
        p_th = float(np.sum(w * ps) / np.sum(w))
    else:
        p_th = float(np.mean(ps))
    return ThresholdEstimate(p_th, float(ps.min()), float(ps.max()), tuple(crossings))


@dataclass(frozen=True)
class FootprintFit:
    """log10 p_L = intercept + slope * d at a fixed physical error rate."""

    family: CodeFamily
    p: float
    line: LineFit
    excluded: tuple[int, ...] = ()

    @property
    def slope(self) -> float:
        return self.line.slope

    @property
    def intercept(self) -> float:
        return self.line.intercept

    def log10_p_l(self, d: float) -> float:
        return self.line(d)

    def against_qubits(self, distances: Sequence[float]) -> list[tuple[float, float, float]]:
        """(qubit count, log10 p_L, standard error) rows for plotting."""
        return [(total_qubits(self.family, d), self.line(d), math.sqrt(self.line.variance_at(d))) for d in distances]


def footprint_fit(points: Iterable[CurvePoint], family: Optional[CodeFamily] = None,
                  d_min: int = 0) -> FootprintFit:
    points = [pt for pt in points if pt.distance >= d_min]
    if not points:
        raise FitDomainError("no points")
    ps = {pt.p for pt in points}
    if len(ps) != 1:
        raise InvalidParameterError("footprint fits take points at a single physical error rate")
    family = family or points[0].family
    usable = [pt for pt in points if pt.usable]
    excluded = tuple(sorted(pt.distance for pt in points if not pt.usable))
    if len({pt.distance for pt in usable}) < 3:
        raise FitDomainError("footprint fit needs at least 3 distances with nonzero errors")
    line = weighted_line_fit([pt.distance for pt in usable], [math.log10(pt.estimate.p_hat) for pt in usable],
                             [pt.log10_sigma for pt in usable])
    return FootprintFit(family, ps.pop(), line, excluded)


def footprint_from_params(params: FitParams, family: CodeFamily, p: float) -> FootprintFit:
    slope, intercept = params.line_at(p)
    lr = math.log10(p / params.beta)
    # first-order propagation of the parameter standard errors (treated as independent)
    var_s = (params.gamma_se * lr) ** 2 + (params.gamma * params.beta_se / (params.beta * LN10)) ** 2
    var_i = ((params.alpha_se / (params.alpha * LN10)) ** 2 + (params.delta_se * lr) ** 2
             + (params.delta * params.beta_se / (params.beta * LN10)) ** 2)
    line = LineFit(slope, intercept, ((var_s, 0.0), (0.0, var_i)), 0)
    return FootprintFit(family, p, line)


def _as_footprint(fit, family: CodeFamily, p: float) -> FootprintFit:
    if isinstance(fit, FootprintFit):
        return fit
    if isinstance(fit, FitParams):
        return footprint_from_params(fit, family, p)
    raise InvalidParameterError(f"cannot project from {type(fit).__name__}")


@dataclass(frozen=True)
class Projection:
    family: CodeFamily
    p: float
    target_p_l: float
    d_continuous: float
    d_rounded: int
    qubits_continuous: float
    qubits_rounded: int
    qubits_se: float = 0.0


def teraquop(fit, family: CodeFamily, p: float, target_p_l: float = TERAQUOP) -> Projection:
    """Distance and qubit count at which the fitted p_L per d rounds reaches ``target_p_l``."""
    fp = _as_footprint(fit, family, p)
    if fp.slope >= 0:
        raise AboveThresholdError(f"p = {p} is not below threshold for this fit (slope {fp.slope:.3g} >= 0)")
    y = math.log10(target_p_l)
    d = (y - fp.intercept) / fp.slope
    # delta method on d* = (y - a) / b
    cov = fp.line.cov
    gb = -(y - fp.intercept) / fp.slope**2
    ga = -1.0 / fp.slope
    var_d = gb * gb * cov[0][0] + 2 * ga * gb * cov[0][1] + ga * ga * cov[1][1]
    dq = (total_qubits(family, d + 1e-6) - total_qubits(family, d - 1e-6)) / 2e-6
    d_round = math.ceil(d - 1e-12)
    return Projection(family, p, target_p_l, d, d_round, total_qubits(family, d), int(total_qubits(family, d_round)),
                      abs(dq) * math.sqrt(max(var_d, 0.0)))


@dataclass(frozen=True)
class RatioProjection:
    p: float
    target_p_l: float
    ratio: float
    limit: float


def qubit_ratio(fit_rotated, fit_unrotated, p: float, target_p_l: float = TERAQUOP) -> RatioProjection:
    """Rotated over unrotated continuous qubit counts, and the limit as p_L goes to zero."""
    ro = teraquop(fit_rotated, CodeFamily.ROTATED, p, target_p_l)
    un = teraquop(fit_unrotated, CodeFamily.UNROTATED, p, target_p_l)
    s_ro = _as_footprint(fit_rotated, CodeFamily.ROTATED, p).slope
    s_un = _as_footprint(fit_unrotated, CodeFamily.UNROTATED, p).slope
    limit = 0.5 * (s_un / s_ro) ** 2
    return RatioProjection(p, target_p_l, ro.qubits_continuous / un.qubits_continuous, limit)


def memory_time(fit, family: CodeFamily, p: float, qubit_count: float, round_seconds: float = ROUND_SECONDS) -> float:
    """Seconds until the logical error probability equals the physical one, one round per ``round_seconds``."""
    fp = _as_footprint(fit, family, p)
    if fp.slope >= 0:
        raise AboveThresholdError(f"p = {p} is not below threshold for this fit")
    d = distance_for_qubits(family, qubit_count)
    if d < 2:
        raise InvalidParameterError(f"{qubit_count} qubits is below the smallest code (d = 2)")
    p_l = 10.0 ** fp.log10_p_l(d)
    if not 0 < p_l < 0.5:
        raise InvalidParameterError(f"projected p_L {p_l} is outside (0, 0.5)")
    # per-round flip probability q with (1 - 2q)^d = 1 - 2 p_L, then rounds n with (1 - 2q)^n = 1 - 2p
    log_per_round = math.log1p(-2.0 * p_l) / d
    rounds = math.log1p(-2.0 * p) / log_per_round
    return rounds * round_seconds


def synthetic_points(params: FitParams, family: CodeFamily, distances: Sequence[int], ps: Sequence[float],
                     shots: int, rng: Optional[np.random.Generator] = None) -> list[CurvePoint]:
    """Points drawn from the scaling model; binomial noise when ``rng`` is given."""
    from surfmem.stats import ShotStats, mle

    out = []
    for d in distances:
        for p in ps:
            true = params.p_l(p, d)
            k = int(rng.binomial(shots, true)) if rng is not None else int(round(true * shots))
            if rng is None:
                est = Estimate(true, true, true, math.sqrt(true * (1 - true) / shots))
            else:
                est = mle(ShotStats(shots, k))
            out.append(CurvePoint(family, d, p, est, shots=shots, errors=k))
    return out
