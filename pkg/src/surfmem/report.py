"""Plot-ready CSV reports and text summaries built from a result store or fit parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import yaml

from surfmem.analysis import (
    PUBLISHED_COMBINED,
    CurvePoint,
    FitParams,
    default_d_min,
    estimate_threshold,
    fit_scaling,
    footprint_fit,
    memory_time,
    qubit_ratio,
    teraquop,
)
from surfmem.config import parse_order_label
from surfmem.errors import (
    AboveThresholdError,
    FitDomainError,
    InvalidParameterError,
    NoCrossingError,
    NoDataError,
)
from surfmem.geometry import CodeFamily, distance_for_qubits, total_qubits
from surfmem.stats import estimate_per_d_rounds, mle
from surfmem.store import ResultRow, pooled

KINDS = ("curves", "threshold", "fit", "footprint", "teraquop", "ratio", "memory")
CURVE_COLUMNS = ("family", "distance", "p", "basis", "order", "shots", "errors", "pL_per_d", "interval_lo",
                 "interval_hi")
DEFAULT_PS = (1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 3e-3, 4e-3)
DEFAULT_TARGETS = (1e-6, 1e-9, 1e-12, 1e-15)
DEFAULT_QUBITS = (50, 100, 200, 300, 500, 700, 1000, 1500, 2000, 3000, 5000)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    return ",".join(header) + "\n" + "".join(",".join(_fmt(v) for v in r) + "\n" for r in rows)


@dataclass(frozen=True)
class ReportOutput:
    csv: str
    summary: str
    extra: dict  # file name -> content


def curve_points(rows: Iterable[ResultRow]) -> list[CurvePoint]:
    """Pooled points with estimates converted to per-d-rounds rates."""
    out = []
    for key, st in pooled(rows).items():
        family, d, p, basis, order = key
        _, flags = parse_order_label(order)
        rounds = flags.get("rounds", 3 * d)
        est = estimate_per_d_rounds(mle(st), rounds / d)
        out.append(CurvePoint(CodeFamily.parse(family), d, p, est, basis, order, st.shots, st.errors))
    out.sort(key=lambda c: (c.family.value, c.basis, c.order, c.distance, c.p))
    return out


def _groups(points: Sequence[CurvePoint]) -> dict[tuple, list[CurvePoint]]:
    out: dict[tuple, list[CurvePoint]] = {}
    for pt in points:
        out.setdefault((pt.family, pt.basis, pt.order), []).append(pt)
    return out


def _require(points: Sequence, what: str) -> None:
    if not points:
        raise NoDataError(f"no result rows match {what}")


def curves_report(points: Sequence[CurvePoint], what: str = "the filter") -> ReportOutput:
    _require(points, what)
    rows = [(pt.family.value, pt.distance, pt.p, pt.basis, pt.order, pt.shots, pt.errors, pt.estimate.p_hat,
             pt.estimate.interval_low, pt.estimate.interval_high) for pt in points]
    zero = sum(1 for pt in points if pt.errors == 0)
    summary = f"{len(points)} points, {sum(pt.shots for pt in points)} shots, {zero} with zero errors\n"
    return ReportOutput(_csv(CURVE_COLUMNS, rows), summary, {})


def threshold_report(points: Sequence[CurvePoint], what: str = "the filter") -> ReportOutput:
    _require(points, what)
    rows, crossings, lines = [], [], []
    for (family, basis, order), pts in _groups(points).items():
        label = f"{family.value} memory {basis} order {order}"
        try:
            th = estimate_threshold(pts)
        except NoCrossingError as e:
            lines.append(f"{label}: no threshold ({e})")
            continue
        rows.append((family.value, basis, order, th.p_th, th.low, th.high, len(th.crossings)))
        crossings.extend((family.value, basis, order, d1, d2, p, s) for d1, d2, p, s in th.crossings)
        lines.append(f"{label}: p_th = {th.p_th:.5g} (crossings span {th.low:.5g} to {th.high:.5g})")
    csv = _csv(("family", "basis", "order", "p_th", "p_th_lo", "p_th_hi", "crossings"), rows)
    extra = {"threshold_crossings.csv": _csv(("family", "basis", "order", "d1", "d2", "p_cross", "p_cross_se"),
                                             crossings)}
    return ReportOutput(csv, "\n".join(lines) + "\n", extra)


FIT_COLUMNS = ("family", "basis", "order", "parity", "d_min", "p_max", "alpha", "alpha_se", "beta", "beta_se",
               "gamma", "gamma_se", "delta", "delta_se")


def _fit_row(family: CodeFamily, basis: str, order: str, f: FitParams) -> tuple:
    return (family.value, basis, order, f.parity, f.d_min, f.p_max, f.alpha, f.alpha_se, f.beta, f.beta_se,
            f.gamma, f.gamma_se, f.delta, f.delta_se)


def fit_report(points: Sequence[CurvePoint], d_min: Optional[int] = None, p_max: float = 0.004,
               what: str = "the filter") -> ReportOutput:
    _require(points, what)
    rows, lines = [], []
    for (family, basis, order), pts in _groups(points).items():
        dm = default_d_min(family) if d_min is None else d_min
        for parity in ("odd", "even", "combined"):
            label = f"{family.value} memory {basis} order {order} {parity}"
            try:
                f = fit_scaling(pts, dm, p_max, parity)
            except FitDomainError as e:
                lines.append(f"{label}: no fit ({e})")
                continue
            rows.append(_fit_row(family, basis, order, f))
            lines.append(f"{label}: alpha={f.alpha:.4g}±{f.alpha_se:.2g} beta={f.beta:.5g}±{f.beta_se:.2g} "
                         f"gamma={f.gamma:.4g}±{f.gamma_se:.2g} delta={f.delta:.4g}±{f.delta_se:.2g}")
    return ReportOutput(_csv(FIT_COLUMNS, rows), "\n".join(lines) + "\n", {})


def footprint_report(points: Sequence[CurvePoint], d_min: Optional[int] = None, d_max: int = 30,
                     what: str = "the filter") -> ReportOutput:
    _require(points, what)
    rows, lines = [], []
    by_p: dict[tuple, list[CurvePoint]] = {}
    for pt in points:
        by_p.setdefault((pt.family, pt.basis, pt.order, pt.p), []).append(pt)
    for (family, basis, order, p), pts in by_p.items():
        dm = default_d_min(family) if d_min is None else d_min
        label = f"{family.value} memory {basis} order {order} p={p:g}"
        for pt in pts:
            if pt.errors > 0:
                se = pt.log10_sigma
                rows.append((family.value, basis, order, p, pt.distance,
                             int(total_qubits(family, pt.distance)), "measured", math.log10(pt.estimate.p_hat), se))
        try:
            fp = footprint_fit(pts, family, dm)
        except FitDomainError as e:
            lines.append(f"{label}: no fit ({e})")
            continue
        ds = range(2, d_max + 1)
        for d, (q, y, se) in zip(ds, fp.against_qubits(ds)):
            rows.append((family.value, basis, order, p, d, int(q), "fit", y, se))
        excl = f"; excluded zero-error d={list(fp.excluded)}" if fp.excluded else ""
        lines.append(f"{label}: log10 pL = {fp.intercept:.4g}±{fp.line.intercept_se:.2g} + "
                     f"({fp.slope:.4g}±{fp.line.slope_se:.2g}) d{excl}")
    cols = ("family", "basis", "order", "p", "distance", "qubits", "kind", "log10_pL", "log10_pL_se")
    return ReportOutput(_csv(cols, rows), "\n".join(lines) + "\n", {})


def teraquop_report(params: dict, ps: Sequence[float] = DEFAULT_PS, targets: Sequence[float] = (1e-12,)
                    ) -> ReportOutput:
    rows, lines = [], []
    for family, fit in params.items():
        for p in ps:
            for t in targets:
                try:
                    pr = teraquop(fit, family, p, t)
                except AboveThresholdError:
                    lines.append(f"{family.value} p={p:g}: above threshold")
                    continue
                rows.append((family.value, p, t, pr.d_continuous, pr.d_rounded, pr.qubits_continuous,
                             pr.qubits_rounded, pr.qubits_se))
                lines.append(f"{family.value} p={p:g} pL={t:g}: d*={pr.d_continuous:.3f}, d={pr.d_rounded}, "
                             f"{pr.qubits_rounded} qubits ({pr.qubits_continuous:.0f}±{pr.qubits_se:.0f} continuous)")
    cols = ("family", "p", "target_pL", "d_continuous", "d_rounded", "qubits_continuous", "qubits_rounded",
            "qubits_se")
    return ReportOutput(_csv(cols, rows), "\n".join(lines) + "\n", {})


def ratio_report(params: dict, ps: Sequence[float] = DEFAULT_PS, targets: Sequence[float] = DEFAULT_TARGETS
                 ) -> ReportOutput:
    ro, un = _pair(params)
    rows, lines = [], []
    for p in ps:
        limit = None
        for t in targets:
            try:
                r = qubit_ratio(ro, un, p, t)
            except AboveThresholdError:
                continue
            rows.append((p, t, r.ratio, r.limit))
            limit = r.limit
        if limit is not None:
            lines.append(f"p={p:g}: limit as pL -> 0 is {limit:.4f}")
    return ReportOutput(_csv(("p", "target_pL", "ratio", "limit"), rows), "\n".join(lines) + "\n", {})


def memory_report(params: dict, ps: Sequence[float] = (1e-3,), qubits: Sequence[float] = DEFAULT_QUBITS
                  ) -> ReportOutput:
    rows, lines = [], []
    for family, fit in params.items():
        for p in ps:
            for q in qubits:
                d = distance_for_qubits(family, q)
                try:
                    secs = memory_time(fit, family, p, q)
                except (AboveThresholdError, InvalidParameterError):
                    continue
                rows.append((family.value, p, q, d, fit.p_l(p, d), secs))
            lines.append(f"{family.value} p={p:g}: memory time over {len(qubits)} qubit counts")
    cols = ("family", "p", "qubits", "distance", "pL_per_d", "memory_seconds")
    return ReportOutput(_csv(cols, rows), "\n".join(lines) + "\n", {})


def _pair(params: dict):
    try:
        return params[CodeFamily.ROTATED], params[CodeFamily.UNROTATED]
    except KeyError:
        raise NoDataError("ratio reports need fits for both code families") from None


def load_params(source: str) -> dict:
    """``published`` for the built-in combined fits, or a YAML file keyed by family."""
    if source == "published":
        return dict(PUBLISHED_COMBINED)
    try:
        data = yaml.safe_load(Path(source).read_text())
    except OSError as e:
        raise InvalidParameterError(f"cannot read parameter file {source}: {e.strerror}") from None
    out = {}
    for fam, vals in (data or {}).items():
        try:
            out[CodeFamily.parse(fam)] = FitParams(**{k: float(v) for k, v in vals.items()})
        except TypeError as e:
            raise InvalidParameterError(f"{source}: {fam}: {e}") from None
    return out


def params_from_points(points: Sequence[CurvePoint], d_min: Optional[int] = None, p_max: float = 0.004) -> dict:
    """Combined-parity fits per family; each family must have a single (basis, order) group."""
    out = {}
    for (family, basis, order), pts in _groups(points).items():
        if family in out:
            raise InvalidParameterError(f"several basis/order groups for {family.value}; filter with --basis/--order")
        out[family] = fit_scaling(pts, default_d_min(family) if d_min is None else d_min, p_max)
    if not out:
        raise NoDataError("no points to fit")
    return out


def build_report(kind: str, points: Optional[Sequence[CurvePoint]] = None, params: Optional[dict] = None,
                 ps: Optional[Sequence[float]] = None, targets: Optional[Sequence[float]] = None,
                 qubits: Optional[Sequence[float]] = None, d_min: Optional[int] = None,
                 what: str = "the filter") -> ReportOutput:
    if kind not in KINDS:
        raise InvalidParameterError(f"unknown report kind {kind!r}; choose from {', '.join(KINDS)}")
    points = list(points or [])
    if kind == "curves":
        return curves_report(points, what)
    if kind == "threshold":
        return threshold_report(points, what)
    if kind == "fit":
        return fit_report(points, d_min, what=what)
    if kind == "footprint":
        return footprint_report(points, d_min, what=what)
    if params is None:
        _require(points, what)
        params = params_from_points(points, d_min)
    if kind == "teraquop":
        return teraquop_report(params, ps or DEFAULT_PS, targets or (1e-12,))
    if kind == "ratio":
        return ratio_report(params, ps or DEFAULT_PS, targets or DEFAULT_TARGETS)
    return memory_report(params, ps or (1e-3,), qubits or DEFAULT_QUBITS)


def write_report(out: ReportOutput, kind: str, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {f"{kind}.csv": out.csv, f"{kind}.txt": out.summary, **out.extra}
    paths = []
    for name, content in files.items():
        path = out_dir / name
        path.write_text(content)
        paths.append(path)
    return paths
