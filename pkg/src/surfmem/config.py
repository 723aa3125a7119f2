"""Campaign configuration: YAML loading and validation with field paths in errors.

Schema (all keys except ``tasks`` optional)::

    seed: 0                    # master seed; batch seeds derive from it
    workers: 1                 # sampling/decoding processes
    batch_size: 65536          # shots per committed batch
    budget: 100000000          # shot budget per point
    min_errors: 20             # errors needed before a point may stop
    ladder:                    # schedule steps as [max_shots, max_errors]
      - [1000000, 100000]
      - [10000000, 1414]
      - [100000000, 20]
    output: results.csv        # result store path, relative to the config file
    tasks:
      - family: rotated        # rotated | unrotated
        distances: [3, 5, 7]
        ps: [0.004, 0.005]
        bases: [Z]             # Z | X; default [Z]
        orders: ["32013021"]   # quote orders; default: 32013021 rotated, 10231203 unrotated
        rounds: null           # default 3 * distance
        options:
          hook_study: false    # permit rotated orders with hook errors
          bypass_parallel: false
          stabiliser_swap: false
          exclude_opposite_detectors: true
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from surfmem.builder import Basis, BuildOptions
from surfmem.errors import ConfigError, InvalidParameterError
from surfmem.geometry import CnotOrder, CodeFamily, build_layout, validate_order
from surfmem.stats import DEFAULT_BUDGET, DEFAULT_MIN_ERRORS, ScheduleStep, default_ladder

DEFAULT_BATCH = 1 << 16
DEFAULT_ORDERS = {CodeFamily.ROTATED: "32013021", CodeFamily.UNROTATED: "10231203"}
OPTION_KEYS = ("hook_study", "bypass_parallel", "stabiliser_swap", "exclude_opposite_detectors")


@dataclass(frozen=True)
class TaskOptions:
    hook_study: bool = False
    bypass_parallel: bool = False
    stabiliser_swap: bool = False
    exclude_opposite_detectors: bool = True


@dataclass(frozen=True)
class PointSpec:
    """One sampled point: everything that determines its circuit."""

    family: CodeFamily
    distance: int
    p: float
    basis: Basis
    order: CnotOrder
    rounds: Optional[int] = None
    options: TaskOptions = TaskOptions()

    @property
    def order_label(self) -> str:
        """Order string as stored, with suffixes for circuit-changing options."""
        parts = [str(self.order)]
        if self.options.stabiliser_swap:
            parts.append("swap")
        if self.options.bypass_parallel:
            parts.append("bypass")
        if not self.options.exclude_opposite_detectors:
            parts.append("alldet")
        if self.rounds is not None:
            parts.append(f"r{self.rounds}")
        return "+".join(parts)

    @property
    def key(self) -> tuple:
        return (self.family.value, self.distance, self.p, self.basis.value, self.order_label)

    @property
    def key_text(self) -> str:
        return ",".join(map(str, (self.family.value, self.distance, repr(self.p), self.basis.value,
                                  self.order_label)))

    @property
    def rounds_per_distance(self) -> float:
        return (self.rounds if self.rounds is not None else 3 * self.distance) / self.distance

    def build_options(self) -> BuildOptions:
        return BuildOptions(basis=self.basis, rounds=self.rounds,
                            exclude_opposite_detectors=self.options.exclude_opposite_detectors,
                            bypass_parallel_criterion=self.options.bypass_parallel)


def parse_order_label(label: str) -> tuple[str, dict]:
    """Split a stored order label into the 8-digit order and its option flags."""
    order, *flags = label.split("+")
    out: dict[str, Any] = {}
    for f in flags:
        if f == "swap":
            out["stabiliser_swap"] = True
        elif f == "bypass":
            out["bypass_parallel"] = True
        elif f == "alldet":
            out["exclude_opposite_detectors"] = False
        elif f.startswith("r") and f[1:].isdigit():
            out["rounds"] = int(f[1:])
        else:
            raise InvalidParameterError(f"unknown order flag {f!r} in {label!r}")
    return order, out


@dataclass(frozen=True)
class CampaignConfig:
    points: tuple[PointSpec, ...]
    ladder: tuple[ScheduleStep, ...]
    seed: int = 0
    workers: int = 1
    batch_size: int = DEFAULT_BATCH
    budget: int = DEFAULT_BUDGET
    min_errors: int = DEFAULT_MIN_ERRORS
    output: Optional[Path] = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _int(value, path: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        _fail(path, f"expected an integer, got {value!r}")
    if value < minimum:
        _fail(path, f"must be >= {minimum}, got {value}")
    return int(value)


def _list(value, path: str) -> list:
    if value is None:
        return []
    if not isinstance(value, list):
        return [value]
    return value


def _parse_task(task: Any, path: str) -> list[PointSpec]:
    if not isinstance(task, dict):
        _fail(path, "expected a mapping")
    known = {"family", "distances", "ps", "bases", "orders", "rounds", "options"}
    for k in task:
        if k not in known:
            _fail(f"{path}.{k}", "unknown key")
    if "family" not in task:
        _fail(f"{path}.family", "required")
    try:
        family = CodeFamily.parse(task["family"])
    except InvalidParameterError as e:
        _fail(f"{path}.family", str(e))
    distances = [_int(d, f"{path}.distances[{i}]", 2) for i, d in enumerate(_list(task.get("distances"), ""))]
    if not distances:
        _fail(f"{path}.distances", "at least one distance required")
    ps = []
    for i, p in enumerate(_list(task.get("ps"), "")):
        if isinstance(p, bool) or not isinstance(p, (int, float)) or not 0 <= p < 0.5:
            _fail(f"{path}.ps[{i}]", f"expected a probability in [0, 0.5), got {p!r}")
        ps.append(float(p))
    if not ps:
        _fail(f"{path}.ps", "at least one p required")
    bases = []
    for i, b in enumerate(_list(task.get("bases", ["Z"]), "")):
        try:
            bases.append(Basis.parse(b))
        except InvalidParameterError as e:
            _fail(f"{path}.bases[{i}]", str(e))
    rounds = task.get("rounds")
    if rounds is not None:
        rounds = _int(rounds, f"{path}.rounds", 1)
    raw_opts = task.get("options") or {}
    if not isinstance(raw_opts, dict):
        _fail(f"{path}.options", "expected a mapping")
    for k, v in raw_opts.items():
        if k not in OPTION_KEYS:
            _fail(f"{path}.options.{k}", "unknown option")
        if not isinstance(v, bool):
            _fail(f"{path}.options.{k}", f"expected true or false, got {v!r}")
    opts = TaskOptions(**raw_opts)
    orders = []
    for i, o in enumerate(_list(task.get("orders", [DEFAULT_ORDERS[family]]), "")):
        try:
            if isinstance(o, int) and len(str(o)) != 8:
                _fail(f"{path}.orders[{i}]", "quote CNOT orders with a leading zero (YAML reads them as octal)")
            orders.append((i, CnotOrder.parse(str(o))))
        except InvalidParameterError as e:
            _fail(f"{path}.orders[{i}]", str(e))

    points = []
    for i, order in orders:
        for d in distances:
            report = validate_order(build_layout(family, d, opts.stabiliser_swap), order)
            failures = report.failures()
            if opts.hook_study:
                failures = [f for f in failures if not f.startswith("hook")]
            if opts.bypass_parallel:
                failures = [f for f in failures if "parallel" not in f]
            if failures:
                _fail(f"{path}.orders[{i}]", f"order {order} invalid at d={d}: " + "; ".join(failures))
            for p in ps:
                for b in bases:
                    points.append(PointSpec(family, d, p, b, order, rounds, opts))
    return points


def parse_config(data: Any, base_dir: Optional[Path] = None) -> CampaignConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        _fail("<root>", "expected a mapping")
    known = {"seed", "workers", "batch_size", "budget", "min_errors", "ladder", "output", "tasks"}
    for k in data:
        if k not in known:
            _fail(k, "unknown key")
    seed = _int(data.get("seed", 0), "seed")
    workers = _int(data.get("workers", 1), "workers", 1)
    batch = _int(data.get("batch_size", DEFAULT_BATCH), "batch_size", 1)
    budget = _int(data.get("budget", DEFAULT_BUDGET), "budget", 1)
    min_errors = _int(data.get("min_errors", DEFAULT_MIN_ERRORS), "min_errors", 0)
    if "ladder" in data and data["ladder"] is not None:
        steps = []
        for i, s in enumerate(_list(data["ladder"], "")):
            if not isinstance(s, (list, tuple)) or len(s) != 2:
                _fail(f"ladder[{i}]", "expected [max_shots, max_errors]")
            steps.append(ScheduleStep(_int(s[0], f"ladder[{i}][0]", 1), _int(s[1], f"ladder[{i}][1]", 0)))
        if not steps:
            _fail("ladder", "at least one step required")
        for i in range(1, len(steps)):
            if steps[i].max_shots < steps[i - 1].max_shots or steps[i].max_errors > steps[i - 1].max_errors:
                _fail(f"ladder[{i}]", "max_shots must not decrease and max_errors must not increase")
    else:
        steps = default_ladder(budget, max(min_errors, 1))
    output = data.get("output")
    if output is not None:
        if not isinstance(output, str):
            _fail("output", "expected a path string")
        output = Path(output)
        if base_dir is not None and not output.is_absolute():
            output = base_dir / output
    points: list[PointSpec] = []
    for i, task in enumerate(_list(data.get("tasks"), "")):
        points.extend(_parse_task(task, f"tasks[{i}]"))
    seen = set()
    for pt in points:
        if pt.key in seen:
            raise ConfigError(f"tasks: duplicate point {pt.key_text}")
        seen.add(pt.key)
    return CampaignConfig(tuple(points), tuple(steps), seed, workers, batch, budget, min_errors, output, data)


def load_config(path: str | Path) -> CampaignConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: not valid YAML: {e}") from None
    return parse_config(data, path.parent)
