"""Command-line entry point: ``surfmem <verb> ...``.

Exit codes: 0 success, 1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from surfmem.builder import Basis, BuildOptions, build_memory_circuit
from surfmem.campaign import run_campaign
from surfmem.circuit import emit_text, parse_text
from surfmem.config import DEFAULT_ORDERS, load_config
from surfmem.decoder import decision_dump, observable_graph, predict_flips
from surfmem.dem import extract_dem, parse_dem
from surfmem.errors import SurfmemError
from surfmem.frame_sim import SampleRecord, sample
from surfmem.geometry import CodeFamily, Hook, all_orders, build_layout, valid_orders, validate_order
from surfmem.report import KINDS, build_report, curve_points, load_params, write_report
from surfmem.store import filter_rows, read_store

log = logging.getLogger("surfmem")


class UsageError(SurfmemError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _read(path: str) -> str:
    try:
        return sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _write(args, text: str) -> None:
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)


def cmd_layout(args) -> int:
    layout = build_layout(args.family, args.distance, args.swap)
    data = layout.to_dict()
    if args.orders:
        data["valid_orders"] = [str(o) for o in valid_orders(layout)]
        if layout.family is CodeFamily.ROTATED:
            hooks = {}
            for o in all_orders():
                r = validate_order(layout, o)
                if r.commutes and r.parallel and r.hook is not Hook.NONE:
                    hooks[str(o)] = r.hook.value
            data["hook_orders"] = hooks
    _write(args, json.dumps(data, indent=1) + "\n")
    return 0


def cmd_circuit(args) -> int:
    family = CodeFamily.parse(args.family)
    layout = build_layout(family, args.distance, args.swap)
    order = args.order or DEFAULT_ORDERS[family]
    opts = BuildOptions(basis=Basis.parse(args.basis), rounds=args.rounds,
                        exclude_opposite_detectors=not args.all_detectors,
                        bypass_parallel_criterion=args.bypass_parallel)
    _write(args, emit_text(build_memory_circuit(layout, order, args.p, opts)))
    return 0


def cmd_sample(args) -> int:
    if args.out in (None, "-"):
        raise UsageError("sample writes a binary dump; give --out FILE")
    circuit = parse_text(_read(args.circuit))
    rec = sample(circuit, args.shots, args.seed or 0)
    Path(args.out).write_bytes(rec.to_bytes())
    fired = rec.detector_bits().mean() if rec.shots and rec.num_detectors else 0.0
    print(f"{rec.shots} shots, {rec.num_detectors} detectors, detection fraction {fired:.6g}, "
          f"observable flip fraction {rec.observable_flips().mean() if rec.shots else 0.0:.6g}", file=sys.stderr)
    return 0


def cmd_dem(args) -> int:
    circuit = parse_text(_read(args.circuit))
    _write(args, extract_dem(circuit).to_text())
    return 0


def cmd_decode(args) -> int:
    dem = parse_dem(_read(args.dem))
    try:
        rec = SampleRecord.from_bytes(Path(args.samples).read_bytes())
    except OSError as e:
        raise UsageError(f"cannot read {args.samples}: {e.strerror}") from None
    if rec.num_detectors != dem.detector_count:
        raise UsageError(f"samples have {rec.num_detectors} detectors, model has {dem.detector_count}")
    graph = observable_graph(dem)
    bits = rec.detector_bits()
    actual = rec.observable_flips()
    if args.dump:
        _write(args, decision_dump(graph, bits, actual))
    errors = int(np.count_nonzero(predict_flips(graph, bits) != actual)) if rec.shots else 0
    rate = errors / rec.shots if rec.shots else 0.0
    print(f"shots={rec.shots} errors={errors} rate={rate:.6g}", file=sys.stderr if args.dump else sys.stdout)
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    result = run_campaign(cfg, args.out, args.workers, args.max_batches)
    done = len(result.finished)
    print(f"{result.store_path}: {result.batches_run} batches committed; {done}/{len(cfg.points)} points finished")
    return 0


def cmd_report(args) -> int:
    params = load_params(args.params) if args.params else None
    points = None
    what = "the filter"
    if args.store:
        rows = filter_rows(read_store(args.store), args.family and CodeFamily.parse(args.family).value,
                           args.basis and Basis.parse(args.basis).value, args.order)
        what = (f"family={args.family or '*'} basis={args.basis or '*'} order={args.order or '*'} "
                f"in {args.store}")
        points = curve_points(rows)
    elif params is None:
        raise UsageError("report needs --store or --params")
    out = build_report(args.kind, points, params, args.p, args.target, args.qubits, args.d_min, what)
    paths = write_report(out, args.kind, args.out or ".")
    sys.stdout.write(out.summary)
    for p in paths:
        print(f"wrote {p}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master RNG seed")
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="worker processes")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = _Parser(prog="surfmem", description="Surface-code memory experiments.", parents=[common])
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def code_args(p):
        p.add_argument("--family", required=True, choices=[f.value for f in CodeFamily])
        p.add_argument("--distance", "-d", type=int, required=True)
        p.add_argument("--swap", action="store_true", help="exchange X and Z stabiliser types")

    p = sub.add_parser("layout", parents=[common], help="print a code layout as JSON")
    code_args(p)
    p.add_argument("--orders", action="store_true", help="also list valid and hook-error CNOT orders")
    p.set_defaults(func=cmd_layout)

    p = sub.add_parser("circuit", parents=[common], help="emit a memory-experiment circuit")
    code_args(p)
    p.add_argument("--p", type=float, required=True, help="physical error rate")
    p.add_argument("--basis", default="Z", choices=["X", "Z"])
    p.add_argument("--order", help="8-digit CNOT order, X then Z")
    p.add_argument("--rounds", type=int, help="stabiliser rounds (default 3d)")
    p.add_argument("--bypass-parallel", action="store_true")
    p.add_argument("--all-detectors", action="store_true", help="keep first-round opposite-basis detectors")
    p.set_defaults(func=cmd_circuit)

    p = sub.add_parser("sample", parents=[common], help="sample detector and observable bits")
    p.add_argument("circuit", help="circuit file ('-' for stdin)")
    p.add_argument("--shots", type=int, required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("dem", parents=[common], help="extract the detector error model")
    p.add_argument("circuit", help="circuit file ('-' for stdin)")
    p.set_defaults(func=cmd_dem)

    p = sub.add_parser("decode", parents=[common], help="decode a sample dump and count logical errors")
    p.add_argument("--dem", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--dump", action="store_true", help="write per-shot decisions")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("run", parents=[common], help="run or resume a campaign from a YAML config")
    p.add_argument("config")
    p.add_argument("--max-batches", type=int, help="stop after this many committed batches")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", parents=[common], help="write plot-ready CSV reports")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--store", help="result store CSV")
    p.add_argument("--params", help="'published' or a YAML file of fit parameters per family")
    p.add_argument("--family")
    p.add_argument("--basis")
    p.add_argument("--order", help="stored order label")
    p.add_argument("--p", type=float, nargs="+", help="physical error rates for projections")
    p.add_argument("--target", type=float, nargs="+", help="target logical error rates per d rounds")
    p.add_argument("--qubits", type=float, nargs="+", help="qubit counts for memory times")
    p.add_argument("--d-min", type=int, help="smallest distance used in fits")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        for name, default in (("seed", None), ("workers", None), ("out", None), ("verbose", False)):
            if not hasattr(args, name):
                setattr(args, name, default)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except SurfmemError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
