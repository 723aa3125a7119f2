"""Resumable, deterministic sampling and decoding campaigns.

Every point (family, distance, p, basis, order) is sampled in fixed-size
batches.  Batch ``b`` of a point always uses the same seed, derived from the
master seed, the point key and ``b``, so its outcome does not depend on which
worker ran it.  Workers may run ahead speculatively, but the coordinator
commits batches of each point strictly in index order and decides after every
commit whether the point is finished.  The committed rows are therefore the
same for any worker count, and a resumed run continues exactly where the store
left off.
"""

from __future__ import annotations

import hashlib
import logging
import time
from collections import deque
from concurrent.futures import FIRST_COMPLETED, Future, ProcessPoolExecutor, wait
from dataclasses import dataclass, field
from multiprocessing import get_context
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from surfmem.builder import build_memory_circuit
from surfmem.circuit import Circuit
from surfmem.config import CampaignConfig, PointSpec
from surfmem.decoder import MatchingGraph, observable_graph, predict_flips_words
from surfmem.dem import DetectorErrorModel, extract_dem
from surfmem.errors import ConfigError, StoreError
from surfmem.frame_sim import sample_words
from surfmem.geometry import build_layout
from surfmem.stats import Done, ScheduleStep, ShotStats, next_schedule_step
from surfmem.store import ResultRow, ResultStore

log = logging.getLogger(__name__)


def batch_seed(master_seed: int, point: PointSpec, batch: int) -> int:
    digest = hashlib.sha256(point.key_text.encode()).digest()
    words = [int(master_seed) & (2**64 - 1), *np.frombuffer(digest[:16], dtype="<u4").tolist(), int(batch)]
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0])


@dataclass
class PointContext:
    """Circuit, error model and matching graph for one point; built once per process."""

    point: PointSpec
    circuit: Circuit
    dem: DetectorErrorModel
    graph: MatchingGraph

    @classmethod
    def build(cls, point: PointSpec) -> "PointContext":
        layout = build_layout(point.family, point.distance, point.options.stabiliser_swap)
        circuit = build_memory_circuit(layout, point.order, point.p, point.build_options())
        dem = extract_dem(circuit)
        return cls(point, circuit, dem, observable_graph(dem))


_CONTEXTS: dict[tuple, PointContext] = {}


def _context(point: PointSpec) -> PointContext:
    ctx = _CONTEXTS.get(point.key)
    if ctx is None:
        if len(_CONTEXTS) > 64:
            _CONTEXTS.clear()
        ctx = _CONTEXTS[point.key] = PointContext.build(point)
    return ctx


def count_logical_errors(ctx: PointContext, shots: int, seed: int) -> int:
    """Sample ``shots`` runs and count decoded observable mistakes."""
    errors = 0
    for det, obs, n in sample_words(ctx.circuit, shots, seed):
        pred = predict_flips_words(ctx.graph, det, n)
        actual = np.unpackbits(obs[0:1].astype("<u8").view(np.uint8), bitorder="little")[:n].astype(bool)
        errors += int(np.count_nonzero(pred != actual))
    return errors


def run_batch(point: PointSpec, shots: int, seed: int) -> tuple[int, float]:
    start = time.perf_counter()
    errors = count_logical_errors(_context(point), shots, seed)
    return errors, time.perf_counter() - start


@dataclass
class PointProgress:
    """Schedule state of one point, rebuilt by replaying its committed batches."""

    point: PointSpec
    ladder: Sequence[ScheduleStep]
    budget: int
    min_errors: int
    total: ShotStats = ShotStats(0, 0)
    history: list = field(default_factory=list)
    next_batch: int = 0
    done: Optional[Done] = None

    def __post_init__(self):
        self._step = next_schedule_step(self.history, self.ladder, self.budget, self.min_errors)
        if isinstance(self._step, Done):
            self.done = self._step

    def commit(self, stats: ShotStats) -> None:
        if self.done is not None:
            raise StoreError(f"{self.point.key_text}: batch {self.next_batch} committed after the point finished")
        self.total = self.total + stats
        self.next_batch += 1
        step = self._step
        if (self.total.shots >= step.max_shots or self.total.errors >= step.max_errors
                or self.total.shots >= self.budget):
            self.history.append(self.total)
            nxt = next_schedule_step(self.history, self.ladder, self.budget, self.min_errors)
            if isinstance(nxt, Done):
                self.done = nxt
            else:
                self._step = nxt


@dataclass(frozen=True)
class CampaignResult:
    store_path: Path
    totals: dict  # point key -> ShotStats
    finished: dict  # point key -> Done
    batches_run: int


def _replay(cfg: CampaignConfig, store: ResultStore) -> dict[tuple, PointProgress]:
    progress = {pt.key: PointProgress(pt, cfg.ladder, cfg.budget, cfg.min_errors) for pt in cfg.points}
    for i, row in enumerate(store.rows):
        prog = progress.get(row.key)
        if prog is None:
            continue
        if row.batch != prog.next_batch:
            raise StoreError(f"{store.path}: row {i + 3} has batch {row.batch}, expected {prog.next_batch} "
                             f"for {prog.point.key_text}")
        if row.seed != batch_seed(cfg.seed, prog.point, row.batch):
            raise StoreError(f"{store.path}: row {i + 3} seed does not match master seed {cfg.seed}")
        prog.commit(row.stats)
    return progress


def run_campaign(cfg: CampaignConfig, store_path: Optional[str | Path] = None, workers: Optional[int] = None,
                 max_batches: Optional[int] = None) -> CampaignResult:
    """Run (or resume) every point of ``cfg`` until its schedule finishes.

    ``max_batches`` stops after that many newly committed batches, which
    leaves a resumable store behind.
    """
    path = Path(store_path) if store_path is not None else cfg.output
    if path is None:
        raise ConfigError("output: no result store path given")
    workers = cfg.workers if workers is None else workers
    if workers < 1:
        raise ConfigError("workers: must be >= 1")
    ran = 0
    with ResultStore(path, cfg.batch_size) as store:
        progress = _replay(cfg, store)
        active = deque(p for p in progress.values() if p.done is None)

        def commit(prog: PointProgress, errors: int, seconds: float) -> None:
            nonlocal ran
            b = prog.next_batch
            pt = prog.point
            store.append(ResultRow(pt.family.value, pt.distance, pt.p, pt.basis.value, pt.order_label,
                                   cfg.batch_size, errors, seconds, batch_seed(cfg.seed, pt, b), b))
            prog.commit(ShotStats(cfg.batch_size, errors, seconds))
            ran += 1

        def limit_hit() -> bool:
            return max_batches is not None and ran >= max_batches

        if workers == 1:
            while active and not limit_hit():
                prog = active[0]
                errors, secs = run_batch(prog.point, cfg.batch_size, batch_seed(cfg.seed, prog.point,
                                                                                 prog.next_batch))
                commit(prog, errors, secs)
                if prog.done is not None:
                    active.popleft()
        else:
            _run_parallel(cfg, active, commit, limit_hit, workers)
    totals = {k: p.total for k, p in progress.items()}
    finished = {k: p.done for k, p in progress.items() if p.done is not None}
    return CampaignResult(path, totals, finished, ran)


def _run_parallel(cfg: CampaignConfig, active: deque, commit, limit_hit, workers: int) -> None:
    # in-flight futures per point, keyed by batch index; results wait until they are next in line
    inflight: dict[tuple, dict[int, Future]] = {p.point.key: {} for p in active}
    issued: dict[tuple, int] = {p.point.key: p.next_batch for p in active}
    order = list(active)
    with ProcessPoolExecutor(max_workers=workers, mp_context=get_context("fork")) as pool:
        while order and not limit_hit():
            # keep the pool saturated, spreading speculative batches round-robin
            total = sum(len(v) for v in inflight.values())
            progressed = True
            while total < 2 * workers and progressed:
                progressed = False
                for prog in order:
                    key = prog.point.key
                    if total >= 2 * workers:
                        break
                    if len(inflight[key]) < workers:
                        b = issued[key]
                        inflight[key][b] = pool.submit(run_batch, prog.point, cfg.batch_size,
                                                       batch_seed(cfg.seed, prog.point, b))
                        issued[key] = b + 1
                        total += 1
                        progressed = True
            pending = [f for v in inflight.values() for f in v.values()]
            wait(pending, return_when=FIRST_COMPLETED)
            for prog in list(order):
                key = prog.point.key
                futs = inflight[key]
                while prog.done is None and not limit_hit():
                    f = futs.get(prog.next_batch)
                    if f is None or not f.done():
                        break
                    del futs[prog.next_batch]
                    errors, secs = f.result()
                    commit(prog, errors, secs)
                if prog.done is not None:
                    for f in futs.values():
                        f.cancel()
                    futs.clear()
                    order.remove(prog)
        for futs in inflight.values():
            for f in futs.values():
                f.cancel()
