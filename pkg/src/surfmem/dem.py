"""Detector error models by exhaustive single-fault propagation.

Every Pauli term of every noise channel is a fault mechanism.  Its symptom
(flipped detectors plus observable parity) is the XOR of the symptoms of its
single-qubit X and Z pieces, which are found by propagating each piece once
through the noiseless circuit.  Detectors connected by piece symptoms form
the basis graphs; a mechanism touching several graphs is split per graph.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from surfmem.circuit import MEASUREMENTS, NOISE, Circuit
from surfmem.errors import InvalidParameterError, NonGraphlikeError
from surfmem.frame_sim import _run, channel_terms, check_deterministic, compile_circuit, independent_term_probability

PIECE_BATCH = 4096


def edge_weight(p: float) -> float:
    """Log-likelihood weight ln((1 - p) / p) of an edge with flip probability ``p``."""
    if not 0.0 < p < 0.5:
        raise InvalidParameterError(f"edge probability must lie in (0, 0.5), got {p}")
    return math.log((1.0 - p) / p)


def merge_probability(p1: float, p2: float) -> float:
    """Probability that exactly one of two independent mechanisms fires."""
    return p1 * (1.0 - p2) + p2 * (1.0 - p1)


@dataclass(frozen=True)
class FaultMechanism:
    instruction: int
    group: int
    term: str
    probability: float

    def __post_init__(self):
        if not 0.0 < self.probability < 1.0:
            raise InvalidParameterError("mechanism probability must lie in (0, 1)")
        if not self.term or set(self.term) <= {"I"}:
            raise InvalidParameterError("mechanism term must be a non-identity Pauli")


@dataclass(frozen=True)
class DemEdge:
    detectors: tuple[int, ...]
    observable: bool
    probability: float
    basis: str = "combined"

    def __post_init__(self):
        if not 1 <= len(self.detectors) <= 2:
            raise InvalidParameterError(f"edge must touch 1 or 2 detectors, got {self.detectors}")
        if not 0.0 < self.probability < 0.5:
            raise InvalidParameterError(f"edge probability {self.probability} outside (0, 0.5)")

    @property
    def boundary(self) -> bool:
        return len(self.detectors) == 1

    @property
    def weight(self) -> float:
        return edge_weight(self.probability)

    def to_text(self) -> str:
        s = f"error({self.probability!r})" + "".join(f" D{d}" for d in self.detectors)
        return s + (" L0" if self.observable else "")


@dataclass
class DetectorErrorModel:
    detector_count: int
    edges: list[DemEdge]
    basis: str = "combined"
    detector_basis: dict[int, str] = field(default_factory=dict)
    split_mechanisms: int = 0  # mechanisms broken into single-qubit pieces within one graph

    def __post_init__(self):
        for e in self.edges:
            if any(not 0 <= d < self.detector_count for d in e.detectors):
                raise InvalidParameterError(f"edge {e.detectors} references a detector outside 0..{self.detector_count - 1}")

    def restrict(self, basis: str) -> "DetectorErrorModel":
        """Sub-model holding only the edges of one basis graph (detector ids unchanged)."""
        return DetectorErrorModel(
            self.detector_count,
            [e for e in self.edges if e.basis == basis],
            basis,
            {d: b for d, b in self.detector_basis.items() if b == basis},
        )

    @property
    def graph_bases(self) -> list[str]:
        return sorted({e.basis for e in self.edges})

    def to_text(self) -> str:
        lines = [f"# detectors {self.detector_count}"]
        lines += [e.to_text() for e in sorted(self.edges, key=_edge_sort_key)]
        return "\n".join(lines) + "\n"


def _edge_sort_key(e: DemEdge):
    return (e.detectors, e.observable)


_ERROR_LINE = re.compile(r"^error\(([^)]*)\)((?:\s+D\d+){1,2})(\s+L0)?$")


def parse_dem(text: str) -> DetectorErrorModel:
    """Parse the edge-list text format; detector count comes from the header or the largest id."""
    edges = []
    count = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = re.match(r"^#\s*detectors\s+(\d+)$", line)
            if m:
                count = int(m.group(1))
            continue
        m = _ERROR_LINE.match(line)
        if not m:
            raise InvalidParameterError(f"line {lineno}: cannot parse DEM line {line!r}")
        dets = tuple(sorted(int(t[1:]) for t in m.group(2).split()))
        edges.append(DemEdge(dets, bool(m.group(3)), float(m.group(1))))
    if count is None:
        count = 1 + max((d for e in edges for d in e.detectors), default=-1)
    return DetectorErrorModel(count, edges)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def fault_mechanisms(circuit: Circuit) -> list[FaultMechanism]:
    prog = compile_circuit(circuit)
    out = []
    for idx, ins in enumerate(prog.ops):
        if ins.name in NOISE and ins.args[0] > 0:
            q = independent_term_probability(ins.name, ins.args[0])
            for g in range(len(ins.target_groups())):
                for term in channel_terms(ins.name):
                    out.append(FaultMechanism(idx, g, term, q))
        elif ins.name in MEASUREMENTS and ins.args and ins.args[0] > 0:
            for g in range(len(ins.targets)):
                out.append(FaultMechanism(idx, g, "X", ins.args[0]))
    return out


def _piece_symptoms(circuit: Circuit, pieces: list[tuple[int, int, str]]):
    """Symptoms (sorted detector tuple, observable bit) of single-qubit single-Pauli pieces.

    A piece is ``(instruction, group, term)`` where ``term`` has exactly one
    non-identity letter, X or Z.
    """
    prog = compile_circuit(circuit)
    out = []
    for start in range(0, len(pieces), PIECE_BATCH):
        batch = pieces[start:start + PIECE_BATCH]
        table: dict[int, list[tuple[int, int, str]]] = {}
        for lane, (idx, g, term) in enumerate(batch):
            table.setdefault(idx, []).append((lane, g, term))
        det, obs = _run(prog, len(batch), None, injections=table)
        n = len(batch)
        det_bits = np.unpackbits(det.astype("<u8").view(np.uint8).reshape(det.shape[0], -1), axis=1,
                                 bitorder="little")[:, :n] if det.shape[0] else np.zeros((0, n), np.uint8)
        obs_bits = np.unpackbits(obs.astype("<u8").view(np.uint8).reshape(obs.shape[0], -1), axis=1,
                                 bitorder="little")[:, :n] if obs.shape[0] else np.zeros((0, n), np.uint8)
        rows, lanes = np.nonzero(det_bits.T)
        per_lane: list[list[int]] = [[] for _ in range(n)]
        for r, c in zip(rows.tolist(), lanes.tolist()):
            per_lane[r].append(c)
        flips = obs_bits[0] if obs_bits.shape[0] else np.zeros(n, np.uint8)
        for lane in range(n):
            out.append((tuple(per_lane[lane]), bool(flips[lane])))
    return out


def _split_term(name: str, term: str) -> list[tuple[int, str]]:
    """Pieces ``(position, 'X'|'Z')`` of a Pauli term (measurement flips count as position 0 'X')."""
    out = []
    for pos, c in enumerate(term):
        if c in "XY":
            out.append((pos, "X"))
        if c in "YZ":
            out.append((pos, "Z"))
    return out


def _piece_term(width: int, pos: int, pauli: str) -> str:
    return "".join(pauli if i == pos else "I" for i in range(width))


def mechanism_symptoms(circuit: Circuit):
    """Per mechanism: its full symptom and its per-piece symptoms."""
    prog = compile_circuit(circuit)
    mechs = fault_mechanisms(circuit)
    index: dict[tuple[int, int, str], int] = {}
    pieces: list[tuple[int, int, str]] = []
    mech_pieces = []
    for m in mechs:
        ins = prog.ops[m.instruction]
        width = 2 if ins.name == "DEPOLARIZE2" else 1
        keys = []
        if ins.name in MEASUREMENTS:
            parts = [(m.instruction, m.group, "X")]
        else:
            parts = [(m.instruction, m.group, _piece_term(width, pos, p)) for pos, p in _split_term(ins.name, m.term)]
        for key in parts:
            if key not in index:
                index[key] = len(pieces)
                pieces.append(key)
            keys.append(index[key])
        mech_pieces.append(keys)
    symptoms = _piece_symptoms(circuit, pieces)
    result = []
    for m, keys in zip(mechs, mech_pieces):
        parts = [symptoms[k] for k in keys]
        dets: set[int] = set()
        obs = False
        for d, o in parts:
            dets ^= set(d)
            obs ^= o
        result.append((m, (tuple(sorted(dets)), obs), parts))
    return result


def extract_dem(circuit: Circuit, check: bool = True, prune_below: Optional[float] = None) -> DetectorErrorModel:
    """Build the merged, graph-decomposed error model of a noisy circuit."""
    if check:
        check_deterministic(circuit)
    prog = compile_circuit(circuit)
    nd = prog.num_detectors
    entries = mechanism_symptoms(circuit)

    uf = _UnionFind(nd)
    for _, _, parts in entries:
        for dets, _ in parts:
            for a in dets[1:]:
                uf.union(dets[0], a)

    # label each detector component by which Pauli mostly flips it
    votes: dict[int, list[int]] = {}
    for m, _, parts in entries:
        for (dets, _), pauli in zip(parts, _piece_paulis(prog, m)):
            if dets:
                v = votes.setdefault(uf.find(dets[0]), [0, 0])
                v[0 if pauli == "X" else 1] += 1
    label = {root: ("Z" if v[0] >= v[1] else "X") for root, v in votes.items()}
    if len(set(label.values())) < len(label):
        label = {root: f"{lab}{i}" for i, (root, lab) in enumerate(sorted(label.items()))}

    merged: dict[tuple[str, tuple[int, ...], bool], float] = {}
    split = 0

    def add(basis: str, dets: tuple[int, ...], obs: bool, p: float) -> None:
        key = (basis, dets, obs)
        merged[key] = merge_probability(merged[key], p) if key in merged else p

    for m, (dets, obs), parts in entries:
        if not dets:
            continue
        by_root: dict[int, list[tuple[tuple[int, ...], bool]]] = {}
        for pd, po in parts:
            if pd:
                by_root.setdefault(uf.find(pd[0]), []).append((pd, po))
            elif po:
                raise NonGraphlikeError(f"mechanism {m} flips the observable without any detector")
        for root, comp in by_root.items():
            cd: set[int] = set()
            co = False
            for pd, po in comp:
                cd ^= set(pd)
                co ^= po
            if not cd:
                continue
            if len(cd) <= 2:
                add(label[root], tuple(sorted(cd)), co, m.probability)
                continue
            # correlated component: fall back to its individual pieces
            split += 1
            for pd, po in comp:
                if len(pd) > 2:
                    raise NonGraphlikeError(
                        f"mechanism {m.term} at instruction {m.instruction} group {m.group} flips "
                        f"{len(pd)} detectors in one graph")
                add(label[root], pd, po, m.probability)

    edges = []
    for (basis, dets, obs), p in merged.items():
        if p <= 0 or (prune_below is not None and p < prune_below):
            continue
        edges.append(DemEdge(dets, obs, min(p, 0.5 - 1e-12), basis))
    edges.sort(key=_edge_sort_key)
    det_basis = {d: label[uf.find(d)] for d in range(nd) if uf.find(d) in label}
    return DetectorErrorModel(nd, edges, "combined", det_basis, split)


def _piece_paulis(prog, m: FaultMechanism) -> list[str]:
    ins = prog.ops[m.instruction]
    if ins.name in MEASUREMENTS:
        return ["X"]
    return [p for _, p in _split_term(ins.name, m.term)]


def edge_marginals(dem: DetectorErrorModel) -> np.ndarray:
    """Per-detector firing probability implied by independent edges."""
    q = np.zeros(dem.detector_count)  # probability of odd parity so far
    for e in dem.edges:
        for d in e.detectors:
            q[d] = merge_probability(q[d], e.probability)
    return q


def symptoms_as_sets(entries: Iterable) -> list[tuple[frozenset, bool]]:
    return [(frozenset(d), o) for _, (d, o), _ in entries]
