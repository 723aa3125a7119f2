"""Bit-packed Pauli-frame sampling of detector and observable flips.

Shots are packed 64 per ``uint64`` word.  The frame tracks, for every qubit,
whether the shot currently carries an X and/or Z error relative to the
noiseless reference execution.  Because every detector in the generated
circuits has a deterministic noiseless parity of zero, a detector's sampled
value is simply the XOR of the referenced measurement-frame bits.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from surfmem.circuit import MEASUREMENTS, NOISE, Circuit, Instruction
from surfmem.errors import CircuitIntegrityError, InvalidParameterError

WORD = 64
CHUNK_SHOTS = 1 << 16

# Pauli letter -> (x bit, z bit)
PAULI_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_P1 = ("X", "Y", "Z")
_P2 = tuple(a + b for a in "IXYZ" for b in "IXYZ")[1:]


def channel_terms(name: str) -> tuple[str, ...]:
    """Non-identity Pauli terms of a noise channel, in sampling order."""
    return {
        "DEPOLARIZE1": _P1,
        "DEPOLARIZE2": _P2,
        "X_ERROR": ("X",),
        "Y_ERROR": ("Y",),
        "Z_ERROR": ("Z",),
    }[name]


@dataclass(frozen=True)
class Fault:
    """A forced Pauli ``term`` applied right after flattened instruction ``instruction``.

    ``group`` indexes the instruction's target groups (qubit pairs for
    DEPOLARIZE2).  For measurement instructions with a flip probability the
    term ``"X"`` flips the reported outcome.
    """

    instruction: int
    group: int
    term: str


@dataclass
class SampleRecord:
    shots: int
    detectors: np.ndarray  # uint8, shape (shots, ceil(num_detectors / 8)), little bit order
    observables: np.ndarray  # uint8, shape (shots, ceil(num_observables / 8))
    num_detectors: int
    num_observables: int = 1
    seed: Optional[int] = None
    schedule_step: int = 0

    def detector_bits(self) -> np.ndarray:
        return np.unpackbits(self.detectors, axis=1, count=self.num_detectors, bitorder="little").astype(bool)

    def observable_flips(self) -> np.ndarray:
        bits = np.unpackbits(self.observables, axis=1, count=self.num_observables, bitorder="little")
        return bits[:, 0].astype(bool) if self.num_observables else np.zeros(self.shots, bool)

    @classmethod
    def from_bits(cls, det: np.ndarray, obs: np.ndarray, seed=None) -> "SampleRecord":
        det = np.asarray(det, dtype=bool)
        obs = np.asarray(obs, dtype=bool)
        if obs.ndim == 1:
            obs = obs[:, None]
        return cls(
            shots=det.shape[0],
            detectors=np.packbits(det, axis=1, bitorder="little"),
            observables=np.packbits(obs, axis=1, bitorder="little"),
            num_detectors=det.shape[1],
            num_observables=obs.shape[1],
            seed=seed,
        )

    @classmethod
    def concatenate(cls, records: Sequence["SampleRecord"]) -> "SampleRecord":
        first = records[0]
        return cls(
            shots=sum(r.shots for r in records),
            detectors=np.concatenate([r.detectors for r in records]),
            observables=np.concatenate([r.observables for r in records]),
            num_detectors=first.num_detectors,
            num_observables=first.num_observables,
            seed=first.seed,
            schedule_step=first.schedule_step,
        )

    # raw dump: little-endian header then one bit-packed row per shot
    # (detectors followed by observables)
    _MAGIC = b"SFMS"

    def to_bytes(self) -> bytes:
        bits = np.concatenate([self.detector_bits(), np.unpackbits(
            self.observables, axis=1, count=self.num_observables, bitorder="little").astype(bool)], axis=1)
        rows = np.packbits(bits, axis=1, bitorder="little")
        header = self._MAGIC + struct.pack(
            "<IIIQQ", 1, self.num_detectors, self.num_observables, self.shots, (self.seed or 0) & (2**64 - 1))
        return header + rows.tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "SampleRecord":
        if blob[:4] != cls._MAGIC:
            raise InvalidParameterError("not a sample dump (bad magic)")
        version, nd, no, shots, seed = struct.unpack_from("<IIIQQ", blob, 4)
        if version != 1:
            raise InvalidParameterError(f"unsupported sample dump version {version}")
        width = (nd + no + 7) // 8
        rows = np.frombuffer(blob, dtype=np.uint8, offset=4 + struct.calcsize("<IIIQQ")).reshape(shots, width)
        bits = np.unpackbits(rows, axis=1, count=nd + no, bitorder="little").astype(bool)
        rec = cls.from_bits(bits[:, :nd], bits[:, nd:], seed=seed)
        rec.num_observables = no
        return rec


class _Program:
    """Flattened circuit with measurement indices resolved to absolute positions."""

    def __init__(self, circuit: Circuit):
        self.ops: list[Instruction] = list(circuit.flattened())
        self.num_qubits = max(circuit.num_qubits, 0)
        self.num_measurements = 0
        self.meas_offset: list[int] = []
        self.detectors: list[np.ndarray] = []
        obs: dict[int, list[int]] = {}
        for ins in self.ops:
            self.meas_offset.append(self.num_measurements)
            if ins.name == "DETECTOR":
                self.detectors.append(np.array([self.num_measurements - k for k in ins.targets], dtype=np.int64))
            elif ins.name == "OBSERVABLE_INCLUDE":
                obs.setdefault(int(ins.args[0]), []).extend(self.num_measurements - k for k in ins.targets)
            self.num_measurements += ins.num_measurements
        self.num_observables = max(obs) + 1 if obs else 0
        self.observables = [np.array(v, dtype=np.int64) for _, v in sorted(obs.items())]
        self.targets = [np.array(ins.targets, dtype=np.int64) for ins in self.ops]
        for det in self.detectors:
            if det.size and det.min() < 0:
                raise CircuitIntegrityError("detector references a measurement before the first one")

    @property
    def num_detectors(self) -> int:
        return len(self.detectors)


_PROGRAM_CACHE: dict[int, tuple[Circuit, _Program]] = {}


def compile_circuit(circuit: Circuit) -> _Program:
    hit = _PROGRAM_CACHE.get(id(circuit))
    if hit is not None and hit[0] is circuit:
        return hit[1]
    prog = _Program(circuit)
    if len(_PROGRAM_CACHE) > 32:
        _PROGRAM_CACHE.clear()
    _PROGRAM_CACHE[id(circuit)] = (circuit, prog)
    return prog


def _bernoulli_hits(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Sorted positions in ``range(n)`` of independent Bernoulli(p) successes."""
    if p <= 0 or n == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 0.05:
        return np.flatnonzero(rng.random(n) < p)
    out = []
    pos = -1
    while True:
        m = int(max(16, (n - pos) * p * 1.1 + 6 * np.sqrt((n - pos) * p)))
        gaps = rng.geometric(p, size=m)
        idx = pos + np.cumsum(gaps)
        out.append(idx[idx < n])
        if idx[-1] >= n:
            break
        pos = int(idx[-1])
    return np.concatenate(out)


class _Frame:
    def __init__(self, num_qubits: int, num_measurements: int, shots: int):
        self.shots = shots
        self.words = (shots + WORD - 1) // WORD
        self.x = np.zeros((num_qubits, self.words), dtype=np.uint64)
        self.z = np.zeros((num_qubits, self.words), dtype=np.uint64)
        self.rec = np.zeros((num_measurements, self.words), dtype=np.uint64)

    def flip(self, which: np.ndarray, qubits: np.ndarray, shots: np.ndarray) -> None:
        if qubits.size == 0:
            return
        key = qubits.astype(np.int64) * self.words + (shots >> 6)
        bits = np.left_shift(np.uint64(1), (shots & 63).astype(np.uint64))
        order = np.argsort(key, kind="stable")
        key = key[order]
        bits = bits[order]
        starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
        vals = np.bitwise_xor.reduceat(bits, starts)
        flat = which.reshape(-1)
        flat[key[starts]] ^= vals

    def valid_mask(self) -> np.ndarray:
        mask = np.full(self.words, ~np.uint64(0), dtype=np.uint64)
        rem = self.shots % WORD
        if rem:
            mask[-1] = np.uint64((1 << rem) - 1)
        return mask


def _apply_pauli_terms(frame: _Frame, groups: np.ndarray, term_idx: np.ndarray, shots: np.ndarray,
                       terms: Sequence[str]) -> None:
    """Apply term ``terms[term_idx[k]]`` to target group ``groups[k]`` in shot ``shots[k]``."""
    table = np.array([[PAULI_BITS[c] for c in t] for t in terms], dtype=bool)  # (terms, width, 2)
    width = table.shape[1]
    for w in range(width):
        xs = table[term_idx, w, 0]
        zs = table[term_idx, w, 1]
        q = groups[:, w]
        frame.flip(frame.x, q[xs], shots[xs])
        frame.flip(frame.z, q[zs], shots[zs])


def _random_words(rng: np.random.Generator, rows: int, words: int) -> np.ndarray:
    return rng.integers(0, 2**64, size=(rows, words), dtype=np.uint64)


def _run(prog: _Program, shots: int, rng: Optional[np.random.Generator],
         injections: Optional[dict[int, list[tuple[int, int, str]]]] = None,
         randomize_gauge: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Run the frame program; returns packed detector and observable words."""
    f = _Frame(prog.num_qubits, prog.num_measurements, shots)
    x, z, rec = f.x, f.z, f.rec
    valid = f.valid_mask()
    if randomize_gauge:
        # qubits start in |0>, which a Z frame leaves unchanged
        z[:] = _random_words(rng, prog.num_qubits, f.words) & valid
    for idx, ins in enumerate(prog.ops):
        name = ins.name
        t = prog.targets[idx]
        if name == "CX":
            c, tg = t[0::2], t[1::2]
            if np.unique(t).size == t.size:
                x[tg] ^= x[c]
                z[c] ^= z[tg]
            else:
                for a, b in zip(c, tg):
                    x[b] ^= x[a]
                    z[a] ^= z[b]
        elif name == "H":
            tmp = x[t].copy()
            x[t] = z[t]
            z[t] = tmp
        elif name in ("R", "RX"):
            x[t] = 0
            z[t] = 0
            if randomize_gauge:
                gauge = z if name == "R" else x
                gauge[t] = _random_words(rng, t.size, f.words) & valid
        elif name in MEASUREMENTS:
            off = prog.meas_offset[idx]
            rec[off:off + t.size] = z[t] if name == "MX" else x[t]
            rows = np.arange(off, off + t.size, dtype=np.int64)
            if ins.args and ins.args[0] > 0 and injections is None:
                hits = _bernoulli_hits(rng, t.size * shots, ins.args[0])
                f.flip(rec, rows[hits // shots], hits % shots)
            if injections is not None and idx in injections:
                entries = injections[idx]
                f.flip(rec, rows[[e[1] for e in entries]], np.array([e[0] for e in entries], dtype=np.int64))
            if name == "MR":
                x[t] = 0
                z[t] = 0
            if randomize_gauge:
                gauge = x if name == "MX" else z
                gauge[t] = _random_words(rng, t.size, f.words) & valid
        elif name in NOISE:
            if injections is not None:
                if idx in injections:
                    width = 2 if name == "DEPOLARIZE2" else 1
                    groups = t.reshape(-1, width)
                    entries = injections[idx]
                    lanes = np.array([e[0] for e in entries], dtype=np.int64)
                    grp = groups[[e[1] for e in entries]]
                    terms = sorted({e[2] for e in entries})
                    tidx = np.array([terms.index(e[2]) for e in entries], dtype=np.int64)
                    _apply_pauli_terms(f, grp, tidx, lanes, terms)
                continue
            p = ins.args[0]
            if p <= 0:
                continue
            width = 2 if name == "DEPOLARIZE2" else 1
            groups = t.reshape(-1, width)
            hits = _bernoulli_hits(rng, groups.shape[0] * shots, p)
            if hits.size == 0:
                continue
            terms = channel_terms(name)
            tidx = rng.integers(0, len(terms), size=hits.size) if len(terms) > 1 else np.zeros(hits.size, np.int64)
            _apply_pauli_terms(f, groups[hits // shots], tidx, hits % shots, terms)
    det = np.zeros((prog.num_detectors, f.words), dtype=np.uint64)
    for i, refs in enumerate(prog.detectors):
        if refs.size:
            det[i] = np.bitwise_xor.reduce(rec[refs], axis=0)
    obs = np.zeros((prog.num_observables, f.words), dtype=np.uint64)
    for i, refs in enumerate(prog.observables):
        if refs.size:
            obs[i] = np.bitwise_xor.reduce(rec[refs], axis=0)
    return det & valid, obs & valid


def _words_to_rows(words: np.ndarray, shots: int) -> np.ndarray:
    """(bits, words) uint64 -> (shots, ceil(bits/8)) uint8 little bit order."""
    n = words.shape[0]
    nbytes = (n + 7) // 8
    if n == 0:
        return np.zeros((shots, 0), dtype=np.uint8)
    le = words.astype("<u8", copy=False)
    bits = np.unpackbits(le.view(np.uint8).reshape(n, -1), axis=1, bitorder="little")[:, :shots]
    padded = np.zeros((nbytes * 8, shots), dtype=np.uint8)
    padded[:n] = bits
    weights = (1 << np.arange(8, dtype=np.uint8)).reshape(1, 8, 1)
    packed = (padded.reshape(nbytes, 8, shots) * weights).sum(axis=1, dtype=np.uint8)
    return np.ascontiguousarray(packed.T)


def chunk_seed(seed: int, chunk: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) & (2**64 - 1), int(chunk)])


def sample_words(circuit: Circuit, shots: int, seed: int, randomize_gauge: bool = False):
    """Yield ``(detector_words, observable_words, chunk_shots)`` per chunk of at most 2**16 shots."""
    prog = compile_circuit(circuit)
    done = 0
    chunk = 0
    while done < shots:
        n = min(CHUNK_SHOTS, shots - done)
        rng = np.random.Generator(np.random.PCG64(chunk_seed(seed, chunk)))
        det, obs = _run(prog, n, rng, randomize_gauge=randomize_gauge)
        yield det, obs, n
        done += n
        chunk += 1


def sample(circuit: Circuit, shots: int, seed: int = 0, schedule_step: int = 0) -> SampleRecord:
    """Sample ``shots`` independent runs of the noisy circuit."""
    if shots < 0:
        raise InvalidParameterError("shots must be non-negative")
    prog = compile_circuit(circuit)
    dets, obss = [], []
    for det, obs, n in sample_words(circuit, shots, seed):
        dets.append(_words_to_rows(det, n))
        obss.append(_words_to_rows(obs, n))
    nd, no = prog.num_detectors, prog.num_observables
    if not dets:
        return SampleRecord(0, np.zeros((0, (nd + 7) // 8), np.uint8), np.zeros((0, (no + 7) // 8), np.uint8),
                            nd, no, seed, schedule_step)
    return SampleRecord(shots, np.concatenate(dets), np.concatenate(obss), nd, no, seed, schedule_step)


def sample_injected(circuit: Circuit, injections: Sequence[Iterable[Fault]]) -> SampleRecord:
    """One noiseless shot per entry of ``injections`` with exactly those faults applied."""
    prog = compile_circuit(circuit)
    table = _injection_table(prog, injections)
    det, obs = _run(prog, len(injections), None, injections=table)
    n = len(injections)
    return SampleRecord(n, _words_to_rows(det, n), _words_to_rows(obs, n), prog.num_detectors, prog.num_observables)


def _injection_table(prog: _Program, injections) -> dict[int, list[tuple[int, int, str]]]:
    table: dict[int, list[tuple[int, int, str]]] = {}
    for lane, faults in enumerate(injections):
        for fault in faults:
            if not 0 <= fault.instruction < len(prog.ops):
                raise InvalidParameterError(f"fault instruction index {fault.instruction} out of range")
            ins = prog.ops[fault.instruction]
            if ins.name in NOISE:
                allowed = channel_terms(ins.name)
                if fault.term not in allowed:
                    raise InvalidParameterError(f"term {fault.term} is not part of {ins.name}")
            elif not (ins.name in MEASUREMENTS and fault.term == "X"):
                raise InvalidParameterError(f"instruction {fault.instruction} ({ins.name}) is not a noise channel")
            if not 0 <= fault.group < len(ins.target_groups()):
                raise InvalidParameterError(f"fault group {fault.group} out of range for {ins.name}")
            table.setdefault(fault.instruction, []).append((lane, fault.group, fault.term))
    return table


def noise_locations(circuit: Circuit) -> list[tuple[int, int, str, float]]:
    """Every ``(instruction, group, term, term_probability)`` fault mechanism of the circuit.

    Disjoint depolarising channels are converted to independent per-term
    probabilities whose composition reproduces the channel exactly.
    """
    prog = compile_circuit(circuit)
    out = []
    for idx, ins in enumerate(prog.ops):
        if ins.name not in NOISE or ins.args[0] <= 0:
            continue
        p = ins.args[0]
        terms = channel_terms(ins.name)
        q = independent_term_probability(ins.name, p)
        for g in range(len(ins.target_groups())):
            for term in terms:
                out.append((idx, g, term, q))
    return out


def independent_term_probability(name: str, p: float) -> float:
    """Per-term probability of independent Pauli events equivalent to the disjoint channel."""
    if name == "DEPOLARIZE1":
        return 0.5 - 0.5 * (1 - 4 * p / 3) ** 0.5
    if name == "DEPOLARIZE2":
        return 0.5 - 0.5 * (1 - 16 * p / 15) ** 0.125
    return p


def check_deterministic(circuit: Circuit, shots: int = 256, seed: int = 0) -> None:
    """Raise if any detector or observable is non-deterministic in the noiseless circuit.

    Uses gauge randomisation: after every reset and measurement the frame
    receives a random Pauli that leaves the physical state unchanged, so a
    parity that is not fixed by the stabiliser state fires half the time.
    """
    noiseless = circuit.without_noise()
    for det, obs, n in sample_words(noiseless, shots, seed, randomize_gauge=True):
        bad = np.flatnonzero(np.any(det != 0, axis=1))
        if bad.size:
            raise CircuitIntegrityError(f"detectors {bad[:10].tolist()} are not deterministic without noise")
        if np.any(obs != 0):
            raise CircuitIntegrityError("observable is not deterministic without noise")
