"""Stabiliser-tableau reference simulator (Aaronson-Gottesman).

Used only as a correctness oracle for the frame sampler.  Pauli faults and
measurement outcomes never change which Pauli strings make up the tableau,
only their signs, so one tableau is shared across all shots and each row
carries a vector of per-shot sign bits.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np

from surfmem.circuit import MEASUREMENTS, NOISE, Circuit
from surfmem.errors import CapabilityError
from surfmem.frame_sim import (
    PAULI_BITS,
    Fault,
    SampleRecord,
    _injection_table,
    channel_terms,
    compile_circuit,
)

MAX_QUBITS = 32


class _Tableau:
    def __init__(self, n: int, shots: int):
        self.n = n
        self.x = np.zeros((2 * n + 1, n), dtype=bool)
        self.z = np.zeros((2 * n + 1, n), dtype=bool)
        self.x[np.arange(n), np.arange(n)] = True
        self.z[n + np.arange(n), np.arange(n)] = True
        self.r = np.zeros((2 * n + 1, shots), dtype=bool)

    def h(self, a: int) -> None:
        self.r ^= (self.x[:, a] & self.z[:, a])[:, None]
        self.x[:, a], self.z[:, a] = self.z[:, a].copy(), self.x[:, a].copy()

    def cx(self, a: int, b: int) -> None:
        x, z = self.x, self.z
        self.r ^= (x[:, a] & z[:, b] & ~(x[:, b] ^ z[:, a]))[:, None]
        x[:, b] ^= x[:, a]
        z[:, a] ^= z[:, b]

    def pauli(self, a: int, term: str, lanes: np.ndarray) -> None:
        """Apply a single-qubit Pauli on qubit ``a`` in the shots selected by boolean ``lanes``."""
        px, pz = PAULI_BITS[term]
        rows = np.zeros(2 * self.n + 1, dtype=bool)
        if px:
            rows ^= self.z[:, a]
        if pz:
            rows ^= self.x[:, a]
        self.r ^= rows[:, None] & lanes[None, :]

    def _rowsum(self, h: int, i: int) -> None:
        x1, z1 = self.x[i], self.z[i]
        x2, z2 = self.x[h], self.z[h]
        g = np.zeros(self.n, dtype=np.int64)
        g = np.where(x1 & z1, z2.astype(np.int64) - x2.astype(np.int64), g)
        g = np.where(x1 & ~z1, z2 * (2 * x2.astype(np.int64) - 1), g)
        g = np.where(~x1 & z1, x2 * (1 - 2 * z2.astype(np.int64)), g)
        flip = (int(g.sum()) % 4) == 2
        self.r[h] ^= self.r[i]
        if flip:
            self.r[h] ^= True
        self.x[h] ^= x1
        self.z[h] ^= z1

    def measure(self, a: int, rng: Optional[np.random.Generator]) -> np.ndarray:
        n = self.n
        stab = np.flatnonzero(self.x[n:2 * n, a])
        shots = self.r.shape[1]
        if stab.size:
            p = n + int(stab[0])
            for i in np.flatnonzero(self.x[:2 * n, a]):
                if i != p:
                    self._rowsum(int(i), p)
            self.x[p - n], self.z[p - n], self.r[p - n] = self.x[p], self.z[p], self.r[p]
            self.x[p] = False
            self.z[p] = False
            self.z[p, a] = True
            outcome = rng.integers(0, 2, size=shots).astype(bool) if rng is not None else np.zeros(shots, bool)
            self.r[p] = outcome
            return outcome.copy()
        s = 2 * n
        self.x[s] = False
        self.z[s] = False
        self.r[s] = False
        for i in np.flatnonzero(self.x[:n, a]):
            self._rowsum(s, int(i) + n)
        return self.r[s].copy()


def tableau_simulate(
    circuit: Circuit,
    shots: int = 0,
    seed: Optional[int] = None,
    injections: Optional[Sequence[Iterable[Fault]]] = None,
    max_qubits: int = MAX_QUBITS,
) -> SampleRecord:
    """Simulate the circuit exactly, either with random noise (``seed``) or forced ``injections``.

    With injections every noise channel is silent except the listed faults,
    one shot per injection list.  Random measurement outcomes are drawn per
    shot from ``seed`` (zero when no seed is given).
    """
    prog = compile_circuit(circuit)
    if prog.num_qubits > max_qubits:
        raise CapabilityError(f"tableau oracle supports at most {max_qubits} qubits, circuit has {prog.num_qubits}")
    table = None
    if injections is not None:
        injections = list(injections)
        shots = len(injections)
        table = _injection_table(prog, injections)
    rng = np.random.default_rng(seed) if seed is not None else None
    tab = _Tableau(prog.num_qubits, shots)
    rec = np.zeros((prog.num_measurements, shots), dtype=bool)
    for idx, ins in enumerate(prog.ops):
        name = ins.name
        t = ins.targets
        if name == "H":
            for a in t:
                tab.h(a)
        elif name == "CX":
            for a, b in zip(t[0::2], t[1::2]):
                tab.cx(a, b)
        elif name in ("R", "RX"):
            for a in t:
                if name == "RX":
                    tab.h(a)
                out = tab.measure(a, rng)
                tab.pauli(a, "X", out)
                if name == "RX":
                    tab.h(a)
        elif name in MEASUREMENTS:
            off = prog.meas_offset[idx]
            forced = {}
            if table is not None:
                for lane, group, _ in table.get(idx, []):
                    forced.setdefault(group, np.zeros(shots, bool))[lane] ^= True
            for k, a in enumerate(t):
                if name == "MX":
                    tab.h(a)
                out = tab.measure(a, rng)
                if name == "MX":
                    tab.h(a)
                if name == "MR":
                    tab.pauli(a, "X", out)
                flip = forced.get(k, np.zeros(shots, bool))
                if ins.args and ins.args[0] > 0 and table is None and rng is not None:
                    flip = flip ^ (rng.random(shots) < ins.args[0])
                rec[off + k] = out ^ flip
        elif name in NOISE:
            width = 2 if name == "DEPOLARIZE2" else 1
            groups = ins.target_groups()
            terms = channel_terms(name)
            if table is not None:
                for lane, group, term in table.get(idx, []):
                    lanes = np.zeros(shots, bool)
                    lanes[lane] = True
                    for w in range(width):
                        if term[w] != "I":
                            tab.pauli(groups[group][w], term[w], lanes)
                continue
            p = ins.args[0]
            if p <= 0 or rng is None:
                continue
            for g in groups:
                hit = rng.random(shots) < p
                which = rng.integers(0, len(terms), size=shots)
                for ti, term in enumerate(terms):
                    lanes = hit & (which == ti)
                    if lanes.any():
                        for w in range(width):
                            if term[w] != "I":
                                tab.pauli(g[w], term[w], lanes)
    det = np.zeros((shots, prog.num_detectors), dtype=bool)
    for i, refs in enumerate(prog.detectors):
        det[:, i] = np.bitwise_xor.reduce(rec[refs], axis=0) if refs.size else False
    obs = np.zeros((shots, prog.num_observables), dtype=bool)
    for i, refs in enumerate(prog.observables):
        obs[:, i] = np.bitwise_xor.reduce(rec[refs], axis=0) if refs.size else False
    return SampleRecord.from_bits(det, obs, seed=seed)
