"""Memory-experiment circuit generation with uniform circuit-level depolarising noise."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from surfmem.circuit import Circuit, RepeatBlock
from surfmem.errors import InvalidParameterError, OrderValidityError
from surfmem.geometry import CnotOrder, CodeLayout, cnot_layers, validate_order


class Basis(enum.Enum):
    X = "X"
    Z = "Z"

    @classmethod
    def parse(cls, value) -> "Basis":
        if isinstance(value, Basis):
            return value
        s = str(value).strip().upper()
        s = {"MEMORYX": "X", "MEMORY_X": "X", "MEMORYZ": "Z", "MEMORY_Z": "Z"}.get(s, s)
        try:
            return cls(s)
        except ValueError:
            raise InvalidParameterError(f"unknown memory basis {value!r}") from None


@dataclass(frozen=True)
class NoiseParams:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p < 0.5:
            raise InvalidParameterError(f"physical error rate must lie in [0, 0.5), got {self.p}")


@dataclass(frozen=True)
class BuildOptions:
    basis: Basis = Basis.Z
    rounds: Optional[int] = None  # defaults to 3 * distance
    exclude_opposite_detectors: bool = True
    z_aux_idle_during_h: bool = True
    bypass_parallel_criterion: bool = False

    def rounds_for(self, distance: int) -> int:
        r = 3 * distance if self.rounds is None else self.rounds
        if r < 1:
            raise InvalidParameterError("rounds must be >= 1")
        return r


class _Emitter:
    """Appends gates followed by their noise channels, skipping channels at p = 0."""

    def __init__(self, circuit: Circuit, p: float):
        self.c = circuit
        self.p = p

    def noise(self, name: str, targets) -> None:
        targets = list(targets)
        if self.p > 0 and targets:
            self.c.append(name, targets, (self.p,))

    def gate(self, name: str, targets) -> None:
        targets = list(targets)
        if targets:
            self.c.append(name, targets)

    def tick(self) -> None:
        self.c.append("TICK")


def build_memory_circuit(
    layout: CodeLayout,
    order: CnotOrder | str,
    noise: NoiseParams | float,
    opts: BuildOptions | None = None,
) -> Circuit:
    order = CnotOrder.parse(order)
    noise = noise if isinstance(noise, NoiseParams) else NoiseParams(float(noise))
    opts = opts or BuildOptions()
    basis = Basis.parse(opts.basis).value
    report = validate_order(layout, order)
    failures = []
    if not report.commutes:
        failures.append("stabilisers do not commute")
    if not report.parallel and not opts.bypass_parallel_criterion:
        failures.append("CNOTs in a time step are not parallel")
    if failures:
        raise OrderValidityError(order, failures)
    rounds = opts.rounds_for(layout.distance)

    nd = layout.num_data
    data = list(range(nd))
    aux = [nd + i for i in range(layout.num_aux)]
    x_aux = [nd + i for i, s in enumerate(layout.stabilisers) if s.pauli == "X"]
    z_aux = [nd + i for i, s in enumerate(layout.stabilisers) if s.pauli == "Z"]
    all_q = data + aux
    same = [i for i, s in enumerate(layout.stabilisers) if s.pauli == basis]
    opposite = [i for i, s in enumerate(layout.stabilisers) if s.pauli != basis]
    n_aux = layout.num_aux

    circuit = Circuit()
    for q, (x, y) in enumerate(layout.qubit_coords):
        circuit.append("QUBIT_COORDS", [q], (x, y))

    e = _Emitter(circuit, noise.p)
    # data initialisation and auxiliary reset
    if basis == "Z":
        e.gate("R", all_q)
        e.noise("X_ERROR", all_q)
    else:
        e.gate("RX", data)
        e.gate("R", aux)
        e.noise("Z_ERROR", data)
        e.noise("X_ERROR", aux)
    e.tick()

    layers = cnot_layers(order)

    def hadamard_step(em: _Emitter) -> None:
        em.gate("H", x_aux)
        em.noise("DEPOLARIZE1", x_aux)
        idle = data + (z_aux if opts.z_aux_idle_during_h else [])
        em.noise("DEPOLARIZE1", sorted(idle))
        em.tick()

    def round_body(em: _Emitter) -> None:
        # reset step: auxiliaries were reset by the previous MR, data idle
        em.noise("DEPOLARIZE1", data)
        em.tick()
        hadamard_step(em)
        for layer in layers:
            pairs = []
            for pauli, slot in layer:
                for i, s in enumerate(layout.stabilisers):
                    q = s.data_slots[slot]
                    if s.pauli != pauli or q is None:
                        continue
                    a = nd + i
                    pairs.append((a, q) if pauli == "X" else (q, a))
            busy = {t for pr in pairs for t in pr}
            flat = [t for pr in pairs for t in pr]
            em.gate("CX", flat)
            em.noise("DEPOLARIZE2", flat)
            em.noise("DEPOLARIZE1", [q for q in all_q if q not in busy])
            em.tick()
        hadamard_step(em)
        em.noise("X_ERROR", aux)
        em.gate("MR", aux)
        em.noise("X_ERROR", aux)
        em.noise("DEPOLARIZE1", data)

    def detectors(em: _Emitter, first: bool) -> None:
        for i in same + ([] if opts.exclude_opposite_detectors else opposite):
            if first and i in opposite:
                continue
            s = layout.stabilisers[i]
            k = n_aux - i
            recs = [k] if first else [k, k + n_aux]
            em.c.append("DETECTOR", recs, (s.aux[0], s.aux[1], 0))

    round_body(e)
    detectors(e, first=True)
    if rounds > 1:
        body = Circuit()
        be = _Emitter(body, noise.p)
        be.tick()
        round_body(be)
        body.append("SHIFT_COORDS", [], (0, 0, 1))
        detectors(be, first=False)
        if rounds - 1 == 1:
            circuit.items.extend(body.items)
        else:
            circuit.items.append(RepeatBlock(rounds - 1, body))
    e.tick()

    # final data measurement in the memory basis
    if basis == "Z":
        e.noise("X_ERROR", data)
        e.gate("M", data)
    else:
        e.noise("Z_ERROR", data)
        e.gate("MX", data)
    circuit.append("SHIFT_COORDS", [], (0, 0, 1))
    for i in same:
        s = layout.stabilisers[i]
        recs = [nd - q for q in s.support] + [nd + n_aux - i]
        circuit.append("DETECTOR", recs, (s.aux[0], s.aux[1], 0))
    circuit.append("OBSERVABLE_INCLUDE", [nd - q for q in layout.logical_support(basis)], (0,))
    return circuit
