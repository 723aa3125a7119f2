"""Annotated circuit model and its line-oriented text format.

The grammar is a subset of the Stim circuit format::

    NAME(arg, arg) target target ...
    REPEAT n {
        ...
    }

Measurement-record targets are written ``rec[-k]``.  Comments start with ``#``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union

from surfmem.errors import CircuitSyntaxError

# name -> (category, arity) ; arity 2 means targets come in pairs
GATES: dict[str, tuple[str, int]] = {
    "R": ("reset", 1),
    "RX": ("reset", 1),
    "H": ("gate", 1),
    "CX": ("gate", 2),
    "I": ("gate", 1),
    "M": ("measure", 1),
    "MX": ("measure", 1),
    "MR": ("measure", 1),
    "DEPOLARIZE1": ("noise", 1),
    "DEPOLARIZE2": ("noise", 2),
    "X_ERROR": ("noise", 1),
    "Y_ERROR": ("noise", 1),
    "Z_ERROR": ("noise", 1),
    "TICK": ("annotation", 0),
    "DETECTOR": ("annotation", 0),
    "OBSERVABLE_INCLUDE": ("annotation", 0),
    "QUBIT_COORDS": ("annotation", 1),
    "SHIFT_COORDS": ("annotation", 0),
}
ALIASES = {"CNOT": "CX", "ZCX": "CX", "MZ": "M", "RZ": "R", "MRZ": "MR"}
REC_TARGETED = {"DETECTOR", "OBSERVABLE_INCLUDE"}
NOISE = {name for name, (cat, _) in GATES.items() if cat == "noise"}
MEASUREMENTS = {"M", "MX", "MR"}


@dataclass(frozen=True)
class Instruction:
    """One circuit line.

    ``targets`` holds qubit indices, except for DETECTOR / OBSERVABLE_INCLUDE
    where it holds the look-back ``k`` of each ``rec[-k]`` reference.
    """

    name: str
    targets: tuple[int, ...] = ()
    args: tuple[float, ...] = ()

    def __post_init__(self):
        if self.name not in GATES:
            raise CircuitSyntaxError(f"unknown instruction {self.name!r}")
        if self.name in NOISE:
            if len(self.args) != 1 or not 0.0 <= self.args[0] <= 1.0:
                raise CircuitSyntaxError(f"{self.name} needs one probability in [0, 1], got {self.args}")
        if self.name in MEASUREMENTS and self.args and not 0.0 <= self.args[0] <= 1.0:
            raise CircuitSyntaxError(f"{self.name} flip probability outside [0, 1]")
        if GATES[self.name][1] == 2 and len(self.targets) % 2:
            raise CircuitSyntaxError(f"{self.name} needs an even number of targets")
        if self.name in REC_TARGETED and any(k <= 0 for k in self.targets):
            raise CircuitSyntaxError(f"{self.name} record look-backs must be positive")

    @property
    def is_noise(self) -> bool:
        return self.name in NOISE

    @property
    def num_measurements(self) -> int:
        return len(self.targets) if self.name in MEASUREMENTS else 0

    def target_groups(self) -> list[tuple[int, ...]]:
        k = GATES[self.name][1]
        if k == 2:
            return [self.targets[i:i + 2] for i in range(0, len(self.targets), 2)]
        return [(t,) for t in self.targets]

    def to_text(self) -> str:
        s = self.name
        if self.args:
            s += "(" + ", ".join(_fmt_num(a) for a in self.args) + ")"
        if self.name in REC_TARGETED:
            s += "".join(f" rec[-{k}]" for k in self.targets)
        else:
            s += "".join(f" {t}" for t in self.targets)
        return s


@dataclass
class RepeatBlock:
    count: int
    body: "Circuit"


Item = Union[Instruction, RepeatBlock]


@dataclass
class Circuit:
    items: list[Item] = field(default_factory=list)

    def append(self, name: str, targets=(), args=()) -> None:
        self.items.append(Instruction(name, tuple(int(t) for t in targets), tuple(float(a) for a in args)))

    def flattened(self) -> Iterator[Instruction]:
        """Instructions in execution order with REPEAT blocks unrolled."""
        for item in self.items:
            if isinstance(item, RepeatBlock):
                for _ in range(item.count):
                    yield from item.body.flattened()
            else:
                yield item

    def _count(self, fn) -> int:
        total = 0
        for item in self.items:
            if isinstance(item, RepeatBlock):
                total += item.count * item.body._count(fn)
            else:
                total += fn(item)
        return total

    @property
    def num_measurements(self) -> int:
        return self._count(lambda ins: ins.num_measurements)

    @property
    def num_detectors(self) -> int:
        return self._count(lambda ins: ins.name == "DETECTOR")

    @property
    def num_observables(self) -> int:
        ids = [int(ins.args[0]) for ins in self.flattened() if ins.name == "OBSERVABLE_INCLUDE"]
        return max(ids) + 1 if ids else 0

    @property
    def num_qubits(self) -> int:
        hi = -1
        for ins in self.flattened():
            if ins.name not in REC_TARGETED and ins.targets:
                hi = max(hi, max(ins.targets))
        return hi + 1

    def detector_coords(self) -> list[tuple[float, ...]]:
        coords = []
        shift: list[float] = []
        for ins in self.flattened():
            if ins.name == "SHIFT_COORDS":
                shift = [a + (shift[i] if i < len(shift) else 0.0) for i, a in enumerate(ins.args)] + shift[len(ins.args):]
            elif ins.name == "DETECTOR":
                coords.append(tuple(a + (shift[i] if i < len(shift) else 0.0) for i, a in enumerate(ins.args)))
        return coords

    def noise_probabilities(self) -> set[float]:
        return {ins.args[0] for ins in self.flattened() if ins.is_noise}

    def without_noise(self) -> "Circuit":
        out = Circuit()
        for item in self.items:
            if isinstance(item, RepeatBlock):
                out.items.append(RepeatBlock(item.count, item.body.without_noise()))
            elif not item.is_noise:
                if item.name in MEASUREMENTS and item.args:
                    item = Instruction(item.name, item.targets)
                out.items.append(item)
        return out

    def to_text(self) -> str:
        return "\n".join(self._lines(0)) + ("\n" if self.items else "")

    def _lines(self, depth: int) -> list[str]:
        pad = "    " * depth
        out = []
        for item in self.items:
            if isinstance(item, RepeatBlock):
                out.append(f"{pad}REPEAT {item.count} {{")
                out.extend(item.body._lines(depth + 1))
                out.append(f"{pad}}}")
            else:
                out.append(pad + item.to_text())
        return out

    def __str__(self) -> str:
        return self.to_text()

    def __eq__(self, other) -> bool:
        return isinstance(other, Circuit) and self.to_text() == other.to_text()


def _fmt_num(x: float) -> str:
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def emit_text(circuit: Circuit) -> str:
    return circuit.to_text()


_LINE = re.compile(r"^([A-Za-z][A-Za-z0-9_]*)\s*(?:\(([^)]*)\))?\s*(.*)$")
_REC = re.compile(r"^rec\[-(\d+)\]$")


def parse_text(text: str) -> Circuit:
    root = Circuit()
    stack: list[tuple[Circuit, int, int]] = []  # (parent, count, opening line)
    current = root
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "}":
            if not stack:
                raise CircuitSyntaxError("unmatched '}'", lineno)
            parent, count, _ = stack.pop()
            parent.items.append(RepeatBlock(count, current))
            current = parent
            continue
        if line.upper().startswith("REPEAT"):
            m = re.match(r"^REPEAT\s+(\d+)\s*\{$", line, re.IGNORECASE)
            if not m:
                raise CircuitSyntaxError(f"malformed REPEAT header {line!r}", lineno)
            count = int(m.group(1))
            if count < 1:
                raise CircuitSyntaxError("REPEAT count must be positive", lineno)
            stack.append((current, count, lineno))
            current = Circuit()
            continue
        m = _LINE.match(line)
        if not m:
            raise CircuitSyntaxError(f"cannot parse {line!r}", lineno)
        name = m.group(1).upper()
        name = ALIASES.get(name, name)
        if name not in GATES:
            raise CircuitSyntaxError(f"unknown instruction {m.group(1)!r}", lineno)
        args: tuple[float, ...] = ()
        if m.group(2) is not None and m.group(2).strip():
            try:
                args = tuple(float(a) for a in m.group(2).split(","))
            except ValueError:
                raise CircuitSyntaxError(f"bad argument list ({m.group(2)})", lineno) from None
        targets = []
        for tok in m.group(3).split():
            if name in REC_TARGETED:
                rm = _REC.match(tok)
                if not rm or int(rm.group(1)) == 0:
                    raise CircuitSyntaxError(f"malformed record reference {tok!r}", lineno)
                targets.append(int(rm.group(1)))
            else:
                if not tok.isdigit():
                    raise CircuitSyntaxError(f"bad target {tok!r}", lineno)
                targets.append(int(tok))
        try:
            current.items.append(Instruction(name, tuple(targets), args))
        except CircuitSyntaxError as e:
            raise CircuitSyntaxError(str(e), lineno) from None
    if stack:
        raise CircuitSyntaxError("unterminated REPEAT block", stack[-1][2])
    _check_records(root)
    return root


def _check_records(circuit: Circuit) -> None:
    seen = 0
    for ins in circuit.flattened():
        if ins.name in REC_TARGETED:
            for k in ins.targets:
                if k > seen:
                    raise CircuitSyntaxError(f"{ins.name} references rec[-{k}] but only {seen} measurements precede it")
        seen += ins.num_measurements
