"""Rotated and unrotated surface-code layouts, CNOT-order validity and hook errors.

Coordinates are integer ``(x, y)`` pairs with ``y`` growing downwards.

* Unrotated code: a ``(2d-1) x (2d-1)`` grid.  Data qubits sit where ``x + y``
  is even, X-type auxiliaries at ``(odd, even)`` and Z-type auxiliaries at
  ``(even, odd)``.  Each auxiliary touches its four axis-aligned neighbours.
* Rotated code: data qubits at ``(2i+1, 2j+1)`` and auxiliaries at the even
  plaquette corners.  Each auxiliary touches its four diagonal neighbours.

In both families the X-type boundaries are top/bottom, so ``X_L`` is a vertical
chain and ``Z_L`` a horizontal chain (swapped when ``stabiliser_swap`` is set).

Slot labels number the data qubits around an auxiliary clockwise from 0; slots
``{0, 2}`` share one axis and ``{1, 3}`` the other.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

from surfmem.errors import CapabilityError, InvalidParameterError


class CodeFamily(enum.Enum):
    ROTATED = "rotated"
    UNROTATED = "unrotated"

    @classmethod
    def parse(cls, value: "str | CodeFamily") -> "CodeFamily":
        if isinstance(value, CodeFamily):
            return value
        key = str(value).strip().lower()
        aliases = {"ro": "rotated", "unro": "unrotated"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise InvalidParameterError(f"unknown code family {value!r}") from None


class Hook(enum.Enum):
    NONE = "none"
    X = "x"
    Z = "z"
    BOTH = "both"


# slot label -> (dx, dy) from the auxiliary to the data qubit
SLOT_OFFSETS: dict[CodeFamily, tuple[tuple[int, int], ...]] = {
    CodeFamily.UNROTATED: ((0, -1), (1, 0), (0, 1), (-1, 0)),  # N, E, S, W
    CodeFamily.ROTATED: ((-1, -1), (1, -1), (1, 1), (-1, 1)),  # NW, NE, SE, SW
}


def qubit_counts(family: CodeFamily | str, distance: int) -> tuple[int, int, int]:
    """Return ``(data, auxiliary, total)`` qubit counts for one logical qubit."""
    family = CodeFamily.parse(family)
    d = distance
    if family is CodeFamily.ROTATED:
        data, aux = d * d, d * d - 1
    else:
        data, aux = 2 * d * d - 2 * d + 1, 2 * d * d - 2 * d
    return data, aux, data + aux


def total_qubits(family: CodeFamily | str, distance: float) -> float:
    """Total qubit count, also defined for a continuous (projected) distance."""
    family = CodeFamily.parse(family)
    d = distance
    if family is CodeFamily.ROTATED:
        return 2 * d * d - 1
    return 4 * d * d - 4 * d + 1


def distance_for_qubits(family: CodeFamily | str, qubits: float) -> float:
    """Inverse of :func:`total_qubits` on ``d >= 1``."""
    family = CodeFamily.parse(family)
    if family is CodeFamily.ROTATED:
        return ((qubits + 1) / 2) ** 0.5
    return (1 + qubits ** 0.5) / 2


@dataclass(frozen=True)
class StabiliserSpec:
    pauli: str  # "X" or "Z"
    aux: tuple[int, int]
    data_slots: tuple[Optional[int], ...]  # data-qubit index per slot label, None if absent

    @property
    def weight(self) -> int:
        return sum(q is not None for q in self.data_slots)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted(q for q in self.data_slots if q is not None))


@dataclass(frozen=True)
class CnotOrder:
    x_order: tuple[int, int, int, int]
    z_order: tuple[int, int, int, int]

    def __post_init__(self):
        for name, order in (("x_order", self.x_order), ("z_order", self.z_order)):
            if sorted(order) != [0, 1, 2, 3]:
                raise InvalidParameterError(f"{name} {order} is not a permutation of 0..3")

    @classmethod
    def parse(cls, text: "str | CnotOrder") -> "CnotOrder":
        if isinstance(text, CnotOrder):
            return text
        s = str(text).strip()
        if len(s) != 8 or not s.isdigit():
            raise InvalidParameterError(f"CNOT order must be 8 digits, got {text!r}")
        digits = tuple(int(c) for c in s)
        return cls(digits[:4], digits[4:])

    def __str__(self) -> str:
        return "".join(map(str, self.x_order + self.z_order))

    def swapped(self) -> "CnotOrder":
        return CnotOrder(self.z_order, self.x_order)

    def order_for(self, pauli: str) -> tuple[int, int, int, int]:
        return self.x_order if pauli == "X" else self.z_order


def all_orders() -> list[CnotOrder]:
    perms = list(itertools.permutations(range(4)))
    return [CnotOrder(x, z) for x in perms for z in perms]


@dataclass(frozen=True)
class CodeLayout:
    family: CodeFamily
    distance: int
    data_qubits: tuple[tuple[int, int], ...]
    stabilisers: tuple[StabiliserSpec, ...]
    logical_x_support: tuple[int, ...]
    logical_z_support: tuple[int, ...]
    stabiliser_swap: bool = False
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def num_data(self) -> int:
        return len(self.data_qubits)

    @property
    def num_aux(self) -> int:
        return len(self.stabilisers)

    @property
    def num_qubits(self) -> int:
        return self.num_data + self.num_aux

    def stabilisers_of(self, pauli: str) -> list[StabiliserSpec]:
        return [s for s in self.stabilisers if s.pauli == pauli]

    def logical_support(self, pauli: str) -> tuple[int, ...]:
        return self.logical_x_support if pauli == "X" else self.logical_z_support

    def logical_axis(self, pauli: str) -> int:
        """0 if the logical chain runs horizontally (along x), 1 if vertically."""
        pts = [self.data_qubits[q] for q in self.logical_support(pauli)]
        return 0 if len({p[1] for p in pts}) == 1 else 1

    @cached_property
    def qubit_coords(self) -> tuple[tuple[int, int], ...]:
        """Coordinates of every qubit in circuit index order (data first, then auxiliaries)."""
        return self.data_qubits + tuple(s.aux for s in self.stabilisers)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "distance": self.distance,
            "stabiliser_swap": self.stabiliser_swap,
            "data_qubits": [list(c) for c in self.data_qubits],
            "stabilisers": [
                {
                    "pauli": s.pauli,
                    "aux": list(s.aux),
                    "data_slots": list(s.data_slots),
                    "weight": s.weight,
                }
                for s in self.stabilisers
            ],
            "logical_x_support": list(self.logical_x_support),
            "logical_z_support": list(self.logical_z_support),
            "counts": dict(zip(("data", "auxiliary", "total"), (self.num_data, self.num_aux, self.num_qubits))),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def build_layout(family: CodeFamily | str, distance: int, stabiliser_swap: bool = False) -> CodeLayout:
    family = CodeFamily.parse(family)
    if not isinstance(distance, int) or distance < 2:
        raise InvalidParameterError(f"distance must be an integer >= 2, got {distance!r}")
    d = distance

    if family is CodeFamily.UNROTATED:
        n = 2 * d - 1
        data = [(x, y) for y in range(n) for x in range(n) if (x + y) % 2 == 0]
        aux = [(x, y) for y in range(n) for x in range(n) if (x + y) % 2 == 1]

        def pauli_of(c):
            return "X" if c[0] % 2 == 1 else "Z"

        lx = [(0, y) for y in range(0, n, 2)]
        lz = [(x, 0) for x in range(0, n, 2)]
    else:
        data = [(2 * i + 1, 2 * j + 1) for j in range(d) for i in range(d)]
        aux = []
        for b in range(d + 1):
            for a in range(d + 1):
                pauli = "X" if (a + b) % 2 == 1 else "Z"
                on_tb = b in (0, d)
                on_lr = a in (0, d)
                if on_tb and on_lr:
                    continue
                if on_tb and pauli != "X":
                    continue
                if on_lr and pauli != "Z":
                    continue
                aux.append((2 * a, 2 * b))

        def pauli_of(c):
            return "X" if (c[0] // 2 + c[1] // 2) % 2 == 1 else "Z"

        lx = [(1, 2 * j + 1) for j in range(d)]
        lz = [(2 * i + 1, 1) for i in range(d)]

    index = {c: i for i, c in enumerate(data)}
    offsets = SLOT_OFFSETS[family]
    stabs = []
    for c in aux:
        slots = tuple(index.get((c[0] + dx, c[1] + dy)) for dx, dy in offsets)
        pauli = pauli_of(c)
        if stabiliser_swap:
            pauli = "Z" if pauli == "X" else "X"
        stabs.append(StabiliserSpec(pauli, c, slots))
    lx_idx = tuple(index[c] for c in lx)
    lz_idx = tuple(index[c] for c in lz)
    if stabiliser_swap:
        lx_idx, lz_idx = lz_idx, lx_idx
    return CodeLayout(family, d, tuple(data), tuple(stabs), lx_idx, lz_idx, stabiliser_swap)


@dataclass(frozen=True)
class ValidityReport:
    commutes: bool
    parallel: bool
    hook: Hook
    family: CodeFamily

    @property
    def valid(self) -> bool:
        hook_ok = self.hook is Hook.NONE or self.family is CodeFamily.UNROTATED
        return self.commutes and self.parallel and hook_ok

    def failures(self) -> list[str]:
        out = []
        if not self.commutes:
            out.append("stabilisers do not commute (shared qubits visited in inconsistent order)")
        if not self.parallel:
            out.append("CNOTs in a time step are not parallel")
        if self.hook is not Hook.NONE and self.family is CodeFamily.ROTATED:
            out.append(f"hook error ({self.hook.value})")
        return out


def is_parallel(order: CnotOrder) -> bool:
    return all(a % 2 == b % 2 for a, b in zip(order.x_order, order.z_order))


def cnot_layers(order: CnotOrder) -> list[list[tuple[str, int]]]:
    """CNOT time steps as lists of ``(pauli, slot)``.

    A step whose X and Z slots lie on different axes cannot be executed at
    once without two CNOTs hitting the same data qubit, so it is split into an
    X sub-step followed by a Z sub-step.
    """
    layers = []
    for sx, sz in zip(order.x_order, order.z_order):
        if sx % 2 == sz % 2:
            layers.append([("X", sx), ("Z", sz)])
        else:
            layers.append([("X", sx)])
            layers.append([("Z", sz)])
    return layers


def interaction_times(order: CnotOrder) -> dict[tuple[str, int], int]:
    return {key: t for t, layer in enumerate(cnot_layers(order)) for key in layer}


def _commutes(layout: CodeLayout, order: CnotOrder) -> bool:
    times = interaction_times(order)
    by_data: dict[int, list[tuple[str, int, int]]] = {}
    for si, s in enumerate(layout.stabilisers):
        for slot, q in enumerate(s.data_slots):
            if q is not None:
                by_data.setdefault(q, []).append((s.pauli, si, times[(s.pauli, slot)]))
    # relative order sign per (X stabiliser, Z stabiliser) pair over shared qubits
    signs: dict[tuple[int, int], set] = {}
    for entries in by_data.values():
        xs = [e for e in entries if e[0] == "X"]
        zs = [e for e in entries if e[0] == "Z"]
        for _, xi, tx in xs:
            for _, zi, tz in zs:
                if tx == tz:
                    return False
                signs.setdefault((xi, zi), set()).add(tx < tz)
    return all(len(v) == 1 for v in signs.values())


def classify_hook(layout: CodeLayout, order: CnotOrder | str) -> Hook:
    order = CnotOrder.parse(order)
    if layout.family is CodeFamily.UNROTATED:
        return Hook.NONE
    offsets = SLOT_OFFSETS[layout.family]
    hooked = []
    for pauli in ("X", "Z"):
        seq = order.order_for(pauli)
        a, b = offsets[seq[2]], offsets[seq[3]]
        dx, dy = b[0] - a[0], b[1] - a[1]
        axis = 0 if dy == 0 else 1 if dx == 0 else None
        hooked.append(axis is not None and axis == layout.logical_axis(pauli))
    if hooked[0] and hooked[1]:
        return Hook.BOTH
    if hooked[0]:
        return Hook.X
    if hooked[1]:
        return Hook.Z
    return Hook.NONE


def validate_order(layout: CodeLayout, order: CnotOrder | str) -> ValidityReport:
    order = CnotOrder.parse(order)
    return ValidityReport(
        commutes=_commutes(layout, order),
        parallel=is_parallel(order),
        hook=classify_hook(layout, order),
        family=layout.family,
    )


def valid_orders(layout: CodeLayout) -> list[CnotOrder]:
    return [o for o in all_orders() if validate_order(layout, o).valid]


def count_min_weight_paths(layout: CodeLayout, basis: str = "X", max_distance: int = 9) -> int:
    """Number of weight-d data-qubit chains realising the ``basis`` logical operator.

    Chains are paths in the matching graph whose nodes are the opposite-type
    stabilisers plus one virtual node per logical end boundary (boundary
    edges along one side merge into that node at no cost).  Parallel edges
    are distinct chains.
    """
    if layout.distance > max_distance:
        raise CapabilityError(f"path enumeration limited to d <= {max_distance}")
    basis = basis.upper()
    detecting = "Z" if basis == "X" else "X"
    axis = layout.logical_axis(basis)
    touching: dict[int, list[int]] = {q: [] for q in range(layout.num_data)}
    for si, s in enumerate(layout.stabilisers):
        if s.pauli == detecting:
            for q in s.support:
                touching[q].append(si)
    coords = [c[axis] for c in layout.data_qubits]
    mid = (min(coords) + max(coords)) / 2
    start, end = "start", "end"
    adj: dict[object, list[object]] = {}

    def link(u, v):
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)

    for q, stabs in touching.items():
        if len(stabs) == 2:
            link(stabs[0], stabs[1])
        elif len(stabs) == 1:
            link(stabs[0], start if coords[q] < mid else end)
        else:
            raise AssertionError(f"data qubit {q} touches {len(stabs)} {detecting}-stabilisers")

    # BFS counting shortest paths; parallel edges appear as repeated entries
    dist = {start: 0}
    ways = {start: 1}
    frontier = [start]
    while frontier and end not in dist:
        nxt = []
        for u in frontier:
            for v in adj.get(u, []):
                if v not in dist:
                    dist[v] = dist[u] + 1
                    ways[v] = 0
                    nxt.append(v)
                if dist[v] == dist[u] + 1:
                    ways[v] += ways[u]
        frontier = nxt
    if end not in dist:
        return 0
    return ways[end]
