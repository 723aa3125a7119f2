"""Append-only CSV result store, one row per committed batch.

The file starts with a schema line carrying the batch size, then a column
header, then rows::

    # surfmem-results schema=1 batch_size=65536
    family,distance,p,basis,order,shots,errors,seconds,seed,batch
    rotated,3,0.005,Z,32013021,65536,812,0.41,1234567,0
"""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

from surfmem.errors import StoreError
from surfmem.stats import ShotStats

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
COLUMNS = ("family", "distance", "p", "basis", "order", "shots", "errors", "seconds", "seed", "batch")
_SCHEMA_RE = re.compile(r"^# surfmem-results schema=(\d+) batch_size=(\d+)$")


@dataclass(frozen=True)
class ResultRow:
    family: str
    distance: int
    p: float
    basis: str
    order: str
    shots: int
    errors: int
    seconds: float
    seed: int
    batch: int

    @property
    def key(self) -> tuple:
        return (self.family, self.distance, self.p, self.basis, self.order)

    @property
    def stats(self) -> ShotStats:
        return ShotStats(self.shots, self.errors, self.seconds)

    def to_line(self) -> str:
        return ",".join((self.family, str(self.distance), repr(self.p), self.basis, self.order, str(self.shots),
                         str(self.errors), f"{self.seconds:.3f}", str(self.seed), str(self.batch)))

    @classmethod
    def from_line(cls, line: str, lineno: int = 0) -> "ResultRow":
        parts = line.split(",")
        if len(parts) != len(COLUMNS):
            raise StoreError(f"line {lineno}: expected {len(COLUMNS)} fields, got {len(parts)}")
        try:
            row = cls(parts[0], int(parts[1]), float(parts[2]), parts[3], parts[4], int(parts[5]), int(parts[6]),
                      float(parts[7]), int(parts[8]), int(parts[9]))
        except ValueError as e:
            raise StoreError(f"line {lineno}: {e}") from None
        if not 0 <= row.errors <= row.shots:
            raise StoreError(f"line {lineno}: errors {row.errors} outside [0, shots={row.shots}]")
        return row


def header(batch_size: int) -> str:
    return f"# surfmem-results schema={SCHEMA_VERSION} batch_size={batch_size}\n" + ",".join(COLUMNS) + "\n"


def emit(rows: Iterable[ResultRow], batch_size: int) -> str:
    return header(batch_size) + "".join(r.to_line() + "\n" for r in rows)


def parse(text: str) -> tuple[int, list[ResultRow]]:
    """Return ``(batch_size, rows)``; a trailing partial line is a :class:`StoreError`."""
    if text and not text.endswith("\n"):
        raise StoreError("store ends with a partial line")
    lines = text.split("\n")[:-1] if text else []
    if len(lines) < 2:
        raise StoreError("store is missing its schema or column header")
    m = _SCHEMA_RE.match(lines[0])
    if not m:
        raise StoreError(f"line 1: not a result store header: {lines[0]!r}")
    if int(m.group(1)) != SCHEMA_VERSION:
        raise StoreError(f"line 1: unsupported schema version {m.group(1)}")
    if lines[1] != ",".join(COLUMNS):
        raise StoreError(f"line 2: unexpected column header {lines[1]!r}")
    rows = [ResultRow.from_line(line, i + 3) for i, line in enumerate(lines[2:])]
    return int(m.group(2)), rows


class ResultStore:
    """A store file opened for appending; repairs an interrupted final line on open."""

    def __init__(self, path: str | Path, batch_size: int):
        self.path = Path(path)
        self.batch_size = batch_size
        self.rows: list[ResultRow] = []
        if self.path.exists() and self.path.stat().st_size > 0:
            self._load()
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(header(batch_size))
        self._fh = None

    def _load(self) -> None:
        raw = self.path.read_bytes()
        if not raw.endswith(b"\n"):
            cut = raw.rfind(b"\n") + 1
            if cut < len(header(self.batch_size)):
                raise StoreError(f"{self.path}: header is truncated")
            log.warning("%s: dropping partial final line (%d bytes) left by an interrupted run",
                        self.path, len(raw) - cut)
            with open(self.path, "r+b") as fh:
                fh.truncate(cut)
            raw = raw[:cut]
        batch, rows = parse(raw.decode())
        if batch != self.batch_size:
            raise StoreError(f"{self.path}: store batch size {batch} differs from configured {self.batch_size}")
        self.rows = rows

    def append(self, row: ResultRow) -> None:
        if self._fh is None:
            self._fh = open(self.path, "a")
        self._fh.write(row.to_line() + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self.rows.append(row)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "ResultStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_store(path: str | Path) -> list[ResultRow]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise StoreError(f"cannot read store {path}: {e.strerror}") from None
    return parse(text)[1]


def pooled(rows: Iterable[ResultRow]) -> dict[tuple, ShotStats]:
    """Total (shots, errors, seconds) per point key, keys in first-seen order."""
    out: dict[tuple, ShotStats] = {}
    for r in rows:
        out[r.key] = out[r.key] + r.stats if r.key in out else r.stats
    return out


def iter_point_rows(rows: Iterable[ResultRow], key: tuple) -> Iterator[ResultRow]:
    return (r for r in rows if r.key == key)


def filter_rows(rows: Iterable[ResultRow], family: Optional[str] = None, basis: Optional[str] = None,
                order: Optional[str] = None) -> list[ResultRow]:
    return [r for r in rows if (family is None or r.family == family) and (basis is None or r.basis == basis)
            and (order is None or r.order == order)]
