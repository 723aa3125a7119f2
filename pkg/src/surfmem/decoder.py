"""Minimum-weight perfect matching decoder over detector error model graphs.

Edge weights ``ln((1 - p) / p)`` are discretised to integers (``WEIGHT_SCALE``
units per nat) so matching is exact.  For one shot, every fired detector is
either matched to the boundary or paired with another fired detector along a
shortest path.  Pairing i with j saves ``b_i + b_j - d_ij`` over sending both
to the boundary, so the optimum is the sum of boundary costs minus a
maximum-weight matching over pairs with positive saving.  Pairs never worth
joining split the shot into independent clusters.

Ties are broken by a small deterministic perturbation keyed on the pair of
graph nodes involved, scaled so it can never outweigh one unit of real
weight; the decoder and the brute-force oracle share it, so both pick the
same optimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from numba import njit
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from surfmem.blossom import max_weight_matching_duals
from surfmem.circuit import Circuit
from surfmem.dem import DetectorErrorModel
from surfmem.errors import CapabilityError, GraphIntegrityError, InvalidParameterError

WEIGHT_SCALE = 4096
PERTURB_SCALE = 1 << 20
UNREACHABLE = 1 << 52
MAX_BRUTE_FORCE = 12
DENSE_CLUSTER = 24  # clusters up to this size use every positive-gain pair directly
NEIGHBOURS = 4


@dataclass(frozen=True)
class Correction:
    pairs: tuple[tuple[int, Optional[int]], ...]  # (detector, detector) or (detector, None) for boundary
    weight_units: int
    flip: bool

    @property
    def weight(self) -> float:
        return self.weight_units / WEIGHT_SCALE


class MatchingGraph:
    """Detectors of the selected basis graphs plus one virtual boundary node."""

    def __init__(self, dem: DetectorErrorModel, bases: Optional[Iterable[str]] = None):
        chosen = set(bases) if bases is not None else None
        edges = [e for e in dem.edges if chosen is None or e.basis in chosen]
        det_ids = sorted({d for e in edges for d in e.detectors})
        self.detector_count = dem.detector_count
        self.detectors = np.array(det_ids, dtype=np.int64)
        self.node_of = np.full(dem.detector_count, -1, dtype=np.int64)
        self.node_of[self.detectors] = np.arange(len(det_ids))
        n = len(det_ids)
        self.boundary = n
        best: dict[tuple[int, int], tuple[int, bool]] = {}
        for e in edges:
            u = int(self.node_of[e.detectors[0]])
            v = int(self.node_of[e.detectors[1]]) if len(e.detectors) == 2 else n
            key = (min(u, v), max(u, v))
            w = max(1, int(round(e.weight * WEIGHT_SCALE)))
            cand = (w, bool(e.observable))
            if key not in best or cand < best[key]:
                best[key] = cand
        self.edges = best
        self._apsp()

    @property
    def num_nodes(self) -> int:
        return self.boundary

    def _apsp(self) -> None:
        n = self.boundary + 1
        if n > 12000:
            raise CapabilityError(f"matching graph with {n} nodes exceeds the all-pairs table limit")
        if not self.edges:
            self.dist = np.full((n, n), -1, dtype=np.int64)
            np.fill_diagonal(self.dist, 0)
            self.parity = np.zeros((n, n), dtype=np.uint8)
            return
        keys = np.array(list(self.edges.keys()), dtype=np.int64)
        vals = np.array([v[0] for v in self.edges.values()], dtype=np.float64)
        pars = np.array([v[1] for v in self.edges.values()], dtype=np.uint8)
        rows = np.r_[keys[:, 0], keys[:, 1]]
        cols = np.r_[keys[:, 1], keys[:, 0]]
        graph = csr_matrix((np.r_[vals, vals], (rows, cols)), shape=(n, n))
        dist, pred = dijkstra(graph, directed=False, return_predecessors=True)
        epar = np.zeros((n, n), dtype=np.uint8)
        epar[rows, cols] = np.r_[pars, pars]
        unreachable = ~np.isfinite(dist)
        d = np.where(unreachable, -1, dist).astype(np.int64)
        self.dist = d
        self.parity = _tree_parities(d, pred.astype(np.int64), epar)

    def check_connected(self) -> None:
        bad = np.flatnonzero(self.dist[: self.boundary, self.boundary] < 0)
        if bad.size:
            raise GraphIntegrityError(f"detectors {self.detectors[bad[:10]].tolist()} cannot reach the boundary")

    def nodes_for(self, syndrome: Iterable[int]) -> np.ndarray:
        ids = np.array(sorted(set(int(s) for s in syndrome)), dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.detector_count or np.any(self.node_of[ids] < 0)):
            raise InvalidParameterError("syndrome contains detectors outside the matching graph")
        return self.node_of[ids]


@njit(cache=True)
def _tree_parities(dist, pred, epar):
    n = dist.shape[0]
    par = np.zeros((n, n), np.uint8)
    for s in range(n):
        order = np.argsort(dist[s])
        for v in order:
            if dist[s, v] <= 0:
                continue
            u = pred[s, v]
            par[s, v] = par[s, u] ^ epar[u, v]
    return par


@njit(cache=True)
def _mix(a, b):
    x = np.uint64(a) * np.uint64(0x9E3779B97F4A7C15) + np.uint64(b) + np.uint64(0x632BE59BD9B4E019)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@njit(cache=True)
def _jitter(a, b, span):
    lo = min(a, b)
    hi = max(a, b)
    return np.int64(_mix(lo, hi) % np.uint64(span))


@njit(cache=True)
def _costs(nodes, dist, boundary):
    """Perturbed direct and boundary costs for the fired ``nodes``."""
    k = nodes.shape[0]
    span = max(1, PERTURB_SCALE // (2 * k + 2))
    direct = np.empty((k, k), np.int64)
    bnd = np.empty(k, np.int64)
    for i in range(k):
        d = dist[nodes[i], boundary]
        bnd[i] = UNREACHABLE if d < 0 else d * PERTURB_SCALE + _jitter(nodes[i], boundary, span)
        direct[i, i] = 0
        for j in range(i + 1, k):
            d = dist[nodes[i], nodes[j]]
            c = UNREACHABLE if d < 0 else d * PERTURB_SCALE + _jitter(nodes[i], nodes[j], span)
            direct[i, j] = c
            direct[j, i] = c
    return direct, bnd


@njit(cache=True)
def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@njit(cache=True)
def _solve_candidates(m, use, gain):
    ne = 0
    for a in range(m):
        for b in range(a + 1, m):
            if use[a, b]:
                ne += 1
    eu = np.empty(ne, np.int64)
    ev = np.empty(ne, np.int64)
    w = np.empty(ne, np.int64)
    e = 0
    for a in range(m):
        for b in range(a + 1, m):
            if use[a, b]:
                eu[e] = a
                ev[e] = b
                w[e] = gain[a, b]
                e += 1
    return max_weight_matching_duals(m, eu, ev, w, False)


@njit(cache=True)
def _cluster_matching(members, direct, bnd):
    """Heaviest matching of positive pair gains within one cluster.

    Large clusters start from each detector's cheapest partners; pairs left
    out are priced against the final duals and added while any would improve
    the matching, so the result is optimal over all pairs.
    """
    m = members.shape[0]
    gain = np.zeros((m, m), np.int64)
    for a in range(m):
        for b in range(m):
            if a != b:
                i = members[a]
                j = members[b]
                g = bnd[i] + bnd[j] - direct[i, j]
                if g > 0:
                    gain[a, b] = g
    use = np.zeros((m, m), np.bool_)
    if m <= DENSE_CLUSTER:
        for a in range(m):
            for b in range(a + 1, m):
                use[a, b] = gain[a, b] > 0
        return _solve_candidates(m, use, gain)[0]
    cost = np.empty(m, np.int64)
    for a in range(m):
        for b in range(m):
            cost[b] = direct[members[a], members[b]] if gain[a, b] > 0 else UNREACHABLE
        order = np.argsort(cost, kind="mergesort")
        for t in range(min(NEIGHBOURS, m)):
            b = order[t]
            if cost[b] >= UNREACHABLE:
                break
            use[min(a, b), max(a, b)] = True
    mark = np.full(2 * m, -1, np.int64)
    while True:
        mate, dual, bparent = _solve_candidates(m, use, gain)
        added = False
        for a in range(m):
            x = bparent[a]
            while x != -1:
                mark[x] = a
                x = bparent[x]
            for b in range(a + 1, m):
                if use[a, b] or gain[a, b] == 0:
                    continue
                slack = dual[a] + dual[b] - 2 * gain[a, b]
                x = bparent[b]
                while x != -1:
                    if mark[x] == a:
                        slack += 2 * dual[x]
                    x = bparent[x]
                if slack < 0:
                    use[a, b] = True
                    added = True
        mark[:] = -1
        if not added:
            return mate


@njit(cache=True)
def _match_one(nodes, dist, parity, boundary, out_pairs):
    """Decode one syndrome.  Fills ``out_pairs`` (k x 2, partner index or -1 for boundary).

    Returns (flip, weight_units, ok) where ok is False if an unreachable cost was used.
    """
    k = nodes.shape[0]
    if k == 0:
        return 0, 0, True
    direct, bnd = _costs(nodes, dist, boundary)
    parent = np.arange(k)
    for i in range(k):
        for j in range(i + 1, k):
            if direct[i, j] < bnd[i] + bnd[j]:
                ri = _find(parent, i)
                rj = _find(parent, j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    root = np.empty(k, np.int64)
    for i in range(k):
        root[i] = _find(parent, i)
    flip = 0
    weight = 0
    ok = True
    members = np.empty(k, np.int64)
    for r in range(k):
        m = 0
        for i in range(k):
            if root[i] == r:
                members[m] = i
                m += 1
        if m == 0:
            continue
        if m == 1:
            i = members[0]
            out_pairs[i, 0] = i
            out_pairs[i, 1] = -1
            if bnd[i] >= UNREACHABLE:
                ok = False
            flip ^= parity[nodes[i], boundary]
            weight += dist[nodes[i], boundary]
            continue
        # min cost = sum of boundary costs - heaviest matching of positive gains
        mate = _cluster_matching(members[:m], direct, bnd)
        for a in range(m):
            b = mate[a]
            i = members[a]
            if b < 0:
                out_pairs[i, 0] = i
                out_pairs[i, 1] = -1
                if bnd[i] >= UNREACHABLE:
                    ok = False
                flip ^= parity[nodes[i], boundary]
                weight += dist[nodes[i], boundary]
            elif b > a:
                j = members[b]
                out_pairs[i, 0] = i
                out_pairs[i, 1] = j
                out_pairs[j, 0] = j
                out_pairs[j, 1] = i
                if direct[i, j] >= UNREACHABLE:
                    ok = False
                flip ^= parity[nodes[i], nodes[j]]
                weight += dist[nodes[i], nodes[j]]
    return flip, weight, ok


@njit(cache=True)
def _decode_batch(indptr, fired, dist, parity, boundary):
    shots = indptr.shape[0] - 1
    flips = np.zeros(shots, np.uint8)
    weights = np.zeros(shots, np.int64)
    ok = np.ones(shots, np.bool_)
    for s in range(shots):
        a = indptr[s]
        b = indptr[s + 1]
        if a == b:
            continue
        nodes = fired[a:b]
        pairs = np.empty((b - a, 2), np.int64)
        f, w, good = _match_one(nodes, dist, parity, boundary, pairs)
        flips[s] = f
        weights[s] = w
        ok[s] = good
    return flips, weights, ok


def _correction(graph: MatchingGraph, nodes: np.ndarray, pairs: np.ndarray, weight: int, flip: int) -> Correction:
    out = []
    for i, j in pairs:
        if j < 0:
            out.append((int(graph.detectors[nodes[i]]), None))
        elif i < j:
            out.append((int(graph.detectors[nodes[i]]), int(graph.detectors[nodes[j]])))
    return Correction(tuple(sorted(out, key=lambda t: (t[0], -1 if t[1] is None else t[1]))), int(weight), bool(flip))


def decode(graph: MatchingGraph, syndrome: Iterable[int]) -> Correction:
    """Minimum-weight correction for one shot's fired detectors."""
    nodes = graph.nodes_for(syndrome)
    pairs = np.empty((nodes.size, 2), dtype=np.int64)
    flip, weight, ok = _match_one(nodes, graph.dist, graph.parity, graph.boundary, pairs)
    if not ok:
        raise GraphIntegrityError("a fired detector has no path to a partner or the boundary")
    return _correction(graph, nodes, pairs, weight, flip)


def brute_force_match(graph: MatchingGraph, syndrome: Iterable[int]) -> Correction:
    """Exhaustive minimum over every pairing and boundary assignment (at most 12 detectors)."""
    nodes = graph.nodes_for(syndrome)
    k = nodes.size
    if k > MAX_BRUTE_FORCE:
        raise CapabilityError(f"brute-force matching supports at most {MAX_BRUTE_FORCE} detectors, got {k}")
    direct, bnd = _costs(nodes, graph.dist, graph.boundary)
    direct = direct.tolist()
    bnd = bnd.tolist()
    full = (1 << k) - 1
    best = [0] * (1 << k)
    choice = [(-1, -1)] * (1 << k)
    for mask in range(1, full + 1):
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        top = bnd[i] + best[rest]
        pick = (i, -1)
        r = rest
        while r:
            j = (r & -r).bit_length() - 1
            r &= r - 1
            c = direct[i][j] + best[rest & ~(1 << j)]
            if c < top:
                top = c
                pick = (i, j)
        best[mask] = top
        choice[mask] = pick
    pairs = np.empty((k, 2), dtype=np.int64)
    mask = full
    flip = 0
    weight = 0
    b = graph.boundary
    while mask:
        i, j = choice[mask]
        if j < 0:
            if bnd[i] >= UNREACHABLE:
                raise GraphIntegrityError("a fired detector has no path to the boundary")
            pairs[i] = (i, -1)
            flip ^= int(graph.parity[nodes[i], b])
            weight += int(graph.dist[nodes[i], b])
            mask &= ~(1 << i)
        else:
            if direct[i][j] >= UNREACHABLE:
                raise GraphIntegrityError("matched detectors are disconnected")
            pairs[i] = (i, j)
            pairs[j] = (j, i)
            flip ^= int(graph.parity[nodes[i], nodes[j]])
            weight += int(graph.dist[nodes[i], nodes[j]])
            mask &= ~((1 << i) | (1 << j))
    return _correction(graph, nodes, pairs, weight, flip)


def observable_graph(dem: DetectorErrorModel) -> MatchingGraph:
    """Matching graph over the basis graphs whose edges can flip the observable."""
    bases = sorted({e.basis for e in dem.edges if e.observable})
    return MatchingGraph(dem, bases)


def predict_flips(graph: MatchingGraph, det_bits: np.ndarray) -> np.ndarray:
    """Predicted observable flip per shot from a (shots x detectors) boolean matrix."""
    det_bits = np.asarray(det_bits, dtype=bool)
    if det_bits.ndim != 2 or det_bits.shape[1] != graph.detector_count:
        raise InvalidParameterError(
            f"detector matrix has {det_bits.shape[-1]} columns, graph expects {graph.detector_count}")
    sub = det_bits[:, graph.detectors]
    rows, cols = np.nonzero(sub)
    indptr = np.zeros(sub.shape[0] + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=sub.shape[0]), out=indptr[1:])
    flips, _, ok = _decode_batch(indptr, cols.astype(np.int64), graph.dist, graph.parity, graph.boundary)
    if not ok.all():
        raise GraphIntegrityError("a fired detector has no path to a partner or the boundary")
    return flips.astype(bool)


def predict_flips_words(graph: MatchingGraph, det_words: np.ndarray, shots: int) -> np.ndarray:
    """Like :func:`predict_flips` but from packed (detectors x words) uint64 lanes."""
    words = det_words[graph.detectors]
    if words.shape[0] == 0:
        return np.zeros(shots, dtype=bool)
    bits = np.unpackbits(words.astype("<u8", copy=False).view(np.uint8).reshape(words.shape[0], -1), axis=1,
                         bitorder="little")[:, :shots]
    cols, rows = np.nonzero(bits)
    order = np.argsort(rows, kind="stable")
    rows = rows[order]
    cols = cols[order]
    indptr = np.zeros(shots + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=shots), out=indptr[1:])
    flips, _, ok = _decode_batch(indptr, cols.astype(np.int64), graph.dist, graph.parity, graph.boundary)
    if not ok.all():
        raise GraphIntegrityError("a fired detector has no path to a partner or the boundary")
    return flips.astype(bool)


def logical_error_count(circuit: Circuit, samples, dem: DetectorErrorModel,
                        graph: Optional[MatchingGraph] = None) -> int:
    """Shots whose decoded observable prediction disagrees with the sampled flip."""
    if samples.num_detectors != dem.detector_count or circuit.num_detectors != dem.detector_count:
        raise InvalidParameterError(
            f"detector counts disagree: samples {samples.num_detectors}, model {dem.detector_count}, "
            f"circuit {circuit.num_detectors}")
    if samples.shots == 0:
        return 0
    graph = graph or observable_graph(dem)
    pred = predict_flips(graph, samples.detector_bits())
    return int(np.count_nonzero(pred != samples.observable_flips()))


def decision_dump(graph: MatchingGraph, det_bits: np.ndarray, actual: Sequence[bool]) -> str:
    """One line per shot: fired detectors, predicted flip, actual flip."""
    lines = []
    pred = predict_flips(graph, det_bits)
    for s in range(det_bits.shape[0]):
        fired = " ".join(str(d) for d in np.flatnonzero(det_bits[s]))
        lines.append(f"{s} pred={int(pred[s])} actual={int(actual[s])} fired=[{fired}]")
    return "\n".join(lines) + "\n"
