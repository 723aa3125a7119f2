import itertools

import numpy as np
import pytest

from surfmem.builder import Basis, BuildOptions, build_memory_circuit
from surfmem.blossom import max_weight_matching, min_weight_perfect_matching
from surfmem.decoder import (
    DENSE_CLUSTER,
    MatchingGraph,
    _cluster_matching,
    brute_force_match,
    decision_dump,
    decode,
    logical_error_count,
    observable_graph,
    predict_flips,
)
from surfmem.dem import DemEdge, DetectorErrorModel, extract_dem
from surfmem.errors import CapabilityError, GraphIntegrityError, InvalidParameterError
from surfmem.frame_sim import Fault, compile_circuit, sample, sample_injected
from surfmem.geometry import CodeFamily, build_layout
from surfmem.stats import ShotStats, mle

DEFAULT_ORDER = {CodeFamily.ROTATED: "32013021", CodeFamily.UNROTATED: "10231203"}


def setup(family=CodeFamily.ROTATED, d=3, p=0.001, basis="Z"):
    c = build_memory_circuit(build_layout(family, d), DEFAULT_ORDER[family], p, BuildOptions(basis=Basis(basis)))
    dem = extract_dem(c)
    return c, dem, observable_graph(dem)


def line_graph():
    # boundary - D0 - D1 - boundary with a cheap middle edge
    edges = [DemEdge((0,), False, 0.01), DemEdge((0, 1), True, 0.2), DemEdge((1,), False, 0.01)]
    return MatchingGraph(DetectorErrorModel(2, edges))


def test_empty_syndrome():
    _, _, g = setup()
    c = decode(g, [])
    assert c.pairs == () and c.flip is False and c.weight_units == 0


def test_forced_pair():
    g = line_graph()
    c = decode(g, [0, 1])
    assert c.pairs == ((0, 1),) and c.flip is True


def test_boundary_matching():
    g = line_graph()
    c = decode(g, [1])
    assert c.pairs == ((1, None),) and c.flip is False


@pytest.mark.parametrize("family", list(CodeFamily))
@pytest.mark.parametrize("d", [3, 5])
def test_decode_matches_brute_force(family, d):
    _, dem, g = setup(family, d, 0.005)
    rng = np.random.default_rng(d)
    dets = g.detectors
    for _ in range(60):
        k = int(rng.integers(1, 11))
        syn = rng.choice(dets, size=k, replace=False)
        a, b = decode(g, syn), brute_force_match(g, syn)
        assert (a.weight_units, a.flip, a.pairs) == (b.weight_units, b.flip, b.pairs)
        fired = {int(x) for x in syn}
        covered = [x for pair in a.pairs for x in pair if x is not None]
        assert sorted(covered) == sorted(fired)


def test_brute_force_capability_limit():
    _, _, g = setup()
    with pytest.raises(CapabilityError):
        brute_force_match(g, g.detectors[:13])


def test_unreachable_detector():
    dem = DetectorErrorModel(3, [DemEdge((0,), True, 0.1), DemEdge((1, 2), False, 0.1)])
    g = MatchingGraph(dem)
    with pytest.raises(GraphIntegrityError):
        g.check_connected()
    with pytest.raises(GraphIntegrityError):
        decode(g, [1])


def test_syndrome_outside_graph():
    _, _, g = setup()
    with pytest.raises(InvalidParameterError):
        decode(g, [10_000])


def test_noiseless_samples_have_no_errors():
    c, dem, _ = setup()
    clean = c.without_noise()
    assert logical_error_count(clean, sample(clean, 2000, seed=1), dem) == 0


def test_detector_count_mismatch():
    c, dem, _ = setup()
    other = setup(CodeFamily.ROTATED, 5)[0]
    with pytest.raises(InvalidParameterError):
        logical_error_count(other, sample(other, 10, seed=1), dem)


@pytest.mark.parametrize("family", list(CodeFamily))
@pytest.mark.parametrize("d", [3, 5])
def test_short_chains_along_logical_path_are_corrected(family, d):
    layout = build_layout(family, d)
    c, dem, g = setup(family, d, 0.001)
    prog = compile_circuit(c)
    # a data idle channel in the middle of the experiment
    idles = [i for i, ins in enumerate(prog.ops)
             if ins.name == "DEPOLARIZE1" and set(range(layout.num_data)) <= set(ins.targets)]
    where = idles[len(idles) // 2]
    group = {q: k for k, q in enumerate(prog.ops[where].targets)}
    path = layout.logical_support("X")  # X errors along X_L flip the memory-Z observable
    injections = []
    for size in range(1, (d + 1) // 2):
        for chain in itertools.combinations(path, size):
            injections.append([Fault(where, group[q], "X") for q in chain])
    rec = sample_injected(c, injections)
    pred = predict_flips(g, rec.detector_bits())
    assert np.array_equal(pred, rec.observable_flips())


def test_repeat_runs_are_statistically_consistent():
    c, dem, g = setup(CodeFamily.ROTATED, 3, 0.005)
    n = 100_000
    k1 = logical_error_count(c, sample(c, n, seed=1), dem, g)
    k2 = logical_error_count(c, sample(c, n, seed=2), dem, g)
    e1, e2 = mle(ShotStats(n, k1)), mle(ShotStats(n, k2))
    assert e1.interval_low <= e2.p_hat <= e1.interval_high
    assert e2.interval_low <= e1.p_hat <= e2.interval_high


def test_larger_distance_helps_below_threshold():
    results = {}
    for d in (3, 5):
        c, dem, g = setup(CodeFamily.ROTATED, d, 0.003)
        n = 30_000
        results[d] = mle(ShotStats(n, logical_error_count(c, sample(c, n, seed=d), dem, g)))
    gap = results[3].p_hat - results[5].p_hat
    sigma = np.hypot(results[3].rmse, results[5].rmse)
    assert gap > 5 * sigma


def test_decision_dump_lines():
    c, dem, g = setup()
    rec = sample(c, 5, seed=4)
    text = decision_dump(g, rec.detector_bits(), rec.observable_flips())
    lines = text.splitlines()
    assert len(lines) == 5 and lines[0].startswith("0 pred=")


@pytest.mark.parametrize("seed", range(3))
def test_priced_sparse_matching_equals_dense(seed):
    # clusters far above the dense cutoff, compared against the blossom on every positive-gain pair
    rng = np.random.default_rng(seed)
    for m in (30, 60, 90):
        pts = rng.random((m, 2)) * 20
        members = np.arange(m, dtype=np.int64)
        direct = (np.abs(pts[:, None] - pts[None]).sum(-1) * 1000).astype(np.int64) * 64 + rng.integers(0, 64, (m, m))
        direct = np.triu(direct, 1) + np.triu(direct, 1).T
        bnd = (np.minimum(pts[:, 0], 20 - pts[:, 0]) * 1000).astype(np.int64) * 64
        mate = _cluster_matching(members, direct, bnd)
        iu, ju = np.triu_indices(m, 1)
        gain = bnd[iu] + bnd[ju] - direct[iu, ju]
        keep = gain > 0
        ref = max_weight_matching(m, iu[keep].astype(np.int64), ju[keep].astype(np.int64), gain[keep], False)

        def total(mt):
            return sum(bnd[a] + bnd[b] - direct[a, b] for a, b in enumerate(mt) if b > a)

        assert total(mate) == total(ref)
        assert all(mate[b] == a for a, b in enumerate(mate) if b >= 0)


def test_large_syndromes_match_dense_oracle():
    # large syndromes exercise the priced path; weights must equal a dense re-solve
    c, dem, g = setup(CodeFamily.ROTATED, 7, 0.008)
    bits = sample(c, 40, seed=5).detector_bits()
    for row in bits:
        syn = np.flatnonzero(row)
        assert syn.size > DENSE_CLUSTER
        corr = decode(g, syn)
        nodes = g.nodes_for(syn)
        k = nodes.size
        # dense min-cost perfect matching with one boundary copy per detector
        cost = np.zeros((2 * k, 2 * k), np.int64)
        dd = g.dist[np.ix_(nodes, nodes)]
        db = g.dist[nodes, g.boundary]
        cost[:k, :k] = dd
        cost[:k, k:] = np.where(np.eye(k, dtype=bool), db[:, None], 10**15)
        cost[k:, :k] = cost[:k, k:].T
        mate = min_weight_perfect_matching(cost)
        best = sum(cost[v, mate[v]] for v in range(2 * k) if v < mate[v])
        assert corr.weight_units == best
