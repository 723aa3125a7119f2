import itertools

import numpy as np
import pytest

from surfmem.blossom import complete_graph_edges, max_weight_matching, min_weight_perfect_matching


def brute_max_weight(n, edges, maxcardinality):
    """(cardinality, weight) of the best matching by exhaustive search."""
    best = (0, 0) if maxcardinality else 0
    m = len(edges)

    def rec(i, used, card, weight):
        nonlocal best
        key = (card, weight) if maxcardinality else weight
        if key > best:
            best = key
        for j in range(i, m):
            u, v, w = edges[j]
            if u not in used and v not in used:
                rec(j + 1, used | {u, v}, card + 1, weight + w)

    rec(0, frozenset(), 0, 0)
    return best


def score(n, edges, mate, maxcardinality):
    weights = {(min(u, v), max(u, v)): w for u, v, w in edges}
    card = weight = 0
    for v in range(n):
        u = mate[v]
        if u >= 0:
            assert mate[u] == v
            if v < u:
                card += 1
                weight += weights[(v, u)]
    return (card, weight) if maxcardinality else weight


@pytest.mark.parametrize("maxcardinality", [True, False])
@pytest.mark.parametrize("seed", range(40))
def test_random_graphs_match_exhaustive_search(seed, maxcardinality):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    pairs = [(u, v) for u, v in itertools.combinations(range(n), 2) if rng.random() < 0.6]
    edges = [(u, v, int(rng.integers(-3, 20))) for u, v in pairs]
    if not edges:
        return
    eu = np.array([e[0] for e in edges], np.int64)
    ev = np.array([e[1] for e in edges], np.int64)
    w = np.array([e[2] for e in edges], np.int64)
    mate = max_weight_matching(n, eu, ev, w, maxcardinality)
    assert score(n, edges, mate, maxcardinality) == brute_max_weight(n, edges, maxcardinality)


def brute_min_perfect(cost):
    n = cost.shape[0]

    def rec(rest):
        if not rest:
            return 0
        a = rest[0]
        return min(cost[a, b] + rec(rest[1:i] + rest[i + 1:]) for i, b in enumerate(rest) if i > 0)

    return rec(tuple(range(n)))


@pytest.mark.parametrize("seed", range(20))
def test_min_weight_perfect_matching(seed):
    rng = np.random.default_rng(100 + seed)
    n = 2 * int(rng.integers(1, 5))
    c = rng.integers(0, 50, size=(n, n))
    cost = np.triu(c, 1) + np.triu(c, 1).T
    mate = min_weight_perfect_matching(cost)
    assert np.all(mate >= 0)
    total = sum(cost[v, mate[v]] for v in range(n) if v < mate[v])
    assert total == brute_min_perfect(cost)


def test_odd_side_rejected():
    with pytest.raises(ValueError):
        min_weight_perfect_matching(np.zeros((3, 3), np.int64))


def test_complete_graph_edges():
    eu, ev = complete_graph_edges(4)
    assert list(zip(eu, ev)) == list(itertools.combinations(range(4), 2))
