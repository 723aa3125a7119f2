import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surfmem.builder import Basis, BuildOptions, build_memory_circuit
from surfmem.circuit import emit_text, parse_text
from surfmem.dem import (
    DemEdge,
    DetectorErrorModel,
    edge_marginals,
    edge_weight,
    extract_dem,
    mechanism_symptoms,
    merge_probability,
    parse_dem,
)
from surfmem.errors import InvalidParameterError, NonGraphlikeError
from surfmem.frame_sim import Fault, sample, sample_injected
from surfmem.geometry import CodeFamily, build_layout, valid_orders

DEFAULT_ORDER = {CodeFamily.ROTATED: "32013021", CodeFamily.UNROTATED: "10231203"}


def circuit(family=CodeFamily.ROTATED, d=3, p=0.001, basis="Z", **opts):
    return build_memory_circuit(build_layout(family, d), DEFAULT_ORDER[family], p,
                                BuildOptions(basis=Basis(basis), **opts))


def test_edge_weight_value():
    assert edge_weight(0.001) == pytest.approx(math.log(999), abs=1e-12)
    assert edge_weight(0.001) == pytest.approx(6.9068, abs=1e-4)


def test_edge_weight_limit():
    assert 0 < edge_weight(0.5 - 1e-12) < 1e-10


@pytest.mark.parametrize("p", [0.0, 0.5, -0.1, 1.2])
def test_edge_weight_domain(p):
    with pytest.raises(InvalidParameterError):
        edge_weight(p)


@given(st.floats(1e-12, 0.499), st.floats(1e-12, 0.499))
def test_edge_weight_decreasing(p1, p2):
    if p1 < p2:
        assert edge_weight(p1) > edge_weight(p2)


def test_merge_probability():
    assert merge_probability(0.001, 0.002) == pytest.approx(0.002996, abs=1e-15)


@given(st.floats(0, 0.5), st.floats(0, 0.5), st.floats(0, 0.5))
def test_merge_is_associative_and_commutative(a, b, c):
    assert merge_probability(a, b) == pytest.approx(merge_probability(b, a), abs=1e-15)
    left = merge_probability(merge_probability(a, b), c)
    right = merge_probability(a, merge_probability(b, c))
    assert left == pytest.approx(right, abs=1e-12)


def test_measurement_flip_edge_has_probability_p():
    p = 0.004
    text = emit_text(circuit(p=p))
    # keep only the outcome flips that precede auxiliary measure+reset
    lines = text.splitlines()
    kept = []
    for i, line in enumerate(lines):
        stripped = line.strip()
        if stripped.startswith(("X_ERROR", "Z_ERROR", "DEPOLARIZE")):
            nxt = lines[i + 1].strip() if i + 1 < len(lines) else ""
            if not (stripped.startswith("X_ERROR") and nxt.startswith("MR")):
                continue
        kept.append(line)
    c = parse_text("\n".join(kept) + "\n")
    dem = extract_dem(c)
    coords = c.detector_coords()
    bulk = [e for e in dem.edges if len(e.detectors) == 2]
    assert bulk
    for e in bulk:
        a, b = (coords[i] for i in e.detectors)
        assert a[:2] == b[:2] and abs(a[2] - b[2]) == 1
        assert e.probability == pytest.approx(p, rel=1e-12)


@pytest.mark.parametrize("family", list(CodeFamily))
@pytest.mark.parametrize("basis", ["X", "Z"])
def test_injection_reproduces_every_mechanism(family, basis):
    c = circuit(family, 3, 0.001, basis)
    entries = mechanism_symptoms(c)
    faults = [[Fault(m.instruction, m.group, m.term)] for m, _, _ in entries]
    rec = sample_injected(c, faults)
    bits = rec.detector_bits()
    flips = rec.observable_flips()
    for k, (_, (dets, obs), _) in enumerate(entries):
        assert tuple(np.flatnonzero(bits[k])) == dets
        assert bool(flips[k]) == obs


@pytest.mark.parametrize("family", list(CodeFamily))
@pytest.mark.parametrize("d", [3, 5])
@pytest.mark.parametrize("basis", ["X", "Z"])
def test_default_builds_are_graphlike(family, d, basis):
    dem = extract_dem(circuit(family, d, 0.001, basis))
    assert dem.split_mechanisms == 0
    assert all(1 <= len(e.detectors) <= 2 for e in dem.edges)
    keys = [(e.basis, e.detectors, e.observable) for e in dem.edges]
    assert len(keys) == len(set(keys))


@pytest.mark.parametrize("order", ["01320312", "10231203", "23102130", "32013021"])
def test_all_valid_rotated_orders_graphlike(order):
    c = build_memory_circuit(build_layout(CodeFamily.ROTATED, 3), order, 0.001,
                             BuildOptions(exclude_opposite_detectors=False))
    dem = extract_dem(c)
    assert set(dem.graph_bases) == {"X", "Z"}
    assert all(len(e.detectors) <= 2 for e in dem.edges)


def test_non_graphlike_fault_is_reported():
    text = "R 0 1 2\nX_ERROR(0.1) 0\nCX 0 1 0 2\nM 0 1 2\nDETECTOR rec[-1]\nDETECTOR rec[-2]\nDETECTOR rec[-3]\n"
    with pytest.raises(NonGraphlikeError):
        extract_dem(parse_text(text))


def test_swap_exchanges_graphs():
    def graphs(swap, basis):
        layout = build_layout(CodeFamily.UNROTATED, 3, stabiliser_swap=swap)
        c = build_memory_circuit(layout, "10231203" if not swap else "12031023", 0.001,
                                 BuildOptions(basis=Basis(basis), exclude_opposite_detectors=False))
        dem = extract_dem(c)
        return {b: sorted((len(e.detectors), round(e.probability, 14)) for e in dem.restrict(b).edges)
                for b in dem.graph_bases}

    plain = graphs(False, "Z")
    swapped = graphs(True, "X")
    assert plain["X"] == swapped["Z"]
    assert plain["Z"] == swapped["X"]


def test_marginals_match_sampling():
    c = circuit(CodeFamily.ROTATED, 3, 0.01)
    dem = extract_dem(c)
    n = 200_000
    observed = sample(c, n, seed=17).detector_bits().mean(axis=0)
    predicted = edge_marginals(dem)
    sigma = np.sqrt(predicted * (1 - predicted) / n)
    assert np.all(np.abs(observed - predicted) < 4.5 * sigma)


def test_text_round_trip():
    dem = extract_dem(circuit())
    text = dem.to_text()
    back = parse_dem(text)
    assert back.detector_count == dem.detector_count
    assert back.to_text() == text
    assert text.startswith(f"# detectors {dem.detector_count}\n")


def test_parse_dem_errors():
    with pytest.raises(InvalidParameterError):
        parse_dem("error(0.1) D0 D1 D2\n")
    with pytest.raises(InvalidParameterError):
        parse_dem("# detectors 1\nerror(0.1) D3\n")


def test_edge_invariants():
    with pytest.raises(InvalidParameterError):
        DemEdge((0, 1), False, 0.6)
    with pytest.raises(InvalidParameterError):
        DemEdge((), False, 0.1)
    e = DemEdge((4,), True, 0.01)
    assert e.boundary and e.weight > 0 and e.to_text() == "error(0.01) D4 L0"


def test_restrict_keeps_detector_ids():
    c = circuit(exclude_opposite_detectors=False)
    dem = extract_dem(c)
    for b in dem.graph_bases:
        sub = dem.restrict(b)
        assert isinstance(sub, DetectorErrorModel)
        assert sub.detector_count == dem.detector_count
        assert all(e.basis == b for e in sub.edges)


def test_prune_option():
    dem = extract_dem(circuit(p=0.001), prune_below=1e-3)
    assert all(e.probability >= 1e-3 for e in dem.edges)


def test_hook_orders_are_graphlike():
    layout = build_layout(CodeFamily.ROTATED, 5)
    assert "21302130" not in {str(o) for o in valid_orders(layout)}
    dem = extract_dem(build_memory_circuit(layout, "21302130", 0.001))
    assert dem.split_mechanisms == 0
