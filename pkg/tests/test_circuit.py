from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from surfmem.builder import Basis, BuildOptions, build_memory_circuit
from surfmem.circuit import Circuit, Instruction, RepeatBlock, emit_text, parse_text
from surfmem.errors import CircuitSyntaxError, OrderValidityError
from surfmem.frame_sim import check_deterministic, sample
from surfmem.geometry import CodeFamily, build_layout

GOLDEN = Path(__file__).parent / "golden"


def _golden_params(path: Path):
    fam, d, order, basis, p = path.stem.split("_", 4)
    return fam, int(d[1:]), order, basis[-1], float(p[1:])


@pytest.mark.parametrize("path", sorted(GOLDEN.glob("*.stim")), ids=lambda p: p.stem)
def test_golden_circuits_are_reproduced(path):
    fam, d, order, basis, p = _golden_params(path)
    built = build_memory_circuit(build_layout(fam, d), order, p, BuildOptions(basis=Basis(basis)))
    assert emit_text(built) == path.read_text()
    assert emit_text(parse_text(path.read_text())) == path.read_text()


def test_small_unrotated_structure():
    text = (GOLDEN / "unrotated_d2_21302130_memoryZ_p0.001.stim").read_text()
    c = parse_text(text)
    top = Counter(i.name for i in c.items if isinstance(i, Instruction))
    blocks = [i for i in c.items if isinstance(i, RepeatBlock)]
    assert len(blocks) == 1 and blocks[0].count == 5  # 3d rounds, first one unrolled
    body = Counter(i.name for i in blocks[0].body.items)
    assert body["CX"] == 4 and body["H"] == 2 and body["MR"] == 1 and body["DEPOLARIZE2"] == 4
    assert body["DETECTOR"] == 2  # Z-type stabilisers only
    assert top["R"] == 1 and top["M"] == 1 and top["OBSERVABLE_INCLUDE"] == 1
    assert c.num_qubits == 9 and c.num_detectors == 2 + 5 * 2 + 2


@pytest.mark.parametrize("family, d, expected", [
    (CodeFamily.ROTATED, 3, 4 + 8 * 4 + 4),
    (CodeFamily.UNROTATED, 3, 6 + 8 * 6 + 6),
])
def test_detector_count_with_excluded_opposite_basis(family, d, expected):
    c = build_memory_circuit(build_layout(family, d), "10231203", 0.001, BuildOptions(rounds=9))
    assert c.num_detectors == expected


def test_including_opposite_detectors_adds_later_rounds_only():
    layout = build_layout(CodeFamily.ROTATED, 3)
    c = build_memory_circuit(layout, "32013021", 0.001, BuildOptions(rounds=9, exclude_opposite_detectors=False))
    assert c.num_detectors == 40 + 4 * 8


@pytest.mark.parametrize("family", list(CodeFamily))
@pytest.mark.parametrize("basis", ["X", "Z"])
@pytest.mark.parametrize("exclude", [True, False])
def test_noiseless_circuits_are_deterministic(family, basis, exclude):
    layout = build_layout(family, 3)
    order = "32013021" if family is CodeFamily.ROTATED else "10231203"
    c = build_memory_circuit(layout, order, 0.0, BuildOptions(basis=Basis(basis), exclude_opposite_detectors=exclude))
    check_deterministic(c)
    rec = sample(c, 10_000, seed=1)
    assert not rec.detectors.any() and not rec.observables.any()


def test_invalid_order_is_rejected_with_reasons():
    layout = build_layout(CodeFamily.ROTATED, 3)
    with pytest.raises(OrderValidityError) as info:
        build_memory_circuit(layout, "01231023", 0.001)
    assert info.value.failures


def test_bypass_parallel_flag():
    layout = build_layout(CodeFamily.UNROTATED, 3)
    order = "10230132"  # commutes but mixes axes within steps
    with pytest.raises(OrderValidityError):
        build_memory_circuit(layout, order, 0.001)
    c = build_memory_circuit(layout, order, 0.0, BuildOptions(bypass_parallel_criterion=True))
    check_deterministic(c)


def _steps(c: Circuit):
    step: list[Instruction] = []
    for ins in c.flattened():
        if ins.name == "TICK":
            yield step
            step = []
        else:
            step.append(ins)
    yield step


ANNOTATIONS = ("DETECTOR", "OBSERVABLE_INCLUDE", "SHIFT_COORDS", "QUBIT_COORDS")


@pytest.mark.parametrize("family", list(CodeFamily))
def test_noise_channels_per_step(family):
    layout = build_layout(family, 3)
    order = "32013021" if family is CodeFamily.ROTATED else "10231203"
    c = build_memory_circuit(layout, order, 0.001)
    data = set(range(layout.num_data))
    for step in _steps(c):
        noisy = Counter(q for ins in step if ins.is_noise for q in ins.targets)
        gate_qubits = [q for ins in step if not ins.is_noise and ins.name not in ANNOTATIONS for q in ins.targets]
        assert len(gate_qubits) == len(set(gate_qubits))
        assert set(gate_qubits) <= set(noisy)
        mr = {q for ins in step if ins.name == "MR" for q in ins.targets}
        # only measure+reset carries two channels (outcome flip before, reset flip after)
        assert {q for q, n in noisy.items() if n > 1} == mr
        if any(ins.name == "M" for ins in step):
            continue  # final readout touches data only
        assert data <= set(noisy)
        if gate_qubits:
            assert set(noisy) == set(range(layout.num_qubits))


def test_z_aux_idle_toggle_only_changes_hadamard_idles():
    layout = build_layout(CodeFamily.ROTATED, 3)
    on = build_memory_circuit(layout, "32013021", 0.001)
    off = build_memory_circuit(layout, "32013021", 0.001, BuildOptions(z_aux_idle_during_h=False))
    z_aux = {layout.num_data + i for i, s in enumerate(layout.stabilisers) if s.pauli == "Z"}
    a, b = list(on.flattened()), list(off.flattened())
    assert len(a) == len(b)
    changed = 0
    for x, y in zip(a, b):
        if x != y:
            assert x.name == y.name == "DEPOLARIZE1"
            assert set(x.targets) - set(y.targets) == z_aux
            changed += 1
    assert changed == 2 * 9


def test_round_uniformity_uses_repeat_block():
    c = build_memory_circuit(build_layout(CodeFamily.UNROTATED, 3), "10231203", 0.001)
    blocks = [i for i in c.items if isinstance(i, RepeatBlock)]
    assert len(blocks) == 1 and blocks[0].count == 8


def test_parse_flip_channel():
    c = parse_text("X_ERROR(0.001) 3 5")
    ins = c.items[0]
    assert ins.name == "X_ERROR" and ins.args == (0.001,) and ins.targets == (3, 5)


def test_empty_input():
    c = parse_text("")
    assert c.num_measurements == 0 and c.num_detectors == 0 and emit_text(c) == ""


def test_repeat_block_measurements():
    c = parse_text("REPEAT 3 {\n M 0\n}\n")
    assert c.num_measurements == 3
    rec = sample(c, 5, seed=0)
    assert rec.shots == 5


@pytest.mark.parametrize("text, line", [
    ("H 0\nFOO 1\n", 2),
    ("M 0\nDETECTOR rec[-2]\n", None),
    ("M 0\nDETECTOR rec[0]\n", 2),
    ("REPEAT 2 {\nH 0\n", 1),
    ("H 0\n}\n", 2),
    ("X_ERROR(abc) 0\n", 1),
    ("CX 0\n", 1),
])
def test_syntax_errors_report_lines(text, line):
    with pytest.raises(CircuitSyntaxError) as info:
        parse_text(text)
    assert info.value.line == line


def test_aliases_and_comments():
    c = parse_text("RZ 0 1  # reset\nCNOT 0 1\nMZ 1\nDETECTOR rec[-1]\n")
    assert [i.name for i in c.items] == ["R", "CX", "M", "DETECTOR"]


def test_without_noise_drops_channels():
    c = build_memory_circuit(build_layout(CodeFamily.ROTATED, 3), "32013021", 0.01)
    clean = c.without_noise()
    assert not any(i.is_noise for i in clean.flattened())
    assert clean.num_detectors == c.num_detectors


def test_detector_coordinates_advance_per_round():
    c = build_memory_circuit(build_layout(CodeFamily.ROTATED, 3), "32013021", 0.001)
    ts = np.array([coord[2] for coord in c.detector_coords()])
    assert ts.min() == 0 and ts.max() == 9
    assert np.all(np.diff(ts) >= 0)
