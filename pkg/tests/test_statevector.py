from math import sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bqt.channels import make_bell_pair, make_channel_eq4
from bqt.statevector import (
    CNOT,
    CZ,
    H,
    X,
    ContractViolation,
    Gate,
    NormalizationError,
    PureState,
    apply_gate,
    basis_state,
    branch_enumerate,
    fidelity,
    from_amplitudes,
    partial_trace,
    projector,
    sample_measure,
    tensor,
)

from .conftest import random_states

S = 1 / sqrt(2)
PLUS = from_amplitudes(["q"], [S, S])


def test_basis_state_single_and_pair():
    assert np.allclose(basis_state(["a1"], "0").amps, [1, 0])
    assert np.allclose(basis_state(["a1", "a2"], "11").amps, [0, 0, 0, 1])


def test_basis_state_msb_is_leftmost_label():
    assert basis_state(["a1", "a2"], "10").amps[2] == 1


@pytest.mark.parametrize("labels, bits", [(["x"], "2"), (["x", "y"], "0")])
def test_basis_state_rejects_bad_bits(labels, bits):
    with pytest.raises(ContractViolation):
        basis_state(labels, bits)


def test_from_amplitudes_validates_norm_and_length():
    assert np.allclose(PLUS.amps, [S, S])
    with pytest.raises(NormalizationError):
        from_amplitudes(["q"], [1, 1])
    state = from_amplitudes(["q1", "q2"], [0.5, 0.5, 0.5, -0.5])
    assert state.norm() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ContractViolation):
        from_amplitudes(["q"], [1, 0, 0])


def test_duplicate_labels_rejected():
    with pytest.raises(ContractViolation):
        basis_state(["a", "a"], "00")


def test_cnot_truth_table():
    out = apply_gate(basis_state(["c", "t"], "10"), CNOT, ["c", "t"])
    assert fidelity(out, basis_state(["c", "t"], "11")) == pytest.approx(1.0)


def test_cnot_respects_label_order_not_position():
    out = apply_gate(basis_state(["t", "c"], "01"), CNOT, ["c", "t"])
    assert np.allclose(out.amps, basis_state(["t", "c"], "11").amps)


def test_cnot_disentangles_two_term_state():
    alpha, beta = 0.6, 0.8j
    state = from_amplitudes(["a1", "a2"], [alpha, 0, 0, beta])
    out = apply_gate(state, CNOT, ["a1", "a2"])
    assert np.allclose(out.amps, [alpha, 0, beta, 0])


def test_hadamard_on_zero():
    out = apply_gate(basis_state(["q"], "0"), H, ["q"])
    assert np.allclose(out.amps, [S, S])


def test_apply_gate_unknown_label_and_arity():
    with pytest.raises(ContractViolation):
        apply_gate(basis_state(["q"], "0"), H, ["r"])
    with pytest.raises(ContractViolation):
        apply_gate(basis_state(["q", "r"], "00"), CNOT, ["q"])


def test_non_unitary_gate_rejected():
    with pytest.raises(ContractViolation):
        Gate("bad", [[1, 1], [0, 1]])


def test_tensor_basis_and_product():
    assert np.allclose(tensor(basis_state(["a"], "0"), basis_state(["b"], "1")).amps, [0, 1, 0, 0])
    alpha, beta = 0.6, 0.8
    msg = from_amplitudes(["m"], [alpha, beta])
    out = tensor(msg, make_bell_pair(0, ("A", "B")))
    # hand expansion of (a|0> + b|1>)(|00> + |11>)/sqrt2
    expected = [alpha * S, 0, 0, alpha * S, beta * S, 0, 0, beta * S]
    assert out.labels == ("m", "A", "B")
    assert np.allclose(out.amps, expected)


def test_tensor_shared_label_rejected():
    with pytest.raises(ContractViolation):
        tensor(basis_state(["a1"], "0"), basis_state(["a1"], "1"))


def test_branch_enumerate_plus():
    branches = branch_enumerate(PLUS, ["q"])
    assert [b.bits for b in branches] == ["0", "1"]
    assert [b.prob for b in branches] == pytest.approx([0.5, 0.5])
    assert branches[0].post.n_qubits == 0


def test_branch_enumerate_product_keeps_rest():
    alpha, beta = 0.6, 0.8j
    state = tensor(from_amplitudes(["m"], [alpha, beta]), basis_state(["z"], "0"))
    (branch,) = branch_enumerate(state, ["z"])
    assert branch.bits == "0" and branch.prob == pytest.approx(1.0)
    assert np.allclose(branch.post.amps, [alpha, beta])


def test_branch_enumerate_eq4_on_a1():
    state = make_channel_eq4()
    # oracle: A1 is the leading index bit, so sum |amp|^2 over each half of the vector
    amps = state.amps
    expected = [float(np.sum(np.abs(amps[:8]) ** 2)), float(np.sum(np.abs(amps[8:]) ** 2))]
    branches = branch_enumerate(state, ["A1"])
    assert [b.prob for b in branches] == pytest.approx(expected)
    assert expected == pytest.approx([0.5, 0.5])


def test_sample_measure_deterministic_outcome():
    rng = np.random.default_rng(0)
    for _ in range(20):
        bits, post = sample_measure(basis_state(["q"], "0"), ["q"], rng)
        assert bits == "0"


def test_sample_measure_empty_list_is_identity():
    bits, post = sample_measure(PLUS, [], np.random.default_rng(1))
    assert bits == "" and post is PLUS


def test_sample_measure_plus_frequency():
    rng = np.random.default_rng(42)
    zeros = sum(sample_measure(PLUS, ["q"], rng)[0] == "0" for _ in range(100_000))
    assert 0.495 <= zeros / 100_000 <= 0.505


def test_sample_measure_is_seeded():
    draw = lambda seed: [sample_measure(PLUS, ["q"], np.random.default_rng(seed))[0] for _ in range(1)]
    assert draw(5) == draw(5)


def test_fidelity_examples():
    zero, one = basis_state(["q"], "0"), basis_state(["q"], "1")
    assert fidelity(PLUS, PLUS) == pytest.approx(1.0)
    assert fidelity(zero, one) == pytest.approx(0.0)
    assert fidelity(zero, PLUS) == pytest.approx(0.5)
    with pytest.raises(ContractViolation):
        fidelity(zero, basis_state(["r"], "0"))


def test_partial_trace_examples():
    rho = partial_trace(make_bell_pair(0, ("a", "b")), ["a"])
    assert np.allclose(rho.rho, np.eye(2) / 2)
    rho = partial_trace(basis_state(["a", "b"], "00"), ["a"])
    assert np.allclose(rho.rho, [[1, 0], [0, 0]])


def test_partial_trace_eq4_onto_bob():
    state = make_channel_eq4()
    # brute-force oracle: rho[b, b'] = sum_a amp(a, b) conj(amp(a, b'))
    lab = state.labels
    ib1, ib2 = lab.index("B1"), lab.index("B2")
    oracle = np.zeros((4, 4), dtype=complex)
    for i in range(16):
        for j in range(16):
            bi, bj = format(i, "04b"), format(j, "04b")
            rest_i = [bi[k] for k in range(4) if k not in (ib1, ib2)]
            rest_j = [bj[k] for k in range(4) if k not in (ib1, ib2)]
            if rest_i == rest_j:
                r = int(bi[ib1] + bi[ib2], 2)
                c = int(bj[ib1] + bj[ib2], 2)
                oracle[r, c] += state.amps[i] * np.conj(state.amps[j])
    assert np.allclose(oracle, np.eye(4) / 4)
    assert np.allclose(partial_trace(state, ["B1", "B2"]).rho, oracle, atol=1e-10)


def test_states_are_immutable():
    with pytest.raises(ValueError):
        PLUS.amps[0] = 0


GATES = [H, X, CZ, CNOT]


@settings(max_examples=50, deadline=None)
@given(random_states(), st.sampled_from(GATES), st.permutations(["q0", "q1", "q2"]))
def test_gates_preserve_norm(state, gate, order):
    out = apply_gate(state, gate, order[: gate.arity])
    assert abs(out.norm() - 1) < 1e-10


@settings(max_examples=50, deadline=None)
@given(random_states(), st.lists(st.sampled_from(["q0", "q1", "q2"]), min_size=1, max_size=3, unique=True))
def test_branch_probabilities_sum_to_one(state, qubits):
    assert sum(b.prob for b in branch_enumerate(state, qubits)) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(random_states(("a0", "a1")), random_states(("b0",)))
def test_tensor_trace_duality(a, b):
    rho = partial_trace(tensor(a, b), a.labels)
    assert np.allclose(rho.rho, projector(a).rho, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(random_states(), random_states(), st.permutations(["q0", "q1", "q2"]))
def test_fidelity_label_order_independent(a, b, order):
    assert fidelity(a, b) == pytest.approx(fidelity(a, b.permuted(order)), abs=1e-12)


def test_sampling_matches_enumeration_within_3_sigma():
    rng = np.random.default_rng(7)
    state = from_amplitudes(["q0", "q1"], np.array([0.1, 0.5, 0.7, 0.5]) / np.linalg.norm([0.1, 0.5, 0.7, 0.5]))
    exact = {b.bits: b.prob for b in branch_enumerate(state, ["q0", "q1"])}
    n = 100_000
    counts = {}
    for _ in range(n):
        bits, _ = sample_measure(state, ["q0", "q1"], rng)
        counts[bits] = counts.get(bits, 0) + 1
    for bits, p in exact.items():
        sigma = sqrt(p * (1 - p) / n)
        assert abs(counts.get(bits, 0) / n - p) <= 3 * sigma
