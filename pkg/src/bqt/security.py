"""Decoy-qubit eavesdropping checks.

Decoys are single qubits prepared in a random Z or X eigenstate and slipped
into the transmitted sequence at random positions.  After transmission the
sender reveals positions and bases, the receiver measures each decoy in its
preparation basis, and any mismatch flags the trial.

Two code paths produce the statistics: the per-trial path
(:func:`transmit_with_eve` + :func:`check_decoys`) runs on ``PureState``
objects, and :func:`detection_curve` uses a batched numpy kernel for 10^5
trials.  :func:`per_decoy_mismatch_probability` gives the exact rate by
branch enumeration.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from math import sqrt
from typing import Sequence

import numpy as np

from .statevector import (
    CNOT,
    ContractViolation,
    H,
    PureState,
    apply_gate,
    basis_state,
    branch_enumerate,
    sample_measure,
    tensor,
)

BASES = ("Z", "X")
STRATEGIES = ("none", "intercept-resend", "entangle-measure")
CHUNK = 10_000


@dataclass(frozen=True)
class DecoyQubit:
    basis: str
    bit: int
    position: int


@dataclass(frozen=True)
class DecoyPlan:
    seq_len: int
    decoys: tuple[DecoyQubit, ...]

    def __post_init__(self):
        positions = [d.position for d in self.decoys]
        if len(set(positions)) != len(positions):
            raise ContractViolation("decoy positions must be distinct")
        if any(not 0 <= p < self.seq_len for p in positions):
            raise ContractViolation("decoy position out of range")

    @property
    def positions(self) -> set[int]:
        return {d.position for d in self.decoys}

    @property
    def payload_len(self) -> int:
        return self.seq_len - len(self.decoys)


@dataclass(frozen=True)
class EveStrategy:
    kind: str = "none"
    measure_basis: str | None = None  # Z, X or random; intercept-resend only

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ContractViolation(f"unknown strategy {self.kind!r}")
        if self.kind == "intercept-resend":
            if self.measure_basis not in ("Z", "X", "random"):
                raise ContractViolation(f"bad intercept basis {self.measure_basis!r}")
        elif self.measure_basis is not None:
            raise ContractViolation(f"{self.kind} takes no measure basis")

    @classmethod
    def none(cls) -> EveStrategy:
        return cls("none")

    @classmethod
    def intercept_resend(cls, basis: str = "random") -> EveStrategy:
        return cls("intercept-resend", basis)

    @classmethod
    def entangle_measure(cls) -> EveStrategy:
        return cls("entangle-measure")

    @property
    def name(self) -> str:
        if self.kind == "intercept-resend":
            return f"intercept-resend({self.measure_basis})"
        return self.kind


@dataclass(frozen=True)
class DetectionStats:
    trials: int
    decoys_per_trial: int
    trials_detected: int
    mismatches: int = 0

    @property
    def detection_rate(self) -> float:
        return self.trials_detected / self.trials if self.trials else 0.0

    @property
    def per_decoy_mismatch_rate(self) -> float:
        n = self.trials * self.decoys_per_trial
        return self.mismatches / n if n else 0.0

    def __add__(self, other: DetectionStats) -> DetectionStats:
        if other.decoys_per_trial != self.decoys_per_trial:
            raise ContractViolation("cannot merge stats with different decoy counts")
        return DetectionStats(
            self.trials + other.trials,
            self.decoys_per_trial,
            self.trials_detected + other.trials_detected,
            self.mismatches + other.mismatches,
        )


def make_decoy_plan(seq_len: int, n_decoys: int, rng: np.random.Generator) -> DecoyPlan:
    if n_decoys < 0 or n_decoys > seq_len:
        raise ContractViolation(f"cannot place {n_decoys} decoys in {seq_len} slots")
    positions = sorted(int(p) for p in rng.choice(seq_len, size=n_decoys, replace=False))
    bases = rng.integers(0, 2, size=n_decoys)
    bits = rng.integers(0, 2, size=n_decoys)
    return DecoyPlan(
        seq_len,
        tuple(DecoyQubit(BASES[b], int(v), p) for p, b, v in zip(positions, bases, bits)),
    )


def decoy_state(basis: str, bit: int, label: str) -> PureState:
    state = basis_state([label], str(bit))
    return apply_gate(state, H, [label]) if basis == "X" else state


def _assemble(plan: DecoyPlan, payload: Sequence[PureState]) -> list[PureState]:
    if len(payload) != plan.payload_len:
        raise ContractViolation(f"plan expects {plan.payload_len} payload qubits, got {len(payload)}")
    by_pos = {d.position: d for d in plan.decoys}
    it = iter(payload)
    return [
        decoy_state(by_pos[i].basis, by_pos[i].bit, f"d{i}") if i in by_pos else next(it)
        for i in range(plan.seq_len)
    ]


def _intercept(qubit: PureState, basis: str, rng) -> PureState:
    (label,) = qubit.labels[:1]
    probe = apply_gate(qubit, H, [label]) if basis == "X" else qubit
    bits, _ = sample_measure(probe, [label], rng)
    return decoy_state(basis, int(bits), label)


def transmit_with_eve(
    plan: DecoyPlan,
    payload: Sequence[PureState],
    strategy: EveStrategy,
    rng: np.random.Generator,
) -> list[PureState]:
    """Interleave decoys into ``payload`` and pass every qubit through Eve.

    Eve cannot tell decoys from payload, so she attacks every position.
    Under entangle-measure each received item carries Eve's ancilla
    (label ``eve<i>``) alongside the transmitted qubit, which stays first.
    """
    sent = _assemble(plan, payload)
    if strategy.kind == "none":
        return sent
    received = []
    for i, item in enumerate(sent):
        if item.n_qubits != 1:
            raise ContractViolation("only single-qubit items can be transmitted")
        if strategy.kind == "intercept-resend":
            basis = strategy.measure_basis
            if basis == "random":
                basis = BASES[int(rng.integers(0, 2))]
            received.append(_intercept(item, basis, rng))
        else:
            label = item.labels[0]
            joint = tensor(item, basis_state([f"eve{i}"], "0"))
            received.append(apply_gate(joint, CNOT, [label, f"eve{i}"]))
    return received


def check_decoys(plan: DecoyPlan, received: Sequence[PureState], rng: np.random.Generator) -> DetectionStats:
    """Measure each decoy in its preparation basis; one mismatch flags the trial."""
    if len(received) != plan.seq_len:
        raise ContractViolation(f"expected {plan.seq_len} received qubits, got {len(received)}")
    mismatches = 0
    for d in plan.decoys:
        item = received[d.position]
        label = item.labels[0]
        if d.basis == "X":
            item = apply_gate(item, H, [label])
        bits, _ = sample_measure(item, [label], rng)
        mismatches += int(bits) != d.bit
    return DetectionStats(1, len(plan.decoys), int(mismatches > 0), mismatches)


def per_decoy_mismatch_probability(strategy: EveStrategy) -> float:
    """Exact chance one decoy fails its check, averaged over bases, bits and Eve's basis."""
    if strategy.kind == "intercept-resend" and strategy.measure_basis == "random":
        eve_bases = BASES
    elif strategy.kind == "intercept-resend":
        eve_bases = (strategy.measure_basis,)
    else:
        eve_bases = (None,)
    total = 0.0
    cases = 0
    for basis in BASES:
        for bit in (0, 1):
            for eb in eve_bases:
                cases += 1
                total += _mismatch_exact(decoy_state(basis, bit, "d"), basis, bit, strategy, eb)
    return total / cases


def _bob_error(state: PureState, basis: str, bit: int) -> float:
    if basis == "X":
        state = apply_gate(state, H, ["d"])
    return sum(b.prob for b in branch_enumerate(state, ["d"]) if int(b.bits) != bit)


def _mismatch_exact(state, basis, bit, strategy, eve_basis) -> float:
    if strategy.kind == "none":
        return _bob_error(state, basis, bit)
    if strategy.kind == "entangle-measure":
        joint = apply_gate(tensor(state, basis_state(["eve"], "0")), CNOT, ["d", "eve"])
        return _bob_error(joint, basis, bit)
    probe = apply_gate(state, H, ["d"]) if eve_basis == "X" else state
    return sum(
        b.prob * _bob_error(decoy_state(eve_basis, int(b.bits), "d"), basis, bit)
        for b in branch_enumerate(probe, ["d"])
    )


# -- batched Monte Carlo -------------------------------------------------------

_H = np.array([[1, 1], [1, -1]], dtype=complex) / sqrt(2)
_KIND_CODE = {"none": 0, "intercept-resend": 1, "entangle-measure": 2}
_BASIS_CODE = {None: 0, "Z": 1, "X": 2, "random": 3}


def _rotate(vecs: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Apply H to the last axis (size 2) wherever ``mask`` is set."""
    out = vecs.copy()
    out[mask] = out[mask] @ _H.T
    return out


def _batch_mismatches(strategy: EveStrategy, trials: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Mismatch flags of shape (trials, d) from batched single-qubit statevectors."""
    basis_x = rng.integers(0, 2, size=(trials, d)).astype(bool)
    bits = rng.integers(0, 2, size=(trials, d))
    psi = np.zeros((trials, d, 2), dtype=complex)
    np.put_along_axis(psi, bits[..., None], 1.0, axis=-1)
    psi = _rotate(psi, basis_x)

    if strategy.kind == "entangle-measure":
        # |psi>|0> then CNOT: amplitude (q, eve) = psi[q] * [eve == q]
        joint = np.zeros((trials, d, 2, 2), dtype=complex)
        joint[..., 0, 0] = psi[..., 0]
        joint[..., 1, 1] = psi[..., 1]
        joint = np.swapaxes(joint, -1, -2)  # put Bob's qubit last for _rotate
        joint = _rotate(joint, np.broadcast_to(basis_x[..., None], joint.shape[:-1]))
        p_one = np.sum(np.abs(joint[..., 1]) ** 2, axis=-1)
    else:
        if strategy.kind == "intercept-resend":
            if strategy.measure_basis == "random":
                eve_x = rng.integers(0, 2, size=(trials, d)).astype(bool)
            else:
                eve_x = np.full((trials, d), strategy.measure_basis == "X")
            probe = _rotate(psi, eve_x)
            eve_bits = (rng.random((trials, d)) < np.abs(probe[..., 1]) ** 2).astype(int)
            psi = np.zeros((trials, d, 2), dtype=complex)
            np.put_along_axis(psi, eve_bits[..., None], 1.0, axis=-1)
            psi = _rotate(psi, eve_x)
        psi = _rotate(psi, basis_x)
        p_one = np.abs(psi[..., 1]) ** 2
    outcome = (rng.random((trials, d)) < p_one).astype(int)
    return outcome != bits


def simulate_detection(strategy: EveStrategy, d: int, trials: int, seed: int) -> DetectionStats:
    """Batched trials; chunk ``k`` draws from a stream keyed by (seed, strategy, d, k)."""
    if trials < 1:
        raise ContractViolation("trials must be >= 1")
    stats = DetectionStats(0, d, 0, 0)
    for k, start in enumerate(range(0, trials, CHUNK)):
        n = min(CHUNK, trials - start)
        rng = np.random.default_rng(
            [seed, _KIND_CODE[strategy.kind], _BASIS_CODE[strategy.measure_basis], d, k]
        )
        flags = _batch_mismatches(strategy, n, d, rng)
        stats = stats + DetectionStats(n, d, int(flags.any(axis=1).sum()), int(flags.sum()))
    return stats


@dataclass(frozen=True)
class CurvePoint:
    strategy: str
    d: int
    trials: int
    detected: int
    empirical_rate: float
    analytic_rate: float

    @property
    def sigma(self) -> float:
        p = self.analytic_rate
        return sqrt(p * (1 - p) / self.trials)

    @property
    def within_3sigma(self) -> bool:
        return abs(self.empirical_rate - self.analytic_rate) <= 3 * self.sigma


def analytic_detection_rate(strategy: EveStrategy, d: int) -> float:
    return 1 - (1 - per_decoy_mismatch_probability(strategy)) ** d


def detection_curve(strategy: EveStrategy, d_values: Sequence[int], trials: int, seed: int) -> list[CurvePoint]:
    if trials < 1:
        raise ContractViolation("trials must be >= 1")
    out = []
    for d in d_values:
        stats = simulate_detection(strategy, d, trials, seed) if d else DetectionStats(trials, 0, 0)
        out.append(
            CurvePoint(
                strategy.name, d, trials, stats.trials_detected,
                stats.detection_rate, analytic_detection_rate(strategy, d),
            )
        )
    return out


CSV_COLUMNS = ("strategy", "d", "trials", "empirical_rate", "analytic_rate")


def curve_to_csv(points: Sequence[CurvePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p in points:
        w.writerow([p.strategy, p.d, p.trials, repr(p.empirical_rate), repr(p.analytic_rate)])
    return buf.getvalue()


def curve_to_records(points: Sequence[CurvePoint]) -> list[dict]:
    return [
        {**asdict(p), "sigma": p.sigma, "within_3sigma": p.within_3sigma}
        for p in points
    ]


def curve_to_json(points: Sequence[CurvePoint]) -> str:
    return json.dumps(curve_to_records(points), indent=2)
