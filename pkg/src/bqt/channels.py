"""Entangled channel states shared by Alice and Bob, plus bipartite diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import Sequence

import numpy as np

from .statevector import ContractViolation, PureState, from_amplitudes, tensor

ALICE = "alice"
BOB = "bob"

EQ3_LABELS = ("1", "2", "3", "4", "5", "6")
EQ4_LABELS = ("A1", "B1", "A2", "B2")
BELL_NAMES = ("Phi+", "Psi+", "Phi-", "Psi-")

# Bell bits are read as (phase bit, parity bit).
BELL_CONVENTION = "bell bits (phase, parity): 00=Phi+, 01=Psi+, 10=Phi-, 11=Psi-"
BIT_ORDER_CONVENTION = "leftmost qubit label is the most significant amplitude-index bit"

KINDS = ("eq3", "eq4", "bell", "bell-x2")
_SIZES = {"eq3": 6, "eq4": 4, "bell": 2, "bell-x2": 4}


@dataclass(frozen=True)
class ChannelSpec:
    """Which channel state is shared and which party holds each of its qubits.

    ``kind`` is one of ``eq3`` (the six-qubit reference channel), ``eq4``
    (the four-qubit channel), ``bell`` (one Bell pair picked by
    ``bell_index``) or ``bell-x2`` (two Phi+ pairs on the eq4 labels).
    """

    kind: str
    ownership: dict = field(default_factory=dict)
    bell_index: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown channel kind {self.kind!r}")
        labels = self.labels
        if set(self.ownership) != set(labels):
            raise ContractViolation(f"ownership {sorted(self.ownership)} must cover {labels}")
        if any(p not in (ALICE, BOB) for p in self.ownership.values()):
            raise ContractViolation("owners must be 'alice' or 'bob'")
        if len(labels) != _SIZES[self.kind]:
            raise ContractViolation(f"{self.kind} channel needs {_SIZES[self.kind]} labels")

    @property
    def labels(self) -> tuple[str, ...]:
        if self.kind == "eq3":
            return EQ3_LABELS
        if self.kind in ("eq4", "bell-x2"):
            return EQ4_LABELS
        return tuple(self.ownership)

    def owned_by(self, party: str) -> tuple[str, ...]:
        return tuple(lab for lab in self.labels if self.ownership[lab] == party)

    def state(self) -> PureState:
        if self.kind == "eq3":
            return make_channel_eq3()
        if self.kind == "eq4":
            return make_channel_eq4()
        if self.kind == "bell-x2":
            return make_two_bell_pairs()
        return make_bell_pair(self.bell_index, self.labels)

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "bell_index": self.bell_index if self.kind == "bell" else None,
            "ownership": {lab: self.ownership[lab] for lab in self.labels},
        }


def eq4_spec() -> ChannelSpec:
    return ChannelSpec("eq4", {"A1": ALICE, "B1": BOB, "A2": ALICE, "B2": BOB})


def two_bell_spec() -> ChannelSpec:
    return ChannelSpec("bell-x2", {"A1": ALICE, "B1": BOB, "A2": ALICE, "B2": BOB})


def bell_spec(index: int = 0, labels: Sequence[str] = ("A", "B")) -> ChannelSpec:
    a, b = labels
    return ChannelSpec("bell", {a: ALICE, b: BOB}, bell_index=index)


def _from_terms(labels, terms: dict[str, float]) -> PureState:
    amps = np.zeros(2 ** len(labels), dtype=complex)
    for bits, amp in terms.items():
        amps[int(bits, 2)] = amp
    return from_amplitudes(labels, amps)


def make_channel_eq3() -> PureState:
    return _from_terms(
        EQ3_LABELS,
        {"000000": 0.5, "001011": 0.5, "110100": 0.5, "111111": 0.5},
    )


def make_channel_eq4() -> PureState:
    return _from_terms(
        EQ4_LABELS,
        {"0000": 0.5, "0011": 0.5, "1100": 0.5, "1111": -0.5},
    )


def make_bell_pair(index: int, labels: Sequence[str] = ("A", "B")) -> PureState:
    """Bell state by index: 0=Phi+, 1=Psi+, 2=Phi-, 3=Psi-."""
    if index not in (0, 1, 2, 3):
        raise ContractViolation(f"Bell index must be in 0..3, got {index!r}")
    labels = tuple(labels)
    if len(labels) != 2:
        raise ContractViolation("a Bell pair needs exactly two labels")
    phase, parity = divmod(index, 2)
    sign = -1.0 if phase else 1.0
    first, second = ("01", "10") if parity else ("00", "11")
    return _from_terms(labels, {first: 1 / sqrt(2), second: sign / sqrt(2)})


def make_two_bell_pairs() -> PureState:
    """Phi+ on (A1, B1) and Phi+ on (A2, B2), in eq4 label order."""
    pairs = tensor(make_bell_pair(0, ("A1", "B1")), make_bell_pair(0, ("A2", "B2")))
    return pairs.permuted(EQ4_LABELS)


def schmidt_coefficients(state: PureState, partition: Sequence[str]) -> np.ndarray:
    part = tuple(partition)
    if not part or len(part) >= state.n_qubits or len(set(part)) != len(part):
        raise ContractViolation(f"{part} is not a nonempty proper subset of {state.labels}")
    for lab in part:
        state.index(lab)
    rest = tuple(lab for lab in state.labels if lab not in part)
    mat = state.permuted(part + rest).amps.reshape(2 ** len(part), -1)
    return np.linalg.svd(mat, compute_uv=False)


def schmidt_rank(state: PureState, partition: Sequence[str], tol: float = 1e-10) -> int:
    return int(np.sum(schmidt_coefficients(state, partition) > tol))
