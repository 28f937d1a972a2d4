"""Bidirectional teleportation of two-term states.

Each message ``alpha|x> + beta|y>`` is folded by CNOTs into a one-qubit
carrier (or a two-qubit ``alpha|00> + beta|11>`` register for the six-qubit
reference scheme), teleported over the shared channel by Bell or GHZ
measurements, corrected with Pauli strings looked up by the broadcast bits,
and unfolded again with auxiliary |0> qubits on the receiving side.

Correction tables are not transcribed; they are derived by searching Pauli
strings against a statevector oracle (see :func:`derive_correction_table`).
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import sqrt
from typing import NamedTuple, Sequence

import numpy as np

from . import channels as ch
from .channels import ALICE, BOB, ChannelSpec
from .efficiency import ResourceLedger
from .statevector import (
    CNOT,
    CZ,
    H,
    NORM_TOL,
    PAULIS,
    PRUNE_TOL,
    X,
    ContractViolation,
    NormalizationError,
    PureState,
    _split,
    apply_gate,
    branch_enumerate,
    mixed_fidelity,
    partial_trace,
    sample_measure,
    tensor,
)

FIDELITY_TOL = 1e-9
TEST_COEFFICIENTS = ((1.0, 0.0), (1 / sqrt(2), 1 / sqrt(2)), (0.6, 0.8j))
PAULI_ORDER = "IXZY"
CONVENTION = {
    "bell": ch.BELL_CONVENTION,
    "ghz": "ghz bits (phase, parity, parity): CNOT q1->q2, CNOT q1->q3, H q1, read q1 q2 q3",
    "bit_order": ch.BIT_ORDER_CONVENTION,
    "keys": "broadcast key = alice bits followed by bob bits",
    "pauli": "Y is XZ (real); strings list receiver qubits in retained order",
}
GATES = {"CZ": CZ, "CNOT": CNOT}


class UnsupportedInput(ValueError):
    pass


class ProtocolInfeasible(RuntimeError):
    def __init__(self, message: str, bits: str | None = None):
        super().__init__(message)
        self.bits = bits


# -- messages -----------------------------------------------------------------


def _differing(support) -> list[int]:
    x, y = support
    return [j for j in range(len(x)) if x[j] != y[j]]


def kept_positions(support, keep: int = 1) -> list[int]:
    """Pivot (first differing position) plus the next ``keep - 1`` differing ones."""
    diff = _differing(support)
    if len(diff) < keep:
        raise UnsupportedInput(
            f"support {support} differs in {len(diff)} positions; cannot keep {keep} qubits"
        )
    return diff[:keep]


@dataclass(frozen=True)
class MessageState:
    alpha: complex
    beta: complex
    support: tuple[str, str]
    labels: tuple[str, ...]
    owner: str

    def __post_init__(self):
        x, y = self.support
        labels = tuple(self.labels)
        if x == y:
            raise ContractViolation(f"degenerate support {self.support}")
        if not (len(x) == len(y) == len(labels)) or any(b not in "01" for b in x + y):
            raise ContractViolation(f"support {self.support} does not fit labels {labels}")
        if self.owner not in (ALICE, BOB):
            raise ContractViolation(f"owner must be alice or bob, got {self.owner!r}")
        norm2 = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm2 - 1) > NORM_TOL:
            raise NormalizationError(f"|alpha|^2 + |beta|^2 = {norm2!r}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "support", (x, y))
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def pivot(self) -> int:
        return _differing(self.support)[0]

    def to_purestate(self, labels: Sequence[str] | None = None) -> PureState:
        amps = np.zeros(2**self.n, dtype=complex)
        amps[int(self.support[0], 2)] += self.alpha
        amps[int(self.support[1], 2)] += self.beta
        return PureState(tuple(labels) if labels is not None else self.labels, amps)


def make_message(alpha, beta, support, labels, owner) -> MessageState:
    return MessageState(alpha, beta, tuple(support), tuple(labels), owner)


def standard_message(alpha, beta, labels, owner) -> MessageState:
    """alpha|0...0> + beta|1...1>, the form of both sample messages."""
    n = len(labels)
    return make_message(alpha, beta, ("0" * n, "1" * n), labels, owner)


def random_coefficients(rng: np.random.Generator) -> tuple[complex, complex]:
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    v /= np.linalg.norm(v)
    return complex(v[0]), complex(v[1])


# -- compression ----------------------------------------------------------------


class Compressed(NamedTuple):
    state: PureState
    carrier: str
    freed: tuple[str, ...]


def freed_values(msg: MessageState, keep: int = 1) -> dict[str, str]:
    """Value each freed qubit holds before the X frame fix (x's bit there)."""
    kept = kept_positions(msg.support, keep)
    return {msg.labels[j]: msg.support[0][j] for j in range(msg.n) if j not in kept}


def _outside_span_weight(state: PureState, msg: MessageState) -> float:
    mat, _ = _split(state, msg.labels)
    probs = np.einsum("ij,ij->i", mat.conj(), mat).real
    inside = {int(msg.support[0], 2), int(msg.support[1], 2)}
    return float(sum(p for i, p in enumerate(probs) if i not in inside))


def compress(state: PureState, msg: MessageState, keep: int = 1) -> Compressed:
    """Fold ``alpha|x> + beta|y>`` on msg's qubits into ``alpha|0..0> + beta|1..1>``
    on ``keep`` qubits, leaving every other message qubit in |0>.

    The carrier is the pivot, the first position where x and y differ.
    """
    for lab in msg.labels:
        state.index(lab)
    if _outside_span_weight(state, msg) > NORM_TOL:
        raise UnsupportedInput(f"state on {msg.labels} has weight outside span{msg.support}")
    x, y = msg.support
    kept = kept_positions(msg.support, keep)
    p = kept[0]
    pivot = msg.labels[p]
    if x[p] == "1":
        state = apply_gate(state, X, [pivot])
    for j in range(msg.n):
        if j != p and x[j] != y[j] and j not in kept:
            state = apply_gate(state, CNOT, [pivot, msg.labels[j]])
    for j in range(msg.n):
        if j != p and x[j] == "1":
            state = apply_gate(state, X, [msg.labels[j]])
    freed = tuple(msg.labels[j] for j in range(msg.n) if j not in kept)
    return Compressed(state, pivot, freed)


def message_register(support, carrier: Sequence[str], aux_labels: Sequence[str]) -> tuple[str, ...]:
    """Labels of a rebuilt message, in message-position order."""
    kept = kept_positions(support, len(carrier))
    carrier_iter, aux_iter = iter(carrier), iter(aux_labels)
    return tuple(next(carrier_iter) if j in kept else next(aux_iter) for j in range(len(support[0])))


def decompress(
    state: PureState,
    carrier: str | Sequence[str],
    n_aux: int,
    aux_labels: Sequence[str],
    support: tuple[str, str] | None = None,
) -> PureState:
    """Append ``n_aux`` |0> qubits and unfold the carrier onto them.

    Without ``support`` this maps ``g|0> + d|1>`` to ``g|0..0> + d|1..1>`` over
    carrier + aux.  With a support ``(x, y)`` the result is ``g|x> + d|y>`` laid
    out by :func:`message_register`.  ``carrier`` may be a kept register of
    several qubits already holding ``g|0..0> + d|1..1>``.
    """
    carrier = (carrier,) if isinstance(carrier, str) else tuple(carrier)
    aux_labels = tuple(aux_labels)
    if len(aux_labels) != n_aux:
        raise ContractViolation(f"n_aux={n_aux} but {len(aux_labels)} aux labels given")
    for lab in carrier:
        state.index(lab)
    clash = set(aux_labels) & set(state.labels)
    if clash or len(set(aux_labels)) != n_aux:
        raise ContractViolation(f"aux labels {aux_labels} collide with the state")
    n = len(carrier) + n_aux
    if support is None:
        support = ("0" * n, "1" * n)
    x, y = support
    if len(x) != n:
        raise ContractViolation(f"support length {len(x)} != carrier + aux = {n}")
    register = message_register(support, carrier, aux_labels)
    if aux_labels:
        state = tensor(state, PureState(aux_labels, _zero_amps(n_aux)))
    for j, lab in enumerate(register):
        if lab in aux_labels and x[j] != y[j]:
            state = apply_gate(state, CNOT, [carrier[0], lab])
    for j, lab in enumerate(register):
        if x[j] == "1":
            state = apply_gate(state, X, [lab])
    return state


def _zero_amps(n: int) -> np.ndarray:
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = 1
    return amps


def discard_fixed(state: PureState, labels: Sequence[str]) -> PureState:
    """Drop qubits that measure deterministically; anything else is an error."""
    labels = tuple(labels)
    if not labels:
        return state
    branches = branch_enumerate(state, labels)
    if len(branches) != 1 or abs(branches[0].prob - 1) > NORM_TOL:
        raise ProtocolInfeasible(f"qubits {labels} are not in a fixed basis state")
    return branches[0].post


# -- measurements ----------------------------------------------------------------


@dataclass(frozen=True)
class BellOutcome:
    phase_bit: int
    parity_bit: int

    @property
    def bits(self) -> str:
        return f"{self.phase_bit}{self.parity_bit}"

    @property
    def name(self) -> str:
        return ch.BELL_NAMES[2 * self.phase_bit + self.parity_bit]


@dataclass(frozen=True)
class GHZOutcome:
    phase_bit: int
    parity_bits: tuple[int, int]

    @property
    def bits(self) -> str:
        return f"{self.phase_bit}{self.parity_bits[0]}{self.parity_bits[1]}"


class Measured(NamedTuple):
    outcome: BellOutcome | GHZOutcome
    prob: float
    post: PureState


def _basis_change(state: PureState, qubits: Sequence[str]) -> PureState:
    head, *rest = qubits
    for q in rest:
        state = apply_gate(state, CNOT, [head, q])
    return apply_gate(state, H, [head])


def _measure(state, qubits, mode, rng):
    if len(set(qubits)) != len(qubits):
        raise ContractViolation(f"measurement qubits must be distinct, got {qubits}")
    state = _basis_change(state, qubits)
    if mode == "enumerate":
        return [(b.bits, b.prob, b.post) for b in branch_enumerate(state, qubits)]
    if mode == "sample":
        if rng is None:
            raise ContractViolation("sample mode needs an rng")
        probs = {b.bits: b.prob for b in branch_enumerate(state, qubits)}
        bits, post = sample_measure(state, qubits, rng)
        return [(bits, probs[bits], post)]
    raise ContractViolation(f"unknown mode {mode!r}")


def bell_measure(state: PureState, q1: str, q2: str, mode: str = "enumerate", rng=None) -> list[Measured]:
    return [
        Measured(BellOutcome(int(bits[0]), int(bits[1])), p, post)
        for bits, p, post in _measure(state, (q1, q2), mode, rng)
    ]


def ghz_measure(state: PureState, q1: str, q2: str, q3: str, mode: str = "enumerate", rng=None) -> list[Measured]:
    return [
        Measured(GHZOutcome(int(bits[0]), (int(bits[1]), int(bits[2]))), p, post)
        for bits, p, post in _measure(state, (q1, q2, q3), mode, rng)
    ]


# -- plans and correction tables ---------------------------------------------------


@dataclass(frozen=True)
class PartyPlan:
    """What one party measures and keeps.

    ``register`` holds the party's (compressed) message during derivation;
    the party measures ``register + channel_measured`` in the Bell (2 qubits)
    or GHZ (3 qubits) basis and keeps ``retained`` to receive the other
    party's register.  ``local_ops`` are gates on the party's own channel
    qubits applied before measuring.
    """

    register: tuple[str, ...] = ()
    channel_measured: tuple[str, ...] = ()
    retained: tuple[str, ...] = ()
    local_ops: tuple[tuple[str, tuple[str, ...]], ...] = ()

    @property
    def sends(self) -> bool:
        return bool(self.register)

    @property
    def kind(self) -> str | None:
        n = len(self.register) + len(self.channel_measured)
        return {0: None, 2: "bell", 3: "ghz"}.get(n, f"{n}-qubit")

    def measured(self, register: Sequence[str] | None = None) -> tuple[str, ...]:
        reg = self.register if register is None else tuple(register)
        return reg + self.channel_measured

    def describe(self) -> dict:
        return {
            "measures": list(self.register + self.channel_measured),
            "kind": self.kind,
            "retains": list(self.retained),
            "local_ops": [[g, list(t)] for g, t in self.local_ops],
        }


@dataclass(frozen=True)
class MeasurementPlan:
    name: str
    alice: PartyPlan
    bob: PartyPlan

    def party(self, who: str) -> PartyPlan:
        return self.alice if who == ALICE else self.bob

    def validate(self, channel: ChannelSpec) -> None:
        for who, other in ((ALICE, BOB), (BOB, ALICE)):
            pp, op = self.party(who), self.party(other)
            owned = set(channel.owned_by(who))
            used = set(pp.channel_measured) | set(pp.retained)
            for _, targets in pp.local_ops:
                used |= set(targets)
            if not used <= owned:
                raise ContractViolation(f"{who} uses qubits {sorted(used - owned)} it does not own")
            if pp.kind not in (None, "bell", "ghz"):
                raise ContractViolation(f"{who} measures {pp.kind}; only Bell or GHZ supported")
            if len(pp.retained) != len(op.register):
                raise ContractViolation(
                    f"{who} retains {len(pp.retained)} qubits for a {len(op.register)}-qubit register"
                )
        touched = [q for who in (ALICE, BOB) for q in self.party(who).channel_measured + self.party(who).retained]
        if sorted(touched) != sorted(channel.labels):
            raise ContractViolation("plan must measure or retain every channel qubit exactly once")

    def describe(self) -> dict:
        return {"name": self.name, "alice": self.alice.describe(), "bob": self.bob.describe()}


@dataclass(frozen=True)
class Correction:
    alice: str
    bob: str
    candidates: int = 1


@dataclass(frozen=True)
class CorrectionTable:
    """Pauli strings keyed by broadcast bits (alice's then bob's).

    Keys whose outcome has zero probability map to ``None``.
    """

    channel: dict
    plan: dict
    entries: dict = field(default_factory=dict)
    convention: dict = field(default_factory=lambda: dict(CONVENTION))

    def __getitem__(self, bits: str) -> Correction | None:
        return self.entries[bits]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def reachable(self) -> list[str]:
        return [k for k, v in self.entries.items() if v is not None]

    def to_dict(self) -> dict:
        return {
            "convention": self.convention,
            "channel": self.channel,
            "plan": self.plan,
            "entries": {
                k: None if v is None else {"alice": v.alice, "bob": v.bob, "candidates": v.candidates}
                for k, v in self.entries.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> CorrectionTable:
        data = json.loads(text)
        entries = {
            k: None if v is None else Correction(v["alice"], v["bob"], v.get("candidates", 1))
            for k, v in data["entries"].items()
        }
        return cls(data["channel"], data["plan"], entries, data["convention"])


def pauli_strings(n: int) -> list[str]:
    """All length-n Pauli strings, lowest weight first, then I<X<Z<Y."""
    strings = ["".join(s) for s in itertools.product(PAULI_ORDER, repeat=n)]
    return sorted(strings, key=lambda s: (sum(c != "I" for c in s), [PAULI_ORDER.index(c) for c in s]))


def pauli_matrix(string: str) -> np.ndarray:
    m = np.eye(1, dtype=complex)
    for c in string:
        m = np.kron(m, PAULIS[c].matrix)
    return m


def apply_pauli_string(state: PureState, string: str, qubits: Sequence[str]) -> PureState:
    for c, q in zip(string, qubits, strict=True):
        if c != "I":
            state = apply_gate(state, PAULIS[c], [q])
    return state


def apply_local_ops(state: PureState, ops) -> PureState:
    for gate, targets in ops:
        state = apply_gate(state, GATES[gate], targets)
    return state


def _register_state(labels, coeffs) -> PureState:
    n = len(labels)
    amps = np.zeros(2**n, dtype=complex)
    amps[0], amps[-1] = coeffs
    return PureState(tuple(labels), amps)


def derive_correction_table(channel: ChannelSpec, plan: MeasurementPlan) -> CorrectionTable:
    """Search Pauli corrections for every broadcast outcome of ``plan`` on ``channel``.

    For each joint outcome the receivers' retained qubits are checked against
    the sent registers for all pairs of :data:`TEST_COEFFICIENTS`; a Pauli
    pair is accepted only if it restores fidelity 1 on every test.  Raises
    :class:`ProtocolInfeasible` on the first outcome no Pauli pair fixes.
    """
    plan.validate(channel)
    a, b = plan.alice, plan.bob
    tests_a = TEST_COEFFICIENTS if a.sends else (None,)
    tests_b = TEST_COEFFICIENTS if b.sends else (None,)
    measured = a.measured() + b.measured()
    retained = a.retained + b.retained
    rows, targets = [], []
    for ca, cb in itertools.product(tests_a, tests_b):
        parts = []
        if ca is not None:
            parts.append(_register_state(a.register, ca))
        if cb is not None:
            parts.append(_register_state(b.register, cb))
        state = tensor(*parts, channel.state())
        state = apply_local_ops(state, a.local_ops + b.local_ops)
        for pp in (a, b):
            if pp.sends:
                state = _basis_change(state, pp.measured())
        mat, rest = _split(state, measured)
        order = [rest.index(q) for q in retained]
        mat = np.transpose(mat.reshape((mat.shape[0],) + (2,) * len(rest)), [0] + [i + 1 for i in order])
        rows.append(mat.reshape(mat.shape[0], -1))
        tgt = []
        if cb is not None:
            tgt.append(_register_state(a.retained, cb))
        if ca is not None:
            tgt.append(_register_state(b.retained, ca))
        targets.append(tensor(*tgt).amps)

    strings_a = pauli_strings(len(a.retained))
    strings_b = pauli_strings(len(b.retained))
    pairs = sorted(
        itertools.product(strings_a, strings_b),
        key=lambda p: (sum(c != "I" for c in p[0] + p[1]),),
    )
    mats = np.stack([pauli_matrix(sa + sb) for sa, sb in pairs])

    entries = {}
    for key_index in range(2 ** len(measured)):
        key = format(key_index, f"0{len(measured)}b")
        probs = [float(np.vdot(r[key_index], r[key_index]).real) for r in rows]
        live = [p > PRUNE_TOL for p in probs]
        if not any(live):
            entries[key] = None
            continue
        if not all(live):
            raise ProtocolInfeasible(f"outcome {key} is reachable only for some inputs", key)
        ok = np.ones(len(pairs), dtype=bool)
        for r, t, p in zip(rows, targets, probs):
            corrected = mats @ (r[key_index] / np.sqrt(p))
            ok &= np.abs(corrected @ t.conj()) ** 2 >= 1 - FIDELITY_TOL
        hits = np.flatnonzero(ok)
        if hits.size == 0:
            raise ProtocolInfeasible(f"no Pauli correction restores outcome {key}", key)
        sa, sb = pairs[hits[0]]
        entries[key] = Correction(sa, sb, int(hits.size))
    return CorrectionTable(channel.describe(), plan.describe(), entries)


def one_way_plan(channel: ChannelSpec) -> MeasurementPlan:
    """Alice teleports one qubit over a single Bell pair; Bob only corrects."""
    a_lab, b_lab = channel.owned_by(ALICE)[0], channel.owned_by(BOB)[0]
    return MeasurementPlan(
        "one-way",
        PartyPlan(register=("cA",), channel_measured=(a_lab,)),
        PartyPlan(retained=(b_lab,)),
    )


def bidirectional_plan(local_ops=()) -> MeasurementPlan:
    """Alice measures (carrier, A1) and keeps A2; Bob measures (carrier, B2) and keeps B1."""
    alice_ops = tuple(op for op in local_ops if op[1][0].startswith("A"))
    bob_ops = tuple(op for op in local_ops if op[1][0].startswith("B"))
    name = "bidirectional" + "".join(f"+{g}({','.join(t)})" for g, t in local_ops)
    return MeasurementPlan(
        name,
        PartyPlan(register=("cA",), channel_measured=("A1",), retained=("A2",), local_ops=alice_ops),
        PartyPlan(register=("cB",), channel_measured=("B2",), retained=("B1",), local_ops=bob_ops),
    )


# Candidate local frames tried in order on the four-qubit channel.  The bare
# plan fails there: the -|1111> sign acts as a CZ between the two receiving
# qubits, which no local Pauli can undo; one local CZ before measuring does.
IMPROVED_FRAMES = ((), (("CZ", ("A1", "A2")),), (("CZ", ("B1", "B2")),))


@lru_cache(maxsize=None)
def improved_plan(kind: str = "eq4") -> tuple[MeasurementPlan, CorrectionTable]:
    spec = ch.eq4_spec() if kind == "eq4" else ch.two_bell_spec()
    failures = []
    for ops in IMPROVED_FRAMES:
        plan = bidirectional_plan(ops)
        try:
            return plan, derive_correction_table(spec, plan)
        except ProtocolInfeasible as exc:
            failures.append(f"{plan.name}: {exc}")
    raise ProtocolInfeasible("no local frame works: " + "; ".join(failures))


def zhou_candidates():
    """Groupings of the six-qubit channel in lexicographic order.

    Each party GHZ-measures its two-qubit register with one channel qubit and
    keeps two channel qubits for the incoming register.
    """
    labels = ch.EQ3_LABELS
    for ca, cb in itertools.permutations(labels, 2):
        rest = [q for q in labels if q not in (ca, cb)]
        for keep_a in itertools.combinations(rest, 2):
            keep_b = tuple(q for q in rest if q not in keep_a)
            spec = ChannelSpec(
                "eq3", {q: ALICE if q in (ca,) + keep_a else BOB for q in labels}
            )
            plan = MeasurementPlan(
                f"ghz-grouping alice=({ca};{','.join(keep_a)}) bob=({cb};{','.join(keep_b)})",
                PartyPlan(register=("a1", "a2"), channel_measured=(ca,), retained=keep_a),
                PartyPlan(register=("b1", "b2"), channel_measured=(cb,), retained=keep_b),
            )
            yield spec, plan


@lru_cache(maxsize=None)
def zhou_plan() -> tuple[ChannelSpec, MeasurementPlan, CorrectionTable]:
    for spec, plan in zhou_candidates():
        try:
            return spec, plan, derive_correction_table(spec, plan)
        except ProtocolInfeasible:
            continue
    raise ProtocolInfeasible("no GHZ grouping of the six-qubit channel admits Pauli corrections")


def correction_table_for(channel_id: str) -> CorrectionTable:
    """Table for a named channel: eq4, eq4-bare, bell-x2, eq3, bell-phi-plus, ..."""
    if channel_id == "eq4":
        return improved_plan("eq4")[1]
    if channel_id == "eq4-bare":
        return derive_correction_table(ch.eq4_spec(), bidirectional_plan())
    if channel_id == "bell-x2":
        return improved_plan("bell-x2")[1]
    if channel_id == "eq3":
        return zhou_plan()[2]
    bells = {"bell-phi-plus": 0, "bell-psi-plus": 1, "bell-phi-minus": 2, "bell-psi-minus": 3}
    if channel_id in bells:
        spec = ch.bell_spec(bells[channel_id])
        return derive_correction_table(spec, one_way_plan(spec))
    raise ContractViolation(f"unknown channel id {channel_id!r}")


# -- end-to-end runs -----------------------------------------------------------


@dataclass
class RunResult:
    scheme: str
    branch: str
    prob: float
    transcript: list
    corrections_applied: dict
    fidelity_A_to_B: float
    fidelity_B_to_A: float
    ledger: ResourceLedger

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "branch": self.branch,
            "prob": self.prob,
            "transcript": self.transcript,
            "corrections_applied": self.corrections_applied,
            "fidelity_A_to_B": self.fidelity_A_to_B,
            "fidelity_B_to_A": self.fidelity_B_to_A,
            "ledger": {
                "q_i": self.ledger.q_i,
                "q_r": self.ledger.q_r,
                "c_r": self.ledger.c_r,
                "a_u": self.ledger.a_u,
            },
        }


@dataclass(frozen=True)
class _Setup:
    scheme: str
    msg_a: MessageState
    msg_b: MessageState
    plan: MeasurementPlan
    table: CorrectionTable
    n_channel: int
    registers: dict
    state: PureState
    transcript: tuple


def ledger_from_transcript(transcript, msg_a: MessageState, msg_b: MessageState, n_channel: int) -> ResourceLedger:
    c_r = sum(len(ev["bits"]) for ev in transcript if ev["kind"] in ("bell", "ghz"))
    a_u = sum(len(ev["aux"]) for ev in transcript if ev["kind"] == "decompress")
    return ResourceLedger(msg_a.n + msg_b.n, n_channel, c_r, a_u)


def _check_messages(msg_a: MessageState, msg_b: MessageState) -> None:
    if msg_a.owner != ALICE or msg_b.owner != BOB:
        raise ContractViolation("msg_a must be Alice's and msg_b Bob's")
    if msg_a.n != 2:
        raise ContractViolation(f"Alice's message must have 2 qubits, got {msg_a.n}")
    if msg_b.n not in (2, 3):
        raise ContractViolation(f"Bob's message must have 2 or 3 qubits, got {msg_b.n}")


def _setup(scheme: str, msg_a: MessageState, msg_b: MessageState) -> _Setup:
    _check_messages(msg_a, msg_b)
    if scheme == "improved":
        plan, table = improved_plan("eq4")
        channel = ch.make_channel_eq4()
        keep = 1
        grouping = None
    elif scheme == "zhou":
        _, plan, table = zhou_plan()
        channel = ch.make_channel_eq3()
        keep = 2
        grouping = plan.describe()
    else:
        raise ContractViolation(f"unknown scheme {scheme!r}")
    state = tensor(msg_a.to_purestate(), msg_b.to_purestate(), channel)
    transcript = []
    if grouping is not None:
        transcript.append({"party": "both", "kind": "grouping", "bits": "", "plan": grouping})
    registers = {}
    for who, msg in ((ALICE, msg_a), (BOB, msg_b)):
        comp = compress(state, msg, keep=keep)
        values = freed_values(msg, keep)
        state = discard_fixed(comp.state, comp.freed)
        registers[who] = tuple(lab for lab in msg.labels if lab not in comp.freed)
        transcript.append(
            {
                "party": who,
                "kind": "compress",
                "bits": "".join(values[q] for q in comp.freed),
                "carrier": comp.carrier,
                "freed": list(comp.freed),
            }
        )
    for who in (ALICE, BOB):
        for gate, targets in plan.party(who).local_ops:
            state = apply_gate(state, GATES[gate], targets)
            transcript.append({"party": who, "kind": "local", "bits": "", "gate": gate, "qubits": list(targets)})
    return _Setup(scheme, msg_a, msg_b, plan, table, channel.n_qubits, registers, state, tuple(transcript))


def _measured_branches(setup: _Setup, mode: str, rng):
    """(alice bits, bob bits, probability, state) after both measurements."""
    a, b = setup.plan.alice, setup.plan.bob
    kind = a.kind
    for bits_a, p_a, s_a in _measure(setup.state, a.measured(setup.registers[ALICE]), mode, rng):
        for bits_b, p_b, s_b in _measure(s_a, b.measured(setup.registers[BOB]), mode, rng):
            yield kind, bits_a, bits_b, p_a * p_b, s_b


def _finish(setup: _Setup, kind, bits_a, bits_b, prob, state, order: str) -> RunResult:
    a, b = setup.plan.alice, setup.plan.bob
    transcript = list(setup.transcript)
    transcript.append({"party": ALICE, "kind": kind, "bits": bits_a})
    transcript.append({"party": BOB, "kind": kind, "bits": bits_b})
    corr = setup.table[bits_a + bits_b]
    if corr is None:
        raise ProtocolInfeasible(f"outcome {bits_a + bits_b} is marked unreachable", bits_a + bits_b)

    # Bob rebuilds Alice's message on b.retained; Alice rebuilds Bob's on a.retained.
    rebuild = {
        BOB: (setup.msg_a, b.retained, corr.bob, [f"auxB{i + 1}" for i in range(setup.msg_a.n - len(b.retained))]),
        ALICE: (setup.msg_b, a.retained, corr.alice, [f"auxA{i + 1}" for i in range(setup.msg_b.n - len(a.retained))]),
    }
    if order not in ("correct-then-decompress", "decompress-then-correct"):
        raise ContractViolation(f"unknown order {order!r}")
    for who in (BOB, ALICE):
        msg, retained, pauli, aux = rebuild[who]
        if order == "correct-then-decompress":
            state = apply_pauli_string(state, pauli, retained)
            transcript.append({"party": who, "kind": "correct", "bits": "", "pauli": pauli, "qubits": list(retained)})
        state = decompress(state, retained, len(aux), aux, support=msg.support)
        transcript.append({"party": who, "kind": "decompress", "bits": "", "aux": aux})
        if order == "decompress-then-correct":
            state = apply_pauli_string(state, pauli, retained)
            transcript.append({"party": who, "kind": "correct", "bits": "", "pauli": pauli, "qubits": list(retained)})

    fids = {}
    for who in (BOB, ALICE):
        msg, retained, _, aux = rebuild[who]
        register = message_register(msg.support, retained, aux)
        rho = partial_trace(state, register)
        fids[who] = mixed_fidelity(rho, msg.to_purestate(register))
    ledger = ledger_from_transcript(transcript, setup.msg_a, setup.msg_b, setup.n_channel)
    return RunResult(
        scheme=setup.scheme,
        branch=bits_a + bits_b,
        prob=prob,
        transcript=transcript,
        corrections_applied={ALICE: corr.alice, BOB: corr.bob},
        fidelity_A_to_B=fids[BOB],
        fidelity_B_to_A=fids[ALICE],
        ledger=ledger,
    )


def _run(scheme, msg_a, msg_b, mode, rng, order):
    setup = _setup(scheme, msg_a, msg_b)
    results = [_finish(setup, *br, order=order) for br in _measured_branches(setup, mode, rng)]
    return results if mode == "enumerate" else results[0]


def run_bqt_improved(
    msg_a: MessageState,
    msg_b: MessageState,
    mode: str = "enumerate",
    rng: np.random.Generator | None = None,
    order: str = "correct-then-decompress",
):
    """Run the four-qubit-channel protocol.

    Returns every branch as a list in ``enumerate`` mode, or one sampled
    :class:`RunResult` in ``sample`` mode.
    """
    return _run("improved", msg_a, msg_b, mode, rng, order)


def run_bqt_zhou(
    msg_a: MessageState,
    msg_b: MessageState,
    mode: str = "enumerate",
    rng: np.random.Generator | None = None,
):
    """Run the six-qubit reference protocol with GHZ measurements."""
    return _run("zhou", msg_a, msg_b, mode, rng, "correct-then-decompress")


def pre_correction_state(
    msg_a: MessageState,
    msg_b: MessageState,
    keep: Sequence[str] = ("B1",),
    scheme: str = "improved",
    bob_bits: str | None = None,
) -> np.ndarray:
    """Branch-averaged reduced state of ``keep`` after measuring, before any correction.

    With ``bob_bits`` the average runs over Alice's outcomes only, conditioned
    on Bob's outcome (and renormalized).
    """
    setup = _setup(scheme, msg_a, msg_b)
    total = 0
    rho = 0
    for _, _, bits_b, p, state in _measured_branches(setup, "enumerate", None):
        if bob_bits is not None and bits_b != bob_bits:
            continue
        rho = rho + p * partial_trace(state, keep).rho
        total += p
    return rho / total
