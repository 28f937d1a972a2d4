"""Dense pure-state simulator over labeled qubits.

The leftmost label is the most significant bit of the amplitude index, so
``basis_state(["a1", "a2"], "10")`` puts its amplitude at index 2.  All
values are immutable; every operation returns a new state.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import NamedTuple, Sequence

import numpy as np

NORM_TOL = 1e-10
PRUNE_TOL = 1e-12


class ContractViolation(ValueError):
    """Raised when an operation is called outside its preconditions."""


class NormalizationError(ValueError):
    pass


def _check_labels(labels) -> tuple[str, ...]:
    labels = tuple(labels)
    for lab in labels:
        if not isinstance(lab, str) or not lab:
            raise ContractViolation(f"qubit labels must be non-empty strings, got {lab!r}")
    if len(set(labels)) != len(labels):
        raise ContractViolation(f"duplicate qubit labels in {labels}")
    return labels


@dataclass(frozen=True, eq=False)
class PureState:
    labels: tuple[str, ...]
    amps: np.ndarray = field(repr=False)

    def __post_init__(self):
        labels = _check_labels(self.labels)
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        if amps.shape[0] != 2 ** len(labels):
            raise ContractViolation(
                f"{len(labels)} qubits need {2 ** len(labels)} amplitudes, got {amps.shape[0]}"
            )
        if not np.all(np.isfinite(amps)):
            raise ContractViolation("amplitudes must be finite")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise NormalizationError(f"state norm^2 is {norm2!r}, expected 1")
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "amps", amps)

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ContractViolation(f"unknown qubit label {label!r}; state has {self.labels}") from None

    def as_tensor(self) -> np.ndarray:
        return self.amps.reshape((2,) * self.n_qubits)

    def amplitude(self, bits: str) -> complex:
        return complex(self.amps[int(bits, 2)]) if bits else complex(self.amps[0])

    def permuted(self, labels: Sequence[str]) -> PureState:
        """Same state with its qubits reordered to ``labels``."""
        labels = tuple(labels)
        if set(labels) != set(self.labels) or len(labels) != len(self.labels):
            raise ContractViolation(f"{labels} is not a permutation of {self.labels}")
        if labels == self.labels:
            return self
        axes = [self.labels.index(lab) for lab in labels]
        return PureState(labels, np.transpose(self.as_tensor(), axes).reshape(-1))

    def relabeled(self, mapping: dict[str, str]) -> PureState:
        return PureState(tuple(mapping.get(lab, lab) for lab in self.labels), self.amps)

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amps, self.amps).real))


@dataclass(frozen=True, eq=False)
class MixedState:
    labels: tuple[str, ...]
    rho: np.ndarray = field(repr=False)

    def __post_init__(self):
        labels = _check_labels(self.labels)
        rho = np.asarray(self.rho, dtype=complex)
        dim = 2 ** len(labels)
        if rho.shape != (dim, dim):
            raise ContractViolation(f"rho must be {dim}x{dim}, got {rho.shape}")
        if not np.allclose(rho, rho.conj().T, atol=NORM_TOL, rtol=0):
            raise ContractViolation("rho is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > NORM_TOL:
            raise NormalizationError(f"trace(rho) = {np.trace(rho).real!r}")
        if np.linalg.eigvalsh(rho).min() < -NORM_TOL:
            raise ContractViolation("rho has a negative eigenvalue")
        rho = rho.copy()
        rho.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "rho", rho)

    @property
    def n_qubits(self) -> int:
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class Gate:
    name: str
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape not in ((2, 2), (4, 4)):
            raise ContractViolation(f"gate {self.name} has unsupported shape {m.shape}")
        if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=NORM_TOL, rtol=0):
            raise ContractViolation(f"gate {self.name} is not unitary")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def arity(self) -> int:
        return int(np.log2(self.matrix.shape[0]))


_S = 1 / sqrt(2)
I = Gate("I", np.eye(2))
X = Gate("X", [[0, 1], [1, 0]])
Z = Gate("Z", [[1, 0], [0, -1]])
# Y kept real (XZ); only global phase separates it from the textbook Y.
Y = Gate("Y", np.array([[0, 1], [1, 0]]) @ np.array([[1, 0], [0, -1]]))
H = Gate("H", [[_S, _S], [_S, -_S]])
CNOT = Gate("CNOT", [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
CZ = Gate("CZ", np.diag([1, 1, 1, -1]))
PAULIS = {"I": I, "X": X, "Z": Z, "Y": Y}


def basis_state(labels: Sequence[str], bits: str) -> PureState:
    labels = tuple(labels)
    if len(labels) != len(bits):
        raise ContractViolation(f"{len(labels)} labels but {len(bits)} bits")
    if any(b not in "01" for b in bits):
        raise ContractViolation(f"non-binary character in {bits!r}")
    amps = np.zeros(2 ** len(labels), dtype=complex)
    amps[int(bits, 2) if bits else 0] = 1.0
    return PureState(labels, amps)


def from_amplitudes(labels: Sequence[str], amps) -> PureState:
    return PureState(tuple(labels), np.asarray(amps, dtype=complex))


def apply_gate(state: PureState, gate: Gate, targets: Sequence[str]) -> PureState:
    targets = tuple(targets)
    if len(targets) != gate.arity:
        raise ContractViolation(f"{gate.name} acts on {gate.arity} qubits, got targets {targets}")
    if len(set(targets)) != len(targets):
        raise ContractViolation(f"repeated target in {targets}")
    axes = [state.index(t) for t in targets]
    k = len(axes)
    t = np.moveaxis(state.as_tensor(), axes, range(k))
    shape = t.shape
    t = (gate.matrix @ t.reshape(2 ** k, -1)).reshape(shape)
    t = np.moveaxis(t, range(k), axes)
    return PureState(state.labels, t.reshape(-1))


def tensor(a: PureState, *rest: PureState) -> PureState:
    out = a
    for b in rest:
        clash = set(out.labels) & set(b.labels)
        if clash:
            raise ContractViolation(f"labels {sorted(clash)} appear on both sides of tensor")
        out = PureState(out.labels + b.labels, np.kron(out.amps, b.amps))
    return out


class Branch(NamedTuple):
    bits: str
    prob: float
    post: PureState


def _split(state: PureState, qubits: Sequence[str]):
    """Amplitude matrix with measured qubits as rows, the rest as columns."""
    qubits = tuple(qubits)
    if len(set(qubits)) != len(qubits):
        raise ContractViolation(f"repeated qubit in {qubits}")
    axes = [state.index(q) for q in qubits]
    rest = [i for i in range(state.n_qubits) if i not in axes]
    mat = np.transpose(state.as_tensor(), axes + rest).reshape(2 ** len(axes), -1)
    return mat, tuple(state.labels[i] for i in rest)


def branch_enumerate(state: PureState, qubits: Sequence[str]) -> list[Branch]:
    """Every computational-basis outcome on ``qubits`` with its Born probability.

    Measured qubits are removed from the post-states.  Outcomes below the
    prune threshold are dropped; bitstrings follow the order of ``qubits``.
    """
    mat, rest = _split(state, qubits)
    probs = np.einsum("ij,ij->i", mat.conj(), mat).real
    k = len(tuple(qubits))
    out = []
    for i, p in enumerate(probs):
        if p <= PRUNE_TOL:
            continue
        bits = format(i, f"0{k}b") if k else ""
        out.append(Branch(bits, float(p), PureState(rest, mat[i] / np.sqrt(p))))
    return out


def sample_measure(state: PureState, qubits: Sequence[str], rng: np.random.Generator):
    qubits = tuple(qubits)
    if not qubits:
        return "", state
    branches = branch_enumerate(state, qubits)
    probs = np.array([b.prob for b in branches])
    pick = int(np.searchsorted(np.cumsum(probs) / probs.sum(), rng.random(), side="right"))
    pick = min(pick, len(branches) - 1)
    return branches[pick].bits, branches[pick].post


def fidelity(a: PureState, b: PureState) -> float:
    if set(a.labels) != set(b.labels) or a.n_qubits != b.n_qubits:
        raise ContractViolation(f"label sets differ: {a.labels} vs {b.labels}")
    b = b.permuted(a.labels)
    return float(min(1.0, abs(np.vdot(a.amps, b.amps)) ** 2))


def partial_trace(state: PureState, keep: Sequence[str]) -> MixedState:
    keep = tuple(keep)
    mat, _ = _split(state, keep)
    return MixedState(keep, mat @ mat.conj().T)


def mixed_fidelity(rho: MixedState, psi: PureState) -> float:
    """<psi|rho|psi> with psi aligned to rho's label order."""
    if set(rho.labels) != set(psi.labels) or rho.n_qubits != psi.n_qubits:
        raise ContractViolation(f"label sets differ: {rho.labels} vs {psi.labels}")
    v = psi.permuted(rho.labels).amps
    return float(min(1.0, np.vdot(v, rho.rho @ v).real))


def projector(psi: PureState) -> MixedState:
    return MixedState(psi.labels, np.outer(psi.amps, psi.amps.conj()))


def to_json(state: PureState) -> dict:
    return {
        "labels": list(state.labels),
        "amps": [[float(a.real), float(a.imag)] for a in state.amps],
    }


def from_json(data: dict) -> PureState:
    amps = [complex(re, im) for re, im in data["amps"]]
    return from_amplitudes(data["labels"], amps)
