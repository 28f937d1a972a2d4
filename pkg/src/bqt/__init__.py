"""Statevector simulation of bidirectional teleportation over four- and six-qubit channels."""

from .channels import make_bell_pair, make_channel_eq3, make_channel_eq4, schmidt_rank
from .efficiency import ResourceLedger, compare_report, intrinsic_efficiency, ledger_for
from .protocol import (
    MessageState,
    ProtocolInfeasible,
    compress,
    decompress,
    derive_correction_table,
    make_message,
    run_bqt_improved,
    run_bqt_zhou,
)
from .statevector import PureState, apply_gate, basis_state, branch_enumerate, fidelity, partial_trace, tensor

__version__ = "0.1.0"
