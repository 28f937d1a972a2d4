"""Resource ledgers and the intrinsic-efficiency figure q_i / (q_r + c_r + a_u)."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from decimal import ROUND_HALF_UP, Decimal, localcontext
from fractions import Fraction
from math import ceil, log2

from .statevector import ContractViolation

SCHEMES = ("zhou-claimed", "zhou-corrected", "improved")
CASES = ("2x2", "2x3")


@dataclass(frozen=True)
class ResourceLedger:
    q_i: int  # information qubits transferred, both directions
    q_r: int  # channel qubits
    c_r: int  # classical bits broadcast
    a_u: int  # auxiliary qubits introduced

    def __post_init__(self):
        for name, v in asdict(self).items():
            if not isinstance(v, int) or v < 0:
                raise ContractViolation(f"{name} must be a non-negative int, got {v!r}")


@dataclass(frozen=True)
class EfficiencyReport:
    scheme: str
    case: str
    ledger: ResourceLedger
    eta_exact: Fraction
    canonical: bool = True

    @property
    def eta_percent(self) -> float:
        return float(self.eta_exact * 100)

    @property
    def percent_str(self) -> str:
        return format_percent(self.eta_exact)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "case": self.case,
            **asdict(self.ledger),
            "eta_num": self.eta_exact.numerator,
            "eta_den": self.eta_exact.denominator,
            "eta_percent": float(self.percent_str),
            "canonical": self.canonical,
        }


def intrinsic_efficiency(ledger: ResourceLedger) -> Fraction:
    den = ledger.q_r + ledger.c_r + ledger.a_u
    if den <= 0:
        raise ContractViolation("q_r + c_r + a_u must be positive")
    return Fraction(ledger.q_i, den)


def format_percent(eta: Fraction, places: int = 1) -> str:
    """Percent rounded half-up from the exact rational, e.g. 5/13 -> '38.5'."""
    with localcontext() as ctx:
        ctx.prec = 50
        value = Decimal(eta.numerator * 100) / Decimal(eta.denominator)
        return str(value.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))


_LEDGERS = {
    # Reconstructed from the 40% / 45.5% figures reported for the six-qubit
    # scheme: they come out only if each GHZ measurement is charged 2 bits.
    ("zhou-claimed", "2x2"): ResourceLedger(4, 6, 4, 0),
    ("zhou-claimed", "2x3"): ResourceLedger(5, 6, 4, 1),
    ("zhou-corrected", "2x2"): ResourceLedger(4, 6, 6, 0),
    ("zhou-corrected", "2x3"): ResourceLedger(5, 6, 6, 1),
    ("improved", "2x2"): ResourceLedger(4, 4, 4, 2),
    ("improved", "2x3"): ResourceLedger(5, 4, 4, 3),
}


def ledger_for(scheme: str, case: str) -> ResourceLedger:
    try:
        return _LEDGERS[(scheme, case)]
    except KeyError:
        raise ContractViolation(f"no ledger for scheme={scheme!r}, case={case!r}") from None


def report_for(scheme: str, case: str) -> EfficiencyReport:
    ledger = ledger_for(scheme, case)
    return EfficiencyReport(
        scheme, case, ledger, intrinsic_efficiency(ledger), canonical=scheme != "zhou-claimed"
    )


def compare_report(schemes) -> list[EfficiencyReport]:
    """Reports for ``(scheme, case)`` pairs, highest efficiency first.

    Ties put canonical ledgers ahead of the as-claimed ones, then keep input order.
    """
    schemes = list(schemes)
    if not schemes:
        raise ContractViolation("compare_report needs at least one scheme")
    reports = [report_for(s, c) for s, c in schemes]
    return sorted(reports, key=lambda r: (-r.eta_exact, not r.canonical))


def all_schemes() -> list[tuple[str, str]]:
    return [(s, c) for s in SCHEMES for c in CASES]


def minimal_channel_qubits(msg_a, msg_b) -> int:
    """Channel qubits needed: two per teleported carrier qubit, one carrier per log2(terms)."""
    terms = [len(set(m.support)) for m in (msg_a, msg_b)]
    return 2 * sum(ceil(log2(m)) for m in terms)


def to_markdown(reports: list[EfficiencyReport]) -> str:
    lines = [
        "| scheme | case | q_i | q_r | c_r | a_u | eta | eta % | note |",
        "|---|---|---|---|---|---|---|---|---|",
    ]
    for r in reports:
        led = r.ledger
        note = "" if r.canonical else "as claimed (non-canonical)"
        lines.append(
            f"| {r.scheme} | {r.case} | {led.q_i} | {led.q_r} | {led.c_r} | {led.a_u} "
            f"| {r.eta_exact.numerator}/{r.eta_exact.denominator} | {r.percent_str} | {note} |"
        )
    return "\n".join(lines) + "\n"


def to_json(reports: list[EfficiencyReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)
