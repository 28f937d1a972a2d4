"""Command-line front end: ``bqt run | efficiency | attack | derive``.

Exit codes: 0 success, 1 simulation or verification failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import efficiency as eff
from . import protocol as proto
from . import security as sec
from .channels import ALICE, BOB

log = logging.getLogger("bqt")

NORM_WARN = 1e-10
FIDELITY_FLOOR = 1 - proto.FIDELITY_TOL
CASE_LABELS = {"2x2": ("b1", "b2"), "2x3": ("b1", "b2", "b3")}
CHANNEL_IDS = ("eq4", "eq4-bare", "bell-x2", "eq3", "bell-phi-plus", "bell-psi-plus", "bell-phi-minus", "bell-psi-minus")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    scheme: str | None = None
    case: str = "2x3"
    coefficients: dict = field(default_factory=dict)  # party -> (alpha, beta)
    random: bool = False
    seed: int = 0
    mode: str = "enumerate"
    trials: int = 100_000
    output_format: str | None = None
    output_path: Path | None = None
    quiet: bool = False
    strategy: str | None = None
    basis: str = "random"
    decoys: tuple[int, ...] = (1,)
    channel: str | None = None


def parse_coefficient(text: str) -> complex:
    """Accept ``re`` or ``re+imJ`` (also lowercase j)."""
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise UsageError(f"cannot parse coefficient {text!r}") from None


def normalize_pair(alpha: complex, beta: complex, who: str, quiet: bool = False) -> tuple[complex, complex]:
    norm = np.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
    if norm == 0:
        raise UsageError(f"{who}'s coefficients are both zero")
    if abs(norm - 1) > NORM_WARN:
        if not quiet:
            log.warning("%s's coefficients have norm %.12g; renormalizing", who, norm)
        alpha, beta = alpha / norm, beta / norm
    return complex(alpha), complex(beta)


def parse_decoys(text: str) -> tuple[int, ...]:
    """``5``, ``1..10`` or ``1,2,4``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            values = tuple(range(int(lo), int(hi) + 1))
        else:
            values = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"bad decoy range {text!r}") from None
    if not values or min(values) < 0:
        raise UsageError(f"bad decoy range {text!r}")
    return values


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=0)
    common.add_argument("--format", dest="output_format", default=None)
    common.add_argument("--out", dest="output_path", type=Path, default=None)
    common.add_argument("--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="bqt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run a teleportation protocol")
    run.add_argument("--scheme", choices=("improved", "zhou"), required=True)
    run.add_argument("--case", choices=tuple(CASE_LABELS), default="2x3")
    for flag in ("--alpha-a", "--beta-a", "--alpha-b", "--beta-b"):
        run.add_argument(flag, default=None)
    run.add_argument(
        "--random", action="store_true",
        help="draw seeded coefficients for any party not given explicitly (also the default)",
    )
    run.add_argument("--mode", choices=("enumerate", "sample"), default="enumerate")

    e = sub.add_parser("efficiency", parents=[common], help="intrinsic-efficiency comparison")
    e.add_argument("--scheme", choices=eff.SCHEMES, default=None)
    e.add_argument("--case", choices=eff.CASES, default=None)

    a = sub.add_parser("attack", parents=[common], help="decoy detection under eavesdropping")
    a.add_argument("--strategy", required=True)
    a.add_argument("--basis", choices=("random", "Z", "X"), default="random")
    a.add_argument("--decoys", default="1..10")
    a.add_argument("--trials", type=int, default=100_000)

    d = sub.add_parser("derive", parents=[common], help="derive a Pauli correction table")
    d.add_argument("--channel", required=True)
    return parser


_FORMATS = {
    "run": ("json", "csv", "markdown"),
    "efficiency": ("markdown", "json", "csv"),
    "attack": ("csv", "json", "markdown"),
    "derive": ("json", "csv", "markdown"),
}


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    fmt = ns.output_format or _FORMATS[ns.command][0]
    if fmt not in _FORMATS[ns.command]:
        raise UsageError(f"format {fmt!r} not supported by {ns.command}")
    cfg = RunConfig(ns.command, seed=ns.seed, output_format=fmt, output_path=ns.output_path, quiet=ns.quiet)
    if ns.command == "run":
        cfg.scheme, cfg.case, cfg.mode, cfg.random = ns.scheme, ns.case, ns.mode, ns.random
        for who, a_flag, b_flag in ((ALICE, ns.alpha_a, ns.beta_a), (BOB, ns.alpha_b, ns.beta_b)):
            if (a_flag is None) != (b_flag is None):
                raise UsageError(f"give both alpha and beta for {who}")
            if a_flag is not None:
                cfg.coefficients[who] = normalize_pair(
                    parse_coefficient(a_flag), parse_coefficient(b_flag), who, ns.quiet
                )
    elif ns.command == "efficiency":
        cfg.scheme, cfg.case = ns.scheme, ns.case
    elif ns.command == "attack":
        if ns.strategy not in sec.STRATEGIES:
            raise UsageError(f"unknown strategy {ns.strategy!r}; choose from {', '.join(sec.STRATEGIES)}")
        if ns.trials < 1:
            raise UsageError("--trials must be >= 1")
        cfg.strategy, cfg.basis, cfg.trials = ns.strategy, ns.basis, ns.trials
        cfg.decoys = parse_decoys(ns.decoys)
    elif ns.command == "derive":
        if ns.channel not in CHANNEL_IDS:
            raise UsageError(f"unknown channel {ns.channel!r}; choose from {', '.join(CHANNEL_IDS)}")
        cfg.channel = ns.channel
    return cfg


def convention_block() -> dict:
    return dict(proto.CONVENTION)


def _csv(rows: list[list], header: list[str]) -> str:
    buf = io.StringIO()
    for k, v in convention_block().items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _markdown_header() -> str:
    return "".join(f"> {k}: {v}\n" for k, v in convention_block().items()) + "\n"


def _table_md(header: list[str], rows: list[list]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(str(c) for c in r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def _json(payload: dict) -> str:
    return json.dumps({"convention": convention_block(), **payload}, indent=2) + "\n"


def cmd_run_protocol(cfg: RunConfig) -> tuple[int, str]:
    rng = np.random.default_rng(cfg.seed)
    coeffs = dict(cfg.coefficients)
    for who in (ALICE, BOB):
        if who not in coeffs:
            coeffs[who] = proto.random_coefficients(rng)
    msg_a = proto.standard_message(*coeffs[ALICE], ("a1", "a2"), ALICE)
    msg_b = proto.standard_message(*coeffs[BOB], CASE_LABELS[cfg.case], BOB)
    runner = proto.run_bqt_improved if cfg.scheme == "improved" else proto.run_bqt_zhou
    out = runner(msg_a, msg_b, mode=cfg.mode, rng=rng)
    results = out if isinstance(out, list) else [out]

    worst = min(results, key=lambda r: min(r.fidelity_A_to_B, r.fidelity_B_to_A))
    ok = min(worst.fidelity_A_to_B, worst.fidelity_B_to_A) >= FIDELITY_FLOOR
    if not ok:
        print(
            f"fidelity failure on branch {worst.branch}: "
            f"A->B {worst.fidelity_A_to_B:.12f}, B->A {worst.fidelity_B_to_A:.12f}",
            file=sys.stderr,
        )
    header = ["branch", "prob", "alice_correction", "bob_correction", "fidelity_A_to_B", "fidelity_B_to_A"]
    rows = [
        [r.branch, repr(r.prob), r.corrections_applied[ALICE], r.corrections_applied[BOB],
         repr(r.fidelity_A_to_B), repr(r.fidelity_B_to_A)]
        for r in results
    ]
    if cfg.output_format == "json":
        payload = {
            "scheme": cfg.scheme,
            "case": cfg.case,
            "mode": cfg.mode,
            "seed": cfg.seed,
            "coefficients": {w: [[c.real, c.imag] for c in coeffs[w]] for w in (ALICE, BOB)},
            "n_branches": len(results),
            "all_passed": ok,
            "branches": [r.to_dict() for r in results],
        }
        text = _json(payload)
    elif cfg.output_format == "csv":
        text = _csv(rows, header)
    else:
        text = _markdown_header() + _table_md(header, rows)
    return (0 if ok else 1), text


def cmd_efficiency(cfg: RunConfig) -> tuple[int, str]:
    pairs = [
        (s, c) for s, c in eff.all_schemes()
        if (cfg.scheme is None or s == cfg.scheme) and (cfg.case is None or c == cfg.case)
    ]
    reports = eff.compare_report(pairs)
    if cfg.output_format == "json":
        text = _json({"reports": [r.to_dict() for r in reports]})
    elif cfg.output_format == "csv":
        header = ["scheme", "case", "q_i", "q_r", "c_r", "a_u", "eta_num", "eta_den", "eta_percent", "canonical"]
        text = _csv([[r.to_dict()[h] for h in header] for r in reports], header)
    else:
        text = _markdown_header() + eff.to_markdown(reports)
    return 0, text


def cmd_attack(cfg: RunConfig) -> tuple[int, str]:
    strategy = (
        sec.EveStrategy.intercept_resend(cfg.basis) if cfg.strategy == "intercept-resend"
        else sec.EveStrategy(cfg.strategy)
    )
    points = sec.detection_curve(strategy, cfg.decoys, cfg.trials, cfg.seed)
    off = [p for p in points if not p.within_3sigma]
    if off and not cfg.quiet:
        log.warning("rows outside 3 sigma: %s", ", ".join(f"d={p.d}" for p in off))
    if cfg.output_format == "json":
        text = _json({"seed": cfg.seed, "rows": sec.curve_to_records(points)})
    elif cfg.output_format == "csv":
        rows = [[p.strategy, p.d, p.trials, repr(p.empirical_rate), repr(p.analytic_rate)] for p in points]
        text = _csv(rows, list(sec.CSV_COLUMNS))
    else:
        rows = [[p.strategy, p.d, p.trials, f"{p.empirical_rate:.4f}", f"{p.analytic_rate:.4f}"] for p in points]
        text = _markdown_header() + _table_md(list(sec.CSV_COLUMNS), rows)
    return 0, text


def cmd_derive_corrections(cfg: RunConfig) -> tuple[int, str]:
    try:
        table = proto.correction_table_for(cfg.channel)
    except proto.ProtocolInfeasible as exc:
        print(f"derivation failed for {cfg.channel}: {exc} (outcome {exc.bits})", file=sys.stderr)
        return 1, ""
    if cfg.output_format == "json":
        text = table.to_json() + "\n"
    else:
        rows = [[k, "-" if v is None else v.alice, "-" if v is None else v.bob] for k, v in table.entries.items()]
        header = ["bits", "alice", "bob"]
        text = _csv(rows, header) if cfg.output_format == "csv" else _markdown_header() + _table_md(header, rows)
    return 0, text


COMMANDS = {
    "run": cmd_run_protocol,
    "efficiency": cmd_efficiency,
    "attack": cmd_attack,
    "derive": cmd_derive_corrections,
}


def main(argv=None) -> int:
    logging.basicConfig(format="%(levelname)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = config_from_args(ns)
    except UsageError as exc:
        print(f"bqt: error: {exc}", file=sys.stderr)
        return 2
    code, text = COMMANDS[cfg.command](cfg)
    if text:
        if cfg.output_path is not None:
            cfg.output_path.write_text(text)
        else:
            sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
