"""Which measurement plans admit Pauli-only corrections on each channel.

Prints, per channel and local frame, whether a correction table exists and
how many broadcast keys are reachable.

    python scripts/channel_feasibility.py
"""
from bqt import protocol as proto
from bqt.channels import eq4_spec, make_channel_eq3, make_channel_eq4, schmidt_rank, two_bell_spec


def frames():
    for label, spec in (("eq4", eq4_spec()), ("bell-x2", two_bell_spec())):
        for ops in proto.IMPROVED_FRAMES:
            plan = proto.bidirectional_plan(ops)
            try:
                table = proto.derive_correction_table(spec, plan)
                status = f"ok, {len(table.reachable)}/{len(table)} keys, max candidates {max(v.candidates for v in table.entries.values())}"
            except proto.ProtocolInfeasible as exc:
                status = f"infeasible at outcome {exc.bits}"
            yield label, plan.name, status


def zhou_groupings():
    ok = 0
    total = 0
    first = None
    for spec, plan in proto.zhou_candidates():
        total += 1
        try:
            table = proto.derive_correction_table(spec, plan)
        except proto.ProtocolInfeasible:
            continue
        ok += 1
        first = first or (plan.name, table)
    return ok, total, first


def main():
    print("channel   plan                                status")
    for label, name, status in frames():
        print(f"{label:9s} {name:35s} {status}")
    print()
    print(f"Schmidt rank eq4 (A|B): {schmidt_rank(make_channel_eq4(), ['A1', 'A2'])}")
    print(f"Schmidt rank eq3 (123|456): {schmidt_rank(make_channel_eq3(), ['1', '2', '3'])}")
    ok, total, first = zhou_groupings()
    print(f"six-qubit GHZ groupings with a Pauli table: {ok}/{total}")
    if first:
        name, table = first
        cands = sorted({v.candidates for v in table.entries.values() if v})
        print(f"first: {name}; reachable keys {len(table.reachable)}/64; candidates per key {cands}")


if __name__ == "__main__":
    main()
