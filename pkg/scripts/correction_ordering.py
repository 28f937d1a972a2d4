"""Correct-then-decompress versus decompress-then-correct on the four-qubit channel.

    python scripts/correction_ordering.py --pairs 20 --seed 3
"""
import argparse
from dataclasses import dataclass

import numpy as np

from bqt.channels import ALICE, BOB
from bqt.protocol import random_coefficients, run_bqt_improved, standard_message


@dataclass
class Config:
    pairs: int = 20
    seed: int = 0
    case: str = "2x3"


def failing_branches(cfg: Config, order: str) -> tuple[int, int, float]:
    rng = np.random.default_rng(cfg.seed)
    labels = ("b1", "b2", "b3") if cfg.case == "2x3" else ("b1", "b2")
    bad, total, worst = 0, 0, 1.0
    for _ in range(cfg.pairs):
        a = standard_message(*random_coefficients(rng), ("a1", "a2"), ALICE)
        b = standard_message(*random_coefficients(rng), labels, BOB)
        for r in run_bqt_improved(a, b, order=order):
            f = min(r.fidelity_A_to_B, r.fidelity_B_to_A)
            worst = min(worst, f)
            bad += f < 1 - 1e-9
            total += 1
    return bad, total, worst


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--pairs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--case", choices=("2x2", "2x3"), default="2x3")
    cfg = Config(**vars(p.parse_args()))
    for order in ("correct-then-decompress", "decompress-then-correct"):
        bad, total, worst = failing_branches(cfg, order)
        print(f"{order:24s} failing branches {bad}/{total}  worst fidelity {worst:.6f}")


if __name__ == "__main__":
    main()
