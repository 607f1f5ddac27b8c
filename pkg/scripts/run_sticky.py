#!/usr/bin/env python3
"""Escape diagnostics on the doubling-map model with growing terminal weight.

Prints, per start level n: the exact probability that one kernel step stays
inside the two-path level set, and the expected share of the terminal weight
held by the retained path.  A bounded-weight control model is shown for
contrast: its stay probability never approaches 1.
"""

import argparse

from pmcmc_lab import epsilon_bounded, sticky_experiment
from pmcmc_lab.exact_oracle import kernel_row
from pmcmc_lab.harness import _sticky_set, sticky_control_model


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--K", type=int, default=16, help="truncation level")
    parser.add_argument("--N", type=int, default=2, help="particle count")
    args = parser.parse_args()

    rows = sticky_experiment(args.K, args.N)
    control = sticky_control_model(args.K)
    eps = epsilon_bounded(control, args.N).epsilon
    print(f"{'n':>4} {'stay':>10} {'weight share':>13} {'control stay':>13}")
    worst_ctrl = 0.0
    for n, stay, suff in rows:
        ctrl_row = kernel_row(control, args.N, (n - 1, 2 * n - 1))
        ctrl = sum(p for path, p in ctrl_row.items() if path in set(_sticky_set(n)))
        worst_ctrl = max(worst_ctrl, ctrl)
        print(f"{n:>4} {stay:>10.6f} {suff:>13.6f} {ctrl:>13.6f}")
    verdict = "<=" if worst_ctrl <= 1 - eps else ">"
    print(f"\ncontrol worst stay {worst_ctrl:.6f} {verdict} 1 - eps = {1 - eps:.6f}")
    print("the growing-weight model's stay probability climbs toward 1 with n.")


if __name__ == "__main__":
    main()
