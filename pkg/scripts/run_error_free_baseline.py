#!/usr/bin/env python3
"""Error-free resolution baseline: sweep query depth at n=3, tau=2 and
compare the measured failure rate and infidelity to the design bounds."""

import argparse

from qspcap.capacity import ExperimentConfig, emit_report, run_experiment
from qspcap.response import PhaseCache


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--tau", type=float, default=2.0)
    ap.add_argument("--depths", type=int, nargs="+", default=[8, 10, 12, 14, 16])
    ap.add_argument("--hamiltonians", type=int, default=8)
    ap.add_argument("--states", type=int, default=2)
    ap.add_argument("--seed", type=int, default=41)
    ap.add_argument("--out", default="runs/error_free")
    args = ap.parse_args()

    cache = PhaseCache()
    results = []
    for m in args.depths:
        cfg = ExperimentConfig(n=args.n, tau=args.tau, m=m, channel=None,
                               hamiltonian_count=args.hamiltonians,
                               states_per_hamiltonian=args.states, seed=args.seed)
        res = run_experiment(cfg, cache)
        results.append(res)
        print(f"m={m:3d}: eps_num={res.eps_num:.3e}  "
              f"p_f={res.p_f_mean:.3e} ({res.p_f_mean / res.eps_num:.2f} eps)  "
              f"infid={res.infid_mean:.3e} ({res.infid_mean / res.eps_num**2:.2f} eps^2)")
    paths = emit_report(results, [], args.out)
    print("report:", paths)


if __name__ == "__main__":
    main()
