#!/usr/bin/env python3
"""Per-query gate-count survey across system sizes, the regression model
comparison, and the capacity extrapolation to a larger system at tau = n^2."""

import argparse
import json

from qspcap.capacity import CapacityModel, extrapolate
from qspcap.circuit import assemble_qsp, count_resources, peephole_optimize
from qspcap.gates import BuildOptions
from qspcap.hamiltonian import pauli_decompose, random_spin_chain
from qspcap.response import PhaseCache, synthesize_phases


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[3, 5, 7, 9, 11])
    ap.add_argument("--m", type=int, default=16)
    ap.add_argument("--tau", type=float, default=2.0)
    ap.add_argument("--circuits", type=int, default=4)
    ap.add_argument("--chi", type=float, default=594.0)
    ap.add_argument("--zeta", type=float, default=51.0)
    ap.add_argument("--source-n", type=int, default=11)
    ap.add_argument("--target-n", type=int, default=50)
    ap.add_argument("--target-count", type=float, default=1819.0,
                    help="per-query gate count of the target size")
    args = ap.parse_args()

    cache = PhaseCache()
    seq = synthesize_phases(args.tau, args.m, cache=cache)
    counts = {}
    for n in args.sizes:
        totals = []
        for k in range(args.circuits):
            lcu = pauli_decompose(random_spin_chain(n, 1000 + 17 * n + k))
            circ = peephole_optimize(assemble_qsp(lcu, seq, BuildOptions(peephole=False)))
            rc = count_resources(circ)
            totals.append(rc.per_query["total"])
        counts[n] = sum(totals) / len(totals)
        reg = count_resources(circ).regression_estimate
        print(f"n={n:3d}: measured per-query {counts[n]:7.1f}   regression model {reg:7.1f}")

    model = CapacityModel(kind="stochastic-linear",
                          params={"chi": args.chi, "zeta": args.zeta,
                                  "p_eps": 1e-6, "n": args.source_n})
    counts[args.target_n] = args.target_count
    out = extrapolate(model, args.source_n, args.target_n, counts,
                      taus=[args.target_n**2])
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
