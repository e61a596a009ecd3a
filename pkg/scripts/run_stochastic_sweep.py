#!/usr/bin/env python3
"""Depolarizing-noise configuration sweep with the importance-sampled
estimator, followed by the linear capacity-model fit and the optimal-depth
search."""

import argparse

from qspcap.capacity import (
    ExperimentConfig,
    emit_report,
    find_optimal_depth,
    fit_stochastic,
    run_experiment,
)
from qspcap.errors import ErrorChannel
from qspcap.response import PhaseCache


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--tau", type=float, default=2.0)
    ap.add_argument("--p-eps", type=float, default=3e-5)
    ap.add_argument("--depths", type=int, nargs="+", default=[16, 20, 24, 28, 32])
    ap.add_argument("--trials", type=int, default=8)
    ap.add_argument("--hamiltonians", type=int, default=4)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--out", default="runs/stochastic")
    args = ap.parse_args()

    channel = ErrorChannel("depolarization", args.p_eps)
    cache = PhaseCache()
    results = []
    for m in args.depths:
        cfg = ExperimentConfig(n=args.n, tau=args.tau, m=m, channel=channel,
                               trials=args.trials, hamiltonian_count=args.hamiltonians,
                               seed=args.seed)
        res = run_experiment(cfg, cache)
        results.append(res)
        print(f"m={m:3d}: p_f={res.p_f_mean:.4e} ± {res.p_f_stderr:.1e}  "
              f"infid={res.infid_mean:.3e}  slots={res.slots}")
    model = fit_stochastic(results)
    p = model.params
    print(f"chi={p['chi']:.4g} ± {p['chi_ci95']:.2g}  "
          f"zeta={p['zeta']:.4g} ± {p['zeta_ci95']:.2g}  "
          f"(R^2 {model.residuals['chi_r2']:.4f})")
    best = find_optimal_depth(args.n, args.tau, channel, seed=args.seed,
                              chi_hint=p["chi"],
                              config_kwargs=dict(trials=args.trials,
                                                 hamiltonian_count=args.hamiltonians))
    print(f"optimal depth m*={best.m_star}: p_f*={best.p_f_star:.4e}")
    paths = emit_report(results, [model], args.out)
    print("report:", paths)


if __name__ == "__main__":
    main()
