"""Command-line entry point exposing the toolchain stages.

Subcommands: phases, build, simulate, sweep, fit, report.  Every run writes
a manifest capturing its full configuration; run directories are never
clobbered (a numeric suffix is appended instead).  Exit codes: 0 success,
2 configuration error, 3 numerical failure, 4 capacity exceeded.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .circuit import assemble_qsp, count_resources
from .errors import ErrorChannel, channel_from_json, coherent_plan, sample_plan
from .gates import BuildOptions
from .hamiltonian import (
    ideal_final_state,
    load_hamiltonian,
    pauli_decompose,
    random_product_state,
    random_spin_chain,
    rng_stream,
    save_hamiltonian,
)
from .qasm import export_qasm, import_qasm_file
from .response import (
    DegreeReductionStall,
    PhaseCache,
    RootFindingError,
    SynthesisError,
    synthesize_phases,
)
from .simulators.run import fidelity_accumulate, run_circuit
from .specfun import DomainError, PrecisionExhausted, eps_asy, eps_num, required_depth

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CAPACITY = 4


class ConfigError(ValueError):
    pass


def _fresh_dir(base: str) -> str:
    if not os.path.exists(base):
        os.makedirs(base)
        return base
    i = 1
    while True:
        cand = f"{base}.{i}"
        if not os.path.exists(cand):
            os.makedirs(cand)
            return cand
        i += 1


def _write_manifest(out_dir: str, command: str, payload: dict) -> None:
    manifest = {
        "tool": "qspcap",
        "version": __version__,
        "command": command,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "configuration": payload,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)


def _phase_cache(args) -> PhaseCache:
    return PhaseCache(getattr(args, "cache_dir", None))


def cmd_phases(args) -> int:
    if (args.m is None) == (args.eps is None):
        raise ConfigError("provide exactly one of --m / --eps")
    tau = args.tau
    if tau < 0:
        raise ConfigError("--tau must be >= 0")
    m = args.m if args.m is not None else required_depth(tau, args.eps)
    cache = _phase_cache(args)
    hits_before = cache.hits
    seq = synthesize_phases(tau, m, cache=cache)
    hit = cache.hits > hits_before
    e_num = float(eps_num(tau, m)) if tau > 0 else 0.0
    e_asy = float(eps_asy(tau, m)) if tau > 0 else 0.0
    path = args.out or f"phases_tau{tau:g}_m{m}.txt"
    written = cache.put(seq)
    import shutil

    shutil.copyfile(written, path)
    print(f"phases: tau={tau:g} m={m} cache_hit={hit}")
    print(f"eps_num={e_num:.6e} eps_asy={e_asy:.6e} residual={seq.verification_residual:.3e}")
    print(f"wrote {path}")
    return EXIT_OK


def _load_lcu(args):
    if args.hamiltonian:
        return load_hamiltonian(args.hamiltonian)
    if args.spin_chain:
        spec = random_spin_chain(args.spin_chain, args.seed)
        return pauli_decompose(spec)
    raise ConfigError("provide --hamiltonian FILE or --spin-chain N")


def cmd_build(args) -> int:
    lcu = _load_lcu(args)
    from .response import load_phase_file

    if args.phases:
        seq = load_phase_file(args.phases)
    elif args.tau is not None and args.m is not None:
        seq = synthesize_phases(args.tau, args.m, cache=_phase_cache(args))
    else:
        raise ConfigError("provide --phases FILE or both --tau and --m")
    opts = BuildOptions(
        echo_prep=args.echo_prep,
        echo_select=args.echo_select,
        symmetrize=args.symmetrize,
        decompose_toffoli=args.decompose_toffoli,
        peephole=not args.no_peephole,
    )
    circ = assemble_qsp(lcu, seq, opts)
    out = args.out or "circuit.qasm"
    export_qasm(circ, out)
    rc = count_resources(circ)
    print(f"built m={seq.m} circuit on n={lcu.n} d={lcu.d} ({circ.n_qubits} qubits)")
    print("resources:", rc.summary())
    print(f"regression model estimate (per query): {rc.regression_estimate:.1f}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    circ = import_qasm_file(args.qasm)
    channel = None
    if args.errors:
        with open(args.errors) as fh:
            channel = channel_from_json(json.load(fh))
    rng = rng_stream(args.seed, "cli-sim")
    psi0 = random_product_state(circ.n, rng)
    ideal = None
    tau = circ.meta.get("tau")
    if args.spin_chain or args.hamiltonian:
        lcu = _load_lcu(args)
        if tau is not None:
            ideal = ideal_final_state(lcu, tau, psi0)
    outcomes = []
    rows = []
    trials = args.trials if channel is not None and channel.stochastic else 1
    for t in range(trials):
        if channel is None:
            plan = None
        elif channel.stochastic:
            plan = sample_plan(circ, channel, args.seed, trial_id=t)
        else:
            plan = coherent_plan(circ, channel)
        out = run_circuit(circ, plan, psi0, backend=args.backend, ideal_tgt=ideal, seed=args.seed)
        outcomes.append(out)
        rows.append((t, args.seed, out.n_errors, out.p_f, out.q_sq))
    out_path = args.out or "simulation.csv"
    with open(out_path, "w") as fh:
        fh.write("trial,seed,n_errors,p_f,q_sq\n")
        for r in rows:
            fh.write(",".join(repr(v) for v in r) + "\n")
    pf = float(np.mean([o.p_f for o in outcomes]))
    pf_se = float(np.std([o.p_f for o in outcomes]) / max(len(outcomes) - 1, 1) ** 0.5)
    line = f"p_f={pf:.6e} (stderr {pf_se:.1e})"
    if ideal is not None:
        delta, se = fidelity_accumulate(outcomes)
        line += f" delta_F={delta:.6e} (stderr {se:.1e})"
    print(line)
    print(f"wrote {out_path}")
    return EXIT_OK


def _experiment_from_json(obj, seed_default=0):
    from .capacity import ExperimentConfig

    ch = channel_from_json(obj["channel"]) if obj.get("channel") else None
    opts = BuildOptions(**obj["opts"]) if obj.get("opts") else None
    return ExperimentConfig(
        n=int(obj["n"]), tau=float(obj["tau"]), m=int(obj["m"]), channel=ch,
        trials=int(obj.get("trials", 8)),
        hamiltonian_count=int(obj.get("hamiltonian_count", 4)),
        states_per_hamiltonian=int(obj.get("states_per_hamiltonian", 1)),
        seed=int(obj.get("seed", seed_default)),
        backend=obj.get("backend", "dense"),
        opts=opts,
        max_fault_count=int(obj.get("max_fault_count", 3)),
        importance=bool(obj.get("importance", True)),
    )


def cmd_sweep(args) -> int:
    from .capacity import emit_report, run_experiment

    with open(args.config) as fh:
        spec = json.load(fh)
    out_dir = _fresh_dir(args.out or "runs/sweep")
    _write_manifest(out_dir, "sweep", {"config": spec, "seed": args.seed,
                                       "workers": args.workers})
    points = spec if isinstance(spec, list) else spec.get("points", [])
    cache = _phase_cache(args)
    results = []
    failures = []
    for i, obj in enumerate(points):
        cfg = _experiment_from_json(obj, seed_default=args.seed)
        try:
            results.append(run_experiment(cfg, cache))
        except Exception as exc:  # noqa: BLE001 - partial-failure manifest
            failures.append({"point": i, "error": repr(exc)})
    paths = emit_report(results, [], out_dir)
    if failures:
        with open(os.path.join(out_dir, "failures.json"), "w") as fh:
            json.dump(failures, fh, indent=2)
        print(f"{len(failures)} points failed; see failures.json")
    print(f"sweep complete: {len(results)} points -> {out_dir}")
    return EXIT_OK if not failures else EXIT_NUMERICAL


def cmd_fit(args) -> int:
    from .capacity import emit_report, fit_stochastic, run_experiment

    with open(args.config) as fh:
        spec = json.load(fh)
    out_dir = _fresh_dir(args.out or "runs/fit")
    _write_manifest(out_dir, "fit", {"config": spec, "seed": args.seed})
    cache = _phase_cache(args)
    results = [run_experiment(_experiment_from_json(o, args.seed), cache)
               for o in spec["points"]]
    model = fit_stochastic(results, require_dominated=not spec.get("allow_shallow", False))
    paths = emit_report(results, [model], out_dir)
    p = model.params
    print(f"chi={p['chi']:.4g} ± {p['chi_ci95']:.2g}, zeta={p['zeta']:.4g} ± {p['zeta_ci95']:.2g}")
    print(f"fit written to {paths['model']}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .capacity import CapacityModel, emit_report, extrapolate

    with open(args.model) as fh:
        models_json = json.load(fh)
    out_dir = _fresh_dir(args.out or "runs/report")
    _write_manifest(out_dir, "report", {"model": args.model})
    models = [CapacityModel(kind=m["kind"], params=m["params"],
                            residuals=m.get("residuals", {}),
                            provenance=m.get("provenance", []))
              for m in models_json]
    payload = []
    for model in models:
        entry = model.to_json()
        if args.extrapolate_to and model.kind == "stochastic-linear":
            counts = json.loads(args.counts) if args.counts else {}
            counts = {int(k): float(v) for k, v in counts.items()}
            entry["extrapolation"] = extrapolate(
                model, model.params.get("n", args.source_n), args.extrapolate_to, counts
            )
        payload.append(entry)
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
    print(f"report written to {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=str, default=None)
    common.add_argument("--precision-bits", type=int, default=None)
    common.add_argument("--backend", type=str, default="dense",
                        choices=("dense", "tree", "hybrid"))
    common.add_argument("--cache-dir", type=str,
                        default=os.environ.get("QSPCAP_PHASE_CACHE"))
    ap = argparse.ArgumentParser(prog="qspcap", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help):  # noqa: A002 - argparse idiom
        return sub.add_parser(name, help=help, parents=[common])

    p = add("phases", "compute or cache-load a phase sequence")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.set_defaults(func=cmd_phases)

    b = add("build", "construct an optimized QSP circuit (QASM)")
    b.add_argument("--hamiltonian", type=str, default=None)
    b.add_argument("--spin-chain", type=int, default=None)
    b.add_argument("--phases", type=str, default=None)
    b.add_argument("--tau", type=float, default=None)
    b.add_argument("--m", type=int, default=None)
    b.add_argument("--echo-prep", type=str, default=None)
    b.add_argument("--echo-select", type=str, default=None)
    b.add_argument("--symmetrize", action="store_true")
    b.add_argument("--decompose-toffoli", action="store_true")
    b.add_argument("--no-peephole", action="store_true")
    b.set_defaults(func=cmd_build)

    s = add("simulate", "execute a QASM circuit with errors")
    s.add_argument("--qasm", type=str, required=True)
    s.add_argument("--errors", type=str, default=None, help="JSON channel config")
    s.add_argument("--trials", type=int, default=16)
    s.add_argument("--hamiltonian", type=str, default=None)
    s.add_argument("--spin-chain", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    w = add("sweep", "run a configuration sweep from JSON")
    w.add_argument("--config", type=str, required=True)
    w.add_argument("--workers", type=int, default=1)
    w.set_defaults(func=cmd_sweep)

    f = add("fit", "fit the stochastic linear capacity model")
    f.add_argument("--config", type=str, required=True)
    f.set_defaults(func=cmd_fit)

    r = add("report", "emit tables/plots from a fitted model")
    r.add_argument("--model", type=str, required=True)
    r.add_argument("--extrapolate-to", type=int, default=None)
    r.add_argument("--source-n", type=int, default=11)
    r.add_argument("--counts", type=str, default=None,
                   help='JSON map n -> per-query gate count, e.g. {"11":440,"50":1819}')
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        if isinstance(exc, (DomainError,)):
            print(f"configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SynthesisError, RootFindingError, DegreeReductionStall,
            PrecisionExhausted, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MemoryError as exc:
        print(f"capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY


if __name__ == "__main__":
    sys.exit(main())
