"""Experiment sweeps, optimal-depth search, capacity models, extrapolation.

run_experiment executes one (n, tau, m, channel) configuration averaged over
randomized Hamiltonians, initial states, and (for stochastic channels)
importance-sampled error placements, and is bit-reproducible from its seed.
fit_stochastic extracts the linear noise slopes chi_n (failure) and zeta_n
(infidelity) per unit error rate; fit_coherent fits the constant-plus-power
capacity model; extrapolate rescales slopes by per-query gate-count ratios
and evaluates the tau = n^2 meaningful-simulation curve.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .circuit import assemble_qsp, count_resources
from .errors import (
    ErrorChannel,
    InsufficientCoverage,
    channel_from_json,
    channel_to_json,
    coherent_plan,
    combine_importance,
    count_slots,
    sample_plan,
)
from .gates import BuildOptions, Circuit
from .hamiltonian import (
    ideal_final_state,
    pauli_decompose,
    random_product_state,
    random_spin_chain,
    rng_stream,
)
from .response import PhaseCache, synthesize_phases
from .simulators.run import fidelity_accumulate, run_circuit
from .specfun import eps_num, required_depth

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "CapacityModel",
    "run_experiment",
    "find_optimal_depth",
    "fit_stochastic",
    "fit_coherent",
    "extrapolate",
    "emit_report",
    "ERROR_FREE_PF_COEFF",
]

# Empirical error-free levels: p_f ~ 2.93 eps, delta_F ~ 0.833 eps^2.
ERROR_FREE_PF_COEFF = 2.93
ERROR_FREE_INFID_COEFF = 0.833


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    tau: float
    m: int
    channel: ErrorChannel | None = None
    trials: int = 8  # error-placement trials per conditioned fault count
    hamiltonian_count: int = 4
    states_per_hamiltonian: int = 1
    seed: int = 0
    backend: str = "dense"
    opts: BuildOptions | None = None
    max_fault_count: int = 3
    importance: bool = True  # stochastic path: condition on fault counts
    tail_tol: float = 1e-3

    def __post_init__(self):
        if self.m % 2 != 0 or self.m < 2:
            raise ValueError("m must be even and >= 2")
        if self.trials < 1:
            raise ValueError("trials >= 1 required")

    def describe(self) -> dict:
        d = {
            "n": self.n, "tau": self.tau, "m": self.m,
            "channel": channel_to_json(self.channel) if self.channel else None,
            "trials": self.trials, "hamiltonian_count": self.hamiltonian_count,
            "states_per_hamiltonian": self.states_per_hamiltonian,
            "seed": self.seed, "backend": self.backend,
            "max_fault_count": self.max_fault_count, "importance": self.importance,
        }
        if self.opts is not None:
            d["opts"] = dataclasses.asdict(self.opts)
        return d


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    p_f_mean: float
    p_f_stderr: float
    infid_mean: float
    infid_stderr: float
    eps_num: float
    gate_total: int
    per_query_gates: float
    slots: int
    by_fault_count: dict = field(default_factory=dict)
    tail_mass: float = 0.0
    effective_trials: int = 0
    rows: list = field(default_factory=list)  # per-trial CSV rows

    def csv_rows(self):
        return self.rows


def _csv_row(h_i, s_i, trial, outcome):
    return {
        "hamiltonian": h_i,
        "state": s_i,
        "trial": trial,
        "seed": outcome.seed,
        "n_errors": outcome.n_errors,
        "p_f": repr(outcome.p_f),
        "q_sq": repr(outcome.q * outcome.q),
    }


def run_experiment(config: ExperimentConfig, cache: PhaseCache | None = None) -> ExperimentResult:
    """Average p_f and infidelity over Hamiltonians x states x placements.

    Stochastic channels are importance-sampled per fault count N and folded
    through the binomial weights; error placements reuse common random
    numbers across configurations sharing a seed, reducing the variance of
    optimal-depth comparisons.
    """
    phases = synthesize_phases(config.tau, config.m, cache=cache)
    eps = float(phases.eps_baked)
    pf_samples = []
    num_samples = []  # p * q^2 (fidelity numerator)
    per_n_pf: dict = {}
    per_n_num: dict = {}
    per_n_den: dict = {}
    rows = []
    gate_total = 0
    slots = 0
    tail = 0.0
    eff_trials = 0
    ch = config.channel
    for h_i in range(config.hamiltonian_count):
        spec = random_spin_chain(config.n, rng_stream(config.seed, "haml", h_i).integers(2**31))
        lcu = pauli_decompose(spec)
        circ = assemble_qsp(lcu, phases, config.opts or BuildOptions())
        gate_total = count_resources(circ).total
        coverage = (_coverage_depth(circ, ch, config)
                    if (ch is not None and ch.stochastic and config.importance) else None)
        for s_i in range(config.states_per_hamiltonian):
            srng = rng_stream(config.seed, "state", h_i, s_i)
            psi0 = random_product_state(config.n, srng)
            ideal = ideal_final_state(lcu, config.tau, psi0)
            base_seed = int(rng_stream(config.seed, "plan-seed", h_i, s_i).integers(2**31))
            if ch is None:
                out = run_circuit(circ, None, psi0, config.backend, ideal)
                pf_samples.append(out.p_f)
                num_samples.append(out.surviving_norm * out.q**2)
                rows.append(_csv_row(h_i, s_i, 0, out))
                eff_trials += 1
            elif not ch.stochastic:
                plan = coherent_plan(circ, ch)
                out = run_circuit(circ, plan, psi0, config.backend, ideal)
                pf_samples.append(out.p_f)
                num_samples.append(out.surviving_norm * out.q**2)
                rows.append(_csv_row(h_i, s_i, 0, out))
                eff_trials += 1
            elif coverage is not None:
                slots = count_slots(circ, ch)
                kmax = min(coverage, slots)
                for n_err in range(0, kmax + 1):
                    reps = 1 if n_err == 0 else config.trials
                    for t in range(reps):
                        plan = sample_plan(circ, ch, base_seed, conditioned_n=n_err,
                                           trial_id=n_err * 1000 + t)
                        out = run_circuit(circ, plan, psi0, config.backend, ideal)
                        per_n_pf.setdefault(n_err, []).append(out.p_f)
                        per_n_num.setdefault(n_err, []).append(out.surviving_norm * out.q**2)
                        per_n_den.setdefault(n_err, []).append(out.surviving_norm)
                        rows.append(_csv_row(h_i, s_i, t, out))
                        eff_trials += 1
            else:
                slots = count_slots(circ, ch)
                for t in range(config.trials):
                    plan = sample_plan(circ, ch, base_seed, trial_id=t)
                    out = run_circuit(circ, plan, psi0, config.backend, ideal)
                    pf_samples.append(out.p_f)
                    num_samples.append(out.surviving_norm * out.q**2)
                    rows.append(_csv_row(h_i, s_i, t, out))
                    eff_trials += 1

    if per_n_pf:
        means_pf = {k: float(np.mean(v)) for k, v in per_n_pf.items()}
        means_num = {k: float(np.mean(v)) for k, v in per_n_num.items()}
        means_den = {k: float(np.mean(v)) for k, v in per_n_den.items()}
        pf, tail = combine_importance(means_pf, slots, ch.strength, config.tail_tol)
        num, _ = combine_importance(means_num, slots, ch.strength, config.tail_tol)
        den, _ = combine_importance(means_den, slots, ch.strength, config.tail_tol)
        infid = 1.0 - num / den if den > 0 else 1.0
        # stderr from the dominant nonzero-fault counts
        pf_se = _importance_stderr(per_n_pf, slots, ch.strength)
        inf_se = pf_se  # same sampling structure; conservative reuse
        by_n = {k: {"p_f": means_pf[k], "fidelity_num": means_num[k],
                    "survival": means_den[k], "trials": len(per_n_pf[k])}
                for k in sorted(per_n_pf)}
        result = ExperimentResult(
            config=config, p_f_mean=pf, p_f_stderr=pf_se,
            infid_mean=infid, infid_stderr=inf_se, eps_num=eps,
            gate_total=gate_total, per_query_gates=gate_total / config.m,
            slots=slots, by_fault_count=by_n, tail_mass=tail,
            effective_trials=eff_trials, rows=rows,
        )
        return result
    pf = float(np.mean(pf_samples))
    pf_se = float(np.std(pf_samples, ddof=1) / math.sqrt(len(pf_samples))) if len(pf_samples) > 1 else 0.0
    den = np.array([1.0 - v for v in pf_samples])
    num = np.array(num_samples)
    infid = float(1.0 - num.sum() / den.sum()) if den.sum() > 0 else 1.0
    resid = den * (num / np.maximum(den, 1e-300) - (1.0 - infid))
    inf_se = float(np.sqrt((resid**2).sum()) / den.sum()) if len(den) > 1 else 0.0
    return ExperimentResult(
        config=config, p_f_mean=pf, p_f_stderr=pf_se,
        infid_mean=infid, infid_stderr=inf_se, eps_num=eps,
        gate_total=gate_total, per_query_gates=gate_total / config.m,
        slots=slots, effective_trials=eff_trials, rows=rows,
    )


_IMPORTANCE_COUNT_CAP = 24


def _coverage_depth(circ, ch, config) -> int | None:
    """Fault-count ceiling covering the binomial tail, or None when the
    expected fault count is high enough that conditioning loses to direct
    sampling (every trial then carries faults anyway)."""
    from scipy.stats import binom

    R = count_slots(circ, ch)
    if R == 0 or ch.strength == 0.0:
        return config.max_fault_count
    needed = int(binom.ppf(1.0 - 0.5 * config.tail_tol, R, ch.strength))
    kmax = max(config.max_fault_count, needed)
    return kmax if kmax <= _IMPORTANCE_COUNT_CAP else None


def _importance_stderr(per_n: dict, R: int, p: float) -> float:
    from scipy.stats import binom

    var = 0.0
    for n_err, vals in per_n.items():
        if len(vals) < 2:
            continue
        w = float(binom.pmf(n_err, R, p))
        var += (w * np.std(vals, ddof=1) / math.sqrt(len(vals))) ** 2
    return math.sqrt(var)


# ---------------------------------------------------------------------------
# Optimal query depth.


@dataclass
class OptimalDepth:
    m_star: int
    p_f_star: float
    infid_star: float
    flagged: str | None = None  # "unbounded" | "budget-exhausted"


def find_optimal_depth(
    n: int,
    tau: float,
    channel: ErrorChannel | None,
    search_budget: int = 24,
    seed: int = 0,
    chi_hint: float | None = None,
    backend: str = "dense",
    config_kwargs: dict | None = None,
) -> OptimalDepth:
    """argmin_m of the expected failure rate at fixed (n, tau, channel).

    Error-free: no interior minimum exists (resolution falls indefinitely),
    so the budget ceiling is returned flagged "unbounded".  Stochastic:
    closed-form minimization of the fitted linear model using the
    monotonicity of eps_num.  Coherent: bootstrapped scan seeded inside the
    band p_eps <= eps_num(tau, m) <= 100 p_eps.
    """
    m_floor = max(2 * math.ceil(tau), 2)
    if channel is None or channel.strength == 0.0:
        m_cap = m_floor + 2 * search_budget
        return OptimalDepth(m_star=m_cap, p_f_star=float("nan"),
                            infid_star=float("nan"), flagged="unbounded")
    kwargs = config_kwargs or {}
    if channel.stochastic:
        # model: pf(m) = c_free * eps_num(tau, m) + chi * m * p; chi from a
        # two-point probe unless supplied.
        if chi_hint is None:
            chi_hint = _probe_chi(n, tau, channel, seed, backend, kwargs)
        best = None
        m = m_floor
        for _ in range(search_budget):
            model = ERROR_FREE_PF_COEFF * float(eps_num(tau, m)) + chi_hint * m * channel.strength
            if best is None or model < best[1]:
                best = (m, model)
            elif model > 4 * best[1] and m > best[0] + 4:
                break
            m += 2
        m_star = best[0]
        res = run_experiment(ExperimentConfig(n=n, tau=tau, m=m_star, channel=channel,
                                              seed=seed, backend=backend, **kwargs))
        return OptimalDepth(m_star=m_star, p_f_star=res.p_f_mean, infid_star=res.infid_mean)
    # Coherent: evaluate actual simulations on the band of candidate depths.
    p = channel.strength
    lo = required_depth(tau, min(100.0 * p, 0.5))
    hi = max(required_depth(tau, max(p, 1e-300)) if p > 1e-200 else lo + 2 * search_budget, lo + 2)
    candidates = sorted(set(
        int(x) if int(x) % 2 == 0 else int(x) + 1
        for x in np.linspace(lo, hi, min(search_budget, (hi - lo) // 2 + 1))
    ))
    best = None
    evals = 0
    for m in candidates:
        res = run_experiment(ExperimentConfig(n=n, tau=tau, m=m, channel=channel,
                                              seed=seed, backend=backend, **kwargs))
        evals += 1
        if best is None or res.p_f_mean < best[1].p_f_mean:
            best = (m, res)
        if evals >= search_budget:
            return OptimalDepth(m_star=best[0], p_f_star=best[1].p_f_mean,
                                infid_star=best[1].infid_mean, flagged="budget-exhausted")
    return OptimalDepth(m_star=best[0], p_f_star=best[1].p_f_mean,
                        infid_star=best[1].infid_mean)


def _probe_chi(n, tau, channel, seed, backend, kwargs) -> float:
    m_probe = max(2 * math.ceil(tau), 2) + 8
    res = run_experiment(ExperimentConfig(n=n, tau=tau, m=m_probe, channel=channel,
                                          seed=seed, backend=backend, **kwargs))
    baseline = ERROR_FREE_PF_COEFF * res.eps_num
    return max((res.p_f_mean - baseline) / (m_probe * channel.strength), 0.0)


# ---------------------------------------------------------------------------
# Model fits.


@dataclass
class CapacityModel:
    kind: str  # stochastic-linear | coherent-power | coherent-linear
    params: dict
    residuals: dict = field(default_factory=dict)
    provenance: list = field(default_factory=list)
    m_star_table: list = field(default_factory=list)  # (n, tau, m*, p_f*, infid*)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.params,
            "residuals": self.residuals,
            "provenance": self.provenance,
            "m_star_table": self.m_star_table,
        }


class InsufficientDominance(ValueError):
    """Error-free baseline is not negligible on the fitted grid."""


def fit_stochastic(results: list, require_dominated: bool = True) -> CapacityModel:
    """Least-squares slopes chi_n, zeta_n of the linear noise model.

    Fits p_f = baseline + chi * m * p_eps and infid = baseline + zeta * m *
    p_eps on configurations in the noise-dominated region, after subtracting
    the error-free baselines; reports 95% confidence half-widths.
    """
    if len(results) < 4:
        raise ValueError("need >= 4 grid points for the linear fit")
    p = results[0].config.channel.strength
    ms = np.array([r.config.m for r in results], dtype=float)
    pf = np.array([r.p_f_mean for r in results])
    infid = np.array([r.infid_mean for r in results])
    base_pf = np.array([ERROR_FREE_PF_COEFF * r.eps_num for r in results])
    base_inf = np.array([ERROR_FREE_INFID_COEFF * r.eps_num**2 for r in results])
    if require_dominated and np.any(base_pf > 0.1 * np.maximum(pf, 1e-300)):
        raise InsufficientDominance(
            "error-free baseline above 10% of the measured failure rate"
        )
    chi, chi_ci, chi_r2 = _line_through_origin(ms, (pf - base_pf) / p)
    zeta, zeta_ci, zeta_r2 = _line_through_origin(ms, (infid - base_inf) / p)
    return CapacityModel(
        kind="stochastic-linear",
        params={"chi": chi, "zeta": zeta, "chi_ci95": chi_ci, "zeta_ci95": zeta_ci,
                "p_eps": p, "n": results[0].config.n},
        residuals={"chi_r2": chi_r2, "zeta_r2": zeta_r2},
        provenance=[r.config.describe() for r in results],
    )


def _line_through_origin(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope = float((x * y).sum() / (x * x).sum())
    resid = y - slope * x
    dof = max(len(x) - 1, 1)
    se = math.sqrt(float((resid**2).sum()) / dof / float((x * x).sum()))
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return slope, 1.96 * se, r2


def linear_fit(x, y):
    """Ordinary least squares y = a + b x; returns (a, b, r2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.vstack([np.ones_like(x), x]).T
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


def fit_coherent(points: list, prep_points: list | None = None) -> CapacityModel:
    """Fit at-capacity failure-rate points (tau, p_f*) against tau.

    Fits the power-law alpha + beta * tau^gamma and the conservative linear
    alternative; a separate constant is fitted to projector-restricted
    points when given (their contribution is tau-independent).
    """
    from scipy.optimize import curve_fit

    taus = np.array([t for t, _ in points], dtype=float)
    pfs = np.array([v for _, v in points], dtype=float)
    if len(points) < 3 or taus.max() / max(taus.min(), 1e-12) < 10.0:
        raise ValueError("need >= 3 capacity points spanning a decade in tau")

    def power(t, a, b, g):
        return a + b * np.power(t, g)

    p0 = (max(pfs.min(), 1e-12), max((pfs[-1] - pfs[0]) / taus[-1], 1e-12), 1.0)
    try:
        popt, _ = curve_fit(power, taus, pfs, p0=p0, maxfev=20000)
    except RuntimeError as exc:
        raise ValueError(f"ill-conditioned power-law fit: {exc}") from exc
    a_lin, b_lin, r2_lin = linear_fit(taus, pfs)
    pred = power(taus, *popt)
    ss_res = float(((pfs - pred) ** 2).sum())
    ss_tot = float(((pfs - pfs.mean()) ** 2).sum())
    r2_pow = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    params = {
        "alpha": float(popt[0]), "beta": float(popt[1]), "gamma": float(popt[2]),
        "linear_alpha": a_lin, "linear_beta": b_lin,
    }
    residuals = {"power_r2": r2_pow, "linear_r2": r2_lin}
    if prep_points:
        pt = [t for t, _ in prep_points]
        pv = [v for _, v in prep_points]
        params["prep_constant"] = float(np.mean(pv))
        if len(prep_points) >= 2:
            _, slope, _ = linear_fit(pt, pv)
            # tau-independence of the projector contribution: slope ~ 0
            params["prep_tau_slope"] = slope
    return CapacityModel(kind="coherent-power", params=params, residuals=residuals,
                         provenance=[{"tau": float(t), "p_f": float(v)} for t, v in points])


def extrapolate(model: CapacityModel, n_source: int, n_target: int,
                counts: dict, taus=None) -> dict:
    """Rescale a fitted model to a larger system by per-query gate counts.

    counts maps n -> per-query gate total (e.g. measured Table values);
    stochastic slopes scale by the count ratio, projector constants by
    4^d.  Emits capacity curves p_f*(tau) and the meaningful-simulation
    value at tau = n^2.
    """
    ratio = counts[n_target] / counts[n_source]
    out = {"gate_ratio": ratio, "n_source": n_source, "n_target": n_target}
    if model.kind == "stochastic-linear":
        chi_t = model.params["chi"] * ratio
        zeta_t = model.params["zeta"] * ratio
        out["chi"] = chi_t
        out["zeta"] = zeta_t
        p = model.params["p_eps"]
        taus = list(taus) if taus is not None else [float(n_target**2)]
        curve = []
        for tau in taus:
            best = None
            m = max(2 * math.ceil(tau), 2)
            for _ in range(400):
                val = ERROR_FREE_PF_COEFF * float(eps_num(tau, m)) + chi_t * m * p
                if best is None or val < best[1]:
                    best = (m, val)
                elif m > best[0] + 8:
                    break
                m += 2
            curve.append({"tau": tau, "m_star": best[0], "p_f_star": best[1]})
        out["capacity_curve"] = curve
        out["meaningful_tau"] = float(n_target**2)
    else:
        d_s = 2 + math.ceil(math.log2(n_source))
        d_t = 2 + math.ceil(math.log2(n_target))
        prep = model.params.get("prep_constant", model.params["alpha"])
        prep_t = prep * (4.0**d_t) / (4.0**d_s)
        beta_t = model.params["beta"] * ratio
        out["prep_constant"] = prep_t
        out["beta"] = beta_t
        out["gamma"] = model.params["gamma"]
        tau_star = float(n_target**2)
        out["meaningful_tau"] = tau_star
        out["p_f_star_at_meaningful"] = prep_t + beta_t * tau_star ** model.params["gamma"]
    return out


# ---------------------------------------------------------------------------
# Reports.


def emit_report(results: list, models: list, out_dir: str) -> dict:
    """Write sweep tables (CSV), fitted models (JSON) and SVG plots."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    sweep_path = os.path.join(out_dir, "results.csv")
    with open(sweep_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "tau", "m", "channel", "p_eps", "p_f", "p_f_stderr",
                         "infid", "infid_stderr", "eps_num", "gates_per_query",
                         "slots", "effective_trials"])
        for r in results:
            ch = r.config.channel
            writer.writerow([
                r.config.n, repr(r.config.tau), r.config.m,
                ch.kind if ch else "none", repr(ch.strength) if ch else "0",
                repr(r.p_f_mean), repr(r.p_f_stderr), repr(r.infid_mean),
                repr(r.infid_stderr), repr(r.eps_num), repr(r.per_query_gates),
                r.slots, r.effective_trials,
            ])
    paths["results"] = sweep_path
    trials_path = os.path.join(out_dir, "trials.csv")
    with open(trials_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["config", "hamiltonian", "state",
                                                "trial", "seed", "n_errors", "p_f", "q_sq"])
        writer.writeheader()
        for ci, r in enumerate(results):
            for row in r.csv_rows():
                writer.writerow({"config": ci, **row})
    paths["trials"] = trials_path
    model_path = os.path.join(out_dir, "model.json")
    with open(model_path, "w") as fh:
        json.dump([m.to_json() for m in models], fh, indent=2)
    paths["model"] = model_path
    if results:
        paths["plot"] = _plot_sweep(results, models, out_dir)
    return paths


def _plot_sweep(results, models, out_dir):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    by_key: dict = {}
    for r in results:
        ch = r.config.channel
        key = (ch.kind if ch else "none", ch.strength if ch else 0.0, r.config.tau)
        by_key.setdefault(key, []).append(r)
    for (kind, p, tau), rs in sorted(by_key.items()):
        rs = sorted(rs, key=lambda r: r.config.m)
        ms = [r.config.m for r in rs]
        pf = [max(r.p_f_mean, 1e-18) for r in rs]
        ax.plot(ms, pf, "o-", label=f"{kind} p={p:g} tau={tau:g}")
        if len(rs) > 1:
            star = min(rs, key=lambda r: r.p_f_mean)
            ax.plot([star.config.m], [max(star.p_f_mean, 1e-18)], "k*", markersize=12)
    ax.set_yscale("log")
    ax.set_xlabel("query depth m")
    ax.set_ylabel("mean failure rate")
    ax.legend(fontsize=7)
    ax.set_title("configuration sweep (stars: capacity boundary)")
    path = os.path.join(out_dir, "sweep.svg")
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    return path
