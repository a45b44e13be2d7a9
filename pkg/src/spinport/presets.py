"""Experiment presets. Each returns tables, a JSON-ready summary and the data figures need."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics
from .algebra import collective_spin_ops, embed
from .config import ExperimentConfig, build_system
from .engines import dtwa, gaussian
from .engines.ed import krylov_evolve
from .model import derive_tms_params, full_hamiltonian, to_khz
from .protocol import ProtocolConfig, run_protocol, tms_state, witness_trace
from .states import phonon_vacuum, polarized, prepare_input

PRESETS = ("witness-scan", "teleport", "scaling-sweep", "engine-compare", "outcome-grid")


@dataclass
class Table:
    header: tuple
    rows: list


@dataclass
class PresetOutput:
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    plot_data: dict = field(default_factory=dict)


def _system_with_n(cfg: ExperimentConfig, n: int):
    doc = copy.deepcopy(cfg.raw["system"])
    doc["n_ions"] = n
    return build_system(doc)


def _stage_summary(p) -> dict:
    return {
        "stage": p.stage,
        "pair": list(p.pair),
        "frame_khz": to_khz(p.frame),
        "detuning_khz": to_khz(p.detuning),
        "mode_detuning_khz": to_khz(p.mode_detuning),
        "rate_khz": to_khz(p.rate),
        "self_energy_khz": [to_khz(p.self_energy(0)), to_khz(p.self_energy(1))],
        "adiabaticity": p.adiabaticity,
        "residuals_khz": [to_khz(x) for x in p.residuals],
        "diagnostics": list(p.diagnostics),
    }


# witness scan ------------------------------------------------------------------

def witness_scan(cfg: ExperimentConfig) -> PresetOutput:
    opts = cfg.raw["witness_scan"]
    sys = cfg.system
    params = derive_tms_params(sys)
    n = int(round(opts["r_max"] / opts["r_step"]))
    grid = np.arange(n + 1) * opts["r_step"]
    vs_esm = witness_trace(sys, params, grid, "esm")
    vs_hp = np.array([gaussian.epr_variance(gaussian.tms_state(params, r)) for r in grid])
    header = ["r", "V_s_ESM", "V_s_HP"]
    cols = [grid, vs_esm, vs_hp]
    i = int(np.argmin(vs_esm))
    summary = {
        "n_ions": [sys.a.N, sys.b.N],
        "r_step": opts["r_step"],
        "esm": {"r_min": float(grid[i]), "V_s_min": float(vs_esm[i]), "interior_minimum": 0 < i < n},
        "tms_params": _stage_summary(params),
    }
    if opts["full_model"]:
        vs_fm = witness_trace(sys, params, grid, "fm")
        header.append("V_s_FM")
        cols.append(vs_fm)
        j = int(np.argmin(vs_fm))
        upto = grid <= grid[i] + 1e-12
        summary["fm"] = {
            "r_min": float(grid[j]),
            "V_s_min": float(vs_fm[j]),
            "interior_minimum": 0 < j < n,
            "n_max": sys.n_max,
            "max_abs_diff_to_esm_r_min": float(np.max(np.abs(vs_fm[upto] - vs_esm[upto]))),
        }
    rows = [list(r) for r in zip(*[c.tolist() for c in cols])]
    return PresetOutput({"witness_scan": Table(tuple(header), rows)}, summary,
                        {"columns": dict(zip(header, cols))})


# teleport ------------------------------------------------------------------------

def _state_diagnostics(state) -> dict:
    out = {}
    mean, _ = metrics.lab_moments(state)
    out["mean_spin_lab"] = mean.tolist()
    if np.hypot(mean[0], mean[1]) > 1e-9:
        out["phase_deg"] = metrics.phase_deg(state)
    if np.linalg.norm(mean) > 1e-9:
        out["squeezing_db"] = metrics.squeezing_db(state)
    th, ph = metrics.husimi_peak(state)
    out["husimi_peak_deg"] = [math.degrees(th), math.degrees(ph)]
    return out


def _husimi_table(state, opts) -> tuple:
    th, ph, q = metrics.husimi_grid(state, opts["n_theta"], opts["n_phi"])
    qn = q * (state.shape[0])
    rows = [[float(th[i]), float(ph[j]), float(q[i, j]), float(qn[i, j])]
            for i in range(th.size) for j in range(ph.size)]
    return Table(("theta", "phi", "Q", "Q_normalized"), rows), (th, ph, q)


def _teleport_core(cfg: ExperimentConfig, protocol: ProtocolConfig) -> tuple:
    res = run_protocol(protocol, cfg.system)
    summary = {
        "engine": res.engine,
        "estimator": res.estimator,
        "input": protocol.input.kind,
        "n_ions": [cfg.system.a.N, cfg.system.b.N, cfg.system.c.N],
        "r_tms": res.r_tms,
        "V_s_at_r_tms": res.vs_tms,
        "r_step": protocol.r_step,
        "t_tms_s": res.t_tms,
        "t_bs_s": res.t_bs,
        "average_fidelity": res.average_fidelity,
        "average_fidelity_stderr": res.fidelity_stderr,
        "tms_params": _stage_summary(res.tms_params),
        "bs_params": _stage_summary(res.bs_params),
        "warnings": res.warnings,
    }
    if res.probabilities is not None:
        summary["probability_sum"] = float(res.probabilities.sum())
    return res, summary


def teleport(cfg: ExperimentConfig) -> PresetOutput:
    res, summary = _teleport_core(cfg, cfg.protocol)
    tables = {"witness_trace": Table(("r", "V_s"), [[float(a), float(b)] for a, b in zip(res.r_grid, res.vs_grid)])}
    plot = {"r": res.r_grid, "vs": res.vs_grid}
    c = prepare_input(cfg.system.c.N, cfg.protocol.input)
    summary["input_state"] = _state_diagnostics(c)
    hopts = cfg.raw["husimi"]
    tables["husimi_input"], plot["husimi_input"] = _husimi_table(c, hopts)
    if res.probabilities is not None:
        rec = res.most_probable()
        out = res.most_probable_output()
        summary["most_probable"] = {
            "k_a": rec.k_a, "k_c": rec.k_c, "M_a": rec.M_a, "M_c": rec.M_c,
            "beta_z": rec.beta_z, "beta_y": rec.beta_y,
            "probability": rec.probability, "fidelity": rec.fidelity,
        }
        summary["output_state"] = _state_diagnostics(out)
        tables["husimi_output"], plot["husimi_output"] = _husimi_table(out, hopts)
        rows = []
        tv = {}
        for axis in "xyz":
            m, p_in = metrics.magnetization_distribution(c, axis)
            _, p_out = metrics.magnetization_distribution(out, axis)
            tv[axis] = metrics.total_variation(p_in, p_out)
            rows.extend([[axis, float(mm), float(a), float(b)] for mm, a, b in zip(m, p_in, p_out)])
            plot[f"mag_{axis}"] = (m, p_in, p_out)
        tables["magnetization"] = Table(("axis", "M", "P_input", "P_output"), rows)
        summary["magnetization_total_variation"] = tv
    return PresetOutput(tables, summary, plot)


# outcome grid --------------------------------------------------------------------

def outcome_grid(cfg: ExperimentConfig) -> PresetOutput:
    protocol = replace(cfg.protocol, engine="ed", outcomes="enumerate")
    res, summary = _teleport_core(cfg, protocol)
    rows = [[r.k_a, r.k_c, r.M_a, r.M_c, r.beta_z, r.beta_y, r.probability, r.fidelity] for r in res.records()]
    rec = res.most_probable()
    summary["most_probable"] = {"k_a": rec.k_a, "k_c": rec.k_c, "M_a": rec.M_a, "M_c": rec.M_c,
                                "probability": rec.probability, "fidelity": rec.fidelity}
    table = Table(("k_a", "k_c", "M_a", "M_c", "beta_z", "beta_y", "P", "F"), rows)
    tables = {"outcome_grid": table}
    hopts = cfg.raw["husimi"]
    tables["husimi_output"], hq = _husimi_table(res.most_probable_output(), hopts)
    return PresetOutput(tables, summary, {"P": res.probabilities, "F": res.fidelities, "husimi_output": hq})


# scaling sweep -------------------------------------------------------------------

def scaling_sweep(cfg: ExperimentConfig) -> PresetOutput:
    opts = cfg.raw["scaling_sweep"]
    rows = []
    fits = {}
    plot = {}
    for kind in opts["inputs"]:
        spec = replace(cfg.protocol.input, kind=kind)
        protocol = replace(cfg.protocol, input=spec, outcomes="enumerate")
        Fs = []
        for n in opts["n_values"]:
            sys = _system_with_n(cfg, n)
            res = run_protocol(protocol, sys)
            c = res.input_state
            if kind == "SS":
                xi2 = metrics.db_to_linear(metrics.squeezing_db(c)) if c is not None else None
                hp = metrics.hp_fidelity_ss(res.r_tms, xi2) if xi2 else float("nan")
            else:
                hp = metrics.hp_fidelity_sc(res.r_tms)
            Fs.append(res.average_fidelity)
            rows.append([kind, n, res.r_tms, res.vs_tms, res.average_fidelity, hp])
        fit = metrics.scaling_fit(opts["n_values"], Fs)
        fits[kind] = {"A": fit.A, "p": fit.p, "residual": fit.residual}
        plot[kind] = (np.array(opts["n_values"]), np.array(Fs), fit)
    table = Table(("input", "n_ions", "r_tms", "V_s", "F_avg", "F_HP_at_r_tms"), rows)
    summary = {"engine": cfg.protocol.engine, "fits": fits, "model": "1 - F = A / N^p"}
    return PresetOutput({"scaling": table}, summary, plot)


# engine comparison ---------------------------------------------------------------

def engine_compare(cfg: ExperimentConfig) -> PresetOutput:
    opts = cfg.raw["engine_compare"]
    sys = _system_with_n(cfg, opts["n_ions"])
    params = derive_tms_params(sys)
    sched = dtwa.tms_schedule(sys, params, opts["r_max"], n_samples=opts["n_points"])
    batch = dtwa.dtwa_run(sched, opts["n_traj"], cfg.seed)
    vs_tw, _, _, _ = dtwa.witness_series(batch)
    times = batch.times
    H = full_hamiltonian(sys, ("a", "b"))
    N = sys.a.N
    layout = [N + 1, sys.b.N + 1, sys.n_max + 1]
    Za = embed(collective_spin_ops(N).sz, 0, layout)
    v = np.kron(np.kron(polarized(N, "-x"), polarized(sys.b.N, "+x")), phonon_vacuum(sys.n_max))
    ed_sx, ed_vs = [], []
    for k, t in enumerate(times):
        if k:
            v = krylov_evolve(H, v, t - times[k - 1])
        ed_sx.append(float(np.vdot(v, Za @ v).real))
        ed_vs.append(metrics.witness_vs(v.reshape(layout)))
    mean = batch.mean("a", "x")
    se = batch.stderr("a", "x")
    r = times * abs(params.rate)
    z = np.where(se > 0, (mean - np.array(ed_sx)) / np.where(se > 0, se, 1), 0.0)
    rows = [[float(a), float(b), c, float(d), float(e), float(f), g, float(h)]
            for a, b, c, d, e, f, g, h in zip(r, times, ed_sx, mean, se, z, ed_vs, vs_tw)]
    t1 = Table(("r", "t_s", "Sx_a_ED_FM", "Sx_a_DTWA", "Sx_a_DTWA_stderr", "z_score", "V_s_ED_FM", "V_s_DTWA"), rows)
    summary = {
        "dtwa": {"n_ions": N, "n_traj": opts["n_traj"], "seed": cfg.seed, "max_abs_z": float(np.max(np.abs(z))),
                 "within_2_stderr": bool(np.all(np.abs(z) <= 2)), "norm_drift": batch.norm_drift,
                 "warnings": batch.warnings},
    }
    rows2 = []
    gsum = {}
    for n in opts["gauss_n_ions"]:
        s2 = _system_with_n(cfg, n)
        p2 = derive_tms_params(s2)
        grid = np.linspace(0, opts["r_max"], opts["n_points"])
        worst = 0.0
        for rr in grid:
            psi = tms_state(s2, p2, float(rr))
            va, vb, _ = metrics.witness_parts(psi)
            C = gaussian.tms_state(p2, float(rr)).to_xp().cov.real
            ha = n / 2 * (C[0, 0] + C[3, 3] + 2 * C[0, 3])
            hb = n / 2 * (C[1, 1] + C[2, 2] + 2 * C[1, 2])
            rel = max(abs(va - ha) / ha, abs(vb - hb) / hb)
            worst = max(worst, rel)
            rows2.append([n, float(rr), va, ha, vb, hb, rel, 5.0 / n])
        gsum[str(n)] = {"max_rel_err": worst, "bound": 5.0 / n, "pass": worst <= 5.0 / n}
    summary["gaussian"] = gsum
    t2 = Table(("n_ions", "r", "VarA_ED", "VarA_HP", "VarB_ED", "VarB_HP", "rel_err", "bound"), rows2)
    plot = {"r": r, "ed": np.array(ed_sx), "dtwa": mean, "se": se, "vs_ed": np.array(ed_vs), "vs_dtwa": vs_tw,
            "gauss_rows": rows2}
    return PresetOutput({"engine_compare_dtwa": t1, "engine_compare_gaussian": t2}, summary, plot)


RUNNERS = {
    "witness-scan": witness_scan,
    "teleport": teleport,
    "scaling-sweep": scaling_sweep,
    "engine-compare": engine_compare,
    "outcome-grid": outcome_grid,
}
