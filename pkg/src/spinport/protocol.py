"""Four-stage teleportation: entangle a-b, mix a-c, measure a and c, correct b.

The joint state is kept as ``psi[a, b, x, c]`` where ``x`` collects modes that
travel with b without being measured (the phonon when the entangling stage
uses the full model, otherwise a trivial axis of length one).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize_scalar

from . import metrics
from .algebra import collective_spin_ops, embed
from .engines import dtwa as dtwa_engine
from .engines import gaussian
from .engines.ed import NumericError, SpectralPropagator, krylov_evolve
from .model import (
    SystemSpec,
    default_system,
    derive_bs_params,
    derive_tms_params,
    effective_ab_hamiltonian,
    effective_ac_hamiltonian,
    full_hamiltonian,
)
from .states import InputStateSpec, dense_spin, frame_unitary, phonon_vacuum, polarized, prepare_input


class ProtocolError(ValueError):
    """Invalid protocol configuration."""


TMS_MODES = ("auto", "fixed", "ideal")
OUTCOME_MODES = ("enumerate", "sample", "most-probable")
ENGINES = ("ed", "gauss", "dtwa")


@dataclass(frozen=True)
class ProtocolConfig:
    """Protocol knobs. ``r`` is the magnitude ``|n_bar chi_ab t|`` of the entangling stage."""

    input: InputStateSpec = field(default_factory=InputStateSpec)
    tms_mode: str = "auto"
    r: float | None = None
    r_step: float = 0.02
    r_max: float = 3.0
    refine: bool = True
    bs_angle: float = math.pi / 4
    outcomes: str = "enumerate"
    n_samples: int = 1000
    feedback: bool = True
    engine: str = "ed"
    tms_model: str = "esm"
    n_traj: int = 10_000
    seed: int = 0
    prob_floor: float = 1e-14

    def __post_init__(self):
        if self.tms_mode not in TMS_MODES:
            raise ProtocolError(f"tms_mode must be one of {TMS_MODES}")
        if self.tms_mode in ("fixed", "ideal") and self.r is None:
            raise ProtocolError(f"tms_mode {self.tms_mode!r} needs r")
        if self.r is not None and (not math.isfinite(self.r) or self.r < 0):
            raise ProtocolError("r must be a finite non-negative number")
        if not 0 < self.bs_angle <= math.pi / 2:
            raise ProtocolError("BS angle must lie in (0, pi/2]")
        if self.outcomes not in OUTCOME_MODES:
            raise ProtocolError(f"outcome mode must be one of {OUTCOME_MODES}")
        if self.n_samples < 1:
            raise ProtocolError("sample count must be >= 1")
        if self.engine not in ENGINES:
            raise ProtocolError(f"engine must be one of {ENGINES}")
        if self.tms_model not in ("esm", "fm"):
            raise ProtocolError("tms_model must be 'esm' or 'fm'")
        if self.r_step <= 0 or self.r_max <= self.r_step:
            raise ProtocolError("need 0 < r_step < r_max")
        if self.n_traj < 1:
            raise ProtocolError("n_traj must be >= 1")


@dataclass(frozen=True)
class MeasurementRecord:
    k_a: int
    k_c: int
    M_a: float
    M_c: float
    probability: float
    beta_z: float
    beta_y: float
    fidelity: float = float("nan")


def make_record(k_a, k_c, N_a, N_c, probability, fidelity=float("nan")) -> MeasurementRecord:
    M_a = float(k_a - N_a / 2)
    M_c = float(k_c - N_c / 2)
    return MeasurementRecord(int(k_a), int(k_c), M_a, M_c, float(probability),
                             math.sqrt(2) * M_a, math.sqrt(2) * M_c, float(fidelity))


@dataclass
class ProtocolResult:
    """Outcome of one protocol run.

    ``probabilities`` and ``fidelities`` are indexed ``[k_a, k_c]``; entries
    below the probability floor carry NaN fidelity. Engines that do not
    resolve outcomes leave them ``None``.
    """

    config: ProtocolConfig
    system: SystemSpec
    engine: str
    r_grid: np.ndarray
    vs_grid: np.ndarray
    r_tms: float
    vs_tms: float
    t_tms: float
    t_bs: float
    average_fidelity: float
    fidelity_stderr: float = 0.0
    estimator: str = "exact"
    probabilities: np.ndarray | None = None
    fidelities: np.ndarray | None = None
    input_state: np.ndarray | None = None
    tms_params: object = None
    bs_params: object = None
    warnings: list = field(default_factory=list)
    _branches: np.ndarray | None = field(default=None, repr=False)

    @property
    def interior_minimum(self) -> bool:
        if self.vs_grid.size < 3:
            return False
        i = int(np.argmin(self.vs_grid))
        return 0 < i < self.vs_grid.size - 1

    def records(self) -> list:
        if self.probabilities is None:
            return []
        Na, Nc = self.probabilities.shape[0] - 1, self.probabilities.shape[1] - 1
        return [make_record(i, j, Na, Nc, self.probabilities[i, j], self.fidelities[i, j])
                for i in range(Na + 1) for j in range(Nc + 1)]

    def most_probable(self) -> MeasurementRecord:
        if self.probabilities is None:
            raise ProtocolError(f"engine {self.engine!r} does not resolve measurement outcomes")
        i, j = np.unravel_index(np.argmax(self.probabilities), self.probabilities.shape)
        Na, Nc = self.probabilities.shape[0] - 1, self.probabilities.shape[1] - 1
        return make_record(i, j, Na, Nc, self.probabilities[i, j], self.fidelities[i, j])

    def conditional_state(self, k_a: int, k_c: int) -> np.ndarray:
        """Normalized b state before feedback (vector, or density matrix with spectators)."""
        if self._branches is None:
            raise ProtocolError("conditional states were not retained")
        m = self._branches[k_a, :, :, k_c]
        p = np.vdot(m, m).real
        if p <= 0:
            raise ProtocolError("outcome has zero probability")
        if m.shape[1] == 1:
            return m[:, 0] / math.sqrt(p)
        return (m @ m.conj().T) / p

    def output_state(self, k_a: int, k_c: int, feedback: bool | None = None) -> np.ndarray:
        st = self.conditional_state(k_a, k_c)
        use = self.config.feedback if feedback is None else feedback
        if not use:
            return st
        N_b = st.shape[0] - 1
        U = feedback_unitary(N_b, math.sqrt(2) * (k_a - (self._branches.shape[0] - 1) / 2),
                             math.sqrt(2) * (k_c - (self._branches.shape[3] - 1) / 2))
        return U @ st if st.ndim == 1 else U @ st @ U.conj().T

    def most_probable_output(self) -> np.ndarray:
        rec = self.most_probable()
        return self.output_state(rec.k_a, rec.k_c)


# entangling stage -----------------------------------------------------------

def initial_ab(sys: SystemSpec) -> np.ndarray:
    return np.kron(polarized(sys.a.N, sys.a.orientation), polarized(sys.b.N, sys.b.orientation))


class _EsmTms:
    """ESM evolution of the a-b pair, reusable across many times."""

    def __init__(self, sys, params):
        oa, ob = collective_spin_ops(sys.a.N), collective_spin_ops(sys.b.N)
        H = effective_ab_hamiltonian(params, oa, ob)
        lab = np.add.outer(np.arange(sys.a.N + 1), np.arange(sys.b.N + 1)).ravel()
        self.prop = SpectralPropagator(H, lab)
        self.v0 = initial_ab(sys)
        self.shape = (sys.a.N + 1, sys.b.N + 1, 1)
        self.params = params

    def state(self, r):
        return self.prop.evolve(self.v0, self.params.time_for(r)).reshape(self.shape)


class _FmTms:
    """Full-model evolution of a, b and the phonon, stepped forward in r."""

    def __init__(self, sys, params):
        self.sys = sys
        self.params = params
        self.H = full_hamiltonian(sys, ("a", "b"), drives={"a": params.frame + params.detuning,
                                                          "b": params.frame - params.detuning})
        self.shape = (sys.a.N + 1, sys.b.N + 1, sys.n_max + 1)
        self.v = np.kron(initial_ab(sys), phonon_vacuum(sys.n_max))
        self.r = 0.0

    def state(self, r):
        if r < self.r:
            self.v = np.kron(initial_ab(self.sys), phonon_vacuum(self.sys.n_max))
            self.r = 0.0
        if r > self.r:
            self.v = krylov_evolve(self.H, self.v, self.params.time_for(r - self.r), check=False)
            self.r = r
        # undo the common drive rotation so the pair sits in the same frame as the ESM
        t = self.params.time_for(r)
        ma = np.arange(self.shape[0]) - (self.shape[0] - 1) / 2
        mb = np.arange(self.shape[1]) - (self.shape[1] - 1) / 2
        ph = np.exp(1j * self.params.frame * t * np.add.outer(ma, mb))
        return self.v.reshape(self.shape) * ph[:, :, None]


def ideal_tfd(sys: SystemSpec, s: float) -> np.ndarray:
    """Spin image of the two-mode squeezed vacuum, ``sum_n (-i tanh s)^n |k_a=n, k_b=N_b-n>``."""
    n = np.arange(min(sys.a.N, sys.b.N) + 1)
    lam = math.tanh(s)
    amp = (-1j * lam) ** n
    psi = np.zeros((sys.a.N + 1, sys.b.N + 1, 1), dtype=complex)
    psi[n, sys.b.N - n, 0] = amp
    return psi / np.linalg.norm(psi)


def witness_trace(sys: SystemSpec, params, r_grid, model: str = "esm") -> np.ndarray:
    """``V_s`` of the a-b pair along an increasing grid of ``r`` values."""
    evo = _FmTms(sys, params) if model == "fm" else _EsmTms(sys, params)
    return np.array([metrics.witness_vs(evo.state(float(r))) for r in r_grid])


def tms_state(sys: SystemSpec, params, r: float, model: str = "esm") -> np.ndarray:
    """Joint ``psi[a, b, x]`` after the entangling stage has run to ``r``."""
    evo = _FmTms(sys, params) if model == "fm" else _EsmTms(sys, params)
    return evo.state(r)


def _golden(f, lo, hi, tol):
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": tol})
    return float(res.x), float(res.fun)


def stage_tms(sys: SystemSpec, params, config: ProtocolConfig) -> tuple:
    """Run the entangling stage; returns ``(psi[a,b,x], r_grid, vs_grid, r_tms, vs_tms)``."""
    if config.tms_mode == "ideal":
        psi = ideal_tfd(sys, config.r)
        vs = metrics.witness_vs(psi)
        return psi, np.array([config.r]), np.array([vs]), config.r, vs
    evo = _FmTms(sys, params) if config.tms_model == "fm" else _EsmTms(sys, params)
    end = config.r if config.tms_mode == "fixed" else config.r_max
    n = int(round(end / config.r_step))
    grid = np.arange(n + 1) * config.r_step
    if config.tms_mode == "fixed" and (grid.size == 0 or abs(grid[-1] - end) > 1e-12):
        grid = np.append(grid[grid < end], end)
    vs = np.empty(grid.size)
    for i, r in enumerate(grid):
        vs[i] = metrics.witness_vs(evo.state(r))
    if config.tms_mode == "fixed":
        return evo.state(end), grid, vs, float(end), float(vs[-1])
    i = int(np.argmin(vs))
    if i == 0 or i == grid.size - 1:
        raise NumericError(
            f"V_s has no interior minimum on r in [0, {config.r_max}]; extend r_max"
        )
    r_best, v_best = float(grid[i]), float(vs[i])
    if config.refine:
        if config.tms_model == "fm":
            evo = _FmTms(sys, params)
        r_best, v_best = _golden(lambda r: metrics.witness_vs(evo.state(r)), grid[i - 1], grid[i + 1], 1e-3)
    return evo.state(r_best), grid, vs, r_best, v_best


# mixing, measurement, feedback ------------------------------------------------

def stage_bs(psi: np.ndarray, sys: SystemSpec, params, angle: float = math.pi / 4) -> tuple:
    """Apply the a-c beam splitter to ``psi[a, b, x, c]`` for ``|rate| t = angle``."""
    na, nb, nx, nc = psi.shape
    oa, oc = collective_spin_ops(sys.a.N), collective_spin_ops(sys.c.N)
    H = effective_ac_hamiltonian(params, oa, oc)
    lab = np.add.outer(np.arange(na), np.arange(nc)).ravel()
    t = params.time_for(angle)
    mat = np.moveaxis(psi, 3, 1).reshape(na * nc, nb * nx)
    out = SpectralPropagator(H, lab).evolve(mat, t)
    return np.moveaxis(out.reshape(na, nc, nb, nx), 1, 3), t


def measure_az_cz(psi: np.ndarray) -> tuple:
    """Amplitudes in the lab ``S_z`` bases of a and c, and outcome probabilities ``P[k_a, k_c]``."""
    na, nc = psi.shape[0], psi.shape[3]
    Wa, Wc = frame_unitary(na - 1), frame_unitary(nc - 1)
    amp = np.einsum("ai,abxc,cj->ibxj", Wa.conj(), psi, Wc.conj(), optimize=True)
    P = np.einsum("ibxj,ibxj->ij", amp.conj(), amp).real
    return amp, P


class _Feedback:
    """Batched ``D_pi D_r`` for ensemble b, applied in standard lab coordinates."""

    def __init__(self, N: int):
        d = dense_spin(N)
        self.N = N
        self.lx, self.vx = la.eigh(d["sx"])
        self.m = np.arange(N + 1) - N / 2
        self.W = frame_unitary(N)

    def apply(self, states: np.ndarray, beta_z: np.ndarray, beta_y: np.ndarray) -> np.ndarray:
        """``states[o, b, x]`` for outcome ``o`` with displacement parameters ``beta``."""
        beta = np.hypot(beta_z, beta_y)
        gamma = np.arctan2(beta_y, beta_z)
        kappa = 2.0 / self.N
        # exp(i k (bz S_z + by S_y)) = R exp(i k |b| S_z) R^dag,  R = exp(i gamma S_x)
        x = np.einsum("ij,ojx->oix", self.W.conj().T, states)
        xr = np.einsum("ji,ojx->oix", self.vx.conj(), x)
        xr = xr * np.exp(-1j * gamma[:, None, None] * self.lx[None, :, None])
        x = np.einsum("ij,ojx->oix", self.vx, xr)
        x = x * np.exp(1j * kappa * beta[:, None, None] * self.m[None, :, None])
        xr = np.einsum("ji,ojx->oix", self.vx.conj(), x)
        xr = xr * np.exp(1j * gamma[:, None, None] * self.lx[None, :, None])
        x = np.einsum("ij,ojx->oix", self.vx, xr)
        x = x * np.exp(1j * math.pi * self.m)[None, :, None]
        return np.einsum("ij,ojx->oix", self.W, x)


def feedback_unitary(N_b: int, beta_z: float, beta_y: float) -> np.ndarray:
    """``D_pi D_r`` as a dense matrix in the dressed basis."""
    L = {"z": -dense_spin(N_b)["sx"], "y": dense_spin(N_b)["sy"]}
    gen = (2.0 / N_b) * (beta_z * L["z"] + beta_y * L["y"])
    e, v = la.eigh(gen)
    Dr = (v * np.exp(1j * e)) @ v.conj().T
    e, v = la.eigh(L["z"])
    Dpi = (v * np.exp(1j * math.pi * e)) @ v.conj().T
    return Dpi @ Dr


def feedback(b_state: np.ndarray, record: MeasurementRecord) -> np.ndarray:
    """Apply the conditioned correction to a b state vector or density matrix."""
    U = feedback_unitary(b_state.shape[0] - 1, record.beta_z, record.beta_y)
    return U @ b_state if b_state.ndim == 1 else U @ b_state @ U.conj().T


def branch_fidelities(amp: np.ndarray, P: np.ndarray, target: np.ndarray, mask: np.ndarray,
                      use_feedback: bool = True) -> np.ndarray:
    """Fidelity of each selected outcome's corrected b state with ``target``."""
    na, nb, nx, nc = amp.shape
    idx = np.argwhere(mask)
    F = np.full(P.shape, np.nan)
    if idx.size == 0:
        return F
    fb = _Feedback(nb - 1)
    chunk = 512
    for s in range(0, len(idx), chunk):
        part = idx[s: s + chunk]
        st = amp[part[:, 0], :, :, part[:, 1]]
        p = P[part[:, 0], part[:, 1]]
        if use_feedback:
            bz = math.sqrt(2) * (part[:, 0] - (na - 1) / 2)
            by = math.sqrt(2) * (part[:, 1] - (nc - 1) / 2)
            st = fb.apply(st, bz, by)
        ov = np.einsum("b,obx->ox", target.conj(), st)
        F[part[:, 0], part[:, 1]] = np.sum(np.abs(ov) ** 2, axis=1) / p
    return F


# orchestration ---------------------------------------------------------------

def _input_xi2(c_state) -> float:
    return metrics.db_to_linear(metrics.squeezing_db(c_state))


def _with_r(config, r):
    return replace(config, tms_mode="fixed", r=r)


def run_protocol(config: ProtocolConfig, sys: SystemSpec | None = None) -> ProtocolResult:
    sys = sys or default_system()
    tms = derive_tms_params(sys, omega_a=sys.a.omega, omega_b=sys.b.omega)
    warnings = list(tms.diagnostics)
    if not tms.valid:
        raise ProtocolError("; ".join(tms.diagnostics))
    if config.engine == "ed":
        return _run_ed(config, sys, tms, warnings)
    if config.engine == "gauss":
        return _run_gauss(config, sys, tms, warnings)
    return _run_dtwa(config, sys, tms, warnings)


def _run_ed(config, sys, tms, warnings):
    bs = derive_bs_params(sys)
    c = prepare_input(sys.c.N, config.input)
    psi_ab, grid, vs, r_tms, vs_tms = stage_tms(sys, tms, config)
    psi = np.einsum("abx,c->abxc", psi_ab, c)
    psi, t_bs = stage_bs(psi, sys, bs, config.bs_angle)
    amp, P = measure_az_cz(psi)
    total = P.sum()
    if abs(total - 1) > 1e-9:
        raise NumericError(f"outcome probabilities sum to {total:.12f}")
    mask = P > config.prob_floor
    fid_err = 0.0
    if config.outcomes == "most-probable":
        sel = np.zeros_like(mask)
        sel[np.unravel_index(np.argmax(P), P.shape)] = True
        F = branch_fidelities(amp, P, c, sel, config.feedback)
        avg = float(np.nanmax(F))
        estimator = "most-probable"
    elif config.outcomes == "sample":
        rng = np.random.default_rng(config.seed)
        flat = rng.choice(P.size, size=config.n_samples, p=(P / total).ravel())
        sel = np.zeros(P.size, bool)
        sel[flat] = True
        F = branch_fidelities(amp, P, c, sel.reshape(P.shape), config.feedback)
        draws = F.ravel()[flat]
        avg = float(draws.mean())
        fid_err = float(draws.std(ddof=1) / math.sqrt(draws.size)) if draws.size > 1 else 0.0
        estimator = f"sampled ({config.n_samples} outcomes)"
    else:
        F = branch_fidelities(amp, P, c, mask, config.feedback)
        avg = float(np.nansum(P * F) / P[mask].sum())
        estimator = "exact"
    return ProtocolResult(
        config=config, system=sys, engine="ed", r_grid=grid, vs_grid=vs, r_tms=r_tms,
        vs_tms=vs_tms, t_tms=tms.time_for(r_tms), t_bs=t_bs, average_fidelity=avg,
        fidelity_stderr=fid_err, estimator=estimator, probabilities=P, fidelities=F,
        input_state=c, tms_params=tms, bs_params=bs, warnings=warnings, _branches=amp,
    )


def _gaussian_input_xi2(config, sys):
    kind = config.input.kind
    if kind == "DICKE":
        raise ProtocolError("Dicke inputs are not Gaussian; use the ed engine")
    if kind == "SS":
        return _input_xi2(prepare_input(sys.c.N, config.input))
    return 1.0


def _auto_r(config, sys, tms):
    """Entangling time from the exact witness scan (the linearized witness has no minimum)."""
    if config.tms_mode == "auto":
        _, grid, vs, r, v = stage_tms(sys, tms, replace(config, tms_model="esm"))
        return grid, vs, r
    return None, None, config.r


def _run_gauss(config, sys, tms, warnings):
    xi2 = _gaussian_input_xi2(config, sys)
    if config.tms_mode == "ideal":
        raise ProtocolError("ideal entangling mode is only available with the ed engine")
    _, _, r = _auto_r(config, sys, tms)
    grid = np.arange(int(round(r / config.r_step)) + 1) * config.r_step
    grid = np.append(grid[grid < r], r)
    vs = np.array([gaussian.epr_variance(gaussian.tms_state(tms, x)) for x in grid])
    avg = metrics.hp_fidelity_sc(r) if xi2 == 1.0 else metrics.hp_fidelity_ss(r, xi2)
    bs = derive_bs_params(sys)
    return ProtocolResult(
        config=config, system=sys, engine="gauss", r_grid=grid, vs_grid=vs, r_tms=r,
        vs_tms=float(vs[-1]), t_tms=tms.time_for(r), t_bs=bs.time_for(config.bs_angle),
        average_fidelity=avg, estimator="linearized closed form", tms_params=tms, bs_params=bs,
        warnings=warnings,
    )


def _run_dtwa(config, sys, tms, warnings):
    xi2 = _gaussian_input_xi2(config, sys)
    if config.tms_mode == "ideal":
        raise ProtocolError("ideal entangling mode is only available with the ed engine")
    end = config.r if config.tms_mode == "fixed" else config.r_max
    n = max(1, int(round(end / config.r_step)))
    sched = dtwa_engine.tms_schedule(sys, tms, end, n_samples=n + 1)
    batch = dtwa_engine.dtwa_run(sched, config.n_traj, config.seed)
    warnings.extend(batch.warnings)
    vs, va, vb, norm = dtwa_engine.witness_series(batch)
    grid = batch.times * abs(tms.rate)
    if config.tms_mode == "fixed":
        i = grid.size - 1
    else:
        i = int(np.argmin(vs))
        if i == 0 or i == grid.size - 1:
            raise NumericError(f"V_s has no interior minimum on r in [0, {config.r_max}]; extend r_max")
    # bootstrap-free error: propagate per-trajectory spread of the two variances
    F = dtwa_engine.gaussian_overlap_fidelity(va[i], vb[i], norm[i], xi2)
    bs = derive_bs_params(sys)
    return ProtocolResult(
        config=config, system=sys, engine="dtwa", r_grid=grid, vs_grid=vs, r_tms=float(grid[i]),
        vs_tms=float(vs[i]), t_tms=float(batch.times[i]), t_bs=bs.time_for(config.bs_angle),
        average_fidelity=F, estimator="gaussian-overlap estimate from trajectory moments",
        tms_params=tms, bs_params=bs, warnings=warnings,
    )
