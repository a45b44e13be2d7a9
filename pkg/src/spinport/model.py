"""Physical parameters, derived couplings and Hamiltonian builders.

All frequencies are angular (rad/s). Use :func:`khz` to convert from the
``2pi x kHz`` values quoted for experiments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .algebra import (
    DIMENSION_BUDGET,
    DimensionError,
    SpinOperatorSet,
    collective_spin_ops,
    embed,
    phonon_ops,
)

LABELS = ("a", "b", "c")


def khz(value: float) -> float:
    """``2pi x value kHz`` in rad/s."""
    return 2 * math.pi * 1e3 * value


def to_khz(omega: float) -> float:
    return omega / (2 * math.pi * 1e3)


class ParameterError(ValueError):
    """Raised when stage parameters cannot be derived."""


@dataclass(frozen=True)
class EnsembleSpec:
    label: str
    N: int
    omega: float
    g: float
    #: lab-frame preparation axis, "-x" or "+x"
    orientation: str = "-x"

    def __post_init__(self):
        if self.label not in LABELS:
            raise ParameterError(f"unknown ensemble label {self.label!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ParameterError(f"ensemble {self.label}: N must be a positive integer")
        if not math.isfinite(self.g) or not math.isfinite(self.omega):
            raise ParameterError(f"ensemble {self.label}: non-finite frequency")
        if self.orientation not in ("-x", "+x"):
            raise ParameterError(f"ensemble {self.label}: orientation must be '-x' or '+x'")


@dataclass(frozen=True)
class SystemSpec:
    a: EnsembleSpec
    b: EnsembleSpec
    c: EnsembleSpec
    delta_m: float
    n_max: int = 10

    def __post_init__(self):
        labels = [e.label for e in (self.a, self.b, self.c)]
        if labels != list(LABELS):
            raise ParameterError(f"ensembles must be labelled a, b, c in order, got {labels}")

    @property
    def N(self) -> int:
        return self.a.N + self.b.N + self.c.N

    def ensemble(self, label: str) -> EnsembleSpec:
        return getattr(self, label)

    def coupling(self, label: str) -> float:
        """Collective-normalised coupling ``g_l / sqrt(N)``, N the total ion count."""
        return self.ensemble(label).g / math.sqrt(self.N)

    def with_drives(self, **omegas: float) -> "SystemSpec":
        kw = {lab: replace(self.ensemble(lab), omega=w) for lab, w in omegas.items()}
        return replace(self, **kw)


def default_system(n_bar: int = 70, n_max: int = 10) -> SystemSpec:
    """Parameters used for all headline numbers: three equal ensembles of ``n_bar`` ions."""
    g = khz(3.6)
    return SystemSpec(
        a=EnsembleSpec("a", n_bar, khz(-19.1), g, "-x"),
        b=EnsembleSpec("b", n_bar, khz(-18.8), g, "+x"),
        c=EnsembleSpec("c", n_bar, khz(-19.1), g, "-x"),
        delta_m=khz(-26.0),
        n_max=n_max,
    )


@dataclass(frozen=True)
class StageParams:
    """Couplings of one effective two-ensemble stage.

    ``pair`` names the two participating ensembles. For the TMS stage
    ``frame`` is the mean drive and ``detuning`` is half the drive
    difference; for the BS stage ``frame`` is the rotating-frame frequency
    solving the resonance quadratic and ``detuning`` is ``Omega - f_r``.
    """

    stage: str
    pair: tuple
    n_ions: tuple
    couplings: tuple
    frame: float
    detuning: float
    mode_detuning: float
    chi: dict
    adiabaticity: float
    valid: bool = True
    residuals: tuple = ()
    diagnostics: tuple = ()
    alternatives: tuple = field(default=())

    @property
    def chi_cross(self) -> float:
        return self.chi[self.pair]

    @property
    def n_bar(self) -> float:
        return math.sqrt(self.n_ions[0] * self.n_ions[1])

    @property
    def rate(self) -> float:
        """Signed growth rate ``n_bar * chi_cross``; the dimensionless time is ``r = rate * t``."""
        return self.n_bar * self.chi_cross

    def time_for(self, r: float) -> float:
        """Interaction time reaching ``|rate| t = r``."""
        if self.rate == 0:
            raise ParameterError("stage has zero interaction rate")
        return abs(r) / abs(self.rate)

    def self_energy(self, which: int) -> float:
        lab = self.pair[which]
        return self.chi[(lab, lab)] * self.n_ions[which]


def _chi_table(pair, couplings, mode_detuning):
    ga, gb = couplings
    la, lb = pair
    x = 1.0 / (4.0 * mode_detuning)
    return {
        (la, la): ga * ga * x,
        (lb, lb): gb * gb * x,
        (la, lb): ga * gb * x,
        (lb, la): ga * gb * x,
    }


def _adiabaticity(mode_detuning, couplings, n_ions):
    collective = max(abs(g) * math.sqrt(n) for g, n in zip(couplings, n_ions))
    if collective == 0:
        return math.inf
    return 4 * abs(mode_detuning) / collective


def derive_tms_params(
    sys: SystemSpec,
    omega_a: float | None = None,
    omega_b: float | None = None,
    adiabatic_threshold: float = 4.0,
) -> StageParams:
    """Entangling-stage couplings between ensembles a and b.

    The resonance ``delta_ab = chi_aa N_a = chi_bb N_b`` cannot be imposed
    exactly; its residuals are returned in ``residuals``.
    """
    wa = sys.a.omega if omega_a is None else omega_a
    wb = sys.b.omega if omega_b is None else omega_b
    omega_av = (wa + wb) / 2
    delta_ab = (wa - wb) / 2
    mode_det = sys.delta_m - omega_av
    if mode_det == 0:
        raise ParameterError("phonon mode is resonant with the mean drive (Delta_M = 0)")
    couplings = (sys.coupling("a"), sys.coupling("b"))
    n_ions = (sys.a.N, sys.b.N)
    chi = _chi_table(("a", "b"), couplings, mode_det)
    ratio = _adiabaticity(mode_det, couplings, n_ions)
    residuals = (abs(delta_ab - chi[("a", "a")] * sys.a.N), abs(delta_ab - chi[("b", "b")] * sys.b.N))
    diagnostics = []
    valid = ratio > adiabatic_threshold
    if not valid:
        diagnostics.append(
            f"adiabaticity ratio 4|Delta_M|/(G sqrt(N_l)) = {ratio:.3g} below threshold {adiabatic_threshold}"
        )
    return StageParams(
        stage="TMS",
        pair=("a", "b"),
        n_ions=n_ions,
        couplings=couplings,
        frame=omega_av,
        detuning=delta_ab,
        mode_detuning=mode_det,
        chi=chi,
        adiabaticity=ratio,
        valid=valid,
        residuals=residuals,
        diagnostics=tuple(diagnostics),
    )


def resonant_tms_params(sys: SystemSpec) -> StageParams:
    """TMS parameters with the drive difference tuned to cancel ensemble a's self-energy."""
    p = derive_tms_params(sys)
    delta = p.chi[("a", "a")] * sys.a.N
    return derive_tms_params(sys, omega_a=p.frame + delta, omega_b=p.frame - delta)


def frame_roots(omega: float, delta_m: float, nbar_g2: float) -> tuple:
    """Roots of ``4 (omega - f)(delta_m - f) = nbar_g2``, ordered by value."""
    disc = (omega - delta_m) ** 2 + nbar_g2
    if disc < 0:
        raise ParameterError(f"no real rotating-frame frequency (discriminant {disc:.3g} < 0)")
    half_sum = (omega + delta_m) / 2
    half_root = math.sqrt(disc) / 2
    return (half_sum - half_root, half_sum + half_root)


def derive_bs_params(
    sys: SystemSpec,
    omega: float | None = None,
    adiabatic_threshold: float = 4.0,
) -> StageParams:
    """Beam-splitter couplings between ensembles a and c with common drive ``omega``."""
    w = sys.a.omega if omega is None else omega
    couplings = (sys.coupling("a"), sys.coupling("c"))
    n_ions = (sys.a.N, sys.c.N)
    nbar_g2 = math.sqrt(n_ions[0] * n_ions[1]) * couplings[0] * couplings[1]
    roots = frame_roots(w, sys.delta_m, nbar_g2)
    candidates = []
    report = []
    for f in roots:
        mode_det = sys.delta_m - f
        delta_ac = w - f
        residual = abs(4 * (w - f) * (sys.delta_m - f) - nbar_g2)
        if mode_det == 0:
            report.append(f"f_r={f:.6g}: Delta_M^ac = 0")
            continue
        ratio = _adiabaticity(mode_det, couplings, n_ions)
        collective = max(abs(g) * math.sqrt(n) for g, n in zip(couplings, n_ions))
        fast = max(abs(delta_ac), collective, abs(mode_det)) < abs(f)
        ok = ratio > adiabatic_threshold and fast
        report.append(f"f_r={f:.6g} rad/s: adiabaticity {ratio:.3g}, frame separation {'ok' if fast else 'violated'}")
        if ok:
            candidates.append((ratio, f, mode_det, delta_ac, residual))
    if not candidates:
        raise ParameterError("no valid beam-splitter frame frequency; " + "; ".join(report))
    ratio, f, mode_det, delta_ac, residual = max(candidates)
    return StageParams(
        stage="BS",
        pair=("a", "c"),
        n_ions=n_ions,
        couplings=couplings,
        frame=f,
        detuning=delta_ac,
        mode_detuning=mode_det,
        chi=_chi_table(("a", "c"), couplings, mode_det),
        adiabaticity=ratio,
        valid=True,
        residuals=(residual,),
        diagnostics=tuple(report),
        alternatives=tuple(roots),
    )


def _check_budget(layout):
    total = int(np.prod(layout))
    if total > DIMENSION_BUDGET:
        raise DimensionError(f"Hilbert space dimension {total} exceeds budget {DIMENSION_BUDGET}")
    return total


def full_hamiltonian(
    sys: SystemSpec,
    active=("a", "b"),
    drives: dict | None = None,
    spin_ops: dict | None = None,
) -> sp.csr_matrix:
    """Dressed-frame spin-phonon Hamiltonian on ``active`` ensembles plus the phonon mode.

    ``H = sum_l Omega_l S_z^l - sum_l G_l (m + m^dag) S_x^l + delta_M m^dag m``.
    Layout is the active ensembles in the given order, then the phonon.
    ``drives`` overrides the Rabi frequencies per label.
    """
    active = tuple(active)
    if not active:
        raise ValueError("at least one ensemble must be active")
    drives = drives or {}
    spin_ops = spin_ops or {}
    ops = [spin_ops.get(l) or collective_spin_ops(sys.ensemble(l).N) for l in active]
    ph = phonon_ops(sys.n_max)
    layout = [o.dim for o in ops] + [ph.dim]
    _check_budget(layout)
    pslot = len(active)
    quad = embed(ph.a + ph.adag, pslot, layout)
    H = sys.delta_m * embed(ph.number, pslot, layout)
    for i, (lab, o) in enumerate(zip(active, ops)):
        omega = drives.get(lab, sys.ensemble(lab).omega)
        if omega:
            H = H + omega * embed(o.sz, i, layout)
        G = sys.coupling(lab)
        if G:
            H = H - G * (quad @ embed(o.sx, i, layout))
    H = sp.csr_matrix(H)
    H.eliminate_zeros()
    return H


def effective_pair_hamiltonian(
    params: StageParams,
    ops1: SpinOperatorSet,
    ops2: SpinOperatorSet,
    relative_sign: int,
) -> sp.csr_matrix:
    """Phonon-eliminated two-ensemble Hamiltonian on ``(N_1+1)(N_2+1)`` states.

    Equals ``-(1/4 Delta)(G_1 S_+^1 + G_2 S_+^2)(G_1 S_-^1 + G_2 S_-^2)
    + delta (S_z^1 + relative_sign S_z^2)`` with the identity part dropped:
    flip-flop ``-chi_12 (S_+^1 S_-^2 + h.c.)`` plus self terms
    ``chi_ll ((S_z^l)^2 - S_z^l)``.
    """
    l1, l2 = params.pair
    layout = [ops1.dim, ops2.dim]
    _check_budget(layout)
    chi = params.chi
    flip = embed(ops1.sp, 0, layout) @ embed(ops2.sm, 1, layout)
    H = -chi[(l1, l2)] * (flip + flip.conj().T)
    for slot, (lab, o) in enumerate(((l1, ops1), (l2, ops2))):
        z = embed(o.sz, slot, layout)
        H = H + chi[(lab, lab)] * (z @ z - z)
    z1 = embed(ops1.sz, 0, layout)
    z2 = embed(ops2.sz, 1, layout)
    H = H + params.detuning * (z1 + relative_sign * z2)
    H = sp.csr_matrix(H)
    H.eliminate_zeros()
    return H


def effective_ab_hamiltonian(params: StageParams, ops_a: SpinOperatorSet, ops_b: SpinOperatorSet):
    """TMS-stage spin model; conserves ``S_z^a + S_z^b``."""
    if params.stage != "TMS":
        raise ParameterError("effective_ab_hamiltonian needs TMS stage parameters")
    return effective_pair_hamiltonian(params, ops_a, ops_b, -1)


def effective_ac_hamiltonian(params: StageParams, ops_a: SpinOperatorSet, ops_c: SpinOperatorSet):
    """BS-stage spin model; conserves ``S_z^a + S_z^c``."""
    if params.stage != "BS":
        raise ParameterError("effective_ac_hamiltonian needs BS stage parameters")
    return effective_pair_hamiltonian(params, ops_a, ops_c, +1)


def product_form_hamiltonian(params: StageParams, ops1, ops2, relative_sign: int):
    """Unexpanded phonon-eliminated form, kept as an independent reference."""
    layout = [ops1.dim, ops2.dim]
    g1, g2 = params.couplings
    raise_ = g1 * embed(ops1.sp, 0, layout) + g2 * embed(ops2.sp, 1, layout)
    lower = g1 * embed(ops1.sm, 0, layout) + g2 * embed(ops2.sm, 1, layout)
    H = -(raise_ @ lower) / (4 * params.mode_detuning)
    H = H + params.detuning * (embed(ops1.sz, 0, layout) + relative_sign * embed(ops2.sz, 1, layout))
    return sp.csr_matrix(H)
