"""Figures of merit: EPR witness, fidelities, squeezing, Husimi Q, scaling fits.

Single-ensemble functions accept either a state vector or a density matrix
in the dressed Dicke basis; spin directions are reported in the lab frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize

from .states import _coherent_amplitudes, dense_spin, frame_unitary, lab_ops


def _dim_to_n(dim: int) -> int:
    return dim - 1


def expect(op: np.ndarray, state: np.ndarray) -> complex:
    """``<op>`` for a vector or a density matrix."""
    if state.ndim == 1:
        return np.vdot(state, op @ state)
    return np.trace(op @ state)


def lab_moments(state: np.ndarray) -> tuple:
    """Lab-frame mean spin vector and symmetrized 3x3 covariance."""
    N = _dim_to_n(state.shape[0])
    L = lab_ops(N)
    ops = [L["x"], L["y"], L["z"]]
    mean = np.array([expect(o, state).real for o in ops])
    cov = np.empty((3, 3))
    for i in range(3):
        for j in range(i, 3):
            sym = 0.5 * (ops[i] @ ops[j] + ops[j] @ ops[i])
            cov[i, j] = cov[j, i] = expect(sym, state).real - mean[i] * mean[j]
    return mean, cov


def squeezing_db(state: np.ndarray) -> float:
    """Wineland parameter ``N V_min / |<S>|^2`` in dB, minimized over the plane normal to ``<S>``."""
    N = _dim_to_n(state.shape[0])
    mean, cov = lab_moments(state)
    length = np.linalg.norm(mean)
    if length < 1e-12:
        raise ValueError("mean spin vanishes; squeezing parameter undefined")
    n = mean / length
    trial = np.eye(3)[np.argmin(np.abs(n))]
    e1 = np.cross(n, trial)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    P = np.stack([e1, e2])
    vmin = la.eigvalsh(P @ cov @ P.T)[0]
    return float(10 * np.log10(N * vmin / length**2))


def phase_deg(state: np.ndarray) -> float:
    """Azimuth of the mean spin measured from lab ``-x`` (degrees)."""
    mean, _ = lab_moments(state)
    return float(np.degrees(np.arctan2(-mean[1], -mean[0])))


def witness_parts(psi: np.ndarray) -> tuple:
    """``(Var A, Var B, |<S_x^a>| + |<S_x^b>|)`` for a joint state ``psi[a, b, ...]``.

    ``A = S_y^b - S_z^a`` and ``B = S_z^b + S_y^a`` in lab components, which
    are ``S_y^b + S_x^a`` and ``-S_x^b + S_y^a`` in the dressed frame.
    """
    if psi.ndim < 2:
        raise ValueError("joint state must carry separate a and b axes")
    na, nb = psi.shape[:2]
    p = psi.reshape(na, nb, -1)
    da, db = dense_spin(na - 1), dense_spin(nb - 1)

    def on_a(op, x):
        return np.einsum("ij,jkl->ikl", op, x)

    def on_b(op, x):
        return np.einsum("ij,kjl->kil", op, x)

    Ap = on_b(db["sy"], p) + on_a(da["sx"], p)
    Bp = -on_b(db["sx"], p) + on_a(da["sy"], p)
    norm2 = np.vdot(p, p).real
    va = np.vdot(Ap, Ap).real / norm2 - (np.vdot(p, Ap).real / norm2) ** 2
    vb = np.vdot(Bp, Bp).real / norm2 - (np.vdot(p, Bp).real / norm2) ** 2
    za = np.vdot(p, on_a(da["sz"], p)).real / norm2
    zb = np.vdot(p, on_b(db["sz"], p)).real / norm2
    return va, vb, abs(za) + abs(zb)


def witness_vs(psi: np.ndarray) -> float:
    """Spin EPR witness ``(Var A + Var B)/(|<S_x^a>| + |<S_x^b>|)``; below 1 certifies entanglement."""
    va, vb, norm = witness_parts(psi)
    if norm < 1e-12:
        raise ValueError("witness normalization vanishes")
    return float((va + vb) / norm)


def _psd_sqrt(rho):
    w, v = la.eigh(0.5 * (rho + rho.conj().T))
    # round-off eigenvalues would otherwise contribute at the square-root scale
    w = np.where(w > 1e-13 * max(w.max(), 0.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def uhlmann_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``; vectors are treated as pure states."""
    if rho.ndim == 1 and sigma.ndim == 1:
        return float(abs(np.vdot(rho, sigma)) ** 2 / (np.vdot(rho, rho).real * np.vdot(sigma, sigma).real))
    if rho.ndim == 1:
        rho, sigma = sigma, rho
    if sigma.ndim == 1:
        return float(np.vdot(sigma, rho @ sigma).real / np.vdot(sigma, sigma).real)
    s = _psd_sqrt(rho)
    w = la.eigvalsh(s @ sigma @ s)
    w = np.where(w > 1e-13 * max(w.max(), 0.0), w, 0.0)
    return float(np.sum(np.sqrt(w)) ** 2)


def hp_fidelity_sc(r: float) -> float:
    """Linearized average fidelity for coherent inputs, ``1/(1 + e^{-2|r|})``."""
    return 1.0 / (1.0 + math.exp(-2 * abs(r)))


def hp_fidelity_ss(r: float, xi2: float) -> float:
    """Linearized average fidelity for squeezed inputs with linear squeezing ``xi2``."""
    if xi2 <= 0:
        raise ValueError("xi2 must be positive")
    e = math.exp(-2 * abs(r))
    return 1.0 / math.sqrt((1 + e * xi2) * (1 + e / xi2))


def db_to_linear(db: float) -> float:
    return 10 ** (db / 10)


def husimi_q(state: np.ndarray, theta, phi, normalized: bool = False) -> np.ndarray:
    """``Q(theta, phi) = |<theta, phi|psi>|^2 / 4pi`` with lab-frame coherent states.

    ``normalized=True`` uses the prefactor ``(N+1)/4pi`` so that Q integrates
    to one over the sphere.
    """
    N = _dim_to_n(state.shape[0])
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    coh = _coherent_amplitudes(N, theta, phi)  # lab coordinates
    std = frame_unitary(N).conj().T @ state if state.ndim == 1 else None
    if state.ndim == 1:
        q = np.abs(coh.conj() @ std) ** 2
    else:
        W = frame_unitary(N)
        rho = W.conj().T @ state @ W
        q = np.einsum("...i,ij,...j->...", coh.conj(), rho, coh).real
    pref = (N + 1) / (4 * math.pi) if normalized else 1 / (4 * math.pi)
    return pref * q


def husimi_grid(state: np.ndarray, n_theta: int = 61, n_phi: int = 121, normalized: bool = False):
    th = np.linspace(0, math.pi, n_theta)
    ph = np.linspace(0, 2 * math.pi, n_phi)
    T, P = np.meshgrid(th, ph, indexing="ij")
    return th, ph, husimi_q(state, T, P, normalized)


def husimi_peak(state: np.ndarray) -> tuple:
    """Location ``(theta, phi)`` of the Q-function maximum, refined from a grid."""
    th, ph, q = husimi_grid(state, 37, 73)
    i, j = np.unravel_index(np.argmax(q), q.shape)
    res = minimize(lambda x: -husimi_q(state, x[0], x[1]), [th[i], ph[j]], method="Nelder-Mead",
                   options={"xatol": 1e-7, "fatol": 1e-14})
    return float(res.x[0]), float(res.x[1] % (2 * math.pi))


def magnetization_distribution(state: np.ndarray, axis: str = "z") -> tuple:
    """Outcome values and probabilities of a lab-frame spin projection measurement."""
    N = _dim_to_n(state.shape[0])
    L = lab_ops(N)
    if axis == "x":
        basis = np.eye(N + 1)  # lab x is dressed z
    elif axis in ("y", "z"):
        _, basis = la.eigh(L[axis])
    else:
        raise ValueError(f"unknown axis {axis!r}")
    m = np.arange(N + 1) - N / 2
    if state.ndim == 1:
        p = np.abs(basis.conj().T @ state) ** 2
    else:
        p = np.einsum("ji,jk,ki->i", basis.conj(), state, basis).real
    return m, p / p.sum()


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return float(0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum())


@dataclass(frozen=True)
class FitResult:
    """``1 - F = A / N^p`` fitted in log space."""

    A: float
    p: float
    residual: float

    def predict(self, n) -> np.ndarray:
        return 1 - self.A / np.asarray(n, float) ** self.p


def scaling_fit(n_values, fidelities) -> FitResult:
    """Least-squares power-law fit of the infidelity."""
    n = np.asarray(n_values, float)
    f = np.asarray(fidelities, float)
    if n.size < 4 or n.size != f.size:
        raise ValueError("need at least four (N, F) points")
    if np.any(np.diff(n) <= 0):
        raise ValueError("ensemble sizes must be strictly increasing")
    if np.any((f <= 0) | (f >= 1)):
        raise ValueError("fidelities must lie strictly between 0 and 1")
    x, y = np.log(n), np.log(1 - f)
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.linalg.norm(y - (slope * x + icpt)))
    return FitResult(float(np.exp(icpt)), float(-slope), resid)
