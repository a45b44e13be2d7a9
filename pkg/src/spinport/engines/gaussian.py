"""Linearized (Holstein-Primakoff) covariance dynamics.

Each ensemble is a bosonic mode about its polarized pole. The mode vector is
``u = (a, a^dag, b, b^dag, c, c^dag)`` and the covariance
``C_ij = <{u_i, u_j}>/2 - <u_i><u_j>`` obeys ``dC/dt = k C + C k^T``.
Quadratures are ``X = (u + u^dag)/sqrt(2)``, ``P = -i(u - u^dag)/sqrt(2)``, so
the vacuum has ``C_XP = I/2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

MODES = ("a", "b", "c")
_T = np.array([[1, 1], [-1j, 1j]]) / np.sqrt(2)
R_XP = la.block_diag(_T, _T, _T)


@dataclass
class CovarianceState:
    """First and second moments; ``basis`` is ``"mode"`` or ``"xp"``."""

    mean: np.ndarray
    cov: np.ndarray
    basis: str = "mode"

    def to_xp(self) -> "CovarianceState":
        if self.basis == "xp":
            return self
        mean = R_XP @ self.mean
        cov = R_XP @ self.cov @ R_XP.T
        return CovarianceState(mean.real.copy() if np.allclose(mean.imag, 0) else mean,
                               _realify(cov), "xp")

    def block(self, modes=("a", "b")) -> np.ndarray:
        idx = [2 * MODES.index(m) + j for m in modes for j in (0, 1)]
        return self.cov[np.ix_(idx, idx)]

    def purity_det(self, modes=MODES) -> float:
        """``det(2 C)`` over the given modes; 1 for a pure Gaussian state."""
        return float(np.real(la.det(2 * self.to_xp().block(modes))))


def _realify(m, tol=1e-12):
    if np.max(np.abs(m.imag), initial=0.0) <= tol * max(1.0, np.max(np.abs(m.real))):
        return m.real.copy()
    return m


def vacuum_state() -> CovarianceState:
    cov = np.zeros((6, 6), dtype=complex)
    for j in range(3):
        cov[2 * j, 2 * j + 1] = cov[2 * j + 1, 2 * j] = 0.5
    return CovarianceState(np.zeros(6, dtype=complex), cov, "mode")


def covariance_kernel(params) -> np.ndarray:
    """Drift matrix of the linearized two-mode squeezing stage.

    The c rows and columns are zero: c is idle while a and b squeeze.
    """
    if params.stage != "TMS":
        raise ValueError("covariance kernel is defined for the two-mode squeezing stage")
    Na, Nb = params.n_ions
    da = params.detuning - params.self_energy(0)
    db = params.detuning - params.self_energy(1)
    kap = params.chi_cross * np.sqrt(Na * Nb)
    k = np.zeros((6, 6), dtype=complex)
    k[0, 0] = -1j * da
    k[1, 1] = 1j * da
    k[2, 2] = -1j * db
    k[3, 3] = 1j * db
    k[0, 3] = 1j * kap
    k[1, 2] = -1j * kap
    k[2, 1] = 1j * kap
    k[3, 0] = -1j * kap
    return k


def covariance_evolve(state: CovarianceState, kernel: np.ndarray, t: float) -> CovarianceState:
    """Exact solution of the linear moment equations for constant ``kernel``."""
    if state.basis != "mode":
        raise ValueError("evolution is carried out in the mode basis")
    M = la.expm(kernel * t)
    return CovarianceState(M @ state.mean, M @ state.cov @ M.T, "mode")


def bs_symplectic(theta: float) -> np.ndarray:
    """Quadrature map of the a-c beam splitter on ``(X_a, P_a, X_b, P_b, X_c, P_c)``."""
    c, s = np.cos(theta), np.sin(theta)
    S = np.eye(6)
    S[0, :] = [c, 0, 0, 0, 0, s]
    S[1, :] = [0, c, 0, 0, -s, 0]
    S[4, :] = [0, s, 0, 0, c, 0]
    S[5, :] = [-s, 0, 0, 0, 0, c]
    return S


def apply_symplectic(state: CovarianceState, S: np.ndarray) -> CovarianceState:
    st = state.to_xp()
    return CovarianceState(S @ st.mean, S @ st.cov @ S.T, "xp")


def symplectic_form(n_modes: int = 3) -> np.ndarray:
    return la.block_diag(*[np.array([[0.0, 1.0], [-1.0, 0.0]])] * n_modes)


def tms_state(params, r: float) -> CovarianceState:
    """Vacuum evolved for the time ``|r|/|rate|``; the signed parameter is ``rate * t``."""
    return covariance_evolve(vacuum_state(), covariance_kernel(params), params.time_for(r))


def epr_variance(state: CovarianceState) -> float:
    """Linearized witness ``(Var(X_a + P_b) + Var(P_a + X_b)) / 2``, 1 for vacuum.

    This is the large-N limit of the spin witness for a at its south pole and
    b at its north pole.
    """
    C = state.to_xp().cov.real
    u = np.array([1.0, 0, 0, 1.0, 0, 0])
    w = np.array([0, 1.0, 1.0, 0, 0, 0])
    return float((u @ C @ u + w @ C @ w) / 2)
