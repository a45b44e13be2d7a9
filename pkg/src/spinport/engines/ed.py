"""Exact propagation of pure states.

Two propagators are provided. ``SpectralPropagator`` diagonalizes the
Hamiltonian once, block by block when a conserved integer label is known,
and then evolves any number of vectors to any time cheaply. ``krylov_evolve``
handles Hilbert spaces too large to diagonalize, using a Lanczos basis with
step halving driven by the a-posteriori error estimate.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from ..algebra import hermiticity_error


class NumericError(RuntimeError):
    """Raised when a propagation violates norm or Hermiticity checks."""


def _check_hermitian(H, tol=1e-10):
    H = sp.csr_matrix(H) if sp.issparse(H) else np.asarray(H)
    err = hermiticity_error(H)
    scale = max(1.0, float(abs(H).max()))
    if err > tol * scale:
        raise NumericError(f"Hamiltonian is not Hermitian (error {err:.3e})")


def sector_labels(diagonal) -> np.ndarray:
    """Integer labels from the diagonal of a conserved operator with half-integer spectrum."""
    d = np.real(np.asarray(diagonal))
    lab = np.rint(2 * d)
    if np.max(np.abs(2 * d - lab)) > 1e-9:
        raise ValueError("conserved quantity must have half-integer diagonal")
    return lab.astype(np.int64)


class SpectralPropagator:
    """``exp(-i H t)`` via eigendecomposition, optionally block by block.

    Parameters
    ----------
    H : sparse or dense Hermitian matrix
    sectors : optional integer label per basis state; H must not couple
        different labels.
    """

    def __init__(self, H, sectors=None, check: bool = True):
        if check:
            _check_hermitian(H)
        dim = H.shape[0]
        self.dim = dim
        if sectors is None:
            sectors = np.zeros(dim, dtype=np.int64)
        sectors = np.asarray(sectors)
        if sectors.shape != (dim,):
            raise ValueError("sector labels must match the Hilbert-space dimension")
        Hc = sp.csr_matrix(H)
        self.blocks = []
        for lab in np.unique(sectors):
            idx = np.flatnonzero(sectors == lab)
            sub = Hc[idx][:, idx].toarray()
            e, v = la.eigh(sub)
            self.blocks.append((idx, e, v))
        if check and len(self.blocks) > 1:
            # off-block elements would be silently dropped
            total = sum(abs(Hc[idx][:, idx]).sum() for idx, _, _ in self.blocks)
            if abs(total - abs(Hc).sum()) > 1e-10 * max(1.0, abs(Hc).sum()):
                raise NumericError("Hamiltonian couples different sectors")

    @property
    def energies(self) -> np.ndarray:
        return np.sort(np.concatenate([e for _, e, _ in self.blocks]))

    def evolve(self, v: np.ndarray, t: float) -> np.ndarray:
        """Evolve a vector, or the columns of a matrix, by time ``t``."""
        v = np.asarray(v)
        out = np.zeros(v.shape, dtype=complex)
        for idx, e, vec in self.blocks:
            part = v[idx]
            if not np.any(part):
                continue
            coeff = vec.conj().T @ part
            phase = np.exp(-1j * e * t)
            coeff = coeff * (phase if coeff.ndim == 1 else phase[:, None])
            out[idx] = vec @ coeff
        return out

    def unitary(self, t: float) -> np.ndarray:
        """Dense propagator; only sensible for small dimensions."""
        return self.evolve(np.eye(self.dim, dtype=complex), t)


def _lanczos(matvec, v, m):
    beta0 = np.linalg.norm(v)
    V = np.zeros((m + 1, v.size), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    V[0] = v / beta0
    k = m
    for j in range(m):
        w = matvec(V[j])
        alpha[j] = np.vdot(V[j], w).real
        w = w - alpha[j] * V[j] - (beta[j - 1] * V[j - 1] if j else 0)
        # full reorthogonalization keeps the small basis honest
        w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] < 1e-14 * beta0:
            k = j + 1
            break
        V[j + 1] = w / beta[j]
    return V, alpha[:k], beta[:k], beta0, k


def krylov_evolve(H, v: np.ndarray, t: float, m: int = 30, tol: float = 1e-10, check: bool = True,
                  max_steps: int = 100_000) -> np.ndarray:
    """``exp(-i H t) v`` with a Lanczos propagator and adaptive step halving."""
    if check:
        _check_hermitian(H)
    Hc = sp.csr_matrix(H)
    matvec = Hc.dot
    v = np.asarray(v, dtype=complex).copy()
    norm0 = np.linalg.norm(v)
    if norm0 == 0 or t == 0:
        return v
    m = min(m, v.size)
    done = 0.0
    dt = t
    steps = 0
    sign = 1.0 if t > 0 else -1.0
    while abs(t - done) > 1e-15 * abs(t):
        dt = sign * min(abs(dt), abs(t - done))
        V, alpha, beta, beta0, k = _lanczos(matvec, v, m)
        T = np.diag(alpha) + np.diag(beta[: k - 1], 1) + np.diag(beta[: k - 1], -1)
        while True:
            y = la.expm(-1j * dt * T)[:, 0]
            err = beta0 * (beta[k - 1] * abs(y[-1]) if k < m or beta[k - 1] > 0 else 0.0)
            if k < m and beta[k - 1] < 1e-14 * beta0:
                err = 0.0
            if err <= tol * abs(dt) / abs(t) * norm0 or abs(dt) < 1e-14 * abs(t):
                break
            dt /= 2
        v = beta0 * (V[:k].T @ y)
        done += dt
        steps += 1
        if steps > max_steps:
            raise NumericError("Krylov propagation exceeded the step limit")
        if err < 0.1 * tol * abs(dt) / abs(t) * norm0:
            dt *= 2
    drift = abs(np.linalg.norm(v) - norm0) / norm0
    if drift > 1e-8:
        raise NumericError(f"norm drift {drift:.2e} during Krylov propagation")
    return v


def evolve(H, v: np.ndarray, t: float, sectors=None, method: str = "auto") -> np.ndarray:
    """Propagate ``v`` under ``H`` for time ``t`` choosing a method by size."""
    if method == "auto":
        method = "spectral" if sectors is not None or H.shape[0] <= 2000 else "krylov"
    if method == "spectral":
        return SpectralPropagator(H, sectors).evolve(v, t)
    if method == "krylov":
        return krylov_evolve(H, v, t)
    raise ValueError(f"unknown method {method!r}")


def expectation(op, v: np.ndarray) -> complex:
    return np.vdot(v, op @ v)
