"""Collective spin and truncated boson operators in the symmetric Dicke sector.

Basis convention: index ``k = m + N/2`` runs from ``m = -N/2`` upward, so the
index of a basis vector is its excitation count. Tensor products order slot 0
as the slowest-varying index.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp

#: largest Hilbert-space dimension any builder is allowed to allocate
DIMENSION_BUDGET = 4_000_000
#: below this dimension operators may be converted to dense arrays
DENSE_THRESHOLD = 4096


class DimensionError(ValueError):
    """Raised when a requested operator exceeds the dimension budget or shapes disagree."""


def _csr(mat) -> sp.csr_matrix:
    m = sp.csr_matrix(mat, dtype=complex)
    m.eliminate_zeros()
    m.sort_indices()
    return m


@dataclass(frozen=True)
class SpinOperatorSet:
    """Collective spin matrices for ``N`` spin-1/2 particles at maximal spin ``N/2``."""

    N: int
    sx: sp.csr_matrix
    sy: sp.csr_matrix
    sz: sp.csr_matrix
    sp: sp.csr_matrix
    sm: sp.csr_matrix

    @property
    def dim(self) -> int:
        return self.N + 1

    @property
    def s(self) -> float:
        return self.N / 2

    @property
    def m(self) -> np.ndarray:
        """Magnetic quantum numbers, ascending."""
        return np.arange(self.N + 1) - self.N / 2

    @property
    def identity(self) -> sp.csr_matrix:
        return sp.identity(self.dim, dtype=complex, format="csr")

    def component(self, n) -> sp.csr_matrix:
        """Spin projection ``n . S`` along a (not necessarily unit) 3-vector."""
        n = np.asarray(n, dtype=float)
        return _csr(n[0] * self.sx + n[1] * self.sy + n[2] * self.sz)


@dataclass(frozen=True)
class PhononOperatorSet:
    """Truncated single-mode boson operators on Fock states ``0..n_max``."""

    n_max: int
    a: sp.csr_matrix
    adag: sp.csr_matrix

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @property
    def number(self) -> sp.csr_matrix:
        return _csr(self.adag @ self.a)


def collective_spin_ops(N: int) -> SpinOperatorSet:
    """Build S_x, S_y, S_z, S_+, S_- for ``N`` spins in the Dicke basis.

    ``S_+ |m>`` has amplitude ``sqrt(s(s+1) - m(m+1))`` with ``s = N/2``.
    """
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise DimensionError(f"ion count must be a positive integer, got {N!r}")
    if N + 1 > DIMENSION_BUDGET:
        raise DimensionError(f"spin dimension {N + 1} exceeds budget {DIMENSION_BUDGET}")
    s = N / 2
    m = np.arange(N + 1) - s
    amp = np.sqrt(s * (s + 1) - m[:-1] * (m[:-1] + 1))
    splus = _csr(sp.diags(amp, -1, shape=(N + 1, N + 1)))
    sminus = _csr(splus.conj().T)
    sx = _csr((splus + sminus) / 2)
    sy = _csr((splus - sminus) / 2j)
    sz = _csr(sp.diags(m, 0))
    return SpinOperatorSet(int(N), sx, sy, sz, splus, sminus)


def phonon_ops(n_max: int) -> PhononOperatorSet:
    if n_max < 0:
        raise DimensionError(f"phonon cutoff must be >= 0, got {n_max}")
    if n_max + 1 > DIMENSION_BUDGET:
        raise DimensionError(f"phonon dimension {n_max + 1} exceeds budget")
    a = _csr(sp.diags(np.sqrt(np.arange(1, n_max + 1)), 1, shape=(n_max + 1, n_max + 1)))
    return PhononOperatorSet(int(n_max), a, _csr(a.conj().T))


def embed(op, slot: int, layout) -> sp.csr_matrix:
    """Return ``I x ... x op x ... x I`` with ``op`` in position ``slot`` of ``layout``."""
    layout = [int(d) for d in layout]
    if not 0 <= slot < len(layout):
        raise DimensionError(f"slot {slot} outside layout of length {len(layout)}")
    if op.shape != (layout[slot], layout[slot]):
        raise DimensionError(f"operator shape {op.shape} does not match layout[{slot}]={layout[slot]}")
    total = int(np.prod(layout))
    if total > DIMENSION_BUDGET:
        raise DimensionError(f"tensor dimension {total} exceeds budget {DIMENSION_BUDGET}")
    left = int(np.prod(layout[:slot]))
    right = int(np.prod(layout[slot + 1:]))
    out = sp.csr_matrix(op, dtype=complex)
    if left > 1:
        out = sp.kron(sp.identity(left, dtype=complex), out, format="csr")
    if right > 1:
        out = sp.kron(out, sp.identity(right, dtype=complex), format="csr")
    return _csr(out)


def kron(*ops) -> sp.csr_matrix:
    return _csr(reduce(lambda x, y: sp.kron(x, y, format="csr"), ops))


def apply(op, v: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product with a shape check."""
    v = np.asarray(v)
    if op.shape[1] != v.shape[0]:
        raise DimensionError(f"operator {op.shape} cannot act on vector of length {v.shape[0]}")
    return op @ v


def hermiticity_error(op) -> float:
    """Max-norm of ``op - op^dagger``."""
    diff = op - op.conj().T
    if sp.issparse(diff):
        return float(abs(diff).max()) if diff.nnz else 0.0
    return float(np.max(np.abs(diff))) if diff.size else 0.0


def is_hermitian(op, tol: float = 1e-12) -> bool:
    return hermiticity_error(op) < tol


def to_dense(op, threshold: int = DENSE_THRESHOLD) -> np.ndarray:
    if op.shape[0] > threshold:
        raise DimensionError(f"refusing dense conversion of dimension {op.shape[0]} > {threshold}")
    return op.toarray() if sp.issparse(op) else np.asarray(op)


def commutator(a, b):
    return a @ b - b @ a
