"""Input and ancilla state preparation.

Dynamics run in the dressed frame. Lab-frame spin components are the
dressed ones relabelled: ``S_x^lab = S_z``, ``S_y^lab = S_y``,
``S_z^lab = -S_x``. Equivalently ``S_a^lab = W S_a W^dag`` with
``W = exp(+i pi/2 S_y)``, so a state written in lab-frame Dicke
coordinates is carried into the dressed basis by ``W``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as la
from scipy.special import gammaln, xlogy

from .algebra import collective_spin_ops


class StateError(ValueError):
    pass


@lru_cache(maxsize=64)
def _dense_ops(N: int):
    ops = collective_spin_ops(N)
    return {k: getattr(ops, k).toarray() for k in ("sx", "sy", "sz", "sp", "sm")}


def dense_spin(N: int) -> dict:
    """Dense dressed-frame spin matrices keyed ``sx, sy, sz, sp, sm`` (read-only, cached)."""
    d = _dense_ops(N)
    for v in d.values():
        v.setflags(write=False)
    return d


@lru_cache(maxsize=64)
def frame_unitary(N: int) -> np.ndarray:
    """``W = exp(+i pi/2 S_y)``, the map from lab-frame Dicke coordinates to the dressed basis."""
    w = la.expm(0.5j * math.pi * dense_spin(N)["sy"])
    w.setflags(write=False)
    return w


@lru_cache(maxsize=64)
def lab_ops(N: int) -> dict:
    """Lab-frame spin components ``x, y, z`` as dressed-basis matrices."""
    d = dense_spin(N)
    out = {"x": d["sz"].copy(), "y": d["sy"].copy(), "z": -d["sx"]}
    for v in out.values():
        v.setflags(write=False)
    return out


def rotation(N: int, generator: np.ndarray, angle: float) -> np.ndarray:
    """``exp(-i angle G)`` for a Hermitian generator."""
    e, v = la.eigh(generator)
    return (v * np.exp(-1j * angle * e)) @ v.conj().T


def _coherent_amplitudes(N: int, theta, phi) -> np.ndarray:
    """``exp(-i phi S_z) exp(-i theta S_y)|m=N/2>`` in standard Dicke coordinates.

    Broadcasts over ``theta``/``phi``; the Dicke index is the last axis.
    """
    theta = np.asarray(theta, dtype=float)[..., None]
    phi = np.asarray(phi, dtype=float)[..., None]
    k = np.arange(N + 1)
    m = k - N / 2
    logc = 0.5 * (gammaln(N + 1) - gammaln(k + 1) - gammaln(N - k + 1))
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    amp = np.exp(logc + xlogy(k, np.abs(c)) + xlogy(N - k, np.abs(s)))
    amp = amp * np.where(c < 0, (-1.0) ** k, 1.0) * np.where(s < 0, (-1.0) ** (N - k), 1.0)
    return amp * np.exp(-1j * m * phi)


def spin_coherent(N: int, theta: float, phi: float, frame: str = "dressed") -> np.ndarray:
    """Spin coherent state ``exp(-i phi S_z) exp(-i theta S_y)|m=+N/2>``.

    With ``frame="lab"`` the rotation uses lab-frame components and the
    result is returned in the dressed basis.
    """
    if N < 1:
        raise StateError("N must be >= 1")
    v = _coherent_amplitudes(N, theta, phi)
    v = v / np.linalg.norm(v)
    if frame == "lab":
        return frame_unitary(N) @ v
    if frame != "dressed":
        raise StateError(f"unknown frame {frame!r}")
    return v


def _lab_diag_apply(v: np.ndarray, phases: np.ndarray) -> np.ndarray:
    N = v.shape[0] - 1
    w = frame_unitary(N)
    return w @ (phases * (w.conj().T @ v))


def phase_displaced(v: np.ndarray, phi_c: float) -> np.ndarray:
    """``exp(-i phi_c S_z^lab) v``."""
    m = np.arange(v.shape[0]) - (v.shape[0] - 1) / 2
    return _lab_diag_apply(v, np.exp(-1j * phi_c * m))


def one_axis_twisted(v: np.ndarray, phi_ss: float) -> np.ndarray:
    """``exp(-i phi_ss (S_z^lab)^2) v``."""
    m = np.arange(v.shape[0]) - (v.shape[0] - 1) / 2
    return _lab_diag_apply(v, np.exp(-1j * phi_ss * m**2))


def dicke_input(N: int, k_c: int) -> np.ndarray:
    """``exp(-i pi/2 S_y^lab) (S_+^lab)^k |psi_SC(pi,0)>``, normalised after the raising.

    The result points along lab ``-x`` with ``k_c`` excitations.
    """
    if not 0 <= k_c <= N:
        raise StateError(f"excitation count {k_c} outside 0..{N}")
    std = np.zeros(N + 1, dtype=complex)
    std[k_c] = 1.0  # (S_+)^k |m=-N/2> up to a positive factor
    d = dense_spin(N)
    std = rotation(N, d["sy"], math.pi / 2) @ std
    return frame_unitary(N) @ std


def calibrate_twist(N: int, target_db: float, tol_db: float = 0.02, phi_max: float | None = None) -> float:
    """Smallest twisting angle giving ``target_db`` Wineland squeezing for the ``-x`` coherent state."""
    from .metrics import squeezing_db

    if target_db >= 0:
        raise StateError("target squeezing must be negative (dB)")
    base = spin_coherent(N, math.pi / 2, math.pi, frame="lab")

    def excess(phi):
        return squeezing_db(one_axis_twisted(base, phi)) - target_db

    # walk outward until the target is bracketed, then bisect
    lo, hi = 0.0, 0.1 / N
    limit = phi_max if phi_max is not None else math.pi / 2
    while excess(hi) > 0:
        lo, hi = hi, hi * 1.5
        if hi > limit:
            raise StateError(f"cannot reach {target_db} dB squeezing at N={N}")
    while True:
        mid = 0.5 * (lo + hi)
        val = excess(mid)
        if abs(val) < tol_db / 100 or hi - lo < 1e-14:
            return mid
        if val > 0:
            lo = mid
        else:
            hi = mid


@dataclass(frozen=True)
class InputStateSpec:
    """Which state ensemble c carries into the protocol.

    ``kind`` is one of ``SC``, ``PDSC``, ``SS``, ``DICKE``. Angles are radians.
    For ``SS`` either ``phi_ss`` or ``xi_db`` must be set.
    """

    kind: str = "SC"
    theta: float = math.pi / 2
    phi: float = math.pi
    phi_c: float = math.radians(6.0)
    phi_ss: float | None = None
    xi_db: float | None = -4.15
    k_c: int = 1

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        if kind not in ("SC", "PDSC", "SS", "DICKE"):
            raise StateError(f"unknown input kind {self.kind!r}")
        for name in ("theta", "phi", "phi_c"):
            if not math.isfinite(getattr(self, name)):
                raise StateError(f"{name} must be finite")
        if kind == "SS" and self.phi_ss is None and self.xi_db is None:
            raise StateError("SS input needs phi_ss or xi_db")
        if self.k_c < 0:
            raise StateError("k_c must be >= 0")

    def twist_angle(self, N: int) -> float:
        if self.phi_ss is not None:
            return self.phi_ss
        return calibrate_twist(N, self.xi_db)


def prepare_input(N: int, spec: InputStateSpec) -> np.ndarray:
    """State of ensemble c before the protocol, in the dressed basis."""
    if spec.kind == "DICKE":
        return dicke_input(N, spec.k_c)
    v = spin_coherent(N, spec.theta, spec.phi, frame="lab")
    if spec.kind == "PDSC":
        v = phase_displaced(v, spec.phi_c)
    elif spec.kind == "SS":
        v = one_axis_twisted(v, spec.twist_angle(N))
    return v


def polarized(N: int, orientation: str) -> np.ndarray:
    """Lab ``-x`` is the dressed south pole (index 0), lab ``+x`` the north pole."""
    v = np.zeros(N + 1, dtype=complex)
    if orientation == "-x":
        v[0] = 1.0
    elif orientation == "+x":
        v[N] = 1.0
    else:
        raise StateError(f"unknown orientation {orientation!r}")
    return v


def phonon_vacuum(n_max: int) -> np.ndarray:
    v = np.zeros(n_max + 1, dtype=complex)
    v[0] = 1.0
    return v


def prepare_system(sys, spec: InputStateSpec | None = None, with_phonon: bool = False) -> np.ndarray:
    """Product state ``a x b x c`` (``x`` phonon vacuum), flattened with a slowest.

    Ensembles a and b are their polarized poles; c carries the input state.
    """
    spec = spec or InputStateSpec()
    factors = [
        polarized(sys.a.N, sys.a.orientation),
        polarized(sys.b.N, sys.b.orientation),
        prepare_input(sys.c.N, spec),
    ]
    if with_phonon:
        factors.append(phonon_vacuum(sys.n_max))
    out = factors[0]
    for f in factors[1:]:
        out = np.kron(out, f)
    return out
