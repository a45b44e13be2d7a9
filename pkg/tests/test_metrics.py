import math

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings, strategies as st

from spinport import metrics
from spinport.states import dicke_input, one_axis_twisted, polarized, spin_coherent


def random_density(rng, dim=8, rank=None):
    rank = rank or dim
    A = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


def oracle_fidelity(r, s):
    sr = la.sqrtm(r)
    return np.real(np.trace(la.sqrtm(sr @ s @ sr))) ** 2


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_uhlmann_axioms(seed):
    rng = np.random.default_rng(seed)
    r, s = random_density(rng), random_density(rng)
    f = metrics.uhlmann_fidelity(r, s)
    assert 0 <= f <= 1 + 1e-10
    assert f == pytest.approx(metrics.uhlmann_fidelity(s, r), abs=1e-9)
    assert f == pytest.approx(oracle_fidelity(r, s), abs=1e-8)
    assert metrics.uhlmann_fidelity(r, r) == pytest.approx(1.0, abs=1e-9)
    # pure reference: mixing in the reference keeps at least its weight
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    lam = rng.uniform()
    mix = lam * np.outer(psi, psi.conj()) + (1 - lam) * s
    assert metrics.uhlmann_fidelity(np.outer(psi, psi.conj()), mix) >= lam - 1e-10
    assert metrics.uhlmann_fidelity(psi, mix) == pytest.approx(
        metrics.uhlmann_fidelity(np.outer(psi, psi.conj()), mix), abs=1e-9)


def test_pure_fidelity_cases():
    a, b = dicke_input(10, 0), dicke_input(10, 1)
    assert metrics.uhlmann_fidelity(a, a) == pytest.approx(1.0)
    assert metrics.uhlmann_fidelity(a, b) == pytest.approx(0.0, abs=1e-20)


def test_hp_formulas():
    assert metrics.hp_fidelity_sc(0) == 0.5
    assert metrics.hp_fidelity_sc(0.55) == pytest.approx(0.750, abs=0.005)
    assert metrics.hp_fidelity_sc(30) == pytest.approx(1.0)
    assert metrics.hp_fidelity_ss(0.55, 10 ** (-0.53)) == pytest.approx(0.65, abs=0.01)
    assert metrics.hp_fidelity_ss(0, 1) == 0.5
    for s in np.linspace(0, 2, 9):
        assert metrics.hp_fidelity_ss(s, 1.0) == pytest.approx(metrics.hp_fidelity_sc(s))
        for xi2 in (0.2, 0.7, 1.5, 4.0):
            assert metrics.hp_fidelity_ss(s, xi2) < metrics.hp_fidelity_sc(s)


def test_witness_trivial_value():
    for N in (2, 17, 70):
        psi = np.kron(polarized(N, "-x"), polarized(N, "+x")).reshape(N + 1, N + 1)
        assert metrics.witness_vs(psi) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        metrics.witness_vs(np.ones((3, 3)) / 3)  # zero mean polarization


def test_husimi():
    N = 20
    v = spin_coherent(N, math.pi / 2, math.pi, frame="lab")
    assert metrics.husimi_q(v, math.pi / 2, math.pi) == pytest.approx(1 / (4 * math.pi))
    th, ph = metrics.husimi_peak(v)
    assert (th, ph) == pytest.approx((math.pi / 2, math.pi), abs=1e-5)
    d = dicke_input(N, 1)
    assert metrics.husimi_q(d, math.pi / 2, math.pi) == pytest.approx(0.0, abs=1e-15)
    th, ph, q = metrics.husimi_grid(v, 181, 361, normalized=True)
    dth, dph = th[1] - th[0], ph[1] - ph[0]
    integral = np.sum(q[:, :-1] * np.sin(th)[:, None]) * dth * dph
    assert integral == pytest.approx(1.0, abs=1e-3)
    rho = np.outer(v, v.conj())
    assert metrics.husimi_q(rho, 1.0, 2.0) == pytest.approx(metrics.husimi_q(v, 1.0, 2.0))
    assert np.all(metrics.husimi_grid(d)[2] >= 0)


def test_squeezing_and_phase():
    N = 40
    v = spin_coherent(N, math.pi / 2, math.pi, frame="lab")
    assert metrics.squeezing_db(v) == pytest.approx(0.0, abs=1e-10)
    assert metrics.phase_deg(v) == pytest.approx(0.0, abs=1e-10)
    tw = one_axis_twisted(v, 0.02)
    xi = metrics.squeezing_db(tw)
    assert xi < -1
    # rotating about the mean-spin axis (lab x) leaves the parameter unchanged
    from spinport.states import lab_ops
    e, U = la.eigh(lab_ops(N)["x"])
    rot = U @ np.diag(np.exp(-0.7j * e)) @ U.conj().T
    assert metrics.squeezing_db(rot @ tw) == pytest.approx(xi, abs=1e-9)
    with pytest.raises(ValueError):
        metrics.squeezing_db(np.kron([1.0], dicke_input(2, 1)) * 0 + _zero_mean(2))


def _zero_mean(N):
    # equal superposition of the two lab z poles has vanishing mean spin
    from spinport.states import frame_unitary
    std = np.zeros(N + 1, complex)
    std[0] = std[-1] = 1 / math.sqrt(2)
    return frame_unitary(N) @ std


def test_magnetization_distribution():
    N = 12
    v = spin_coherent(N, math.pi / 2, math.pi, frame="lab")
    m, p = metrics.magnetization_distribution(v, "x")
    assert p[0] == pytest.approx(1.0)
    for axis in "yz":
        _, p = metrics.magnetization_distribution(v, axis)
        assert p.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        metrics.magnetization_distribution(v, "w")


def test_scaling_fit_recovers_model():
    n = np.arange(10, 80, 10)
    f = 1 - 0.56 / n**0.36
    fit = metrics.scaling_fit(n, f)
    assert fit.A == pytest.approx(0.56, abs=1e-6)
    assert fit.p == pytest.approx(0.36, abs=1e-6)
    with pytest.raises(ValueError):
        metrics.scaling_fit(n[:3], f[:3])
    with pytest.raises(ValueError):
        metrics.scaling_fit(n[::-1], f)
