import math

import numpy as np
import pytest

from spinport import metrics
from spinport.model import default_system
from spinport.states import (
    InputStateSpec,
    StateError,
    calibrate_twist,
    dense_spin,
    dicke_input,
    frame_unitary,
    lab_ops,
    one_axis_twisted,
    phase_displaced,
    prepare_input,
    prepare_system,
    spin_coherent,
)


@pytest.mark.parametrize("N", [1, 5, 12])
def test_frame_dictionary_is_a_rotation(N):
    W = frame_unitary(N)
    d = dense_spin(N)
    L = lab_ops(N)
    assert np.allclose(W @ W.conj().T, np.eye(N + 1))
    assert np.allclose(W @ d["sx"] @ W.conj().T, L["x"])
    assert np.allclose(W @ d["sy"] @ W.conj().T, L["y"])
    assert np.allclose(W @ d["sz"] @ W.conj().T, L["z"])


def test_coherent_state_direction_and_norm():
    N = 20
    for th, ph in ((0.3, 1.1), (math.pi / 2, math.pi), (2.0, -0.4)):
        v = spin_coherent(N, th, ph)
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-13)
        d = dense_spin(N)
        mean = [np.vdot(v, d[k] @ v).real for k in ("sx", "sy", "sz")]
        ref = N / 2 * np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])
        assert np.allclose(mean, ref, atol=1e-10)


def test_lab_minus_x_is_dressed_south_pole():
    v = spin_coherent(30, math.pi / 2, math.pi, frame="lab")
    assert abs(v[0]) == pytest.approx(1.0, abs=1e-12)


def test_phase_displacement_sets_azimuth():
    v = phase_displaced(spin_coherent(70, math.pi / 2, math.pi, frame="lab"), math.radians(6))
    assert metrics.phase_deg(v) == pytest.approx(6.0, abs=1e-9)


def test_twist_calibration():
    phi = calibrate_twist(70, -4.15)
    v = one_axis_twisted(spin_coherent(70, math.pi / 2, math.pi, frame="lab"), phi)
    assert metrics.squeezing_db(v) == pytest.approx(-4.15, abs=0.02)
    with pytest.raises(StateError):
        calibrate_twist(70, 1.0)


def test_twisted_state_parity():
    v = prepare_input(40, InputStateSpec(kind="SS", xi_db=-4.15))
    m, p = metrics.magnetization_distribution(v, "x")
    odd = ((m + 20) % 2).astype(bool)
    assert p[odd].sum() < 1e-12


def test_dicke_inputs():
    N = 16
    k0 = dicke_input(N, 0)
    assert abs(np.vdot(k0, spin_coherent(N, math.pi / 2, math.pi, frame="lab"))) == pytest.approx(1, abs=1e-12)
    k1 = dicke_input(N, 1)
    mean, _ = metrics.lab_moments(k1)
    assert np.allclose(mean, [-(N / 2 - 1), 0, 0], atol=1e-10)
    assert abs(np.vdot(k0, k1)) < 1e-12
    with pytest.raises(StateError):
        dicke_input(N, N + 1)


def test_input_spec_validation():
    with pytest.raises(StateError):
        InputStateSpec(kind="cat")
    with pytest.raises(StateError):
        InputStateSpec(kind="SS", phi_ss=None, xi_db=None)
    assert InputStateSpec(kind="pdsc").kind == "PDSC"


def test_prepare_system_product():
    sys = default_system(n_bar=3, n_max=2)
    v = prepare_system(sys, InputStateSpec(), with_phonon=True)
    assert v.shape == (4 * 4 * 4 * 3,)
    psi = v.reshape(4, 4, 4, 3)
    assert abs(psi[0, 3, 0, 0]) == pytest.approx(1.0)
