import math

import numpy as np
import pytest
import scipy.sparse as sp

from spinport.algebra import collective_spin_ops, embed, is_hermitian
from spinport.model import (
    EnsembleSpec,
    ParameterError,
    SystemSpec,
    default_system,
    derive_bs_params,
    derive_tms_params,
    effective_ab_hamiltonian,
    effective_ac_hamiltonian,
    frame_roots,
    full_hamiltonian,
    khz,
    product_form_hamiltonian,
    resonant_tms_params,
    to_khz,
)

# hand-evaluated figure parameters (kHz, angular factor stripped)
G2_KHZ = 3.6**2 / 210          # collective coupling squared per ion
DELTA_M_AB = -26.0 + (19.1 + 18.8) / 2


def test_khz_roundtrip():
    for v in (-19.1, 3.6, 1e-3, 250.0):
        assert abs(to_khz(khz(v)) - v) <= 1e-12 * abs(v)


def test_tms_parameters_match_hand_values():
    p = derive_tms_params(default_system())
    assert to_khz(p.detuning) == pytest.approx(-0.15, abs=1e-12)
    chi_n = 70 * G2_KHZ / (4 * DELTA_M_AB)
    assert to_khz(p.self_energy(0)) == pytest.approx(chi_n, rel=1e-12)
    assert to_khz(p.self_energy(0)) == pytest.approx(-0.1532, abs=5e-5)
    assert to_khz(p.rate) == pytest.approx(chi_n, rel=1e-12)
    assert p.adiabaticity == pytest.approx(4 * abs(DELTA_M_AB) / (3.6 * math.sqrt(70 / 210)), rel=1e-12)
    assert p.valid and p.adiabaticity > 13
    # resonance is only approximate at the figure parameters
    assert to_khz(p.residuals[0]) == pytest.approx(abs(-0.15 - chi_n), rel=1e-9)


def test_resonant_tms_zeroes_residuals():
    p = resonant_tms_params(default_system())
    assert max(p.residuals) < 1e-9 * abs(p.detuning)


def test_bs_root_and_couplings():
    sys = default_system()
    nbar_g2 = 70 * G2_KHZ
    disc = math.sqrt((-19.1 + 26.0) ** 2 + nbar_g2)
    roots = sorted([(-19.1 - 26.0 - disc) / 2, (-19.1 - 26.0 + disc) / 2])
    got = [to_khz(f) for f in frame_roots(khz(-19.1), khz(-26.0), khz(1) ** 2 * nbar_g2)]
    assert got == pytest.approx(roots, rel=1e-12)
    assert roots[1] == pytest.approx(-18.947, abs=1e-3)
    p = derive_bs_params(sys)
    assert to_khz(p.frame) == pytest.approx(roots[1], rel=1e-12)
    assert to_khz(p.detuning) == pytest.approx(-19.1 - roots[1], rel=1e-12)
    assert to_khz(p.rate) == pytest.approx(70 * G2_KHZ / (4 * (-26.0 - roots[1])), rel=1e-12)
    assert p.residuals[0] < 1e-6 * khz(1) ** 2


def test_errors():
    sys = default_system()
    bad = SystemSpec(sys.a, sys.b, sys.c, delta_m=(sys.a.omega + sys.b.omega) / 2)
    with pytest.raises(ParameterError):
        derive_tms_params(bad)
    weak = SystemSpec(sys.a, sys.b, sys.c, delta_m=khz(-19.5))
    assert not derive_tms_params(weak).valid
    with pytest.raises(ParameterError):
        derive_bs_params(weak)
    with pytest.raises(ParameterError):
        EnsembleSpec("a", 0, 0.0, 1.0)


def _pair_ops(n):
    return collective_spin_ops(n), collective_spin_ops(n)


@pytest.mark.parametrize("N", [3, 6])
def test_effective_models_conserve_total_sz(N):
    sys = default_system(n_bar=N)
    oa, ob = _pair_ops(N)
    layout = [N + 1, N + 1]
    tot = embed(oa.sz, 0, layout) + embed(ob.sz, 1, layout)
    for H in (effective_ab_hamiltonian(derive_tms_params(sys), oa, ob),
              effective_ac_hamiltonian(derive_bs_params(sys), oa, ob)):
        assert is_hermitian(H)
        assert abs(H @ tot - tot @ H).max() < 1e-9 * abs(H).max()


def test_expanded_form_differs_by_identity():
    N = 6
    sys = default_system(n_bar=N)
    oa, ob = _pair_ops(N)
    for params, sign in ((derive_tms_params(sys), -1), (derive_bs_params(sys), +1)):
        fn = effective_ab_hamiltonian if sign < 0 else effective_ac_hamiltonian
        diff = (product_form_hamiltonian(params, oa, ob, sign) - fn(params, oa, ob)).toarray()
        s = N / 2
        shift = -sum(params.chi[(l, l)] for l in params.pair) * s * (s + 1)
        assert np.allclose(diff, shift * np.eye(diff.shape[0]), atol=1e-9 * abs(shift))


def test_stage_checks():
    sys = default_system(n_bar=4)
    oa, ob = _pair_ops(4)
    with pytest.raises(ParameterError):
        effective_ab_hamiltonian(derive_bs_params(sys), oa, ob)
    with pytest.raises(ParameterError):
        effective_ac_hamiltonian(derive_tms_params(sys), oa, ob)


def test_full_hamiltonian_structure():
    sys = default_system(n_bar=3, n_max=4)
    H = full_hamiltonian(sys)
    assert H.shape == (4 * 4 * 5,) * 2
    assert is_hermitian(H)
    # no coupling: spins only precess, phonon only counts
    free = SystemSpec(*(EnsembleSpec(l, 3, khz(-19.0), 0.0) for l in "abc"), delta_m=khz(-26), n_max=4)
    Hf = full_hamiltonian(free)
    assert sp.triu(Hf, 1).nnz == 0
