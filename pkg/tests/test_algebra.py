import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from spinport.algebra import (
    DimensionError,
    collective_spin_ops,
    commutator,
    embed,
    hermiticity_error,
    is_hermitian,
    kron,
    phonon_ops,
    to_dense,
)


def dense_oracle(N):
    """Spin-N/2 matrices from the textbook formulas, m ascending."""
    s = N / 2
    m = np.arange(N + 1) - s
    sp_ = np.zeros((N + 1, N + 1))
    for k in range(N):
        sp_[k + 1, k] = np.sqrt(s * (s + 1) - m[k] * (m[k] + 1))
    sz = np.diag(m)
    return (sp_ + sp_.T) / 2, (sp_ - sp_.T) / 2j, sz, sp_


def test_spin_half_hand_matrices():
    ops = collective_spin_ops(1)
    assert np.allclose(ops.sx.toarray(), [[0, 0.5], [0.5, 0]])
    assert np.allclose(ops.sy.toarray(), [[0, 0.5j], [-0.5j, 0]])
    assert np.allclose(ops.sz.toarray(), [[-0.5, 0], [0, 0.5]])
    assert np.allclose(ops.sp.toarray(), [[0, 0], [1, 0]])


@settings(max_examples=12, deadline=None)
@given(st.integers(min_value=1, max_value=12))
def test_matches_dense_oracle(N):
    ops = collective_spin_ops(N)
    sx, sy, sz, spl = dense_oracle(N)
    for a, b in ((ops.sx, sx), (ops.sy, sy), (ops.sz, sz), (ops.sp, spl)):
        assert np.allclose(a.toarray(), b, atol=1e-13)


@settings(max_examples=12, deadline=None)
@given(st.integers(min_value=1, max_value=12))
def test_commutators_and_casimir(N):
    o = collective_spin_ops(N)
    x, y, z = (m.toarray() for m in (o.sx, o.sy, o.sz))
    assert np.allclose(x @ y - y @ x, 1j * z, atol=1e-12)
    assert np.allclose(y @ z - z @ y, 1j * x, atol=1e-12)
    assert np.allclose(z @ x - x @ z, 1j * y, atol=1e-12)
    s = N / 2
    assert np.allclose(x @ x + y @ y + z @ z, s * (s + 1) * np.eye(N + 1), atol=1e-11)


@pytest.mark.parametrize("N", [1, 4, 9])
def test_hermiticity_and_ladder(N):
    o = collective_spin_ops(N)
    for m in (o.sx, o.sy, o.sz):
        assert is_hermitian(m)
    assert hermiticity_error(o.sp) > 0.5
    assert np.allclose(o.sm.toarray(), o.sp.toarray().conj().T)
    assert np.allclose(o.m, np.arange(N + 1) - N / 2)


def test_invalid_sizes():
    with pytest.raises(ValueError):
        collective_spin_ops(0)
    with pytest.raises(ValueError):
        collective_spin_ops(2.5)


def test_phonon_ops():
    ph = phonon_ops(5)
    a, ad = ph.a.toarray(), ph.adag.toarray()
    comm = a @ ad - ad @ a
    # truncation spoils the last diagonal entry only
    assert np.allclose(np.diag(comm)[:-1], 1.0)
    assert np.allclose(ph.number.toarray(), np.diag(np.arange(6)))


def test_embed_and_kron():
    o = collective_spin_ops(2)
    ph = phonon_ops(2)
    layout = [3, 3, 3]
    e = embed(o.sz, 1, layout).toarray()
    ref = np.kron(np.kron(np.eye(3), o.sz.toarray()), np.eye(3))
    assert np.allclose(e, ref)
    assert np.allclose(kron(o.sx, ph.a).toarray(), np.kron(o.sx.toarray(), ph.a.toarray()))
    with pytest.raises(ValueError):
        embed(o.sz, 0, [4, 3])
    with pytest.raises(DimensionError):
        embed(o.sz, 0, [3, 2000, 2000])


def test_commutator_and_dense():
    o = collective_spin_ops(3)
    c = commutator(o.sx, o.sy)
    assert np.allclose(to_dense(c), 1j * o.sz.toarray())
    assert isinstance(to_dense(sp.identity(3)), np.ndarray)
