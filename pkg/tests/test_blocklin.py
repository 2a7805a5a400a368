import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import null_space, subspace_angles

from zerodyn import blocklin, model
from zerodyn import spacecraft as sc
from zerodyn.errors import AsymmetricMatrix, SingularBlock

from conftest import random_spd


def test_decompose_identity():
    d = blocklin.decompose(np.eye(4), 2)
    np.testing.assert_array_equal(d.M11, np.eye(2))
    np.testing.assert_array_equal(d.M12, np.zeros((2, 2)))
    np.testing.assert_array_equal(d.M22, np.eye(2))


def test_decompose_two_by_two():
    d = blocklin.decompose(np.array([[2.0, 1.0], [1.0, 2.0]]), 1)
    assert (d.M11.item(), d.M12.item(), d.M22.item()) == (2.0, 1.0, 2.0)
    np.testing.assert_array_equal(d.M21, d.M12.T)


def test_decompose_spacecraft_blocks():
    params = sc.default_params(2)
    d = blocklin.decompose(sc.mass_matrix(params, np.zeros(4)), 3)
    np.testing.assert_array_equal(d.M12, np.hstack([np.zeros((3, 2)), params.coupling]))
    np.testing.assert_array_equal(d.M22, np.diag([1.0, 1.0, 3.0, 3.0]))


def test_decompose_rejects_asymmetry():
    M = np.array([[2.0, 0.5], [0.4, 2.0]])
    with pytest.raises(AsymmetricMatrix):
        blocklin.decompose(M, 1)


def test_decompose_tolerates_rounding():
    M = np.array([[2.0, 0.5 + 1e-14], [0.5, 2.0]])
    blocklin.decompose(M, 1)


def test_schur_f11_zero_coupling(rng):
    M = np.zeros((5, 5))
    M[:2, :2], M[2:, 2:] = random_spd(rng, 2), random_spd(rng, 3)
    d = blocklin.decompose(M, 2)
    np.testing.assert_allclose(blocklin.schur_f11(d), M[:2, :2], atol=0)


def test_schur_f11_two_by_two():
    d = blocklin.decompose(np.array([[2.0, 1.0], [1.0, 2.0]]), 1)
    F11 = blocklin.schur_f11(d)
    assert F11.item() == pytest.approx(1.5, abs=1e-15)
    # the (1,1) entry of the inverse is 1/F11
    assert np.linalg.inv([[2.0, 1.0], [1.0, 2.0]])[0, 0] == pytest.approx(1 / 1.5, abs=1e-15)


def test_schur_f11_random_spd(rng):
    M = random_spd(rng, 6)
    F11 = blocklin.schur_f11(blocklin.decompose(M, 2))
    ref = np.linalg.inv(np.linalg.inv(M)[:2, :2])
    assert np.abs(F11 - ref).max() <= 1e-11
    np.testing.assert_array_equal(F11, F11.T)
    assert np.all(np.linalg.eigvalsh(F11) > 0)


def test_block_inverse_identity():
    np.testing.assert_allclose(blocklin.block_inverse(blocklin.decompose(np.eye(5), 2)), np.eye(5), atol=0)


def test_block_inverse_zero_coupling(rng):
    M = np.zeros((5, 5))
    M[:2, :2], M[2:, 2:] = random_spd(rng, 2), random_spd(rng, 3)
    B = blocklin.block_inverse(blocklin.decompose(M, 2))
    assert np.abs(B[:2, :2] - np.linalg.inv(M[:2, :2])).max() <= 1e-13
    assert np.abs(B[2:, 2:] - np.linalg.inv(M[2:, 2:])).max() <= 1e-13
    np.testing.assert_array_equal(B[:2, 2:], 0.0)


def test_block_inverse_random_spd_multiply_back(rng):
    for _ in range(50):
        M = random_spd(rng, 7)
        B = blocklin.block_inverse(blocklin.decompose(M, 3))
        assert np.abs(B @ M - np.eye(7)).max() <= 1e-11


def test_block_inverse_first_rows_are_input_transpose(rng):
    M = random_spd(rng, 6)
    d = blocklin.decompose(M, 2)
    B = blocklin.block_inverse(d)
    F11_inv = np.linalg.inv(blocklin.schur_f11(d))
    N = blocklin.null_basis(d).N
    assert np.abs(B[:2] - np.hstack([F11_inv, -F11_inv @ N])).max() <= 1e-12


def test_null_basis_zero_coupling(rng):
    M = np.zeros((5, 5))
    M[:2, :2], M[2:, 2:] = random_spd(rng, 2), random_spd(rng, 3)
    nb = blocklin.null_basis(blocklin.decompose(M, 2))
    np.testing.assert_array_equal(nb.X, np.vstack([np.zeros((2, 3)), np.eye(3)]))


def test_null_basis_spacecraft_closed_form():
    params = sc.default_params(2)
    M = sc.mass_matrix(params, np.zeros(4))
    nb = blocklin.null_basis(blocklin.decompose(M, 3))
    ref = np.hstack([np.zeros((3, 2)), params.coupling / params.panel_area])
    assert np.abs(nb.N - ref).max() <= 1e-15
    G = np.linalg.inv(M)[:, :3]
    assert np.max(subspace_angles(nb.X, null_space(G.T))) <= 1e-9


def test_null_basis_random_spd_matches_svd_oracle(rng):
    for _ in range(20):
        M = random_spd(rng, 5)
        nb = blocklin.null_basis(blocklin.decompose(M, 2))
        G = np.linalg.inv(M)[:, :2]
        assert np.max(subspace_angles(nb.X, null_space(G.T))) <= 1e-9
        assert np.linalg.matrix_rank(nb.X) == 3


def test_singular_m22():
    M = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0], [0.0, 1.0, 1.0]])
    with pytest.raises(SingularBlock):
        blocklin.null_basis(blocklin.decompose(M, 1))


def test_indefinite_m22_uses_lu():
    # symmetric, invertible, indefinite M22
    M = np.array([[3.0, 0.2, 0.1], [0.2, 1.0, 2.0], [0.1, 2.0, 1.0]])
    d = blocklin.decompose(M, 1)
    B = blocklin.block_inverse(d)
    assert np.abs(B @ M - np.eye(3)).max() <= 1e-12


@pytest.mark.parametrize("name", ["spacecraft", "spacecraft_flex", "decoupled", "dense_spd", "coupled_demo"])
def test_null_space_identity_registered(name, rng):
    m = model.get_model(name)
    for x in model.sample_states(m, rng, 200):
        nb = blocklin.null_basis(blocklin.decompose(m.mass_matrix(x[m.p:]), m.p))
        assert np.abs(model.input_columns(m, x).T @ nb.X).max() <= 1e-10


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 9), data=st.data())
def test_block_inverse_property(n, data):
    p = data.draw(st.integers(1, n - 1))
    seed = data.draw(st.integers(0, 2**32 - 1))
    M = random_spd(np.random.default_rng(seed), n)
    d = blocklin.decompose(M, p)
    B = blocklin.block_inverse(d)
    assert np.abs(B - np.linalg.inv(M)).max() <= 1e-11
    X = blocklin.null_basis(d).X
    assert np.abs(B[:, :p].T @ X).max() <= 1e-10
