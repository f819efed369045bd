import numpy as np
import pytest

from lctrunc import (LevelLayout, NonConvergenceError, NotFoundError, RetrialParams, StructureError,
                     find_valid_N, finite_from_dense, lc_block_augment, ldqbd_generator, mm1_generator,
                     northwest_truncation, phi_bar, resolvent_neumann, resolvent_rows, resolvent_summary,
                     retrial_generator)
from lctrunc.kernels import BACKEND
from oracles import resolvent_dense


def test_single_state():
    Q = finite_from_dense([[-2.0]], LevelLayout(1, 1), n=0, conservative=False)
    np.testing.assert_allclose(resolvent_rows(Q, 1.0), [[1 / 3]])
    np.testing.assert_allclose(resolvent_neumann(Q, 1.0), [[1 / 3]], atol=1e-14)


def test_two_state_upper_triangular():
    Q = finite_from_dense([[-1, 1], [0, -1]], LevelLayout(1, 1), conservative=False)
    want = [[0.5, 0.25], [0.0, 0.5]]
    np.testing.assert_allclose(resolvent_rows(Q, 1.0), want, atol=1e-15)
    np.testing.assert_allclose(resolvent_neumann(Q, 1.0), want, atol=1e-13)
    np.testing.assert_allclose(resolvent_rows(Q, 1.0, [(1, 0)]), [want[1]], atol=1e-15)


@pytest.mark.parametrize("beta", [0.25, 1.0, 3.0])
def test_direct_and_neumann_match_dense_inverse(beta):
    Qn = northwest_truncation(retrial_generator(RetrialParams(2, 1.0, 1.0, 1.0)), 12)
    want = resolvent_dense(Qn.toarray(), beta)
    np.testing.assert_allclose(resolvent_rows(Qn, beta), want, atol=1e-12)
    np.testing.assert_allclose(resolvent_neumann(Qn, beta, tol=1e-16), want, atol=1e-11)


def test_neumann_iteration_cap():
    Qn = northwest_truncation(mm1_generator(1.0, 1.0), 50)
    with pytest.raises(NonConvergenceError):
        resolvent_neumann(Qn, 0.01, tol=1e-16, max_terms=10)


def test_argument_checks():
    Qn = northwest_truncation(mm1_generator(1.0, 2.0), 5)
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            resolvent_rows(Qn, bad)
    with pytest.raises(ValueError):
        resolvent_neumann(Qn, 1.0, tol=0.0)
    with pytest.raises(StructureError):
        resolvent_rows(Qn, 1.0, [99])
    with pytest.raises(ValueError):
        resolvent_summary(mm1_generator(1.0, 2.0), 5, 3)


def test_conservative_rows_are_stochastic():
    Qf = lc_block_augment(retrial_generator(RetrialParams(3, 2.0, 1.0, 0.7)), 20)
    rows = resolvent_rows(Qf, 0.5)
    assert np.abs(rows.sum(axis=1) - 1).max() <= 1e-12
    assert rows.min() > 0


def test_phi_bar_is_largest_column_minimum():
    lay = LevelLayout(1, 1)
    rows = np.array([[0.5, 0.2, 0.1], [0.1, 0.4, 0.3]])
    assert phi_bar(rows, 1, lay) == pytest.approx(0.2)
    assert phi_bar(-rows, 1, lay) == 0.0
    with pytest.raises(StructureError):
        phi_bar(rows, 2, lay)


@pytest.mark.parametrize("K,N,beta", [(0, 1, 1.0), (3, 10, 0.5), (6, 40, 0.05)])
def test_qbd_and_generic_paths_agree(K, N, beta):
    Q = retrial_generator(RetrialParams(2, 1.2, 1.0, 0.8))
    a = resolvent_summary(Q, K, N, beta, method="qbd", store_rows=True)
    b = resolvent_summary(Q, K, N, beta, method="generic")
    assert a.phi_bar == pytest.approx(b.phi_bar, rel=1e-10)
    np.testing.assert_allclose(a.colmin, b.colmin, rtol=1e-9, atol=1e-300)
    np.testing.assert_allclose(a.rows, b.rows, rtol=1e-9, atol=1e-300)
    assert a.corner_min == pytest.approx(b.corner_min, rel=1e-9)
    assert a.argmax_state == b.argmax_state
    assert a.one_over_beta_phi == pytest.approx(1 / (beta * a.phi_bar))


def test_threaded_sweep_matches():
    Q = retrial_generator(RetrialParams.from_rho(0.7, s=8))
    one = resolvent_summary(Q, 5, 60, 0.3)
    four = resolvent_summary(Q, 5, 60, 0.3, threads=4)
    np.testing.assert_array_equal(one.colmin, four.colmin)


@pytest.mark.skipif(BACKEND != "compiled", reason="compiled kernels not built")
def test_backends_agree_on_phi():
    Q = retrial_generator(RetrialParams.from_rho(0.9, s=4))
    a = resolvent_summary(Q, 10, 200, 0.1, backend="compiled")
    b = resolvent_summary(Q, 10, 200, 0.1, backend="python")
    np.testing.assert_allclose(a.colmin, b.colmin, rtol=1e-12, atol=1e-300)


def test_summary_rejects_non_qbd_on_qbd_path():
    Q = ldqbd_generator([(None, [[-1.0]], [[1.0]]), ([[1.0]], [[-2.0]], [[1.0]])])
    assert resolvent_summary(Q, 1, 5).phi_bar > 0
    with pytest.raises(ValueError):
        resolvent_summary(Q, 1, 5, method="nope")


def _disconnected_toy():
    # phase 0 only climbs, phase 1 only descends; they meet at level 5
    up = np.array([[1.0, 0.0], [0.0, 0.0]])
    down = np.array([[0.0, 0.0], [0.0, 1.0]])
    levels = []
    for k in range(7):
        a0 = np.zeros((2, 2))
        if k == 0:
            a0[1, 0] = 1.0
        if k == 5:
            a0[0, 1] = 1.0
        levels.append((None if k == 0 else down, a0, up))
    return ldqbd_generator(levels, complete_diagonal=True)


def test_find_valid_N_on_disconnected_toy():
    Q = _disconnected_toy()
    assert not resolvent_summary(Q, 0, 4).positive
    found = find_valid_N(Q, 0, 1.0, 1, 30)
    assert found.N == 5 and found.positive
    assert find_valid_N(Q, 0, 1.0, 7, 30).N == 7


def test_find_valid_N_not_found():
    Q = _disconnected_toy()
    with pytest.raises(NotFoundError):
        find_valid_N(Q, 0, 1.0, 1, 4)
    with pytest.raises(NotFoundError):
        find_valid_N(Q, 0, 1.0, 10, 9)
