import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lctrunc import (DomainError, RetrialParams, StructureError, ldqbd_generator, load_block_file, load_model,
                     mm1_generator, model_from_descriptor, retrial_generator, save_block_file, validate_qmatrix)
from oracles import retrial_transitions


def test_retrial_s1_blocks():
    Q = retrial_generator(RetrialParams(1, 1.0, 1.0, 1.0))
    am, _, ap = Q.qbd_blocks(2)
    np.testing.assert_array_equal(am, [[0, 2], [0, 0]])
    np.testing.assert_array_equal(ap, [[0, 0], [0, 1]])


def test_retrial_s2_level1_diagonal():
    lam, mu, eta = 1.3, 0.7, 2.1
    a0 = retrial_generator(RetrialParams(2, lam, mu, eta)).qbd_blocks(1)[1]
    np.testing.assert_allclose(np.diag(a0), [-(lam + eta), -(lam + mu + eta), -(lam + 2 * mu)])


def test_retrial_row_sums_s50():
    Q = retrial_generator(RetrialParams.from_rho(0.7))
    for k in range(51):
        am, a0, ap = Q.qbd_blocks(k)
        tot = a0.sum(axis=1) + ap.sum(axis=1) + (0 if am is None else am.sum(axis=1))
        np.testing.assert_allclose(tot, 0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(s=st.integers(1, 6), lam=st.floats(0.1, 4), mu=st.floats(0.1, 4), eta=st.floats(0.1, 4),
       k=st.integers(0, 30))
def test_retrial_matches_transition_rules(s, lam, mu, eta, k):
    am, a0, ap = retrial_generator(RetrialParams(s, lam, mu, eta)).qbd_blocks(k)
    down, local, up = (np.array(b) for b in retrial_transitions(s, lam, mu, eta, k))
    np.testing.assert_allclose(a0, local, atol=1e-12)
    np.testing.assert_allclose(ap, up)
    if k:
        np.testing.assert_allclose(am, down)


@pytest.mark.parametrize("s", [1, 4, 17, 64])
def test_retrial_validates(s):
    assert validate_qmatrix(retrial_generator(RetrialParams(s, 0.8 * s, 1.0, 2.0)), 30, tol=1e-12).passed


def test_params_validation_and_rho():
    p = RetrialParams.from_rho(0.9)
    assert p.s == 50 and p.eta == 50 and p.lam == pytest.approx(45)
    assert p.rho == pytest.approx(0.9) and p.stable
    with pytest.raises(DomainError):
        RetrialParams(0, 1, 1, 1)
    with pytest.raises(DomainError):
        RetrialParams(2, -1, 1, 1)
    with pytest.raises(DomainError):
        RetrialParams(1, 2.0, 1.0, 1.0).require_stable()


def test_ldqbd_matches_mm1():
    Q = ldqbd_generator([([], [[-1]], [[1]]), ([[2]], [[-3]], [[1]])])
    ref = mm1_generator(1.0, 2.0)
    for k in range(6):
        for l in range(max(k - 1, 0), k + 2):
            np.testing.assert_array_equal(Q.block(k, l), ref.block(k, l))


def test_ldqbd_completes_diagonal():
    rng = np.random.default_rng(3)
    levels = [(None if k == 0 else rng.uniform(0, 1, (3, 3)), rng.uniform(0, 1, (3, 3)), rng.uniform(0, 1, (3, 3)))
              for k in range(20)]
    Q = ldqbd_generator(levels, complete_diagonal=True)
    assert validate_qmatrix(Q, 25).passed
    assert not validate_qmatrix(ldqbd_generator(levels), 5).passed


def test_ldqbd_errors():
    with pytest.raises(StructureError):
        ldqbd_generator([])
    with pytest.raises(StructureError):
        ldqbd_generator([(None, [[-1, 1], [1, -1]], [[1]])])


def test_ldqbd_single_level_repeats_without_down_block():
    Q = ldqbd_generator([(None, [[-1.0]], [[1.0]])])
    assert not np.any(Q.qbd_blocks(3)[0])


def test_block_file_roundtrip(tmp_path):
    Q = retrial_generator(RetrialParams(2, 1.0, 1.0, 1.0))
    path = tmp_path / "blocks.json"
    save_block_file(Q, 6, path)
    R = load_block_file(path)
    for k in range(1, 7):
        for a, b in zip(Q.qbd_blocks(k), R.qbd_blocks(k)):
            np.testing.assert_array_equal(a, b)
    # beyond the file the last level repeats
    np.testing.assert_array_equal(R.qbd_blocks(9)[1], Q.qbd_blocks(6)[1])


def test_block_file_rejects_gaps(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps([{"k": 0, "Azero": [[-1]], "Aplus": [[1]]},
                                {"k": 2, "Aminus": [[1]], "Azero": [[-2]], "Aplus": [[1]]}]))
    with pytest.raises(StructureError):
        load_block_file(path)


def test_descriptors(tmp_path):
    Q, p = model_from_descriptor({"model": "retrial", "s": 3, "rho": 0.5, "mu": 2.0})
    assert p.lam == pytest.approx(3.0) and p.eta == 3
    Q, p = model_from_descriptor({"model": "mm1", "lambda": 1, "mu": 2})
    assert p is None and Q.layout.s0 == 1
    save_block_file(mm1_generator(1.0, 2.0), 3, tmp_path / "m.json")
    (tmp_path / "d.json").write_text(json.dumps({"model": "ldqbd_file", "path": "m.json"}))
    Q, p = load_model(tmp_path / "d.json")
    np.testing.assert_array_equal(Q.block(5, 4), [[2.0]])
    with pytest.raises(StructureError):
        model_from_descriptor({"model": "bmap"})
    with pytest.raises(StructureError):
        model_from_descriptor({"model": "retrial", "s": 2})
