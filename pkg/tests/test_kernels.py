import os
import subprocess
import sys

import numpy as np
import pytest

from lctrunc import RetrialParams, SingularityError, retrial_generator, solve_stationary_ldqbd
from lctrunc import kernels

compiled = pytest.mark.skipif(kernels.BACKEND != "compiled", reason="compiled kernels not built")


def random_chain(m, hi, seed):
    # blocks of a random LD-QBD with dominant diagonals
    rng = np.random.default_rng(seed)
    ap = rng.uniform(0, 1, (hi, m, m))
    am = rng.uniform(0, 1, (hi + 1, m, m))
    dg = np.zeros((hi + 1, m, m))
    for k in range(hi + 1):
        dg[k] = np.diag(ap[min(k, hi - 1)].sum(1) + am[k].sum(1) + rng.uniform(0.1, 1, m))
        dg[k] -= rng.uniform(0, 0.05, (m, m)) * (1 - np.eye(m))
    terminal = dg[hi] - np.diag(ap[hi - 1].sum(1))
    return ap, dg, am, terminal


@compiled
@pytest.mark.parametrize("m,hi,lo", [(1, 5, 1), (3, 40, 1), (6, 25, 4), (4, 3, 3)])
def test_rmatrix_backward_backends_agree(m, hi, lo):
    ap, dg, am, terminal = random_chain(m, hi, seed=m * 100 + hi)
    a = kernels.rmatrix_backward(ap, dg, am, terminal, lo, backend="compiled")
    b = kernels.rmatrix_backward(ap, dg, am, terminal, lo, backend="python")
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-300)
    assert np.all(a[:lo] == 0)


@compiled
def test_forward_and_sweep_backends_agree():
    ap, dg, am, terminal = random_chain(4, 30, seed=7)
    R = kernels.rmatrix_backward(ap, dg, am, terminal, 1)
    x0 = np.random.default_rng(1).uniform(0, 1, (5, 4))
    for name in ("forward_rows", "sweep_colmin"):
        fn = getattr(kernels, name)
        a = fn(x0, R, 2, 30, backend="compiled")
        b = fn(x0, R, 2, 30, backend="python")
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-300)
    rows = kernels.forward_rows(x0[0], R, 2, 30)
    direct = x0[0] @ R[2] @ R[3]
    np.testing.assert_allclose(rows[2, 0], direct, rtol=1e-13)
    mins = kernels.sweep_colmin(x0, R, 2, 30)
    np.testing.assert_allclose(mins[1], (x0 @ R[2] @ R[3]).min(axis=0), rtol=1e-13)


@pytest.mark.parametrize("backend", ["python", pytest.param("compiled", marks=compiled)])
def test_singular_block_raises(backend):
    ap = np.ones((3, 2, 2))
    z = np.zeros((4, 2, 2))
    with pytest.raises(SingularityError):
        kernels.rmatrix_backward(ap, z, z, np.zeros((2, 2)), 1, backend=backend)


@compiled
def test_stationary_same_on_both_backends():
    Q = retrial_generator(RetrialParams.from_rho(0.9, s=6))
    a = solve_stationary_ldqbd(Q, 300, backend="compiled").pi
    b = solve_stationary_ldqbd(Q, 300, backend="python").pi
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)


def test_backend_lookup():
    assert kernels.get_backend("python").__name__.endswith("_pykernels")
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_env_forces_python_backend():
    env = dict(os.environ, LCTRUNC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from lctrunc import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
