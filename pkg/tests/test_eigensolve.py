import math
from types import SimpleNamespace

import numpy as np
import pytest

from splinespectra.assembly import SymmetricBandedMatrix, assemble_2d_tensor, assemble_layout
from splinespectra.eigensolve import OracleDivergenceError, oracle_check, solve_gevp
from splinespectra.quadrature import QuadratureSpec
from splinespectra.splines import BlockLayout


def banded_diag(values):
    mat = SymmetricBandedMatrix.zeros(len(values), 0)
    mat.band[0] = values
    return mat


def test_single_dof():
    op = assemble_layout(BlockLayout.fea(2, 1))
    spec = solve_gevp(op)
    assert spec.eigenvalues[0] == pytest.approx(12.0, rel=1e-13)
    assert spec.eigenvalues[0] > math.pi ** 2  # overestimates the exact value


def test_diagonal_pencil():
    op = SimpleNamespace(K=banded_diag([1.0, 2.0, 3.0]),
                         M=banded_diag([1.0, 1.0, 1.0]), n_dofs=3)
    spec = solve_gevp(op)
    assert np.allclose(spec.eigenvalues, [1, 2, 3])
    assert np.allclose(np.abs(spec.eigenvectors), np.eye(3), atol=1e-14)
    # sign convention: largest-magnitude entry positive
    assert np.all(spec.eigenvectors[np.argmax(np.abs(spec.eigenvectors), 0),
                                    np.arange(3)] > 0)


def test_full_spectrum_count_and_order():
    op = assemble_layout(BlockLayout.iga(1000, 2))
    spec = solve_gevp(op)
    assert spec.n_modes == 1000
    assert np.all(spec.eigenvalues > 0)
    assert np.all(np.diff(spec.eigenvalues) >= 0)


@pytest.mark.parametrize("layout,quad", [
    (BlockLayout.iga(40, 2), None),
    (BlockLayout.riga(40, 3, 8), None),
    (BlockLayout.fea(20, 2), None),
    (BlockLayout.iga(40, 2), QuadratureSpec("blended", tau=1.8)),
])
def test_normalization_orthogonality_residual(layout, quad):
    op = assemble_layout(layout, quad)
    spec = solve_gevp(op)
    M = op.M.to_dense()
    K = op.K.to_dense()
    V = spec.eigenvectors
    G = V.T @ M @ V
    assert np.max(np.abs(np.diag(G) - 1.0)) < 1e-10
    off = G - np.diag(np.diag(G))
    assert np.max(np.abs(off)) < 1e-8
    R = K @ V - M @ V * spec.eigenvalues
    assert np.max(np.linalg.norm(R, axis=0)) <= 1e-8 * spec.eigenvalues[-1]


def test_refuses_oversize_dense():
    op = SimpleNamespace(K=None, M=None, n_dofs=10_000)
    with pytest.raises(ValueError):
        solve_gevp(op)


def test_oracle_on_random_modes():
    op = assemble_layout(BlockLayout.iga(100, 2))
    spec = solve_gevp(op)
    rng = np.random.default_rng(0)
    modes = sorted(set(rng.integers(1, spec.n_modes + 1, size=5).tolist()))
    report = oracle_check(op, spec, modes)
    assert report.max_deviation < 1e-9


def test_oracle_single_dof():
    op = assemble_layout(BlockLayout.fea(2, 1))
    spec = solve_gevp(op)
    report = oracle_check(op, spec, [1])
    assert report.max_deviation < 1e-12


def test_oracle_on_degenerate_2d_pair():
    op2 = assemble_2d_tensor(assemble_layout(BlockLayout.iga(8, 2)))
    spec = solve_gevp(op2)
    # modes 2 and 3 are the exactly degenerate (1,2)/(2,1) pair
    assert spec.eigenvalues[1] == pytest.approx(spec.eigenvalues[2], rel=1e-12)
    report = oracle_check(op2, spec, [2, 3])
    assert report.max_deviation < 1e-9


def test_oracle_flags_wrong_eigenvalue():
    op = assemble_layout(BlockLayout.iga(30, 2))
    spec = solve_gevp(op)
    spec.eigenvalues[4] *= 1.05  # corrupt one eigenvalue
    with pytest.raises(OracleDivergenceError):
        oracle_check(op, spec, [5])
