import numpy as np
import pytest

from lindred.opalg import (
    OperatorSubspace,
    eig_h,
    expm_super,
    hs_inner,
    orthonormalize,
    projector_distance,
    random_hermitian,
    subspace_intersection,
    unvectorize,
    vectorize,
)
from lindred.generator import LindbladGenerator, assemble, apply_super

from conftest import EYE2, LOWER, SX, SY, SZ


class TestHSInner:
    def test_identity_trace(self):
        assert hs_inner(EYE2, EYE2) == pytest.approx(2.0)

    def test_pauli_orthogonality(self):
        assert hs_inner(SX, SY) == pytest.approx(0.0)

    def test_ladder_values(self):
        # direct 2x2 traces: tr(raise^dag lower) = 0, tr(raise^dag raise) = 1
        raise_op = LOWER
        lower_op = LOWER.conj().T
        assert hs_inner(raise_op, lower_op) == pytest.approx(0.0)
        assert hs_inner(raise_op, raise_op) == pytest.approx(1.0)

    def test_conjugate_symmetry(self, rng):
        for _ in range(20):
            a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
            b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
            assert hs_inner(a, b) == pytest.approx(np.conj(hs_inner(b, a)))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            hs_inner(EYE2, np.eye(3))


class TestVectorize:
    def test_identity_column_stacking(self):
        assert np.allclose(vectorize(EYE2), [1, 0, 0, 1])

    def test_sigma_x(self):
        assert np.allclose(vectorize(SX), [0, 1, 1, 0])

    def test_round_trip(self, rng):
        x = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        assert np.array_equal(unvectorize(vectorize(x)), x)

    def test_inner_product_preserved(self, rng):
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        b = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        assert np.vdot(vectorize(a), vectorize(b)) == pytest.approx(hs_inner(a, b))

    def test_bad_length(self):
        with pytest.raises(ValueError):
            unvectorize(np.arange(5, dtype=complex))


class TestOrthonormalize:
    def test_colinear(self):
        assert orthonormalize([SX, 2 * SX]).dim == 1

    def test_full_qubit_basis(self):
        assert orthonormalize([EYE2, SX, SY, SZ]).dim == 4

    def test_all_zero_gives_empty(self):
        sub = orthonormalize([np.zeros((2, 2), dtype=complex)])
        assert sub.dim == 0

    def test_fixed_point_pair(self):
        # rho with L(rho) = 0: the pair {rho, L(rho)} has rank 1
        rho = np.diag([0.25, 0.75]).astype(complex)
        gen = LindbladGenerator(SZ, (np.sqrt(0.5) * SZ,))
        s = assemble(gen)
        img = apply_super(s, rho)
        assert np.max(np.abs(img)) < 1e-14
        assert orthonormalize([rho, img]).dim == 1

    def test_idempotent(self, rng):
        ops = [rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
               for _ in range(4)]
        first = orthonormalize(ops)
        second = orthonormalize(first.basis_ops())
        assert second.dim == first.dim
        assert projector_distance(first, second) < 1e-9

    def test_projector_identity_on_generators(self, rng):
        ops = [rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
               for _ in range(3)]
        sub = orthonormalize(ops)
        pi = sub.projector_matrix()
        assert np.max(np.abs(pi @ pi - pi)) < 1e-9
        for op in ops:
            v = vectorize(op)
            assert np.max(np.abs(pi @ v - v)) < 1e-9 * max(np.linalg.norm(v), 1)

    def test_rejects_bad_tol(self):
        with pytest.raises(ValueError):
            orthonormalize([SX], tol=0.0)


class TestSpectral:
    def test_expm_zero(self):
        s = np.zeros((4, 4), dtype=complex)
        assert np.allclose(expm_super(s, 3.7), np.eye(4))

    def test_expm_semigroup(self, rng):
        gen = LindbladGenerator(random_hermitian(rng, 2),
                                (rng.standard_normal((2, 2)) + 0j,))
        s = assemble(gen)
        lhs = expm_super(s, 0.7) @ expm_super(s, 1.1)
        rhs = expm_super(s, 1.8)
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)

    def test_bloch_rotation(self):
        s = assemble(LindbladGenerator(SZ / 2))
        rotated = apply_super(expm_super(s, np.pi), SX)
        assert np.max(np.abs(rotated + SX)) < 1e-12

    def test_eig_h_sigma_z(self):
        vals, vecs = eig_h(SZ)
        assert np.allclose(vals, [-1.0, 1.0])
        assert np.max(np.abs(vecs.conj().T @ vecs - np.eye(2))) < 1e-10

    def test_eig_h_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            eig_h(LOWER)


def test_subspace_intersection(rng):
    a = orthonormalize([EYE2, SX])
    b = orthonormalize([SX, SY])
    inter = subspace_intersection(a, b)
    assert inter.dim == 1
    assert inter.contains(SX)
