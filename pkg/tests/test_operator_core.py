import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import rand_density, rand_hermitian, rand_tangent
from holab.bloch import density_from_bloch, qubit_closed_forms
from holab.errors import (
    DimensionMismatch,
    InvalidState,
    NegativeEigenvalue,
    NonHermitian,
    SingularState,
)
from holab.operator_core import (
    PAULI_X,
    affinity,
    amplitude_sqrt,
    canonical_amplitude,
    check_amplitude,
    check_density,
    fidelity,
    hs_products,
    sld,
    spectral_decompose,
    sqrt_differential,
)


class TestSpectralDecompose:
    def test_maximally_mixed_qubit(self):
        s = spectral_decompose(np.eye(2) / 2)
        assert np.allclose(s.distinct_values, [0.5])
        assert s.degeneracies == (2,)
        assert np.allclose(s.projectors[0], np.eye(2))

    def test_diagonal_qubit(self):
        s = spectral_decompose(np.diag([0.75, 0.25]))
        assert np.allclose(s.weights, [0.75, 0.25])
        assert s.degeneracies == (1, 1)
        assert np.allclose(s.projectors[0], np.diag([1, 0]))
        assert np.allclose(s.projectors[1], np.diag([0, 1]))

    def test_rank_deficient_excludes_zero(self):
        s = spectral_decompose(np.diag([0.6, 0.4, 0.0]))
        assert s.rank == 2 and not s.faithful
        assert s.eigenvectors.shape == (3, 2)

    def test_degenerate_cluster(self):
        s = spectral_decompose(np.diag([0.4, 0.4, 0.2]))
        assert s.degeneracies == (2, 1)
        assert np.allclose(s.fiber_projectors[0], np.diag([1, 1, 0]))

    @pytest.mark.parametrize("n", range(2, 9))
    def test_reconstruct_random(self, rng, n):
        rho = rand_density(rng, n)
        s = spectral_decompose(rho)
        assert np.linalg.norm(s.reconstruct() - rho) < 1e-12
        assert abs(sum(P * m for P, m in zip(s.distinct_values, s.degeneracies)) - 1) < 1e-10
        for a, pa in enumerate(s.projectors):
            for b, pb in enumerate(s.projectors):
                assert np.linalg.norm(pa @ pb - (pa if a == b else 0)) < 1e-10
            assert np.linalg.matrix_rank(pa) == s.degeneracies[a]

    def test_rejects_non_hermitian(self):
        with pytest.raises(NonHermitian):
            spectral_decompose(np.array([[0.5, 0.1], [0.0, 0.5]]))

    def test_rejects_negative(self):
        with pytest.raises(NegativeEigenvalue):
            spectral_decompose(np.diag([1.1, -0.1]))

    def test_rejects_bad_trace(self):
        with pytest.raises(InvalidState):
            check_density(np.diag([0.6, 0.6]))

    def test_tolerates_tiny_negative(self):
        rho = check_density(np.diag([1.0 + 5e-13, -5e-13]))
        psi = amplitude_sqrt(rho)
        assert np.allclose(psi @ psi.conj().T, np.diag([1.0, 0.0]))


class TestAmplitudes:
    def test_sqrt_maximally_mixed(self):
        assert np.allclose(amplitude_sqrt(np.eye(2) / 2), np.eye(2) / np.sqrt(2))

    def test_sqrt_matches_bloch_closed_form(self, rng):
        v = rng.normal(size=3)
        v *= 0.8 / np.linalg.norm(v)
        assert np.linalg.norm(amplitude_sqrt(density_from_bloch(v)) - qubit_closed_forms(v).sqrt) < 1e-12

    def test_sqrt_matches_scipy(self, rng):
        rho = rand_density(rng, 3)
        psi = amplitude_sqrt(rho)
        assert np.linalg.norm(psi - sla.sqrtm(rho)) < 1e-10
        assert np.linalg.norm(psi @ psi - rho) < 1e-12

    def test_rank_deficient_amplitude(self, rng):
        rho = rand_density(rng, 4, rank=2)
        psi = amplitude_sqrt(rho)
        assert psi.shape == (4, 2)
        assert np.linalg.norm(psi @ psi.conj().T - rho) < 1e-10

    def test_canonical_amplitude_in_fiber(self, rng):
        s = spectral_decompose(rand_density(rng, 3))
        psi = canonical_amplitude(s)
        assert np.linalg.norm(psi.conj().T @ psi - s.fiber_operator()) < 1e-12

    def test_check_amplitude_norm(self):
        with pytest.raises(InvalidState):
            check_amplitude(np.eye(2))


class TestSld:
    def test_maximally_mixed(self):
        assert np.allclose(sld(np.eye(2) / 2, PAULI_X / 2), PAULI_X)

    def test_commuting_tangent(self):
        rho = np.diag([0.5, 0.3, 0.2])
        v = np.diag([0.1, -0.04, -0.06])
        assert np.allclose(sld(rho, v), v @ np.linalg.inv(rho))

    @pytest.mark.parametrize("seed", range(5))
    def test_residual_and_sylvester_oracle(self, seed):
        rng = np.random.default_rng(seed)
        rho = rand_density(rng, 4)
        v = rand_tangent(rng, 4)
        L = sld(rho, v)
        assert np.linalg.norm(0.5 * (rho @ L + L @ rho) - v) < 1e-11
        assert np.linalg.norm(L - sla.solve_sylvester(rho / 2, rho / 2, v)) < 1e-9

    def test_requires_faithful(self):
        with pytest.raises(SingularState):
            sld(np.diag([1.0, 0.0]), PAULI_X)


class TestFidelityAffinity:
    def test_identical(self, rng):
        rho = rand_density(rng, 3)
        assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)
        assert affinity(rho, rho) == pytest.approx(1.0, abs=1e-10)

    def test_orthogonal_pure(self):
        assert fidelity(np.diag([1.0, 0]), np.diag([0, 1.0])) == pytest.approx(0.0, abs=1e-12)
        assert affinity(np.diag([1.0, 0]), np.diag([0, 1.0])) == pytest.approx(0.0, abs=1e-12)

    def test_affinity_swapped_qubit(self):
        assert affinity(np.diag([0.75, 0.25]), np.diag([0.25, 0.75])) == pytest.approx(2 * np.sqrt(3 / 16), abs=1e-12)

    def test_pure_states_overlap(self, rng):
        a = rng.normal(size=3) + 1j * rng.normal(size=3)
        b = rng.normal(size=3) + 1j * rng.normal(size=3)
        a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
        f = fidelity(np.outer(a, a.conj()), np.outer(b, b.conj()))
        assert f == pytest.approx(abs(np.vdot(a, b)), abs=1e-7)

    def test_qubit_root_convention(self, rng):
        # for qubits tr(r1 r2) + 2 sqrt(det r1 det r2) is F squared, not F
        r1, r2 = rand_density(rng, 2), rand_density(rng, 2)
        f2 = np.trace(r1 @ r2).real + 2 * np.sqrt(np.linalg.det(r1).real * np.linalg.det(r2).real)
        assert fidelity(r1, r2) ** 2 == pytest.approx(f2, abs=1e-10)
        oracle = np.trace(sla.sqrtm(sla.sqrtm(r2) @ r1 @ sla.sqrtm(r2))).real
        assert fidelity(r1, r2) == pytest.approx(oracle, abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            fidelity(np.eye(2) / 2, np.eye(3) / 3)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 4))
    def test_symmetric_and_bounded(self, seed, n):
        rng = np.random.default_rng(seed)
        r1, r2 = rand_density(rng, n), rand_density(rng, n)
        f12, f21 = fidelity(r1, r2), fidelity(r2, r1)
        assert abs(f12 - f21) < 1e-10
        assert -1e-12 <= f12 <= 1 + 1e-10
        assert affinity(r1, r2) <= f12 + 1e-10


class TestHsProducts:
    def test_unit_self(self, rng):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        a /= np.linalg.norm(a)
        g, w = hs_products(a, a)
        assert g == pytest.approx(1.0) and w == pytest.approx(0.0, abs=1e-15)

    def test_imaginary_overlap(self, rng):
        a = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
        a /= np.linalg.norm(a)
        g, w = hs_products(a, 1j * a)
        assert g == pytest.approx(0.0, abs=1e-14) and w == pytest.approx(2.0)

    def test_elementwise_oracle_and_scale_flag(self, rng):
        a = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
        b = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
        g, w = hs_products(a, b)
        s = np.sum(np.conj(a) * b)
        assert g == pytest.approx(0.5 * np.trace(a.conj().T @ b + b.conj().T @ a).real, abs=1e-13)
        assert w == pytest.approx((-1j * (s - np.conj(s))).real, abs=1e-13)
        assert hs_products(a, b, double=True)[0] == pytest.approx(2 * g, abs=1e-13)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            hs_products(np.eye(2), np.eye(3))


def test_skew_identity_pure_state(rng):
    from holab.metrics import skew_information

    v = rng.normal(size=3) + 1j * rng.normal(size=3)
    v /= np.linalg.norm(v)
    rho = np.outer(v, v.conj())
    a = rand_hermitian(rng, 3)
    var = np.trace(rho @ a @ a).real - np.trace(rho @ a).real ** 2
    # the square root of the rounding-level null eigenvalues contributes ~1e-8
    assert skew_information(rho, a) == pytest.approx(var, abs=1e-7)


def test_sqrt_differential_matches_finite_difference(rng):
    rho = rand_density(rng, 3)
    v = rand_tangent(rng, 3)
    h = 1e-6
    fd = (sla.sqrtm(rho + h * v) - sla.sqrtm(rho - h * v)) / (2 * h)
    assert np.linalg.norm(sqrt_differential(rho, v) - fd) < 1e-6
