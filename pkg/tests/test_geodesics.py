import numpy as np
import pytest
import scipy.linalg as sla

from helpers import rand_complex, rand_density, rand_unitary
from holab.curves import TimeGrid
from holab.errors import AntipodalPair, NotHorizontal, NotIsospectral, SingularGram
from holab.geodesics import (
    GeodesicSpec,
    StarMetric,
    dist_g,
    euler_poincare_geodesic,
    hs_geodesic,
    principal_angle_distance,
    qubit_geodesic,
    qubit_xi,
)
from holab.metrics import distance
from holab.operator_core import canonical_amplitude, spectral_decompose


def _spectrum_state(rng, weights):
    u = rand_unitary(rng, len(weights))
    return (u * np.asarray(weights)) @ u.conj().T


def _horizontal_xi(rng, spec):
    # zero diagonal blocks in the eigenbasis makes xi psi0 horizontal
    n = spec.dim
    a = rand_complex(rng, n, n)
    x = (a - a.conj().T) / 2
    for sl in spec.blocks:
        x[sl, sl] = 0
    v = spec.eigenvectors
    return v @ x @ v.conj().T


class TestGreatArc:
    def test_endpoints_and_norm(self, rng):
        a = rand_complex(rng, 2, 2)
        b = rand_complex(rng, 2, 2)
        a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
        arc = hs_geodesic(a, b, TimeGrid(0, 1, 20))
        s = arc.curve.samples
        assert np.allclose(s[0], a) and np.allclose(s[-1], b)
        assert np.allclose(np.linalg.norm(s, axis=(1, 2)), 1.0)

    def test_horizontal_flag(self):
        a = np.diag([0.8, 0.6]).astype(complex)
        assert hs_geodesic(a, np.diag([0.6, 0.8]), TimeGrid(0, 1, 4)).horizontal
        assert not hs_geodesic(a, a @ np.diag([np.exp(0.3j), 1.0]), TimeGrid(0, 1, 4)).horizontal

    def test_antipodal(self):
        a = np.diag([0.8, 0.6]).astype(complex)
        with pytest.raises(AntipodalPair):
            hs_geodesic(a, -a, TimeGrid(0, 1, 4))


class TestStarMetric:
    def test_coadjoint_two_routes(self, rng):
        for n in (2, 3, 4):
            rho = rand_density(rng, n)
            star = StarMetric(rho)
            a = rand_complex(rng, n, n)
            xi = (a - a.conj().T) / 2
            assert np.linalg.norm(star.coadjoint(xi) - star.coadjoint_gram(xi)) < 1e-10

    def test_defining_property(self, rng):
        rho = rand_density(rng, 3)
        star = StarMetric(rho)
        a, b = rand_complex(rng, 3, 3), rand_complex(rng, 3, 3)
        xi, eta = (a - a.conj().T) / 2, (b - b.conj().T) / 2
        assert star(star.coadjoint(xi), eta) == pytest.approx(star(xi, xi @ eta - eta @ xi), abs=1e-12)

    def test_singular(self):
        with pytest.raises(SingularGram):
            StarMetric(np.diag([1.0, 0.0])).coadjoint(np.array([[0, 1], [-1, 0]], dtype=complex))


class TestEulerPoincare:
    def test_qubit_matches_closed_form(self):
        p0, a, th = 0.8, 1.3, 0.4
        spec = spectral_decompose(np.diag([p0, 1 - p0]))
        g = TimeGrid(0, 1.0, 200)
        ep = euler_poincare_geodesic(GeodesicSpec(canonical_amplitude(spec), qubit_xi(a, th), spec), g)
        for t, psi in zip(g.times(), ep.curve.samples):
            assert np.linalg.norm(psi - qubit_geodesic(p0, a, th, t)) < 1e-12

    def test_two_eigenvalue_xi_constant(self, rng):
        rho = _spectrum_state(rng, [0.4, 0.4, 0.2])
        spec = spectral_decompose(rho)
        xi = _horizontal_xi(rng, spec)
        ep = euler_poincare_geodesic(GeodesicSpec(canonical_amplitude(spec), xi, spec), TimeGrid(0, 1, 200))
        assert np.max(np.linalg.norm(ep.xi - ep.xi[0], axis=(1, 2))) < 1e-10

    def test_speed_conserved_three_levels(self, rng):
        rho = _spectrum_state(rng, [0.5, 0.3, 0.2])
        spec = spectral_decompose(rho)
        psi0 = canonical_amplitude(spec)
        xi = _horizontal_xi(rng, spec)
        ep = euler_poincare_geodesic(GeodesicSpec(psi0, xi, spec), TimeGrid(0, np.pi, 1000))
        star = StarMetric(psi0 @ psi0.conj().T)
        speeds = np.array([star(x, x) for x in ep.xi])
        assert np.ptp(speeds) < 1e-8
        assert np.max(np.linalg.norm(ep.xi - ep.xi[0], axis=(1, 2))) > 1e-3

    def test_hamiltonian_generates_curve(self, rng):
        rho = _spectrum_state(rng, [0.5, 0.3, 0.2])
        spec = spectral_decompose(rho)
        ep = euler_poincare_geodesic(GeodesicSpec(canonical_amplitude(spec), _horizontal_xi(rng, spec), spec),
                                     TimeGrid(0, 0.5, 400))
        psi, h = ep.curve.samples, ep.hamiltonian.samples
        dt = ep.curve.grid.dt
        d = (psi[2:] - psi[:-2]) / (2 * dt)
        assert np.max(np.linalg.norm(d - (-1j * h[1:-1] @ psi[1:-1]), axis=(1, 2))) < 1e-4

    def test_rejects_vertical(self):
        spec = spectral_decompose(np.diag([0.7, 0.3]))
        with pytest.raises(NotHorizontal):
            GeodesicSpec(canonical_amplitude(spec), np.diag([1j, -1j]), spec)


class TestDistG:
    @pytest.mark.parametrize("p0", [0.6, 0.75, 0.9])
    @pytest.mark.parametrize("tau", [0.2, np.pi / 4])
    def test_qubit_equals_arc_length(self, p0, tau):
        psi = qubit_geodesic(p0, 1.0, 0.3, tau)
        d = dist_g(np.diag([p0, 1 - p0]), psi @ psi.conj().T)
        assert d.certified
        assert d.value == pytest.approx(tau, abs=1e-6)

    @pytest.mark.parametrize("weights", [[0.4, 0.4, 0.2], [0.3, 0.3, 0.2, 0.2], [0.6, 0.2, 0.2]])
    def test_principal_angle_oracle(self, rng, weights):
        r1 = _spectrum_state(rng, weights)
        u = sla.expm(0.4 * (lambda a: (a - a.conj().T) / 2)(rand_complex(rng, len(weights), len(weights))))
        r2 = u @ r1 @ u.conj().T
        d = dist_g(r1, r2)
        assert d.certified
        assert d.value == pytest.approx(principal_angle_distance(r1, r2), abs=1e-8)

    def test_dominates_bures(self, rng):
        r1 = _spectrum_state(rng, [0.5, 0.3, 0.2])
        u = rand_unitary(rng, 3)
        r2 = u @ r1 @ u.conj().T
        d = dist_g(r1, r2, budget=4)
        assert d.value >= distance("bures", r1, r2) - 1e-10
        assert not d.certified

    def test_trivial_cases(self):
        rho = np.diag([0.7, 0.3])
        assert dist_g(rho, rho).value == 0.0
        assert dist_g(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])).value == pytest.approx(np.pi / 2)

    def test_not_isospectral(self):
        with pytest.raises(NotIsospectral):
            dist_g(np.diag([0.7, 0.3]), np.diag([0.6, 0.4]))
