"""Hilbert-Schmidt great arcs, Euler-Poincaré horizontal geodesics and dist_g."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import least_squares

from .connections import ConnectionKind, interferometric_connection
from .curves import OperatorCurve, TimeGrid
from .errors import AntipodalPair, NotHorizontal, NotIsospectral, SingularGram
from .operator_core import (
    DEGENERACY_TOL,
    SpectralData,
    check_amplitude,
    check_density,
    cluster_spectrum,
    dag,
    expm_skew,
    hermitian_part,
    skew_part,
)

GEODESIC_MODES = ("hs_arc", "euler_poincare", "two_eigenvalue_exact")
HORIZONTAL_TOL = 1e-9
CERTIFY_DEFECT = 1e-8


# Hilbert-Schmidt great arcs

@dataclass(frozen=True)
class GreatArc:
    curve: OperatorCurve
    horizontal: bool


def hs_geodesic(psi0, psi1, grid: TimeGrid, tol: float = HORIZONTAL_TOL) -> GreatArc:
    """Normalized linear interpolation between two unit amplitudes.

    ``horizontal`` reports whether psi0^dagger psi1 is Hermitian, the
    condition for the arc to be horizontal for the mechanical connection.
    """
    a = check_amplitude(psi0)
    b = check_amplitude(psi1)
    if a.shape != b.shape:
        raise ValueError("amplitudes must have the same shape")
    if np.linalg.norm(a + b) < 1e-12:
        raise AntipodalPair("psi1 = -psi0 has no unique connecting arc")
    s = (grid.times() - grid.t0) / grid.duration
    lin = (1.0 - s)[:, None, None] * a + s[:, None, None] * b
    lin = lin / np.linalg.norm(lin, axis=(-2, -1))[:, None, None]
    lin[0], lin[-1] = a, b
    m = dag(a) @ b
    return GreatArc(OperatorCurve(grid, lin, "amplitude"), bool(np.linalg.norm(m - dag(m)) <= tol))


# Euler-Poincaré geodesics

@dataclass(frozen=True)
class GeodesicSpec:
    psi0: np.ndarray
    xi0: np.ndarray
    spectrum: SpectralData
    mode: str = "euler_poincare"

    def __post_init__(self):
        if self.mode not in GEODESIC_MODES:
            raise ValueError(f"unknown geodesic mode {self.mode!r}")
        psi = check_amplitude(self.psi0)
        xi = np.asarray(self.xi0, dtype=complex)
        if xi.shape != (psi.shape[0], psi.shape[0]):
            raise ValueError("xi0 must be an n x n matrix acting on the amplitude")
        if np.linalg.norm(xi + dag(xi)) > 1e-12 * max(1.0, float(np.linalg.norm(xi))):
            raise ValueError("xi0 must be skew-Hermitian")
        if self.mode != "hs_arc":
            a = interferometric_connection(ConnectionKind.interferometric(self.spectrum), psi, xi @ psi)
            if np.linalg.norm(a) > HORIZONTAL_TOL:
                raise NotHorizontal(f"initial velocity has vertical part of norm {np.linalg.norm(a):.3e}")


class StarMetric:
    """The metric zeta * eta = -1/2 tr((zeta eta + eta zeta) rho0) on u(n).

    In the eigenbasis of rho0 it is the weighted Hilbert-Schmidt product with
    weights (p_a + p_b)/2, which is what ``coadjoint`` inverts.
    """

    def __init__(self, rho0: np.ndarray):
        r = hermitian_part(np.asarray(rho0, dtype=complex))
        self.rho0 = r
        w, v = np.linalg.eigh(r)
        self.p = w
        self.basis = v
        self.weights = 0.5 * (w[:, None] + w[None, :])
        self.singular = bool(np.any(w <= 1e-12 * len(w) * w[-1]))

    def __call__(self, zeta, eta) -> float:
        return float(-0.5 * np.real(np.trace((zeta @ eta + eta @ zeta) @ self.rho0)))

    def coadjoint(self, xi: np.ndarray) -> np.ndarray:
        """ad*_xi xi, the element with (ad*_xi xi) * eta = xi * [xi, eta] for all eta."""
        if self.singular:
            raise SingularGram("the * metric is degenerate on a non-faithful state")
        v = self.basis
        xe = dag(v) @ xi @ v
        ke = self.weights * xe
        ce = ke @ xe - xe @ ke
        return skew_part(v @ (ce / self.weights) @ dag(v))

    def gram(self) -> tuple[list[np.ndarray], np.ndarray]:
        basis = u_basis(self.rho0.shape[0])
        g = np.array([[self(a, b) for b in basis] for a in basis])
        return basis, g

    def coadjoint_gram(self, xi: np.ndarray) -> np.ndarray:
        """Same quantity through a linear solve against the Gram matrix of a basis of u(n)."""
        basis, g = self.gram()
        if np.linalg.cond(g) > 1e12:
            raise SingularGram("the * metric Gram matrix is singular")
        rhs = np.array([self(xi, xi @ e - e @ xi) for e in basis])
        c = np.linalg.solve(g, rhs)
        return sum(ci * e for ci, e in zip(c, basis))


def u_basis(n: int) -> list[np.ndarray]:
    """Real basis of the skew-Hermitian n x n matrices."""
    out = []
    for a in range(n):
        m = np.zeros((n, n), dtype=complex)
        m[a, a] = 1j
        out.append(m)
        for b in range(a + 1, n):
            m = np.zeros((n, n), dtype=complex)
            m[a, b], m[b, a] = 1.0, -1.0
            out.append(m)
            m = np.zeros((n, n), dtype=complex)
            m[a, b], m[b, a] = 1j, 1j
            out.append(m)
    return out


class EulerPoincareResult(NamedTuple):
    curve: OperatorCurve
    hamiltonian: OperatorCurve
    xi: np.ndarray


def euler_poincare_geodesic(spec: GeodesicSpec, grid: TimeGrid) -> EulerPoincareResult:
    """Integrate xi' = ad*_xi xi (RK4) and U' = U xi (midpoint exponentials).

    Returns psi_t = U_t psi0, the Hamiltonian H_t = i U_t xi_t U_t^dagger that
    generates it, and the body velocities xi_t.
    """
    psi0 = check_amplitude(spec.psi0)
    metric = StarMetric(psi0 @ dag(psi0))
    rhs = metric.coadjoint
    dt = grid.dt
    n = psi0.shape[0]
    xis = np.empty((grid.steps + 1, n, n), dtype=complex)
    us = np.empty_like(xis)
    xis[0] = np.asarray(spec.xi0, dtype=complex)
    us[0] = np.eye(n)
    for i in range(grid.steps):
        x = xis[i]
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * dt * k1)
        k3 = rhs(x + 0.5 * dt * k2)
        k4 = rhs(x + dt * k3)
        nxt = skew_part(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        # cubic Hermite value at the step midpoint
        mid = 0.5 * (x + nxt) + dt / 8.0 * (k1 - rhs(nxt))
        xis[i + 1] = nxt
        us[i + 1] = us[i] @ expm_skew(dt * mid)
    psis = us @ psi0
    ham = hermitian_part(1j * us @ xis @ dag(us))
    return EulerPoincareResult(
        OperatorCurve(grid, psis, "amplitude"),
        OperatorCurve(grid, ham, "hermitian"),
        xis,
    )


# dist_g

@dataclass(frozen=True)
class DistG:
    value: float
    certified: bool
    defect: float
    xi: np.ndarray | None = None

    def __iter__(self):
        return iter((self.value, self.certified))


def _isospectral(rho1: np.ndarray, rho2: np.ndarray, tol: float) -> np.ndarray:
    w1 = np.linalg.eigvalsh(rho1)[::-1]
    w2 = np.linalg.eigvalsh(rho2)[::-1]
    if np.max(np.abs(w1 - w2)) > tol:
        raise NotIsospectral(f"spectra differ by {np.max(np.abs(w1 - w2)):.3e}")
    return w1


class _Shooter:
    """Constant horizontal xi in the eigenbasis of rho1, parametrized by its off-block entries."""

    def __init__(self, rho1: np.ndarray, rho2: np.ndarray, degeneracy_tol: float):
        w, v = np.linalg.eigh(rho1)
        w, v = w[::-1], v[:, ::-1]
        self.w, self.v, self.target = w, v, rho2
        n = len(w)
        support = w > 1e-12 * n * w[0]
        labels = np.full(n, -1)
        for c, members in enumerate(cluster_spectrum(w[support], degeneracy_tol)):
            labels[np.flatnonzero(support)[members]] = c
        self.n_clusters = len(set(labels.tolist()))
        pairs = [(a, b) for a in range(n) for b in range(a + 1, n) if labels[a] != labels[b]]
        self.rows = np.array([p[0] for p in pairs], dtype=int)
        self.cols = np.array([p[1] for p in pairs], dtype=int)
        self.weights = 0.5 * (w[:, None] + w[None, :])
        self.iu = np.triu_indices(n)

    @property
    def n_params(self) -> int:
        return 2 * len(self.rows)

    def xi_eigen(self, x: np.ndarray) -> np.ndarray:
        n = len(self.w)
        m = len(self.rows)
        z = x[:m] + 1j * x[m:]
        xe = np.zeros((n, n), dtype=complex)
        xe[self.rows, self.cols] = z
        xe[self.cols, self.rows] = -np.conj(z)
        return xe

    def arrival(self, x: np.ndarray) -> np.ndarray:
        u = self.v @ expm_skew(self.xi_eigen(x))
        return (u * self.w) @ dag(u)

    def residual(self, x: np.ndarray) -> np.ndarray:
        d = (self.arrival(x) - self.target)[self.iu]
        return np.concatenate([d.real, d.imag])

    def length(self, x: np.ndarray) -> float:
        xe = self.xi_eigen(x)
        return float(np.sqrt(np.sum(self.weights * np.abs(xe) ** 2)))

    def defect(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(self.arrival(x) - self.target))


def dist_g(rho1, rho2, spectrum: SpectralData | None = None, budget: int = 8, seed: int = 0,
           degeneracy_tol: float = DEGENERACY_TOL) -> DistG:
    """Length of the shortest constant-xi horizontal geodesic from rho1 to rho2.

    Exact and certified for two distinct eigenvalues when the arrival defect
    is below 1e-8 and the length is at most pi/2; an upper bound otherwise.
    ``budget`` is the number of random restarts.
    """
    r1 = check_density(rho1)
    r2 = check_density(rho2)
    w = _isospectral(r1, r2, degeneracy_tol)
    if spectrum is not None:
        ref = np.zeros(len(w))
        ref[:spectrum.rank] = spectrum.weights
        if np.max(np.abs(ref - w)) > degeneracy_tol:
            raise NotIsospectral("states do not carry the given spectrum")
    if np.linalg.norm(r1 - r2) < 1e-14:
        return DistG(0.0, True, 0.0)
    if np.linalg.norm(r1 @ r2) < 1e-12:
        return DistG(float(np.pi / 2), True, 0.0)
    shooter = _Shooter(r1, r2, degeneracy_tol)
    two_values = shooter.n_clusters <= 2
    rng = np.random.default_rng(seed)
    best_x, best_len, best_def = None, np.inf, np.inf
    fallback_x, fallback_def = None, np.inf
    for attempt in range(max(int(budget), 1)):
        scale = rng.uniform(0.05, 1.5)
        x0 = scale * rng.standard_normal(shooter.n_params)
        x = _solve_shortest(shooter, x0)
        d = shooter.defect(x)
        if d < fallback_def:
            fallback_x, fallback_def = x, d
        if d < CERTIFY_DEFECT:
            ln = shooter.length(x)
            if ln < best_len - 1e-12:
                best_x, best_len, best_def = x, ln, d
    if best_x is None:
        return DistG(shooter.length(fallback_x), False, fallback_def, _to_standard(shooter, fallback_x))
    certified = two_values and best_len <= np.pi / 2 + 1e-8
    return DistG(best_len, bool(certified), best_def, _to_standard(shooter, best_x))


def _to_standard(shooter: _Shooter, x: np.ndarray) -> np.ndarray:
    return shooter.v @ shooter.xi_eigen(x) @ dag(shooter.v)


def _solve_shortest(shooter: _Shooter, x0: np.ndarray) -> np.ndarray:
    """Reach the target, then slide along the solution set toward smaller length.

    A length penalty with a decreasing weight pulls the arrival point toward the
    shortest solution; a final unpenalized solve restores the arrival defect.
    """
    sw = np.sqrt(np.concatenate([shooter.weights[shooter.rows, shooter.cols]] * 2))
    opts = dict(method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
    x = least_squares(shooter.residual, x0, **opts).x
    for mu in (1.0, 0.3, 1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8):
        x = least_squares(lambda y, m=mu: np.concatenate([shooter.residual(y), m * sw * y]), x, **opts).x
    return least_squares(shooter.residual, x, **opts).x


def principal_angle_distance(rho1, rho2, degeneracy_tol: float = DEGENERACY_TOL) -> float:
    """Closed form of dist_g for states with two distinct eigenvalues p > q.

    The states are fixed by the p-eigenspaces; with principal angles theta_i
    between them, dist_g = sqrt((p + q) sum theta_i^2).
    """
    from scipy.linalg import subspace_angles

    r1 = check_density(rho1)
    r2 = check_density(rho2)
    w = _isospectral(r1, r2, degeneracy_tol)
    clusters = cluster_spectrum(w, degeneracy_tol)
    if len(clusters) != 2:
        raise ValueError("closed form needs exactly two distinct eigenvalues")
    m = len(clusters[0])
    p, q = float(np.mean(w[clusters[0]])), float(np.mean(w[clusters[1]]))
    v1 = np.linalg.eigh(r1)[1][:, ::-1][:, :m]
    v2 = np.linalg.eigh(r2)[1][:, ::-1][:, :m]
    theta = subspace_angles(v1, v2)
    return float(np.sqrt((p + q) * np.sum(theta ** 2)))


def qubit_geodesic(p0: float, a: float, theta: float, t) -> np.ndarray:
    """Amplitude of the constant-xi qubit geodesic with xi_21 = a e^{i theta}, rho0 = diag(p0, 1 - p0)."""
    p1 = 1.0 - p0
    c, s = np.cos(a * t), np.sin(a * t)
    e = np.exp(1j * theta)
    return np.array([
        [np.sqrt(p0) * c, -np.sqrt(p1) * np.conj(e) * s],
        [np.sqrt(p0) * e * s, np.sqrt(p1) * c],
    ])


def qubit_xi(a: float, theta: float) -> np.ndarray:
    e = np.exp(1j * theta)
    return np.array([[0.0, -a * np.conj(e)], [a * e, 0.0]])
