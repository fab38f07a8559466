"""Energy statistics, orbit decompositions, quantum speed limits and uncertainty relations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .connections import ConnectionKind, interferometric_connection
from .curves import HamiltonianSpec, OperatorCurve
from .errors import FiberMismatch, HypothesisViolated
from .geodesics import dist_g
from .metrics import distance, is_pure, skew_information, trapezoid
from .operator_core import (
    FIBER_TOL,
    SpectralData,
    canonical_amplitude,
    check_density,
    check_hermitian,
    dag,
    hermitian_part,
)

BOUND_NAMES = ("mt", "ml", "uhlmann", "wy", "mixed_ml", "interferometric")
PARALLEL_TOL = 1e-9
ORTHOGONAL_TOL = 1e-9


@dataclass(frozen=True)
class ObservableStats:
    expectation: float
    variance: float
    skew_info: float


def observable_stats(rho, a) -> ObservableStats:
    r = check_density(rho)
    x = check_hermitian(a, what="observable")
    e = float(np.real(np.trace(r @ x)))
    var = float(np.real(np.trace(r @ x @ x))) - e * e
    return ObservableStats(e, var, skew_information(r, x))


def _energy_variances(dens: np.ndarray, hs: np.ndarray) -> np.ndarray:
    e = np.real(np.einsum("tij,tji->t", dens, hs))
    e2 = np.real(np.einsum("tij,tjk,tki->t", dens, hs, hs))
    return np.clip(e2 - e * e, 0.0, None)


# Hamiltonian vector fields on isospectral orbits

@dataclass(frozen=True)
class OrbitDecomposition:
    horizontal_sq: float
    inertia_sq: float
    xi: np.ndarray
    is_parallel: bool
    is_perpendicular: bool


def _matching_amplitude(rho, spectrum: SpectralData) -> tuple[np.ndarray, np.ndarray]:
    r = check_density(rho)
    if r.shape[0] != spectrum.dim or np.linalg.norm(spectrum.reconstruct() - r) > FIBER_TOL:
        raise FiberMismatch("density operator does not match the spectral data")
    return r, canonical_amplitude(spectrum)


def _star(zeta: np.ndarray, eta: np.ndarray, q: np.ndarray) -> float:
    """(zeta | eta) = -1/2 tr((zeta eta + eta zeta) q)."""
    return float(-0.5 * np.real(np.trace((zeta @ eta + eta @ zeta) @ q)))


def _vertical_generator(psi: np.ndarray, h: np.ndarray, spectrum: SpectralData) -> np.ndarray:
    kind = ConnectionKind.interferometric(spectrum)
    return interferometric_connection(kind, psi, -1j * h @ psi)


def orbit_decompose(rho, h, spectrum: SpectralData) -> OrbitDecomposition:
    """Split var(H) into the horizontal speed g(X_H, X_H) and the inertia (zeta_H | zeta_H)."""
    r, psi = _matching_amplitude(rho, spectrum)
    x = check_hermitian(h, what="Hamiltonian")
    q = spectrum.fiber_operator()
    xi = _vertical_generator(psi, x, spectrum)
    unit = -1j * np.eye(q.shape[0])
    zeta = xi - _star(xi, unit, q) * unit
    inertia = _star(zeta, zeta, q)
    var = observable_stats(r, x).variance
    xh = -1j * (x @ r - r @ x)
    return OrbitDecomposition(
        horizontal_sq=var - inertia,
        inertia_sq=inertia,
        xi=xi,
        is_parallel=bool(np.linalg.norm(xi) < PARALLEL_TOL),
        is_perpendicular=bool(np.linalg.norm(xh) < PARALLEL_TOL),
    )


# uncertainty relations

@dataclass(frozen=True)
class UncertaintyReport:
    rs: float
    geometric: float
    lhs: float
    g: float
    omega: float
    g_vertical: float

    def __iter__(self):
        return iter((self.rs, self.geometric, self.lhs))


def _split(psi: np.ndarray, a: np.ndarray, e: float, spectrum: SpectralData) -> tuple[np.ndarray, np.ndarray]:
    """Horizontal and mean-free vertical parts of -i (A - E) psi."""
    full = -1j * (a - e * np.eye(a.shape[0])) @ psi
    vert = psi @ _vertical_generator(psi, a - e * np.eye(a.shape[0]), spectrum)
    return full - vert, vert


def uncertainty_bounds(rho, a, b, spectrum: SpectralData) -> UncertaintyReport:
    """Robertson-Schrödinger and geometric lower bounds on 4 var_A var_B.

    ``g`` and ``g_vertical`` are the doubled Hilbert-Schmidt products of the
    horizontal and vertical parts, so the covariance term equals their sum and
    rs = geometric + g_vertical^2 + 2 g g_vertical.
    """
    r, psi = _matching_amplitude(rho, spectrum)
    x = check_hermitian(a, what="observable A")
    y = check_hermitian(b, what="observable B")
    sa = observable_stats(r, x)
    sb = observable_stats(r, y)
    cov2 = float(np.real(np.trace(r @ (x @ y + y @ x)))) - 2.0 * sa.expectation * sb.expectation
    comm = np.trace(r @ (x @ y - y @ x))
    rs = cov2 ** 2 + float(np.abs(comm)) ** 2
    ha, va = _split(psi, x, sa.expectation, spectrum)
    hb, vb = _split(psi, y, sb.expectation, spectrum)
    g = 2.0 * float(np.real(np.vdot(ha, hb)))
    gv = 2.0 * float(np.real(np.vdot(va, vb)))
    omega = float(np.real(-1j * comm))
    return UncertaintyReport(rs, g * g + omega * omega, 4.0 * sa.variance * sb.variance, g, omega, gv)


# speed limits

def tangency_beta(tol: float = 1e-12) -> float:
    """The slope beta with 1 - beta x tangent to cos x on (0, pi).

    The tangency point solves 1 - x sin x = cos x; beta = sin of that point.
    """
    lo, hi = np.pi / 2, np.pi
    f = lambda x: 1.0 - x * np.sin(x) - np.cos(x)  # noqa: E731
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return float(np.sin(0.5 * (lo + hi)))


@dataclass
class QslReport:
    tau: float
    bound_mt: float | None = None
    bound_ml: float | None = None
    bound_uhlmann: float | None = None
    bound_wy: float | None = None
    bound_mixed_ml: float | None = None
    bound_mixed_ml_bures: float | None = None
    bound_interferometric: float | None = None
    interferometric_estimate: bool = False
    mean_uncertainty: float = 0.0
    skipped: dict[str, str] = field(default_factory=dict)

    @property
    def tightness(self) -> dict[str, float]:
        out = {}
        for name in BOUND_NAMES:
            v = getattr(self, f"bound_{name}")
            if v is not None and self.tau > 0:
                out[name] = v / self.tau
        return out

    def bounds(self) -> dict[str, float | None]:
        return {name: getattr(self, f"bound_{name}") for name in BOUND_NAMES}


def _commuting_family(hs: np.ndarray, tol: float = 1e-10) -> bool:
    h0 = hs[0]
    scale = max(1.0, float(np.max(np.linalg.norm(hs, axis=(-2, -1)))))
    return all(np.linalg.norm(h0 @ h - h @ h0) <= tol * scale ** 2 for h in hs[1:]) and all(
        np.linalg.norm(hs[i] @ hs[i + 1] - hs[i + 1] @ hs[i]) <= tol * scale ** 2 for i in range(len(hs) - 1)
    )


def _joint_eigenbasis(hs: np.ndarray, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    c = rng.uniform(0.5, 1.5, size=len(hs))
    return np.linalg.eigh(hermitian_part(np.einsum("t,tij->ij", c, hs)))[1]


def qsl_evaluate(curve: OperatorCurve, h: HamiltonianSpec, require: Iterable[str] = (),
                 dist_budget: int = 8) -> QslReport:
    """Every speed limit whose hypotheses hold for the evolution ``curve`` generated by ``h``.

    Bounds whose hypotheses fail are left out and the reason is kept in
    ``skipped``; names listed in ``require`` raise HypothesisViolated instead.
    """
    grid = curve.grid
    dens = curve.densities()
    hs = h.on_grid(grid)
    tau = grid.duration
    rho0, rhot = check_density(dens[0]), check_density(dens[-1])
    n = rho0.shape[0]
    report = QslReport(tau=tau)

    dE = np.sqrt(_energy_variances(dens, hs))
    mean_dE = trapezoid(dE, grid.dt) / tau
    report.mean_uncertainty = mean_dE
    pure = is_pure(rho0)

    def per_unit(d: float, speed: float) -> float:
        if speed <= 0:
            return 0.0 if d <= 1e-12 else float(np.inf)
        return float(d / speed)

    d_bures = distance("bures", rho0, rhot)
    report.bound_uhlmann = per_unit(d_bures, mean_dE)
    skew = np.array([skew_information(r, x) for r, x in zip(dens, hs)])
    mean_wy = trapezoid(np.sqrt(2.0 * np.clip(skew, 0.0, None)), grid.dt) / tau
    report.bound_wy = per_unit(distance("wigner_yanase", rho0, rhot), mean_wy)

    try:
        dg = dist_g(rho0, rhot, budget=dist_budget)
        report.bound_interferometric = per_unit(dg.value, mean_dE)
        report.interferometric_estimate = not dg.certified
    except Exception as exc:  # noqa: BLE001 - recorded, not fatal
        report.skipped["interferometric"] = f"dist_g failed: {exc}"

    if pure:
        report.bound_mt = per_unit(distance("fubini_study", rho0, rhot), mean_dE)
    elif report.bound_interferometric is not None:
        report.bound_mt = report.bound_interferometric
    else:
        report.skipped["mt"] = "mixed state and no dist_g available"

    psd = bool(np.min(np.linalg.eigvalsh(hs)) >= -1e-12)
    overlap = float(np.real(np.trace(rho0 @ rhot)))
    if not pure:
        report.skipped["ml"] = "initial state is not pure"
    elif not h.time_independent:
        report.skipped["ml"] = "Hamiltonian is time dependent"
    elif not psd:
        report.skipped["ml"] = "Hamiltonian is not positive semidefinite"
    elif overlap > ORTHOGONAL_TOL:
        report.skipped["ml"] = "final state is not orthogonal to the initial state"
    else:
        energy = float(np.real(np.trace(rho0 @ hs[0])))
        report.bound_ml = per_unit(np.pi / 2, energy)

    if not _commuting_family(hs):
        report.skipped["mixed_ml"] = "Hamiltonians at different times do not commute"
    elif not psd:
        report.skipped["mixed_ml"] = "Hamiltonian is not positive semidefinite"
    else:
        beta = tangency_beta()
        basis = _joint_eigenbasis(hs)
        levels = np.real(np.einsum("ia,tij,ja->ta", basis.conj(), hs, basis))
        mean_levels = np.array([trapezoid(levels[:, a], grid.dt) / tau for a in range(n)])
        pops = np.real(np.einsum("ia,ij,ja->a", basis.conj(), rho0, basis))
        mean_energy = float(pops @ mean_levels)
        char = abs(np.sum(pops * np.exp(-1j * tau * mean_levels)))
        report.bound_mixed_ml = per_unit(1.0 - char, beta * mean_energy)
        report.bound_mixed_ml_bures = per_unit(4.0 * d_bures ** 2, beta * np.pi ** 2 * mean_energy)

    for name in require:
        if name not in BOUND_NAMES:
            raise ValueError(f"unknown bound {name!r}")
        if getattr(report, f"bound_{name}") is None:
            raise HypothesisViolated(name, report.skipped.get(name, "bound not available"))
    return report


def uncertainty_along(curve: OperatorCurve, h: HamiltonianSpec) -> np.ndarray:
    """Delta E at every sample of an evolution curve."""
    return np.sqrt(_energy_variances(curve.densities(), h.on_grid(curve.grid)))


def fiber_angle(psi: np.ndarray, h: np.ndarray) -> float:
    """Angle arctan(Delta E / E) between -i H psi and the fiber through psi."""
    x = check_hermitian(h, what="Hamiltonian")
    rho = psi @ dag(psi)
    s = observable_stats(rho, x)
    return float(np.arctan2(np.sqrt(max(s.variance, 0.0)), s.expectation))
