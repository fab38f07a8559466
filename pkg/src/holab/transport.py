"""Horizontal lifts, parallel transport, holonomies and geometric phases."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .connections import ConnectionKind, connection_value
from .curves import OperatorCurve, PiecewiseCurve, finite_differences, is_closed, segments_of
from .errors import (
    BadIndex,
    DegeneracyChange,
    DegenerateSpectrum,
    FiberMismatch,
    NodeEncountered,
    NotReal,
    NotUnitary,
    SingularState,
)
from .operator_core import (
    DEGENERACY_TOL,
    SpectralData,
    amplitude_sqrt,
    canonical_amplitude,
    check_density,
    cluster_spectrum,
    dag,
    expm_skew,
    hermitian_part,
    polar_unitary,
    spectral_decompose,
    sqrt_differential,
    sqrt_psd,
)

NODE_TOL = 1e-9
CLOSED_TOL = 1e-8
UNITARIZE_TOL = 1e-8
REJECT_TOL = 1e-5
BRANCH_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class TransportResult:
    psi0: np.ndarray
    transported: np.ndarray
    lift: object
    holonomy: np.ndarray | None
    phase_factor: complex
    phase: float | None
    node: bool
    kind: ConnectionKind
    unitarized: bool = False


def _initial_density(curve) -> np.ndarray:
    seg = segments_of(curve)[0]
    return seg.densities()[0]


def default_amplitude(rho0: np.ndarray, kind: ConnectionKind) -> np.ndarray:
    """Square-root amplitude for monotone kinds, canonical fiber point otherwise."""
    if kind.tag == "interferometric":
        return canonical_amplitude(spectral_decompose(rho0))
    return amplitude_sqrt(hermitian_part(rho0))


def _aligned_eigen_lift(dens: np.ndarray, degeneracies: tuple[int, ...],
                        degeneracy_tol: float) -> np.ndarray:
    """psi_t = V_t diag(sqrt p_t) with eigenbases rotated to follow each other.

    Each eigenspace basis is multiplied by the unitary polar factor of its
    overlap with the previous sample, which keeps the lift smooth in t.
    """
    out = []
    prev_blocks = None
    for i, rho in enumerate(dens):
        w, v = np.linalg.eigh(hermitian_part(rho))
        w, v = w[::-1], v[:, ::-1]
        k = sum(degeneracies)
        if k < len(w) and w[k] > 1e-12 * len(w) * w[0]:
            raise DegeneracyChange(f"rank changes along the curve at sample {i}")
        w, v = w[:k], v[:, :k]
        clusters = cluster_spectrum(w, degeneracy_tol)
        if tuple(len(c) for c in clusters) != tuple(degeneracies):
            raise DegeneracyChange(f"degeneracy pattern changes along the curve at sample {i}")
        blocks = []
        start = 0
        for m in degeneracies:
            blk = v[:, start:start + m]
            if prev_blocks is not None:
                blk = blk @ polar_unitary(dag(blk) @ prev_blocks[len(blocks)])
            blocks.append(blk)
            start += m
        prev_blocks = blocks
        out.append(np.concatenate(blocks, axis=1) * np.sqrt(w))
    return np.array(out)


def build_lift(curve: OperatorCurve, kind: ConnectionKind,
               degeneracy_tol: float = DEGENERACY_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Some lift of the curve and its velocity at every sample.

    Amplitude curves are used as given with finite-difference velocities.
    For density curves under a monotone connection the square-root section
    is used, with its velocity obtained from the square-root differential of
    the finite-difference density velocity; this keeps the velocity exactly
    tangent to the section. Otherwise a smooth spectral lift is built.
    """
    dt = curve.grid.dt
    if curve.kind == "amplitude":
        psi = curve.samples
        return psi, finite_differences(psi, dt)
    if curve.kind != "density":
        raise ValueError(f"cannot lift a {curve.kind} curve")
    dens = curve.samples
    spec0 = spectral_decompose(dens[0], degeneracy_tol)
    if kind.tag == "interferometric":
        ref = kind.spectrum
        if ref.degeneracies != spec0.degeneracies:
            raise DegeneracyChange("curve's degeneracy pattern differs from the connection's spectrum")
        psi = _aligned_eigen_lift(dens, spec0.degeneracies, degeneracy_tol)
        return psi, finite_differences(psi, dt)
    if spec0.faithful:
        w = np.linalg.eigvalsh(hermitian_part(dens))
        if np.any(w[:, 0] <= 1e-12 * dens.shape[1] * w[:, -1]):
            raise SingularState("curve leaves the faithful states")
        rhodot = finite_differences(dens, dt)
        return sqrt_psd(dens), sqrt_differential(dens, rhodot)
    if kind.tag != "bures":
        raise SingularState(f"the {kind.tag} connection needs faithful states")
    psi = _aligned_eigen_lift(dens, spec0.degeneracies, degeneracy_tol)
    return psi, finite_differences(psi, dt)


def _texp_factors(a: np.ndarray, dt: float) -> np.ndarray:
    """Gauge factors V_i with V_{i+1} = exp(-A_{i+1/2} dt) V_i, V_0 = 1."""
    a_mid = 0.5 * (a[1:] + a[:-1])
    steps = expm_skew(-a_mid * dt)
    k = a.shape[-1]
    out = np.empty((a.shape[0], k, k), dtype=complex)
    out[0] = np.eye(k)
    for i in range(steps.shape[0]):
        out[i + 1] = steps[i] @ out[i]
    return out


def _gauge_to(psi_start: np.ndarray, psi0: np.ndarray, kind: ConnectionKind) -> np.ndarray:
    """Symmetry-group element W with psi_start W = psi0."""
    if psi_start.shape != psi0.shape:
        raise FiberMismatch(f"initial amplitude shape {psi0.shape} does not match lift {psi_start.shape}")
    rho_a = psi_start @ dag(psi_start)
    rho_b = psi0 @ dag(psi0)
    if np.linalg.norm(rho_a - rho_b) > 1e-8:
        raise FiberMismatch("initial amplitude does not project to the curve's initial state")
    w = np.linalg.solve(dag(psi_start) @ psi_start, dag(psi_start) @ psi0)
    if np.linalg.norm(dag(w) @ w - np.eye(w.shape[0])) > 1e-7:
        raise FiberMismatch("initial amplitude is not related to the lift by a unitary")
    if kind.tag == "interferometric":
        block = np.zeros_like(w)
        for sl in kind.spectrum.blocks:
            block[sl, sl] = w[sl, sl]
        if np.linalg.norm(w - block) > 1e-7:
            raise FiberMismatch("initial amplitude is not in the connection's fiber")
    return w


def _lift_segment(seg: OperatorCurve, psi0: np.ndarray, kind: ConnectionKind,
                  degeneracy_tol: float) -> np.ndarray:
    psi, psidot = build_lift(seg, kind, degeneracy_tol)
    a = connection_value(kind, psi, psidot)
    v = _texp_factors(a, seg.grid.dt)
    w = _gauge_to(psi[0], psi0, kind)
    return psi @ v @ w


def _resolve_kind(kind: ConnectionKind | str, rho0: np.ndarray,
                  degeneracy_tol: float) -> ConnectionKind:
    if isinstance(kind, ConnectionKind):
        return kind
    if kind == "interferometric":
        return ConnectionKind.interferometric(spectral_decompose(rho0, degeneracy_tol))
    return ConnectionKind(kind)


def horizontal_lift(curve, psi0=None, kind: ConnectionKind | str = "bures",
                    degeneracy_tol: float = DEGENERACY_TOL):
    """Horizontal lift through psi0; a PiecewiseCurve gives one lift per segment."""
    rho0 = _initial_density(curve)
    kind = _resolve_kind(kind, rho0, degeneracy_tol)
    start = default_amplitude(rho0, kind) if psi0 is None else np.asarray(psi0, dtype=complex)
    lifts = []
    current = start
    for seg in segments_of(curve):
        samples = _lift_segment(seg, current, kind, degeneracy_tol)
        lifts.append(OperatorCurve(seg.grid, samples, "amplitude"))
        current = samples[-1]
    if isinstance(curve, PiecewiseCurve):
        return PiecewiseCurve(tuple(lifts))
    return lifts[0]


def principal_phase(z: complex) -> float:
    """arg z in (-pi, pi]; angles within BRANCH_TOL of -pi are rounding noise and map to pi."""
    theta = float(np.angle(z))
    return float(np.pi) if theta <= -np.pi + BRANCH_TOL else theta


def holonomy_from(psi0: np.ndarray, gamma: np.ndarray) -> tuple[np.ndarray, bool]:
    h = np.linalg.solve(dag(psi0) @ psi0, dag(psi0) @ gamma)
    defect = float(np.linalg.norm(dag(h) @ h - np.eye(h.shape[0])))
    if defect > REJECT_TOL:
        raise NotUnitary(f"holonomy defect {defect:.3e} exceeds {REJECT_TOL}")
    if defect > UNITARIZE_TOL:
        return polar_unitary(h), True
    return h, False


def parallel_transport(curve, psi0=None, kind: ConnectionKind | str = "bures",
                       closed_tol: float = CLOSED_TOL, node_tol: float = NODE_TOL,
                       degeneracy_tol: float = DEGENERACY_TOL) -> TransportResult:
    rho0 = _initial_density(curve)
    kind = _resolve_kind(kind, rho0, degeneracy_tol)
    start = default_amplitude(rho0, kind) if psi0 is None else np.asarray(psi0, dtype=complex)
    lift = horizontal_lift(curve, start, kind, degeneracy_tol)
    gamma = (lift.segments[-1] if isinstance(lift, PiecewiseCurve) else lift).samples[-1]
    holonomy, unitarized = None, False
    if is_closed(curve, closed_tol):
        holonomy, unitarized = holonomy_from(start, gamma)
    phi = complex(np.vdot(start, gamma))
    node = abs(phi) < node_tol
    return TransportResult(
        psi0=start,
        transported=gamma,
        lift=lift,
        holonomy=holonomy,
        phase_factor=phi,
        phase=None if node else principal_phase(phi),
        node=node,
        kind=kind,
        unitarized=unitarized,
    )


def geometric_phase(curve, kind: ConnectionKind | str = "bures", psi0=None,
                    node_tol: float = NODE_TOL) -> tuple[complex, float]:
    res = parallel_transport(curve, psi0, kind, node_tol=node_tol)
    if res.node:
        raise NodeEncountered(f"|phase factor| = {abs(res.phase_factor):.3e} is below {node_tol}")
    return res.phase_factor, res.phase


def overlap_matrix(curve, kind: ConnectionKind | str = "bures", psi0=None) -> tuple[np.ndarray, TransportResult]:
    """M = psi0^dagger Gamma(psi0) together with the transport result."""
    res = parallel_transport(curve, psi0, kind)
    return dag(res.psi0) @ res.transported, res


def higher_order_phase(curve, kind: ConnectionKind | str, d: int, psi0=None) -> complex:
    """tr((psi0^dagger Gamma(psi0))^d)."""
    if d < 1:
        raise ValueError("order must be a positive integer")
    m, _ = overlap_matrix(curve, kind, psi0)
    return complex(np.trace(np.linalg.matrix_power(m, d)))


def charpoly_from_phases(phases: Sequence[complex]) -> np.ndarray:
    """Coefficients c_a = (-1)^a s_a of det(x - M) from tr(M^d), d = 1..k."""
    k = len(phases)
    s = [1.0 + 0j]
    for a in range(1, k + 1):
        s.append(sum((-1) ** (d - 1) * s[a - d] * phases[d - 1] for d in range(1, a + 1)) / a)
    return np.array([(-1) ** a * s[a] for a in range(k + 1)])


def fiber_projectors_of(psi0: np.ndarray, degeneracy_tol: float = DEGENERACY_TOL) -> list[np.ndarray]:
    """Spectral projectors of psi0^dagger psi0, largest eigenvalue first."""
    q = hermitian_part(dag(psi0) @ psi0)
    w, v = np.linalg.eigh(q)
    w, v = w[::-1], v[:, ::-1]
    out = []
    for members in cluster_spectrum(w, degeneracy_tol):
        blk = v[:, members[0]:members[-1] + 1]
        out.append(blk @ dag(blk))
    return out


def sequence_phase_factor(curve, kind: ConnectionKind | str, alpha: Sequence[int], psi0=None) -> complex:
    """tr(lambda_{a1} M lambda_{a2} M ... lambda_{ad} M lambda_{a1}), indices counted from 1."""
    m, res = overlap_matrix(curve, kind, psi0)
    lams = fiber_projectors_of(res.psi0)
    if not alpha:
        raise BadIndex("empty index sequence")
    for a in alpha:
        if not 1 <= a <= len(lams):
            raise BadIndex(f"index {a} outside 1..{len(lams)}")
    prod = np.eye(m.shape[0], dtype=complex)
    seq = list(alpha) + [alpha[0]]
    for a, b in zip(seq, seq[1:]):
        prod = prod @ lams[a - 1] @ m @ lams[b - 1]
    return complex(np.trace(prod))


def all_sequence_phases(curve, kind, d: int, psi0=None) -> dict[tuple[int, ...], complex]:
    m, res = overlap_matrix(curve, kind, psi0)
    lams = fiber_projectors_of(res.psi0)
    out = {}
    for alpha in itertools.product(range(1, len(lams) + 1), repeat=d):
        prod = np.eye(m.shape[0], dtype=complex)
        seq = list(alpha) + [alpha[0]]
        for a, b in zip(seq, seq[1:]):
            prod = prod @ lams[a - 1] @ m @ lams[b - 1]
        out[alpha] = complex(np.trace(prod))
    return out


def transported_eigenvectors(curve: OperatorCurve, degeneracy_tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Eigenvector curves of a nondegenerate isospectral curve, parallel transported.

    After each step the phase of the overlap with the previous eigenvector is
    removed, which is the discrete form of <psi_a|d psi_a/dt> = 0.
    """
    dens = curve.densities()
    spec = spectral_decompose(dens[0], degeneracy_tol)
    if any(m != 1 for m in spec.degeneracies):
        raise DegenerateSpectrum("off-diagonal factors need a nondegenerate spectrum")
    k = spec.rank
    out = np.empty((len(dens), dens.shape[1], k), dtype=complex)
    prev = spec.eigenvectors
    out[0] = prev
    for i in range(1, len(dens)):
        w, v = np.linalg.eigh(hermitian_part(dens[i]))
        v = v[:, ::-1][:, :k]
        ov = np.einsum("ij,ij->j", np.conj(prev), v)
        v = v * np.exp(-1j * np.angle(ov))
        out[i] = v
        prev = v
    return out


def off_diagonal_factors(curve: OperatorCurve, kind: ConnectionKind | str = "interferometric",
                         max_order: int | None = None) -> dict[tuple[int, ...], complex]:
    """gamma_{a1..ad} = prod_i <psi_{a_i;0}|psi_{a_{i+1};tau}>, indices from 1, d <= k."""
    tag = kind.tag if isinstance(kind, ConnectionKind) else kind
    if tag != "interferometric":
        raise ValueError("off-diagonal factors are defined for the interferometric connection")
    if isinstance(curve, PiecewiseCurve):
        raise ValueError("off-diagonal factors need a single smooth curve")
    vecs = transported_eigenvectors(curve)
    k = vecs.shape[2]
    ov = dag(vecs[0]) @ vecs[-1]
    top = k if max_order is None else min(k, max_order)
    out = {}
    for d in range(1, top + 1):
        for alpha in itertools.product(range(k), repeat=d):
            seq = list(alpha) + [alpha[0]]
            val = np.prod([ov[a, b] for a, b in zip(seq, seq[1:])])
            out[tuple(a + 1 for a in alpha)] = complex(val)
    return out


def aggregate_off_diagonal(factors: dict[tuple[int, ...], complex], weights: np.ndarray,
                           alpha: Sequence[int]) -> complex:
    """sum over members b of the clusters in alpha of p_b1..p_bd gamma_b (nondegenerate: one term)."""
    key = tuple(alpha)
    return complex(np.prod([weights[a - 1] for a in key]) * factors[key])


@dataclass(frozen=True)
class RealCurveReport:
    holonomy: np.ndarray
    phase_factor: complex
    phase: float | None
    orthogonality_defect: float
    determinant: complex
    phase_is_zero_or_pi: bool


def real_curve_check(curve, kind: ConnectionKind | str = "interferometric", basis=None,
                     real_tol: float = 1e-9, degeneracy_tol: float = DEGENERACY_TOL) -> RealCurveReport:
    """Holonomy structure of a closed curve of real density operators.

    ``basis`` is a unitary whose columns form a basis in which every sample is
    real symmetric; the computational basis is used by default.
    """
    tag = kind.tag if isinstance(kind, ConnectionKind) else kind
    if tag != "interferometric":
        raise ValueError("real-curve check is defined for the interferometric connection")
    segs = segments_of(curve)
    b = np.eye(segs[0].shape[0]) if basis is None else np.asarray(basis, dtype=complex)
    rotated = []
    for seg in segs:
        dens = dag(b)[None] @ seg.densities() @ b[None]
        if np.max(np.abs(dens.imag)) > real_tol:
            raise NotReal("samples are not real in the given basis")
        rotated.append(OperatorCurve(seg.grid, dens.real.astype(complex), "density"))
    real_curve = rotated[0] if len(rotated) == 1 else PiecewiseCurve(tuple(rotated))
    if not is_closed(real_curve):
        raise ValueError("real-curve check needs a closed curve")
    rho0 = check_density(rotated[0].samples[0].real)
    spec = spectral_decompose(rho0, degeneracy_tol)
    w, v = np.linalg.eigh(rho0.real)
    v = v[:, ::-1][:, :spec.rank]
    psi0 = (v * np.sqrt(w[::-1][:spec.rank])).astype(complex)
    res = parallel_transport(real_curve, psi0, ConnectionKind.interferometric(spec))
    h = res.holonomy
    block = np.zeros_like(h)
    for sl in spec.blocks:
        block[sl, sl] = h[sl, sl]
    defect = float(np.linalg.norm(h.imag) + np.linalg.norm(h - block))
    phi = res.phase_factor
    zero_or_pi = abs(phi.imag) < 1e-6
    return RealCurveReport(
        holonomy=h,
        phase_factor=phi,
        phase=res.phase,
        orthogonality_defect=defect,
        determinant=complex(np.linalg.det(h)),
        phase_is_zero_or_pi=bool(zero_or_pi),
    )
