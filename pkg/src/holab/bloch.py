"""Closed-form qubit results on the Bloch ball.

These formulas serve as ground truth for the generic numerical modules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadSpectrum, ConventionViolated, DimensionMismatch, OriginExcluded, OutsideBall, SingularState
from .operator_core import PAULI_X, PAULI_Y, PAULI_Z, check_density
from .transport import principal_phase

SIGMAS = np.array([PAULI_X, PAULI_Y, PAULI_Z])
UHLMANN_THRESHOLD = (2.0 + np.sqrt(3.0)) / 4.0


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if self.r > 1.0 + 1e-12:
            raise OutsideBall(f"Bloch vector has length {self.r}")

    @classmethod
    def of(cls, v) -> "BlochVector":
        a = np.asarray(v, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]))

    @property
    def r(self) -> float:
        return float(np.sqrt(self.x ** 2 + self.y ** 2 + self.z ** 2))

    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def bloch_map(rho) -> BlochVector:
    r = np.asarray(rho, dtype=complex)
    if r.shape != (2, 2):
        raise DimensionMismatch("Bloch map needs a qubit density operator")
    r = check_density(r)
    return BlochVector.of([np.real(np.trace(r @ s)) for s in SIGMAS])


def density_from_bloch(v) -> np.ndarray:
    vec = v.array() if isinstance(v, BlochVector) else np.asarray(v, dtype=float)
    if np.linalg.norm(vec) > 1.0 + 1e-12:
        raise OutsideBall(f"Bloch vector has length {np.linalg.norm(vec)}")
    return 0.5 * (np.eye(2) + np.einsum("i,ijk->jk", vec, SIGMAS))


def _r_sigma(vec: np.ndarray) -> np.ndarray:
    return np.einsum("i,ijk->jk", vec, SIGMAS)


@dataclass(frozen=True)
class QubitClosedForms:
    inverse: np.ndarray | None
    sqrt: np.ndarray
    eigenvalues: tuple[float, float]
    eigenvectors: np.ndarray


def qubit_closed_forms(v) -> QubitClosedForms:
    """Inverse, square root and eigenpairs of rho = (1 + r.sigma)/2."""
    vec = v.array() if isinstance(v, BlochVector) else np.asarray(v, dtype=float)
    x, y, z = vec
    r = float(np.linalg.norm(vec))
    if r > 1.0 + 1e-12:
        raise OutsideBall(f"Bloch vector has length {r}")
    rs = _r_sigma(vec)
    inverse = None
    if r < 1.0:
        inverse = 2.0 / (1.0 - r * r) * (np.eye(2) - rs)
    sq_pref = (np.sqrt(1.0 + r) + np.sqrt(max(1.0 - r, 0.0))) / (2.0 * np.sqrt(2.0))
    sqrt = sq_pref * (np.eye(2) + rs / (1.0 + np.sqrt(max(1.0 - r * r, 0.0))))
    if r == 0.0:
        vecs = np.eye(2, dtype=complex)
    elif abs(z + r) <= 1e-12 * max(r, 1.0):
        vecs = np.array([[0, 1], [1, 0]], dtype=complex)
    else:
        norm = np.sqrt(2.0 * r * (r + z))
        e0 = np.array([r + z, x + 1j * y]) / norm
        e1 = np.array([x - 1j * y, -(r + z)]) / norm
        vecs = np.column_stack([e0, e1])
    return QubitClosedForms(inverse, sqrt, ((1.0 + r) / 2.0, (1.0 - r) / 2.0), vecs)


def qubit_inverse(v) -> np.ndarray:
    forms = qubit_closed_forms(v)
    if forms.inverse is None:
        raise SingularState("pure qubit states are not invertible")
    return forms.inverse


@dataclass(frozen=True)
class CircleHolonomies:
    uhlmann: np.ndarray | None
    interferometric: np.ndarray
    uhlmann_phase: float | None
    interferometric_phase: float | None
    solid_angle: float


def _phase(z: complex) -> float | None:
    if abs(z) < 1e-12:
        return None
    return principal_phase(z)


def uhlmann_circle_holonomy(p0: float) -> np.ndarray:
    """Holonomy of the y-axis circle at sqrt(rho0), rho0 = diag(p0, 1 - p0)."""
    c = 1.0 - 2.0 * np.sqrt(p0 * (1.0 - p0))
    return np.cos(np.pi * c) * np.eye(2) + 1j * np.sin(np.pi * c) * PAULI_Y


def interferometric_circle_holonomy(axis) -> tuple[np.ndarray, float]:
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    omega = 2.0 * np.pi * (1.0 - n[2])
    return np.diag([np.exp(-0.5j * omega), np.exp(0.5j * omega)]), float(omega)


def circle_holonomies(p0: float, axis=(0.0, -1.0, 0.0)) -> CircleHolonomies:
    """Closed forms for rho_t = U_t rho0 U_t^dagger, U_t = cos t - i sin t n.sigma, t in [0, pi].

    The Uhlmann closed form exists for the y-axis circle only; for other axes
    that entry is ``None``.
    """
    if not 0.5 < p0 < 1.0:
        raise BadSpectrum("p0 must lie in (1/2, 1)")
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    rho0 = np.diag([p0, 1.0 - p0])
    h_int, omega = interferometric_circle_holonomy(n)
    h_uh = None
    uh_phase = None
    if abs(abs(n[1]) - 1.0) < 1e-12:
        h_uh = uhlmann_circle_holonomy(p0)
        uh_phase = _phase(np.trace(rho0 @ h_uh))
    return CircleHolonomies(h_uh, h_int, uh_phase, _phase(np.trace(rho0 @ h_int)), omega)


def node_locus(v0, v1, tol: float = 1e-9) -> bool:
    """True iff v1 lies on the radial segment opposite to v0 (v0 on the +z axis)."""
    a = v0.array() if isinstance(v0, BlochVector) else np.asarray(v0, dtype=float)
    b = v1.array() if isinstance(v1, BlochVector) else np.asarray(v1, dtype=float)
    if abs(a[0]) > tol or abs(a[1]) > tol or a[2] <= 0:
        raise ConventionViolated("initial Bloch vector must lie on the positive z axis")
    r1 = float(np.linalg.norm(b))
    return bool(r1 > tol and abs(b[2] + r1) < tol)


def bloch_metric(kind: str, v, vdot) -> float:
    """Squared speed of a Bloch-ball tangent under the chosen metric."""
    vec = v.array() if isinstance(v, BlochVector) else np.asarray(v, dtype=float)
    d = np.asarray(vdot, dtype=float)
    r = float(np.linalg.norm(vec))
    if r >= 1.0:
        raise SingularState("Bloch metrics need r < 1")
    if r > 0:
        rhat = vec / r
        radial = float(d @ rhat)
        tangential2 = float(d @ d - radial ** 2)
    else:
        radial, tangential2 = 0.0, float(d @ d)
    classical = radial ** 2 / (4.0 * (1.0 - r * r))
    if kind == "bures":
        unitary = tangential2 / 4.0
    elif kind == "wigner_yanase":
        unitary = tangential2 / (np.sqrt(1.0 + r) + np.sqrt(1.0 - r)) ** 2
    elif kind == "complementary":
        unitary = tangential2 / (4.0 * (1.0 - r * r))
    elif kind == "interferometric":
        if r <= 0:
            raise OriginExcluded("the interferometric metric is undefined at the origin")
        unitary = tangential2 / (4.0 * r * r)
    else:
        raise ValueError(f"unknown Bloch metric {kind!r}")
    if r == 0 and kind != "interferometric":
        classical = float(d @ d) / 4.0
        unitary = 0.0
    return float(classical + unitary)
