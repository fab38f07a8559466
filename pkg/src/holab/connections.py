"""Connection one-forms on purification bundles.

Every evaluator takes an amplitude ``psi`` (n x k) and a velocity ``psidot``
of the same shape and returns a skew-Hermitian k x k matrix. All of them
also accept stacks of matrices (leading axes), which the transport module
uses to evaluate a whole curve at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BadFSpec, FiberMismatch, SingularState
from .operator_core import (
    FIBER_TOL,
    SpectralData,
    check_density,
    dag,
    skew_part,
    sqrt_psd,
)

CONNECTION_TAGS = ("bures", "complementary", "wigner_yanase", "f_general", "interferometric")

_P_GRID = np.logspace(-6, 6, 241)


def _p_bures(x):
    return np.ones_like(x)


def _p_complementary(x):
    return x


def _p_wigner_yanase(x):
    return np.sqrt(x)


@dataclass(frozen=True, eq=False)
class ConnectionKind:
    """Which connection to use.

    ``p`` parametrizes the f-connection family; the monotone metric function
    it induces is f(x) = (p + x)^2 / (2 (p^2 + x)). ``spectrum`` is only used
    by the interferometric kind.
    """

    tag: str
    p: Callable[[np.ndarray], np.ndarray] | None = None
    spectrum: SpectralData | None = None

    def __post_init__(self):
        if self.tag not in CONNECTION_TAGS:
            raise ValueError(f"unknown connection {self.tag!r}")
        if self.tag == "f_general":
            if self.p is None:
                raise BadFSpec("f_general needs a p-function")
            check_p_function(self.p)
        if self.tag == "interferometric" and self.spectrum is None:
            raise ValueError("interferometric connection needs spectral data")

    @classmethod
    def bures(cls) -> "ConnectionKind":
        return cls("bures")

    @classmethod
    def complementary(cls) -> "ConnectionKind":
        return cls("complementary")

    @classmethod
    def wigner_yanase(cls) -> "ConnectionKind":
        return cls("wigner_yanase")

    @classmethod
    def f_general(cls, p) -> "ConnectionKind":
        return cls("f_general", p=p)

    @classmethod
    def interferometric(cls, spectrum: SpectralData) -> "ConnectionKind":
        return cls("interferometric", spectrum=spectrum)

    @property
    def is_monotone(self) -> bool:
        return self.tag != "interferometric"

    def p_function(self) -> Callable[[np.ndarray], np.ndarray]:
        if self.tag == "bures":
            return _p_bures
        if self.tag == "complementary":
            return _p_complementary
        if self.tag == "wigner_yanase":
            return _p_wigner_yanase
        if self.tag == "f_general":
            return self.p
        raise ValueError("the interferometric connection has no p-function")

    def r(self, x):
        p = self.p_function()(x)
        return x / (p + x)

    def k(self, x):
        p = self.p_function()(x)
        return (p * p + x * p) / (p * p + x)

    def metric_function(self, x):
        p = self.p_function()(x)
        return (p + x) ** 2 / (2.0 * (p * p + x))


def check_p_function(p) -> None:
    x = _P_GRID
    try:
        px = np.asarray(p(x), dtype=float)
        pinv = np.asarray(p(1.0 / x), dtype=float)
    except Exception as exc:  # noqa: BLE001 - any failure means a bad spec
        raise BadFSpec(f"p-function could not be evaluated: {exc}") from exc
    if px.shape != x.shape or not np.all(np.isfinite(px)) or np.any(px <= 0):
        raise BadFSpec("p must be finite and positive on [1e-6, 1e6]")
    if np.max(np.abs(px * pinv - 1.0)) > 1e-9:
        raise BadFSpec("p must satisfy p(1/x) = 1/p(x)")


def _fiber_eigh(psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q = dag(psi) @ psi
    w, v = np.linalg.eigh(q)
    k = q.shape[-1]
    tol = 1e-12 * k * np.max(w, axis=-1, keepdims=True)
    if np.any(w <= tol):
        raise SingularState("psi^dagger psi is singular; this connection needs a faithful fiber operator")
    return w, v


def bures_connection(psi, psidot) -> np.ndarray:
    """Solve {q, A} = psi^dagger psidot - psidot^dagger psi with q = psi^dagger psi."""
    psi = np.asarray(psi, dtype=complex)
    psidot = np.asarray(psidot, dtype=complex)
    w, v = _fiber_eigh(psi)
    rhs = dag(psi) @ psidot
    rhs = rhs - dag(rhs)
    re = dag(v) @ rhs @ v
    ae = re / (w[..., :, None] + w[..., None, :])
    return skew_part(v @ ae @ dag(v))


def hubner_connection(rho, sqrt_dot) -> np.ndarray:
    """Bures connection at the square-root lift, from the eigenbasis of rho."""
    r = check_density(rho)
    w, v = np.linalg.eigh(r)
    if w[0] <= 1e-12 * len(w) * w[-1]:
        raise SingularState("Hübner formula needs a faithful density operator")
    s = sqrt_psd(r)
    d = np.asarray(sqrt_dot, dtype=complex)
    c = s @ d - d @ s
    ce = dag(v) @ c @ v
    return skew_part(v @ (ce / (w[:, None] + w[None, :])) @ dag(v))


def _solve_square(psi: np.ndarray, psidot: np.ndarray) -> np.ndarray:
    if psi.shape[-1] != psi.shape[-2]:
        raise SingularState("this connection needs a square (n = k) amplitude")
    s = np.linalg.svd(psi, compute_uv=False)
    if np.any(s[..., -1] <= 1e-12 * s.shape[-1] * s[..., 0]):
        raise SingularState("amplitude is not invertible")
    return np.linalg.solve(psi, psidot)


def complementary_connection(psi, psidot) -> np.ndarray:
    x = _solve_square(np.asarray(psi, dtype=complex), np.asarray(psidot, dtype=complex))
    return skew_part(x)


def wigner_yanase_connection(psi, psidot) -> np.ndarray:
    """Solve {s, A} = s X - X^dagger s with s = sqrt(psi^dagger psi) and X = psi^-1 psidot."""
    psi = np.asarray(psi, dtype=complex)
    psidot = np.asarray(psidot, dtype=complex)
    x = _solve_square(psi, psidot)
    w, v = _fiber_eigh(psi)
    s = np.sqrt(w)
    root = (v * s[..., None, :]) @ dag(v)
    rhs = root @ x - dag(x) @ root
    re = dag(v) @ rhs @ v
    return skew_part(v @ (re / (s[..., :, None] + s[..., None, :])) @ dag(v))


def f_connection(kind: ConnectionKind, psi, psidot) -> np.ndarray:
    """Connection of the f-family: r(L_q R_q^-1) X - r(R_q L_q^-1) X^dagger, X = psi^-1 psidot."""
    psi = np.asarray(psi, dtype=complex)
    psidot = np.asarray(psidot, dtype=complex)
    x = _solve_square(psi, psidot)
    w, v = _fiber_eigh(psi)
    xe = dag(v) @ x @ v
    ratio = w[..., :, None] / w[..., None, :]
    ae = kind.r(ratio) * xe - kind.r(1.0 / ratio) * dag(xe)
    return skew_part(v @ ae @ dag(v))


def fiber_weights(psi: np.ndarray, spectrum: SpectralData, tol: float = FIBER_TOL) -> np.ndarray:
    """Per-cluster values P^a read off psi^dagger psi, after a block-scalar check.

    The check allows the values to differ from ``spectrum`` so that curves
    with a fixed degeneracy pattern but moving eigenvalues are accepted.
    """
    q = dag(psi) @ psi
    k = spectrum.rank
    if q.shape[-1] != k:
        raise FiberMismatch(f"amplitude has {q.shape[-1]} columns, fiber rank is {k}")
    diag = np.real(np.diagonal(q, axis1=-2, axis2=-1))
    values = np.stack([diag[..., sl].mean(axis=-1) for sl in spectrum.blocks], axis=-1)
    expanded = np.zeros_like(q)
    for a, sl in enumerate(spectrum.blocks):
        idx = np.arange(sl.start, sl.stop)
        expanded[..., idx, idx] = values[..., a:a + 1]
    defect = np.max(np.linalg.norm(q - expanded, axis=(-2, -1)))
    if defect > tol:
        raise FiberMismatch(f"psi^dagger psi is not block-scalar (defect {defect:.3e})")
    if np.any(values <= 0):
        raise FiberMismatch("fiber values must be positive")
    return values


def interferometric_connection(kind: ConnectionKind, psi, psidot) -> np.ndarray:
    """sum_a (P^a)^-1 lambda_a psi^dagger psidot lambda_a, skew-Hermitized.

    The Hermitian part that is dropped is exactly the contribution of the
    velocity component normal to the fiber bundle, so skew-Hermitizing is the
    same as projecting psidot onto the tangent space first.
    """
    spec = kind.spectrum
    psi = np.asarray(psi, dtype=complex)
    psidot = np.asarray(psidot, dtype=complex)
    values = fiber_weights(psi, spec)
    m = dag(psi) @ psidot
    out = np.zeros_like(m)
    for a, sl in enumerate(spec.blocks):
        out[..., sl, sl] = m[..., sl, sl] / values[..., a, None, None]
    return skew_part(out)


def connection_value(kind: ConnectionKind, psi, psidot) -> np.ndarray:
    if kind.tag == "bures":
        return bures_connection(psi, psidot)
    if kind.tag == "complementary":
        return complementary_connection(psi, psidot)
    if kind.tag == "wigner_yanase":
        return wigner_yanase_connection(psi, psidot)
    if kind.tag == "f_general":
        return f_connection(kind, psi, psidot)
    return interferometric_connection(kind, psi, psidot)
