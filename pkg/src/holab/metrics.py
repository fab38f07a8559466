"""Monotone metrics, skew information, distances and curve lengths."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .curves import OperatorCurve, finite_differences
from .errors import (
    BadFSpec,
    DegenerateSpectrum,
    NotOrbitTangent,
    NotPure,
    SingularState,
    ZeroProbability,
)
from .operator_core import (
    DEGENERACY_TOL,
    affinity,
    check_density,
    check_hermitian,
    check_tangent,
    cluster_spectrum,
    dag,
    fidelity,
    hermitian_part,
    sqrt_psd,
)

METRIC_TAGS = ("bures", "wigner_yanase", "complementary", "f_general", "kks", "interferometric_projected")
CLAMP_SLACK = 1e-8

_F_GRID = np.logspace(-6, 6, 241)


def f_bures(x):
    return (1.0 + x) / 2.0


def f_complementary(x):
    return 2.0 * x / (1.0 + x)


def f_wigner_yanase(x):
    return 0.25 * (1.0 + np.sqrt(x)) ** 2


@dataclass(frozen=True, eq=False)
class MetricKind:
    tag: str
    f: Callable[[np.ndarray], np.ndarray] | None = None
    normalized: bool = True

    def __post_init__(self):
        if self.tag not in METRIC_TAGS:
            raise ValueError(f"unknown metric {self.tag!r}")
        if self.tag == "f_general":
            if self.f is None:
                raise BadFSpec("f_general needs a function")
            check_f_function(self.f, self.normalized)

    def function(self):
        return {
            "bures": f_bures,
            "complementary": f_complementary,
            "wigner_yanase": f_wigner_yanase,
            "f_general": self.f,
        }[self.tag]


def check_f_function(f, normalized: bool = True) -> None:
    x = _F_GRID
    fx = np.asarray(f(x), dtype=float)
    if fx.shape != x.shape or not np.all(np.isfinite(fx)) or np.any(fx <= 0):
        raise BadFSpec("f must be finite and positive on [1e-6, 1e6]")
    if np.max(np.abs(fx - x * np.asarray(f(1.0 / x)))) > 1e-9 * np.max(np.abs(fx)):
        raise BadFSpec("f must satisfy f(x) = x f(1/x)")
    if normalized:
        if abs(float(f(np.array([1.0]))[0]) - 1.0) > 1e-9:
            raise BadFSpec("normalized f must have f(1) = 1")
        if np.any(fx < f_complementary(x) * (1 - 1e-9)) or np.any(fx > f_bures(x) * (1 + 1e-9)):
            raise BadFSpec("normalized f must lie between the complementary and Bures functions")


def _kind(kind) -> MetricKind:
    return kind if isinstance(kind, MetricKind) else MetricKind(kind)


def _eig(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(hermitian_part(rho))
    return w, v


def monotone_weights(kind: MetricKind, w: np.ndarray) -> np.ndarray:
    """Entrywise weights c_ab = 1/(p_b f(p_a/p_b)) of the operator J^f."""
    if np.any(w <= 1e-12 * w.shape[-1] * np.max(w, axis=-1, keepdims=True)):
        raise SingularState("monotone metrics need a faithful density operator")
    f = kind.function()
    pa, pb = w[..., :, None], w[..., None, :]
    return 1.0 / (pb * f(pa / pb))


def _projected_form(w: np.ndarray, ve1: np.ndarray, ve2: np.ndarray,
                    degeneracy_tol: float, project: bool) -> float:
    """Squared horizontal-lift speed for the isodegenerate (interferometric) geometry."""
    order = np.argsort(w)[::-1]
    w = w[order]
    ve1 = ve1[np.ix_(order, order)]
    ve2 = ve2[np.ix_(order, order)]
    tol = 1e-12 * len(w) * max(w[0], 0.0)
    support = w > tol
    labels = np.empty(len(w), dtype=int)
    k = int(np.sum(support))
    for c, members in enumerate(cluster_spectrum(w[:k], degeneracy_tol)):
        labels[members] = c
    labels[k:] = -1
    same = labels[:, None] == labels[None, :]
    for ve in (ve1, ve2):
        inner = np.where(same & ~np.eye(len(w), dtype=bool), ve, 0)
        kernel = ve[k:, k:]
        diag_spread = 0.0
        for c in range(labels.max() + 1):
            d = np.real(np.diag(ve))[labels == c]
            diag_spread = max(diag_spread, float(np.ptp(d)) if len(d) else 0.0)
        scale = max(1.0, float(np.linalg.norm(ve)))
        bad = np.linalg.norm(inner) + np.linalg.norm(kernel) + diag_spread
        if bad > 1e-8 * scale and not project:
            raise NotOrbitTangent("tangent has components that change the degeneracy pattern")
    classical = 0.0
    for c in range(labels.max() + 1):
        idx = labels == c
        m = int(np.sum(idx))
        x1 = np.real(np.trace(ve1[np.ix_(idx, idx)])) / m
        x2 = np.real(np.trace(ve2[np.ix_(idx, idx)])) / m
        classical += 0.25 * m * x1 * x2 / w[idx].mean()
    pa, pb = w[:, None], w[None, :]
    off = ~same
    gap2 = np.where(off, (pa - pb) ** 2, 1.0)
    weight = np.where(off, (pa + pb) / (2.0 * gap2), 0.0)
    unitary = float(np.sum(weight * np.real(np.conj(ve1) * ve2)))
    return classical + unitary


def monotone_metric(kind, rho, v1, v2=None, degeneracy_tol: float = DEGENERACY_TOL,
                    project: bool = False) -> float:
    """g(v1, v2) at rho for the requested metric (Bures, WY, complementary, f, KKS, projected)."""
    kind = _kind(kind)
    r = check_density(rho)
    a = check_tangent(v1)
    b = a if v2 is None else check_tangent(v2)
    if kind.tag == "kks":
        return 0.25 * (kks_metric(r, a + b).g_j - kks_metric(r, a - b).g_j)
    w, v = _eig(r)
    ve1 = dag(v) @ a @ v
    ve2 = dag(v) @ b @ v
    if kind.tag == "interferometric_projected":
        return _projected_form(w, ve1, ve2, degeneracy_tol, project)
    c = monotone_weights(kind, w)
    return float(0.25 * np.sum(c * np.real(np.conj(ve1) * ve2)))


def bures_metric_sld(rho, v1, v2=None) -> float:
    """Bures metric through the symmetric logarithmic derivative, (1/4) tr(v1 L_v2)."""
    from .operator_core import sld

    b = v1 if v2 is None else v2
    return float(0.25 * np.real(np.trace(np.asarray(v1) @ sld(rho, b))))


def skew_information(rho, a) -> float:
    """I_WY(rho, A) = tr(rho A^2) - tr(sqrt(rho) A sqrt(rho) A)."""
    r = check_density(rho)
    x = check_hermitian(a, what="observable")
    s = sqrt_psd(r)
    return float(np.real(np.trace(r @ x @ x) - np.trace(s @ x @ s @ x)))


def _clamped_arccos(x: float) -> float:
    if x > 1.0 + CLAMP_SLACK or x < -CLAMP_SLACK:
        raise ValueError(f"overlap {x!r} outside [0, 1] beyond rounding slack")
    return float(np.arccos(min(max(x, 0.0), 1.0)))


def is_pure(rho: np.ndarray, tol: float = 1e-9) -> bool:
    return abs(np.real(np.trace(rho @ rho)) - 1.0) < tol


def distance(kind: str, rho1, rho2) -> float:
    if kind == "bures":
        return _clamped_arccos(fidelity(rho1, rho2))
    if kind == "wigner_yanase":
        return _clamped_arccos(affinity(rho1, rho2))
    if kind == "fubini_study":
        a, b = check_density(rho1), check_density(rho2)
        if not (is_pure(a) and is_pure(b)):
            raise NotPure("Fubini-Study distance needs pure states")
        return _clamped_arccos(float(np.sqrt(max(np.real(np.trace(a @ b)), 0.0))))
    raise ValueError(f"unknown distance {kind!r}")


def trapezoid(values: np.ndarray, dt: float) -> float:
    return float(dt * (np.sum(values) - 0.5 * (values[0] + values[-1])))


def curve_speeds(curve: OperatorCurve, kind, degeneracy_tol: float = DEGENERACY_TOL) -> np.ndarray:
    kind = _kind(kind)
    dens = curve.densities()
    vel = finite_differences(dens, curve.grid.dt, order=4)
    if kind.tag in ("bures", "wigner_yanase", "complementary", "f_general"):
        w, v = np.linalg.eigh(hermitian_part(dens))
        ve = dag(v) @ vel @ v
        c = monotone_weights(kind, w)
        g = 0.25 * np.sum(c * np.abs(ve) ** 2, axis=(-2, -1))
    else:
        g = np.array([
            monotone_metric(kind, hermitian_part(r), hermitian_part(x),
                            degeneracy_tol=degeneracy_tol, project=True)
            for r, x in zip(dens, vel)
        ])
    return np.sqrt(np.clip(g, 0.0, None))


def curve_length(curve: OperatorCurve, kind, degeneracy_tol: float = DEGENERACY_TOL) -> float:
    """Composite-trapezoid length of a density curve (fourth-order velocities)."""
    return trapezoid(curve_speeds(curve, kind, degeneracy_tol), curve.grid.dt)


@dataclass(frozen=True)
class KksResult:
    g_j: float
    g: float
    difference: float


def kks_metric(rho, v, tol: float = 1e-9) -> KksResult:
    """KKS value 2 tr(rho [A^l, A^u]) for an orbit tangent v = -i[A, rho].

    Triangular parts are taken in the eigenbasis ordered by increasing
    eigenvalue, the ordering for which the form is positive. ``g`` is the
    doubled Hilbert-Schmidt value 2 tr(rho A^2) and ``difference`` is
    4 tr(rho A^u A^l).
    """
    r = check_density(rho)
    x = check_tangent(v)
    w, vecs = _eig(r)
    if np.any(w <= 1e-12 * len(w) * w[-1]):
        raise SingularState("KKS metric needs a faithful density operator")
    gaps = np.abs(np.diff(w))
    if np.any(gaps < DEGENERACY_TOL * np.abs(w[1:])):
        raise DegenerateSpectrum("KKS metric needs a nondegenerate spectrum")
    ve = dag(vecs) @ x @ vecs
    if np.max(np.abs(np.diag(ve))) > tol * max(1.0, float(np.linalg.norm(ve))):
        raise NotOrbitTangent("tangent has a commuting component")
    diff = w[:, None] - w[None, :]
    np.fill_diagonal(diff, 1.0)
    a = -1j * ve / diff
    np.fill_diagonal(a, 0.0)
    au = np.triu(a, 1)
    al = np.tril(a, -1)
    rd = np.diag(w).astype(complex)
    g_j = 2.0 * np.real(np.trace(rd @ (al @ au - au @ al)))
    g = 2.0 * np.real(np.trace(rd @ (al @ au + au @ al)))
    d = 4.0 * np.real(np.trace(rd @ au @ al))
    return KksResult(float(g_j), float(g), float(d))


def post_measurement_distance(rho, projector) -> tuple[np.ndarray, float]:
    """Lüders state M rho M / tr(rho M) and its Bures distance to rho."""
    r = check_density(rho)
    m = check_hermitian(projector, what="projector")
    if np.linalg.norm(m @ m - m) > 1e-10:
        raise ValueError("projector is not idempotent")
    prob = float(np.real(np.trace(r @ m)))
    if prob <= 1e-12 * r.shape[0]:
        raise ZeroProbability("the measurement outcome has zero probability")
    post = hermitian_part(m @ r @ m) / prob
    return post, distance("bures", r, post)
