"""Dense operator foundation: validation, spectra, amplitudes, SLD, fidelity.

Everything here works on plain complex numpy arrays. Density operators are
validated on entry and then handled as ordinary ``ndarray`` values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    FiberMismatch,
    InvalidState,
    NegativeEigenvalue,
    NonHermitian,
    NotUnitary,
    SingularState,
)

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
NEGATIVITY_TOL = 1e-12
DEGENERACY_TOL = 1e-9
TANGENT_TRACE_TOL = 1e-9
FIBER_TOL = 1e-8

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


def dag(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def comm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def anticomm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b + b @ a


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dag(a))


def skew_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a - dag(a))


def _square(a, what: str) -> np.ndarray:
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"{what} must be a square matrix, got shape {arr.shape}")
    return arr


def check_hermitian(a, tol: float = HERMITICITY_TOL, what: str = "operator") -> np.ndarray:
    """Return ``a`` as a complex array after a relative Hermiticity check."""
    arr = _square(a, what)
    scale = max(1.0, float(np.linalg.norm(arr)))
    defect = float(np.linalg.norm(arr - dag(arr)))
    if defect > tol * scale:
        raise NonHermitian(f"{what} deviates from Hermitian by {defect:.3e}")
    return hermitian_part(arr)


def check_unitary(u, tol: float = 1e-10, what: str = "unitary") -> np.ndarray:
    arr = _square(u, what)
    defect = float(np.linalg.norm(dag(arr) @ arr - np.eye(arr.shape[0])))
    if defect > tol:
        raise NotUnitary(f"{what} fails U^dagger U = 1 by {defect:.3e}")
    return arr


def check_density(rho, tol: float = TRACE_TOL) -> np.ndarray:
    """Validate a density operator and return it as a Hermitian complex array.

    Tiny negative eigenvalues (above ``-NEGATIVITY_TOL``) are accepted; they
    are clamped wherever a square root or inverse is taken.
    """
    arr = check_hermitian(rho, what="density operator")
    tr = np.trace(arr).real
    if abs(tr - 1.0) > tol:
        raise InvalidState(f"density operator has trace {tr!r}, expected 1")
    w = np.linalg.eigvalsh(arr)
    if w[0] < -NEGATIVITY_TOL:
        raise NegativeEigenvalue(f"smallest eigenvalue {w[0]:.3e} is negative")
    return arr


def check_tangent(v, tol: float = TANGENT_TRACE_TOL) -> np.ndarray:
    """Validate a traceless Hermitian tangent direction."""
    arr = check_hermitian(v, tol=max(HERMITICITY_TOL, tol), what="tangent vector")
    scale = max(1.0, float(np.linalg.norm(arr)))
    if abs(np.trace(arr)) > tol * scale:
        raise InvalidState(f"tangent vector has trace {np.trace(arr)!r}, expected 0")
    return arr


def rank_tolerance(eigenvalues: np.ndarray) -> float:
    n = len(eigenvalues)
    return 1e-12 * n * max(float(np.max(eigenvalues)), 0.0)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Clustered spectrum of a density operator.

    ``weights`` and the columns of ``eigenvectors`` run over the support in
    decreasing order. ``distinct_values``/``degeneracies``/``projectors``
    describe the clusters; ``fiber_projectors`` are the matching canonical
    block-diagonal projectors on the k-dimensional fiber side.
    """

    weights: np.ndarray
    distinct_values: np.ndarray
    degeneracies: tuple[int, ...]
    projectors: tuple[np.ndarray, ...]
    fiber_projectors: tuple[np.ndarray, ...]
    eigenvectors: np.ndarray
    dim: int
    blocks: tuple[slice, ...] = field(default=())

    @property
    def rank(self) -> int:
        return len(self.weights)

    @property
    def n_distinct(self) -> int:
        return len(self.distinct_values)

    @property
    def faithful(self) -> bool:
        return self.rank == self.dim

    def fiber_operator(self) -> np.ndarray:
        """q = sum_a P^a lambda_a on the fiber side."""
        return sum(P * lam for P, lam in zip(self.distinct_values, self.fiber_projectors))

    def reconstruct(self) -> np.ndarray:
        return sum(P * proj for P, proj in zip(self.distinct_values, self.projectors))

    def block_index(self) -> np.ndarray:
        """Cluster label of each support index."""
        out = np.empty(self.rank, dtype=int)
        for a, sl in enumerate(self.blocks):
            out[sl] = a
        return out


def cluster_spectrum(values: np.ndarray, degeneracy_tol: float) -> list[list[int]]:
    """Greedy clustering of a decreasing sequence by relative adjacent gap."""
    clusters: list[list[int]] = []
    for i, v in enumerate(values):
        if clusters:
            prev = values[clusters[-1][-1]]
            gap = abs(prev - v) / max(abs(prev), abs(v))
            if gap < degeneracy_tol:
                clusters[-1].append(i)
                continue
        clusters.append([i])
    return clusters


def spectral_decompose(rho, degeneracy_tol: float = DEGENERACY_TOL) -> SpectralData:
    if degeneracy_tol <= 0:
        raise ValueError("degeneracy_tol must be positive")
    arr = check_density(rho)
    w, v = np.linalg.eigh(arr)
    w, v = w[::-1], v[:, ::-1]
    keep = w > rank_tolerance(w)
    w, v = w[keep], v[:, keep]
    k = len(w)
    clusters = cluster_spectrum(w, degeneracy_tol)
    distinct, degs, projs, fprojs, blocks = [], [], [], [], []
    for members in clusters:
        sl = slice(members[0], members[-1] + 1)
        vecs = v[:, sl]
        distinct.append(float(np.mean(w[sl])))
        degs.append(len(members))
        projs.append(vecs @ dag(vecs))
        lam = np.zeros((k, k), dtype=complex)
        lam[sl, sl] = np.eye(len(members))
        fprojs.append(lam)
        blocks.append(sl)
    return SpectralData(
        weights=w.copy(),
        distinct_values=np.array(distinct),
        degeneracies=tuple(degs),
        projectors=tuple(projs),
        fiber_projectors=tuple(fprojs),
        eigenvectors=v.copy(),
        dim=arr.shape[0],
        blocks=tuple(blocks),
    )


def psd_function(rho: np.ndarray, fn) -> np.ndarray:
    """Apply ``fn`` to the clamped eigenvalues of a Hermitian PSD matrix."""
    w, v = np.linalg.eigh(hermitian_part(np.asarray(rho, dtype=complex)))
    w = np.clip(w, 0.0, None)
    return (v * fn(w)[..., None, :]) @ dag(v)


def sqrt_psd(rho: np.ndarray) -> np.ndarray:
    return psd_function(rho, np.sqrt)


def sqrt_differential(rho: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Derivative of the matrix square root at rho in direction v.

    Divided differences (sqrt p_a - sqrt p_b)/(p_a - p_b) are evaluated as
    1/(sqrt p_a + sqrt p_b), which also covers the diagonal 1/(2 sqrt p_a).
    Stacked inputs are supported.
    """
    w, vecs = np.linalg.eigh(hermitian_part(np.asarray(rho, dtype=complex)))
    s = np.sqrt(np.clip(w, 0.0, None))
    denom = s[..., :, None] + s[..., None, :]
    if np.any(denom <= 0):
        raise SingularState("square-root differential needs a faithful operator")
    ve = dag(vecs) @ np.asarray(v, dtype=complex) @ vecs
    return vecs @ (ve / denom) @ dag(vecs)


def amplitude_sqrt(rho) -> np.ndarray:
    """Square-root amplitude.

    Faithful input gives the n x n principal square root. Otherwise the
    support part V diag(sqrt p) (n x k, eigenvectors in decreasing order) is
    returned, which still satisfies psi psi^dagger = rho.
    """
    spec = spectral_decompose(rho)
    if spec.faithful:
        v, p = spec.eigenvectors, spec.weights
        return (v * np.sqrt(p)) @ dag(v)
    return canonical_amplitude(spec)


def canonical_amplitude(spec: SpectralData) -> np.ndarray:
    """Amplitude V diag(sqrt p) lying in the canonical fiber over rho."""
    return spec.eigenvectors * np.sqrt(spec.weights)


def check_amplitude(psi, tol: float = 1e-10) -> np.ndarray:
    arr = np.asarray(psi, dtype=complex)
    if arr.ndim != 2:
        raise DimensionMismatch(f"amplitude must be a matrix, got shape {arr.shape}")
    norm2 = float(np.real(np.vdot(arr, arr)))
    if abs(norm2 - 1.0) > tol:
        raise InvalidState(f"amplitude has tr(psi^dagger psi) = {norm2!r}, expected 1")
    return arr


def check_in_fiber(psi: np.ndarray, spec: SpectralData, tol: float = FIBER_TOL) -> None:
    q = spec.fiber_operator()
    if psi.shape[1] != q.shape[0]:
        raise FiberMismatch(f"amplitude has {psi.shape[1]} columns, fiber rank is {q.shape[0]}")
    defect = float(np.linalg.norm(dag(psi) @ psi - q))
    if defect > tol:
        raise FiberMismatch(f"psi^dagger psi deviates from sum P^a lambda_a by {defect:.3e}")


def _require_faithful(spec: SpectralData, what: str) -> None:
    if not spec.faithful:
        raise SingularState(f"{what} requires a faithful density operator "
                            f"(rank {spec.rank} < dim {spec.dim})")


def sld(rho, rhodot) -> np.ndarray:
    """Symmetric logarithmic derivative L with rhodot = (rho L + L rho)/2."""
    spec = spectral_decompose(rho)
    _require_faithful(spec, "sld")
    v = check_tangent(rhodot)
    if v.shape != (spec.dim, spec.dim):
        raise DimensionMismatch("tangent and density operator differ in shape")
    vecs, p = spec.eigenvectors, spec.weights
    ve = dag(vecs) @ v @ vecs
    le = 2.0 * ve / (p[:, None] + p[None, :])
    return hermitian_part(vecs @ le @ dag(vecs))


def _pair(rho1, rho2) -> tuple[np.ndarray, np.ndarray]:
    a, b = check_density(rho1), check_density(rho2)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return a, b


def _support_factor(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors V and factor A = V diag(sqrt p) over the numerical support.

    Eigenvalues at rounding level are dropped; their square roots (~1e-8)
    would otherwise leak into fidelities of rank-deficient states.
    """
    w, v = np.linalg.eigh(hermitian_part(rho))
    keep = w > 64.0 * np.finfo(float).eps * len(w) * max(float(w[-1]), 0.0)
    return v[:, keep], v[:, keep] * np.sqrt(w[keep])


def fidelity(rho1, rho2) -> float:
    """Root fidelity tr sqrt(sqrt(rho2) rho1 sqrt(rho2)).

    Evaluated as the trace norm of A1^dagger A2 with rho = A A^dagger, which
    has the same singular values as sqrt(rho1) sqrt(rho2).
    """
    a, b = _pair(rho1, rho2)
    _, fa = _support_factor(a)
    _, fb = _support_factor(b)
    return float(np.sum(np.linalg.svd(dag(fa) @ fb, compute_uv=False)))


def affinity(rho1, rho2) -> float:
    """tr(sqrt(rho1) sqrt(rho2)) over the numerical supports."""
    a, b = _pair(rho1, rho2)
    va, fa = _support_factor(a)
    vb, fb = _support_factor(b)
    return float(np.real(np.trace((fa @ dag(va)) @ (fb @ dag(vb)))))


def hs_products(a, b, double: bool = False) -> tuple[float, float]:
    """Hilbert-Schmidt metric and symplectic form (G, Omega).

    G = Re tr(a^dagger b), or twice that when ``double`` is set.
    Omega = -i tr(a^dagger b - b^dagger a) = 2 Im tr(a^dagger b).
    """
    x, y = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    if x.shape != y.shape:
        raise DimensionMismatch(f"shapes {x.shape} and {y.shape} differ")
    overlap = np.vdot(x, y)
    g = float(overlap.real) * (2.0 if double else 1.0)
    return g, float(2.0 * overlap.imag)


def polar_unitary(m: np.ndarray) -> np.ndarray:
    """Unitary factor of the polar decomposition m = U |m|."""
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def expm_skew(xi: np.ndarray) -> np.ndarray:
    """exp(xi) for skew-Hermitian xi (stacked matrices allowed)."""
    w, v = np.linalg.eigh(1j * xi)
    return (v * np.exp(-1j * w)[..., None, :]) @ dag(v)


def expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i t h) for Hermitian h (stacked matrices allowed)."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * t * w)[..., None, :]) @ dag(v)
