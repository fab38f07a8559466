"""Uniformly sampled operator curves, propagators and finite differences."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, NonHermitian
from .operator_core import PAULIS, check_density, dag, expm_hermitian

CURVE_KINDS = ("density", "amplitude", "unitary", "hermitian")


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t1: float
    steps: int

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise ValueError(f"grid needs t1 > t0, got {self.t0}, {self.t1}")
        if int(self.steps) < 2:
            raise ValueError(f"grid needs at least 2 steps, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.steps

    @property
    def duration(self) -> float:
        return self.t1 - self.t0

    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.steps + 1)

    def midpoints(self) -> np.ndarray:
        return self.t0 + (np.arange(self.steps) + 0.5) * self.dt

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t0, self.t1, self.steps * factor)


@dataclass(frozen=True, eq=False)
class OperatorCurve:
    grid: TimeGrid
    samples: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise ValueError(f"unknown curve kind {self.kind!r}")
        arr = np.asarray(self.samples, dtype=complex)
        if arr.ndim != 3 or arr.shape[0] != self.grid.steps + 1:
            raise DimensionMismatch(
                f"expected {self.grid.steps + 1} samples, got array of shape {arr.shape}")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape[1:]

    def times(self) -> np.ndarray:
        return self.grid.times()

    def densities(self) -> np.ndarray:
        """Projected density samples (identity for density curves)."""
        if self.kind == "density":
            return self.samples
        if self.kind == "amplitude":
            return self.samples @ dag(self.samples)
        raise ValueError(f"a {self.kind} curve has no density projection")


@dataclass(frozen=True, eq=False)
class PiecewiseCurve:
    """Concatenation of smooth curves; corners sit at the segment boundaries."""

    segments: tuple[OperatorCurve, ...]

    def __post_init__(self):
        kinds = {s.kind for s in self.segments}
        if len(kinds) != 1:
            raise ValueError("segments must share a kind")

    @property
    def kind(self) -> str:
        return self.segments[0].kind

    def densities(self) -> np.ndarray:
        return np.concatenate([s.densities() for s in self.segments])

    def first(self) -> np.ndarray:
        return self.segments[0].samples[0]

    def last(self) -> np.ndarray:
        return self.segments[-1].samples[-1]


def concatenate(*curves) -> PiecewiseCurve:
    segs: list[OperatorCurve] = []
    for c in curves:
        segs.extend(c.segments if isinstance(c, PiecewiseCurve) else [c])
    for a, b in zip(segs, segs[1:]):
        if np.linalg.norm(a.densities()[-1] - b.densities()[0]) > 1e-8:
            raise ValueError("consecutive segments do not meet")
    return PiecewiseCurve(tuple(segs))


def segments_of(curve) -> tuple[OperatorCurve, ...]:
    return curve.segments if isinstance(curve, PiecewiseCurve) else (curve,)


def sample_curve(fn: Callable[[float], np.ndarray], grid: TimeGrid, kind: str = "density") -> OperatorCurve:
    return OperatorCurve(grid, np.array([fn(t) for t in grid.times()], dtype=complex), kind)


def _pauli_word(word: str) -> np.ndarray:
    try:
        return reduce(np.kron, [PAULIS[c] for c in word.upper()])
    except KeyError as exc:
        raise ValueError(f"bad Pauli word {word!r}") from exc


def pauli_matrix(coeffs: Mapping[str, float]) -> np.ndarray:
    words = list(coeffs)
    if not words:
        raise ValueError("empty Pauli polynomial")
    lengths = {len(w) for w in words}
    if len(lengths) != 1:
        raise ValueError("Pauli words must all have the same length")
    return sum(complex(c) * _pauli_word(w) for w, c in coeffs.items())


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """Time-dependent Hermitian generator.

    kind ``constant``: ``data`` is a matrix. ``pauli_poly``: a map of Pauli
    words to real coefficients. ``sampled``: a sequence of matrices on a
    uniform grid over the evolution interval, interpolated linearly.
    ``function``: a callable t -> matrix.
    """

    kind: str
    data: object

    def __post_init__(self):
        if self.kind not in ("constant", "sampled", "pauli_poly", "function"):
            raise ValueError(f"unknown Hamiltonian kind {self.kind!r}")
        if self.kind == "constant":
            object.__setattr__(self, "data", _checked_h(self.data))
        elif self.kind == "pauli_poly":
            object.__setattr__(self, "data", dict(self.data))
            object.__setattr__(self, "_matrix", _checked_h(pauli_matrix(self.data)))
        elif self.kind == "sampled":
            mats = np.array([_checked_h(m) for m in self.data])
            if len(mats) < 2:
                raise ValueError("sampled Hamiltonian needs at least two samples")
            object.__setattr__(self, "data", mats)

    @classmethod
    def constant(cls, h) -> "HamiltonianSpec":
        return cls("constant", h)

    @property
    def time_independent(self) -> bool:
        return self.kind in ("constant", "pauli_poly")

    @property
    def dim(self) -> int | None:
        if self.kind == "constant":
            return self.data.shape[0]
        if self.kind == "pauli_poly":
            return self._matrix.shape[0]
        if self.kind == "sampled":
            return self.data.shape[1]
        return None

    def at(self, t: float, grid: TimeGrid) -> np.ndarray:
        if self.kind == "constant":
            return self.data
        if self.kind == "pauli_poly":
            return self._matrix
        if self.kind == "function":
            return _checked_h(self.data(t))
        m = len(self.data) - 1
        s = np.clip((t - grid.t0) / grid.duration * m, 0.0, m)
        i = min(int(np.floor(s)), m - 1)
        frac = s - i
        return (1.0 - frac) * self.data[i] + frac * self.data[i + 1]

    def on_grid(self, grid: TimeGrid) -> np.ndarray:
        return np.array([self.at(t, grid) for t in grid.times()])


def _checked_h(h) -> np.ndarray:
    arr = np.asarray(h, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"Hamiltonian must be square, got shape {arr.shape}")
    scale = max(1.0, float(np.linalg.norm(arr)))
    if np.linalg.norm(arr - dag(arr)) > 1e-12 * scale:
        raise NonHermitian("Hamiltonian is not Hermitian")
    return 0.5 * (arr + dag(arr))


def propagators(h: HamiltonianSpec, grid: TimeGrid, dim: int) -> np.ndarray:
    """U_0..U_N with U_{i+1} = exp(-i H(t_i + dt/2) dt) U_i.

    For a time-independent H the product is formed in closed form through
    the eigendecomposition, which is what the stepping computes exactly.
    """
    if h.dim is not None and h.dim != dim:
        raise DimensionMismatch(f"Hamiltonian has dim {h.dim}, state has dim {dim}")
    if h.time_independent:
        ts = grid.times() - grid.t0
        w, v = np.linalg.eigh(h.at(grid.t0, grid))
        return (v[None] * np.exp(-1j * ts[:, None] * w[None, :])[:, None, :]) @ dag(v)[None]
    mids = np.array([h.at(t, grid) for t in grid.midpoints()])
    steps = expm_hermitian(mids, grid.dt)
    us = np.empty((grid.steps + 1, dim, dim), dtype=complex)
    us[0] = np.eye(dim)
    for i in range(grid.steps):
        us[i + 1] = steps[i] @ us[i]
    return us


def evolve_density(rho0, h: HamiltonianSpec, grid: TimeGrid) -> OperatorCurve:
    rho = check_density(rho0)
    us = propagators(h, grid, rho.shape[0])
    return OperatorCurve(grid, us @ rho[None] @ dag(us), "density")


def lift_by_propagator(psi0, h: HamiltonianSpec, grid: TimeGrid) -> OperatorCurve:
    psi = np.asarray(psi0, dtype=complex)
    if psi.ndim == 1:
        psi = psi[:, None]
    us = propagators(h, grid, psi.shape[0])
    return OperatorCurve(grid, us @ psi[None], "amplitude")


def finite_differences(samples: np.ndarray, dt: float, order: int = 2) -> np.ndarray:
    """Derivative estimate at every sample, second or fourth order."""
    x = np.asarray(samples)
    if order == 4:
        return _fourth_order_differences(x, dt)
    if order != 2:
        raise ValueError("order must be 2 or 4")
    if x.shape[0] < 3:
        raise ValueError("need at least three samples")
    d = np.empty_like(x)
    d[1:-1] = (x[2:] - x[:-2]) / (2.0 * dt)
    d[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt)
    d[-1] = (3.0 * x[-1] - 4.0 * x[-2] + x[-3]) / (2.0 * dt)
    return d


def _fourth_order_differences(x: np.ndarray, dt: float) -> np.ndarray:
    if x.shape[0] < 5:
        raise ValueError("need at least five samples")
    d = np.empty_like(x)
    d[2:-2] = (x[:-4] - 8.0 * x[1:-3] + 8.0 * x[3:-1] - x[4:]) / (12.0 * dt)
    # one-sided five-point stencils at the two samples next to each end
    d[0] = (-25.0 * x[0] + 48.0 * x[1] - 36.0 * x[2] + 16.0 * x[3] - 3.0 * x[4]) / (12.0 * dt)
    d[1] = (-3.0 * x[0] - 10.0 * x[1] + 18.0 * x[2] - 6.0 * x[3] + x[4]) / (12.0 * dt)
    d[-1] = (25.0 * x[-1] - 48.0 * x[-2] + 36.0 * x[-3] - 16.0 * x[-4] + 3.0 * x[-5]) / (12.0 * dt)
    d[-2] = (3.0 * x[-1] + 10.0 * x[-2] - 18.0 * x[-3] + 6.0 * x[-4] - x[-5]) / (12.0 * dt)
    return d


def velocity(curve: OperatorCurve, i: int) -> np.ndarray:
    n = len(curve) - 1
    if not 0 <= i <= n:
        raise IndexOutOfRange(f"index {i} outside 0..{n}")
    x, dt = curve.samples, curve.grid.dt
    if 0 < i < n:
        return (x[i + 1] - x[i - 1]) / (2.0 * dt)
    if i == 0:
        return (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt)
    return (3.0 * x[n] - 4.0 * x[n - 1] + x[n - 2]) / (2.0 * dt)


def velocities(curve: OperatorCurve) -> np.ndarray:
    return finite_differences(curve.samples, curve.grid.dt)


def is_closed(curve, tol: float = 1e-8) -> bool:
    """Closedness of the projected density curve, in Frobenius norm."""
    if isinstance(curve, PiecewiseCurve):
        first = curve.segments[0].densities()[0]
        last = curve.segments[-1].densities()[-1]
    else:
        if curve.kind in ("density", "amplitude"):
            dens = curve.densities()
            first, last = dens[0], dens[-1]
        else:
            first, last = curve.samples[0], curve.samples[-1]
    return bool(np.linalg.norm(first - last) < tol)
